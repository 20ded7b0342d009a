use std::path::PathBuf;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_finclone"))
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let mut c = bin();
    for a in args {
        c.arg(a);
    }
    c.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const K3_SINGLETONS: &str =
    "size 3; E/2 = {(0,1),(1,0),(1,2),(2,1),(0,2),(2,0)}; c0/1 = {(0)}; c1/1 = {(1)}; c2/1 = {(2)};";
const AFFINE: &str = "size 2; xor/3 = {(0,0,1),(0,1,0),(1,0,0),(1,1,1)}; c0/1 = {(0)}; c1/1 = {(1)};";
const ORDER_CONSTANTS: &str = r#"{"size": 2, "relations": {"le/2": [[0,0],[0,1],[1,1]], "zero/1": [[0]], "one/1": [[1]]}}"#;
const LE: &str = "size 2; le/2 = {(0,0),(0,1),(1,1)};";
const MINORITY: &str = r#"{"domain_size":2,"generators":[{"domain_size":2,"arity":3,"table":[0,1,1,0,1,0,0,1]}]}"#;

#[test]
fn classify_exit_codes() {
    let d = TempDir::new().unwrap();
    let hard = write(&d, "k3.txt", K3_SINGLETONS);
    let easy = write(&d, "affine.txt", AFFINE);
    let json = d.path().join("r.json");

    let o = run(&[&"classify", &hard, &"--json", &json]);
    assert_eq!(code(&o), 3, "{}", stdout(&o));
    assert!(std::fs::read_to_string(&json).unwrap().contains("hardness_certificate"));

    let o = run(&[&"classify", &easy, &"--json", &"-"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("taylor_witness"));
    assert!(stdout(&o).contains("siggers"));

    let o = run(&[&"classify", &easy, &"--budget-nodes", &"1"]);
    assert_eq!(code(&o), 4);
    assert!(stdout(&o).contains("inconclusive"));
}

#[test]
fn parse_and_capacity_errors() {
    let d = TempDir::new().unwrap();
    let bad = write(&d, "bad.txt", "size 2; E/2 = {(0,2)};");
    assert_eq!(code(&run(&[&"core", &bad])), 1);
    let garbled = write(&d, "garbled.txt", "size two;");
    assert_eq!(code(&run(&[&"classify", &garbled])), 1);
    let missing = d.path().join("missing.txt");
    assert_eq!(code(&run(&[&"classify", &missing])), 1);
    let le = write(&d, "le.txt", LE);
    assert_eq!(code(&run(&[&"poly", &"--arity", &"40", &le])), 2);
}

#[test]
fn core_poly_and_color_examples() {
    let d = TempDir::new().unwrap();
    let path3 = write(&d, "path3.txt", "size 3; E/2 = {(0,1),(1,0),(1,2),(2,1)};");
    let o = run(&[&"core", &path3]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("2 elements"));

    let order = write(&d, "boolean-order.json", ORDER_CONSTANTS);
    let o = run(&[&"poly", &"--arity", &"2", &order]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("4 polymorphisms of arity 2"));

    let le = write(&d, "le2.txt", LE);
    let minority = write(&d, "minority-clone.json", MINORITY);
    let o = run(&[&"color", &"--strong", &"--target", &le, &minority]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("no strong coloring; refutation digest"));
}

#[test]
fn reports_are_deterministic_and_verify() {
    let d = TempDir::new().unwrap();
    let k3 = write(&d, "k3.txt", K3_SINGLETONS);
    let le = write(&d, "le.txt", LE);
    let minority = write(&d, "minority.json", MINORITY);
    let path3 = write(&d, "p.txt", "size 3; E/2 = {(0,1),(1,0),(1,2),(2,1)};");
    let k2 = write(&d, "k2.txt", "size 2; E/2 = {(0,1),(1,0)};");
    let cases: Vec<Vec<&dyn AsRef<std::ffi::OsStr>>> = vec![
        vec![&"classify", &k3],
        vec![&"hom", &k3, &"--target", &k3],
        vec![&"homeq", &path3, &k2],
        vec![&"core", &path3],
        vec![&"color", &"--target", &le, &minority],
        vec![&"h1", &k3, &"--target", &le],
        vec![&"maltsev", &"--test", &"hm-chain", &minority],
        vec![&"maltsev", &"--test", &"n-perm", &le],
    ];
    for (i, case) in cases.iter().enumerate() {
        let mut texts = Vec::new();
        for run_no in 0..2 {
            let out = d.path().join(format!("r{i}-{run_no}.json"));
            let mut args = case.clone();
            args.push(&"--json");
            args.push(&out);
            let o = run(&args);
            assert!(code(&o) == 0 || code(&o) == 3, "case {i}: {}", String::from_utf8_lossy(&o.stderr));
            texts.push(std::fs::read(&out).unwrap());
            let v = run(&[&"verify", &out]);
            assert_eq!(code(&v), 0, "case {i}: {}", String::from_utf8_lossy(&v.stderr));
        }
        assert_eq!(texts[0], texts[1], "case {i}");
    }
}

#[test]
fn tampered_report_is_rejected() {
    let d = TempDir::new().unwrap();
    let path3 = write(&d, "p.txt", "size 3; E/2 = {(0,1),(1,0),(1,2),(2,1)};");
    let k2 = write(&d, "k2.txt", "size 2; E/2 = {(0,1),(1,0)};");
    let out = d.path().join("r.json");
    assert_eq!(code(&run(&[&"hom", &path3, &"--target", &k2, &"--json", &out])), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut report: serde_json::Value = serde_json::from_str(&text).unwrap();
    let map = &mut report["outcome"]["homomorphism"]["Found"]["map"];
    assert!(map.is_array(), "{text}");
    *map = serde_json::json!([0, 0, 0]);
    std::fs::write(&out, serde_json::to_string(&report).unwrap()).unwrap();
    assert_eq!(code(&run(&[&"--verify", &out])), 5);
}

#[test]
fn config_file_and_flag_override() {
    let d = TempDir::new().unwrap();
    let affine = write(&d, "affine.txt", AFFINE);
    let cfg = write(&d, "run.conf", "# limits\nbudget_nodes = 1\ndeterministic = false\n");
    let o = run(&[&"classify", &affine, &"--config", &cfg, &"--json", &"-"]);
    assert_eq!(code(&o), 4);
    assert!(stdout(&o).contains("elapsed_ms"));
    let o = run(&[&"classify", &affine, &"--config", &cfg, &"--budget-nodes", &"1000000", &"--deterministic"]);
    assert_eq!(code(&o), 0);
    let bad = write(&d, "bad.conf", "colour = blue\n");
    assert_eq!(code(&run(&[&"classify", &affine, &"--config", &bad])), 1);
}

#[test]
fn pp_and_ppdef() {
    let d = TempDir::new().unwrap();
    let le = write(&d, "le.txt", LE);
    let spec = write(&d, "sq.pp", "dimension 2;\nle(x1,x2,y1,y2) := le(x1,y1) & le(x2,y2);\n");
    let o = run(&[&"pp", &le, &"--spec", &spec, &"--json", &"-"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cands = write(
        &d,
        "cands.txt",
        "size 2; eq/2 = {(0,0),(1,1)}; neq/2 = {(0,1),(1,0)}; ge/2 = {(0,0),(1,0),(1,1)};",
    );
    let o = run(&[&"ppdef", &le, &"--target", &cands]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.contains("eq: pp-definable"), "{s}");
    assert!(s.contains("neq: not pp-definable"), "{s}");
    assert!(s.contains("ge: pp-definable"), "{s}");
}
