//! End-to-end acceptance checks. Prints one line per criterion and exits
//! non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use common::{all_tuples, brute_homs, brute_polymorphisms, relation_from_mask};
use finclone::clone::{all_polymorphisms, boolean};
use finclone::constructions::{is_pp_definable_with_cap, reflect_assignment, Definability, ReflectionMaps};
use finclone::fixtures;
use finclone::free::{
    find_coloring, free_structure, h1_homomorphism_exists, h1_to_projections, induced_operations, CloneSource,
    Coloring, FreeStructure, ProjectionVerdict,
};
use finclone::hom::{add_singletons, core_of, find_isomorphism, hom_equivalent, homomorphisms, is_hom};
use finclone::identities::{has_cyclic, has_siggers, Assignment, H1IdentitySystem};
use finclone::maltsev::{find_hagemann_mitschke, DayFixture};
use finclone::report::{self, MaltsevTest, Report, RunConfig};
use finclone::{preserves, preserves_all, CloneGenSet, Decision, Elem, HomMap, OperationTable, RelStructure, Relation, SearchBudget};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn budget() -> SearchBudget {
    SearchBudget::default()
}

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn generated(gens: Vec<OperationTable>) -> CloneSource {
    CloneSource::Generated(CloneGenSet::new(2, gens).unwrap())
}

fn projections() -> CloneSource {
    CloneSource::Generated(CloneGenSet::projections(2))
}

fn minority() -> CloneSource {
    generated(vec![boolean::minority()])
}

fn min_max() -> CloneSource {
    generated(vec![boolean::min(), boolean::max()])
}

fn criterion_1() -> Outcome {
    let corpus = fixtures::boolean_corpus();
    check(corpus.len() >= 12, "corpus too small")?;
    let t = fixtures::projection_test_structure();
    let mut hard = 0;
    for (name, a) in &corpus {
        let by_projection = match e(h1_to_projections(a, &budget()))? {
            ProjectionVerdict::Exists(_) => true,
            ProjectionVerdict::NotExists { .. } => false,
            ProjectionVerdict::BudgetExceeded => return Err(format!("{name}: budget")),
        };
        let by_coloring = e(h1_homomorphism_exists(a, &t, &budget()))?.is_found();
        let no_siggers = e(has_siggers(a, &budget()))?.is_absent();
        let no_cyclic = e(has_cyclic(a, 3, &budget()))?.is_absent();
        check(
            by_projection == no_siggers && no_siggers == no_cyclic && by_coloring == by_projection,
            format!("{name}: h1 {by_projection}, coloring {by_coloring}, no Siggers {no_siggers}, no cyclic {no_cyclic}"),
        )?;
        hard += by_projection as usize;
    }
    Ok(format!("{} structures, {hard} hard, zero disagreements", corpus.len()))
}

/// Codes `2a + b` of `(a, b) ∈ Z_2^2`; `m` is a 2x2 matrix over `Z_2`
/// stored row-major in the low four bits.
fn apply_matrix(m: u32, x: Elem) -> Elem {
    let (a, b) = (x >> 1, x & 1);
    let r0 = ((m >> 3) & 1) * a ^ ((m >> 2) & 1) * b;
    let r1 = ((m >> 1) & 1) * a ^ (m & 1) * b;
    2 * r0 + r1
}

fn criterion_2() -> Outcome {
    let a = fixtures::hepp_a();
    let a1 = fixtures::hepp_a_prime();
    let b = fixtures::hepp_b();
    // (a)
    check(e(hom_equivalent(&a1, &b, &budget()))?.is_found(), "not hom-equivalent")?;
    let first = HomMap::new(2, vec![0, 0, 1, 1]).map_err(|e| e.to_string())?;
    let embed = HomMap::new(4, vec![0, 2]).map_err(|e| e.to_string())?;
    check(e(is_hom(&first, &a1, &b))? && e(is_hom(&embed, &b, &a1))?, "coordinate maps rejected")?;
    // (b)
    let core = e(core_of(&a1, &budget()))?;
    check(e(find_isomorphism(&core.structure, &b, &budget()))?.is_found(), "core is not B")?;
    // (c) invariance under Pol(A) up to arity 4, against closure under the
    // generating operations `αx + (1-α)y` and `x - y + z`
    let mut generators: Vec<OperationTable> = (0..16)
        .map(|m| OperationTable::from_fn(4, 2, |x| apply_matrix(m, x[0]) ^ apply_matrix(m ^ 0b1001, x[1])).unwrap())
        .collect();
    generators.push(OperationTable::from_fn(4, 3, |x| x[0] ^ x[1] ^ x[2]).unwrap());
    check(generators.iter().all(|f| preserves_all(f, &a)), "oracle operations are not polymorphisms")?;
    let mut sizes = BTreeMap::new();
    let mut nonempty_ok = true;
    let mut empty_invariant = false;
    for mask in 0u32..16 {
        let subset: Vec<Vec<Elem>> = (0..4).filter(|i| mask >> i & 1 == 1).map(|i| vec![i]).collect();
        let r = Relation::new(4, 1, &subset).unwrap();
        let closed = generators.iter().all(|f| preserves(f, &r));
        let invariant = match e(is_pp_definable_with_cap(&a, &r, 4, &budget()))? {
            Definability::Definable { complete, .. } => {
                check(complete, "unary check incomplete")?;
                true
            }
            Definability::NotDefinable { .. } => false,
            Definability::BudgetExceeded => return Err("budget".into()),
        };
        check(closed == invariant, format!("subset {mask:04b}: oracle {closed}, Galois check {invariant}"))?;
        if invariant {
            *sizes.entry(subset.len()).or_insert(0) += 1;
            if subset.is_empty() {
                empty_invariant = true;
            } else {
                nonempty_ok &= subset.len() == 1 || subset.len() == 4;
            }
        }
    }
    let summary = format!("invariant subsets by cardinality {sizes:?}");
    check(nonempty_ok, format!("(c) {summary}"))?;
    check(
        !empty_invariant,
        format!(
            "(a), (b) hold; (c) {summary}: the empty subset is invariant (and pp-definable), so cardinality 0 occurs besides 1 and 4"
        ),
    )?;
    Ok(format!("maps accepted, core isomorphic to B, {summary}"))
}

fn strong_coloring(source: &CloneSource, b: &RelStructure) -> Result<(FreeStructure, Decision<Coloring>), String> {
    let f = e(free_structure(source, b, &budget()))?;
    let c = e(find_coloring(&f, true, &budget()))?;
    Ok((f, c))
}

fn criterion_3() -> Outcome {
    let le = fixtures::boolean_order();
    for (name, source, expected) in [("projections", projections(), true), ("min/max", min_max(), true), ("minority", minority(), false)] {
        let (_, c) = strong_coloring(&source, &le)?;
        check(c.is_found() == expected, format!("{name}: strong le-coloring {}", c.is_found()))?;
    }
    check(e(find_hagemann_mitschke(&minority(), 2, &budget()))?.is_found(), "minority has no 2-chain")?;
    for n in 2..=4 {
        check(e(find_hagemann_mitschke(&projections(), n, &budget()))?.is_absent(), format!("projections have an {n}-chain"))?;
    }
    Ok("colorings as expected, minority 2-chain found, no chain for projections up to n = 4".into())
}

fn criterion_4() -> Outcome {
    let day = DayFixture::structure();
    let mut times = Vec::new();
    for (name, source, expected) in [("projections", projections(), true), ("minority", minority(), false), ("min/max", min_max(), false)] {
        let start = Instant::now();
        let (f, c) = strong_coloring(&source, &day)?;
        check(c.is_found() == expected, format!("{name}: strong Day coloring {}", c.is_found()))?;
        times.push(format!("{name} {} elements {:.1}s", f.carrier.len(), start.elapsed().as_secs_f64()));
    }
    Ok(format!("colorings as expected ({})", times.join(", ")))
}

/// Induced operations must preserve every relation of the target; checked
/// directly rather than through the library's violation count.
fn induced_ok(f: &FreeStructure, c: &Coloring) -> Result<usize, String> {
    let induced = e(induced_operations(f, c, 3, &budget()))?;
    check(induced.violations == 0, "violations reported")?;
    check(induced.operations.iter().all(|op| preserves_all(op, &f.target)), "induced operation breaks a relation")?;
    Ok(induced.checked)
}

fn criterion_5() -> Outcome {
    let mut colorings = 0;
    let mut checked = 0;
    for b in [fixtures::boolean_order(), DayFixture::structure()] {
        for source in [projections(), minority(), min_max()] {
            let (f, c) = strong_coloring(&source, &b)?;
            if let Some(c) = c.found() {
                colorings += 1;
                checked += induced_ok(&f, &c)?;
            }
        }
    }
    let t = fixtures::projection_test_structure();
    let mut pairs: Vec<(RelStructure, RelStructure)> =
        fixtures::boolean_corpus().into_iter().map(|(_, a)| (a, t.clone())).collect();
    pairs.push((add_singletons(&fixtures::clique(3)), t.clone()));
    pairs.push((fixtures::clique(3), fixtures::clique(3)));
    pairs.push((fixtures::hepp_b(), fixtures::boolean_affine_with_constants()));
    pairs.push((fixtures::boolean_order_with_constants(), fixtures::boolean_order()));
    for (a, b) in &pairs {
        if let Some(cert) = e(h1_homomorphism_exists(a, b, &budget()))?.found() {
            colorings += 1;
            let f = e(free_structure(&CloneSource::Polymorphisms(a.clone()), b, &budget()))?;
            checked += induced_ok(&f, &cert.coloring)?;
        }
    }
    Ok(format!("{colorings} colorings, {checked} reflected operations, zero violations"))
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        if self.0[x] != x {
            let r = self.find(self.0[x]);
            self.0[x] = r;
        }
        self.0[x]
    }

    fn union(&mut self, x: usize, y: usize) {
        let (a, b) = (self.find(x), self.find(y));
        self.0[a] = b;
    }
}

/// A side of an identity: symbol index and variable indices.
type Side = (usize, Vec<usize>);

fn cell(n: usize, vals: &[Elem], vars: &[usize]) -> usize {
    vars.iter().fold(0, |acc, &v| acc * n + vals[v] as usize)
}

fn identity_holds(ops: &[OperationTable], lhs: &Side, rhs: &Side, vars: usize) -> bool {
    let n = ops[0].domain_size();
    all_tuples(n, vars).iter().all(|v| {
        let l: Vec<Elem> = lhs.1.iter().map(|&i| v[i]).collect();
        let r: Vec<Elem> = rhs.1.iter().map(|&i| v[i]).collect();
        ops[lhs.0].eval(&l) == ops[rhs.0].eval(&r)
    })
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let names = ["f", "g"];
    let trials = 500;
    let mut passed = 0;
    for trial in 0..trials {
        let n = rng.gen_range(1..=4usize);
        let k = rng.gen_range(1..=2usize);
        let arities: Vec<usize> = (0..k).map(|_| rng.gen_range(1..=3)).collect();
        let vars = rng.gen_range(1..=3usize);
        let side = |rng: &mut ChaCha8Rng| -> Side {
            let s = rng.gen_range(0..k);
            (s, (0..arities[s]).map(|_| rng.gen_range(0..vars)).collect())
        };
        let lhs = side(&mut rng);
        let rhs = side(&mut rng);
        // plant the identity: one union-find over the cells of all tables
        let offsets: Vec<usize> = arities.iter().scan(0, |acc, &a| {
            let o = *acc;
            *acc += n.pow(a as u32);
            Some(o)
        }).collect();
        let total: usize = arities.iter().map(|&a| n.pow(a as u32)).sum();
        let mut uf = UnionFind((0..total).collect());
        for v in all_tuples(n, vars) {
            uf.union(offsets[lhs.0] + cell(n, &v, &lhs.1), offsets[rhs.0] + cell(n, &v, &rhs.1));
        }
        let values: Vec<Elem> = (0..total).map(|_| rng.gen_range(0..n as Elem)).collect();
        let ops: Vec<OperationTable> = (0..k)
            .map(|s| {
                let table = (0..n.pow(arities[s] as u32)).map(|c| values[uf.find(offsets[s] + c)]).collect();
                OperationTable::new(n, arities[s], table).unwrap()
            })
            .collect();
        check(identity_holds(&ops, &lhs, &rhs, vars), format!("trial {trial}: planting failed"))?;

        let m = rng.gen_range(1..=4usize);
        let h1: Vec<Elem> = (0..m).map(|_| rng.gen_range(0..n as Elem)).collect();
        let h2: Vec<Elem> = (0..n).map(|_| rng.gen_range(0..m as Elem)).collect();
        let maps = e(ReflectionMaps::new(n, m, h1, h2))?;
        let asg: Assignment = (0..k).map(|s| (names[s].to_string(), ops[s].clone())).collect();
        let reflected = e(reflect_assignment(&asg, &maps))?;
        let text = |(s, vs): &Side| {
            let args: Vec<String> = vs.iter().map(|v| format!("v{v}")).collect();
            format!("{}({})", names[*s], args.join(","))
        };
        let system = e(H1IdentitySystem::parse(&format!("{} = {};", text(&lhs), text(&rhs))))?;
        let refl_ops: Vec<OperationTable> = (0..k).map(|s| reflected[names[s]].clone()).collect();
        let direct = identity_holds(&refl_ops, &lhs, &rhs, vars);
        check(direct == system.holds(&reflected), format!("trial {trial}: checkers disagree"))?;
        passed += direct as usize;
    }
    check(passed == trials, format!("{passed}/{trials} trials"))?;
    Ok(format!("{passed}/{trials} reflected assignments satisfy their identity"))
}

fn random_structure(rng: &mut ChaCha8Rng, size: usize, arities: &[usize]) -> RelStructure {
    let rels = arities.iter().enumerate().map(|(i, &k)| {
        let mask: Vec<bool> = (0..size.pow(k as u32)).map(|_| rng.gen_bool(0.5)).collect();
        (format!("R{i}"), relation_from_mask(size, k, &mask))
    });
    RelStructure::new(size, rels).unwrap()
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut instances = 0;
    let mut largest = 0u64;
    for _ in 0..40 {
        let source_size = rng.gen_range(1..=6usize);
        let target_size = rng.gen_range(1..=6usize);
        let space = (target_size as u64).pow(source_size as u32);
        if space > 100_000 {
            continue;
        }
        let arities = [2, 1];
        let c = random_structure(&mut rng, source_size, &arities);
        let a = random_structure(&mut rng, target_size, &arities);
        let got: Vec<Vec<Elem>> = e(homomorphisms(&c, &a, &budget()))?
            .map(|h| h.map(|h| h.map))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        check(got == brute_homs(&c, &a), format!("homomorphisms {}", c.to_text()))?;
        instances += 1;
        largest = largest.max(space);
    }
    for (size, n) in [(2usize, 1usize), (2, 2), (2, 3), (2, 4), (3, 1), (3, 2), (4, 1)] {
        for _ in 0..5 {
            let k = rng.gen_range(1..=3usize);
            let space = (size as u64).pow(size.pow(n as u32) as u32);
            let arities: Vec<usize> = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(1..=k)).collect();
            let a = random_structure(&mut rng, size, &arities);
            let got: Vec<Vec<Elem>> = e(all_polymorphisms(&a, n, &budget()))?.iter().map(|f| f.table().to_vec()).collect();
            check(got == brute_polymorphisms(&a, n), format!("{n}-ary polymorphisms of {}", a.to_text()))?;
            instances += 1;
            largest = largest.max(space);
        }
    }
    check(instances >= 50, format!("only {instances} instances"))?;
    Ok(format!("{instances} instances agree with enumeration (largest space {largest})"))
}

fn criterion_8() -> Outcome {
    let config = RunConfig::default();
    let mut builders: Vec<(String, Box<dyn Fn() -> finclone::Result<Report>>)> = Vec::new();
    for (name, a) in fixtures::boolean_corpus() {
        builders.push((format!("classify {name}"), Box::new(move || report::classify(&a, config))));
    }
    for (bname, b) in [("le", fixtures::boolean_order()), ("day", DayFixture::structure())] {
        for (sname, s) in [("projections", projections()), ("minority", minority()), ("min/max", min_max())] {
            let b = b.clone();
            builders.push((format!("color {sname} by {bname}"), Box::new(move || report::color(&s, &b, true, config))));
        }
    }
    builders.push(("maltsev minority".into(), Box::new(move || report::maltsev(&minority(), MaltsevTest::HmChain, config))));
    builders.push(("maltsev projections".into(), Box::new(move || report::maltsev(&projections(), MaltsevTest::NPerm, config))));
    builders.push(("homeq hepp".into(), Box::new(move || report::homeq(&fixtures::hepp_a_prime(), &fixtures::hepp_b(), config))));
    builders.push(("core hepp".into(), Box::new(move || report::core(&fixtures::hepp_a_prime(), config))));
    builders.push(("h1 K3".into(), Box::new(move || report::h1(&fixtures::clique(3), &fixtures::clique(3), config))));
    builders.push(("poly le".into(), Box::new(move || report::poly(&fixtures::boolean_order_with_constants(), 2, config))));
    let subsets = RelStructure::new(
        4,
        (0u32..16).map(|m| {
            let t: Vec<Vec<Elem>> = (0..4).filter(|i| m >> i & 1 == 1).map(|i| vec![i]).collect();
            (format!("S{m}"), Relation::new(4, 1, t).unwrap())
        }),
    )
    .unwrap();
    builders.push(("ppdef hepp".into(), Box::new(move || report::ppdef(&fixtures::hepp_a(), &subsets, 4, config))));
    for (name, build) in &builders {
        let first = e(build())?;
        let second = e(build())?;
        check(first.to_json() == second.to_json(), format!("{name}: reports differ"))?;
        let parsed = e(Report::from_json(&first.to_json()))?;
        e(report::verify(&parsed)).map_err(|m| format!("{name}: {m}"))?;
    }
    Ok(format!("{} reports byte-identical across runs and verified", builders.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 h1/Siggers/cyclic agreement on the Boolean corpus", criterion_1),
        ("2 hepp example", criterion_2),
        ("3 colorings by the Boolean order", criterion_3),
        ("4 colorings by the Day structure", criterion_4),
        ("5 induced operations are polymorphisms", criterion_5),
        ("6 reflections preserve height-1 identities", criterion_6),
        ("7 search agrees with enumeration", criterion_7),
        ("8 deterministic verified reports", criterion_8),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({secs:.1}s) {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({secs:.1}s) {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} of 8 criteria failed");
        std::process::exit(1);
    }
}
