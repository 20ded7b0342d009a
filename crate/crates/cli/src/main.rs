use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use finclone::constructions::PPPowerSpec;
use finclone::report::{self, exit, MaltsevTest, Report, RunConfig};
use finclone::{parse_structure, Error, RelStructure, SearchBudget};

#[derive(Parser)]
#[command(name = "finclone", version, about = "Polymorphism clones, colorings and h1 tests for finite structures")]
struct Cli {
    /// Re-verify a saved JSON report and exit.
    #[arg(long, value_name = "REPORT")]
    verify: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args)]
struct Common {
    /// Also write the JSON report to PATH (`-` for stdout).
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    /// key=value file with defaults for the options below.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    budget_nodes: Option<u64>,
    #[arg(long, value_name = "N")]
    budget_ms: Option<u64>,
    #[arg(long, value_name = "N")]
    parallel: Option<usize>,
    /// Omit timings so that reports are byte-identical across runs.
    #[arg(long, value_name = "BOOL", num_args = 0..=1, default_missing_value = "true")]
    deterministic: Option<bool>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestArg {
    NPerm,
    Modular,
    HmChain,
}

#[derive(Subcommand)]
enum Command {
    /// Taylor witness or hardness certificate for a structure.
    Classify {
        structure: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Homomorphism from STRUCTURE to --target.
    Hom {
        structure: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Core and retraction.
    Core {
        structure: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Homomorphisms in both directions.
    Homeq {
        left: PathBuf,
        right: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// All polymorphisms of the given arity.
    Poly {
        structure: PathBuf,
        #[arg(long)]
        arity: usize,
        #[command(flatten)]
        common: Common,
    },
    /// pp-power by --spec, optionally compared with --target.
    Pp {
        structure: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        target: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// pp-definability of each relation of --target.
    Ppdef {
        structure: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Largest polymorphism arity tried.
        #[arg(long)]
        cap: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Coloring of the free structure of CLONE by --target.
    Color {
        clone: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        strong: bool,
        #[command(flatten)]
        common: Common,
    },
    /// h1 clone homomorphism from Pol(STRUCTURE) to Pol(--target).
    H1 {
        structure: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Maltsev conditions of a clone.
    Maltsev {
        clone: PathBuf,
        #[arg(long, value_enum)]
        test: TestArg,
        #[command(flatten)]
        common: Common,
    },
    /// Re-verify a saved JSON report.
    Verify { report: PathBuf },
}

struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Capacity { .. } => exit::CAPACITY,
            Error::BudgetExceeded => exit::INCONCLUSIVE,
            Error::CrossCheck(_) => exit::INTERNAL,
            _ => exit::INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure {
        code: exit::INPUT,
        message: format!("{}: {e}", path.display()),
    })
}

fn with_path<T>(path: &Path, r: finclone::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

fn structure(path: &Path) -> Result<RelStructure, Failure> {
    with_path(path, parse_structure(&read(path)?))
}

fn clone_source(path: &Path) -> Result<finclone::free::CloneSource, Failure> {
    with_path(path, report::parse_clone_source(&read(path)?))
}

fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, Failure> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Failure {
            code: exit::INPUT,
            message: format!("config line {}: expected key = value", i + 1),
        })?;
        out.insert(k.trim().replace('-', "_"), v.trim().trim_matches('"').to_string());
    }
    Ok(out)
}

fn config_value<T: std::str::FromStr>(file: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, Failure> {
    file.get(key)
        .map(|v| {
            v.parse().map_err(|_| Failure {
                code: exit::INPUT,
                message: format!("config: bad value `{v}` for `{key}`"),
            })
        })
        .transpose()
}

struct Settings {
    config: RunConfig,
    cap: Option<usize>,
}

fn settings(common: &Common) -> Result<Settings, Failure> {
    let file = match &common.config {
        Some(p) => parse_config_file(&read(p)?)?,
        None => BTreeMap::new(),
    };
    if let Some(k) = file
        .keys()
        .find(|k| !["budget_nodes", "budget_ms", "parallel", "deterministic", "cap"].contains(&k.as_str()))
    {
        return Err(Failure {
            code: exit::INPUT,
            message: format!("config: unknown key `{k}`"),
        });
    }
    let mut budget = SearchBudget::default();
    if let Some(n) = common.budget_nodes.or(config_value(&file, "budget_nodes")?) {
        budget = budget.with_nodes(n);
    }
    if let Some(ms) = common.budget_ms.or(config_value(&file, "budget_ms")?) {
        budget = budget.with_time(std::time::Duration::from_millis(ms));
    }
    if let Some(p) = common.parallel.or(config_value(&file, "parallel")?) {
        budget = budget.with_parallel(p);
    }
    let mut config = RunConfig::from_budget(&budget);
    config.deterministic = common.deterministic.or(config_value(&file, "deterministic")?).unwrap_or(true);
    Ok(Settings {
        config,
        cap: config_value(&file, "cap")?,
    })
}

fn emit(report: &Report, json: Option<&Path>) -> Result<i32, Failure> {
    report::verify(report).map_err(|e| Failure {
        code: exit::INTERNAL,
        message: format!("refusing to emit a report that does not verify: {e}"),
    })?;
    let text = report.to_json();
    match json {
        Some(p) if p == Path::new("-") => print!("{text}"),
        Some(p) => {
            std::fs::write(p, &text).map_err(|e| Failure {
                code: exit::INPUT,
                message: format!("{}: {e}", p.display()),
            })?;
            println!("{}", report.summary());
        }
        None => println!("{}", report.summary()),
    }
    Ok(report.exit_code())
}

fn verify_file(path: &Path) -> Result<i32, Failure> {
    let r = with_path(path, Report::from_json(&read(path)?))?;
    report::verify(&r).map_err(|e| Failure {
        code: exit::INTERNAL,
        message: format!("{}: {e}", path.display()),
    })?;
    println!("verified: {} report, input digest {}", r.command, r.input_digest);
    Ok(exit::OK)
}

fn run(cli: Cli) -> Result<i32, Failure> {
    if let Some(p) = &cli.verify {
        return verify_file(p);
    }
    let Some(command) = cli.command else {
        return Err(Failure {
            code: exit::INPUT,
            message: "no subcommand given; see --help".into(),
        });
    };
    let (report, common) = match &command {
        Command::Verify { report } => return verify_file(report),
        Command::Classify { structure: s, common } => (report::classify(&structure(s)?, settings(common)?.config)?, common),
        Command::Hom {
            structure: s,
            target,
            common,
        } => (report::hom(&structure(s)?, &structure(target)?, settings(common)?.config)?, common),
        Command::Core { structure: s, common } => (report::core(&structure(s)?, settings(common)?.config)?, common),
        Command::Homeq { left, right, common } => {
            (report::homeq(&structure(left)?, &structure(right)?, settings(common)?.config)?, common)
        }
        Command::Poly {
            structure: s,
            arity,
            common,
        } => (report::poly(&structure(s)?, *arity, settings(common)?.config)?, common),
        Command::Pp {
            structure: s,
            spec,
            target,
            common,
        } => {
            let a = structure(s)?;
            let sp = with_path(spec, PPPowerSpec::parse(&read(spec)?))?;
            let b = target.as_deref().map(structure).transpose()?;
            (report::pp(&a, &sp, b.as_ref(), settings(common)?.config)?, common)
        }
        Command::Ppdef {
            structure: s,
            target,
            cap,
            common,
        } => {
            let st = settings(common)?;
            let cap = cap.or(st.cap).unwrap_or(finclone::constructions::DEFAULT_CAP);
            (report::ppdef(&structure(s)?, &structure(target)?, cap, st.config)?, common)
        }
        Command::Color {
            clone,
            target,
            strong,
            common,
        } => (report::color(&clone_source(clone)?, &structure(target)?, *strong, settings(common)?.config)?, common),
        Command::H1 {
            structure: s,
            target,
            common,
        } => (report::h1(&structure(s)?, &structure(target)?, settings(common)?.config)?, common),
        Command::Maltsev { clone, test, common } => {
            let test = match test {
                TestArg::NPerm => MaltsevTest::NPerm,
                TestArg::Modular => MaltsevTest::Modular,
                TestArg::HmChain => MaltsevTest::HmChain,
            };
            (report::maltsev(&clone_source(clone)?, test, settings(common)?.config)?, common)
        }
    };
    emit(&report, common.json.as_deref())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
