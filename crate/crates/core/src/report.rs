//! Self-contained reports: every report embeds its inputs and
//! certificates, serializes deterministically and can be re-verified from
//! its JSON alone.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::budget::{Decision, SearchBudget};
use crate::clone::{all_polymorphisms, preserves, preserves_all, CloneGenSet, OperationTable};
use crate::constructions::{
    check_pp_constructible, is_pp_definable_with_cap, pp_power, Definability, PPPowerSpec, PpConstruction,
};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::free::{
    find_coloring, free_structure, h1_homomorphism_exists, h1_to_projections, induced_operations, verify_coloring,
    CloneSource, Coloring, FreeStructure, H1Certificate, ProjectionVerdict,
};
use crate::hom::{core_of, find_homomorphism, hom_equivalent, is_core, is_hom, Core, HomMap};
use crate::identities::{Assignment, H1IdentitySystem};
use crate::maltsev::{
    find_hagemann_mitschke, is_congruence_modular, is_n_permutable_somewhere, refutation_digest, DayFixture, HMChain,
    Modularity, Permutability, HM_CHAIN_CAP,
};
use crate::structures::RelStructure;

pub const TOOL: &str = "finclone";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Settings echoed into every report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub node_limit: u64,
    pub time_limit_ms: u64,
    pub parallel_width: usize,
    /// When set (the default) reports carry no timings and are
    /// byte-identical across runs.
    pub deterministic: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_budget(&SearchBudget::default())
    }
}

impl RunConfig {
    pub fn from_budget(b: &SearchBudget) -> Self {
        RunConfig {
            node_limit: b.node_limit,
            time_limit_ms: b.time_limit.as_millis().min(u64::MAX as u128) as u64,
            parallel_width: b.parallel_width,
            deterministic: true,
        }
    }

    pub fn budget(&self) -> SearchBudget {
        SearchBudget::default()
            .with_nodes(self.node_limit)
            .with_time(std::time::Duration::from_millis(self.time_limit_ms))
            .with_parallel(self.parallel_width)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Input {
    Structure(RelStructure),
    Clone(CloneSource),
    Spec(PPPowerSpec),
}

impl Input {
    fn structure(&self) -> Result<&RelStructure> {
        match self {
            Input::Structure(s) => Ok(s),
            _ => Err(Error::invalid("report input is not a structure")),
        }
    }

    fn clone_source(&self) -> Result<&CloneSource> {
        match self {
            Input::Clone(c) => Ok(c),
            _ => Err(Error::invalid("report input is not a clone")),
        }
    }

    fn spec(&self) -> Result<&PPPowerSpec> {
        match self {
            Input::Spec(s) => Ok(s),
            _ => Err(Error::invalid("report input is not a pp-power spec")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// `Pol(A)` has an h1 clone homomorphism to the projection clone:
    /// there is no Siggers polymorphism, and the coloring is a witness.
    HardnessCertificate(H1Certificate),
    /// A Siggers polymorphism; CSP(A) is conjectured tractable.
    TaylorWitness { siggers: OperationTable },
    Inconclusive { reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaltsevTest {
    NPerm,
    Modular,
    HmChain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Classification { verdict: Verdict },
    Hom { homomorphism: Decision<HomMap> },
    Core { core: Core },
    HomEq { homomorphisms: Decision<(HomMap, HomMap)> },
    Poly { arity: usize, operations: Vec<OperationTable> },
    PpPower {
        power: RelStructure,
        construction: Option<Decision<PpConstruction>>,
    },
    PpDefinability { results: Vec<(String, Definability)> },
    Coloring {
        strong: bool,
        coloring: Decision<Coloring>,
        refutation_digest: Option<String>,
    },
    H1 { certificate: Decision<H1Certificate> },
    Permutability { result: Permutability },
    Modularity { result: Modularity },
    HmChain { max_n: usize, chain: Decision<HMChain> },
    Inconclusive { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub input_digest: String,
    pub inputs: Vec<(String, Input)>,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
}

/// Exit status of a finished command.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INPUT: i32 = 1;
    pub const CAPACITY: i32 = 2;
    pub const HARD: i32 = 3;
    pub const INCONCLUSIVE: i32 = 4;
    pub const INTERNAL: i32 = 5;
}

fn is_budget<T>(d: &Decision<T>) -> bool {
    matches!(d, Decision::BudgetExceeded)
}

impl Report {
    fn build(command: &str, config: RunConfig, inputs: Vec<(String, Input)>, start: Instant, outcome: Outcome) -> Self {
        let digest = {
            let mut h = Sha256::new();
            h.update(serde_json::to_string(&inputs).expect("inputs serialize").as_bytes());
            h.finalize().iter().map(|b| format!("{b:02x}")).collect()
        };
        Report {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            config,
            input_digest: digest,
            inputs,
            outcome,
            elapsed_ms: (!config.deterministic).then(|| start.elapsed().as_millis() as u64),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn exit_code(&self) -> i32 {
        let inconclusive = match &self.outcome {
            Outcome::Classification { verdict } => {
                return match verdict {
                    Verdict::TaylorWitness { .. } => exit::OK,
                    Verdict::HardnessCertificate(_) => exit::HARD,
                    Verdict::Inconclusive { .. } => exit::INCONCLUSIVE,
                }
            }
            Outcome::Hom { homomorphism } => is_budget(homomorphism),
            Outcome::HomEq { homomorphisms } => is_budget(homomorphisms),
            Outcome::PpPower { construction, .. } => construction.as_ref().is_some_and(is_budget),
            Outcome::PpDefinability { results } => {
                results.iter().any(|(_, d)| matches!(d, Definability::BudgetExceeded))
            }
            Outcome::Coloring { coloring, .. } => is_budget(coloring),
            Outcome::H1 { certificate } => is_budget(certificate),
            Outcome::Permutability { result } => matches!(result, Permutability::BudgetExceeded),
            Outcome::Modularity { result } => matches!(result, Modularity::BudgetExceeded),
            Outcome::HmChain { chain, .. } => is_budget(chain),
            Outcome::Inconclusive { .. } => true,
            Outcome::Core { .. } | Outcome::Poly { .. } => false,
        };
        if inconclusive {
            exit::INCONCLUSIVE
        } else {
            exit::OK
        }
    }

    /// A short human-readable summary.
    pub fn summary(&self) -> String {
        match &self.outcome {
            Outcome::Classification { verdict } => match verdict {
                Verdict::HardnessCertificate(c) => format!(
                    "hard: Pol(A) maps to the projection clone (no Siggers polymorphism; coloring of {} elements, {} induced operations checked)",
                    c.coloring.map.len(),
                    c.induced.checked
                ),
                Verdict::TaylorWitness { siggers } => {
                    format!("conjectured tractable: Siggers polymorphism {:?}", siggers.table())
                }
                Verdict::Inconclusive { reason } => format!("inconclusive: {reason}"),
            },
            Outcome::Hom { homomorphism } => decision_line("homomorphism", homomorphism, |h| format!("{:?}", h.map)),
            Outcome::Core { core } => format!(
                "core on elements {:?} ({} elements); retraction {:?}",
                core.elements,
                core.elements.len(),
                core.retraction.map
            ),
            Outcome::HomEq { homomorphisms } => decision_line("homomorphic equivalence", homomorphisms, |(f, g)| {
                format!("{:?} and {:?}", f.map, g.map)
            }),
            Outcome::Poly { arity, operations } => {
                let mut s = format!("{} polymorphisms of arity {arity}", operations.len());
                for op in operations {
                    s.push_str(&format!("\n  {:?}", op.table()));
                }
                s
            }
            Outcome::PpPower { power, construction } => {
                let mut s = format!("pp-power on {} elements", power.size());
                if let Some(c) = construction {
                    s.push('\n');
                    s.push_str(&decision_line("homomorphic equivalence with target", c, |c| {
                        format!("{:?} and {:?}", c.to_target.map, c.from_target.map)
                    }));
                }
                s
            }
            Outcome::PpDefinability { results } => results
                .iter()
                .map(|(name, d)| match d {
                    Definability::Definable { complete: true, .. } => format!("{name}: pp-definable"),
                    Definability::Definable { checked_arity, .. } => {
                        format!("{name}: no violating polymorphism up to arity {checked_arity} (incomplete)")
                    }
                    Definability::NotDefinable { witness, .. } => {
                        format!("{name}: not pp-definable; violated by {:?}", witness.table())
                    }
                    Definability::BudgetExceeded => format!("{name}: budget exhausted"),
                })
                .collect::<Vec<_>>()
                .join("\n"),
            Outcome::Coloring {
                strong,
                coloring,
                refutation_digest,
            } => {
                let kind = if *strong { "strong coloring" } else { "coloring" };
                match coloring {
                    Decision::Found(c) => format!("{kind} found: {:?}", c.map),
                    Decision::Absent => format!(
                        "no {kind}; refutation digest {}",
                        refutation_digest.as_deref().unwrap_or("-")
                    ),
                    Decision::BudgetExceeded => "inconclusive: budget exhausted".into(),
                }
            }
            Outcome::H1 { certificate } => decision_line("h1 clone homomorphism", certificate, |c| {
                format!("coloring {:?}", c.coloring.map)
            }),
            Outcome::Permutability { result } => match result {
                Permutability::Permutable { chain: Some(c) } => {
                    format!("congruence {}-permutable (Hagemann-Mitschke chain attached)", c.n)
                }
                Permutability::Permutable { chain: None } => format!(
                    "congruence n-permutable for some n (no chain with n <= {HM_CHAIN_CAP})"
                ),
                Permutability::NotPermutable { coloring } => {
                    format!("not n-permutable for any n; strong coloring {:?}", coloring.map)
                }
                Permutability::BudgetExceeded => "inconclusive: budget exhausted".into(),
            },
            Outcome::Modularity { result } => match result {
                Modularity::Modular { refutation_digest } => {
                    format!("congruence modular; no strong coloring by {} (digest {refutation_digest})", DayFixture::to_text())
                }
                Modularity::NotModular { coloring } => format!("not congruence modular; strong coloring {:?}", coloring.map),
                Modularity::BudgetExceeded => "inconclusive: budget exhausted".into(),
            },
            Outcome::HmChain { max_n, chain } => match chain {
                Decision::Found(c) => format!("Hagemann-Mitschke chain with n = {}", c.n),
                Decision::Absent => format!("no Hagemann-Mitschke chain with n <= {max_n}"),
                Decision::BudgetExceeded => "inconclusive: budget exhausted".into(),
            },
            Outcome::Inconclusive { reason } => format!("inconclusive: {reason}"),
        }
    }
}

fn decision_line<T>(what: &str, d: &Decision<T>, show: impl Fn(&T) -> String) -> String {
    match d {
        Decision::Found(x) => format!("{what}: found {}", show(x)),
        Decision::Absent => format!("{what}: none"),
        Decision::BudgetExceeded => format!("{what}: inconclusive, budget exhausted"),
    }
}

fn named(name: &str, input: Input) -> (String, Input) {
    (name.to_string(), input)
}

/// Runs `f`, turning budget exhaustion into an inconclusive outcome.
fn guarded(f: impl FnOnce() -> Result<Outcome>) -> Result<Outcome> {
    match f() {
        Err(Error::BudgetExceeded) => Ok(Outcome::Inconclusive {
            reason: "search budget exhausted".into(),
        }),
        other => other,
    }
}

pub fn classify(a: &RelStructure, config: RunConfig) -> Result<Report> {
    let start = Instant::now();
    let verdict = match h1_to_projections(a, &config.budget())? {
        ProjectionVerdict::Exists(c) => Verdict::HardnessCertificate(c),
        ProjectionVerdict::NotExists { siggers } => Verdict::TaylorWitness { siggers },
        ProjectionVerdict::BudgetExceeded => Verdict::Inconclusive {
            reason: "search budget exhausted".into(),
        },
    };
    let inputs = vec![named("structure", Input::Structure(a.clone()))];
    Ok(Report::build("classify", config, inputs, start, Outcome::Classification { verdict }))
}

pub fn hom(c: &RelStructure, a: &RelStructure, config: RunConfig) -> Result<Report> {
    let start = Instant::now();
    let homomorphism = find_homomorphism(c, a, &config.budget())?;
    let inputs = vec![named("source", Input::Structure(c.clone())), named("target", Input::Structure(a.clone()))];
    Ok(Report::build("hom", config, inputs, start, Outcome::Hom { homomorphism }))
}

pub fn core(a: &RelStructure, config: RunConfig) -> Result<Report> {
    let start = Instant::now();
    let outcome = guarded(|| Ok(Outcome::Core { core: core_of(a, &config.budget())? }))?;
    let inputs = vec![named("structure", Input::Structure(a.clone()))];
    Ok(Report::build("core", config, inputs, start, outcome))
}

pub fn homeq(a: &RelStructure, b: &RelStructure, config: RunConfig) -> Result<Report> {
    let start = Instant::now();
    let homomorphisms = hom_equivalent(a, b, &config.budget())?;
    let inputs = vec![named("left", Input::Structure(a.clone())), named("right", Input::Structure(b.clone()))];
    Ok(Report::build("homeq", config, inputs, start, Outcome::HomEq { homomorphisms }))
}

pub fn poly(a: &RelStructure, arity: usize, config: RunConfig) -> Result<Report> {
    let start = Instant::now();
    let outcome = guarded(|| {
        Ok(Outcome::Poly {
            arity,
            operations: all_polymorphisms(a, arity, &config.budget())?,
        })
    })?;
    let inputs = vec![named("structure", Input::Structure(a.clone()))];
    Ok(Report::build("poly", config, inputs, start, outcome))
}

pub fn pp(a: &RelStructure, spec: &PPPowerSpec, target: Option<&RelStructure>, config: RunConfig) -> Result<Report> {
    let start = Instant::now();
    let power = pp_power(a, spec)?;
    let construction = match target {
        Some(b) => Some(check_pp_constructible(a, b, spec, &config.budget())?),
        None => None,
    };
    let mut inputs = vec![named("structure", Input::Structure(a.clone())), named("spec", Input::Spec(spec.clone()))];
    if let Some(b) = target {
        inputs.push(named("target", Input::Structure(b.clone())));
    }
    Ok(Report::build("pp", config, inputs, start, Outcome::PpPower { power, construction }))
}

/// Checks every relation of `candidates` (a structure on the same domain).
pub fn ppdef(a: &RelStructure, candidates: &RelStructure, cap: usize, config: RunConfig) -> Result<Report> {
    let start = Instant::now();
    if candidates.size() != a.size() {
        return Err(Error::invalid("candidate relations must be over the same domain"));
    }
    let mut results = Vec::new();
    for (name, r) in candidates.iter() {
        results.push((name.to_string(), is_pp_definable_with_cap(a, r, cap, &config.budget())?));
    }
    let inputs = vec![
        named("structure", Input::Structure(a.clone())),
        named("candidates", Input::Structure(candidates.clone())),
    ];
    Ok(Report::build("ppdef", config, inputs, start, Outcome::PpDefinability { results }))
}

pub fn color(source: &CloneSource, b: &RelStructure, strong: bool, config: RunConfig) -> Result<Report> {
    let start = Instant::now();
    let outcome = guarded(|| {
        let budget = config.budget();
        let free = free_structure(source, b, &budget)?;
        let coloring = find_coloring(&free, strong, &budget)?;
        let digest = coloring.is_absent().then(|| refutation_digest(&free));
        Ok(Outcome::Coloring {
            strong,
            coloring,
            refutation_digest: digest,
        })
    })?;
    let inputs = vec![named("clone", Input::Clone(source.clone())), named("target", Input::Structure(b.clone()))];
    Ok(Report::build("color", config, inputs, start, outcome))
}

pub fn h1(a: &RelStructure, b: &RelStructure, config: RunConfig) -> Result<Report> {
    let start = Instant::now();
    let certificate = h1_homomorphism_exists(a, b, &config.budget())?;
    let inputs = vec![named("source", Input::Structure(a.clone())), named("target", Input::Structure(b.clone()))];
    Ok(Report::build("h1", config, inputs, start, Outcome::H1 { certificate }))
}

pub fn maltsev(source: &CloneSource, test: MaltsevTest, config: RunConfig) -> Result<Report> {
    let start = Instant::now();
    let budget = config.budget();
    let outcome = match test {
        MaltsevTest::NPerm => Outcome::Permutability {
            result: is_n_permutable_somewhere(source, &budget)?,
        },
        MaltsevTest::Modular => Outcome::Modularity {
            result: is_congruence_modular(source, &budget)?,
        },
        MaltsevTest::HmChain => {
            let mut chain = Decision::Absent;
            for n in 2..=HM_CHAIN_CAP {
                chain = find_hagemann_mitschke(source, n, &budget)?;
                if !chain.is_absent() {
                    break;
                }
            }
            Outcome::HmChain {
                max_n: HM_CHAIN_CAP,
                chain,
            }
        }
    };
    let command = match test {
        MaltsevTest::NPerm => "maltsev n-perm",
        MaltsevTest::Modular => "maltsev modular",
        MaltsevTest::HmChain => "maltsev hm-chain",
    };
    let inputs = vec![named("clone", Input::Clone(source.clone()))];
    Ok(Report::build(command, config, inputs, start, outcome))
}

fn input<'a>(r: &'a Report, name: &str) -> Result<&'a Input> {
    r.inputs
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, i)| i)
        .ok_or_else(|| Error::invalid(format!("report has no input `{name}`")))
}

fn ensure(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::CrossCheck(format!("certificate rejected: {what}")))
    }
}

fn verify_h1(a: &RelStructure, b: &RelStructure, cert: &H1Certificate, budget: &SearchBudget) -> Result<()> {
    let free = free_structure(&CloneSource::Polymorphisms(a.clone()), b, budget)?;
    ensure(!cert.coloring.strong && verify_coloring(&free, &cert.coloring)?, "coloring")?;
    let induced = induced_operations(&free, &cert.coloring, 3, budget)?;
    ensure(induced == cert.induced && induced.violations == 0, "induced operations")
}

fn verify_strong_coloring(source: &CloneSource, b: &RelStructure, c: &Coloring, budget: &SearchBudget) -> Result<FreeStructure> {
    let free = free_structure(source, b, budget)?;
    ensure(c.strong && verify_coloring(&free, c)?, "strong coloring")?;
    Ok(free)
}

/// Re-checks every certificate embedded in `r` using only the report.
/// Negative answers without a certificate are accepted as reported.
pub fn verify(r: &Report) -> Result<()> {
    let digest = Report::build(&r.command, r.config, r.inputs.clone(), Instant::now(), Outcome::Inconclusive {
        reason: String::new(),
    })
    .input_digest;
    ensure(digest == r.input_digest, "input digest")?;
    let budget = SearchBudget::default();
    match &r.outcome {
        Outcome::Classification { verdict } => {
            let a = input(r, "structure")?.structure()?;
            match verdict {
                Verdict::HardnessCertificate(c) => verify_h1(a, &fixtures::projection_test_structure(), c, &budget)?,
                Verdict::TaylorWitness { siggers } => {
                    let mut asg = Assignment::new();
                    asg.insert("t".into(), siggers.clone());
                    ensure(
                        preserves_all(siggers, a) && H1IdentitySystem::siggers().holds(&asg),
                        "Siggers polymorphism",
                    )?;
                }
                Verdict::Inconclusive { .. } => {}
            }
        }
        Outcome::Hom { homomorphism } => {
            if let Decision::Found(h) = homomorphism {
                let c = input(r, "source")?.structure()?;
                let a = input(r, "target")?.structure()?;
                ensure(h.source_size == c.size() && is_hom(h, c, a)?, "homomorphism")?;
            }
        }
        Outcome::Core { core } => {
            let a = input(r, "structure")?.structure()?;
            ensure(a.induced(&core.elements)? == core.structure, "core substructure")?;
            ensure(is_hom(&core.retraction, a, &core.structure)?, "retraction")?;
            ensure(
                core.elements.iter().zip(0..).all(|(&x, i)| core.retraction.apply(x) == i),
                "retraction fixes the core",
            )?;
            ensure(is_core(&core.structure, &budget)?, "core has no proper retract")?;
        }
        Outcome::HomEq { homomorphisms } => {
            if let Decision::Found((f, g)) = homomorphisms {
                let a = input(r, "left")?.structure()?;
                let b = input(r, "right")?.structure()?;
                ensure(is_hom(f, a, b)? && is_hom(g, b, a)?, "homomorphisms")?;
            }
        }
        Outcome::Poly { arity, operations } => {
            let a = input(r, "structure")?.structure()?;
            ensure(
                operations.iter().all(|f| f.arity() == *arity && preserves_all(f, a))
                    && operations.windows(2).all(|w| w[0] < w[1]),
                "polymorphisms",
            )?;
        }
        Outcome::PpPower { power, construction } => {
            let a = input(r, "structure")?.structure()?;
            let spec = input(r, "spec")?.spec()?;
            ensure(&pp_power(a, spec)? == power, "pp-power")?;
            if let Some(Decision::Found(c)) = construction {
                let b = input(r, "target")?.structure()?;
                ensure(&c.power == power && &c.spec == spec, "construction inputs")?;
                ensure(is_hom(&c.to_target, power, b)? && is_hom(&c.from_target, b, power)?, "construction")?;
            }
        }
        Outcome::PpDefinability { results } => {
            let a = input(r, "structure")?.structure()?;
            let cands = input(r, "candidates")?.structure()?;
            for (name, d) in results {
                if let Definability::NotDefinable { witness, arguments } = d {
                    let rel = cands
                        .relation(name)
                        .ok_or_else(|| Error::invalid(format!("no candidate `{name}`")))?;
                    ensure(preserves_all(witness, a) && !preserves(witness, rel), "violating polymorphism")?;
                    ensure(arguments.iter().all(|t| rel.contains(t)), "violation arguments")?;
                }
            }
        }
        Outcome::Coloring {
            coloring,
            refutation_digest: digest,
            strong,
        } => {
            let source = input(r, "clone")?.clone_source()?;
            let b = input(r, "target")?.structure()?;
            let free = free_structure(source, b, &budget)?;
            match coloring {
                Decision::Found(c) => ensure(c.strong == *strong && verify_coloring(&free, c)?, "coloring")?,
                Decision::Absent => ensure(digest.as_deref() == Some(&refutation_digest(&free)), "refutation digest")?,
                Decision::BudgetExceeded => {}
            }
        }
        Outcome::H1 { certificate } => {
            if let Decision::Found(c) = certificate {
                let a = input(r, "source")?.structure()?;
                let b = input(r, "target")?.structure()?;
                verify_h1(a, b, c, &budget)?;
            }
        }
        Outcome::Permutability { result } => {
            let source = input(r, "clone")?.clone_source()?;
            match result {
                Permutability::NotPermutable { coloring } => {
                    verify_strong_coloring(source, &fixtures::boolean_order(), coloring, &budget)?;
                }
                Permutability::Permutable { chain: Some(c) } => ensure(verify_chain(source, c), "chain")?,
                _ => {}
            }
        }
        Outcome::Modularity { result } => {
            let source = input(r, "clone")?.clone_source()?;
            match result {
                Modularity::NotModular { coloring } => {
                    verify_strong_coloring(source, &DayFixture::structure(), coloring, &budget)?;
                }
                Modularity::Modular { refutation_digest: d } => {
                    let free = free_structure(source, &DayFixture::structure(), &budget)?;
                    ensure(*d == refutation_digest(&free), "refutation digest")?;
                }
                Modularity::BudgetExceeded => {}
            }
        }
        Outcome::HmChain { chain, .. } => {
            if let Decision::Found(c) = chain {
                ensure(verify_chain(input(r, "clone")?.clone_source()?, c), "chain")?;
            }
        }
        Outcome::Inconclusive { .. } => {}
    }
    Ok(())
}

/// A chain must satisfy its identities and lie in the clone.
fn verify_chain(source: &CloneSource, c: &HMChain) -> bool {
    if !c.verify() {
        return false;
    }
    match source {
        CloneSource::Polymorphisms(a) => c.ops.iter().all(|f| preserves_all(f, a)),
        CloneSource::Generated(g) => crate::clone::generate_to_arity(g, 3, &SearchBudget::default())
            .is_ok_and(|members| c.ops.iter().all(|f| members.binary_search(f).is_ok())),
    }
}

/// A clone file is either a generator set or a structure, whose
/// polymorphism clone is then meant.
pub fn parse_clone_source(text: &str) -> Result<CloneSource> {
    match serde_json::from_str::<serde_json::Value>(text) {
        Ok(v) if v.get("generators").is_some() => {
            let g: CloneGenSet = serde_json::from_value(v).map_err(|e| Error::invalid(e.to_string()))?;
            Ok(CloneSource::Generated(CloneGenSet::new(g.domain_size, g.generators)?))
        }
        _ => Ok(CloneSource::Polymorphisms(crate::structures::parse_structure(text)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clone::boolean;
    use crate::hom::add_singletons;

    #[test]
    fn classification_exit_codes() {
        let hard = classify(&add_singletons(&fixtures::clique(3)), RunConfig::default()).unwrap();
        assert_eq!(hard.exit_code(), exit::HARD);
        verify(&hard).unwrap();
        let easy = classify(&fixtures::boolean_affine_with_constants(), RunConfig::default()).unwrap();
        assert_eq!(easy.exit_code(), exit::OK);
        verify(&easy).unwrap();
        let mut tiny = RunConfig::default();
        tiny.node_limit = 1;
        let unknown = classify(&fixtures::boolean_affine_with_constants(), tiny).unwrap();
        assert_eq!(unknown.exit_code(), exit::INCONCLUSIVE);
    }

    #[test]
    fn round_trip_and_tamper() {
        let source = CloneSource::Generated(CloneGenSet::new(2, vec![boolean::minority()]).unwrap());
        let r = color(&source, &fixtures::boolean_order(), true, RunConfig::default()).unwrap();
        let text = r.to_json();
        let back = Report::from_json(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json(), text);
        verify(&back).unwrap();

        let hom_report = hom(&fixtures::path(3), &fixtures::clique(2), RunConfig::default()).unwrap();
        verify(&hom_report).unwrap();
        let mut bad = hom_report.clone();
        if let Outcome::Hom { homomorphism: Decision::Found(h) } = &mut bad.outcome {
            h.map = vec![0, 0, 0];
        }
        assert!(verify(&bad).is_err());
    }

    #[test]
    fn clone_files() {
        let g = parse_clone_source(r#"{"domain_size":2,"generators":[{"domain_size":2,"arity":2,"table":[0,0,0,1]}]}"#)
            .unwrap();
        assert!(matches!(g, CloneSource::Generated(_)));
        let p = parse_clone_source("size 2; le/2 = {(0,0),(0,1),(1,1)};").unwrap();
        assert!(matches!(p, CloneSource::Polymorphisms(_)));
    }
}
