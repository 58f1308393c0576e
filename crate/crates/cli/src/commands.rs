use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use sumset_core::certificate::{verify_certificate, Certificate};
use sumset_core::deltasys::{check_cl3, check_cl4, random_instance, SupportAssignment};
use sumset_core::oracle::{fnv1a64, ColoringOracle, OracleError};
use sumset_core::pipeline2::{construct2, Pipeline2Error};
use sumset_core::pipeline_r::{construct_r, ConstructOptions, PipelineRError};
use sumset_core::ramsey::{brute_homogeneous, Budget, RamseyError, Search, TupleColoring};
use sumset_core::search::{render_csv, threshold_scan, witness_file_name, ScanOptions, SearchError};

use crate::{Command, Construct2Args, ConstructRArgs, DeltasysAction, RamseyArgs, SearchArgs, VerifyArgs};

pub enum Failure {
    Usage(String),
    NotFound(String),
    Violation(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::NotFound(_) => 2,
            Failure::Violation(_) => 3,
        }
    }

    pub fn message(&self) -> String {
        match self {
            Failure::Usage(m) => format!("error: {m}"),
            Failure::NotFound(m) => format!("not found: {m}"),
            Failure::Violation(m) => format!("violation: {m}"),
        }
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        usage(e)
    }
}

impl From<RamseyError> for Failure {
    fn from(e: RamseyError) -> Self {
        usage(e)
    }
}

impl From<Pipeline2Error> for Failure {
    fn from(e: Pipeline2Error) -> Self {
        match e {
            Pipeline2Error::Unsound { .. } => Failure::Violation(e.to_string()),
            _ => usage(e),
        }
    }
}

impl From<PipelineRError> for Failure {
    fn from(e: PipelineRError) -> Self {
        match e {
            PipelineRError::Unsound(_) => Failure::Violation(e.to_string()),
            _ => usage(e),
        }
    }
}

impl From<SearchError> for Failure {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Monotonicity { .. } | SearchError::SpotCheck { .. } => Failure::Violation(e.to_string()),
            _ => usage(e),
        }
    }
}

type Outcome = Result<(), Failure>;

/// The configuration embedded in every output. Paths and the worker count
/// are left out so outputs compare equal across machines and thread counts.
fn config(cmd: &Command, seed: u64) -> Value {
    let mut v = serde_json::to_value(cmd).expect("arguments serialize");
    v["seed"] = json!(seed);
    v
}

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| usage(format!("stdout: {e}"))),
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json renders");
    s.push('\n');
    s
}

pub fn run(cmd: &Command, seed: u64) -> Outcome {
    let cfg = config(cmd, seed);
    match cmd {
        Command::Construct2(a) => construct2_cmd(a, seed, cfg),
        Command::ConstructR(a) => construct_r_cmd(a, seed, cfg),
        Command::Verify(a) => verify_cmd(a, seed),
        Command::Search(a) => search_cmd(a, seed, cfg),
        Command::Deltasys(a) => deltasys_cmd(&a.action, seed, cfg),
        Command::Ramsey(a) => ramsey_cmd(a, seed, cfg),
    }
}

fn budget_or(b: Option<u64>, default: Budget) -> Budget {
    b.map_or(default, |n| Budget(Some(n)))
}

fn finish_certificate(mut cert: Certificate, oracle: &ColoringOracle, cfg: Value, out: Option<&Path>) -> Outcome {
    cert.config = Some(cfg);
    let defects = verify_certificate(&cert, oracle)?;
    if !defects.is_empty() {
        return Err(Failure::Violation(format!("emitted certificate fails re-verification: {defects:?}")));
    }
    emit(out, &cert.to_json())
}

fn construct2_cmd(a: &Construct2Args, seed: u64, cfg: Value) -> Outcome {
    let oracle = ColoringOracle::parse(&a.oracle, 2, seed)?;
    let budget = budget_or(a.budget, Budget::default_for(a.n, 4));
    match construct2(&oracle, a.n, a.m, budget)? {
        Search::Found(c) => finish_certificate(c.to_certificate(&oracle), &oracle, cfg, a.out.as_deref()),
        Search::NotFound(nf) => {
            emit(a.out.as_deref(), &pretty(&json!({ "config": cfg, "not_found": nf })))?;
            Err(Failure::NotFound(format!(
                "no homogeneous set ({}, {} nodes)",
                if nf.exhaustive { "exhaustive" } else { "budget exhausted" },
                nf.nodes
            )))
        }
    }
}

fn construct_r_cmd(a: &ConstructRArgs, seed: u64, cfg: Value) -> Outcome {
    let oracle = ColoringOracle::parse(&a.oracle, a.r, seed)?;
    let opts = ConstructOptions {
        shrink_size: a.shrink_size,
        budget: budget_or(a.budget, Budget::UNLIMITED),
    };
    match construct_r(&oracle, a.n, a.m, opts)? {
        Search::Found(c) => finish_certificate(c.to_certificate(&oracle), &oracle, cfg, a.out.as_deref()),
        Search::NotFound(f) => {
            emit(a.out.as_deref(), &pretty(&json!({ "config": cfg, "not_found": f })))?;
            Err(Failure::NotFound(format!("construction stopped: {}", serde_json::to_string(&f).unwrap_or_default())))
        }
    }
}

fn verify_cmd(a: &VerifyArgs, seed: u64) -> Outcome {
    let text = fs::read_to_string(&a.certificate).map_err(|e| usage(format!("{}: {e}", a.certificate.display())))?;
    let cert: Certificate =
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", a.certificate.display())))?;
    let descriptor = a
        .oracle
        .clone()
        .or_else(|| cert.oracle.clone())
        .ok_or_else(|| usage("certificate names no oracle; pass --oracle"))?;
    let oracle = ColoringOracle::parse(&descriptor, cert.r, seed)?;
    let defects = verify_certificate(&cert, &oracle)?;
    if defects.is_empty() {
        println!("sound: {} sums, color {}", cert.sums.len(), cert.color);
        Ok(())
    } else {
        for d in &defects {
            println!("defect: {d:?}");
        }
        Err(Failure::Violation(format!("{} defect(s)", defects.len())))
    }
}

fn search_cmd(a: &SearchArgs, seed: u64, cfg: Value) -> Outcome {
    let opts = ScanOptions {
        budget: budget_or(a.budget, Budget::UNLIMITED),
        finitization: a.finitization,
        spot_checks: a.spot_checks,
        seed,
        checkpoint_dir: a.checkpoint_dir.clone(),
        checkpoint_every: a.checkpoint_every,
    };
    if let Some(dir) = &opts.checkpoint_dir {
        fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    }
    let records = threshold_scan(a.k, a.r, a.m_max, &opts)?;
    let table = format!("# config {}\n{}", serde_json::to_string(&cfg).expect("json renders"), render_csv(&records));
    match &a.out_dir {
        None => emit(None, &table),
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
            for rec in &records {
                if let Some(w) = &rec.witness {
                    emit(Some(&dir.join(witness_file_name(rec))), &w.render())?;
                }
            }
            emit(Some(&dir.join("table.csv")), &table)
        }
    }
}

fn deltasys_cmd(action: &DeltasysAction, seed: u64, cfg: Value) -> Outcome {
    let (s, out) = match action {
        DeltasysAction::Generate {
            n,
            d,
            pad,
            slack,
            instance,
            out,
        } => {
            let pad = pad.clone().unwrap_or_else(|| vec![0; d + 1]);
            let s = random_instance(*n, *d, &pad, *slack, seed).map_err(usage)?;
            if let Some(p) = instance {
                emit(Some(p), &s.to_json())?;
            }
            (s, out)
        }
        DeltasysAction::Check { input, out } => {
            let text = fs::read_to_string(input).map_err(|e| usage(format!("{}: {e}", input.display())))?;
            let s: SupportAssignment =
                serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", input.display())))?;
            (s, out)
        }
    };
    let cl3 = check_cl3(&s);
    let cl4 = check_cl4(&s);
    let clean = cl3.is_empty() && cl4.is_clean();
    let report = json!({
        "config": cfg,
        "E": s.e(),
        "d": s.d(),
        "domain_size": s.domain_order().len(),
        "cl3_violations": cl3,
        "cl4": cl4,
        "clean": clean,
    });
    emit(out.as_deref(), &pretty(&report))?;
    if clean {
        Ok(())
    } else {
        Err(Failure::Violation(format!(
            "{} intersection violation(s), {} coherence violation(s)",
            cl3.len(),
            cl4.violations.len()
        )))
    }
}

fn ramsey_cmd(a: &RamseyArgs, seed: u64, cfg: Value) -> Outcome {
    let parts: Vec<&str> = a.coloring.split(':').collect();
    let num = |s: &str| s.parse::<usize>().map_err(|_| usage(format!("bad number `{s}` in --coloring")));
    let f = match parts.as_slice() {
        ["derived", level] => {
            let level = num(level)?;
            let r = a.r.ok_or_else(|| usage("derived colorings need --r"))?;
            let desc = a.oracle.as_deref().ok_or_else(|| usage("derived colorings need --oracle"))?;
            let oracle = ColoringOracle::parse(desc, r, seed)?;
            TupleColoring::try_from_fn(r + level, r, a.n, |t| Ok::<_, Failure>(oracle.derived(level, t)?))?
        }
        ["random", arity, colors] => {
            let (arity, colors) = (num(arity)?, num(colors)?);
            if colors == 0 {
                return Err(usage("need at least one color"));
            }
            // each tuple draws from its own stream so the table does not
            // depend on evaluation order
            TupleColoring::from_fn(arity, colors, a.n, |t| {
                let mut bytes = seed.to_le_bytes().to_vec();
                for &i in t {
                    bytes.extend_from_slice(&(i as u64).to_le_bytes());
                }
                ChaCha8Rng::seed_from_u64(fnv1a64(&bytes)).gen_range(0..colors)
            })?
        }
        _ => return Err(usage("--coloring must be `derived:LEVEL` or `random:ARITY:COLORS`")),
    };
    let budget = budget_or(a.budget, Budget::default_for(a.n, f.arity()));
    match brute_homogeneous(&f, a.m, budget)? {
        Search::Found(set) => emit(a.out.as_deref(), &pretty(&json!({ "config": cfg, "found": set }))),
        Search::NotFound(nf) => {
            emit(a.out.as_deref(), &pretty(&json!({ "config": cfg, "not_found": nf })))?;
            Err(Failure::NotFound(format!(
                "no homogeneous {}-set ({})",
                a.m,
                if nf.exhaustive { "exhaustive" } else { "budget exhausted" }
            )))
        }
    }
}
