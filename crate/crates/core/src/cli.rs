//! Command line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::cantor::{self, CantorApprox, Generator};
use crate::cascade::{self, CascadeResult, DEFAULT_EPS};
use crate::error::{Error, Result};
use crate::io::{self, Provenance, Table};
use crate::model::{ModelMap, Word};
use crate::numeric::fmt17;
use crate::orbits::{self, Multiplier};
use crate::quadratic;
use crate::renorm::{self, RenormChart};

/// Exit status for command line usage errors.
pub const EXIT_USAGE: i32 = 64;
/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "TANGENCYLAB_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "tangencylab",
    version,
    about = "Sinks near homoclinic tangencies of a model horseshoe"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Model configuration (JSON).
    #[arg(long)]
    #[serde(skip)]
    pub model: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Seed for randomized experiments.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convergence of the renormalized return along the words 0^n.
    RenormCheck(RenormCheckArgs),
    /// Fixed points and multipliers of y -> y^2 + mu.
    QuadScan(QuadScanArgs),
    /// Thickness of a Cantor set.
    Thickness(ThicknessArgs),
    /// Gap lemma trichotomy for two Cantor sets.
    GapLemma(GapLemmaArgs),
    /// Continuation of a sink in t.
    Continuation(ContinuationArgs),
    /// Nested windows of simultaneous sinks.
    SinkCascade(SinkCascadeArgs),
    /// Survival of cascade sinks as t moves away from t_infinity.
    UnfoldSurvival(UnfoldSurvivalArgs),
    /// Continuation of cascade sinks under random perturbations.
    PersistCheck(PersistCheckArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RenormCheckArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 4)]
    pub n_min: usize,
    #[arg(long, default_value_t = 10)]
    pub n_max: usize,
    /// Grid points per axis of the unit box.
    #[arg(long, default_value_t = 21)]
    pub grid: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct QuadScanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, allow_negative_numbers = true)]
    pub mu_min: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub mu_max: f64,
    #[arg(long)]
    pub steps: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ThicknessArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Ratio of the symmetric self-similar set on [0, 1].
    #[arg(long, conflicts_with = "set")]
    pub generator: Option<f64>,
    /// Cantor set (JSON).
    #[arg(long)]
    #[serde(skip)]
    pub set: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub depth: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GapLemmaArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    #[serde(skip)]
    pub first: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub second: PathBuf,
    #[arg(long, default_value_t = 12)]
    pub depth: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ContinuationArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Saddle iterates; the word defaults to 0^n.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub word: Option<Word>,
    #[arg(long, allow_negative_numbers = true)]
    pub t_from: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub t_to: f64,
    /// Initial step; a hundredth of the range by default.
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SinkCascadeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub sinks: usize,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, value_delimiter = ',')]
    pub min_n: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    /// Window table (CSV).
    #[arg(long)]
    #[serde(skip)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct UnfoldSurvivalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Cascade result written by `sink-cascade`.
    #[arg(long)]
    #[serde(skip)]
    pub cascade: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub v: f64,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub offsets: Vec<f64>,
    /// Logarithmic offsets given as LO,HI,COUNT.
    #[arg(long, value_delimiter = ',')]
    pub log_offsets: Vec<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PersistCheckArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Cascade result written by `sink-cascade`.
    #[arg(long)]
    #[serde(skip)]
    pub cascade: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    pub delta: f64,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    match execute(&cli.command) {
        Ok(summary) => {
            eprintln!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Error::Validation(format!(
            "{THREADS_ENV} must be a positive integer, got {v:?}"
        ))
    })?;
    // The global pool can only be built once per process.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

pub fn execute(cmd: &Command) -> Result<String> {
    match cmd {
        Command::RenormCheck(a) => renorm_check(a),
        Command::QuadScan(a) => quad_scan(a),
        Command::Thickness(a) => thickness(a),
        Command::GapLemma(a) => gap_lemma(a),
        Command::Continuation(a) => continuation(a),
        Command::SinkCascade(a) => sink_cascade(a),
        Command::UnfoldSurvival(a) => unfold_survival(a),
        Command::PersistCheck(a) => persist_check(a),
    }
}

pub fn load_model(path: Option<&Path>) -> Result<ModelMap> {
    let p = path.ok_or_else(|| Error::Validation("missing --model <path>".into()))?;
    let m: ModelMap = io::read_json(p)?;
    m.validate()?;
    Ok(m)
}

fn provenance<A: Serialize>(
    command: &str,
    args: &A,
    model: Option<&ModelMap>,
    inputs: Value,
    seed: u64,
) -> Provenance {
    let config = json!({
        "command": command,
        "params": serde_json::to_value(args).unwrap_or(Value::Null),
        "model": model.map(|m| serde_json::to_value(m).unwrap_or(Value::Null)),
        "inputs": inputs,
    });
    Provenance::new(&config, seed)
}

fn optional_model(c: &Common) -> Result<Option<ModelMap>> {
    c.model.as_deref().map(|p| load_model(Some(p))).transpose()
}

fn renorm_check(a: &RenormCheckArgs) -> Result<String> {
    let m = load_model(a.common.model.as_deref())?;
    if a.n_min < renorm::MIN_N || a.n_min > a.n_max {
        return Err(Error::Validation(format!(
            "need {} <= n-min <= n-max, got {}..{}",
            renorm::MIN_N,
            a.n_min,
            a.n_max
        )));
    }
    if a.grid < 2 {
        return Err(Error::Validation("grid needs at least 2 points".into()));
    }
    let rows = renorm::convergence_report(&m, a.n_min..=a.n_max, a.grid)?;
    let mut t = Table::new(&["n", "c0_dev", "c1_dev", "muhat_dx", "muhat_dy"]);
    for r in &rows {
        t.push(vec![
            r.n.to_string(),
            fmt17(r.c0_deviation),
            fmt17(r.c1_deviation),
            fmt17(r.muhat_dx),
            fmt17(r.muhat_dy),
        ]);
    }
    let prov = provenance("renorm-check", a, Some(&m), Value::Null, a.common.seed);
    io::emit_csv(&t, &prov, a.common.out.as_deref())?;
    let last = rows.last().expect("nonempty range");
    Ok(format!(
        "renorm-check: n = {}..{}, c1 deviation at n = {}: {:e}",
        a.n_min, a.n_max, last.n, last.c1_deviation
    ))
}

fn quad_scan(a: &QuadScanArgs) -> Result<String> {
    if a.steps == 0 || !(a.mu_min.is_finite() && a.mu_max.is_finite()) {
        return Err(Error::Validation(
            "quad-scan needs finite bounds and steps >= 1".into(),
        ));
    }
    let model = optional_model(&a.common)?;
    let mut t = Table::new(&["mu_hat", "y_star", "multiplier", "is_sink"]);
    let mut sinks = 0;
    for i in 0..=a.steps {
        let mu = a.mu_min + (a.mu_max - a.mu_min) * i as f64 / a.steps as f64;
        let q = quadratic::analyze(mu);
        sinks += usize::from(q.is_sink());
        t.push(vec![
            fmt17(mu),
            fmt17(q.lower_fixed_point().unwrap_or(f64::NAN)),
            fmt17(q.sink_multiplier.unwrap_or(f64::NAN)),
            q.is_sink().to_string(),
        ]);
    }
    let prov = provenance("quad-scan", a, model.as_ref(), Value::Null, a.common.seed);
    io::emit_csv(&t, &prov, a.common.out.as_deref())?;
    Ok(format!(
        "quad-scan: {} rows, {sinks} with a sink",
        a.steps + 1
    ))
}

#[derive(Debug, Serialize)]
struct ThicknessOutput {
    tau: f64,
    witness: Option<cantor::ThicknessWitness>,
    limit_tau: f64,
    depth: usize,
}

fn load_set(path: &Path, depth: usize) -> Result<CantorApprox> {
    let mut k: CantorApprox = io::read_json(path)?;
    if k.gaps.is_empty() && k.generator.is_some() && k.depth == 0 {
        k.depth = depth;
    }
    k.normalized()
}

fn thickness(a: &ThicknessArgs) -> Result<String> {
    let model = optional_model(&a.common)?;
    let k = match (&a.generator, &a.set) {
        (Some(r), None) => CantorApprox {
            base: (0.0, 1.0),
            gaps: Vec::new(),
            depth: a.depth,
            generator: Some(Generator { ratio: *r }),
        }
        .normalized()?,
        (None, Some(p)) => load_set(p, a.depth)?,
        _ => {
            return Err(Error::Validation(
                "thickness needs --generator or --set".into(),
            ))
        }
    };
    let rep = cantor::thickness(&k);
    let out = ThicknessOutput {
        tau: rep.tau,
        witness: rep.witness,
        limit_tau: cantor::limit_thickness(&k),
        depth: k.depth,
    };
    let prov = provenance(
        "thickness",
        a,
        model.as_ref(),
        json!({ "set": k }),
        a.common.seed,
    );
    io::emit_json(&out, &prov, a.common.out.as_deref())?;
    Ok(format!("thickness: tau = {}", rep.tau))
}

#[derive(Debug, Serialize)]
struct GapLemmaOutput {
    tau_first: f64,
    tau_second: f64,
    trichotomy: cantor::Trichotomy,
}

fn gap_lemma(a: &GapLemmaArgs) -> Result<String> {
    let model = optional_model(&a.common)?;
    let k1 = load_set(&a.first, a.depth)?;
    let k2 = load_set(&a.second, a.depth)?;
    let verdict = cantor::gap_trichotomy_to_depth(&k1, &k2, a.depth)?;
    let out = GapLemmaOutput {
        tau_first: cantor::limit_thickness(&k1),
        tau_second: cantor::limit_thickness(&k2),
        trichotomy: verdict,
    };
    let prov = provenance(
        "gap-lemma",
        a,
        model.as_ref(),
        json!({ "first": k1, "second": k2 }),
        a.common.seed,
    );
    io::emit_json(&out, &prov, a.common.out.as_deref())?;
    Ok(format!("gap-lemma: {verdict:?}"))
}

/// Real multipliers keep their sign; complex ones are reported by modulus.
fn multiplier_value(z: &Multiplier) -> f64 {
    if z.im == 0.0 {
        z.re
    } else {
        z.modulus()
    }
}

fn continuation(a: &ContinuationArgs) -> Result<String> {
    let m = load_model(a.common.model.as_deref())?;
    let word = match (&a.word, a.n) {
        (Some(w), Some(n)) if w.len() != n => {
            return Err(Error::Validation(format!(
                "word {w} has length {}, not n = {n}",
                w.len()
            )))
        }
        (Some(w), _) => w.clone(),
        (None, Some(n)) => Word::zeros(n),
        (None, None) => return Err(Error::Validation("continuation needs --n or --word".into())),
    };
    if !(a.t_from.is_finite() && a.t_to.is_finite()) || a.t_from == a.t_to {
        return Err(Error::Validation(
            "continuation needs distinct finite --t-from and --t-to".into(),
        ));
    }
    let step = a.step.unwrap_or((a.t_to - a.t_from).abs() / 100.0);
    if !(step > 0.0) {
        return Err(Error::Validation(format!(
            "step must be positive, got {step}"
        )));
    }
    let m0 = m.with_t(a.t_from);
    let orbit = orbits::find_sink(&m0, &RenormChart::new(&m0, &word)?)?;
    let path = orbits::continue_orbit(|t| m.with_t(t), &orbit, (a.t_from, a.t_to), step);
    let mut t = Table::new(&["t", "x", "y", "m1", "m2", "class"]);
    for s in &path.samples {
        let o = &s.orbit;
        t.push(vec![
            fmt17(s.t),
            fmt17(o.point.x),
            fmt17(o.point.y),
            fmt17(multiplier_value(&o.multipliers[0])),
            fmt17(multiplier_value(&o.multipliers[1])),
            o.class.to_string(),
        ]);
    }
    let prov = provenance("continuation", a, Some(&m), Value::Null, a.common.seed);
    io::emit_csv(&t, &prov, a.common.out.as_deref())?;
    Ok(format!(
        "continuation: {} samples, end: {:?}",
        path.samples.len(),
        path.end_reason
    ))
}

pub fn window_table(r: &CascadeResult) -> Table {
    let mut t = Table::new(&[
        "i", "n_i", "word", "t_minus", "t_plus", "width", "period", "m1", "m2",
    ]);
    for w in &r.windows {
        let sink = r.final_sinks().iter().find(|s| s.stage == w.index);
        let m = |k: usize| sink.map_or(f64::NAN, |s| multiplier_value(&s.multipliers[k]));
        t.push(vec![
            w.index.to_string(),
            w.n.to_string(),
            w.word.to_string(),
            fmt17(w.t_minus),
            fmt17(w.t_plus),
            fmt17(w.width),
            w.period.to_string(),
            fmt17(m(0)),
            fmt17(m(1)),
        ]);
    }
    t
}

fn sink_cascade(a: &SinkCascadeArgs) -> Result<String> {
    let m = load_model(a.common.model.as_deref())?;
    if a.sinks == 0 {
        return Err(Error::Validation("--sinks must be at least 1".into()));
    }
    let (r, err) = cascade::run_cascade_partial(&m, a.sinks, a.rho, &a.min_n, a.eps);
    let prov = provenance("sink-cascade", a, Some(&m), Value::Null, a.common.seed);
    io::emit_json(&r, &prov, a.common.out.as_deref())?;
    if let Some(p) = &a.csv {
        io::emit_csv(&window_table(&r), &prov, Some(p))?;
    }
    match err {
        Some(e) => Err(e),
        None => Ok(format!(
            "sink-cascade: {} windows, t_infinity = {}, {} simultaneous sinks",
            r.windows.len(),
            r.t_infinity,
            r.final_sinks().len()
        )),
    }
}

fn load_cascade(path: &Path) -> Result<CascadeResult> {
    let r: CascadeResult = io::read_result(path)?;
    if r.verification.is_empty() {
        return Err(Error::Precondition(format!(
            "{}: cascade has no certified stage",
            path.display()
        )));
    }
    Ok(r)
}

fn unfold_survival(a: &UnfoldSurvivalArgs) -> Result<String> {
    let m = load_model(a.common.model.as_deref())?;
    let r = load_cascade(&a.cascade)?;
    let mut offsets = a.offsets.clone();
    match a.log_offsets.as_slice() {
        [] => {}
        &[lo, hi, count] if lo > 0.0 && hi >= lo && count >= 1.0 && count.fract() == 0.0 => {
            offsets.extend(cascade::log_offsets(lo, hi, count as usize))
        }
        _ => {
            return Err(Error::Validation(
                "--log-offsets expects LO,HI,COUNT with 0 < LO <= HI".into(),
            ))
        }
    }
    if offsets.is_empty() {
        return Err(Error::Validation(
            "unfold-survival needs --offsets or --log-offsets".into(),
        ));
    }
    let rep = cascade::survival_under_unfolding(&r, &m, a.v, &offsets)?;
    let mut header = vec!["offset".to_string(), "count".into(), "predicted".into()];
    header.extend((1..=r.final_sinks().len()).map(|i| format!("s{i}")));
    let mut t = Table {
        header,
        rows: Vec::new(),
    };
    for row in &rep.rows {
        let mut cells = vec![
            fmt17(row.offset),
            row.count.to_string(),
            row.predicted.to_string(),
        ];
        cells.extend(row.survivors.iter().map(|&s| u8::from(s).to_string()));
        t.push(cells);
    }
    let prov = provenance(
        "unfold-survival",
        a,
        Some(&m),
        json!({ "cascade": r }),
        a.common.seed,
    );
    io::emit_csv(&t, &prov, a.common.out.as_deref())?;
    Ok(format!(
        "unfold-survival: {} offsets, staircase {}",
        rep.rows.len(),
        if rep.is_staircase() {
            "nonincreasing"
        } else {
            "not monotone"
        }
    ))
}

fn persist_check(a: &PersistCheckArgs) -> Result<String> {
    let m = load_model(a.common.model.as_deref())?;
    let r = load_cascade(&a.cascade)?;
    let rep = cascade::persistence_experiment(&r, &m, a.delta, a.trials, a.common.seed)?;
    let mut t = Table::new(&[
        "trial",
        "stage",
        "word",
        "continued",
        "max_multiplier",
        "beta",
        "beta_ratio",
    ]);
    for trial in &rep.trials {
        for (s, (&ok, &mm)) in r
            .final_sinks()
            .iter()
            .zip(trial.continued.iter().zip(&trial.max_multipliers))
        {
            t.push(vec![
                trial.trial.to_string(),
                s.stage.to_string(),
                s.word.to_string(),
                ok.to_string(),
                fmt17(mm),
                fmt17(trial.beta),
                fmt17(trial.beta_ratio),
            ]);
        }
    }
    let prov = provenance(
        "persist-check",
        a,
        Some(&m),
        json!({ "cascade": r }),
        a.common.seed,
    );
    io::emit_csv(&t, &prov, a.common.out.as_deref())?;
    let full = rep
        .trials
        .iter()
        .filter(|t| t.continued.iter().all(|&c| c))
        .count();
    Ok(format!(
        "persist-check: {full}/{} trials continue all sinks, beta within (1 +- {}): {}",
        rep.trials.len(),
        rep.eps,
        rep.beta_within_bounds()
    ))
}
