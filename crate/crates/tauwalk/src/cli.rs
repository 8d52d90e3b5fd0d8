//! `tau-walk` command line: config resolution, dispatch, JSON/CSV emission.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::Error;
use crate::glinf::commutator_check;
use crate::layering::{chain_propagate, chain_propagate_exact, closed_form_z, plane_partition_check, ClosedForm, DarbouxWord};
use crate::numeric::{parse_rational, q_frac, q_to_f64, sig9};
use crate::partition::Partition;
use crate::potential::Potential;
use crate::random_turn::{
    arcsine_pv_integral, exact_distribution, mode_search, predict_limit_shape, sample_endpoint, simpson, ProcessSpec,
};
use crate::report::Number;
use crate::schur::{schur_special, schur_special_window, SpecialPoint};
use crate::vicious::{
    binomial_determinant, brute_force_walkers, chain_weight_sites, constrained_chain_weight_sites, gauss_kernel_check,
    gv_single_particle, nonintersecting_path_count, ChainSpec, ConstraintMode, ConstraintSet, Geometry,
};

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Usage(String),
    Io(String),
    /// A verification suite ran but did not meet its tolerance.
    CheckFailed(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(s) => write!(f, "usage error: {s}"),
            CliError::Io(s) => write!(f, "i/o error: {s}"),
            CliError::CheckFailed(s) => write!(f, "check failed: {s}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    /// 2 for validation problems, 3 for bound/convergence failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_bound_failure() => 3,
            CliError::Core(_) | CliError::Usage(_) => 2,
            CliError::CheckFailed(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    /// Rationals stay exact ("p/q" strings) whenever the inputs allow it.
    #[default]
    Exact,
    /// Every exact value is reported as its nearest float.
    Float,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    /// Arcsine-density integrals behind the limit-shape asymptotics.
    Appendix,
    /// Commutator, closed-form and dual-route identities at small sizes.
    Identities,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Shape,
    Histogram,
}

/// Fully resolved parameters of one run; serialized into every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub task: Task,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub precision: Precision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Task {
    Exact { steps: usize, potential: Potential, qsq: f64 },
    Sample { steps: usize, potential: Potential, samples: usize },
    Shape { steps: usize, rate: f64, qsq: f64, mode_search: bool, restarts: usize },
    Schur { lambda: Partition, point: SpecialPoint, window: Option<usize> },
    Gv { top: Vec<i64>, bottom: Vec<i64> },
    Vicious { chain: ChainSpec, start: Vec<i64>, end: Vec<i64>, constraints: ConstraintSet },
    Layering { word: DarbouxWord, start: Partition, cap: Option<usize> },
    Check { suite: Suite },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub results: Value,
    pub wall_time_s: f64,
    pub diagnostics: Map<String, Value>,
}

#[derive(Parser, Debug)]
#[command(name = "tau-walk", version, about = "Exact weights, samples and limit shapes of random-turn walks on partitions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    /// Run a saved configuration (the "config" object of an earlier report)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (written atomically); stdout when absent
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format; inferred from the --out extension when absent
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value = "exact")]
    pub precision: Precision,
}

#[derive(Args, Debug, Clone)]
pub struct PotentialArgs {
    /// Constant hop rate r (U_i = −i log r)
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub rate: f64,
    /// Gaussian potential U_i = c·i²/2
    #[arg(long, conflicts_with = "potential", allow_negative_numbers = true)]
    pub gauss: Option<f64>,
    /// Potential description (JSON)
    #[arg(long)]
    pub potential: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Exact endpoint distribution and normalization Z0(T)
    Exact {
        #[arg(long)]
        steps: usize,
        #[command(flatten)]
        potential: PotentialArgs,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        qsq: f64,
    },
    /// Importance-sampled endpoint distribution
    Sample {
        #[arg(long)]
        steps: usize,
        #[command(flatten)]
        potential: PotentialArgs,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Predicted limit shape, optionally against the searched mode
    Shape {
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        rate: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        qsq: f64,
        #[arg(long)]
        mode_search: bool,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
    },
    /// Schur functions at special points
    Schur {
        #[command(subcommand)]
        action: SchurAction,
    },
    /// Binomial determinant and nonintersecting path count
    Gv {
        #[arg(long)]
        top: String,
        #[arg(long)]
        bottom: String,
    },
    /// Vicious-walker chain weights
    Vicious {
        #[arg(long)]
        walkers: usize,
        #[arg(long)]
        steps: usize,
        /// Start sites h'₁ > h'₂ > … ≥ 0
        #[arg(long)]
        start: String,
        #[arg(long)]
        end: String,
        #[command(flatten)]
        potential: PotentialArgs,
        /// Ring geometry on sites 0..=n
        #[arg(long)]
        ring: Option<usize>,
        /// Allow walkers to stay put
        #[arg(long)]
        stay: bool,
        /// Pin sites at an intermediate time: "j:h1,h2,…"
        #[arg(long)]
        contain: Vec<String>,
        /// Exclude configurations containing all of "j:h1,h2,…"
        #[arg(long)]
        avoid: Vec<String>,
    },
    /// Strip-layering chains given by a Darboux word
    Layering {
        /// Comma-separated letters "σ:x"
        #[arg(long)]
        word: String,
        #[command(flatten)]
        potential: PotentialArgs,
        #[arg(long, default_value = "")]
        start: String,
        #[arg(long)]
        cap: Option<usize>,
    },
    /// Verification suites
    Check {
        #[arg(long, value_enum)]
        suite: Suite,
    },
}

#[derive(Subcommand, Debug)]
pub enum SchurAction {
    /// Evaluate s_λ at a special point
    Eval {
        #[arg(long)]
        lambda: String,
        /// tinf | a1:a | q:q | aq:a,q | x:x1,x2,…
        #[arg(long, default_value = "tinf")]
        point: String,
        /// Number of variables / particle window (defaults to ℓ(λ))
        #[arg(long)]
        window: Option<usize>,
    },
}

fn usage(flag: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{flag}: {reason}"))
}

pub fn parse_sites(flag: &str, s: &str) -> CliResult<Vec<i64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<i64>().map_err(|_| usage(flag, format!("{t:?} is not an integer (expected \"h1,h2,…\")"))))
        .collect()
}

fn parse_floats(flag: &str, s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| usage(flag, format!("{t:?} is not a number"))))
        .collect()
}

pub fn parse_point(s: &str) -> CliResult<SpecialPoint> {
    let (tag, rest) = s.split_once(':').unwrap_or((s, ""));
    let nums = parse_floats("--point", rest)?;
    let need = |n: usize| -> CliResult<()> {
        if nums.len() == n {
            Ok(())
        } else {
            Err(usage("--point", format!("{tag} takes {n} value(s), got {}", nums.len())))
        }
    };
    Ok(match tag {
        "tinf" => SpecialPoint::TInfinity,
        "a1" => {
            need(1)?;
            SpecialPoint::TA1 { a: nums[0] }
        }
        "q" => {
            need(1)?;
            SpecialPoint::TInfQ { q: nums[0] }
        }
        "aq" => {
            need(2)?;
            SpecialPoint::TAQ { a: nums[0], q: nums[1] }
        }
        "x" => SpecialPoint::Powersums { x: nums },
        _ => return Err(usage("--point", format!("unknown point {tag:?}; valid: tinf, a1:a, q:q, aq:a,q, x:x1,…"))),
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(flag: &str, path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(flag, format!("{}: {e}", path.display())))
}

fn resolve_potential(p: &PotentialArgs) -> CliResult<Potential> {
    let u = match (&p.potential, p.gauss) {
        (Some(path), _) => read_json("--potential", path)?,
        (None, Some(c)) => Potential::gauss(c),
        (None, None) => Potential::constant_rate(p.rate),
    };
    u.validate()?;
    Ok(u)
}

fn parse_constraints(mode: ConstraintMode, flag: &str, items: &[String], set: ConstraintSet) -> CliResult<ConstraintSet> {
    items.iter().try_fold(set, |set, item| {
        let (j, sites) = item.split_once(':').ok_or_else(|| usage(flag, format!("{item:?} is not of the form \"j:h1,h2,…\"")))?;
        let j: usize = j.trim().parse().map_err(|_| usage(flag, format!("bad time in {item:?}")))?;
        Ok(set.with(j, mode, parse_sites(flag, sites)?))
    })
}

fn resolve_task(cmd: &Command) -> CliResult<Task> {
    Ok(match cmd {
        Command::Exact { steps, potential, qsq } => Task::Exact { steps: *steps, potential: resolve_potential(potential)?, qsq: *qsq },
        Command::Sample { steps, potential, samples } => {
            Task::Sample { steps: *steps, potential: resolve_potential(potential)?, samples: *samples }
        }
        Command::Shape { steps, rate, qsq, mode_search, restarts } => {
            Task::Shape { steps: *steps, rate: *rate, qsq: *qsq, mode_search: *mode_search, restarts: *restarts }
        }
        Command::Schur { action: SchurAction::Eval { lambda, point, window } } => Task::Schur {
            lambda: Partition::parse(lambda).map_err(|e| usage("--lambda", e))?,
            point: parse_point(point)?,
            window: *window,
        },
        Command::Gv { top, bottom } => Task::Gv { top: parse_sites("--top", top)?, bottom: parse_sites("--bottom", bottom)? },
        Command::Vicious { walkers, steps, start, end, potential, ring, stay, contain, avoid } => {
            let u = resolve_potential(potential)?;
            let geometry = ring.map_or(Geometry::HalfLine, Geometry::Ring);
            let mut chain = ChainSpec::uniform(*walkers, *steps, u, geometry);
            chain.stay = *stay;
            let constraints = parse_constraints(ConstraintMode::Contain, "--contain", contain, ConstraintSet::new())?;
            let constraints = parse_constraints(ConstraintMode::Avoid, "--avoid", avoid, constraints)?;
            Task::Vicious { chain, start: parse_sites("--start", start)?, end: parse_sites("--end", end)?, constraints }
        }
        Command::Layering { word, potential, start, cap } => {
            let u = resolve_potential(potential)?;
            Task::Layering {
                word: DarbouxWord::parse(word, &u)?,
                start: Partition::parse(start).map_err(|e| usage("--start", e))?,
                cap: *cap,
            }
        }
        Command::Check { suite } => Task::Check { suite: *suite },
    })
}

/// Shape series on the lattice h = s + R (s the level-0 sites): the predicted
/// density and, when a mode is given, its locally averaged occupation.
fn shape_series(pred: &crate::random_turn::LimitShapePrediction, mode: Option<&Partition>) -> Value {
    let r = pred.radius;
    let reach = r.ceil() as i64 + 3;
    let half = ((r.sqrt() / 2.0).floor() as i64).max(1);
    let occupied = |l: &Partition, s: i64| -> bool { crate::glinf::occupied(l, 0, s) };
    let mut h = Vec::new();
    let mut sp = Vec::new();
    let mut sm = Vec::new();
    for s in -reach..=reach {
        let x = s as f64 + r;
        h.push(x);
        sp.push(pred.sigma(x));
        if let Some(l) = mode {
            let hits = (s - half..=s + half).filter(|&t| occupied(l, t)).count();
            sm.push(Some(hits as f64 / (2 * half + 1) as f64));
        } else {
            sm.push(None);
        }
    }
    json!({ "h": h, "sigma_predicted": sp, "sigma_mode": sm })
}

fn length_histogram(entries: &[crate::random_turn::SampleEntry]) -> Value {
    let mut hist: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
    for e in entries {
        *hist.entry(e.partition.len()).or_insert(0.0) += e.weight_estimate;
    }
    Value::Array(hist.into_iter().map(|(v, w)| json!([v, w])).collect())
}

fn appendix_suite() -> Value {
    use std::f64::consts::{FRAC_PI_2, PI};
    let mut checks = Vec::new();
    for u in [0.5, 1.0, 1.5, 2.0] {
        let got = arcsine_pv_integral(u);
        let want = (2.0 * u).ln();
        checks.push(json!({ "name": format!("pv_integral(u={u})"), "value": got, "expected": want, "error": (got - want).abs() }));
    }
    // moments of σ(y) = ½ − arcsin(y − 1)/π in θ-coordinates y = 1 + sin θ
    let sigma = |th: f64| 0.5 - th / PI;
    let moments: [(&str, f64, Box<dyn Fn(f64) -> f64>, f64); 3] = [
        ("length: ∫₀² σ = 1", -FRAC_PI_2, Box::new(move |th: f64| sigma(th) * th.cos()), 1.0),
        ("area: ∫₀² yσ = 3/4", -FRAC_PI_2, Box::new(move |th: f64| (1.0 + th.sin()) * sigma(th) * th.cos()), 0.75),
        ("diagonal: ∫₁² σ = 1/π", 0.0, Box::new(move |th: f64| sigma(th) * th.cos()), 1.0 / PI),
    ];
    for (name, lo, f, want) in moments {
        let got = simpson(f, lo, FRAC_PI_2, 2000);
        checks.push(json!({ "name": name, "value": got, "expected": want, "error": (got - want).abs() }));
    }
    let max_error = checks.iter().map(|c| c["error"].as_f64().unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    json!({ "suite": "appendix", "checks": checks, "max_error": max_error, "tolerance": 1e-6, "pass": max_error < 1e-6 })
}

fn identities_suite() -> CliResult<Value> {
    let mut checks = Vec::new();
    for u in [Potential::zero(), Potential::constant_rate(2.0), Potential::gauss(0.5)] {
        let rep = commutator_check(&u, (-10, 10), 5)?;
        checks.push(json!({ "name": format!("commutator {:?}", u.kind), "error": rep.max_interior_residual, "exact": rep.exact }));
    }
    let b = closed_form_z(&ClosedForm::B { x: vec![q_frac(1, 2), q_frac(1, 3)], m: 2 })?;
    checks.push(json!({ "name": "closed form (b), T=2, m=2", "error": b.diff, "series": b.series }));
    let a = closed_form_z(&ClosedForm::A { x: vec![0.1, 0.15, 0.2], cap: 30, tol: 1e-9 })?;
    checks.push(json!({ "name": "closed form (a), T=3", "error": a.diff }));
    let pp = plane_partition_check(2, 2, -0.3, 8)?;
    checks.push(json!({ "name": "symmetric plane partitions, T=2, m=2", "error": (pp.lhs - pp.product).abs(),
        "coefficients_match": pp.coefficients_match, "denominator_shift": pp.denominator_shift }));
    let g = gauss_kernel_check(&[3, 1], &Partition::new(vec![1])?, 0.3)?;
    checks.push(json!({ "name": "gauss kernel, h'=(3,1), λ=(1)", "error": g.relative_diff }));
    let (c, e) = gv_single_particle(4, 2)?;
    checks.push(json!({ "name": "single particle C(4,2)", "error": q_to_f64(&(c - e)).abs() }));
    let max_error = checks.iter().map(|c| c["error"].as_f64().unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    let pass = max_error < 1e-9 && pp.coefficients_match;
    Ok(json!({ "suite": "identities", "checks": checks, "max_error": max_error, "tolerance": 1e-9, "pass": pass }))
}

fn run_task(config: &RunConfig, diag: &mut Map<String, Value>) -> CliResult<Value> {
    Ok(match &config.task {
        Task::Exact { steps, potential, qsq } => {
            let spec = ProcessSpec::new(potential.clone(), *steps).with_qsq(*qsq).with_seed(config.seed);
            let dist = exact_distribution(&spec)?;
            json!({ "spec": spec, "Z0": dist.z, "log_Z0": dist.log_z, "entries": dist.entries })
        }
        Task::Sample { steps, potential, samples } => {
            let spec = ProcessSpec::new(potential.clone(), *steps).with_seed(config.seed);
            let rep = sample_endpoint(&spec, *samples)?;
            diag.insert("std_error".into(), json!(rep.std_error));
            let hist = length_histogram(&rep.entries);
            json!({ "spec": spec, "report": rep, "length_histogram": hist })
        }
        Task::Shape { steps, rate, qsq, mode_search: search, restarts } => {
            let pred = predict_limit_shape(*rate, *steps, *qsq)?;
            let mode = if *search {
                let spec = ProcessSpec::new(Potential::constant_rate(*rate), *steps).with_qsq(*qsq).with_seed(config.seed);
                Some(mode_search(&spec, *restarts)?)
            } else {
                None
            };
            let series = shape_series(&pred, mode.as_ref().map(|m| &m.partition));
            if let Some(m) = &mode {
                let rel = |got: f64, want: f64| (got - want) / want;
                diag.insert(
                    "relative_deviation".into(),
                    json!({ "length": rel(m.length as f64, pred.length), "area": rel(m.weight as f64, pred.area),
                            "diagonal": rel(m.diagonal as f64, pred.diagonal) }),
                );
            }
            json!({ "prediction": pred, "mode": mode, "shape_series": series })
        }
        Task::Schur { lambda, point, window } => {
            let v = match window {
                Some(n) => schur_special_window(lambda, point, *n)?,
                None => schur_special(lambda, point)?,
            };
            json!({ "lambda": lambda, "point": point, "value": v, "float": v.to_f64() })
        }
        Task::Gv { top, bottom } => {
            let det = binomial_determinant(top, bottom)?;
            let count = match nonintersecting_path_count(top, bottom) {
                Ok(c) => Some(c.to_string()),
                Err(e) if e.is_bound_failure() => {
                    diag.insert("path_count".into(), json!(format!("skipped: {e}")));
                    None
                }
                Err(e) => return Err(e.into()),
            };
            json!({ "top": top, "bottom": bottom, "determinant": det.to_string(), "path_count": count })
        }
        Task::Vicious { chain, start, end, constraints } => {
            let weight = if constraints.constraints.is_empty() {
                let cw = chain_weight_sites(start, end, chain)?;
                if let Some(c) = cw.condition {
                    diag.insert("condition".into(), json!(c));
                }
                cw.weight
            } else {
                constrained_chain_weight_sites(start, end, chain, constraints)?
            };
            let (plus, minus) = match brute_force_walkers(start, end, chain) {
                Ok(c) if constraints.constraints.is_empty() => (Some(c.w_plus), Some(c.w_minus)),
                Ok(_) => {
                    diag.insert("W_plus".into(), json!("not split under constraints"));
                    (None, None)
                }
                Err(e) if e.is_bound_failure() => {
                    diag.insert("W_plus".into(), json!(format!("skipped: {e}")));
                    (None, None)
                }
                Err(e) => return Err(e.into()),
            };
            json!({ "weight": weight, "W_plus": plus, "W_minus": minus })
        }
        Task::Layering { word, start, cap } => {
            let (states, outside, exact) = match chain_propagate_exact(start, word, *cap)? {
                Some(res) => {
                    let w = word.ops.first().map_or(1.0, |op| op.potential.w());
                    let states: Vec<Value> = res
                        .states
                        .entries
                        .iter()
                        .map(|(k, v)| {
                            let n = v.as_rational().map_or(Number::Float(v.eval(w)), Number::Exact);
                            json!({ "partition": k.partition, "weight": n })
                        })
                        .collect();
                    (states, res.mass_outside, true)
                }
                None => {
                    let res = chain_propagate(start, word, *cap)?;
                    let states = res.states.entries.iter().map(|(k, v)| json!({ "partition": k.partition, "weight": v })).collect();
                    (states, res.mass_outside, false)
                }
            };
            diag.insert("mass_outside".into(), json!(outside));
            json!({ "states": states, "mass_outside": outside, "exact": exact })
        }
        Task::Check { suite } => {
            let v = match suite {
                Suite::Appendix => appendix_suite(),
                Suite::Identities => identities_suite()?,
            };
            if v["pass"] != json!(true) {
                return Err(CliError::CheckFailed(format!("{suite:?} suite max error {}", v["max_error"])));
            }
            v
        }
    })
}

/// Replaces every exact "p/q" string by its float value.
fn floatify(v: &mut Value) {
    match v {
        Value::String(s) => {
            if let Some(q) = parse_rational(s) {
                if let Some(n) = serde_json::Number::from_f64(q_to_f64(&q)) {
                    *v = Value::Number(n);
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(floatify),
        Value::Object(o) => o.values_mut().for_each(floatify),
        _ => {}
    }
}

/// Runs a resolved configuration.
pub fn execute(config: &RunConfig) -> CliResult<RunReport> {
    let t0 = Instant::now();
    let mut diagnostics = Map::new();
    let mut results = run_task(config, &mut diagnostics)?;
    if config.precision == Precision::Float {
        floatify(&mut results);
    }
    Ok(RunReport { config: config.clone(), results, wall_time_s: t0.elapsed().as_secs_f64(), diagnostics })
}

/// CSV plot data with a header row; floats at 9 significant digits.
pub fn emit_plot_data(report: &RunReport, kind: PlotKind) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    match kind {
        PlotKind::Shape => {
            let s = report
                .results
                .get("shape_series")
                .ok_or_else(|| Error::MissingSeries("the report has no shape series".into()))?;
            w.write_record(["h", "sigma_predicted", "sigma_mode"]).map_err(io)?;
            let col = |name: &str| s[name].as_array().cloned().unwrap_or_default();
            let (h, sp, sm) = (col("h"), col("sigma_predicted"), col("sigma_mode"));
            for i in 0..h.len() {
                let f = |v: &Value| v.as_f64().map(sig9).unwrap_or_default();
                w.write_record([f(&h[i]), f(&sp[i]), sm.get(i).map(f).unwrap_or_default()]).map_err(io)?;
            }
        }
        PlotKind::Histogram => {
            let hist = report
                .results
                .get("length_histogram")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::MissingSeries("the report has no length histogram".into()))?;
            w.write_record(["value", "weight_sum"]).map_err(io)?;
            for row in hist {
                w.write_record([row[0].to_string(), row[1].as_f64().map(sig9).unwrap_or_default()]).map_err(io)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// The report rendered in the requested format.
pub fn render(report: &RunReport) -> CliResult<String> {
    match report.config.format {
        OutputFormat::Json => Ok(serde_json::to_string_pretty(report).expect("report serializes") + "\n"),
        OutputFormat::Csv => {
            let kind = match report.config.task {
                Task::Shape { .. } => PlotKind::Shape,
                Task::Sample { .. } => PlotKind::Histogram,
                _ => return Err(Error::MissingSeries("CSV output exists for shape and sample runs only".into()).into()),
            };
            emit_plot_data(report, kind)
        }
    }
}

/// Writes through a temporary file in the target directory and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn thread_count() -> CliResult<Option<usize>> {
    match std::env::var("TAU_WALK_THREADS") {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(usage("TAU_WALK_THREADS", format!("{s:?} is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

/// Builds the resolved configuration from parsed arguments.
pub fn resolve(cli: &Cli) -> CliResult<RunConfig> {
    let mut config = match (&cli.config, &cli.command) {
        (Some(path), None) => read_json::<RunConfig>("--config", path)?,
        (Some(_), Some(_)) => return Err(usage("--config", "give either a subcommand or --config, not both")),
        (None, Some(cmd)) => {
            RunConfig { task: resolve_task(cmd)?, seed: cli.seed, precision: cli.precision, out: None, format: OutputFormat::Json }
        }
        (None, None) => return Err(usage("<command>", "one of exact, sample, shape, schur, gv, vicious, layering, check")),
    };
    if cli.out.is_some() {
        config.out = cli.out.clone();
    }
    config.format = match cli.format {
        Some(f) => f,
        None if cli.config.is_some() && cli.out.is_none() => config.format,
        None => match config.out.as_ref().and_then(|p| p.extension()).and_then(|e| e.to_str()) {
            Some("csv") => OutputFormat::Csv,
            _ => OutputFormat::Json,
        },
    };
    Ok(config)
}

fn run_inner(args: Vec<OsString>) -> CliResult<()> {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    let config = resolve(&cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count()? {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Io(e.to_string()))?;
    let report = pool.install(|| execute(&config))?;
    let text = render(&report)?;
    match &config.out {
        Some(path) => write_atomic(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Entry point of the binary: returns the process exit code.
pub fn run(args: impl IntoIterator<Item = impl Into<OsString>>) -> i32 {
    match run_inner(args.into_iter().map(Into::into).collect()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("tau-walk: {e}");
            e.exit_code()
        }
    }
}
