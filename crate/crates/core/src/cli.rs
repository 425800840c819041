//! Command-line driver: resolves flags and config files into an
//! [`ExperimentConfig`], runs one experiment and writes its reports.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::critical::{self, Classification, CriticalConfig, CriticalSet, DecayPrediction};
use crate::decay::{self, DecayFit, LeadingCoefficient};
use crate::error::Error;
use crate::kernel::{self, GridFunction, KernelSpec, WeakTypeReport};
use crate::oscquad::QuadratureConfig;
use crate::phase::{OperatorSpec, PartitionSpec, PhaseSpec};
use crate::report::{canonical_json, write_atomic, Table};
use crate::restriction::{self, BoundsReport, KnappConfig, KnappReport, RatioReport, SeparableFunction};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_CANT_CREATE: i32 = 73;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Decay,
    Optimality,
    Critical,
    Kernel,
    Knapp,
    Restrict,
    Bounds,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Decay => "decay",
            Command::Optimality => "optimality",
            Command::Critical => "critical",
            Command::Kernel => "kernel",
            Command::Knapp => "knapp",
            Command::Restrict => "restrict",
            Command::Bounds => "bounds",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    #[default]
    Both,
}

/// Experiment parameters; unset fields take per-command defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tmin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tmax: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ppd: Option<usize>,
    /// Decimal or `a/b`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_list: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_list: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pivot: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random: Option<usize>,
}

impl Params {
    /// Fields set in `over` replace those in `self`.
    fn overlay(mut self, over: Params) -> Params {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(n, alpha, beta, m, dir, tmin, tmax, ppd, p, delta_list, sigma_list, a, b, cells, pivot, random);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub params: Params,
    pub out: PathBuf,
    pub seed: u64,
    pub format: Format,
}

/// Shape of a `--config` file; every field optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    command: Option<Command>,
    params: Params,
    out: Option<PathBuf>,
    seed: Option<u64>,
    format: Option<Format>,
}

#[derive(Debug, Parser)]
#[command(name = "oscrest", version, about = "Oscillatory integrals on spheres and restriction-type experiments")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    pub beta: Option<Vec<u32>>,
    #[arg(long)]
    pub m: Option<u32>,
    /// Direction xi (normalised before use).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub dir: Option<Vec<f64>>,
    #[arg(long)]
    pub tmin: Option<f64>,
    #[arg(long)]
    pub tmax: Option<f64>,
    /// Points per decade.
    #[arg(long)]
    pub ppd: Option<usize>,
    /// Lebesgue exponent, decimal or a/b.
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long = "delta-list", value_delimiter = ',')]
    pub delta_list: Option<Vec<f64>>,
    #[arg(long = "sigma-list", value_delimiter = ',')]
    pub sigma_list: Option<Vec<f64>>,
    /// Kernel exponent a.
    #[arg(long)]
    pub a: Option<f64>,
    /// Kernel exponent b.
    #[arg(long)]
    pub b: Option<f64>,
    /// Grid cells per axis for kernel inputs.
    #[arg(long)]
    pub cells: Option<usize>,
    /// Zero-based pivot coordinate of the Knapp rectangle.
    #[arg(long)]
    pub pivot: Option<usize>,
    /// Number of random directions for `critical`.
    #[arg(long)]
    pub random: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Cli {
    fn params(&self) -> Params {
        Params {
            n: self.n,
            alpha: self.alpha.clone(),
            beta: self.beta.clone(),
            m: self.m,
            dir: self.dir.clone(),
            tmin: self.tmin,
            tmax: self.tmax,
            ppd: self.ppd,
            p: self.p.clone(),
            delta_list: self.delta_list.clone(),
            sigma_list: self.sigma_list.clone(),
            a: self.a,
            b: self.b,
            cells: self.cells,
            pivot: self.pivot,
            random: self.random,
        }
    }
}

/// A failed run: exit code and message.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Failure { code: EXIT_VALIDATION, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_convergence() { EXIT_CONVERGENCE } else { EXIT_VALIDATION };
        Failure { code, message: e.to_string() }
    }
}

/// Emitted JSON: the resolved configuration next to the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub config: ExperimentConfig,
    pub result: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayResult {
    pub direction: Vec<f64>,
    pub exponent: f64,
    pub residual: f64,
    pub a0: Option<f64>,
    pub spread: Option<f64>,
    pub k: Option<u32>,
    pub fit: DecayFit,
    pub predicted: DecayPrediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityResult {
    pub direction: Vec<f64>,
    pub k: u32,
    pub leading: LeadingCoefficient,
    pub fit: DecayFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalResult {
    pub direction: Vec<f64>,
    pub sets: Vec<CriticalSet>,
    pub classifications: Vec<Classification>,
    pub prediction: DecayPrediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelResult {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub q: f64,
    pub norm_ratio: f64,
    /// `(max - min) / mean` of the ratio over the dilation family.
    pub homogeneity_residual: f64,
    pub scales: Vec<f64>,
    pub scale_ratios: Vec<f64>,
    pub weak_type: WeakTypeReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestrictResult {
    pub opspec: OperatorSpec,
    pub sigma: Vec<f64>,
    #[serde(flatten)]
    pub report: RatioReport,
}

/// JSON result plus an optional CSV table.
struct Outcome {
    result: Value,
    table: Table,
    code: i32,
}

/// Parses `1.25`, `4/3` or `2` exactly.
fn parse_rational(s: &str) -> Result<Ratio<i64>, Failure> {
    let bad = || Failure::validation(format!("cannot parse exponent '{s}'"));
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let (a, b): (i64, i64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if b == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(a, b));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if frac.len() > 15 || !frac.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let den = 10i64.pow(frac.len() as u32);
    let whole: i64 = if int.is_empty() || int == "-" { 0 } else { int.parse().map_err(|_| bad())? };
    let part: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
    let sign = if s.starts_with('-') { -1 } else { 1 };
    Ok(Ratio::new(whole * den + sign * part, den))
}

fn ratio_value(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn format_ratio(r: Ratio<i64>) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn unit(v: &[f64]) -> Result<Vec<f64>, Failure> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Failure::validation("direction must be a nonzero finite vector"));
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

fn dyadic(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(k)).collect()
}

/// Fills defaults for `command` and checks consistency.
fn resolve_params(command: Command, mut p: Params) -> Result<Params, Failure> {
    let lens = [
        p.alpha.as_ref().map(Vec::len),
        p.beta.as_ref().map(Vec::len),
        p.dir.as_ref().map(Vec::len),
    ];
    let n = p.n.or(lens.iter().flatten().copied().next()).unwrap_or(2);
    if let Some(len) = lens.iter().flatten().find(|&&l| l != n) {
        return Err(Failure::validation(format!("vector of length {len} does not match n = {n}")));
    }
    if n < 2 {
        return Err(Failure::validation(format!("dimension n = {n} must be at least 2")));
    }
    p.n = Some(n);
    match command {
        Command::Decay | Command::Optimality | Command::Critical => {
            p.beta.get_or_insert_with(|| vec![3; n]);
            if command != Command::Critical || p.random.is_none() {
                let mut e = vec![0.0; n];
                e[n - 1] = 1.0;
                p.dir = Some(unit(p.dir.as_deref().unwrap_or(&e))?);
            }
            if command != Command::Critical {
                p.tmin.get_or_insert(1e2);
                p.tmax.get_or_insert(if n == 2 { 1e5 } else { 1e3 });
                p.ppd.get_or_insert(16);
            }
        }
        Command::Kernel => {
            let a = *p.a.get_or_insert(3.0);
            let b = *p.b.get_or_insert(6.0);
            p.cells.get_or_insert(32);
            if p.p.is_none() {
                // 2b/(2b - a) lies inside (1, b/(b - a)) for every admissible pair
                p.p = Some(if a.fract() == 0.0 && b.fract() == 0.0 && b.abs() < 1e15 {
                    format_ratio(Ratio::new(2 * b as i64, 2 * b as i64 - a as i64))
                } else {
                    crate::report::format_float(2.0 * b / (2.0 * b - a))
                });
            }
        }
        Command::Knapp | Command::Restrict | Command::Bounds => {
            p.alpha.get_or_insert_with(|| vec![3; n]);
            p.m.get_or_insert(n as u32 + 1);
            match command {
                Command::Knapp => {
                    p.pivot.get_or_insert(0);
                    p.delta_list.get_or_insert_with(|| dyadic(-7, -2).into_iter().rev().collect());
                }
                Command::Restrict => {
                    p.sigma_list.get_or_insert_with(|| dyadic(-3, 3));
                }
                _ => {}
            }
        }
    }
    Ok(p)
}

/// Resolves flags over an optional config file.
pub fn resolve(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::validation(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str::<ConfigFile>(&text)
                .map_err(|e| Failure::validation(format!("invalid config {}: {e}", path.display())))?
        }
        None => ConfigFile::default(),
    };
    if let Some(c) = file.command {
        if c != cli.command {
            return Err(Failure::validation(format!(
                "config file is for '{}' but '{}' was requested",
                c.name(),
                cli.command.name()
            )));
        }
    }
    let params = resolve_params(cli.command, file.params.overlay(cli.params()))?;
    Ok(ExperimentConfig {
        command: cli.command,
        params,
        out: cli.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("oscrest-out")),
        seed: cli.seed.or(file.seed).unwrap_or(0),
        format: cli.format.or(file.format).unwrap_or_default(),
    })
}

fn sweep_table(sweep: &decay::DecaySweep) -> Table {
    let mut t = Table::new(vec!["t", "re_I", "im_I", "abs_I"]);
    for ((tv, v), a) in sweep.t_values.iter().zip(&sweep.values).zip(&sweep.magnitudes) {
        t.push(vec![(*tv).into(), v.re.into(), v.im.into(), (*a).into()]);
    }
    t
}

/// `k` with `exponent = -1/k`, when there is one.
fn decay_order(exponent: f64) -> Option<u32> {
    let k = -1.0 / exponent;
    let r = k.round();
    ((k - r).abs() < 1e-9 && r >= 1.0).then_some(r as u32)
}

fn predicted(beta: &[u32], dir: &[f64]) -> Result<DecayPrediction, Failure> {
    let unit = PhaseSpec::along(beta.to_vec(), dir, 1.0)?;
    let n = beta.len();
    let sets = critical::critical_sets(&unit, &PartitionSpec::standard(n), &CriticalConfig::for_dimension(n))?;
    Ok(critical::decay_bound(&sets, &unit)?)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialise")
}

fn run_decay(p: &Params, optimality: bool) -> Result<Outcome, Failure> {
    let (beta, dir) = (p.beta.clone().unwrap(), p.dir.clone().unwrap());
    let quad = QuadratureConfig::for_dimension(beta.len());
    let sweep = decay::decay_sweep(&beta, &dir, p.tmin.unwrap(), p.tmax.unwrap(), p.ppd.unwrap(), &quad)?;
    let fit = decay::fit_envelope(&sweep)?;
    let pred = predicted(&beta, &dir)?;
    let k = decay_order(pred.exponent);
    let table = sweep_table(&sweep);
    if optimality {
        let k = k.ok_or_else(|| {
            Failure::validation(format!("predicted exponent {} is not of the form -1/k", pred.exponent))
        })?;
        let leading = decay::leading_coefficient(&sweep, k, 0.05)?;
        let code = if leading.converged { EXIT_OK } else { EXIT_CONVERGENCE };
        let result = OptimalityResult { direction: dir, k, leading, fit };
        return Ok(Outcome { result: to_value(&result), table, code });
    }
    let leading = k.map(|k| decay::leading_coefficient(&sweep, k, 0.05)).transpose()?;
    let result = DecayResult {
        direction: dir,
        exponent: fit.exponent,
        residual: fit.residual,
        a0: leading.as_ref().map(|l| l.a0),
        spread: leading.as_ref().map(|l| l.spread),
        k,
        fit,
        predicted: pred,
    };
    Ok(Outcome { result: to_value(&result), table, code: EXIT_OK })
}

fn random_directions(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| loop {
            let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            if let Ok(u) = unit(&v) {
                break u;
            }
        })
        .collect()
}

fn run_critical(p: &Params, seed: u64) -> Result<Outcome, Failure> {
    let beta = p.beta.clone().unwrap();
    let n = beta.len();
    let dirs = match p.random {
        Some(k) => random_directions(n, k, seed),
        None => vec![p.dir.clone().unwrap()],
    };
    let config = CriticalConfig::for_dimension(n);
    let part = PartitionSpec::standard(n);
    let mut table = Table::new(vec![
        "direction", "chart", "kind", "y_prime", "grad_norm", "degenerate", "axis_order", "case",
    ]);
    let mut results = Vec::with_capacity(dirs.len());
    let join = |v: &[f64]| v.iter().map(|x| crate::report::format_float(*x)).collect::<Vec<_>>().join(";");
    for dir in dirs {
        let unit = PhaseSpec::along(beta.clone(), &dir, 1.0)?;
        let sets = critical::critical_sets(&unit, &part, &config)?;
        let prediction = critical::decay_bound(&sets, &unit)?;
        let mut classifications = Vec::new();
        for pt in sets.iter().flat_map(|s| &s.points) {
            let c = critical::classify(&unit, pt, &config);
            table.push(vec![
                join(&dir).into(),
                pt.chart.to_string().into(),
                pt.kind.to_string().into(),
                join(&pt.yprime).into(),
                pt.grad_norm.into(),
                pt.degenerate.into(),
                pt.axis_order.map_or(String::new(), |k| k.to_string()).into(),
                serde_json::to_value(c.case).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default().into(),
            ]);
            classifications.push(c);
        }
        results.push(CriticalResult { direction: dir, sets, classifications, prediction });
    }
    Ok(Outcome { result: to_value(&results), table, code: EXIT_OK })
}

fn run_kernel(p: &Params) -> Result<Outcome, Failure> {
    let n = p.n.unwrap();
    let spec = KernelSpec::new(n, p.a.unwrap(), p.b.unwrap())?;
    let pr = parse_rational(p.p.as_deref().unwrap())?;
    let pv = ratio_value(pr);
    let q = kernel::lebesgue_exponents(&spec, pv)?;
    let cells = p.cells.unwrap();
    if cells < 4 {
        return Err(Failure::validation("kernel grids need at least 4 cells per axis"));
    }
    let gauss = |y: &[f64]| (-y.iter().map(|v| v * v).sum::<f64>()).exp();
    let scales = [0.25, 0.5, 1.0, 2.0, 4.0];
    let family = kernel::dilation_family(&spec, gauss, 3.0, cells, pv, &scales)?;
    let scale_ratios: Vec<f64> = family.iter().map(|(_, r)| r.ratio).collect();
    let norm_ratio = scale_ratios[2];
    let mean = scale_ratios.iter().sum::<f64>() / scale_ratios.len() as f64;
    let (lo, hi) = scale_ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(*r), b.max(*r)));
    let ball = GridFunction::sample(n, 1.25, cells, |y| if spec.gauge(y) <= 1.0 { 1.0 } else { 0.0 })?;
    let s_grid = kernel::resolvable_s_grid(&spec, &ball, 10)?;
    let weak_type = kernel::weak_type_probe(&spec, &ball, &s_grid)?;
    let mut table = Table::new(vec!["s", "superlevel_measure"]);
    for (s, m) in weak_type.s.iter().zip(&weak_type.measure) {
        table.push(vec![(*s).into(), (*m).into()]);
    }
    let result = KernelResult {
        n,
        a: spec.a,
        b: spec.b,
        p: pv,
        q,
        norm_ratio,
        homogeneity_residual: (hi - lo) / mean,
        scales: scales.to_vec(),
        scale_ratios,
        weak_type,
    };
    Ok(Outcome { result: to_value(&result), table, code: EXIT_OK })
}

fn operator(p: &Params) -> Result<OperatorSpec, Failure> {
    Ok(OperatorSpec::new(p.alpha.clone().unwrap(), p.m.unwrap())?)
}

fn run_knapp(p: &Params) -> Result<Outcome, Failure> {
    let op = operator(p)?;
    let deltas = p.delta_list.clone().unwrap();
    let delta_max = deltas.iter().copied().fold(0.0, f64::max);
    let cfg = KnappConfig::with_defaults(op, p.pivot.unwrap(), delta_max)?;
    let pr = p.p.as_deref().map(parse_rational).transpose()?;
    let quad = QuadratureConfig::for_dimension(cfg.op.n());
    let rep: KnappReport = restriction::knapp_experiment(&cfg, &deltas, pr, &quad)?;
    let mut table = Table::new(vec!["delta", "lhs", "norm", "lower_bound_margin", "cosine_margin"]);
    for pt in &rep.points {
        table.push(vec![
            pt.delta.into(),
            pt.lhs.into(),
            pt.norm.into(),
            pt.lower_bound_margin.into(),
            pt.cosine_margin.into(),
        ]);
    }
    Ok(Outcome { result: to_value(&rep), table, code: EXIT_OK })
}

fn run_restrict(p: &Params) -> Result<Outcome, Failure> {
    let op = operator(p)?;
    let n = op.n();
    let bounds = restriction::admissible_bounds(&op)?;
    let pv = match p.p.as_deref() {
        Some(s) => ratio_value(parse_rational(s)?),
        None => bounds.p_sufficient.value(),
    };
    let sigma = p.sigma_list.clone().unwrap();
    let family: Vec<SeparableFunction> =
        sigma.iter().map(|&s| SeparableFunction::gaussian(n, s)).collect::<Result<_, _>>()?;
    let report = restriction::restriction_ratio(&op, &family, pv, &QuadratureConfig::for_dimension(n))?;
    let mut table = Table::new(vec!["sigma", "sphere_norm", "lp_norm", "ratio"]);
    for (i, s) in sigma.iter().enumerate() {
        table.push(vec![(*s).into(), report.sphere_norms[i].into(), report.lp_norms[i].into(), report.ratios[i].into()]);
    }
    let result = RestrictResult { opspec: op, sigma, report };
    Ok(Outcome { result: to_value(&result), table, code: EXIT_OK })
}

fn run_bounds(p: &Params) -> Result<Outcome, Failure> {
    let op = operator(p)?;
    let b: BoundsReport = restriction::admissible_bounds(&op)?;
    let mut table = Table::new(vec!["p_sufficient", "p_necessary", "p_necessary_strongest", "gap", "in_theorem_range"]);
    table.push(vec![
        b.p_sufficient.to_string().into(),
        b.p_necessary.to_string().into(),
        b.p_necessary_strongest.to_string().into(),
        b.gap.map_or(String::new(), crate::report::format_float).into(),
        b.in_theorem_range.into(),
    ]);
    Ok(Outcome { result: to_value(&b), table, code: EXIT_OK })
}

/// Runs the experiment and writes its reports; returns the exit code.
pub fn run(config: &ExperimentConfig) -> Result<i32, Failure> {
    let p = &config.params;
    let outcome = match config.command {
        Command::Decay => run_decay(p, false)?,
        Command::Optimality => run_decay(p, true)?,
        Command::Critical => run_critical(p, config.seed)?,
        Command::Kernel => run_kernel(p)?,
        Command::Knapp => run_knapp(p)?,
        Command::Restrict => run_restrict(p)?,
        Command::Bounds => run_bounds(p)?,
    };
    emit_report(config, &outcome.result, &outcome.table)?;
    Ok(outcome.code)
}

/// Writes `<command>.json` and/or `<command>.csv` under the output directory.
pub fn emit_report(config: &ExperimentConfig, result: &Value, table: &Table) -> Result<Vec<PathBuf>, Failure> {
    let io = |e: crate::report::WriteError| Failure { code: EXIT_CANT_CREATE, message: e.to_string() };
    let base: &Path = &config.out;
    let name = config.command.name();
    let mut written = Vec::new();
    if matches!(config.format, Format::Json | Format::Both) {
        let report = Report { config: config.clone(), result: result.clone() };
        let text = canonical_json(&report).map_err(|e| Failure::validation(e.to_string()))?;
        let path = base.join(format!("{name}.json"));
        write_atomic(&path, text.as_bytes()).map_err(io)?;
        written.push(path);
    }
    if matches!(config.format, Format::Csv | Format::Both) {
        let path = base.join(format!("{name}.csv"));
        write_atomic(&path, &table.to_csv()).map_err(io)?;
        written.push(path);
    }
    Ok(written)
}

/// Caps the worker pool at `OSCREST_THREADS` when set.
pub fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("OSCREST_THREADS") else {
        return Ok(());
    };
    let k: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|k| *k > 0)
        .ok_or_else(|| Failure::validation(format!("OSCREST_THREADS must be a positive integer, got '{v}'")))?;
    // a pool that already exists keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    Ok(())
}

/// Full command-line entry point.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = init_threads().and_then(|_| resolve(&cli)).and_then(|cfg| run(&cfg));
    match outcome {
        Ok(code) => {
            if code == EXIT_CONVERGENCE {
                eprintln!("error: result did not meet its convergence criterion (report written)");
            }
            code
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
