//! Subcommands, configuration validation and runners.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ndis_core::gl::{gl_solvers, Bcd, GlSolver, Universe};
use ndis_core::linalg::{residuals, Matrix, MvGaussian, RegressionData};
use ndis_core::mechanism::{mechanisms, MechInput, MechParams, Release};
use ndis_core::rp::rp_sample;
use ndis_core::spectrum::{compute, spectra, Curve, Method, SpectrumInput};
use ndis_core::SeedStream;

use crate::error::{CliError, Result};
use crate::io::{csv_rows, fmt_f64, load_csv};
use crate::metrics::{dpr, pdr, relative_error, Summary};

#[derive(Debug, Parser)]
#[command(name = "ndis", version, about = "Indistinguishability spectra and DP mechanisms for Gaussian sketches")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute an (eps, delta) indistinguishability spectrum.
    IsCurve(IsCurveArgs),
    /// Calibrate and run a privacy mechanism.
    Mechanism(MechanismArgs),
    /// Utility metrics of a mechanism over repeated trials.
    Metrics(MetricsArgs),
    /// Global-leverage search over a record universe.
    Gl(GlArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Auto,
    Analytic,
    Mc,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => Method::Auto,
            MethodArg::Analytic => Method::Analytic,
            MethodArg::Mc => Method::Mc,
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Input CSV (database, `[B, b]` for regression, or record universe).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Comma-separated privacy parameters.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub eps: Vec<f64>,
    /// Evenly spaced grid `start:stop:count` (count points, both ends included).
    #[arg(long, value_name = "A:B:STEPS")]
    pub eps_grid: Option<String>,
    /// Defaults to 1/n for the input database.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Projection or sketch size.
    #[arg(long, default_value_t = 1)]
    pub r: u32,
    /// Monte Carlo accuracy.
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    /// Monte Carlo failure probability.
    #[arg(long, default_value_t = 0.01)]
    pub gamma: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Row-norm bound; defaults to the largest row norm of the input.
    #[arg(long)]
    pub l: Option<f64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct IsCurveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Spectrum kind: gaussian, gauss-mech, rp, rlc, als.
    #[arg(long)]
    pub kind: String,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    pub method: MethodArg,
    /// JSON file `{"mu1", "sigma1", "mu2", "sigma2"}` for the gaussian kind.
    #[arg(long)]
    pub pair: Option<PathBuf>,
    /// Sensitivity-to-noise ratio for the gauss-mech kind.
    #[arg(long)]
    pub t: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MechanismArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// rp, rlc, ls, als, rp-rel, ls-rel.
    #[arg(long)]
    pub mechanism: String,
    /// Record universe for relative mechanisms; defaults to the input rows.
    #[arg(long)]
    pub universe: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// A mechanism name, or `unnoised` for a plain random projection.
    #[arg(long, default_value = "rp")]
    pub mechanism: String,
    #[arg(long)]
    pub universe: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Report raw `D^T G` instead of scaling projections by 1/sqrt(r).
    #[arg(long)]
    pub no_scale: bool,
    /// Score this projected matrix (one row per input column) instead of running trials.
    #[arg(long, conflicts_with = "solution")]
    pub projected: Option<PathBuf>,
    /// Score this solution vector (one value per row) against the exact least-squares fit.
    #[arg(long)]
    pub solution: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GlArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Database size.
    #[arg(long)]
    pub k: usize,
    /// exact, greedy, bcd.
    #[arg(long, default_value = "greedy")]
    pub solver: String,
    /// Iteration cap for bcd.
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
}

/// Validated settings shared by all commands.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: &'static str,
    pub input: Option<PathBuf>,
    pub eps_grid: Vec<f64>,
    pub delta: Option<f64>,
    pub r: u32,
    pub alpha: f64,
    pub gamma: f64,
    pub seed: Option<u64>,
    pub l: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `start:stop:count`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || usage(format!("--eps-grid expects start:stop:count, got {spec:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(usage(format!("--eps-grid needs finite start <= stop, got {spec:?}")));
    }
    Ok(match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
            .collect(),
    })
}

impl ExperimentConfig {
    pub fn new(command: &'static str, args: &CommonArgs) -> Result<Self> {
        let eps_grid = match (&args.eps_grid, args.eps.is_empty()) {
            (Some(_), false) => return Err(usage("give either --eps or --eps-grid, not both")),
            (Some(g), true) => parse_grid(g)?,
            (None, _) => args.eps.clone(),
        };
        if eps_grid.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(usage("eps values must be finite and >= 0"));
        }
        if eps_grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(usage("eps grid must be sorted ascending"));
        }
        for (name, v) in [("alpha", args.alpha), ("gamma", args.gamma)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(usage(format!("--{name} must lie in (0, 1), got {v}")));
            }
        }
        if let Some(d) = args.delta {
            if !(d > 0.0 && d < 1.0) {
                return Err(usage(format!("--delta must lie in (0, 1), got {d}")));
            }
        }
        if let Some(l) = args.l {
            if !(l > 0.0 && l.is_finite()) {
                return Err(usage(format!("--l must be > 0, got {l}")));
            }
        }
        if args.r == 0 {
            return Err(usage("--r must be >= 1"));
        }
        Ok(Self {
            command,
            input: args.input.clone(),
            eps_grid,
            delta: args.delta,
            r: args.r,
            alpha: args.alpha,
            gamma: args.gamma,
            seed: args.seed,
            l: args.l,
            out: args.out.clone(),
            format: args.format,
        })
    }

    fn input_path(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| usage(format!("{} needs --input", self.command)))
    }

    fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| usage(format!("{} samples randomness and needs --seed", self.command)))
    }

    /// The single privacy parameter of a mechanism run (default 1).
    fn single_eps(&self) -> Result<f64> {
        match self.eps_grid.as_slice() {
            [] => Ok(1.0),
            [e] => Ok(*e),
            _ => Err(usage(format!("{} takes a single --eps", self.command))),
        }
    }

    fn params(&self, data: &Matrix, extra: Option<&Matrix>) -> Result<MechParams> {
        let l = match self.l {
            Some(l) => l,
            None => data
                .row_norms()
                .into_iter()
                .chain(extra.map(|u| u.row_norms()).unwrap_or_default())
                .fold(0.0, f64::max),
        };
        let p = MechParams {
            eps: self.single_eps()?,
            delta: self.delta.unwrap_or(1.0 / data.rows() as f64),
            r: self.r,
            l,
        };
        p.validate().map_err(|e| usage(e.to_string()))?;
        Ok(p)
    }
}

/// Runs a parsed command line and renders its output.
pub fn run(cli: &Cli) -> Result<(String, Option<PathBuf>)> {
    let (text, cfg) = match &cli.command {
        Command::IsCurve(a) => {
            let cfg = ExperimentConfig::new("is-curve", &a.common)?;
            (is_curve(&cfg, a)?, cfg)
        }
        Command::Mechanism(a) => {
            let cfg = ExperimentConfig::new("mechanism", &a.common)?;
            (mechanism(&cfg, a)?, cfg)
        }
        Command::Metrics(a) => {
            let cfg = ExperimentConfig::new("metrics", &a.common)?;
            (metrics(&cfg, a)?, cfg)
        }
        Command::Gl(a) => {
            let cfg = ExperimentConfig::new("gl", &a.common)?;
            (gl(&cfg, a)?, cfg)
        }
    };
    Ok((text, cfg.out))
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

/// Gaussian pair as read from `--pair`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairFile {
    pub mu1: Vec<f64>,
    pub sigma1: Vec<Vec<f64>>,
    pub mu2: Vec<f64>,
    pub sigma2: Vec<Vec<f64>>,
}

fn read_pair(path: &Path) -> Result<(MvGaussian, MvGaussian)> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let p: PairFile = serde_json::from_str(&text)?;
    let g = |mu: Vec<f64>, s: &[Vec<f64>]| -> Result<MvGaussian> {
        let cov = Matrix::from_rows(s).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        Ok(MvGaussian::new(mu, cov)?)
    };
    Ok((g(p.mu1, &p.sigma1)?, g(p.mu2, &p.sigma2)?))
}

fn is_curve(cfg: &ExperimentConfig, a: &IsCurveArgs) -> Result<String> {
    let registry = spectra();
    let kind = registry
        .get(&a.kind)
        .ok_or_else(|| usage(format!("unknown spectrum kind {:?}; known: {}", a.kind, registry.names().join(", "))))?;
    let data = match &cfg.input {
        Some(p) => Some(load_csv(p)?),
        None => None,
    };
    let pair = match &a.pair {
        Some(p) => Some(read_pair(p)?),
        None => None,
    };
    let method: Method = a.method.into();
    let seed = if method == Method::Mc || (method == Method::Auto && !kind.has_closed_form()) {
        cfg.require_seed()?
    } else {
        cfg.seed.unwrap_or(0)
    };
    let input = SpectrumInput {
        data: data.as_ref(),
        pair: pair.as_ref().map(|(x, y)| (x, y)),
        t: a.t,
        r: cfg.r,
        alpha: cfg.alpha,
        gamma: cfg.gamma,
        method,
    };
    let curve: Curve = compute(kind, &input, &cfg.eps_grid, seed)?;
    match cfg.format {
        Format::Json => to_json(&curve),
        Format::Csv => {
            let rows: Vec<Vec<String>> = curve
                .points
                .iter()
                .map(|p| vec![fmt_f64(p.eps), fmt_f64(p.delta)])
                .collect();
            Ok(csv_rows(Some(&["eps", "delta"]), &rows))
        }
    }
}

#[derive(Debug, Serialize)]
pub struct MechanismReport {
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    #[serde(flatten)]
    pub release: Release,
}

fn load_optional(path: Option<&Path>) -> Result<Option<Matrix>> {
    path.map(load_csv).transpose()
}

fn mechanism(cfg: &ExperimentConfig, a: &MechanismArgs) -> Result<String> {
    let registry = mechanisms();
    let mech = registry
        .get(&a.mechanism)
        .ok_or_else(|| usage(format!("unknown mechanism {:?}; known: {}", a.mechanism, registry.names().join(", "))))?;
    let seed = cfg.require_seed()?;
    let data = load_csv(cfg.input_path()?)?;
    let universe = load_optional(a.universe.as_deref())?;
    let params = cfg.params(&data, universe.as_ref())?;
    let input = MechInput {
        data: &data,
        universe: universe.as_ref(),
        params,
    };
    let release = mech.run(&input, &SeedStream::new(seed))?;
    let report = MechanismReport {
        seed,
        n: data.rows(),
        d: data.cols() - usize::from(mech.regression()),
        release,
    };
    match cfg.format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let rows: Vec<Vec<String>> = report
                .release
                .output
                .iter()
                .map(|r| r.iter().map(|v| fmt_f64(*v)).collect())
                .collect();
            Ok(csv_rows::<&str>(None, &rows))
        }
    }
}

#[derive(Debug, Serialize)]
pub struct MetricsReport {
    pub mechanism: String,
    /// `projection` or `regression`.
    pub mode: String,
    pub seed: Option<u64>,
    pub r: u32,
    pub scaled: bool,
    pub trials: usize,
    pub pdr: Option<Summary>,
    pub dpr: Option<Summary>,
    pub error: Option<Summary>,
}

const UNNOISED: &str = "unnoised";

enum Trial {
    Projection { pdr: f64, dpr: Option<f64> },
    Regression(f64),
}

fn score_projection(data: &Matrix, projected: &Matrix) -> Result<Trial> {
    let dpr = match dpr(data, projected) {
        Ok(v) => Some(v),
        Err(ndis_core::Error::DegeneratePairs) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(Trial::Projection {
        pdr: pdr(data, projected)?,
        dpr,
    })
}

fn metrics(cfg: &ExperimentConfig, a: &MetricsArgs) -> Result<String> {
    let data = load_csv(cfg.input_path()?)?;
    let registry = mechanisms();
    let regression = match a.mechanism.as_str() {
        UNNOISED => false,
        name => registry
            .get(name)
            .ok_or_else(|| usage(format!("unknown mechanism {name:?}; known: {UNNOISED}, {}", registry.names().join(", "))))?
            .regression(),
    };
    let x_opt = if regression || a.solution.is_some() {
        Some(residuals(&RegressionData::from_data(&data)?)?.x_opt)
    } else {
        None
    };

    let (trials, seed, mode_regression, scaled): (Vec<Trial>, Option<u64>, bool, bool) =
        if let Some(p) = &a.projected {
            (vec![score_projection(&data, &load_csv(p)?)?], cfg.seed, false, false)
        } else if let Some(p) = &a.solution {
            let x = load_csv(p)?;
            let x: Vec<f64> = x.as_slice().to_vec();
            let err = relative_error(&x, x_opt.as_ref().expect("computed above"))?;
            (vec![Trial::Regression(err)], cfg.seed, true, false)
        } else {
            if a.trials == 0 {
                return Err(usage("--trials must be >= 1"));
            }
            let seed = cfg.require_seed()?;
            let root = SeedStream::new(seed);
            let universe = load_optional(a.universe.as_deref())?;
            let params = cfg.params(&data, universe.as_ref())?;
            let scale = !a.no_scale;
            let run_one = |t: usize| -> Result<Trial> {
                let stream = root.derive_index(t as u64);
                if a.mechanism == UNNOISED {
                    let mut g = rp_sample(&data, params.r as usize, &stream);
                    if scale {
                        g = g.scaled(1.0 / f64::from(params.r).sqrt());
                    }
                    return score_projection(&data, &g);
                }
                let input = MechInput {
                    data: &data,
                    universe: universe.as_ref(),
                    params,
                };
                let rel = registry.get(&a.mechanism).expect("checked above").run(&input, &stream)?;
                let out = Matrix::from_rows(&rel.output)?;
                if regression {
                    let x = out.as_slice().to_vec();
                    Ok(Trial::Regression(relative_error(&x, x_opt.as_ref().expect("computed above"))?))
                } else {
                    let out = if scale {
                        out.scaled(1.0 / f64::from(rel.params.r).sqrt())
                    } else {
                        out
                    };
                    score_projection(&data, &out)
                }
            };
            let results: Vec<Result<Trial>> = (0..a.trials).into_par_iter().map(run_one).collect();
            let trials = results.into_iter().collect::<Result<Vec<_>>>()?;
            (trials, Some(seed), regression, scale && !regression)
        };

    let mut pdrs = Vec::new();
    let mut dprs = Vec::new();
    let mut errs = Vec::new();
    for t in &trials {
        match t {
            Trial::Projection { pdr, dpr } => {
                pdrs.push(*pdr);
                dprs.extend(dpr);
            }
            Trial::Regression(e) => errs.push(*e),
        }
    }
    let report = MetricsReport {
        mechanism: a.mechanism.clone(),
        mode: if mode_regression { "regression" } else { "projection" }.into(),
        seed,
        r: cfg.r,
        scaled,
        trials: trials.len(),
        pdr: Summary::of(&pdrs),
        dpr: Summary::of(&dprs),
        error: Summary::of(&errs),
    };
    match cfg.format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let mut header = vec!["trials".to_string()];
            let mut row = vec![report.trials.to_string()];
            for (name, s) in [("pdr", report.pdr), ("dpr", report.dpr), ("error", report.error)] {
                if let Some(s) = s {
                    header.push(format!("{name}_mean"));
                    header.push(format!("{name}_half_width"));
                    row.push(fmt_f64(s.mean));
                    row.push(fmt_f64(s.half_width));
                }
            }
            Ok(csv_rows(Some(&header), &[row]))
        }
    }
}

#[derive(Debug, Serialize)]
pub struct GlReport {
    pub solver: String,
    pub k: usize,
    pub m: usize,
    pub d: usize,
    pub seed: Option<u64>,
    pub value: f64,
    pub record: usize,
    pub subset: Vec<usize>,
}

fn gl(cfg: &ExperimentConfig, a: &GlArgs) -> Result<String> {
    let universe = Universe::new(load_csv(cfg.input_path()?)?)?;
    let bcd = Bcd { max_iters: a.max_iters };
    let registry = gl_solvers();
    let solver: &dyn GlSolver = match a.solver.as_str() {
        "bcd" => &bcd,
        name => registry
            .get(name)
            .ok_or_else(|| usage(format!("unknown solver {name:?}; known: {}", registry.names().join(", "))))?,
    };
    let seed = if solver.name() == "bcd" {
        Some(cfg.require_seed()?)
    } else {
        cfg.seed
    };
    let res = solver.solve(&universe, a.k, &SeedStream::new(seed.unwrap_or(0)))?;
    let report = GlReport {
        solver: solver.name().to_string(),
        k: a.k,
        m: universe.m(),
        d: universe.d(),
        seed,
        value: res.value,
        record: res.record,
        subset: res.subset,
    };
    match cfg.format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let mut header = vec!["value".to_string(), "record".to_string()];
            header.extend((0..report.subset.len()).map(|i| format!("subset_{i}")));
            let mut row = vec![fmt_f64(report.value), report.record.to_string()];
            row.extend(report.subset.iter().map(|i| i.to_string()));
            Ok(csv_rows(Some(&header), &[row]))
        }
    }
}
