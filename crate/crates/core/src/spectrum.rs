//! Spectrum kinds behind a common trait, registered by name. Each kind turns
//! its input into an ordered Gaussian pair and evaluates the spectrum either
//! in closed form or by the Monte Carlo estimator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss_mech::gauss_delta;
use crate::linalg::{block_diagonal, leverage_scores, Matrix, MvGaussian, RegressionData};
use crate::ndis::{check_grid, is_curve, ISPoint, NdisPair};
use crate::numerics::SeedStream;
use crate::ols::{als_asymptotic, delta_als};
use crate::registry::Registry;
use crate::rp::{delta_rlc, delta_rp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Closed form when the kind has one.
    Auto,
    Analytic,
    Mc,
}

/// Inputs a spectrum kind may draw on.
pub struct SpectrumInput<'a> {
    /// Database (for `rp`, `rlc`) or `[B, b]` (for `als`).
    pub data: Option<&'a Matrix>,
    /// Explicit Gaussian pair (for `gaussian`).
    pub pair: Option<(&'a MvGaussian, &'a MvGaussian)>,
    /// Sensitivity-to-noise ratio (for `gauss-mech`).
    pub t: Option<f64>,
    pub r: u32,
    pub alpha: f64,
    pub gamma: f64,
    pub method: Method,
}

/// A computed spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub pair: String,
    pub points: Vec<ISPoint>,
    pub method: String,
    pub seed: u64,
    /// Removed row, for database-derived pairs.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub row: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub leverage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub feature_leverage: Option<f64>,
}

pub trait Spectrum: Send + Sync {
    fn name(&self) -> &'static str;
    fn has_closed_form(&self) -> bool {
        true
    }
    fn curve(&self, input: &SpectrumInput, grid: &[f64], seed: u64) -> Result<Curve>;
}

fn use_mc(kind: &dyn Spectrum, method: Method) -> Result<bool> {
    match method {
        Method::Mc => Ok(true),
        Method::Auto => Ok(!kind.has_closed_form()),
        Method::Analytic if kind.has_closed_form() => Ok(false),
        Method::Analytic => Err(Error::InvalidParameter(format!("{} has no closed form", kind.name()))),
    }
}

fn analytic_points(grid: &[f64], f: impl Fn(f64) -> Result<f64>) -> Result<Vec<ISPoint>> {
    grid.iter().map(|&eps| Ok(ISPoint { eps, delta: f(eps)? })).collect()
}

fn mc_points(n1: &MvGaussian, n2: &MvGaussian, grid: &[f64], input: &SpectrumInput, seed: u64) -> Result<Vec<ISPoint>> {
    is_curve(n1, n2, grid, input.alpha, input.gamma, &SeedStream::new(seed))
}

fn need_data<'a>(input: &SpectrumInput<'a>, kind: &str) -> Result<&'a Matrix> {
    input
        .data
        .ok_or_else(|| Error::InvalidParameter(format!("spectrum kind {kind} needs an input database")))
}

// First row of largest score.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

struct GaussianPair;
struct GaussMech;
struct Projection;
struct LinearCombination;
struct Als;

impl Spectrum for GaussianPair {
    fn name(&self) -> &'static str {
        "gaussian"
    }
    fn curve(&self, input: &SpectrumInput, grid: &[f64], seed: u64) -> Result<Curve> {
        let (n1, n2) = input
            .pair
            .ok_or_else(|| Error::InvalidParameter("spectrum kind gaussian needs a Gaussian pair".into()))?;
        let mc = use_mc(self, input.method)?;
        let points = if mc {
            mc_points(n1, n2, grid, input, seed)?
        } else {
            let pair = NdisPair::new(n1, n2)?;
            analytic_points(grid, |eps| pair.delta_exact(eps))?
        };
        Ok(curve("N1 vs N2", points, mc, seed))
    }
}

impl Spectrum for GaussMech {
    fn name(&self) -> &'static str {
        "gauss-mech"
    }
    fn curve(&self, input: &SpectrumInput, grid: &[f64], seed: u64) -> Result<Curve> {
        let t = input
            .t
            .ok_or_else(|| Error::InvalidParameter("spectrum kind gauss-mech needs t = s / sigma".into()))?;
        let mc = use_mc(self, input.method)?;
        let points = if mc {
            let n1 = MvGaussian::new(vec![0.0], Matrix::identity(1))?;
            let n2 = MvGaussian::new(vec![t], Matrix::identity(1))?;
            mc_points(&n1, &n2, grid, input, seed)?
        } else {
            analytic_points(grid, |eps| Ok(gauss_delta(t, eps)))?
        };
        Ok(curve(&format!("N(0,1) vs N({t},1)"), points, mc, seed))
    }
}

// Largest-leverage row of `d` with the block covariances of `D^T G` and `D'^T G`.
fn projection_pair(d: &Matrix, r: u32) -> Result<(usize, f64, MvGaussian, MvGaussian)> {
    let lev = leverage_scores(d)?;
    let row = argmax(&lev);
    let smaller = d.without_row(row);
    let dim = d.cols() * r as usize;
    let n1 = MvGaussian::new(vec![0.0; dim], block_diagonal(&d.gram(), r as usize))?;
    let n2 = MvGaussian::new(vec![0.0; dim], block_diagonal(&smaller.gram(), r as usize))?;
    Ok((row, lev[row], n1, n2))
}

fn projection_curve(
    kind: &dyn Spectrum,
    input: &SpectrumInput,
    grid: &[f64],
    seed: u64,
    r: u32,
    f: impl Fn(f64, f64) -> f64,
) -> Result<Curve> {
    let d = need_data(input, kind.name())?;
    let mc = use_mc(kind, input.method)?;
    let (row, p) = if mc {
        let (row, p, n1, n2) = projection_pair(d, r)?;
        let mut c = curve(&format!("D vs D without row {row}"), mc_points(&n1, &n2, grid, input, seed)?, true, seed);
        c.row = Some(row);
        c.leverage = Some(p);
        return Ok(c);
    } else {
        let lev = leverage_scores(d)?;
        let row = argmax(&lev);
        (row, lev[row])
    };
    let points = analytic_points(grid, |eps| Ok(f(p, eps)))?;
    let mut c = curve(&format!("D vs D without row {row}"), points, false, seed);
    c.row = Some(row);
    c.leverage = Some(p);
    Ok(c)
}

impl Spectrum for Projection {
    fn name(&self) -> &'static str {
        "rp"
    }
    fn curve(&self, input: &SpectrumInput, grid: &[f64], seed: u64) -> Result<Curve> {
        let r = input.r;
        projection_curve(self, input, grid, seed, r, |p, eps| delta_rp(p, r, eps))
    }
}

impl Spectrum for LinearCombination {
    fn name(&self) -> &'static str {
        "rlc"
    }
    fn curve(&self, input: &SpectrumInput, grid: &[f64], seed: u64) -> Result<Curve> {
        projection_curve(self, input, grid, seed, 1, delta_rlc)
    }
}

impl Spectrum for Als {
    fn name(&self) -> &'static str {
        "als"
    }
    fn curve(&self, input: &SpectrumInput, grid: &[f64], seed: u64) -> Result<Curve> {
        let data = need_data(input, self.name())?;
        let reg = RegressionData::from_data(data)?;
        let q_all = leverage_scores(data)?;
        let p_all = leverage_scores(reg.features())?;
        let row = argmax(&q_all);
        let (q, p) = (q_all[row], p_all[row]);
        let r = input.r as usize;
        let mc = use_mc(self, input.method)?;
        let points = if mc {
            let big = als_asymptotic(&reg, r)?.to_gaussian()?;
            let small = als_asymptotic(&reg.without_row(row)?, r)?.to_gaussian()?;
            let root = SeedStream::new(seed);
            let one = is_curve(&small, &big, grid, input.alpha, input.gamma, &root.derive("removal"))?;
            let two = is_curve(&big, &small, grid, input.alpha, input.gamma, &root.derive("addition"))?;
            one.iter()
                .zip(&two)
                .map(|(a, b)| ISPoint {
                    eps: a.eps,
                    delta: a.delta.max(b.delta),
                })
                .collect()
        } else {
            analytic_points(grid, |eps| delta_als(q, p, r, reg.d(), eps))?
        };
        let mut c = curve(&format!("ALS(D) vs ALS(D without row {row})"), points, mc, seed);
        c.row = Some(row);
        c.leverage = Some(q);
        c.feature_leverage = Some(p);
        Ok(c)
    }
}

fn curve(pair: &str, points: Vec<ISPoint>, mc: bool, seed: u64) -> Curve {
    Curve {
        pair: pair.to_string(),
        points,
        method: if mc { "mc" } else { "analytic" }.to_string(),
        seed,
        row: None,
        leverage: None,
        feature_leverage: None,
    }
}

/// Evaluates the named kind after validating the grid.
pub fn compute(kind: &dyn Spectrum, input: &SpectrumInput, grid: &[f64], seed: u64) -> Result<Curve> {
    check_grid(grid)?;
    if input.r == 0 {
        return Err(Error::InvalidParameter("r must be >= 1".into()));
    }
    kind.curve(input, grid, seed)
}

/// The built-in spectrum kinds: gaussian, gauss-mech, rp, rlc, als.
pub fn spectra() -> Registry<dyn Spectrum> {
    let mut reg: Registry<dyn Spectrum> = Registry::new();
    let all: Vec<Box<dyn Spectrum>> = vec![
        Box::new(GaussianPair),
        Box::new(GaussMech),
        Box::new(Projection),
        Box::new(LinearCombination),
        Box::new(Als),
    ];
    for s in all {
        reg.register(s.name(), s);
    }
    reg
}
