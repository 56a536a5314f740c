//! Approximate least squares (sketch-and-solve), its asymptotic Gaussian, the
//! resulting spectrum `delta_als(q, p)` and the least-squares mechanisms.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{gram_factor, residuals, Cholesky, Matrix, MvGaussian, RegressionData};
use crate::numerics::rng::fill_std_normal;
use crate::numerics::{norm_cdf, GaussianQuadratic, QuadTerm, SeedStream};
use crate::rp::{check_row_norms, Branch, DomainSet};

/// Weights with magnitude below this are treated as exactly zero.
pub const ZERO_WEIGHT: f64 = 1e-14;
/// Tolerance of the monotonicity probe used during calibration.
pub const MONOTONICITY_TOL: f64 = 1e-6;
const SKETCH_ATTEMPTS: usize = 3;

/// Least-squares solution of the Gaussian sketch `(G B) x ~ G b` with `G` of
/// shape `r x n`.
pub fn als(data: &RegressionData, r: usize, seed: &SeedStream) -> Result<Vec<f64>> {
    let (n, d) = (data.n(), data.d());
    if r < d {
        return Err(Error::InvalidParameter(format!("sketch size r = {r} is below d = {d}")));
    }
    let stream = seed.derive("als");
    let b = data.features();
    let y = data.response();
    for attempt in 0..SKETCH_ATTEMPTS {
        let mut rng = stream.derive_index(attempt as u64).rng();
        let mut g = vec![0.0; n];
        let mut gram = Matrix::zeros(d, d);
        let mut rhs = vec![0.0; d];
        let mut row = vec![0.0; d];
        for _ in 0..r {
            fill_std_normal(&mut rng, &mut g);
            row.iter_mut().for_each(|v| *v = 0.0);
            let mut gy = 0.0;
            for (i, &gi) in g.iter().enumerate() {
                for (rj, bj) in row.iter_mut().zip(b.row(i)) {
                    *rj += gi * bj;
                }
                gy += gi * y[i];
            }
            for j in 0..d {
                rhs[j] += row[j] * gy;
                for k in 0..d {
                    gram[(j, k)] += row[j] * row[k];
                }
            }
        }
        match Cholesky::new(&gram) {
            Ok(ch) => return Ok(ch.solve(&rhs)),
            Err(_) => log::warn!("sketched system rank deficient on attempt {}", attempt + 1),
        }
    }
    Err(Error::SketchRankDeficient(SKETCH_ATTEMPTS))
}

/// Limiting law `N(x_opt, |e|^2 (B^T B)^{-1} / r)` of [`als`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlsAsymptotic {
    pub mean: Vec<f64>,
    pub cov: Matrix,
    pub r: usize,
}

impl AlsAsymptotic {
    pub fn to_gaussian(&self) -> Result<MvGaussian> {
        MvGaussian::new(self.mean.clone(), self.cov.clone())
    }

    /// One draw from the limiting law.
    pub fn sample(&self, seed: &SeedStream) -> Result<Vec<f64>> {
        let chol = Cholesky::new(&self.cov)?;
        let mut rng = seed.rng();
        let d = self.mean.len();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let l = chol.factor();
        Ok((0..d)
            .map(|i| self.mean[i] + (0..=i).map(|k| l[(i, k)] * z[k]).sum::<f64>())
            .collect())
    }
}

pub fn als_asymptotic(data: &RegressionData, r: usize) -> Result<AlsAsymptotic> {
    if r == 0 {
        return Err(Error::InvalidParameter("sketch size r must be >= 1".into()));
    }
    let res = residuals(data)?;
    let e2 = res.norm_sq();
    let scale = data.response().iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    if e2 <= 1e-28 * scale {
        return Err(Error::Degenerate("zero residual: the limiting covariance vanishes".into()));
    }
    let inv = gram_factor(data.features())?.inverse();
    Ok(AlsAsymptotic {
        mean: res.x_opt,
        cov: inv.scaled(e2 / r as f64),
        r,
    })
}

/// `E[max{0, 1 - exp(Z^T diag(a) Z / 2 + b^T Z + c)}]` for standard normal `Z`.
///
/// Writes the expectation as `P(Q <= -c) - M P~(Q~ <= -c)` with `Q` the
/// quadratic form and `Q~` its exponentially tilted counterpart, and evaluates
/// both probabilities with the quadratic-form CDF. Near-zero weights become
/// pure normal terms.
pub fn quad_gauss_expectation(a: &[f64], b: &[f64], c: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if let Some(&bad) = a.iter().find(|&&ai| !(ai < 1.0)) {
        return Err(Error::InvalidWeights(bad));
    }
    if !c.is_finite() || b.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite quadratic form".into()));
    }
    let mut terms = Vec::with_capacity(a.len());
    let mut tilted = Vec::with_capacity(a.len());
    let mut tilted_offset = 0.0;
    let mut log_m = 0.0;
    let mut all_zero = true;
    for (&ai, &bi) in a.iter().zip(b) {
        let ai = if ai.abs() < ZERO_WEIGHT { 0.0 } else { ai };
        all_zero &= ai == 0.0;
        let s = 1.0 - ai;
        let mu = bi / s;
        log_m += -0.5 * s.ln() + 0.5 * bi * mu;
        terms.push(QuadTerm {
            weight: 0.5 * ai,
            dof: 1,
            linear: bi,
        });
        tilted.push(QuadTerm {
            weight: 0.5 * ai / s,
            dof: 1,
            linear: bi / s.powf(1.5),
        });
        tilted_offset += 0.5 * ai * mu * mu + bi * mu;
    }
    if all_zero {
        let beta = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        return Ok(linear_expectation(beta, c));
    }
    let p = GaussianQuadratic::new(terms, 0.0).cdf(-c)?;
    let log_scale = c + log_m;
    let p_tilted = GaussianQuadratic::new(tilted, tilted_offset).cdf(-c)?;
    let second = if p_tilted == 0.0 { 0.0 } else { (log_scale + p_tilted.ln()).exp() };
    Ok((p - second).clamp(0.0, 1.0))
}

// E[max{0, 1 - exp(beta Z + c)}] in closed form.
fn linear_expectation(beta: f64, c: f64) -> f64 {
    if beta == 0.0 {
        return if c >= 0.0 { 0.0 } else { -c.exp_m1() };
    }
    let u = -c / beta;
    let tail = norm_cdf(u - beta);
    let second = if tail == 0.0 { 0.0 } else { (c + 0.5 * beta * beta + tail.ln()).exp() };
    (norm_cdf(u) - second).clamp(0.0, 1.0)
}

/// Diagonal quadratic form of one direction of the ALS spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct AlsDirection {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: f64,
}

impl AlsDirection {
    pub fn delta(&self) -> Result<f64> {
        quad_gauss_expectation(&self.a, &self.b, self.c)
    }
}

fn check_leverage(q: f64, p: f64) -> Result<()> {
    if !(p >= 0.0 && p <= q && q < 1.0) || !q.is_finite() {
        return Err(Error::InvalidLeverage { q, p });
    }
    Ok(())
}

/// Quadratic forms `(removal, addition)` for a record with full leverage `q`
/// (of `[B, b]`) and feature leverage `p` (of `B`).
///
/// The first compares the limiting law of the smaller database against the
/// larger one, the second the reverse.
pub fn als_directions(q: f64, p: f64, r: usize, d: usize, eps: f64) -> Result<(AlsDirection, AlsDirection)> {
    check_leverage(q, p)?;
    if d == 0 || r == 0 {
        return Err(Error::InvalidParameter("r and d must be >= 1".into()));
    }
    let r = r as f64;
    let df = d as f64;
    let lp = (-p).ln_1p();
    let lq = (-q).ln_1p();
    let om_p = 1.0 - p;
    let om_q = 1.0 - q;
    let gap = q - p;
    let rest = d - 1;

    // removal: eigenvalues 1 - (1-q)/(1-p)^2 (mean direction) and (q-p)/(1-p)
    let a1 = -(lq - 2.0 * lp).exp_m1();
    let a2 = gap / om_p;
    let b1 = (r * p * om_q * gap).sqrt() / (om_p * om_p);
    let shift = r * p * gap / (om_p * om_p);
    let c = eps + 0.5 * df * lq - 0.5 * (df + 1.0) * lp - 0.5 * shift;
    let forward = AlsDirection {
        a: std::iter::once(a1).chain(std::iter::repeat_n(a2, rest)).collect(),
        b: std::iter::once(b1).chain(std::iter::repeat_n(0.0, rest)).collect(),
        c,
    };

    // addition: eigenvalues 1 - (1-p)^2/(1-q) and 1 - (1-p)/(1-q)
    let a1 = -(2.0 * lp - lq).exp_m1();
    let a2 = -gap / om_q;
    let b1 = (r * p * gap).sqrt() * om_p / om_q;
    let shift = r * p * gap / om_q;
    let c = eps - 0.5 * df * lq + 0.5 * (df + 1.0) * lp - 0.5 * shift;
    let reverse = AlsDirection {
        a: std::iter::once(a1).chain(std::iter::repeat_n(a2, rest)).collect(),
        b: std::iter::once(b1).chain(std::iter::repeat_n(0.0, rest)).collect(),
        c,
    };
    Ok((forward, reverse))
}

/// `delta_als^eps(q, p)`: the larger of the two directional spectra of the
/// limiting ALS laws of a neighbouring pair.
pub fn delta_als(q: f64, p: f64, r: usize, d: usize, eps: f64) -> Result<f64> {
    check_leverage(q, p)?;
    if q == 0.0 {
        return Ok(0.0);
    }
    let (fwd, rev) = als_directions(q, p, r, d, eps)?;
    Ok(fwd.delta()?.max(rev.delta()?).clamp(0.0, 1.0))
}

/// Largest feature leverage and largest residual share of a removed record
/// over all neighbouring pairs of a set of `[B, b]` databases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SetLevRes {
    pub leverage: f64,
    pub residual: f64,
}

pub fn set_leverage_residual(x: &DomainSet) -> Result<SetLevRes> {
    let mut out = SetLevRes {
        leverage: 0.0,
        residual: 0.0,
    };
    let mut cache: Vec<Option<(RegressionData, Cholesky, Vec<f64>)>> = vec![None; x.len()];
    for pair in x.neighbor_pairs() {
        if cache[pair.larger].is_none() {
            let data = RegressionData::from_data(x.member(pair.larger))?;
            let chol = gram_factor(data.features())?;
            let per_row = residuals(&data)?.per_row;
            cache[pair.larger] = Some((data, chol, per_row));
        }
        let (data, chol, per_row) = cache[pair.larger].as_ref().unwrap();
        let lev = chol.quad_inverse(data.features().row(pair.row));
        out.leverage = out.leverage.max(lev);
        out.residual = out.residual.max(per_row[pair.row]);
    }
    Ok(out)
}

/// Largest residual share `e_i^2 / |e|^2` of a removed record over the
/// neighbouring pairs of `x`.
pub fn residual_for_set(x: &DomainSet) -> Result<f64> {
    Ok(set_leverage_residual(x)?.residual)
}

/// Probe points recorded along a calibration search.
fn check_probe(mut probe: Vec<(f64, f64)>) -> Result<()> {
    probe.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in probe.windows(2) {
        if w[0].1 > w[1].1 + MONOTONICITY_TOL {
            return Err(Error::MonotonicityViolation {
                lo: w[0].0,
                hi: w[1].0,
                delta_lo: w[0].1,
                delta_hi: w[1].1,
            });
        }
    }
    Ok(())
}

/// Largest `p` in `(0, 1/2)` with `delta_als(2p, p) <= delta`.
pub fn calibrate_ls_leverage(r: usize, d: usize, eps: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be >= 0, got {eps}")));
    }
    let f = |p: f64| delta_als(2.0 * p, p, r, d, eps);
    let (mut lo, mut hi) = (1e-12, 0.5 - 1e-9);
    let (f_lo, f_hi) = (f(lo)?, f(hi)?);
    if !(f_lo <= delta && delta <= f_hi) {
        return Err(Error::BracketError {
            target: delta,
            f_lo,
            f_hi,
        });
    }
    let mut probe = vec![(lo, f_lo), (hi, f_hi)];
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-13 * hi {
            break;
        }
        let v = f(mid)?;
        probe.push((mid, v));
        if v <= delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    check_probe(probe)?;
    Ok(lo)
}

/// Smallest regularizer `sigma` with `delta_als(2 l^2 / sigma^2, l^2 / sigma^2) <= delta`.
pub fn calibrate_ls_sigma(l: f64, r: usize, d: usize, eps: f64, delta: f64) -> Result<f64> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::InvalidParameter(format!("row-norm bound l must be > 0, got {l}")));
    }
    Ok(l / calibrate_ls_leverage(r, d, eps, delta)?.sqrt())
}

/// Output of a least-squares mechanism.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LsRelease {
    pub x: Vec<f64>,
    /// Regularizer, absent when the unregularized branch fired.
    pub sigma: Option<f64>,
    pub branch: Branch,
    pub set_leverage: Option<f64>,
    pub set_residual: Option<f64>,
}

fn regularized(data: &RegressionData, r: usize, eps: f64, delta: f64, l: f64) -> Result<(f64, RegressionData)> {
    check_row_norms(&data.data(), l)?;
    let sigma = calibrate_ls_sigma(l, r, data.d(), eps, delta)?;
    Ok((sigma, data.regularized(sigma)?))
}

/// One draw from the limiting ALS law of the regularized system.
pub fn mech_ls(data: &RegressionData, r: usize, eps: f64, delta: f64, l: f64, seed: &SeedStream) -> Result<LsRelease> {
    let (sigma, reg) = regularized(data, r, eps, delta, l)?;
    let x = als_asymptotic(&reg, r)?.sample(&seed.derive("mech-ls"))?;
    Ok(LsRelease {
        x,
        sigma: Some(sigma),
        branch: Branch::Noised,
        set_leverage: None,
        set_residual: None,
    })
}

/// Sketch-and-solve on the regularized system.
pub fn mech_als(data: &RegressionData, r: usize, eps: f64, delta: f64, l: f64, seed: &SeedStream) -> Result<LsRelease> {
    let (sigma, reg) = regularized(data, r, eps, delta, l)?;
    let x = als(&reg, r, &seed.derive("mech-als"))?;
    Ok(LsRelease {
        x,
        sigma: Some(sigma),
        branch: Branch::Noised,
        set_leverage: None,
        set_residual: None,
    })
}

/// Whether the set-level leverage and residual already give the target spectrum.
pub fn ls_inherent_privacy(lev: f64, res: f64, r: usize, d: usize, eps: f64, delta: f64) -> Result<bool> {
    let q = lev + res;
    if q >= 1.0 {
        return Ok(false);
    }
    Ok(delta_als(q, lev, r, d, eps)? <= delta)
}

/// Relative variant: skips regularization when the records of `x` are
/// already protected by the sketch.
pub fn mech_ls_rel(
    data: &RegressionData,
    x: &DomainSet,
    r: usize,
    eps: f64,
    delta: f64,
    l: f64,
    seed: &SeedStream,
) -> Result<LsRelease> {
    if !x.contains(&data.data()) {
        return Err(Error::NotInDomain);
    }
    let set = set_leverage_residual(x)?;
    let mut out = if ls_inherent_privacy(set.leverage, set.residual, r, data.d(), eps, delta)? {
        LsRelease {
            x: als_asymptotic(data, r)?.sample(&seed.derive("mech-ls"))?,
            sigma: None,
            branch: Branch::Unnoised,
            set_leverage: None,
            set_residual: None,
        }
    } else {
        mech_ls(data, r, eps, delta, l, seed)?
    };
    out.set_leverage = Some(set.leverage);
    out.set_residual = Some(set.residual);
    Ok(out)
}
