//! Indistinguishability spectrum of an ordered pair of multivariate Gaussians.
//!
//! For `N1 = N(mu1, S1)` and `N2 = N(mu2, S2)` the spectrum is
//! `delta(eps) = E[max{0, 1 - exp(Z^T A Z / 2 + b^T Z + c)}]` over a standard
//! normal `Z`, where `A`, `b` and `c` come from an eigendecomposition of
//! `I - S1^{1/2} S2^{-1} S1^{1/2}`. [`estimate_is`] averages that integrand over
//! seeded samples; [`NdisPair::delta_exact`] evaluates it through the
//! quadratic-form CDF.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, sqrt_spd, sym_evd, Cholesky, MvGaussian};
use crate::numerics::rng::fill_std_normal;
use crate::numerics::SeedStream;

/// Exponents above this make `g_eps` exactly 0.
pub const EXPONENT_GUARD: f64 = 700.0;
const BATCH: usize = 1 << 14;

/// Diagonal quadratic form `(a, b, c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadForm {
    a: Vec<f64>,
    b: Vec<f64>,
    c: f64,
}

impl QuadForm {
    pub fn new(a: Vec<f64>, b: Vec<f64>, c: f64) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimMismatch {
                expected: a.len(),
                actual: b.len(),
            });
        }
        if a.iter().chain(&b).any(|x| !x.is_finite()) || !c.is_finite() {
            return Err(Error::InvalidParameter("quadratic form entries must be finite".into()));
        }
        Ok(Self { a, b, c })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `z^T A z / 2 + b^T z + c`.
    pub fn exponent(&self, z: &[f64]) -> f64 {
        let mut s = self.c;
        for ((a, b), z) in self.a.iter().zip(&self.b).zip(z) {
            s += z * (0.5 * a * z + b);
        }
        s
    }
}

/// One `(eps, delta)` point of a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ISPoint {
    pub eps: f64,
    pub delta: f64,
}

impl ISPoint {
    pub fn new(eps: f64, delta: f64) -> Result<Self> {
        if !(eps >= 0.0) || !(0.0..=1.0).contains(&delta) {
            return Err(Error::InvalidParameter(format!("invalid spectrum point ({eps}, {delta})")));
        }
        Ok(Self { eps, delta })
    }
}

/// `max{0, 1 - exp(exponent)}` with the overflow guard.
pub fn g_from_exponent(x: f64) -> f64 {
    if x >= 0.0 || x.is_nan() {
        0.0
    } else {
        (-x.exp_m1()).min(1.0)
    }
}

/// The integrand `g_eps(z)`; always in `[0, 1]`.
pub fn g_eps(q: &QuadForm, z: &[f64]) -> f64 {
    assert_eq!(z.len(), q.dim(), "g_eps dimension");
    let x = q.exponent(z);
    if x > EXPONENT_GUARD {
        return 0.0;
    }
    g_from_exponent(x)
}

/// The eps-independent part of the quadratic form of a Gaussian pair.
#[derive(Debug, Clone, PartialEq)]
pub struct NdisPair {
    a: Vec<f64>,
    b: Vec<f64>,
    c0: f64,
}

impl NdisPair {
    pub fn new(n1: &MvGaussian, n2: &MvGaussian) -> Result<Self> {
        if n1.dim() != n2.dim() {
            return Err(Error::DimMismatch {
                expected: n1.dim(),
                actual: n2.dim(),
            });
        }
        let d = n1.dim();
        let s1_half = sqrt_spd(n1.cov())?;
        let chol2 = Cholesky::new(n2.cov())?;
        let s2_inv = chol2.inverse();
        let m = s1_half.matmul(&s2_inv)?.matmul(&s1_half)?;
        let mut inner = crate::linalg::Matrix::identity(d).sub(&m)?;
        // symmetrize away rounding from the triple product
        for i in 0..d {
            for j in 0..i {
                let v = 0.5 * (inner[(i, j)] + inner[(j, i)]);
                inner[(i, j)] = v;
                inner[(j, i)] = v;
            }
        }
        let evd = sym_evd(&inner)?;
        let dmu: Vec<f64> = n1.mean().iter().zip(n2.mean()).map(|(x, y)| x - y).collect();
        let s2_inv_dmu = chol2.solve(&dmu);
        let w = s1_half.matvec(&s2_inv_dmu);
        let b = evd.vectors.t_matvec(&w).into_iter().map(|x| -x).collect();
        let logdet1 = Cholesky::new(n1.cov())?.logdet();
        let logdet2 = chol2.logdet();
        let c0 = 0.5 * (logdet1 - logdet2) - 0.5 * dot(&dmu, &s2_inv_dmu);
        Ok(Self {
            a: evd.values,
            b,
            c0,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// The quadratic form at privacy level `eps`.
    pub fn quad_form(&self, eps: f64) -> QuadForm {
        QuadForm {
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c0 + eps,
        }
    }

    /// Spectrum value through the quadratic-form CDF instead of sampling.
    pub fn delta_exact(&self, eps: f64) -> Result<f64> {
        crate::ols::quad_gauss_expectation(&self.a, &self.b, self.c0 + eps)
    }

    /// Monte Carlo spectrum at every `eps` in `grid`, sharing one set of samples.
    pub fn estimate(&self, grid: &[f64], samples: usize, seed: &SeedStream) -> Vec<f64> {
        let d = self.dim();
        let stream = seed.derive("ndis");
        let batches = samples.div_ceil(BATCH);
        let partial: Vec<Vec<f64>> = (0..batches)
            .into_par_iter()
            .map(|bi| {
                let count = BATCH.min(samples - bi * BATCH);
                let mut rng = stream.derive_index(bi as u64).rng();
                let mut z = vec![0.0; d];
                let mut sums = vec![0.0; grid.len()];
                for _ in 0..count {
                    fill_std_normal(&mut rng, &mut z);
                    let mut x = self.c0;
                    for ((a, b), z) in self.a.iter().zip(&self.b).zip(&z) {
                        x += z * (0.5 * a * z + b);
                    }
                    for (s, eps) in sums.iter_mut().zip(grid) {
                        let e = x + eps;
                        if e <= EXPONENT_GUARD {
                            *s += g_from_exponent(e);
                        }
                    }
                }
                sums
            })
            .collect();
        let mut totals = vec![0.0; grid.len()];
        for sums in &partial {
            for (t, s) in totals.iter_mut().zip(sums) {
                *t += s;
            }
        }
        let m = samples.max(1) as f64;
        totals.into_iter().map(|t| (t / m).clamp(0.0, 1.0)).collect()
    }
}

/// `(a, b, c)` of the pair at `eps`.
pub fn ndis_abc(n1: &MvGaussian, n2: &MvGaussian, eps: f64) -> Result<QuadForm> {
    Ok(NdisPair::new(n1, n2)?.quad_form(eps))
}

/// Sample count `ceil(ln(2/gamma) / (2 alpha^2))` for an `alpha`-accurate
/// estimate with probability at least `1 - gamma`.
pub fn sample_count(alpha: f64, gamma: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    Ok(((2.0 / gamma).ln() / (2.0 * alpha * alpha)).ceil() as usize)
}

/// Monte Carlo estimate of `delta_{N1,N2}(eps)`.
pub fn estimate_is(
    n1: &MvGaussian,
    n2: &MvGaussian,
    eps: f64,
    alpha: f64,
    gamma: f64,
    seed: &SeedStream,
) -> Result<f64> {
    let m = sample_count(alpha, gamma)?;
    Ok(NdisPair::new(n1, n2)?.estimate(&[eps], m, seed)[0])
}

/// Monte Carlo spectrum over an ascending `eps` grid.
pub fn is_curve(
    n1: &MvGaussian,
    n2: &MvGaussian,
    grid: &[f64],
    alpha: f64,
    gamma: f64,
    seed: &SeedStream,
) -> Result<Vec<ISPoint>> {
    check_grid(grid)?;
    let m = sample_count(alpha, gamma)?;
    if grid.is_empty() {
        return Ok(Vec::new());
    }
    let pair = NdisPair::new(n1, n2)?;
    let deltas = pair.estimate(grid, m, seed);
    Ok(grid
        .iter()
        .zip(deltas)
        .map(|(&eps, delta)| ISPoint { eps, delta })
        .collect())
}

/// Rejects grids that are unsorted or contain negative or non-finite values.
pub fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::InvalidParameter("eps values must be finite and nonnegative".into()));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("eps grid must be sorted ascending".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn gauss(mean: &[f64], diag: &[f64]) -> MvGaussian {
        MvGaussian::new(mean.to_vec(), Matrix::from_diag(diag)).unwrap()
    }

    #[test]
    fn abc_examples() {
        let q = ndis_abc(&gauss(&[0.0, 0.0], &[1.0, 1.0]), &gauss(&[0.0, 0.0], &[1.0, 1.0]), 0.7).unwrap();
        assert_eq!(q.a(), &[0.0, 0.0]);
        assert_eq!(q.b(), &[0.0, 0.0]);
        assert_eq!(q.c(), 0.7);

        let q = ndis_abc(&gauss(&[1.0, -2.0], &[1.0, 1.0]), &gauss(&[0.0, 0.0], &[1.0, 1.0]), 1.0).unwrap();
        assert!(q.a().iter().all(|a| a.abs() < 1e-15));
        // b = -U^T v with U = I here
        assert!((q.b()[0] + 1.0).abs() < 1e-15 && (q.b()[1] - 2.0).abs() < 1e-15);
        assert!((q.c() - (1.0 - 2.5)).abs() < 1e-14);

        let q = ndis_abc(&gauss(&[0.0], &[1.0]), &gauss(&[0.0], &[4.0]), 0.3).unwrap();
        assert!((q.a()[0] - 0.75).abs() < 1e-15);
        assert_eq!(q.b()[0], 0.0);
        assert!((q.c() - (0.3 - 2f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn g_examples() {
        let zero = QuadForm::new(vec![0.0], vec![0.0], 0.0).unwrap();
        assert_eq!(g_eps(&zero, &[1.3]), 0.0);
        let vanishing = QuadForm::new(vec![0.0], vec![0.0], -1000.0).unwrap();
        assert_eq!(g_eps(&vanishing, &[0.4]), 1.0);
        let q = QuadForm::new(vec![0.75], vec![0.0], -(2f64.ln())).unwrap();
        assert!((g_eps(&q, &[0.0]) - 0.5).abs() < 1e-15);
        let huge = QuadForm::new(vec![0.0], vec![1.0], 0.0).unwrap();
        assert_eq!(g_eps(&huge, &[1e300]), 0.0);
    }

    #[test]
    fn identical_pair_has_zero_spectrum() {
        let n = gauss(&[0.3, 1.0], &[2.0, 0.5]);
        let d = estimate_is(&n, &n, 0.0, 0.05, 0.05, &SeedStream::new(1)).unwrap();
        assert_eq!(d, 0.0);
        let c = is_curve(&n, &n, &[0.0], 0.05, 0.05, &SeedStream::new(1)).unwrap();
        assert_eq!(c, vec![ISPoint { eps: 0.0, delta: 0.0 }]);
        assert!(is_curve(&n, &n, &[], 0.05, 0.05, &SeedStream::new(1)).unwrap().is_empty());
    }

    #[test]
    fn sample_count_rounds_up() {
        assert_eq!(sample_count(0.1, 0.1).unwrap(), ((20f64).ln() / 0.02).ceil() as usize);
        assert!(sample_count(0.0, 0.1).is_err());
        assert!(sample_count(0.1, 1.0).is_err());
    }

    #[test]
    fn unsorted_grid_is_rejected() {
        let n = gauss(&[0.0], &[1.0]);
        assert!(is_curve(&n, &n, &[1.0, 0.5], 0.1, 0.1, &SeedStream::new(0)).is_err());
    }
}
