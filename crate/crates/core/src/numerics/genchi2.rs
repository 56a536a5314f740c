//! Generalized chi-squared distributions and, more generally, quadratic forms
//! of independent standard normals.
//!
//! Every distribution handled here is written as
//!
//! ```text
//! Q = sum_g ( weight_g * |Y_g|^2 + linear_g * Y_g1 ) + offset
//! ```
//!
//! with independent standard normal blocks `Y_g` of size `dof_g`. A weighted
//! noncentral chi-squared term `w * chi2'(k, lam)` is the block
//! `(w, k, 2 w sqrt(lam))` plus an offset of `w * lam`; a zero weight with a
//! nonzero linear coefficient is a plain normal term. Keeping the linear
//! coefficient explicit (rather than the noncentrality `linear^2 / 4 w^2`)
//! keeps everything finite as a weight goes to zero.
//!
//! The CDF is evaluated by Gil-Pelaez inversion of the characteristic function
//! with adaptive Gauss-Kronrod panels and Wynn extrapolation of the oscillatory
//! tail. Forms with a single non-central direction plus one central block are
//! instead integrated exactly over that direction. When neither route converges
//! a seeded Monte Carlo estimate is used.

use std::f64::consts::PI;

use rand::Rng;

use super::chi2::{chi2_cdf, chi2_sf};
use super::quadrature::{integrate, wynn_epsilon};
use super::rng::{fill_std_normal, SeedStream};
use super::special::norm_cdf;
use crate::error::{Error, Result};

/// Target absolute accuracy of [`genchi2_cdf`].
pub const GENCHI2_TOLERANCE: f64 = 1e-6;
/// Sample count of the Monte Carlo fallback.
pub const MC_FALLBACK_SAMPLES: usize = 1_000_000;
/// Root seed of the Monte Carlo fallback stream.
pub const MC_FALLBACK_SEED: u64 = 0x6E63_6869_3200;

// internal integration tolerance, well below the public target
const INVERSION_TOL: f64 = 1e-10;
const ENVELOPE_TOL: f64 = 1e-12;
const MAX_PANELS: usize = 4_000;
const ACCEL_AFTER: usize = 48;

/// Generalized chi-squared law `sum_i w_i chi2'(k_i, lam_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenChi2 {
    w: Vec<f64>,
    k: Vec<u32>,
    lam: Vec<f64>,
}

impl GenChi2 {
    pub fn new(w: Vec<f64>, k: Vec<u32>, lam: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidParameter("generalized chi-squared needs at least one component".into()));
        }
        if k.len() != w.len() {
            return Err(Error::DimMismatch { expected: w.len(), actual: k.len() });
        }
        if lam.len() != w.len() {
            return Err(Error::DimMismatch { expected: w.len(), actual: lam.len() });
        }
        if k.iter().any(|&k| k == 0) {
            return Err(Error::InvalidParameter("degrees of freedom must be >= 1".into()));
        }
        if lam.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(Error::InvalidParameter("noncentralities must be finite and >= 0".into()));
        }
        if w.iter().any(|w| !w.is_finite()) || w.iter().all(|&w| w == 0.0) {
            return Err(Error::InvalidParameter("weights must be finite and not all zero".into()));
        }
        Ok(Self { w, k, lam })
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn dofs(&self) -> &[u32] {
        &self.k
    }

    pub fn noncentralities(&self) -> &[f64] {
        &self.lam
    }

    pub fn to_quadratic(&self) -> GaussianQuadratic {
        let mut terms = Vec::with_capacity(self.w.len());
        let mut offset = 0.0;
        for ((&w, &k), &lam) in self.w.iter().zip(&self.k).zip(&self.lam) {
            terms.push(QuadTerm {
                weight: w,
                dof: k,
                linear: 2.0 * w * lam.sqrt(),
            });
            offset += w * lam;
        }
        GaussianQuadratic::new(terms, offset)
    }

    pub fn mean(&self) -> f64 {
        self.w
            .iter()
            .zip(&self.k)
            .zip(&self.lam)
            .map(|((w, &k), l)| w * (k as f64 + l))
            .sum()
    }
}

/// One block `weight * |Y|^2 + linear * Y_1` of a [`GaussianQuadratic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadTerm {
    pub weight: f64,
    pub dof: u32,
    pub linear: f64,
}

/// Quadratic form of independent standard normals (see module docs).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianQuadratic {
    terms: Vec<QuadTerm>,
    offset: f64,
}

impl GaussianQuadratic {
    /// Builds the form, merging blocks of equal weight and all pure normal terms.
    pub fn new(terms: Vec<QuadTerm>, offset: f64) -> Self {
        let mut merged: Vec<QuadTerm> = Vec::new();
        let mut normal_sq = 0.0;
        for t in terms {
            if t.weight == 0.0 {
                normal_sq += t.linear * t.linear;
                continue;
            }
            if t.dof == 0 {
                continue;
            }
            match merged.iter_mut().find(|m| m.weight == t.weight) {
                Some(m) => {
                    m.dof += t.dof;
                    m.linear = m.linear.hypot(t.linear);
                }
                None => merged.push(t),
            }
        }
        if normal_sq > 0.0 {
            merged.push(QuadTerm {
                weight: 0.0,
                dof: 1,
                linear: normal_sq.sqrt(),
            });
        }
        Self {
            terms: merged,
            offset,
        }
    }

    pub fn terms(&self) -> &[QuadTerm] {
        &self.terms
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn mean(&self) -> f64 {
        self.offset + self.terms.iter().map(|t| t.weight * t.dof as f64).sum::<f64>()
    }

    pub fn variance(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| 2.0 * t.weight * t.weight * t.dof as f64 + t.linear * t.linear)
            .sum()
    }

    fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.weight == 0.0 && t.linear == 0.0)
    }

    /// `P(Q <= x)`: exact routes first, Monte Carlo fallback second.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        match self.cdf_exact(x) {
            Ok(p) => Ok(p),
            Err(Error::NonConvergence(why)) => {
                log::warn!("quadratic-form CDF fell back to Monte Carlo: {why}");
                let p = self.cdf_monte_carlo(x, &SeedStream::new(MC_FALLBACK_SEED), MC_FALLBACK_SAMPLES);
                if p.is_finite() {
                    Ok(p)
                } else {
                    Err(Error::NonConvergence(format!("{why}; Monte Carlo fallback failed")))
                }
            }
            Err(e) => Err(e),
        }
    }

    /// `P(Q <= x)` without the Monte Carlo fallback.
    pub fn cdf_exact(&self, x: f64) -> Result<f64> {
        if x.is_nan() {
            return Err(Error::InvalidParameter("CDF argument is NaN".into()));
        }
        if self.is_constant() {
            return Ok(if x >= self.offset { 1.0 } else { 0.0 });
        }
        if x == f64::INFINITY {
            return Ok(1.0);
        }
        if x == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        if let Some(p) = self.cdf_closed_form(x) {
            return Ok(p.clamp(0.0, 1.0));
        }
        if let Some(p) = self.cdf_conditional(x)? {
            return Ok(p.clamp(0.0, 1.0));
        }
        self.cdf_inversion(x).map(|p| p.clamp(0.0, 1.0))
    }

    // One block only: central chi-squared, or a single direction.
    fn cdf_closed_form(&self, x: f64) -> Option<f64> {
        if self.terms.len() != 1 {
            return None;
        }
        let t = self.terms[0];
        let y = x - self.offset;
        if t.linear == 0.0 {
            return Some(if t.weight > 0.0 {
                chi2_cdf(t.dof, y / t.weight)
            } else {
                chi2_sf(t.dof, y / t.weight)
            });
        }
        if t.dof == 1 {
            return Some(single_direction_cdf(t.weight, t.linear, y));
        }
        None
    }

    // One non-central direction plus at most one central block: condition on the
    // direction and integrate the central block's chi-squared CDF against the
    // normal density.
    fn cdf_conditional(&self, x: f64) -> Result<Option<f64>> {
        let mut direction: Option<(f64, f64)> = None;
        let mut block: Option<(f64, u32)> = None;
        for t in &self.terms {
            if t.linear != 0.0 {
                if direction.is_some() {
                    return Ok(None);
                }
                direction = Some((t.weight, t.linear));
                if t.dof > 1 {
                    if block.is_some() {
                        return Ok(None);
                    }
                    block = Some((t.weight, t.dof - 1));
                }
            } else {
                if block.is_some() {
                    return Ok(None);
                }
                block = Some((t.weight, t.dof));
            }
        }
        let (Some((w1, l1)), Some((w2, k2))) = (direction, block) else {
            return Ok(None);
        };
        let shift = x - self.offset;
        let block_cdf = move |y: f64| {
            if w2 > 0.0 {
                chi2_cdf(k2, y / w2)
            } else {
                chi2_sf(k2, y / w2)
            }
        };
        let integrand = |z: f64| {
            let phi = (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
            phi * block_cdf(shift - w1 * z * z - l1 * z)
        };
        // Breakpoints: a uniform grid plus the points where the conditional
        // argument crosses zero, where the block CDF changes fastest.
        let mut points: Vec<f64> = (0..=48).map(|i| -12.0 + 0.5 * i as f64).collect();
        for root in quadratic_roots(w1, l1, -shift) {
            if root.abs() < 12.0 {
                points.push(root);
            }
        }
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        points.dedup();
        let r = integrate(integrand, &points, INVERSION_TOL, 20_000);
        if !r.converged {
            return Err(Error::NonConvergence(format!(
                "conditional quadrature error estimate {:e}",
                r.error
            )));
        }
        Ok(Some(r.value))
    }

    // Gil-Pelaez: F(x) = 1/2 - (1/pi) int_0^inf Im[e^{-itx} phi(t)] / t dt.
    fn cdf_inversion(&self, x: f64) -> Result<f64> {
        let scale = self.variance().sqrt();
        let terms: Vec<QuadTerm> = self
            .terms
            .iter()
            .map(|t| QuadTerm {
                weight: t.weight / scale,
                dof: t.dof,
                linear: t.linear / scale,
            })
            .collect();
        let shift = (self.offset - x) / scale;

        let log_modulus = |t: f64| -> f64 {
            terms
                .iter()
                .map(|q| {
                    let s = 1.0 + 4.0 * q.weight * q.weight * t * t;
                    -0.25 * q.dof as f64 * s.ln() - 0.5 * q.linear * q.linear * t * t / s
                })
                .sum()
        };
        let integrand = |t: f64| -> f64 {
            let mut re = 0.0;
            let mut im = shift * t;
            for q in &terms {
                let wt = q.weight * t;
                let s = 1.0 + 4.0 * wt * wt;
                re += -0.25 * q.dof as f64 * s.ln() - 0.5 * q.linear * q.linear * t * t / s;
                im += 0.5 * q.dof as f64 * (2.0 * wt).atan() - q.linear * q.linear * wt * t * t / s;
            }
            re.exp() * im.sin() / t
        };

        // asymptotic angular frequency of the integrand
        let omega = shift
            - terms
                .iter()
                .filter(|q| q.weight != 0.0)
                .map(|q| q.linear * q.linear / (4.0 * q.weight))
                .sum::<f64>();
        let normal_sq: f64 = terms
            .iter()
            .filter(|q| q.weight == 0.0)
            .map(|q| q.linear * q.linear)
            .sum();

        // Upper bound on int_b^inf |phi(t)| / t dt from the modulus at b.
        let tail_bound = |b: f64| -> f64 {
            let envelope = log_modulus(b).exp();
            if envelope < ENVELOPE_TOL * 1e-3 {
                return envelope;
            }
            let k_eff: f64 = terms
                .iter()
                .filter(|q| q.weight != 0.0 && 2.0 * q.weight.abs() * b >= 1.0)
                .map(|q| q.dof as f64)
                .sum();
            let mut bound = f64::INFINITY;
            if k_eff > 0.0 {
                bound = envelope * 2f64.powf(k_eff / 4.0) * 2.0 / k_eff;
            }
            if normal_sq > 0.0 {
                bound = bound.min(envelope / (normal_sq * b * b));
            }
            bound
        };

        let half_period = if omega.abs() > 1e-12 {
            PI / omega.abs()
        } else {
            f64::INFINITY
        };

        let mut total = 0.0;
        let mut a = 0.0;
        let mut panels = 0usize;
        let mut accel: Vec<f64> = Vec::new();
        let mut last_extrap: Option<f64> = None;
        let mut stable = 0;
        while panels < MAX_PANELS {
            let geometric: f64 = if a < 1.0 { 1.0 } else { a };
            let len = if panels >= ACCEL_AFTER {
                geometric.min(half_period)
            } else {
                geometric.min(4.0 * half_period)
            };
            let b = a + len;
            let r = integrate(&integrand, &[a, b], INVERSION_TOL * 1e-2, 2_000);
            if !r.value.is_finite() {
                return Err(Error::NonConvergence("non-finite inversion panel".into()));
            }
            total += r.value;
            panels += 1;
            a = b;
            if tail_bound(b) < INVERSION_TOL {
                return Ok(0.5 - total / PI);
            }
            if panels >= ACCEL_AFTER {
                accel.push(total);
                if accel.len() >= 8 {
                    let window = &accel[accel.len().saturating_sub(40)..];
                    let ext = wynn_epsilon(window);
                    if let Some(prev) = last_extrap {
                        if (ext - prev).abs() < INVERSION_TOL {
                            stable += 1;
                        } else {
                            stable = 0;
                        }
                        if stable >= 3 {
                            return Ok(0.5 - ext / PI);
                        }
                    }
                    last_extrap = Some(ext);
                }
            }
        }
        Err(Error::NonConvergence(format!(
            "characteristic-function inversion needed more than {MAX_PANELS} panels"
        )))
    }

    /// Seeded Monte Carlo estimate of `P(Q <= x)`.
    pub fn cdf_monte_carlo(&self, x: f64, stream: &SeedStream, samples: usize) -> f64 {
        let mut rng = stream.derive("gaussian-quadratic").rng();
        let hits = (0..samples).filter(|_| self.sample(&mut rng) <= x).count();
        hits as f64 / samples as f64
    }

    /// One draw of `Q`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut q = self.offset;
        let mut buf = [0.0f64; 1];
        for t in &self.terms {
            for j in 0..t.dof {
                fill_std_normal(rng, &mut buf);
                let y = buf[0];
                q += t.weight * y * y;
                if j == 0 {
                    q += t.linear * y;
                }
            }
        }
        q
    }
}

// Real roots of a z^2 + b z + c.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b != 0.0 { vec![-c / b] } else { vec![] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    let mut roots = Vec::with_capacity(2);
    if q != 0.0 {
        roots.push(q / a);
        roots.push(c / q);
    } else {
        roots.push(0.0);
    }
    roots
}

// P(w Z^2 + l Z <= y) for standard normal Z.
fn single_direction_cdf(w: f64, l: f64, y: f64) -> f64 {
    if w == 0.0 {
        return if l > 0.0 {
            norm_cdf(y / l)
        } else {
            norm_cdf(-y / l)
        };
    }
    let roots = quadratic_roots(w, l, -y);
    let (r1, r2) = match roots.as_slice() {
        [a, b] => (a.min(*b), a.max(*b)),
        [a] => (*a, *a),
        _ => {
            // the quadratic never crosses y
            return if w > 0.0 { 0.0 } else { 1.0 };
        }
    };
    if w > 0.0 {
        // inside the roots
        (norm_cdf(r2) - norm_cdf(r1)).max(0.0)
    } else {
        // outside the roots
        norm_cdf(r1) + (1.0 - norm_cdf(r2))
    }
}

/// `P(sum_i w_i chi2'(k_i, lam_i) <= x)`.
pub fn genchi2_cdf(q: &GenChi2, x: f64) -> Result<f64> {
    q.to_quadratic().cdf(x)
}
