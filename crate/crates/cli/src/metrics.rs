//! Utility metrics for projected data and least-squares releases.

use ndis_core::linalg::{dot, norm, Matrix};
use ndis_core::Error;
use serde::Serialize;

/// Mean with the half-width of a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub half_width: f64,
    pub trials: usize,
}

const Z95: f64 = 1.959_963_984_540_054;

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let half_width = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            Z95 * (var / n as f64).sqrt()
        } else {
            0.0
        };
        Some(Self {
            mean,
            half_width,
            trials: n,
        })
    }
}

// Column j of `original` is mapped to row j of `projected`.
fn paired(original: &Matrix, projected: &Matrix) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>), Error> {
    if projected.rows() != original.cols() {
        return Err(Error::ShapeMismatch(format!(
            "projected has {} rows, original has {} columns",
            projected.rows(),
            original.cols()
        )));
    }
    let u = (0..original.cols()).map(|j| original.column(j)).collect();
    Ok((u, projected.to_rows()))
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Pairwise distance ratio: mean of `|Pu - Pv| / |u - v|` over column pairs
/// with `u != v`. Row `j` of `projected` is the image of column `j` of
/// `original`.
pub fn pdr(original: &Matrix, projected: &Matrix) -> Result<f64, Error> {
    let (u, p) = paired(original, projected)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..u.len() {
        for j in i + 1..u.len() {
            let den = diff_norm(&u[i], &u[j]);
            if den == 0.0 {
                continue;
            }
            sum += diff_norm(&p[i], &p[j]) / den;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::DegeneratePairs);
    }
    Ok(sum / count as f64)
}

/// Dot-product correlation: Pearson correlation between `<u, v>` and
/// `<Pu, Pv>` over distinct column pairs.
pub fn dpr(original: &Matrix, projected: &Matrix) -> Result<f64, Error> {
    let (u, p) = paired(original, projected)?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..u.len() {
        for j in i + 1..u.len() {
            x.push(dot(&u[i], &u[j]));
            y.push(dot(&p[i], &p[j]));
        }
    }
    if x.len() < 2 {
        return Err(Error::DegeneratePairs);
    }
    pearson(&x, &y).ok_or(Error::DegeneratePairs)
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// `|x - x_opt| / |x_opt|`.
pub fn relative_error(x: &[f64], x_opt: &[f64]) -> Result<f64, Error> {
    if x.len() != x_opt.len() {
        return Err(Error::DimMismatch {
            expected: x_opt.len(),
            actual: x.len(),
        });
    }
    let den = norm(x_opt);
    if den == 0.0 {
        return Err(Error::Degenerate("reference solution is zero".into()));
    }
    Ok(diff_norm(x, x_opt) / den)
}
