use crate::error::{Error, Result};

const MAX_ITER: usize = 200;
const VALUE_TOL: f64 = 1e-10;
const WIDTH_TOL: f64 = 1e-12;

/// Final state of a bisection: the bracket `[lo, hi]` and the values at its ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

impl Bracket {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Shrink `[lo, hi]` around the point where the monotone `f` crosses `target`.
///
/// Works for increasing and decreasing `f`. Stops once the midpoint value is
/// within `1e-10` of the target or the bracket is narrower than `1e-12`, and
/// never runs more than 200 iterations.
pub fn bisect_bracket<F>(mut f: F, lo: f64, hi: f64, target: f64) -> Result<Bracket>
where
    F: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = (lo.min(hi), lo.max(hi));
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    if f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::NonConvergence("objective is NaN at bracket end".into()));
    }
    let below_lo = f_lo <= target;
    let below_hi = f_hi <= target;
    if below_lo == below_hi && f_lo != target && f_hi != target {
        return Err(Error::BracketError { target, f_lo, f_hi });
    }
    for _ in 0..MAX_ITER {
        if hi - lo <= WIDTH_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if (f_mid - target).abs() <= VALUE_TOL {
            // collapse onto the hit, keeping both ends on the correct sides
            if (f_mid <= target) == below_lo {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
                f_hi = f_mid;
            }
            break;
        }
        if (f_mid <= target) == below_lo {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    Ok(Bracket { lo, hi, f_lo, f_hi })
}

/// Solve `f(x) = target` for monotone `f` on `[lo, hi]`.
pub fn bisect<F>(f: F, lo: f64, hi: f64, target: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let b = bisect_bracket(f, lo, hi, target)?;
    if (b.f_lo - target).abs() <= VALUE_TOL && (b.f_lo - target).abs() <= (b.f_hi - target).abs() {
        Ok(b.lo)
    } else if (b.f_hi - target).abs() <= VALUE_TOL {
        Ok(b.hi)
    } else {
        Ok(b.midpoint())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::special::erf;

    #[test]
    fn square_root_of_four() {
        let x = bisect(|x| x * x, 0.0, 4.0, 4.0).unwrap();
        assert!((x - 2.0).abs() < 1e-10);
    }

    #[test]
    fn inverse_erf_at_half() {
        let x = bisect(erf, 0.0, 5.0, 0.5).unwrap();
        // independent oracle: Newton iteration on erf(x) - 0.5 with the known derivative
        let mut y: f64 = 0.5;
        for _ in 0..50 {
            let d = 2.0 / std::f64::consts::PI.sqrt() * (-y * y).exp();
            y -= (erf(y) - 0.5) / d;
        }
        assert!((x - y).abs() < 1e-10);
        assert!((x - 0.476_936).abs() < 1e-6);
    }

    #[test]
    fn unbracketed_target() {
        assert!(matches!(bisect(|x| x, 0.0, 1.0, 2.0), Err(Error::BracketError { .. })));
    }

    #[test]
    fn decreasing_function() {
        let x = bisect(|x| -x, 0.0, 3.0, -1.5).unwrap();
        assert!((x - 1.5).abs() < 1e-10);
    }
}
