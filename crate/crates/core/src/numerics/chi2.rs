//! Central and noncentral chi-squared distribution functions.

use super::special::{gamma_p, gamma_q, ln_gamma};

/// `P(Y <= x)` for `Y ~ chi2(r)`.
pub fn chi2_cdf(r: u32, x: f64) -> f64 {
    assert!(r >= 1, "chi-squared degrees of freedom must be >= 1");
    if x <= 0.0 {
        return 0.0;
    }
    gamma_p(0.5 * r as f64, 0.5 * x)
}

/// `P(Y >= x)` for `Y ~ chi2(r)`, computed without cancellation in the upper tail.
pub fn chi2_sf(r: u32, x: f64) -> f64 {
    assert!(r >= 1, "chi-squared degrees of freedom must be >= 1");
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(0.5 * r as f64, 0.5 * x)
}

/// `P(Y <= x)` for `Y ~ chi2'(r, lam)`, as a Poisson(lam/2) mixture of central
/// chi-squared CDFs with `r + 2j` degrees of freedom.
///
/// Summation starts at the Poisson mode and walks outwards until the remaining
/// Poisson mass is negligible, so large noncentralities stay stable.
pub fn noncentral_chi2_cdf(r: u32, lam: f64, x: f64) -> f64 {
    assert!(r >= 1, "chi-squared degrees of freedom must be >= 1");
    assert!(lam >= 0.0, "noncentrality must be nonnegative");
    if lam == 0.0 {
        return chi2_cdf(r, x);
    }
    if x <= 0.0 {
        return 0.0;
    }
    let half_lam = 0.5 * lam;
    let half_x = 0.5 * x;
    let a0 = 0.5 * r as f64;
    let weight = |j: f64| (-half_lam + j * half_lam.ln() - ln_gamma(j + 1.0)).exp();

    let mode = half_lam.floor();
    let mut total = 0.0;
    let mut mass = 0.0;

    // upwards from the mode
    let mut j = mode;
    loop {
        let w = weight(j);
        total += w * gamma_p(a0 + j, half_x);
        mass += w;
        j += 1.0;
        if (w < 1e-17 && j > half_lam) || j > mode + 1e6 {
            break;
        }
    }
    // downwards
    let mut j = mode - 1.0;
    while j >= 0.0 {
        let w = weight(j);
        total += w * gamma_p(a0 + j, half_x);
        mass += w;
        if w < 1e-17 {
            break;
        }
        j -= 1.0;
    }
    debug_assert!((mass - 1.0).abs() < 1e-9, "poisson mass {mass}");
    total.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::special::erf;

    #[test]
    fn central_examples() {
        assert!((chi2_cdf(2, 2.0 * 2f64.ln()) - 0.5).abs() < 1e-14);
        assert!((chi2_cdf(1, 1.0) - erf(1.0 / 2f64.sqrt())).abs() < 1e-13);
        assert!((chi2_cdf(1, 1.0) - 0.682_689_492_137_085_9).abs() < 1e-12);
        assert_eq!(chi2_cdf(5, 0.0), 0.0);
        assert!((chi2_sf(4, 3.0) + chi2_cdf(4, 3.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn noncentral_reduces_to_central() {
        assert_eq!(noncentral_chi2_cdf(3, 0.0, 2.0), chi2_cdf(3, 2.0));
        assert_eq!(noncentral_chi2_cdf(2, 1.0, 0.0), 0.0);
    }

    #[test]
    fn noncentral_one_dof_closed_form() {
        // (Z + mu)^2 <= x  <=>  -sqrt x - mu <= Z <= sqrt x - mu
        let phi = |z: f64| 0.5 * (1.0 + erf(z / 2f64.sqrt()));
        for &(mu, x) in &[(2.0, 4.0), (0.5, 1.0), (3.0, 20.0), (10.0, 90.0)] {
            let s = f64::sqrt(x);
            let want = phi(s - mu) - phi(-s - mu);
            let got = noncentral_chi2_cdf(1, mu * mu, x);
            assert!((got - want).abs() < 1e-10, "mu={mu} x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn monotone_on_grid() {
        for &(r, lam) in &[(1u32, 0.0), (3, 2.5), (10, 40.0)] {
            let mut prev = 0.0;
            for i in 0..100 {
                let x = i as f64 * 0.8;
                let v = noncentral_chi2_cdf(r, lam, x);
                assert!(v + 1e-15 >= prev);
                prev = v;
            }
        }
    }
}
