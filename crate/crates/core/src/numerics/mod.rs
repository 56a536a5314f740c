//! Special functions, distribution functions, root finding and seeded sampling.

pub mod chi2;
pub mod genchi2;
pub mod quadrature;
pub mod rng;
pub mod roots;
pub mod special;

pub use chi2::{chi2_cdf, chi2_sf, noncentral_chi2_cdf};
pub use genchi2::{genchi2_cdf, GaussianQuadratic, GenChi2, QuadTerm, GENCHI2_TOLERANCE};
pub use rng::{std_normal_sample, SeedStream};
pub use roots::{bisect, bisect_bracket, Bracket};
pub use special::{erf, erfc, gamma_p, gamma_q, ln_gamma, norm_cdf};
