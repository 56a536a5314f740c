//! Gaussian random projection `D^T G` and its single-column case, the random
//! linear combination: closed-form spectra, calibration, and the absolute and
//! relative mechanisms.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gram_factor, norm, Cholesky, Matrix};
use crate::numerics::rng::fill_std_normal;
use crate::numerics::{chi2_cdf, chi2_sf, erfc, SeedStream};

/// Which path a relative mechanism took.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Unnoised,
    Noised,
}

// e^eps * prob without overflowing for large eps and tiny prob.
fn scaled(eps: f64, prob: f64) -> f64 {
    if prob <= 0.0 {
        0.0
    } else {
        (eps + prob.ln()).exp()
    }
}

/// Spectrum of `D^T G` against `D'^T G` when the removed record has leverage `p`.
pub fn delta_rp(p: f64, r: u32, eps: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let x2 = (2.0 * eps - r as f64 * (-p).ln_1p()) / p;
    let v = chi2_sf(r, (1.0 - p) * x2) - scaled(eps, chi2_sf(r, x2));
    v.clamp(0.0, 1.0)
}

/// Spectrum in the opposite direction, `D'^T G` against `D^T G`.
pub fn delta_rp_reverse(p: f64, r: u32, eps: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let y = -2.0 * eps - r as f64 * (-p).ln_1p();
    if y <= 0.0 {
        return 0.0;
    }
    let v = chi2_cdf(r, y / p) - scaled(eps, chi2_cdf(r, (1.0 - p) * y / p));
    v.clamp(0.0, 1.0)
}

/// Spectrum of the random linear combination `D^T g` for a record of leverage `s`.
pub fn delta_rlc(s: f64, eps: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let base = (eps - 0.5 * (-s).ln_1p()) / s;
    let outer = erfc((base * (1.0 - s)).sqrt());
    let inner = erfc(base.sqrt());
    (outer - scaled(eps, inner)).clamp(0.0, 1.0)
}

// Largest s in [0, 1] with f(s) <= delta, for nondecreasing f with f(0) = 0.
fn leverage_bar(f: impl Fn(f64) -> f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) <= delta {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 {
            break;
        }
    }
    if lo == 0.0 {
        return Err(Error::BracketError {
            target: delta,
            f_lo: 0.0,
            f_hi: f(hi),
        });
    }
    Ok(lo)
}

/// Leverage bar `s` with `delta_rp(s, r, eps) = delta`.
pub fn calibrate_leverage_bar(r: u32, eps: f64, delta: f64) -> Result<f64> {
    check_eps(eps)?;
    leverage_bar(|p| delta_rp(p, r, eps), delta)
}

/// Leverage bar for the random linear combination.
pub fn calibrate_leverage_bar_rlc(eps: f64, delta: f64) -> Result<f64> {
    check_eps(eps)?;
    leverage_bar(|s| delta_rlc(s, eps), delta)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be >= 0, got {eps}")));
    }
    Ok(())
}

/// Calibrated parameters of the projection mechanisms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RpSpec {
    pub r: u32,
    pub l: f64,
    pub eps: f64,
    pub delta: f64,
    pub s_bar: f64,
    pub sigma: f64,
}

impl RpSpec {
    pub fn calibrate(r: u32, l: f64, eps: f64, delta: f64) -> Result<Self> {
        Self::from_bar(r, l, eps, delta, calibrate_leverage_bar(r, eps, delta)?)
    }

    pub fn calibrate_rlc(l: f64, eps: f64, delta: f64) -> Result<Self> {
        Self::from_bar(1, l, eps, delta, calibrate_leverage_bar_rlc(eps, delta)?)
    }

    fn from_bar(r: u32, l: f64, eps: f64, delta: f64, s_bar: f64) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidParameter("r must be >= 1".into()));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidParameter(format!("row-norm bound l must be > 0, got {l}")));
        }
        Ok(Self {
            r,
            l,
            eps,
            delta,
            s_bar,
            sigma: l / s_bar.sqrt(),
        })
    }
}

/// Rejects databases with a row longer than `l`.
pub fn check_row_norms(d: &Matrix, l: f64) -> Result<()> {
    for (i, row) in d.row_iter().enumerate() {
        let n = norm(row);
        if n > l * (1.0 + 1e-12) {
            return Err(Error::NormViolation {
                row: i,
                norm: n,
                bound: l,
            });
        }
    }
    Ok(())
}

/// `D^T G` with `G` an `n x r` standard normal matrix drawn from `seed`.
pub fn rp_sample(d: &Matrix, r: usize, seed: &SeedStream) -> Matrix {
    let mut rng = seed.derive("rp").rng();
    let mut out = Matrix::zeros(d.cols(), r);
    let mut g = vec![0.0; r];
    for row in d.row_iter() {
        fill_std_normal(&mut rng, &mut g);
        for (k, &v) in row.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            for (j, &gj) in g.iter().enumerate() {
                out[(k, j)] += v * gj;
            }
        }
    }
    out
}

/// `D^T g` for a single standard normal column `g`.
pub fn rlc_sample(d: &Matrix, seed: &SeedStream) -> Vec<f64> {
    rp_sample(d, 1, seed).column(0)
}

fn add_noise(mut m: Matrix, sigma: f64, seed: &SeedStream) -> Matrix {
    let mut rng = seed.derive("noise").rng();
    let mut z = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        fill_std_normal(&mut rng, &mut z);
        for (j, zj) in z.iter().enumerate() {
            m[(i, j)] += sigma * zj;
        }
    }
    m
}

/// Output of a projection mechanism.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RpRelease {
    pub output: Matrix,
    pub spec: RpSpec,
    pub branch: Branch,
    pub set_leverage: Option<f64>,
}

fn noised(d: &Matrix, spec: RpSpec, seed: &SeedStream) -> Result<RpRelease> {
    check_row_norms(d, spec.l)?;
    let output = add_noise(rp_sample(d, spec.r as usize, seed), spec.sigma, seed);
    Ok(RpRelease {
        output,
        spec,
        branch: Branch::Noised,
        set_leverage: None,
    })
}

/// `D^T G + N` with `N` a `d x r` matrix of `N(0, sigma^2)` entries.
pub fn mech_rp(d: &Matrix, r: u32, eps: f64, delta: f64, l: f64, seed: &SeedStream) -> Result<RpRelease> {
    noised(d, RpSpec::calibrate(r, l, eps, delta)?, seed)
}

/// Single-column mechanism with its own calibration.
pub fn mech_rlc(d: &Matrix, eps: f64, delta: f64, l: f64, seed: &SeedStream) -> Result<RpRelease> {
    noised(d, RpSpec::calibrate_rlc(l, eps, delta)?, seed)
}

fn row_key(row: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 are the same record
    row.iter().map(|v| if *v == 0.0 { 0 } else { v.to_bits() }).collect()
}

fn key_hash(key: &[u64]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &k in key {
        h ^= k;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
        h ^= h >> 29;
    }
    h
}

/// A removed record: `smaller` is `larger` without its row `row`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeighborPair {
    pub larger: usize,
    pub smaller: usize,
    pub row: usize,
}

/// A finite set of full-rank databases over a shared record universe.
#[derive(Debug, Clone)]
pub struct DomainSet {
    members: Vec<Matrix>,
    // sorted row keys of each member
    keys: Vec<Vec<Vec<u64>>>,
    // order-independent multiset hash of each member
    hashes: Vec<u64>,
}

impl DomainSet {
    pub fn new(members: Vec<Matrix>) -> Result<Self> {
        let mut set = Self {
            members: Vec::with_capacity(members.len()),
            keys: Vec::new(),
            hashes: Vec::new(),
        };
        for m in members {
            if let Some(first) = set.members.first() {
                if first.cols() != m.cols() {
                    return Err(Error::DimMismatch {
                        expected: first.cols(),
                        actual: m.cols(),
                    });
                }
            }
            if !m.has_full_column_rank() {
                return Err(Error::RankDeficient);
            }
            set.push(m);
        }
        Ok(set)
    }

    fn push(&mut self, m: Matrix) -> bool {
        let mut keys: Vec<Vec<u64>> = m.row_iter().map(row_key).collect();
        keys.sort();
        let hash = keys.iter().fold(0u64, |h, k| h.wrapping_add(key_hash(k)));
        if self.find(hash, &keys).is_some() {
            return false;
        }
        self.members.push(m);
        self.keys.push(keys);
        self.hashes.push(hash);
        true
    }

    fn find(&self, hash: u64, keys: &[Vec<u64>]) -> Option<usize> {
        (0..self.members.len()).find(|&i| self.hashes[i] == hash && self.keys[i] == keys)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, i: usize) -> &Matrix {
        &self.members[i]
    }

    pub fn members(&self) -> &[Matrix] {
        &self.members
    }

    /// Index of the member equal to `d` as a multiset of rows.
    pub fn index_of(&self, d: &Matrix) -> Option<usize> {
        let mut keys: Vec<Vec<u64>> = d.row_iter().map(row_key).collect();
        keys.sort();
        let hash = keys.iter().fold(0u64, |h, k| h.wrapping_add(key_hash(k)));
        self.find(hash, &keys)
    }

    pub fn contains(&self, d: &Matrix) -> bool {
        self.index_of(d).is_some()
    }

    /// Every pair of members differing by exactly one record.
    pub fn neighbor_pairs(&self) -> Vec<NeighborPair> {
        let mut by_size: HashMap<usize, Vec<usize>> = HashMap::new();
        for (i, m) in self.members.iter().enumerate() {
            by_size.entry(m.rows()).or_default().push(i);
        }
        let mut pairs = Vec::new();
        for (i, big) in self.members.iter().enumerate() {
            if big.rows() == 0 {
                continue;
            }
            let Some(smaller) = by_size.get(&(big.rows() - 1)) else {
                continue;
            };
            let row_hashes: Vec<u64> = big.row_iter().map(|r| key_hash(&row_key(r))).collect();
            for &j in smaller {
                let removed = self.hashes[i].wrapping_sub(self.hashes[j]);
                let Some(row) = row_hashes.iter().position(|&h| h == removed) else {
                    continue;
                };
                let key = row_key(big.row(row));
                if is_one_removal(&self.keys[i], &self.keys[j], &key) {
                    pairs.push(NeighborPair {
                        larger: i,
                        smaller: j,
                        row,
                    });
                }
            }
        }
        pairs.sort_by_key(|p| (p.larger, p.smaller));
        pairs
    }
}

// Whether the sorted multiset `big` equals `small` plus one copy of `extra`.
fn is_one_removal(big: &[Vec<u64>], small: &[Vec<u64>], extra: &[u64]) -> bool {
    let Ok(pos) = big.binary_search_by(|k| k.as_slice().cmp(extra)) else {
        return false;
    };
    big.len() == small.len() + 1 && big[..pos] == small[..pos] && big[pos + 1..] == small[pos..]
}

/// Largest leverage of a removed record over the neighbouring pairs of `x`;
/// 0 when `x` has no such pair.
pub fn leverage_for_set(x: &DomainSet) -> Result<f64> {
    let mut cache: Vec<Option<Cholesky>> = vec![None; x.len()];
    let mut best: f64 = 0.0;
    for pair in x.neighbor_pairs() {
        if cache[pair.larger].is_none() {
            cache[pair.larger] = Some(gram_factor(x.member(pair.larger))?);
        }
        let chol = cache[pair.larger].as_ref().unwrap();
        best = best.max(chol.quad_inverse(x.member(pair.larger).row(pair.row)));
    }
    Ok(best)
}

/// `D`, every single-row removal from `D` and every single-record addition
/// from `universe`, keeping only full-rank members.
pub fn neighbor_domain(d: &Matrix, universe: &Matrix) -> Result<DomainSet> {
    if universe.rows() > 0 && universe.cols() != d.cols() {
        return Err(Error::DimMismatch {
            expected: d.cols(),
            actual: universe.cols(),
        });
    }
    let mut set = DomainSet {
        members: Vec::new(),
        keys: Vec::new(),
        hashes: Vec::new(),
    };
    let mut candidates = vec![d.clone()];
    candidates.extend((0..d.rows()).map(|i| d.without_row(i)));
    for v in universe.row_iter() {
        candidates.push(d.with_row(v)?);
    }
    for c in candidates {
        if c.has_full_column_rank() {
            set.push(c);
        }
    }
    Ok(set)
}

/// Relative mechanism: returns the plain projection when the calibrated bar
/// covers the leverage of every removable record of `x`.
pub fn mech_rp_rel(
    d: &Matrix,
    x: &DomainSet,
    r: u32,
    eps: f64,
    delta: f64,
    l: f64,
    seed: &SeedStream,
) -> Result<RpRelease> {
    if !x.contains(d) {
        return Err(Error::NotInDomain);
    }
    let spec = RpSpec::calibrate(r, l, eps, delta)?;
    let lev = leverage_for_set(x)?;
    let mut out = if spec.s_bar >= lev {
        RpRelease {
            output: rp_sample(d, r as usize, seed),
            spec,
            branch: Branch::Unnoised,
            set_leverage: None,
        }
    } else {
        noised(d, spec, seed)?
    };
    out.set_leverage = Some(lev);
    Ok(out)
}
