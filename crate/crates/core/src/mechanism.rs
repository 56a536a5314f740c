//! Privacy mechanisms behind a common trait, registered by name.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, RegressionData};
use crate::numerics::SeedStream;
use crate::ols::{self, LsRelease};
use crate::registry::Registry;
use crate::rp::{self, neighbor_domain, Branch, DomainSet, RpRelease};

/// Privacy and shape parameters shared by all mechanisms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MechParams {
    pub eps: f64,
    pub delta: f64,
    /// Projection or sketch size.
    pub r: u32,
    /// Bound on the row norms of the universe.
    pub l: f64,
}

impl MechParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps must be >= 0, got {}", self.eps)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.r == 0 {
            return Err(Error::InvalidParameter("r must be >= 1".into()));
        }
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(Error::InvalidParameter(format!("l must be > 0, got {}", self.l)));
        }
        Ok(())
    }
}

/// Input database plus, for relative mechanisms, an optional record universe.
/// Without one the domain is built from the rows of the database itself.
pub struct MechInput<'a> {
    pub data: &'a Matrix,
    pub universe: Option<&'a Matrix>,
    pub params: MechParams,
}

impl MechInput<'_> {
    fn domain(&self) -> Result<DomainSet> {
        neighbor_domain(self.data, self.universe.unwrap_or(self.data))
    }

    fn regression(&self) -> Result<RegressionData> {
        RegressionData::from_data(self.data)
    }
}

/// Uniform record of one mechanism run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Release {
    pub mechanism: String,
    pub params: MechParams,
    pub s_bar: Option<f64>,
    pub sigma: Option<f64>,
    pub branch: Branch,
    pub set_leverage: Option<f64>,
    pub set_residual: Option<f64>,
    pub output: Vec<Vec<f64>>,
}

impl Release {
    fn from_rp(name: &str, params: MechParams, r: RpRelease) -> Self {
        Self {
            mechanism: name.to_string(),
            params,
            s_bar: Some(r.spec.s_bar),
            sigma: (r.branch == Branch::Noised).then_some(r.spec.sigma),
            branch: r.branch,
            set_leverage: r.set_leverage,
            set_residual: None,
            output: r.output.to_rows(),
        }
    }

    fn from_ls(name: &str, params: MechParams, r: LsRelease) -> Self {
        Self {
            mechanism: name.to_string(),
            params,
            s_bar: None,
            sigma: r.sigma,
            branch: r.branch,
            set_leverage: r.set_leverage,
            set_residual: r.set_residual,
            output: r.x.into_iter().map(|v| vec![v]).collect(),
        }
    }
}

pub trait Mechanism: Send + Sync {
    fn name(&self) -> &'static str;
    /// Whether the last input column is a regression response.
    fn regression(&self) -> bool {
        false
    }
    fn run(&self, input: &MechInput, seed: &SeedStream) -> Result<Release>;
}

struct Rp;
struct Rlc;
struct RpRel;
struct Ls;
struct Als;
struct LsRel;

impl Mechanism for Rp {
    fn name(&self) -> &'static str {
        "rp"
    }
    fn run(&self, i: &MechInput, seed: &SeedStream) -> Result<Release> {
        let p = i.params;
        let r = rp::mech_rp(i.data, p.r, p.eps, p.delta, p.l, seed)?;
        Ok(Release::from_rp(self.name(), p, r))
    }
}

impl Mechanism for Rlc {
    fn name(&self) -> &'static str {
        "rlc"
    }
    fn run(&self, i: &MechInput, seed: &SeedStream) -> Result<Release> {
        let p = MechParams { r: 1, ..i.params };
        let r = rp::mech_rlc(i.data, p.eps, p.delta, p.l, seed)?;
        Ok(Release::from_rp(self.name(), p, r))
    }
}

impl Mechanism for RpRel {
    fn name(&self) -> &'static str {
        "rp-rel"
    }
    fn run(&self, i: &MechInput, seed: &SeedStream) -> Result<Release> {
        let p = i.params;
        let r = rp::mech_rp_rel(i.data, &i.domain()?, p.r, p.eps, p.delta, p.l, seed)?;
        Ok(Release::from_rp(self.name(), p, r))
    }
}

impl Mechanism for Ls {
    fn name(&self) -> &'static str {
        "ls"
    }
    fn regression(&self) -> bool {
        true
    }
    fn run(&self, i: &MechInput, seed: &SeedStream) -> Result<Release> {
        let p = i.params;
        let r = ols::mech_ls(&i.regression()?, p.r as usize, p.eps, p.delta, p.l, seed)?;
        Ok(Release::from_ls(self.name(), p, r))
    }
}

impl Mechanism for Als {
    fn name(&self) -> &'static str {
        "als"
    }
    fn regression(&self) -> bool {
        true
    }
    fn run(&self, i: &MechInput, seed: &SeedStream) -> Result<Release> {
        let p = i.params;
        let r = ols::mech_als(&i.regression()?, p.r as usize, p.eps, p.delta, p.l, seed)?;
        Ok(Release::from_ls(self.name(), p, r))
    }
}

impl Mechanism for LsRel {
    fn name(&self) -> &'static str {
        "ls-rel"
    }
    fn regression(&self) -> bool {
        true
    }
    fn run(&self, i: &MechInput, seed: &SeedStream) -> Result<Release> {
        let p = i.params;
        let r = ols::mech_ls_rel(&i.regression()?, &i.domain()?, p.r as usize, p.eps, p.delta, p.l, seed)?;
        Ok(Release::from_ls(self.name(), p, r))
    }
}

/// The built-in mechanisms: rp, rlc, ls, als, rp-rel, ls-rel.
pub fn mechanisms() -> Registry<dyn Mechanism> {
    let mut reg: Registry<dyn Mechanism> = Registry::new();
    let all: Vec<Box<dyn Mechanism>> = vec![
        Box::new(Rp),
        Box::new(Rlc),
        Box::new(Ls),
        Box::new(Als),
        Box::new(RpRel),
        Box::new(LsRel),
    ];
    for m in all {
        reg.register(m.name(), m);
    }
    reg
}
