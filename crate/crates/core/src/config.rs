//! Method names and their TOML prior/credal configurations.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::cma_ib::{ScalarCredalSet, DEFAULT_EPSILON};
use crate::cma_nb::BoxCredalSet;
use crate::error::{Error, Result};
use crate::priors::PriorSpec;

pub const EXPERTS_CENTRAL_TOML: &str = include_str!("../configs/experts_central.toml");
pub const EXPERTS_HULL_TOML: &str = include_str!("../configs/experts_hull.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    BmaIb,
    BmaBb,
    BmaNb,
    CmaIb,
    CmaNb,
    CmaExp,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::BmaIb,
        Method::BmaBb,
        Method::BmaNb,
        Method::CmaIb,
        Method::CmaNb,
        Method::CmaExp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::BmaIb => "bma_ib",
            Method::BmaBb => "bma_bb",
            Method::BmaNb => "bma_nb",
            Method::CmaIb => "cma_ib",
            Method::CmaNb => "cma_nb",
            Method::CmaExp => "cma_exp",
        }
    }

    pub fn is_credal(self) -> bool {
        matches!(self, Method::CmaIb | Method::CmaNb | Method::CmaExp)
    }

    /// Point method whose accuracy is split by the credal method's
    /// determinacy. Its prior lies inside the credal set under the default
    /// configurations.
    pub fn reference(self) -> Method {
        match self {
            Method::CmaIb | Method::CmaNb => Method::BmaIb,
            Method::CmaExp => Method::BmaNb,
            m => m,
        }
    }

    /// Builds the method's prior or credal set for `k` covariates. Missing
    /// fields take defaults: a uniform prior, BB(1, 1), the expert central
    /// point, the near-ignorance interval and box, and the expert hull.
    pub fn resolve(self, cfg: &MethodConfig, k: usize) -> Result<MethodSpec> {
        cfg.check_prior_tag(self)?;
        let spec = match self {
            Method::BmaIb => MethodSpec::Point(PriorSpec::ib(cfg.theta.unwrap_or(0.5))?),
            Method::BmaBb => MethodSpec::Point(PriorSpec::bb(cfg.alpha.unwrap_or(1.0), cfg.beta.unwrap_or(1.0))?),
            Method::BmaNb => {
                let theta = match &cfg.theta_vec {
                    Some(v) => v.clone(),
                    None => experts_central()?.theta_vec.expect("canned file has theta_vec"),
                };
                MethodSpec::Point(PriorSpec::nb(theta)?)
            }
            Method::CmaIb => {
                let eps = cfg.epsilon.unwrap_or(DEFAULT_EPSILON);
                let lo = cfg.theta_lo.unwrap_or(eps);
                let hi = cfg.theta_hi.unwrap_or(1.0 - eps);
                MethodSpec::Scalar(ScalarCredalSet::new(lo, hi)?)
            }
            Method::CmaNb => match (&cfg.lo, &cfg.hi) {
                (Some(lo), Some(hi)) => MethodSpec::Box(BoxCredalSet::new(lo.clone(), hi.clone())?),
                (None, None) => {
                    MethodSpec::Box(BoxCredalSet::near_ignorance(k, cfg.epsilon.unwrap_or(DEFAULT_EPSILON))?)
                }
                _ => return Err(Error::Config("a box needs both lo and hi".into())),
            },
            Method::CmaExp => {
                let hull = experts_hull()?;
                let lo = cfg.lo.clone().or(hull.lo).expect("canned file has lo");
                let hi = cfg.hi.clone().or(hull.hi).expect("canned file has hi");
                MethodSpec::Box(BoxCredalSet::new(lo, hi)?)
            }
        };
        spec.check_k(k)?;
        Ok(spec)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Prior or credal set a method runs with.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodSpec {
    Point(PriorSpec),
    Scalar(ScalarCredalSet),
    Box(BoxCredalSet),
}

impl MethodSpec {
    fn check_k(&self, k: usize) -> Result<()> {
        match self {
            MethodSpec::Point(p) => p.check_k(k),
            MethodSpec::Box(b) if b.k() != k => Err(Error::DimensionMismatch {
                expected: k,
                actual: b.k(),
            }),
            _ => Ok(()),
        }
    }
}

/// Every key a prior or credal configuration file may hold. Which keys
/// matter depends on the method.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub prior: Option<String>,
    pub theta: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub theta_vec: Option<Vec<f64>>,
    pub theta_lo: Option<f64>,
    pub theta_hi: Option<f64>,
    pub epsilon: Option<f64>,
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
}

impl MethodConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Values set in `over` replace those in `self`.
    pub fn merged_with(&self, over: &MethodConfig) -> MethodConfig {
        MethodConfig {
            prior: over.prior.clone().or_else(|| self.prior.clone()),
            theta: over.theta.or(self.theta),
            alpha: over.alpha.or(self.alpha),
            beta: over.beta.or(self.beta),
            theta_vec: over.theta_vec.clone().or_else(|| self.theta_vec.clone()),
            theta_lo: over.theta_lo.or(self.theta_lo),
            theta_hi: over.theta_hi.or(self.theta_hi),
            epsilon: over.epsilon.or(self.epsilon),
            lo: over.lo.clone().or_else(|| self.lo.clone()),
            hi: over.hi.clone().or_else(|| self.hi.clone()),
        }
    }

    /// A `prior` tag, when present, must name the method's prior family.
    fn check_prior_tag(&self, m: Method) -> Result<()> {
        let Some(tag) = self.prior.as_deref() else {
            return Ok(());
        };
        let expected = match m {
            Method::BmaIb | Method::CmaIb => "ib",
            Method::BmaBb => "bb",
            Method::BmaNb | Method::CmaNb | Method::CmaExp => "nb",
        };
        if tag != expected {
            return Err(Error::Config(format!("prior = \"{tag}\" does not fit method {m}")));
        }
        Ok(())
    }
}

pub fn experts_central() -> Result<MethodConfig> {
    MethodConfig::parse(EXPERTS_CENTRAL_TOML)
}

pub fn experts_hull() -> Result<MethodConfig> {
    MethodConfig::parse(EXPERTS_HULL_TOML)
}
