//! Prior distributions, Latin-hypercube ensembles and states of the world.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Open01;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, Continuous, ContinuousCDF, Normal};

use crate::core_model::{EconomicParams, FloodFrequencyParams};
use crate::error::{Error, Result};
use crate::rng::{labels, substream};
use crate::sealevel::SlrParams;
use crate::surge::SurgeHazard;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorFamily {
    Normal,
    Lognormal,
    Uniform,
    BetaScaled,
}

/// How a lognormal prior's `param1`/`param2` are read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SdSpace {
    /// `param1` is the median, `param2` the standard deviation of `ln X`.
    #[default]
    Log,
    /// `param1` is the mean, `param2` the standard deviation of `X`.
    Natural,
}

/// A marginal prior.
///
/// | family        | param1        | param2            | bounds                 |
/// |---------------|---------------|-------------------|------------------------|
/// | `normal`      | mean          | sd                | optional truncation    |
/// | `lognormal`   | median / mean | log sd / sd       | optional truncation    |
/// | `uniform`     | low           | high              | optional truncation    |
/// | `beta-scaled` | α             | β                 | support, required      |
///
/// A `null` bound is unbounded on that side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub family: PriorFamily,
    pub param1: f64,
    pub param2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[Option<f64>; 2]>,
    #[serde(default, skip_serializing_if = "is_log_space")]
    pub sd_space: SdSpace,
}

fn is_log_space(s: &SdSpace) -> bool {
    *s == SdSpace::Log
}

enum Base {
    Normal(Normal),
    LogNormal(Normal),
    Uniform(f64, f64),
    Beta(Beta, f64, f64),
}

impl Base {
    fn cdf(&self, x: f64) -> f64 {
        match self {
            Base::Normal(d) => d.cdf(x),
            Base::LogNormal(d) => {
                if x <= 0.0 {
                    0.0
                } else {
                    d.cdf(x.ln())
                }
            }
            Base::Uniform(lo, hi) => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Base::Beta(d, lo, hi) => d.cdf(((x - lo) / (hi - lo)).clamp(0.0, 1.0)),
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        match self {
            Base::Normal(d) => d.pdf(x),
            Base::LogNormal(d) => {
                if x <= 0.0 {
                    0.0
                } else {
                    d.pdf(x.ln()) / x
                }
            }
            Base::Uniform(lo, hi) => {
                if (*lo..=*hi).contains(&x) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Base::Beta(d, lo, hi) => {
                let z = (x - lo) / (hi - lo);
                if (0.0..=1.0).contains(&z) {
                    let v = d.pdf(z) / (hi - lo);
                    if v.is_finite() {
                        v
                    } else {
                        0.0
                    }
                } else {
                    0.0
                }
            }
        }
    }

    fn quantile(&self, u: f64) -> f64 {
        match self {
            Base::Normal(d) => d.inverse_cdf(u),
            Base::LogNormal(d) => d.inverse_cdf(u).exp(),
            Base::Uniform(lo, hi) => lo + u * (hi - lo),
            Base::Beta(d, lo, hi) => lo + d.inverse_cdf(u) * (hi - lo),
        }
    }
}

impl PriorSpec {
    pub fn normal(mean: f64, sd: f64) -> Self {
        Self::new(PriorFamily::Normal, mean, sd)
    }

    pub fn lognormal(median: f64, log_sd: f64) -> Self {
        Self::new(PriorFamily::Lognormal, median, log_sd)
    }

    pub fn uniform(low: f64, high: f64) -> Self {
        Self::new(PriorFamily::Uniform, low, high)
    }

    pub fn beta_scaled(alpha: f64, beta: f64, low: f64, high: f64) -> Self {
        Self {
            bounds: Some([Some(low), Some(high)]),
            ..Self::new(PriorFamily::BetaScaled, alpha, beta)
        }
    }

    fn new(family: PriorFamily, param1: f64, param2: f64) -> Self {
        Self {
            family,
            param1,
            param2,
            bounds: None,
            sd_space: SdSpace::Log,
        }
    }

    pub fn truncated(mut self, low: Option<f64>, high: Option<f64>) -> Self {
        self.bounds = Some([low, high]);
        self
    }

    pub fn with_sd_space(mut self, space: SdSpace) -> Self {
        self.sd_space = space;
        self
    }

    /// `(low, high)` with missing sides infinite.
    pub fn bound_pair(&self) -> (f64, f64) {
        match self.bounds {
            Some([lo, hi]) => (lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY)),
            None => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base().map(|_| ())?;
        let (lo, hi) = self.bound_pair();
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::invalid(format!("prior bounds must be ordered, got ({lo}, {hi})")));
        }
        let (flo, fhi) = self.mass_window()?;
        if !(fhi > flo) {
            return Err(Error::invalid("prior truncation leaves no probability mass"));
        }
        Ok(())
    }

    fn base(&self) -> Result<Base> {
        let bad = |what: &str| Error::invalid(format!("{:?} prior: {what}", self.family));
        if !(self.param1.is_finite() && self.param2.is_finite()) {
            return Err(bad("parameters must be finite"));
        }
        match self.family {
            PriorFamily::Normal => {
                if self.param2 <= 0.0 {
                    return Err(bad("sd must be positive"));
                }
                Ok(Base::Normal(
                    Normal::new(self.param1, self.param2).map_err(|e| bad(&e.to_string()))?,
                ))
            }
            PriorFamily::Lognormal => {
                if self.param1 <= 0.0 || self.param2 <= 0.0 {
                    return Err(bad("location and sd must be positive"));
                }
                let (mu, sigma) = match self.sd_space {
                    SdSpace::Log => (self.param1.ln(), self.param2),
                    SdSpace::Natural => {
                        let s2 = (1.0 + (self.param2 / self.param1).powi(2)).ln();
                        (self.param1.ln() - s2 / 2.0, s2.sqrt())
                    }
                };
                Ok(Base::LogNormal(Normal::new(mu, sigma).map_err(|e| bad(&e.to_string()))?))
            }
            PriorFamily::Uniform => {
                if self.param2 <= self.param1 {
                    return Err(bad("high must exceed low"));
                }
                Ok(Base::Uniform(self.param1, self.param2))
            }
            PriorFamily::BetaScaled => {
                if self.param1 <= 0.0 || self.param2 <= 0.0 {
                    return Err(bad("shape parameters must be positive"));
                }
                let (lo, hi) = self.bound_pair();
                if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                    return Err(bad("needs a finite, ordered support in `bounds`"));
                }
                Ok(Base::Beta(
                    Beta::new(self.param1, self.param2).map_err(|e| bad(&e.to_string()))?,
                    lo,
                    hi,
                ))
            }
        }
    }

    /// Base-distribution CDF at the truncation bounds.
    fn mass_window(&self) -> Result<(f64, f64)> {
        let base = self.base()?;
        if self.family == PriorFamily::BetaScaled {
            return Ok((0.0, 1.0));
        }
        let (lo, hi) = self.bound_pair();
        let flo = if lo.is_finite() { base.cdf(lo) } else { 0.0 };
        let fhi = if hi.is_finite() { base.cdf(hi) } else { 1.0 };
        Ok((flo, fhi))
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        let base = self.base()?;
        let (flo, fhi) = self.mass_window()?;
        Ok(((base.cdf(x) - flo) / (fhi - flo)).clamp(0.0, 1.0))
    }

    /// Density, renormalized over the truncation window.
    pub fn pdf(&self, x: f64) -> Result<f64> {
        let base = self.base()?;
        let (lo, hi) = self.bound_pair();
        if x < lo || x > hi {
            return Ok(0.0);
        }
        let (flo, fhi) = self.mass_window()?;
        Ok(base.pdf(x) / (fhi - flo))
    }

    /// Density of the untruncated family (support bounds still apply for `beta-scaled`).
    pub fn untruncated_pdf(&self, x: f64) -> Result<f64> {
        Ok(self.base()?.pdf(x))
    }

    pub fn median(&self) -> Result<f64> {
        self.inverse_cdf(0.5)
    }

    pub fn mean(&self) -> Result<f64> {
        // Only used for reporting; numerical integration over the quantile function.
        let n = 4000;
        let mut s = 0.0;
        for i in 0..n {
            s += self.inverse_cdf((i as f64 + 0.5) / n as f64)?;
        }
        Ok(s / n as f64)
    }

    /// The `u`-quantile of the (truncated) prior.
    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        inverse_cdf(self, u)
    }
}

/// `u`-quantile of `prior`. Truncation is handled exactly by mapping `u`
/// into the admissible CDF window before inverting.
pub fn inverse_cdf(prior: &PriorSpec, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain {
            value: u,
            domain: "(0, 1)",
        });
    }
    let base = prior.base()?;
    let (flo, fhi) = prior.mass_window()?;
    let x = base.quantile(flo + u * (fhi - flo));
    let (lo, hi) = prior.bound_pair();
    let x = if x <= lo && prior.family != PriorFamily::BetaScaled {
        lo.next_up()
    } else if x >= hi && prior.family != PriorFamily::BetaScaled {
        hi.next_down()
    } else {
        x
    };
    Ok(x)
}

/// Every uncertain quantity a state of the world can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Parameter {
    #[serde(rename = "V")]
    ValueOfGoods,
    #[serde(rename = "delta")]
    DiscountRate,
    #[serde(rename = "k")]
    CostRate,
    #[serde(rename = "eta")]
    Subsidence,
    #[serde(rename = "phi")]
    LinearRise,
    #[serde(rename = "p0")]
    InitialFrequency,
    #[serde(rename = "alpha")]
    DecayRate,
    #[serde(rename = "a")]
    SlrLevel,
    #[serde(rename = "b")]
    SlrRate,
    #[serde(rename = "c")]
    SlrAcceleration,
    #[serde(rename = "c_star")]
    AbruptRate,
    #[serde(rename = "t_star")]
    AbruptOnset,
    #[serde(rename = "mu")]
    GevLocation,
    #[serde(rename = "sigma")]
    GevScale,
    #[serde(rename = "xi")]
    GevShape,
}

impl Parameter {
    pub const ALL: [Parameter; 15] = [
        Parameter::ValueOfGoods,
        Parameter::DiscountRate,
        Parameter::CostRate,
        Parameter::Subsidence,
        Parameter::LinearRise,
        Parameter::InitialFrequency,
        Parameter::DecayRate,
        Parameter::SlrLevel,
        Parameter::SlrRate,
        Parameter::SlrAcceleration,
        Parameter::AbruptRate,
        Parameter::AbruptOnset,
        Parameter::GevLocation,
        Parameter::GevScale,
        Parameter::GevShape,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Parameter::ValueOfGoods => "V",
            Parameter::DiscountRate => "delta",
            Parameter::CostRate => "k",
            Parameter::Subsidence => "eta",
            Parameter::LinearRise => "phi",
            Parameter::InitialFrequency => "p0",
            Parameter::DecayRate => "alpha",
            Parameter::SlrLevel => "a",
            Parameter::SlrRate => "b",
            Parameter::SlrAcceleration => "c",
            Parameter::AbruptRate => "c_star",
            Parameter::AbruptOnset => "t_star",
            Parameter::GevLocation => "mu",
            Parameter::GevScale => "sigma",
            Parameter::GevShape => "xi",
        }
    }

    pub fn get(self, sow: &StateOfTheWorld) -> Option<f64> {
        let slr = &sow.sea_level;
        Some(match self {
            Parameter::ValueOfGoods => sow.economic.value_of_goods,
            Parameter::DiscountRate => sow.economic.discount_rate,
            Parameter::CostRate => sow.economic.cost_rate,
            Parameter::Subsidence => slr.subsidence,
            Parameter::LinearRise => slr.linear_rate,
            Parameter::InitialFrequency => sow.flood.initial_frequency,
            Parameter::DecayRate => sow.flood.decay_rate,
            Parameter::SlrLevel => slr.a,
            Parameter::SlrRate => slr.b,
            Parameter::SlrAcceleration => slr.c,
            Parameter::AbruptRate => slr.c_star,
            Parameter::AbruptOnset => slr.t_star,
            Parameter::GevLocation => sow.surge.as_ref()?.gev.location,
            Parameter::GevScale => sow.surge.as_ref()?.gev.scale,
            Parameter::GevShape => sow.surge.as_ref()?.gev.shape,
        })
    }

    pub fn apply(self, sow: &mut StateOfTheWorld, value: f64) -> Result<()> {
        let slr = &mut sow.sea_level;
        match self {
            Parameter::ValueOfGoods => sow.economic.value_of_goods = value,
            Parameter::DiscountRate => sow.economic.discount_rate = value,
            Parameter::CostRate => sow.economic.cost_rate = value,
            Parameter::Subsidence => slr.subsidence = value,
            Parameter::LinearRise => slr.linear_rate = value,
            Parameter::InitialFrequency => sow.flood.initial_frequency = value,
            Parameter::DecayRate => sow.flood.decay_rate = value,
            Parameter::SlrLevel => slr.a = value,
            Parameter::SlrRate => slr.b = value,
            Parameter::SlrAcceleration => slr.c = value,
            Parameter::AbruptRate => slr.c_star = value,
            Parameter::AbruptOnset => slr.t_star = value,
            Parameter::GevLocation | Parameter::GevScale | Parameter::GevShape => {
                let surge = sow.surge.as_mut().ok_or_else(|| {
                    Error::config(format!(
                        "parameter {} needs a surge model in the state of the world",
                        self.name()
                    ))
                })?;
                match self {
                    Parameter::GevLocation => surge.gev.location = value,
                    Parameter::GevScale => surge.gev.scale = value,
                    _ => surge.gev.shape = value,
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Parameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Parameter::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::config(format!("unknown parameter `{s}`")))
    }
}

/// Named priors, iterated in a fixed order.
pub type PriorSet = BTreeMap<Parameter, PriorSpec>;

/// Default priors for the economic block and subsidence.
pub fn default_priors() -> PriorSet {
    let mut p = PriorSet::new();
    p.insert(
        Parameter::ValueOfGoods,
        PriorSpec::normal(2e10, 1e9).truncated(Some(0.0), None),
    );
    p.insert(Parameter::DiscountRate, PriorSpec::lognormal(0.02, 0.1));
    p.insert(Parameter::CostRate, PriorSpec::normal(4.2e7, 4e6).truncated(Some(0.0), None));
    p.insert(Parameter::Subsidence, PriorSpec::lognormal(0.002, 0.1));
    p
}

/// One joint realization of every model parameter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StateOfTheWorld {
    pub index: usize,
    pub economic: EconomicParams,
    pub flood: FloodFrequencyParams,
    pub sea_level: SlrParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surge: Option<SurgeHazard>,
}

/// `n × d` Latin hypercube in `(0, 1)`: each column has exactly one value in
/// every stratum `[j/n, (j+1)/n)`, strata shuffled independently per column.
pub fn lhs_sample(n: usize, d: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 || d == 0 {
        return Err(Error::degenerate("latin hypercube needs n >= 1 and d >= 1"));
    }
    let columns: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|j| {
            let mut rng = substream(seed, "lhs", j as u64);
            let mut strata: Vec<usize> = (0..n).collect();
            strata.shuffle(&mut rng);
            strata
                .into_iter()
                .map(|s| {
                    let jitter: f64 = rng.sample(Open01);
                    let v = (s as f64 + jitter) / n as f64;
                    v.min(1.0f64.next_down())
                })
                .collect()
        })
        .collect();
    Ok((0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect())
}

/// Latin-hypercube ensemble of `n` states of the world. Parameters without a
/// prior keep the value in `base`.
pub fn generate_sows(priors: &PriorSet, base: &StateOfTheWorld, n: usize, seed: u64) -> Result<Vec<StateOfTheWorld>> {
    if priors.is_empty() {
        return Err(Error::config("no priors to sample"));
    }
    for (param, prior) in priors {
        prior
            .validate()
            .map_err(|e| Error::config(format!("prior for {param}: {e}")))?;
    }
    let design = lhs_sample(n, priors.len(), crate::rng::child_seed(seed, labels::ENSEMBLE))?;
    design
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let mut sow = base.clone();
            sow.index = i;
            for ((param, prior), u) in priors.iter().zip(row) {
                param.apply(&mut sow, prior.inverse_cdf(u)?)?;
            }
            Ok(sow)
        })
        .collect()
}

/// Arithmetic mean over the ensemble.
pub fn ensemble_expectation(values: &[f64]) -> Result<f64> {
    crate::stats::mean(values)
}
