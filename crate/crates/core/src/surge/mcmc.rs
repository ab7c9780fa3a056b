//! Random-walk Metropolis–Hastings over GEV parameters.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gev::{log_likelihood_unchecked, GevParams};
use super::mle::GevFit;
use crate::error::{Error, Result};
use crate::rng::{labels, substream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcSettings {
    pub iterations: usize,
    pub burn_in_fraction: f64,
    /// Prior standard deviations as a multiple of the MLE standard errors.
    pub prior_sd_multiplier: f64,
}

impl Default for McmcSettings {
    fn default() -> Self {
        Self {
            iterations: 100_000,
            burn_in_fraction: 0.1,
            prior_sd_multiplier: 10.0,
        }
    }
}

impl McmcSettings {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(Error::config("burn_in_fraction must be in [0, 1)"));
        }
        if self.iterations < 2 || self.burn_in(self.iterations) >= self.iterations {
            return Err(Error::config("MCMC needs more iterations than burn-in"));
        }
        if !(self.prior_sd_multiplier > 0.0) {
            return Err(Error::config("prior_sd_multiplier must be > 0"));
        }
        Ok(())
    }

    pub fn burn_in(&self, iterations: usize) -> usize {
        (iterations as f64 * self.burn_in_fraction).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McmcChain {
    pub samples: Vec<GevParams>,
    /// Acceptance rate after burn-in.
    pub acceptance_rate: f64,
    pub burn_in: usize,
    /// Acceptance rate fell outside (0.05, 0.8).
    pub tuning_warning: bool,
}

impl McmcChain {
    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::InvalidChain("chain has no samples".into()));
        }
        if !(self.acceptance_rate > 0.0 && self.acceptance_rate < 1.0) {
            return Err(Error::InvalidChain(format!(
                "acceptance rate {} is not in (0, 1)",
                self.acceptance_rate
            )));
        }
        Ok(())
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.samples.iter().map(|p| p.as_array()[k]).collect()
    }
}

struct Target<'a> {
    maxima: &'a [f64],
    center: [f64; 3],
    prior_sd: [f64; 3],
}

impl Target<'_> {
    fn ln_posterior(&self, x: &[f64; 3]) -> f64 {
        if x[1] <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let prior: f64 = (0..3)
            .map(|k| -0.5 * ((x[k] - self.center[k]) / self.prior_sd[k]).powi(2))
            .sum();
        prior + log_likelihood_unchecked(self.maxima, &GevParams::from_array(*x))
    }
}

/// Sample the posterior of GEV parameters given block maxima.
///
/// Priors are independent normals centered at the MLE. Proposals are
/// Gaussian with per-parameter scale `2.4/√3 · SE`, multiplied by a global
/// factor tuned during burn-in toward a 0.234 acceptance rate.
pub fn mcmc_gev(maxima: &[f64], init: &GevFit, settings: &McmcSettings, seed: u64) -> Result<McmcChain> {
    settings.validate()?;
    init.params.validate()?;
    let base_scale: Vec<f64> = init.standard_errors.iter().map(|se| 2.4 / 3f64.sqrt() * se).collect();
    if base_scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::InvalidChain(format!(
            "zero-width proposal (standard errors {:?})",
            init.standard_errors
        )));
    }
    let target = Target {
        maxima,
        center: init.params.as_array(),
        prior_sd: init.standard_errors.map(|s| s * settings.prior_sd_multiplier),
    };
    let burn_in = settings.burn_in(settings.iterations);
    let mut rng = substream(seed, labels::MCMC, 0);
    let mut x = init.params.as_array();
    let mut lp = target.ln_posterior(&x);
    if !lp.is_finite() {
        return Err(Error::InvalidChain("initial state has zero posterior density".into()));
    }
    let mut log_factor = 0.0f64;
    let mut window_accepts = 0usize;
    let mut accepted = 0usize;
    const WINDOW: usize = 100;
    let mut samples = Vec::with_capacity(settings.iterations - burn_in);
    for it in 0..settings.iterations {
        let factor = log_factor.exp();
        let mut proposal = x;
        for k in 0..3 {
            let z: f64 = StandardNormal.sample(&mut rng);
            proposal[k] += factor * base_scale[k] * z;
        }
        let lp_new = target.ln_posterior(&proposal);
        let u: f64 = rng.random();
        let accept = lp_new.is_finite() && u.ln() < lp_new - lp;
        if accept {
            x = proposal;
            lp = lp_new;
        }
        if it < burn_in {
            window_accepts += usize::from(accept);
            if (it + 1) % WINDOW == 0 {
                let rate = window_accepts as f64 / WINDOW as f64;
                log_factor += rate - 0.234;
                window_accepts = 0;
            }
        } else {
            accepted += usize::from(accept);
            samples.push(GevParams::from_array(x));
        }
    }
    let acceptance_rate = accepted as f64 / samples.len() as f64;
    let tuning_warning = !(acceptance_rate > 0.05 && acceptance_rate < 0.8);
    if tuning_warning {
        tracing::warn!(
            acceptance_rate,
            "MCMC acceptance rate outside (0.05, 0.8); proposal may be poorly tuned"
        );
    }
    let chain = McmcChain {
        samples,
        acceptance_rate,
        burn_in,
        tuning_warning,
    };
    chain.validate()?;
    Ok(chain)
}

/// Independent chains from consecutive sub-seeds, concatenated in seed order.
pub fn mcmc_chains(maxima: &[f64], init: &GevFit, settings: &McmcSettings, seed: u64, chains: usize) -> Result<McmcChain> {
    if chains == 0 {
        return Err(Error::config("need at least one chain"));
    }
    let runs: Vec<McmcChain> = (0..chains)
        .into_par_iter()
        .map(|c| mcmc_gev(maxima, init, settings, crate::rng::child_seed(seed, &format!("chain-{c}"))))
        .collect::<Result<_>>()?;
    let total: usize = runs.iter().map(|r| r.samples.len()).sum();
    let acceptance_rate = runs.iter().map(|r| r.acceptance_rate * r.samples.len() as f64).sum::<f64>() / total as f64;
    Ok(McmcChain {
        samples: runs.iter().flat_map(|r| r.samples.iter().copied()).collect(),
        acceptance_rate,
        burn_in: runs[0].burn_in,
        tuning_warning: runs.iter().any(|r| r.tuning_warning),
    })
}
