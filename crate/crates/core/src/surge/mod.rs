//! Storm-surge extremes: annual block maxima, GEV fitting and sampling,
//! return levels, and the surge-based flood hazard.

mod gev;
mod mcmc;
mod mle;
mod returns;

pub use gev::{gev_log_likelihood, GevParams, GUMBEL_THRESHOLD};
pub use mcmc::{mcmc_chains, mcmc_gev, McmcChain, McmcSettings};
pub use mle::fit_gev_mle;
pub use mle::GevFit;
pub use returns::{
    default_return_periods, fit_semilog, hpd_interval, return_level_mle, return_level_posterior, IntervalKind, ReturnLevelCurve,
    ReturnLevelPoint, SemilogFit,
};

use serde::{Deserialize, Serialize};

use crate::core_model::FloodHazard;
use crate::error::{Error, Result};
use crate::sealevel::TideGaugeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnnualMaximum {
    pub year: i32,
    /// Year's maximum minus the year's mean level (mm).
    pub value: f64,
    pub count: usize,
}

/// Detrended annual maxima; years with fewer than `min_obs` observations are skipped.
pub fn block_maxima(series: &TideGaugeSeries, min_obs: usize) -> Result<Vec<AnnualMaximum>> {
    let years = series.by_year();
    if years.len() < 2 {
        return Err(Error::degenerate(format!(
            "block maxima need >= 2 calendar years, got {}",
            years.len()
        )));
    }
    let out: Vec<AnnualMaximum> = years
        .into_iter()
        .filter(|(_, obs)| obs.len() >= min_obs.max(1))
        .map(|(year, obs)| {
            let mean = obs.iter().map(|o| o.level_mm).sum::<f64>() / obs.len() as f64;
            let max = obs.iter().map(|o| o.level_mm).fold(f64::NEG_INFINITY, f64::max);
            AnnualMaximum {
                year,
                value: max - mean,
                count: obs.len(),
            }
        })
        .collect();
    if out.is_empty() {
        return Err(Error::degenerate(format!("no year has >= {min_obs} observations")));
    }
    Ok(out)
}

/// Flood hazard from a GEV of surge anomalies: the dike fails when the surge
/// exceeds `crest_level + units_per_meter · H_E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurgeHazard {
    pub gev: GevParams,
    /// Surge anomaly (mm) the dike withstands at zero effective height.
    pub crest_level: f64,
    /// Level units per meter of dike height (1000 for mm).
    pub units_per_meter: f64,
}

impl SurgeHazard {
    /// Crest set so that the annual exceedance at zero height equals `p0`.
    pub fn matching_frequency(gev: GevParams, p0: f64, units_per_meter: f64) -> Result<Self> {
        Ok(Self {
            gev,
            crest_level: gev.quantile(1.0 - p0)?,
            units_per_meter,
        })
    }
}

impl FloodHazard for SurgeHazard {
    fn exceedance(&self, effective_height: f64) -> f64 {
        let p = self.gev.sf(self.crest_level + self.units_per_meter * effective_height);
        if p.is_nan() {
            1.0
        } else {
            p.clamp(0.0, 1.0)
        }
    }
}
