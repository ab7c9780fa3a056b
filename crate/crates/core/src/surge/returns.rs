//! HPD intervals and return-level curves.

use serde::{Deserialize, Serialize};

use super::gev::GevParams;
use super::mcmc::McmcChain;
use super::mle::GevFit;
use crate::error::{Error, Result};
use crate::stats;

/// Shortest window of sorted samples holding `⌈level·n⌉` of them; the
/// leftmost such window on ties.
pub fn hpd_interval(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::degenerate("HPD interval of no samples"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain {
            value: level,
            domain: "(0, 1)",
        });
    }
    let sorted = stats::sorted_copy(samples);
    Ok(hpd_sorted(&sorted, level))
}

fn hpd_sorted(sorted: &[f64], level: f64) -> (f64, f64) {
    let n = sorted.len();
    let m = ((level * n as f64).ceil() as usize).clamp(1, n);
    let mut best = 0;
    let mut width = f64::INFINITY;
    for i in 0..=n - m {
        let w = sorted[i + m - 1] - sorted[i];
        if w < width {
            width = w;
            best = i;
        }
    }
    (sorted[best], sorted[best + m - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalKind {
    Confidence,
    Credible,
    /// No interval; bounds equal the point estimate.
    Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReturnLevelPoint {
    /// Return period (years).
    pub period: f64,
    /// Expected return level (mm).
    pub expected: f64,
    pub lo90: f64,
    pub hi90: f64,
    pub lo95: f64,
    pub hi95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnLevelCurve {
    pub kind: IntervalKind,
    pub points: Vec<ReturnLevelPoint>,
}

/// Default periods for plotted curves, up to 1/10,000.
pub fn default_return_periods() -> Vec<f64> {
    vec![
        1.5, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0, 2000.0, 5000.0, 10_000.0,
    ]
}

/// Posterior mean and 90%/95% HPD bounds of the return level at each period.
pub fn return_level_posterior(chain: &McmcChain, periods: &[f64]) -> Result<ReturnLevelCurve> {
    chain.validate()?;
    let points = periods
        .iter()
        .map(|&t| {
            let levels: Vec<f64> = chain.samples.iter().map(|p| p.return_level(t)).collect::<Result<_>>()?;
            let sorted = stats::sorted_copy(&levels);
            let (lo90, hi90) = hpd_sorted(&sorted, 0.9);
            let (lo95, hi95) = hpd_sorted(&sorted, 0.95);
            let expected = stats::mean(&levels)?.clamp(sorted[0], sorted[sorted.len() - 1]);
            Ok(ReturnLevelPoint {
                period: t,
                expected,
                lo90: lo90.min(expected),
                hi90: hi90.max(expected),
                lo95: lo95.min(expected),
                hi95: hi95.max(expected),
            })
        })
        .collect::<Result<_>>()?;
    Ok(ReturnLevelCurve {
        kind: IntervalKind::Credible,
        points,
    })
}

/// MLE return levels with delta-method normal confidence intervals.
pub fn return_level_mle(fit: &GevFit, periods: &[f64]) -> Result<ReturnLevelCurve> {
    let x0 = fit.params.as_array();
    let points = periods
        .iter()
        .map(|&t| {
            let level = fit.params.return_level(t)?;
            let mut grad = [0.0; 3];
            for (k, g) in grad.iter_mut().enumerate() {
                let h = 1e-6 * x0[k].abs().max(1e-3);
                let mut up = x0;
                up[k] += h;
                let mut down = x0;
                down[k] -= h;
                *g = (GevParams::from_array(up).return_level(t)? - GevParams::from_array(down).return_level(t)?) / (2.0 * h);
            }
            let var: f64 = (0..3)
                .flat_map(|i| (0..3).map(move |j| (i, j)))
                .map(|(i, j)| grad[i] * fit.covariance[i][j] * grad[j])
                .sum();
            let sd = var.max(0.0).sqrt();
            Ok(ReturnLevelPoint {
                period: t,
                expected: level,
                lo90: level - 1.6448536269514722 * sd,
                hi90: level + 1.6448536269514722 * sd,
                lo95: level - 1.959963984540054 * sd,
                hi95: level + 1.959963984540054 * sd,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ReturnLevelCurve {
        kind: IntervalKind::Confidence,
        points,
    })
}

/// Straight line in `(level, ln exceedance frequency)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SemilogFit {
    pub intercept: f64,
    pub slope: f64,
}

impl SemilogFit {
    pub fn return_level(&self, period: f64) -> f64 {
        (-(period.ln()) - self.intercept) / self.slope
    }

    pub fn curve(&self, periods: &[f64]) -> ReturnLevelCurve {
        ReturnLevelCurve {
            kind: IntervalKind::Point,
            points: periods
                .iter()
                .map(|&t| {
                    let v = self.return_level(t);
                    ReturnLevelPoint {
                        period: t,
                        expected: v,
                        lo90: v,
                        hi90: v,
                        lo95: v,
                        hi95: v,
                    }
                })
                .collect(),
        }
    }
}

/// Least-squares fit of `ln p` on level using Weibull exceedance plotting
/// positions `j/(n+1)` for the `j`-th largest maximum.
pub fn fit_semilog(maxima: &[f64]) -> Result<SemilogFit> {
    if maxima.len() < 2 {
        return Err(Error::degenerate("semi-log fit needs >= 2 maxima"));
    }
    let mut desc = stats::sorted_copy(maxima);
    desc.reverse();
    let n = desc.len() as f64;
    let ys: Vec<f64> = (1..=desc.len()).map(|j| (j as f64 / (n + 1.0)).ln()).collect();
    let mx = stats::mean(&desc)?;
    let my = stats::mean(&ys)?;
    let sxx: f64 = desc.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::degenerate("semi-log fit on constant maxima"));
    }
    let sxy: f64 = desc.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(SemilogFit {
        intercept: my - slope * mx,
        slope,
    })
}
