//! Synthetic tide-gauge records with known ground truth.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use rand::Rng;
use rand_distr::{Distribution, Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{labels, substream};
use crate::surge::GevParams;

/// Ground truth of a synthetic record. Levels are mm; the trend is
/// `a + b·t + c·t²` with `t` in years since the last year of the record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub start_year: i32,
    pub years: usize,
    pub cadence_hours: u32,
    /// Trend level at the last year (mm).
    pub a_mm: f64,
    /// Trend rate at the last year (mm/yr).
    pub b_mm_per_yr: f64,
    /// Trend acceleration (mm/yr²).
    pub c_mm_per_yr2: f64,
    /// Lag-1 autocorrelation of annual-mean anomalies.
    pub ar1_rho: f64,
    /// Marginal standard deviation of annual-mean anomalies (mm).
    pub ar1_sd_mm: f64,
    /// Standard deviation of ordinary observations around the annual mean (mm).
    pub obs_sd_mm: f64,
    /// Distribution of annual maxima above the annual mean; `null` for none.
    pub gev: Option<GevParams>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self::delfzijl_like(0)
    }
}

impl SynthSpec {
    /// 137 years at 3-hour cadence with GEV parameters at the centre of the
    /// plausible Delfzijl range.
    pub fn delfzijl_like(seed: u64) -> Self {
        Self {
            start_year: 1880,
            years: 137,
            cadence_hours: 3,
            a_mm: 0.0,
            b_mm_per_yr: 1.6,
            c_mm_per_yr2: 0.003,
            ar1_rho: 0.4,
            ar1_sd_mm: 35.0,
            obs_sd_mm: 250.0,
            gev: Some(GevParams {
                location: 2845.0,
                scale: 452.0,
                shape: -0.023,
            }),
            seed,
        }
    }

    /// As [`SynthSpec::delfzijl_like`] with a heavy upper tail.
    pub fn heavy_tail(seed: u64) -> Self {
        let mut s = Self::delfzijl_like(seed);
        s.gev = Some(GevParams {
            location: 2845.0,
            scale: 452.0,
            shape: 0.094,
        });
        s
    }

    pub fn last_year(&self) -> i32 {
        self.start_year + self.years as i32 - 1
    }

    pub fn trend_mm(&self, year: i32) -> f64 {
        let t = f64::from(year - self.last_year());
        self.a_mm + self.b_mm_per_yr * t + self.c_mm_per_yr2 * t * t
    }

    pub fn validate(&self) -> Result<()> {
        if self.years < 2 || self.cadence_hours == 0 {
            return Err(Error::invalid("synthetic record needs >= 2 years and a positive cadence"));
        }
        if !(self.ar1_rho.abs() < 1.0 && self.ar1_sd_mm >= 0.0 && self.obs_sd_mm >= 0.0) {
            return Err(Error::invalid("need |rho| < 1 and nonnegative noise levels"));
        }
        if let Some(g) = &self.gev {
            g.validate()?;
        }
        NaiveDate::from_ymd_opt(self.last_year() + 1, 1, 1).ok_or_else(|| Error::invalid("year out of range"))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthTruth {
    pub spec: SynthSpec,
    pub reference_year: i32,
    /// Per year: trend + AR(1) annual mean and the annual maximum above it (mm).
    pub annual: Vec<SynthYear>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SynthYear {
    pub year: i32,
    pub mean_mm: f64,
    pub surge_mm: f64,
}

/// Render the record as high-frequency CSV text plus its ground truth.
///
/// Each year holds ordinary observations scattered around the year's mean
/// and, when a GEV is given, one extreme. Values are re-centred so the
/// year's mean is exactly the trend plus the AR(1) anomaly and its maximum
/// sits exactly the GEV draw above it.
pub fn synth_tide_gauge(spec: &SynthSpec) -> Result<(String, SynthTruth)> {
    spec.validate()?;
    let mut anomaly_rng = substream(spec.seed, labels::SYNTH, u64::MAX);
    let innov = spec.ar1_sd_mm * (1.0 - spec.ar1_rho * spec.ar1_rho).sqrt();
    let mut anomaly = spec.ar1_sd_mm * {
        let z: f64 = StandardNormal.sample(&mut anomaly_rng);
        z
    };
    let mut csv = String::from("time,level_mm\n");
    let mut annual = Vec::with_capacity(spec.years);
    let step = Duration::hours(i64::from(spec.cadence_hours));
    for k in 0..spec.years {
        let year = spec.start_year + k as i32;
        if k > 0 {
            let z: f64 = StandardNormal.sample(&mut anomaly_rng);
            anomaly = spec.ar1_rho * anomaly + innov * z;
        }
        let mean = spec.trend_mm(year) + anomaly;
        let start = NaiveDate::from_ymd_opt(year, 1, 1)
            .and_then(|d| d.and_hms_opt(0, 0, 0))
            .expect("validated");
        let end = NaiveDate::from_ymd_opt(year + 1, 1, 1)
            .and_then(|d| d.and_hms_opt(0, 0, 0))
            .expect("validated");
        let mut times = Vec::new();
        let mut t = start;
        while t < end {
            times.push(t);
            t += step;
        }
        let n = times.len();
        let mut rng = substream(spec.seed, labels::SYNTH, k as u64);
        let mut dev: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                spec.obs_sd_mm * z
            })
            .collect();
        let mut surge = 0.0;
        if let (Some(gev), true) = (&spec.gev, n > 1) {
            let u: f64 = rng.sample(Open01);
            let g = gev.quantile(u)?;
            let x = rng.random_range(0..n);
            if g <= 0.0 {
                // a maximum cannot sit below the mean; flatten the year instead
                dev.iter_mut().for_each(|d| *d = 0.0);
            } else {
                loop {
                    let others: f64 = dev.iter().enumerate().filter(|&(i, _)| i != x).map(|(_, d)| d).sum();
                    dev[x] = (g * n as f64 + others) / (n - 1) as f64;
                    let m = dev.iter().sum::<f64>() / n as f64;
                    let top_other = dev
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != x)
                        .map(|(_, d)| *d)
                        .fold(f64::NEG_INFINITY, f64::max);
                    if top_other < dev[x] {
                        break;
                    }
                    // the draw is below the background noise: damp the background
                    for (i, d) in dev.iter_mut().enumerate() {
                        if i != x {
                            *d = m + (*d - m) * 0.5;
                        }
                    }
                }
            }
            surge = g.max(0.0);
        }
        let m = dev.iter().sum::<f64>() / n as f64;
        for (time, d) in times.iter().zip(&dev) {
            writeln!(csv, "{},{:.3}", time.format("%Y-%m-%dT%H:%M:%S"), mean + d - m).expect("write to string");
        }
        annual.push(SynthYear {
            year,
            mean_mm: mean,
            surge_mm: surge,
        });
    }
    Ok((
        csv,
        SynthTruth {
            spec: spec.clone(),
            reference_year: spec.last_year(),
            annual,
        },
    ))
}

/// Write the record to `path` and its truth to `<path>.truth.json`.
pub fn write_synthetic(spec: &SynthSpec, path: &Path) -> Result<PathBuf> {
    let (csv, truth) = synth_tide_gauge(spec)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, csv)?;
    let mut truth_path = path.as_os_str().to_owned();
    truth_path.push(".truth.json");
    let truth_path = PathBuf::from(truth_path);
    std::fs::write(&truth_path, serde_json::to_string_pretty(&truth)? + "\n")?;
    Ok(truth_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::config::DataFormat;
    use crate::io::tide_gauge::read_tide_gauge;
    use crate::surge::block_maxima;

    fn small(seed: u64) -> SynthSpec {
        SynthSpec {
            years: 6,
            cadence_hours: 24,
            ..SynthSpec::delfzijl_like(seed)
        }
    }

    #[test]
    fn quiet_record_sits_on_the_trend() {
        let spec = SynthSpec {
            ar1_sd_mm: 0.0,
            obs_sd_mm: 0.0,
            gev: None,
            ..small(1)
        };
        let (csv, _) = synth_tide_gauge(&spec).unwrap();
        let series = read_tide_gauge(csv.as_bytes(), "synth", DataFormat::HighFrequency).unwrap();
        for m in series.annual_means() {
            assert!((m.level_mm - spec.trend_mm(m.year)).abs() < 1e-3);
        }
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        assert_eq!(synth_tide_gauge(&small(3)).unwrap().0, synth_tide_gauge(&small(3)).unwrap().0);
        assert_ne!(synth_tide_gauge(&small(3)).unwrap().0, synth_tide_gauge(&small(4)).unwrap().0);
    }

    #[test]
    fn maxima_equal_the_gev_draws() {
        let (csv, truth) = synth_tide_gauge(&small(5)).unwrap();
        let series = read_tide_gauge(csv.as_bytes(), "synth", DataFormat::HighFrequency).unwrap();
        let bm = block_maxima(&series, 1).unwrap();
        assert_eq!(bm.len(), 6);
        for (m, t) in bm.iter().zip(&truth.annual) {
            assert!((m.value - t.surge_mm).abs() < 5e-3, "{} vs {}", m.value, t.surge_mm);
        }
        for (m, t) in series.annual_means().iter().zip(&truth.annual) {
            assert!((m.level_mm - t.mean_mm).abs() < 5e-4);
        }
    }
}
