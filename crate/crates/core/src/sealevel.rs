//! Sea-level rise: quadratic trend fit, autocorrelated residual simulation,
//! abrupt-rise term and rejection calibration against an expert assessment.
//!
//! Levels are in meters and time is measured in years since the reference
//! year, the last year of the observed record.

use chrono::{Datelike, NaiveDateTime};
use nalgebra::{DMatrix, DVector, Matrix3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{labels, substream};
use crate::stats;
use crate::uncertainty::PriorSpec;

/// How the abrupt term enters the projection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AbruptMode {
    /// `c*` is an added rate after onset: `c*·max(0, t − t*)`.
    #[default]
    Ramp,
    /// `c*` is read as a level (m) added once `t ≥ t*`.
    Step,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlrParams {
    /// Level at the reference year (m).
    pub a: f64,
    /// Rate at the reference year (m/yr).
    pub b: f64,
    /// Acceleration (m/yr²).
    pub c: f64,
    /// Rate increase after onset (m/yr).
    pub c_star: f64,
    /// Calendar year of onset.
    pub t_star: f64,
    /// Calendar year at which `t = 0`.
    pub reference_year: f64,
    /// Land subsidence η (m/yr).
    pub subsidence: f64,
    /// Linear sea-level rise φ (m/yr) used by the simpler model versions.
    pub linear_rate: f64,
    #[serde(default)]
    pub abrupt: AbruptMode,
}

impl Default for SlrParams {
    fn default() -> Self {
        Self {
            a: 0.0,
            b: 0.0,
            c: 0.0,
            c_star: 0.0,
            t_star: 2090.0,
            reference_year: 2016.0,
            subsidence: 0.002,
            linear_rate: 0.008,
            abrupt: AbruptMode::Ramp,
        }
    }
}

impl SlrParams {
    /// Onset expressed in years since the reference year.
    pub fn onset_offset(&self) -> f64 {
        self.t_star - self.reference_year
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.a,
            self.b,
            self.c,
            self.c_star,
            self.t_star,
            self.reference_year,
            self.subsidence,
            self.linear_rate,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sea-level parameters must be finite"));
        }
        if self.c_star < 0.0 {
            return Err(Error::invalid(format!("c_star must be >= 0, got {}", self.c_star)));
        }
        Ok(())
    }

    /// Linear baseline `φ·t`.
    pub fn linear_rise(&self, t: f64) -> f64 {
        self.linear_rate * t
    }
}

/// `a + b·t + c·t² + abrupt(t)`.
pub fn slr_project(p: &SlrParams, t: f64) -> f64 {
    let base = p.a + p.b * t + p.c * t * t;
    let since_onset = t - p.onset_offset();
    let abrupt = match p.abrupt {
        AbruptMode::Ramp => p.c_star * since_onset.max(0.0),
        AbruptMode::Step => {
            if since_onset >= 0.0 {
                p.c_star
            } else {
                0.0
            }
        }
    };
    base + abrupt
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub time: NaiveDateTime,
    pub level_mm: f64,
}

/// Calendar-year aggregate of a tide-gauge record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnnualValue {
    pub year: i32,
    pub level_mm: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TideGaugeSeries {
    observations: Vec<Observation>,
    /// Rows dropped at ingestion because they held the missing-value sentinel.
    pub dropped_sentinels: usize,
}

impl TideGaugeSeries {
    pub fn new(observations: Vec<Observation>) -> Result<Self> {
        for (i, w) in observations.windows(2).enumerate() {
            if w[1].time <= w[0].time {
                return Err(Error::Data(format!(
                    "timestamps must be strictly increasing (observation {} at {} follows {})",
                    i + 1,
                    w[1].time,
                    w[0].time
                )));
            }
        }
        if let Some(o) = observations.iter().find(|o| !o.level_mm.is_finite()) {
            return Err(Error::Data(format!("non-finite level at {}", o.time)));
        }
        Ok(Self {
            observations,
            dropped_sentinels: 0,
        })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Observations grouped by calendar year, in order.
    pub fn by_year(&self) -> Vec<(i32, &[Observation])> {
        let mut out = Vec::new();
        let obs = &self.observations;
        let mut start = 0;
        while start < obs.len() {
            let year = obs[start].time.year();
            let mut end = start + 1;
            while end < obs.len() && obs[end].time.year() == year {
                end += 1;
            }
            out.push((year, &obs[start..end]));
            start = end;
        }
        out
    }

    pub fn annual_means(&self) -> Vec<AnnualValue> {
        self.by_year()
            .into_iter()
            .map(|(year, obs)| AnnualValue {
                year,
                level_mm: obs.iter().map(|o| o.level_mm).sum::<f64>() / obs.len() as f64,
                count: obs.len(),
            })
            .collect()
    }
}

/// Least-squares quadratic in `t` with its design kept for cheap refits.
#[derive(Debug, Clone)]
pub struct QuadraticFit {
    /// `[a, b, c]`.
    pub coefficients: [f64; 3],
    pub standard_errors: [f64; 3],
    pub residuals: Vec<f64>,
    pub times: Vec<f64>,
    /// `(XᵀX)⁻¹Xᵀ`, mapping an observation vector to coefficients.
    projector: DMatrix<f64>,
}

impl QuadraticFit {
    /// Coefficients of the least-squares fit to `values` at the same times.
    pub fn refit(&self, values: &[f64]) -> [f64; 3] {
        let v = self.projector.clone() * DVector::from_column_slice(values);
        [v[0], v[1], v[2]]
    }

    pub fn fitted(&self, t: f64) -> f64 {
        let [a, b, c] = self.coefficients;
        a + b * t + c * t * t
    }
}

pub fn fit_quadratic(times: &[f64], values: &[f64]) -> Result<QuadraticFit> {
    let n = times.len();
    if n != values.len() {
        return Err(Error::invalid("times and values differ in length"));
    }
    if n < 3 {
        return Err(Error::degenerate(format!("quadratic fit needs >= 3 points, got {n}")));
    }
    if times.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite value in regression input".into()));
    }
    let x = DMatrix::from_fn(n, 3, |i, j| times[i].powi(j as i32));
    let qr = x.clone().qr();
    let r = qr.r();
    let r3: Matrix3<f64> = r.fixed_view::<3, 3>(0, 0).into_owned();
    for j in 0..3 {
        let col_norm = x.column(j).norm();
        if !(r3[(j, j)].abs() > 1e-10 * col_norm.max(1.0)) {
            return Err(Error::degenerate("rank-deficient design: fewer than three distinct years"));
        }
    }
    let r_inv = r3.try_inverse().ok_or_else(|| Error::degenerate("rank-deficient design"))?;
    let q = qr.q();
    let projector = DMatrix::from_fn(3, 3, |i, j| r_inv[(i, j)]) * q.transpose();
    let coef = projector.clone() * DVector::from_column_slice(values);
    let coefficients = [coef[0], coef[1], coef[2]];
    let residuals: Vec<f64> = times
        .iter()
        .zip(values)
        .map(|(&t, &y)| y - (coefficients[0] + coefficients[1] * t + coefficients[2] * t * t))
        .collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let s2 = if n > 3 { rss / (n - 3) as f64 } else { 0.0 };
    let cov = r_inv * r_inv.transpose() * s2;
    Ok(QuadraticFit {
        coefficients,
        standard_errors: [cov[(0, 0)].sqrt(), cov[(1, 1)].sqrt(), cov[(2, 2)].sqrt()],
        residuals,
        times: times.to_vec(),
        projector,
    })
}

/// Quadratic trend of a record's annual means, in meters, with `t = 0` at the
/// last year of the record.
#[derive(Debug, Clone)]
pub struct SlrFit {
    pub reference_year: i32,
    pub first_year: i32,
    pub quadratic: QuadraticFit,
}

pub fn fit_polynomial(annual_means: &[AnnualValue]) -> Result<SlrFit> {
    let last = annual_means
        .last()
        .ok_or_else(|| Error::degenerate("no annual means to fit"))?;
    let reference_year = last.year;
    let times: Vec<f64> = annual_means.iter().map(|v| f64::from(v.year - reference_year)).collect();
    let levels: Vec<f64> = annual_means.iter().map(|v| v.level_mm / 1000.0).collect();
    Ok(SlrFit {
        reference_year,
        first_year: annual_means[0].year,
        quadratic: fit_quadratic(&times, &levels)?,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ResidualModel {
    /// AR(1) with Gaussian innovations fitted to the residuals.
    #[default]
    Ar1,
    /// Moving-block bootstrap of the residuals.
    Block { length: usize },
}

struct ResidualSimulator<'a> {
    residuals: &'a [f64],
    model: ResidualModel,
    rho: f64,
    sd: f64,
}

impl<'a> ResidualSimulator<'a> {
    fn new(residuals: &'a [f64], model: ResidualModel) -> Result<Self> {
        if residuals.len() < 10 {
            return Err(Error::degenerate(format!(
                "residual simulation needs >= 10 residuals, got {}",
                residuals.len()
            )));
        }
        if let ResidualModel::Block { length } = model {
            if length == 0 || length > residuals.len() {
                return Err(Error::config(format!("block length must be in 1..={}", residuals.len())));
            }
        }
        let n = residuals.len() as f64;
        let m = residuals.iter().sum::<f64>() / n;
        let sd = (residuals.iter().map(|r| (r - m).powi(2)).sum::<f64>() / n).sqrt();
        let rho = stats::lag1_autocorrelation(residuals).clamp(-0.99, 0.99);
        Ok(Self {
            residuals,
            model,
            rho,
            sd,
        })
    }

    fn path(&self, rng: &mut impl Rng) -> Vec<f64> {
        let n = self.residuals.len();
        match self.model {
            ResidualModel::Ar1 => {
                let innov = self.sd * (1.0 - self.rho * self.rho).sqrt();
                let mut out = Vec::with_capacity(n);
                let z: f64 = StandardNormal.sample(rng);
                let mut x = self.sd * z;
                out.push(x);
                for _ in 1..n {
                    let z: f64 = StandardNormal.sample(rng);
                    x = self.rho * x + innov * z;
                    out.push(x);
                }
                out
            }
            ResidualModel::Block { length } => {
                let mut out = Vec::with_capacity(n);
                while out.len() < n {
                    let start = rng.random_range(0..=n - length);
                    out.extend_from_slice(&self.residuals[start..start + length]);
                }
                out.truncate(n);
                out
            }
        }
    }
}

/// `n` simulated residual trajectories with the autocorrelation of `residuals`.
pub fn bootstrap_hindcasts(residuals: &[f64], n: usize, model: ResidualModel, seed: u64) -> Result<Vec<Vec<f64>>> {
    let sim = ResidualSimulator::new(residuals, model)?;
    Ok((0..n)
        .into_par_iter()
        .map(|i| sim.path(&mut substream(seed, labels::BOOTSTRAP, i as u64)))
        .collect())
}

/// Settings for generating and calibrating the sea-level parameter ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSettings {
    pub members: usize,
    pub residual_model: ResidualModel,
    pub abrupt: AbruptMode,
    /// Range of `c*` (m/yr).
    pub c_star_range: [f64; 2],
    /// Range of the onset year; the lower end is raised to the reference year.
    pub t_star_range: [f64; 2],
    pub subsidence: f64,
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        Self {
            members: 55_000,
            residual_model: ResidualModel::Ar1,
            abrupt: AbruptMode::Ramp,
            c_star_range: [0.0, 0.035],
            t_star_range: [2015.0, 2090.0],
            subsidence: 0.002,
        }
    }
}

/// Joint draw of trend parameters and abrupt-rise terms.
///
/// Each member adds one simulated residual path to the fitted curve and
/// refits; `a` is reported relative to the central fit, so the central
/// record sits at level 0 in the reference year.
pub fn parameter_ensemble(fit: &SlrFit, settings: &EnsembleSettings, seed: u64) -> Result<Vec<SlrParams>> {
    let [c_lo, c_hi] = settings.c_star_range;
    if !(c_lo >= 0.0 && c_hi >= c_lo) {
        return Err(Error::config(format!(
            "c_star range must satisfy 0 <= low <= high, got {c_lo}..{c_hi}"
        )));
    }
    let reference_year = f64::from(fit.reference_year);
    let t_lo = settings.t_star_range[0].max(reference_year);
    let t_hi = settings.t_star_range[1];
    if !(t_hi >= t_lo) {
        return Err(Error::config(format!(
            "onset range {:?} ends before the reference year {reference_year}",
            settings.t_star_range
        )));
    }
    let sim = ResidualSimulator::new(&fit.quadratic.residuals, settings.residual_model)?;
    let [_, b0, c0] = fit.quadratic.coefficients;
    Ok((0..settings.members)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, labels::BOOTSTRAP, i as u64);
            let path = sim.path(&mut rng);
            let [da, db, dc] = fit.quadratic.refit(&path);
            let c_star = c_lo + (c_hi - c_lo) * rng.random::<f64>();
            let t_star = t_lo + (t_hi - t_lo) * rng.random::<f64>();
            SlrParams {
                a: da,
                b: b0 + db,
                c: c0 + dc,
                c_star,
                t_star,
                reference_year,
                subsidence: settings.subsidence,
                linear_rate: SlrParams::default().linear_rate,
                abrupt: settings.abrupt,
            }
        })
        .collect())
}

/// Each member's level in calendar year `year`.
pub fn projections_at(members: &[SlrParams], year: f64) -> Vec<f64> {
    members.iter().map(|p| slr_project(p, year - p.reference_year)).collect()
}

/// Histogram density estimate with Freedman–Diaconis bins.
struct HistogramDensity {
    low: f64,
    width: f64,
    density: Vec<f64>,
}

impl HistogramDensity {
    fn new(samples: &[f64]) -> Self {
        let sorted = stats::sorted_copy(samples);
        let n = sorted.len() as f64;
        let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
        let iqr = stats::quantile_sorted(&sorted, 0.75) - stats::quantile_sorted(&sorted, 0.25);
        let span = max - min;
        let bins = if span > 0.0 && iqr > 0.0 {
            ((span / (2.0 * iqr * n.powf(-1.0 / 3.0))).ceil() as usize).clamp(1, 100_000)
        } else {
            1
        };
        let width = if span > 0.0 { span / bins as f64 } else { 1.0 };
        let mut counts = vec![0usize; bins];
        for &x in &sorted {
            counts[Self::bin(min, width, bins, x)] += 1;
        }
        let density = counts.into_iter().map(|c| c as f64 / (n * width)).collect();
        Self {
            low: min,
            width,
            density,
        }
    }

    fn bin(low: f64, width: f64, bins: usize, x: f64) -> usize {
        (((x - low) / width).floor().max(0.0) as usize).min(bins - 1)
    }

    fn at(&self, x: f64) -> f64 {
        self.density[Self::bin(self.low, self.width, self.density.len(), x)]
    }
}

/// Indices of proposal members kept by rejection against `assessment`.
///
/// The proposal density is a histogram of `projections`. Each member gets
/// weight `f(x)/g(x)` where `f` is the assessment density before truncation,
/// zeroed outside the assessment's bounds, and is accepted when
/// `u·M < weight` with `M` the largest untruncated weight.
pub fn rejection_calibrate(projections: &[f64], assessment: &PriorSpec, min_accepted: usize, seed: u64) -> Result<Vec<usize>> {
    if projections.is_empty() {
        return Err(Error::degenerate("no projections to calibrate"));
    }
    if projections.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite projection".into()));
    }
    assessment.validate()?;
    let (lo, hi) = assessment.bound_pair();
    let g = HistogramDensity::new(projections);
    let raw: Vec<f64> = projections
        .iter()
        .map(|&x| Ok(assessment.untruncated_pdf(x)? / g.at(x)))
        .collect::<Result<_>>()?;
    let envelope = raw.iter().copied().fold(0.0, f64::max);
    let mut rng = substream(seed, labels::CALIBRATION, 0);
    let mut accepted = Vec::new();
    for (j, (&x, &w)) in projections.iter().zip(&raw).enumerate() {
        let u: f64 = rng.random();
        let inside = x >= lo && x <= hi;
        if inside && envelope > 0.0 && u * envelope < w {
            accepted.push(j);
        }
    }
    if accepted.len() < min_accepted || accepted.is_empty() {
        return Err(Error::Calibration {
            accepted: accepted.len(),
            floor: min_accepted,
        });
    }
    Ok(accepted)
}

/// Default expert assessment of sea level in the projection year.
pub fn default_assessment() -> PriorSpec {
    PriorSpec::beta_scaled(2.4, 2.6, 0.0, 2.5)
}

/// Fitted record, proposal ensemble and its calibrated subset.
#[derive(Debug, Clone)]
pub struct SlrCalibration {
    pub fit: SlrFit,
    pub projection_year: f64,
    pub proposal_size: usize,
    pub members: Vec<SlrParams>,
    pub projections: Vec<f64>,
}

impl SlrCalibration {
    pub fn run(
        annual_means: &[AnnualValue],
        settings: &EnsembleSettings,
        projection_year: f64,
        assessment: &PriorSpec,
        min_accepted: usize,
        seed: u64,
    ) -> Result<Self> {
        let fit = fit_polynomial(annual_means)?;
        let proposal = parameter_ensemble(&fit, settings, seed)?;
        let at_year = projections_at(&proposal, projection_year);
        let keep = rejection_calibrate(&at_year, assessment, min_accepted, seed)?;
        tracing::info!(proposal = proposal.len(), accepted = keep.len(), "sea-level calibration");
        Ok(Self {
            fit,
            projection_year,
            proposal_size: proposal.len(),
            members: keep.iter().map(|&i| proposal[i]).collect(),
            projections: keep.iter().map(|&i| at_year[i]).collect(),
        })
    }

    /// Central 95% range of a calibrated parameter.
    pub fn central_range(&self, get: impl Fn(&SlrParams) -> f64) -> (f64, f64) {
        let v: Vec<f64> = self.members.iter().map(get).collect();
        let s = stats::sorted_copy(&v);
        (stats::quantile_sorted(&s, 0.025), stats::quantile_sorted(&s, 0.975))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_statistic, mean};
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn params(a: f64, b: f64, c: f64, c_star: f64, onset: f64) -> SlrParams {
        SlrParams {
            a,
            b,
            c,
            c_star,
            t_star: 2016.0 + onset,
            reference_year: 2016.0,
            ..SlrParams::default()
        }
    }

    #[test]
    fn projection_examples() {
        let p = params(0.3, 0.01, 0.001, 0.02, 10.0);
        assert_eq!(slr_project(&p, 0.0), 0.3);
        let lin = params(0.0, 0.008, 0.0, 0.0, 0.0);
        assert!((slr_project(&lin, 87.5) - 0.70).abs() < 1e-12);
        let ramp = params(0.05, 0.002, 0.0, 0.01, 50.0);
        assert!((slr_project(&ramp, 75.0) - 0.45).abs() < 1e-12);
        let mut step = ramp;
        step.abrupt = AbruptMode::Step;
        assert!((slr_project(&step, 75.0) - (0.05 + 0.15 + 0.01)).abs() < 1e-12);
    }

    /// Normal-equations solution by Cramer's rule, independent of the QR path.
    fn normal_equations(t: &[f64], y: &[f64]) -> [f64; 3] {
        let mut s = [0.0; 5];
        let mut r = [0.0; 3];
        for (&ti, &yi) in t.iter().zip(y) {
            for (k, sk) in s.iter_mut().enumerate() {
                *sk += ti.powi(k as i32);
            }
            for (k, rk) in r.iter_mut().enumerate() {
                *rk += yi * ti.powi(k as i32);
            }
        }
        let m = [[s[0], s[1], s[2]], [s[1], s[2], s[3]], [s[2], s[3], s[4]]];
        let det = |m: [[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let d = det(m);
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            let mut mk = m;
            for row in 0..3 {
                mk[row][k] = r[row];
            }
            *o = det(mk) / d;
        }
        out
    }

    #[test]
    fn exact_quadratic_and_constant() {
        let t: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = t.iter().map(|t| 1.0 + 2.0 * t + 3.0 * t * t).collect();
        let f = fit_quadratic(&t, &y).unwrap();
        for (got, want) in f.coefficients.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-9);
        }
        assert!(f.residuals.iter().all(|r| r.abs() < 1e-9));
        let c = fit_quadratic(&t, &[5.0; 10]).unwrap();
        assert!((c.coefficients[0] - 5.0).abs() < 1e-12);
        assert!(c.coefficients[1].abs() < 1e-12 && c.coefficients[2].abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_rejected() {
        assert!(matches!(fit_quadratic(&[3.0; 8], &[1.0; 8]), Err(Error::Degenerate(_))));
        assert!(matches!(
            fit_quadratic(&[1.0, 2.0, 1.0, 2.0], &[1.0; 4]),
            Err(Error::Degenerate(_))
        ));
        assert!(fit_quadratic(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn noisy_quadratic_recovery() {
        let mut rng = substream(5, "test", 0);
        let t: Vec<f64> = (-136..=0).map(f64::from).collect();
        let truth = [0.02, 0.0018, 4e-6];
        let y: Vec<f64> = t
            .iter()
            .map(|&t| {
                let z: f64 = StandardNormal.sample(&mut rng);
                truth[0] + truth[1] * t + truth[2] * t * t + 0.03 * z
            })
            .collect();
        let f = fit_quadratic(&t, &y).unwrap();
        let oracle = normal_equations(&t, &y);
        for k in 0..3 {
            assert!((f.coefficients[k] - oracle[k]).abs() <= 1e-9 * oracle[k].abs().max(1e-6));
            assert!((f.coefficients[k] - truth[k]).abs() < 3.0 * f.standard_errors[k]);
        }
        assert!(mean(&f.residuals).unwrap().abs() < 1e-10);
    }

    fn ar1(n: usize, rho: f64, seed: u64) -> Vec<f64> {
        let mut rng = substream(seed, "test-ar1", 0);
        let mut x = 0.0;
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                x = rho * x + z;
                x
            })
            .collect()
    }

    #[test]
    fn bootstrap_preserves_autocorrelation() {
        for (rho, model) in [
            (0.0, ResidualModel::Ar1),
            (0.5, ResidualModel::Ar1),
            (0.5, ResidualModel::Block { length: 8 }),
        ] {
            let source = ar1(2000, rho, 3);
            let src_rho = stats::lag1_autocorrelation(&source);
            let paths = bootstrap_hindcasts(&source, 300, model, 17).unwrap();
            let rhos: Vec<f64> = paths.iter().map(|p| stats::lag1_autocorrelation(p)).collect();
            let m = mean(&rhos).unwrap();
            assert!((m - src_rho).abs() < 0.1, "{model:?}: {m} vs {src_rho}");
            if rho == 0.5 {
                assert!((0.4..=0.6).contains(&m));
            }
        }
    }

    #[test]
    fn zero_residuals_give_identical_paths() {
        let paths = bootstrap_hindcasts(&[0.0; 40], 5, ResidualModel::Ar1, 1).unwrap();
        assert!(paths.iter().all(|p| p.iter().all(|&v| v == 0.0)));
        assert!(bootstrap_hindcasts(&[0.0; 9], 5, ResidualModel::Ar1, 1).is_err());
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let source = ar1(137, 0.3, 9);
        let a = bootstrap_hindcasts(&source, 50, ResidualModel::Ar1, 4).unwrap();
        let b = bootstrap_hindcasts(&source, 50, ResidualModel::Ar1, 4).unwrap();
        assert_eq!(a, b);
    }

    fn uniform_samples(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
        let mut rng = substream(seed, "test-uniform", 0);
        (0..n).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect()
    }

    #[test]
    fn calibration_against_matching_assessment_keeps_shape() {
        let proposal = uniform_samples(20_000, 0.0, 2.0, 1);
        let keep = rejection_calibrate(&proposal, &PriorSpec::uniform(0.0, 2.0), 100, 2).unwrap();
        assert!(keep.len() > 15_000);
        let kept: Vec<f64> = keep.iter().map(|&i| proposal[i]).collect();
        assert!(ks_statistic(&kept, |x| (x / 2.0).clamp(0.0, 1.0)) < 0.02);
    }

    #[test]
    fn calibration_hard_bounds() {
        let proposal = uniform_samples(20_000, 0.0, 2.0, 3);
        let keep = rejection_calibrate(&proposal, &PriorSpec::beta_scaled(2.0, 2.0, 0.9, 1.0), 10, 2).unwrap();
        assert!(keep.iter().all(|&i| (0.9..=1.0).contains(&proposal[i])));
        assert!(matches!(
            rejection_calibrate(&proposal, &PriorSpec::beta_scaled(2.0, 2.0, 5.0, 6.0), 10, 2),
            Err(Error::Calibration { accepted: 0, .. })
        ));
    }

    #[test]
    fn calibration_matches_beta_assessment() {
        // skewed proposal covering the assessment support
        let mut rng = substream(8, "test-proposal", 0);
        let proposal: Vec<f64> = (0..55_000).map(|_| 3.0 * rng.random::<f64>().powf(1.5)).collect();
        let assessment = default_assessment();
        let keep = rejection_calibrate(&proposal, &assessment, 5000, 11).unwrap();
        let kept: Vec<f64> = keep.iter().map(|&i| proposal[i]).collect();
        assert!(kept.len() >= 5000);
        assert!(ks_statistic(&kept, |x| assessment.cdf(x).unwrap()) < 0.05);
        assert!((mean(&kept).unwrap() - 1.2).abs() < 0.05);
    }

    #[test]
    fn ensemble_from_synthetic_record() {
        let mut rng = substream(2, "test-record", 0);
        let annual: Vec<AnnualValue> = (1880..=2016)
            .map(|year| {
                let t = f64::from(year - 2016);
                let z: f64 = StandardNormal.sample(&mut rng);
                AnnualValue {
                    year,
                    level_mm: 30.0 + 1.8 * t + 0.004 * t * t + 35.0 * z,
                    count: 1,
                }
            })
            .collect();
        let settings = EnsembleSettings {
            members: 5000,
            ..EnsembleSettings::default()
        };
        let cal = SlrCalibration::run(&annual, &settings, 2100.0, &default_assessment(), 500, 7).unwrap();
        assert_eq!(cal.fit.reference_year, 2016);
        assert!(cal.members.iter().all(|p| p.t_star >= 2016.0 && p.t_star <= 2090.0));
        assert!(cal.members.iter().all(|p| (0.0..=0.035).contains(&p.c_star)));
        assert!((mean(&cal.projections).unwrap() - 1.2).abs() < 0.1);
        let again = SlrCalibration::run(&annual, &settings, 2100.0, &default_assessment(), 500, 7).unwrap();
        assert_eq!(cal.members, again.members);
    }

    #[test]
    fn series_rejects_non_monotone_time() {
        let t = |y, h| NaiveDate::from_ymd_opt(y, 1, 1).unwrap().and_hms_opt(h, 0, 0).unwrap();
        let ok = TideGaugeSeries::new(vec![
            Observation {
                time: t(2000, 0),
                level_mm: 0.0,
            },
            Observation {
                time: t(2000, 3),
                level_mm: 10.0,
            },
            Observation {
                time: t(2001, 0),
                level_mm: 2.0,
            },
        ])
        .unwrap();
        let means = ok.annual_means();
        assert_eq!(means.len(), 2);
        assert_eq!(means[0].level_mm, 5.0);
        assert!(TideGaugeSeries::new(vec![
            Observation {
                time: t(2000, 3),
                level_mm: 0.0
            },
            Observation {
                time: t(2000, 3),
                level_mm: 1.0
            },
        ])
        .is_err());
    }

    proptest! {
        #[test]
        fn projection_continuous_at_onset(a in -0.1f64..0.1, b in -0.005f64..0.005, c in -1e-4f64..1e-4, cs in 0.0f64..0.05, onset in 0.0f64..80.0) {
            let p = params(a, b, c, cs, onset);
            let eps = 1e-7;
            prop_assert!((slr_project(&p, onset + eps) - slr_project(&p, onset - eps)).abs() < 1e-6);
        }

        #[test]
        fn no_abrupt_term_is_quadratic(a in -1.0f64..1.0, b in -0.01f64..0.01, c in -1e-3f64..1e-3, t in 0.0f64..200.0) {
            let p = params(a, b, c, 0.0, 10.0);
            prop_assert!((slr_project(&p, t) - (a + b * t + c * t * t)).abs() < 1e-12);
            let flat = params(a, 0.0, 0.0, 0.0, 10.0);
            prop_assert_eq!(slr_project(&flat, t), a);
        }

        #[test]
        fn tighter_support_never_accepts_more(lo in 0.0f64..0.8, hi in 1.2f64..2.0, shrink in 0.0f64..0.3, seed in 0u64..1000) {
            let proposal = uniform_samples(3000, 0.0, 2.0, seed);
            let wide = PriorSpec::normal(1.0, 0.4).truncated(Some(lo), Some(hi));
            let narrow = PriorSpec::normal(1.0, 0.4).truncated(Some(lo + shrink), Some(hi - shrink));
            let a = rejection_calibrate(&proposal, &wide, 0, seed).map(|v| v.len()).unwrap_or(0);
            let b = rejection_calibrate(&proposal, &narrow, 0, seed).map(|v| v.len()).unwrap_or(0);
            prop_assert!(b <= a);
        }
    }
}
