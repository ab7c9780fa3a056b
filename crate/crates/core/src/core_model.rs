//! The van Dantzig economic flood model.
//!
//! A single decision variable, the heightening `X` of a dike ring, trades a
//! linear investment `k·X` against discounted expected flood damages. Damages
//! accrue every year `t = 1..=T` as the annual exceedance probability at the
//! effective crest height `H_E(t) = X − η·t − SLR(t)` times the protected
//! value `V`, discounted by `(1 + δ′)^−t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::ObjectiveVector;

/// Economic block: protected value, effective discount rate and cost per meter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EconomicParams {
    /// Value of goods inside the dike ring (guilders).
    pub value_of_goods: f64,
    /// Effective discount rate δ′ (fraction per year).
    pub discount_rate: f64,
    /// Cost of heightening by one meter, k (guilders/m).
    pub cost_rate: f64,
}

impl Default for EconomicParams {
    fn default() -> Self {
        Self {
            value_of_goods: 2e10,
            discount_rate: 0.02,
            cost_rate: 4.2e7,
        }
    }
}

impl EconomicParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.value_of_goods.is_finite() && self.value_of_goods >= 0.0) {
            return Err(Error::invalid(format!(
                "value of goods must be finite and >= 0, got {}",
                self.value_of_goods
            )));
        }
        if !(self.cost_rate.is_finite() && self.cost_rate > 0.0) {
            return Err(Error::invalid(format!(
                "cost rate must be finite and > 0, got {}",
                self.cost_rate
            )));
        }
        if !(self.discount_rate.is_finite() && self.discount_rate > -1.0) {
            return Err(Error::invalid(format!(
                "discount rate must be finite and > -1, got {}",
                self.discount_rate
            )));
        }
        Ok(())
    }
}

/// Exponential flood-frequency curve `p₀·exp(−α·H)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FloodFrequencyParams {
    /// Annual flood frequency at zero heightening, p₀.
    pub initial_frequency: f64,
    /// Exponential decay rate α (per meter).
    pub decay_rate: f64,
}

impl Default for FloodFrequencyParams {
    fn default() -> Self {
        Self {
            initial_frequency: 0.0038,
            decay_rate: 2.6,
        }
    }
}

impl FloodFrequencyParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.initial_frequency) {
            return Err(Error::invalid(format!(
                "initial flood frequency must lie in [0, 1], got {}",
                self.initial_frequency
            )));
        }
        if !(self.decay_rate.is_finite() && self.decay_rate > 0.0) {
            return Err(Error::invalid(format!(
                "flood frequency decay rate must be > 0, got {}",
                self.decay_rate
            )));
        }
        Ok(())
    }
}

/// Anything that turns an effective crest height (m) into an annual
/// exceedance probability.
pub trait FloodHazard {
    fn exceedance(&self, effective_height: f64) -> f64;
}

impl FloodHazard for FloodFrequencyParams {
    fn exceedance(&self, effective_height: f64) -> f64 {
        annual_flood_probability(self, effective_height)
    }
}

/// Heightening decision and planning horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DikePolicy {
    pub heightening: f64,
    pub horizon: u32,
}

impl DikePolicy {
    pub fn new(heightening: f64, horizon: u32) -> Result<Self> {
        let policy = Self { heightening, horizon };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.heightening.is_finite() && self.heightening >= 0.0) {
            return Err(Error::invalid(format!(
                "heightening must be finite and >= 0, got {}",
                self.heightening
            )));
        }
        if self.horizon < 1 {
            return Err(Error::invalid("horizon must be at least one year"));
        }
        Ok(())
    }
}

/// Effective heights `H_E(t)` for `t = 1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightTrajectory(pub Vec<f64>);

impl HeightTrajectory {
    pub fn compute(policy: &DikePolicy, subsidence: f64, slr_at: impl Fn(f64) -> f64) -> Self {
        Self(
            (1..=policy.horizon)
                .map(|t| effective_height(policy.heightening, f64::from(t), subsidence, &slr_at))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Investment cost `k·X`.
pub fn investment_cost(econ: &EconomicParams, policy: &DikePolicy) -> f64 {
    econ.cost_rate * policy.heightening
}

/// `H_E(t) = X − η·t − slr_at(t)`. Negative values mean the crest sits below
/// the reference flood level.
pub fn effective_height(heightening: f64, t: f64, subsidence: f64, slr_at: impl Fn(f64) -> f64) -> f64 {
    heightening - subsidence * t - slr_at(t)
}

/// `min(1, p₀·exp(−α·H_E))`, clamped to `[0, 1]`.
pub fn annual_flood_probability(freq: &FloodFrequencyParams, effective_height: f64) -> f64 {
    let p = freq.initial_frequency * (-freq.decay_rate * effective_height).exp();
    if p.is_nan() {
        return 1.0;
    }
    p.clamp(0.0, 1.0)
}

/// One pass over `t = 1..=T` producing all four objectives for one policy.
///
/// The flood probability is the time mean of the annual exceedances; the
/// damages are the discounted sum, accumulated in log space and saturated at
/// `f64::MAX` so finite inputs always give a finite result.
pub fn evaluate_policy(
    econ: &EconomicParams,
    hazard: &impl FloodHazard,
    policy: &DikePolicy,
    subsidence: f64,
    slr_at: impl Fn(f64) -> f64,
) -> ObjectiveVector {
    let log_growth = (1.0 + econ.discount_rate).ln();
    let log_value = econ.value_of_goods.ln();
    let mut prob_sum = 0.0;
    let mut damages = 0.0_f64;
    for step in 1..=policy.horizon {
        let t = f64::from(step);
        let h = effective_height(policy.heightening, t, subsidence, &slr_at);
        let p = hazard.exceedance(h);
        prob_sum += p;
        if p > 0.0 && econ.value_of_goods > 0.0 {
            let term = (p.ln() + log_value - t * log_growth).exp();
            damages = (damages + term).min(f64::MAX);
        }
    }
    let investment = investment_cost(econ, policy);
    ObjectiveVector {
        total_cost: (investment + damages).min(f64::MAX),
        investment,
        flood_probability: prob_sum / f64::from(policy.horizon),
        damages,
    }
}

/// `Σ_{t=1..T} p(H_E(t))·V·(1+δ′)^−t`.
pub fn discounted_damages(
    econ: &EconomicParams,
    freq: &FloodFrequencyParams,
    policy: &DikePolicy,
    subsidence: f64,
    slr_at: impl Fn(f64) -> f64,
) -> f64 {
    evaluate_policy(econ, freq, policy, subsidence, slr_at).damages
}

/// Investment plus discounted damages.
pub fn total_cost(
    econ: &EconomicParams,
    freq: &FloodFrequencyParams,
    policy: &DikePolicy,
    subsidence: f64,
    slr_at: impl Fn(f64) -> f64,
) -> f64 {
    evaluate_policy(econ, freq, policy, subsidence, slr_at).total_cost
}

/// Candidate heightenings, strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct HeightGrid {
    spec: GridSpec,
    heights: Vec<f64>,
}

/// Serialized form of a [`HeightGrid`]: `start..=stop` in steps of `step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            start: 0.0,
            stop: 10.0,
            step: 0.05,
        }
    }
}

impl TryFrom<GridSpec> for HeightGrid {
    type Error = Error;

    fn try_from(spec: GridSpec) -> Result<Self> {
        HeightGrid::uniform(spec.start, spec.stop, spec.step)
    }
}

impl From<HeightGrid> for GridSpec {
    fn from(grid: HeightGrid) -> Self {
        grid.spec
    }
}

impl Default for HeightGrid {
    fn default() -> Self {
        HeightGrid::uniform(0.0, 10.0, 0.05).expect("default grid is valid")
    }
}

impl HeightGrid {
    /// `start, start+step, …` up to `stop` inclusive (within a 1e-9 step slack).
    /// Points are `start + i·step`, so no rounding error accumulates.
    pub fn uniform(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 {
            return Err(Error::invalid(format!(
                "grid needs finite bounds and a positive step, got {start}..{stop} by {step}"
            )));
        }
        if stop < start {
            return Err(Error::degenerate("grid stop lies below start"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        let heights = (0..count).map(|i| start + i as f64 * step).collect();
        Ok(Self {
            spec: GridSpec { start, stop, step },
            heights,
        })
    }

    /// Arbitrary grid; must be nonempty and strictly increasing.
    pub fn from_heights(heights: Vec<f64>) -> Result<Self> {
        if heights.is_empty() {
            return Err(Error::degenerate("height grid is empty"));
        }
        if heights.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("height grid must be strictly increasing"));
        }
        let start = heights[0];
        let stop = *heights.last().unwrap();
        let step = if heights.len() > 1 {
            (stop - start) / (heights.len() - 1) as f64
        } else {
            1.0
        };
        Ok(Self {
            spec: GridSpec { start, stop, step },
            heights,
        })
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn len(&self) -> usize {
        self.heights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }

    /// Largest gap between neighbouring heights.
    pub fn max_step(&self) -> f64 {
        self.heights.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// Result of a grid search over heightenings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeightOptimum {
    pub height: f64,
    pub index: usize,
    pub curve: Vec<ObjectiveVector>,
}

/// Index of the minimum total cost; ties go to the smallest height.
pub fn argmin_total_cost(curve: &[ObjectiveVector]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in curve.iter().enumerate() {
        match best {
            Some(b) if !(v.total_cost < curve[b].total_cost) => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Grid search for the heightening minimizing total cost. Returns the whole
/// cost curve alongside the optimum.
pub fn optimize_height(
    econ: &EconomicParams,
    hazard: &impl FloodHazard,
    horizon: u32,
    subsidence: f64,
    slr_at: impl Fn(f64) -> f64,
    grid: &HeightGrid,
) -> Result<HeightOptimum> {
    if grid.is_empty() {
        return Err(Error::degenerate("height grid is empty"));
    }
    let curve: Vec<ObjectiveVector> = grid
        .heights()
        .iter()
        .map(|&x| {
            let policy = DikePolicy { heightening: x, horizon };
            evaluate_policy(econ, hazard, &policy, subsidence, &slr_at)
        })
        .collect();
    let index = argmin_total_cost(&curve).expect("curve is nonempty");
    Ok(HeightOptimum {
        height: grid.heights()[index],
        index,
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn linear(phi: f64) -> impl Fn(f64) -> f64 {
        move |t| phi * t
    }

    /// Spreadsheet-style summation kept apart from `evaluate_policy`.
    fn damages_by_hand(econ: &EconomicParams, freq: &FloodFrequencyParams, x: f64, eta: f64, phi: f64, horizon: u32) -> f64 {
        let mut sum = 0.0;
        for t in 1..=horizon {
            let t = t as f64;
            let h = x - eta * t - phi * t;
            let p = (freq.initial_frequency * (-freq.decay_rate * h).exp()).min(1.0);
            sum += p * econ.value_of_goods / (1.0 + econ.discount_rate).powf(t);
        }
        sum
    }

    /// Stationary point of the continuous cost `kX + Σ p₀e^{−α(X−(η+φ)t)}V(1+δ′)^{−t}`.
    fn analytic_optimum(econ: &EconomicParams, freq: &FloodFrequencyParams, eta: f64, phi: f64, horizon: u32) -> f64 {
        let a = freq.decay_rate;
        let s: f64 = (1..=horizon)
            .map(|t| {
                let t = t as f64;
                (a * (eta + phi) * t).exp() * (1.0 + econ.discount_rate).powf(-t)
            })
            .sum();
        (a * freq.initial_frequency * econ.value_of_goods * s / econ.cost_rate).ln() / a
    }

    #[test]
    fn investment_examples() {
        let econ = EconomicParams::default();
        assert_eq!(investment_cost(&econ, &DikePolicy::new(0.0, 75).unwrap()), 0.0);
        let c = investment_cost(&econ, &DikePolicy::new(2.35, 75).unwrap());
        assert!((c - 9.87e7).abs() < 1e3);
        let unit = EconomicParams { cost_rate: 1.0, ..econ };
        assert_eq!(investment_cost(&unit, &DikePolicy::new(1.0, 3).unwrap()), 1.0);
        // independent of T
        assert_eq!(
            investment_cost(&econ, &DikePolicy::new(1.0, 1).unwrap()),
            investment_cost(&econ, &DikePolicy::new(1.0, 500).unwrap())
        );
    }

    #[test]
    fn effective_height_examples() {
        assert_eq!(effective_height(2.35, 0.0, 0.002, linear(0.008)), 2.35);
        assert!((effective_height(2.35, 75.0, 0.002, linear(0.008)) - 1.60).abs() < 1e-12);
        assert_eq!(effective_height(0.0, 0.0, 0.002, linear(0.008)), 0.0);
    }

    #[test]
    fn flood_probability_examples() {
        let freq = FloodFrequencyParams::default();
        assert_eq!(annual_flood_probability(&freq, 0.0), 0.0038);
        let p = annual_flood_probability(&freq, 1.0);
        assert!((p - 0.0038 * (-2.6f64).exp()).abs() < 1e-15);
        assert!((p - 2.822e-4).abs() < 1e-7);
        let wide = FloodFrequencyParams {
            initial_frequency: 0.5,
            decay_rate: 1.0,
        };
        assert_eq!(annual_flood_probability(&wide, -10.0), 1.0);
        assert_eq!(annual_flood_probability(&wide, f64::MAX), 0.0);
    }

    #[test]
    fn damages_single_term_and_zero_value() {
        let econ = EconomicParams {
            value_of_goods: 100.0,
            discount_rate: 0.0,
            cost_rate: 1.0,
        };
        let freq = FloodFrequencyParams {
            initial_frequency: 0.5,
            decay_rate: 50.0,
        };
        let policy = DikePolicy::new(0.0, 1).unwrap();
        let d = discounted_damages(&econ, &freq, &policy, 0.0, |_| 0.0);
        assert!((d - 50.0).abs() < 1e-9);

        let broke = EconomicParams {
            value_of_goods: 0.0,
            ..EconomicParams::default()
        };
        let policy = DikePolicy::new(1.3, 75).unwrap();
        assert_eq!(
            discounted_damages(&broke, &FloodFrequencyParams::default(), &policy, 0.002, linear(0.008)),
            0.0
        );
        assert_eq!(
            total_cost(&broke, &FloodFrequencyParams::default(), &policy, 0.002, linear(0.008)),
            broke.cost_rate * 1.3
        );
    }

    #[test]
    fn damages_match_hand_summation() {
        let econ = EconomicParams::default();
        let freq = FloodFrequencyParams::default();
        for &x in &[0.0, 1.0, 2.35, 4.0] {
            let policy = DikePolicy::new(x, 75).unwrap();
            let d = discounted_damages(&econ, &freq, &policy, 0.002, linear(0.008));
            let oracle = damages_by_hand(&econ, &freq, x, 0.002, 0.008, 75);
            assert!((d - oracle).abs() <= 1e-9 * oracle, "x={x}: {d} vs {oracle}");
        }
        let at_zero = DikePolicy::new(0.0, 75).unwrap();
        assert_eq!(
            total_cost(&econ, &freq, &at_zero, 0.002, linear(0.008)),
            discounted_damages(&econ, &freq, &at_zero, 0.002, linear(0.008))
        );
    }

    #[test]
    fn baseline_optimum_is_2_35() {
        let grid = HeightGrid::default();
        assert_eq!(grid.len(), 201);
        let opt = optimize_height(
            &EconomicParams::default(),
            &FloodFrequencyParams::default(),
            75,
            0.002,
            linear(0.008),
            &grid,
        )
        .unwrap();
        assert!((opt.height - 2.35).abs() < 1e-9, "got {}", opt.height);
        assert_eq!(opt.curve.len(), 201);
        let analytic = analytic_optimum(&EconomicParams::default(), &FloodFrequencyParams::default(), 0.002, 0.008, 75);
        assert!((analytic - 2.3502).abs() < 1e-3);
    }

    #[test]
    fn zero_value_optimum_is_zero() {
        let econ = EconomicParams {
            value_of_goods: 0.0,
            ..EconomicParams::default()
        };
        let opt = optimize_height(
            &econ,
            &FloodFrequencyParams::default(),
            75,
            0.002,
            linear(0.008),
            &HeightGrid::default(),
        )
        .unwrap();
        assert_eq!(opt.height, 0.0);
    }

    #[test]
    fn grid_validation() {
        assert!(HeightGrid::from_heights(vec![]).is_err());
        assert!(HeightGrid::from_heights(vec![0.0, 0.0]).is_err());
        assert!(HeightGrid::from_heights(vec![1.0, 0.5]).is_err());
        assert!(HeightGrid::uniform(0.0, 1.0, 0.0).is_err());
        let g = HeightGrid::uniform(0.0, 1.0, 0.25).unwrap();
        assert_eq!(g.heights(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn ties_pick_smallest_height() {
        let flat = ObjectiveVector {
            total_cost: 1.0,
            investment: 0.0,
            flood_probability: 0.0,
            damages: 1.0,
        };
        assert_eq!(argmin_total_cost(&[flat, flat, flat]), Some(0));
    }

    #[test]
    fn overflow_is_saturated() {
        let econ = EconomicParams {
            value_of_goods: 1e300,
            discount_rate: -0.999_999,
            cost_rate: 1.0,
        };
        let policy = DikePolicy::new(0.0, 200).unwrap();
        let d = discounted_damages(&econ, &FloodFrequencyParams::default(), &policy, 0.0, |_| 0.0);
        assert!(d.is_finite());
    }

    #[test]
    fn params_validate() {
        assert!(EconomicParams::default().validate().is_ok());
        assert!(EconomicParams {
            cost_rate: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(EconomicParams {
            value_of_goods: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(EconomicParams {
            discount_rate: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(FloodFrequencyParams {
            decay_rate: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(FloodFrequencyParams {
            initial_frequency: 1.5,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(DikePolicy::new(-0.1, 75).is_err());
        assert!(DikePolicy::new(0.1, 0).is_err());
    }

    proptest! {
        #[test]
        fn probability_stays_in_unit_interval(h in -1e6f64..1e6, p0 in 0.0f64..=1.0, alpha in 1e-6f64..50.0) {
            let freq = FloodFrequencyParams { initial_frequency: p0, decay_rate: alpha };
            let p = annual_flood_probability(&freq, h);
            prop_assert!((0.0..=1.0).contains(&p));
        }

        #[test]
        fn monotone_in_height(x in 0.0f64..8.0, dx in 0.01f64..2.0) {
            let econ = EconomicParams::default();
            let freq = FloodFrequencyParams::default();
            let lo = DikePolicy::new(x, 75).unwrap();
            let hi = DikePolicy::new(x + dx, 75).unwrap();
            prop_assert!(investment_cost(&econ, &hi) > investment_cost(&econ, &lo));
            let dl = discounted_damages(&econ, &freq, &lo, 0.002, linear(0.008));
            let dh = discounted_damages(&econ, &freq, &hi, 0.002, linear(0.008));
            prop_assert!(dh <= dl);
            let pl = annual_flood_probability(&freq, x);
            let ph = annual_flood_probability(&freq, x + dx);
            prop_assert!(ph < pl);
        }

        #[test]
        fn doubling_value_doubles_damages(x in 0.0f64..6.0, v in 1e6f64..1e11) {
            let freq = FloodFrequencyParams::default();
            let one = EconomicParams { value_of_goods: v, ..Default::default() };
            let two = EconomicParams { value_of_goods: 2.0 * v, ..Default::default() };
            let policy = DikePolicy::new(x, 75).unwrap();
            let d1 = discounted_damages(&one, &freq, &policy, 0.002, linear(0.008));
            let d2 = discounted_damages(&two, &freq, &policy, 0.002, linear(0.008));
            prop_assert!((d2 - 2.0 * d1).abs() <= 1e-12 * d2.abs());
        }

        #[test]
        fn zero_discount_is_undiscounted_sum(x in 0.0f64..6.0) {
            let econ = EconomicParams { discount_rate: 0.0, ..Default::default() };
            let freq = FloodFrequencyParams::default();
            let policy = DikePolicy::new(x, 75).unwrap();
            let d = discounted_damages(&econ, &freq, &policy, 0.002, linear(0.008));
            let plain: f64 = (1..=75).map(|t| annual_flood_probability(&freq, x - 0.01 * t as f64) * econ.value_of_goods).sum();
            prop_assert!((d - plain).abs() <= 1e-10 * plain);
        }

        #[test]
        fn grid_optimum_tracks_analytic_root(
            v in 1.5e10f64..2.5e10,
            delta in 0.01f64..0.04,
            k in 3.0e7f64..5.5e7,
            p0 in 0.002f64..0.006,
            alpha in 2.0f64..3.2,
            eta in 0.0f64..0.004,
            phi in 0.004f64..0.012,
        ) {
            let econ = EconomicParams { value_of_goods: v, discount_rate: delta, cost_rate: k };
            let freq = FloodFrequencyParams { initial_frequency: p0, decay_rate: alpha };
            let analytic = analytic_optimum(&econ, &freq, eta, phi, 75);
            prop_assume!(analytic > 0.1 && analytic < 9.9);
            let grid = HeightGrid::default();
            let opt = optimize_height(&econ, &freq, 75, eta, linear(phi), &grid).unwrap();
            prop_assert!((opt.height - analytic).abs() <= grid.max_step() + 1e-9);
        }
    }
}
