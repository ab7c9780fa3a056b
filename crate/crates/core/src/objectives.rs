//! Objective evaluation over (state of the world × height) grids, Pareto
//! filtering, satisficing and expected trade-offs.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::core_model::{argmin_total_cost, evaluate_policy, DikePolicy, HeightGrid};
use crate::error::{Error, Result};
use crate::sealevel::slr_project;
use crate::uncertainty::StateOfTheWorld;

/// Increasingly complete representations of the flood-risk system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVersion {
    /// Point values, linear sea-level rise, exponential flood frequency.
    Baseline,
    /// As baseline, with uncertain parameters.
    Parametric,
    /// Calibrated sea-level ensemble with abrupt rise.
    SlrUpgraded,
    /// Calibrated sea level plus a GEV storm-surge hazard.
    SurgeUpgraded,
}

impl ModelVersion {
    pub const ALL: [ModelVersion; 4] = [
        ModelVersion::Baseline,
        ModelVersion::Parametric,
        ModelVersion::SlrUpgraded,
        ModelVersion::SurgeUpgraded,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelVersion::Baseline => "baseline",
            ModelVersion::Parametric => "parametric",
            ModelVersion::SlrUpgraded => "slr_upgraded",
            ModelVersion::SurgeUpgraded => "surge_upgraded",
        }
    }

    pub fn uses_slr_model(self) -> bool {
        matches!(self, ModelVersion::SlrUpgraded | ModelVersion::SurgeUpgraded)
    }
}

impl fmt::Display for ModelVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelVersion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelVersion::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::config(format!("unknown model version `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    /// Investment plus damages (guilders).
    pub total_cost: f64,
    /// `k·X` (guilders).
    pub investment: f64,
    /// Time-mean annual exceedance probability.
    pub flood_probability: f64,
    /// Discounted expected damages (guilders).
    pub damages: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    TotalCost,
    Investment,
    FloodProbability,
    Damages,
}

impl Objective {
    pub const ALL: [Objective; 4] = [
        Objective::TotalCost,
        Objective::Investment,
        Objective::FloodProbability,
        Objective::Damages,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Objective::TotalCost => "total_cost",
            Objective::Investment => "investment",
            Objective::FloodProbability => "flood_probability",
            Objective::Damages => "damages",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Objective::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::config(format!("unknown objective `{s}`")))
    }
}

impl ObjectiveVector {
    pub fn get(&self, objective: Objective) -> f64 {
        match objective {
            Objective::TotalCost => self.total_cost,
            Objective::Investment => self.investment,
            Objective::FloodProbability => self.flood_probability,
            Objective::Damages => self.damages,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.total_cost, self.investment, self.flood_probability, self.damages]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolutionRecord {
    pub sow: usize,
    pub height_index: usize,
    pub height: f64,
    pub objectives: ObjectiveVector,
}

/// All four objectives for one state of the world and heightening.
pub fn evaluate_objectives(
    sow: &StateOfTheWorld,
    heightening: f64,
    version: ModelVersion,
    horizon: u32,
) -> Result<ObjectiveVector> {
    let policy = DikePolicy::new(heightening, horizon)?;
    let slr = &sow.sea_level;
    let eta = slr.subsidence;
    Ok(match version {
        ModelVersion::Baseline | ModelVersion::Parametric => {
            evaluate_policy(&sow.economic, &sow.flood, &policy, eta, |t| slr.linear_rise(t))
        }
        ModelVersion::SlrUpgraded => evaluate_policy(&sow.economic, &sow.flood, &policy, eta, |t| slr_project(slr, t)),
        ModelVersion::SurgeUpgraded => {
            let hazard = sow
                .surge
                .as_ref()
                .ok_or_else(|| Error::config("surge_upgraded needs a surge model in every state of the world"))?;
            evaluate_policy(&sow.economic, hazard, &policy, eta, |t| slr_project(slr, t))
        }
    })
}

/// Every `(SOW, height)` solution, SOW-major. Parallel over SOW; the
/// output order does not depend on the worker count.
pub fn evaluate_grid(
    ensemble: &[StateOfTheWorld],
    grid: &HeightGrid,
    version: ModelVersion,
    horizon: u32,
) -> Result<Vec<SolutionRecord>> {
    if ensemble.is_empty() || grid.is_empty() {
        return Err(Error::degenerate("ensemble and grid must be nonempty"));
    }
    let per_sow: Vec<Vec<SolutionRecord>> = ensemble
        .par_iter()
        .enumerate()
        .map(|(n, sow)| {
            grid.heights()
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    Ok(SolutionRecord {
                        sow: n,
                        height_index: i,
                        height: x,
                        objectives: evaluate_objectives(sow, x, version, horizon)?,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_sow.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectedTradeoffs {
    pub heights: Vec<f64>,
    pub expected: Vec<ObjectiveVector>,
    pub optimal_index: usize,
    pub optimal_height: f64,
}

/// Ensemble mean of each objective at each height, from SOW-major records.
pub fn expected_tradeoffs(records: &[SolutionRecord], grid: &HeightGrid) -> Result<ExpectedTradeoffs> {
    let m = grid.len();
    if records.is_empty() || m == 0 || !records.len().is_multiple_of(m) {
        return Err(Error::degenerate("records do not form a complete SOW × height table"));
    }
    let n = records.len() / m;
    let mut sums = vec![[0.0f64; 4]; m];
    for r in records {
        let a = r.objectives.as_array();
        for k in 0..4 {
            sums[r.height_index][k] += a[k];
        }
    }
    let expected: Vec<ObjectiveVector> = sums
        .into_iter()
        .map(|s| ObjectiveVector {
            total_cost: s[0] / n as f64,
            investment: s[1] / n as f64,
            flood_probability: s[2] / n as f64,
            damages: s[3] / n as f64,
        })
        .collect();
    let optimal_index = argmin_total_cost(&expected).expect("nonempty");
    Ok(ExpectedTradeoffs {
        heights: grid.heights().to_vec(),
        optimal_height: grid.heights()[optimal_index],
        expected,
        optimal_index,
    })
}

/// Evaluate the grid and reduce to expected trade-offs in one call.
pub fn expected_tradeoffs_for(
    ensemble: &[StateOfTheWorld],
    grid: &HeightGrid,
    version: ModelVersion,
    horizon: u32,
) -> Result<ExpectedTradeoffs> {
    expected_tradeoffs(&evaluate_grid(ensemble, grid, version, horizon)?, grid)
}

fn dominates(a: &ObjectiveVector, b: &ObjectiveVector, objectives: &[Objective]) -> bool {
    let mut strictly = false;
    for &o in objectives {
        let (x, y) = (a.get(o), b.get(o));
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Indices of the nondominated points (all objectives minimized), in
/// lexicographic order of the selected objectives, ties by index.
pub fn pareto_filter(points: &[ObjectiveVector], objectives: &[Objective]) -> Result<Vec<usize>> {
    if points.is_empty() {
        return Err(Error::degenerate("Pareto filter of no points"));
    }
    if objectives.is_empty() {
        return Err(Error::config("Pareto filter needs at least one objective"));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        objectives
            .iter()
            .map(|&o| points[i].get(o).total_cmp(&points[j].get(o)))
            .find(|c| c.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    // A dominator always sorts before the point it dominates.
    let mut front: Vec<usize> = Vec::new();
    for i in order {
        if !front.iter().any(|&f| dominates(&points[f], &points[i], objectives)) {
            front.push(i);
        }
    }
    Ok(front)
}

/// Component-wise minimum.
pub fn ideal_point(points: &[ObjectiveVector]) -> Option<ObjectiveVector> {
    let first = *points.first()?;
    Some(points.iter().fold(first, |acc, p| ObjectiveVector {
        total_cost: acc.total_cost.min(p.total_cost),
        investment: acc.investment.min(p.investment),
        flood_probability: acc.flood_probability.min(p.flood_probability),
        damages: acc.damages.min(p.damages),
    }))
}

/// Named upper bounds, e.g. `{"flood_probability": 1e-4, "investment": 1e8}`.
pub type Thresholds = BTreeMap<String, f64>;

pub fn parse_thresholds(thresholds: &Thresholds) -> Result<Vec<(Objective, f64)>> {
    thresholds
        .iter()
        .map(|(name, &bound)| {
            if bound.is_nan() {
                return Err(Error::config(format!("threshold for {name} is NaN")));
            }
            Ok((name.parse::<Objective>()?, bound))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Satisficing {
    /// Indices into the solution list meeting every bound.
    pub indices: Vec<usize>,
    pub fraction: f64,
}

/// Solutions strictly below every threshold.
pub fn satisfice(solutions: &[SolutionRecord], thresholds: &Thresholds) -> Result<Satisficing> {
    let bounds = parse_thresholds(thresholds)?;
    if solutions.is_empty() {
        return Err(Error::degenerate("no solutions to satisfice"));
    }
    let indices: Vec<usize> = solutions
        .iter()
        .enumerate()
        .filter(|(_, s)| bounds.iter().all(|&(o, b)| s.objectives.get(o) < b))
        .map(|(i, _)| i)
        .collect();
    Ok(Satisficing {
        fraction: indices.len() as f64 / solutions.len() as f64,
        indices,
    })
}

/// 2-D histogram of solutions over two objectives.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityHistogram {
    pub x: Objective,
    pub y: Objective,
    /// Bin edges on the axis scale (log10 of the value when `log_axes`).
    pub x_edges: Vec<f64>,
    pub y_edges: Vec<f64>,
    /// `counts[i][j]` for x-bin `i`, y-bin `j`.
    pub counts: Vec<Vec<u64>>,
    pub log_axes: bool,
}

impl DensityHistogram {
    pub fn log_counts(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| row.iter().map(|&c| (1.0 + c as f64).log10()).collect())
            .collect()
    }
}

/// Counts of solutions per bin. With `log_axes`, values are binned on a
/// log10 scale and nonpositive values are skipped.
pub fn density_histogram(
    solutions: &[SolutionRecord],
    x: Objective,
    y: Objective,
    bins: usize,
    log_axes: bool,
) -> Result<DensityHistogram> {
    if bins == 0 {
        return Err(Error::config("histogram needs at least one bin"));
    }
    let axis = |v: f64| {
        if log_axes {
            if v > 0.0 {
                Some(v.log10())
            } else {
                None
            }
        } else {
            v.is_finite().then_some(v)
        }
    };
    let pts: Vec<(f64, f64)> = solutions
        .iter()
        .filter_map(|s| Some((axis(s.objectives.get(x))?, axis(s.objectives.get(y))?)))
        .collect();
    let range = |f: &dyn Fn(&(f64, f64)) -> f64| {
        let lo = pts.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        if !(lo.is_finite() && hi.is_finite()) {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, lo + 0.5)
        }
    };
    let (x_lo, x_hi) = range(&|p| p.0);
    let (y_lo, y_hi) = range(&|p| p.1);
    let edges = |lo: f64, hi: f64| {
        (0..=bins)
            .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
            .collect::<Vec<_>>()
    };
    let idx = |v: f64, lo: f64, hi: f64| (((v - lo) / (hi - lo) * bins as f64).floor().max(0.0) as usize).min(bins - 1);
    let mut counts = vec![vec![0u64; bins]; bins];
    for &(a, b) in &pts {
        counts[idx(a, x_lo, x_hi)][idx(b, y_lo, y_hi)] += 1;
    }
    Ok(DensityHistogram {
        x,
        y,
        x_edges: edges(x_lo, x_hi),
        y_edges: edges(y_lo, y_hi),
        counts,
        log_axes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_model::{optimize_height, total_cost, EconomicParams};
    use crate::rng::substream;
    use crate::uncertainty::{default_priors, generate_sows};
    use proptest::prelude::*;
    use rand::Rng;

    fn ov(total: f64, inv: f64, p: f64, d: f64) -> ObjectiveVector {
        ObjectiveVector {
            total_cost: total,
            investment: inv,
            flood_probability: p,
            damages: d,
        }
    }

    fn two(a: f64, b: f64) -> ObjectiveVector {
        ov(0.0, a, b, 0.0)
    }

    const PAIR: [Objective; 2] = [Objective::Investment, Objective::FloodProbability];

    fn brute_force(points: &[ObjectiveVector], objectives: &[Objective]) -> Vec<usize> {
        let mut keep: Vec<usize> = (0..points.len())
            .filter(|&i| !(0..points.len()).any(|j| j != i && dominates(&points[j], &points[i], objectives)))
            .collect();
        keep.sort();
        keep
    }

    #[test]
    fn baseline_sow_matches_core_model() {
        let sow = StateOfTheWorld::default();
        let v = evaluate_objectives(&sow, 2.35, ModelVersion::Baseline, 75).unwrap();
        let policy = DikePolicy::new(2.35, 75).unwrap();
        let direct = total_cost(&sow.economic, &sow.flood, &policy, 0.002, |t| 0.008 * t);
        assert_eq!(v.total_cost, direct);
        assert!((v.total_cost - (v.investment + v.damages)).abs() <= 1e-9 * v.total_cost);
    }

    #[test]
    fn zero_height_zero_value() {
        let mut sow = StateOfTheWorld::default();
        sow.economic.value_of_goods = 0.0;
        let v = evaluate_objectives(&sow, 0.0, ModelVersion::Baseline, 75).unwrap();
        assert_eq!((v.total_cost, v.investment, v.damages), (0.0, 0.0, 0.0));
        assert!(v.flood_probability > 0.0);
    }

    #[test]
    fn constant_height_time_mean() {
        let mut sow = StateOfTheWorld::default();
        sow.sea_level.subsidence = 0.0;
        sow.sea_level.linear_rate = 0.0;
        let v = evaluate_objectives(&sow, 1.0, ModelVersion::Parametric, 75).unwrap();
        let single = 0.0038 * (-2.6f64).exp();
        assert!((v.flood_probability - single).abs() < 1e-15);
    }

    #[test]
    fn surge_version_needs_surge() {
        let err = evaluate_objectives(&StateOfTheWorld::default(), 1.0, ModelVersion::SurgeUpgraded, 75);
        assert!(matches!(err, Err(Error::Config(_))));
        assert!("surge".parse::<ModelVersion>().is_err());
        assert_eq!("slr_upgraded".parse::<ModelVersion>().unwrap(), ModelVersion::SlrUpgraded);
    }

    #[test]
    fn single_sow_tradeoffs_equal_deterministic_curve() {
        let sow = StateOfTheWorld::default();
        let grid = HeightGrid::default();
        let t = expected_tradeoffs_for(std::slice::from_ref(&sow), &grid, ModelVersion::Baseline, 75).unwrap();
        let direct = optimize_height(&sow.economic, &sow.flood, 75, 0.002, |x| 0.008 * x, &grid).unwrap();
        assert_eq!(t.expected, direct.curve);
        assert!((t.optimal_height - 2.35).abs() < 1e-9);
    }

    #[test]
    fn argmin_linearity() {
        let sows = generate_sows(&default_priors(), &StateOfTheWorld::default(), 200, 4).unwrap();
        let grid = HeightGrid::uniform(0.0, 6.0, 0.05).unwrap();
        let t = expected_tradeoffs_for(&sows, &grid, ModelVersion::Parametric, 75).unwrap();
        let summed: Vec<ObjectiveVector> = t
            .expected
            .iter()
            .map(|v| ov(v.investment + v.damages, 0.0, 0.0, 0.0))
            .collect();
        assert_eq!(argmin_total_cost(&summed), Some(t.optimal_index));
    }

    #[test]
    fn pareto_examples() {
        let pts = [two(1.0, 2.0), two(2.0, 1.0), two(2.0, 2.0)];
        assert_eq!(pareto_filter(&pts, &PAIR).unwrap(), vec![0, 1]);
        assert_eq!(pareto_filter(&pts[..1], &PAIR).unwrap(), vec![0]);
        assert!(pareto_filter(&[], &PAIR).is_err());
        let dup = [two(1.0, 1.0), two(1.0, 1.0)];
        assert_eq!(pareto_filter(&dup, &PAIR).unwrap(), vec![0, 1]);
    }

    #[test]
    fn pareto_matches_brute_force_on_random_sets() {
        let mut rng = substream(1, "test-pareto", 0);
        let pts: Vec<ObjectiveVector> = (0..1000)
            .map(|_| ov(rng.random(), rng.random(), rng.random(), rng.random()))
            .collect();
        for objs in [&PAIR[..], &Objective::ALL[..]] {
            let mut got = pareto_filter(&pts, objs).unwrap();
            got.sort();
            assert_eq!(got, brute_force(&pts, objs));
        }
    }

    #[test]
    fn ideal_point_not_dominated() {
        let mut rng = substream(2, "test-ideal", 0);
        let pts: Vec<ObjectiveVector> = (0..300)
            .map(|_| ov(rng.random(), rng.random(), rng.random(), rng.random()))
            .collect();
        let front: Vec<ObjectiveVector> = pareto_filter(&pts, &Objective::ALL)
            .unwrap()
            .into_iter()
            .map(|i| pts[i])
            .collect();
        let ideal = ideal_point(&front).unwrap();
        assert!(pts.iter().all(|p| !dominates(p, &ideal, &Objective::ALL)));
    }

    fn records(points: &[ObjectiveVector]) -> Vec<SolutionRecord> {
        points
            .iter()
            .enumerate()
            .map(|(i, &objectives)| SolutionRecord {
                sow: i,
                height_index: 0,
                height: 0.0,
                objectives,
            })
            .collect()
    }

    #[test]
    fn satisfice_examples() {
        let recs = records(&[ov(3.0, 1.0, 1e-3, 2.0), ov(5.0, 4.0, 1e-5, 1.0)]);
        let inf: Thresholds = [("investment".into(), f64::INFINITY), ("damages".into(), f64::INFINITY)].into();
        assert_eq!(satisfice(&recs, &inf).unwrap().fraction, 1.0);
        let zero: Thresholds = [("investment".into(), 0.0), ("damages".into(), 0.0)].into();
        assert_eq!(satisfice(&recs, &zero).unwrap().fraction, 0.0);
        let strict: Thresholds = [("investment".into(), 4.0)].into();
        assert_eq!(satisfice(&recs, &strict).unwrap().indices, vec![0]);
        let bad: Thresholds = [("cost".into(), 1.0)].into();
        assert!(matches!(satisfice(&recs, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn histogram_counts_everything() {
        let sows = generate_sows(&default_priors(), &StateOfTheWorld::default(), 20, 4).unwrap();
        let grid = HeightGrid::uniform(0.0, 5.0, 0.5).unwrap();
        let recs = evaluate_grid(&sows, &grid, ModelVersion::Parametric, 75).unwrap();
        let h = density_histogram(&recs, Objective::Investment, Objective::Damages, 10, false).unwrap();
        let total: u64 = h.counts.iter().flatten().sum();
        assert_eq!(total as usize, recs.len());
        let hl = density_histogram(&recs, Objective::Investment, Objective::FloodProbability, 10, true).unwrap();
        // zero investment is dropped on a log axis
        let total_log: u64 = hl.counts.iter().flatten().sum();
        assert_eq!(total_log as usize, recs.len() - sows.len());
    }

    #[test]
    fn evaluate_grid_order_and_additivity() {
        let sows = generate_sows(&default_priors(), &StateOfTheWorld::default(), 10, 8).unwrap();
        let grid = HeightGrid::uniform(0.0, 2.0, 0.5).unwrap();
        let recs = evaluate_grid(&sows, &grid, ModelVersion::Parametric, 75).unwrap();
        for (k, r) in recs.iter().enumerate() {
            assert_eq!((r.sow, r.height_index), (k / grid.len(), k % grid.len()));
            let o = r.objectives;
            assert!((o.total_cost - (o.investment + o.damages)).abs() <= 1e-9 * o.total_cost.max(1.0));
        }
        let econ = EconomicParams::default();
        assert!(econ.validate().is_ok());
    }

    proptest! {
        #[test]
        fn satisficing_monotone(seed in any::<u64>(), steps in prop::collection::vec((0usize..4, 0.5f64..1.0), 1..8)) {
            let mut rng = substream(seed, "test-sat", 0);
            let recs = records(&(0..400).map(|_| ov(rng.random(), rng.random(), rng.random(), rng.random())).collect::<Vec<_>>());
            let mut th: Thresholds = Objective::ALL.iter().map(|o| (o.name().to_string(), 1.0)).collect();
            let mut last = satisfice(&recs, &th).unwrap().fraction;
            for (k, factor) in steps {
                *th.get_mut(Objective::ALL[k].name()).unwrap() *= factor;
                let f = satisfice(&recs, &th).unwrap().fraction;
                prop_assert!(f <= last);
                last = f;
            }
        }

        #[test]
        fn pareto_small_instances(seed in any::<u64>(), n in 1usize..60) {
            let mut rng = substream(seed, "test-pareto-prop", 0);
            // coarse values force ties
            let pts: Vec<ObjectiveVector> = (0..n).map(|_| two(f64::from(rng.random_range(0..5u8)), f64::from(rng.random_range(0..5u8)))).collect();
            let mut got = pareto_filter(&pts, &PAIR).unwrap();
            got.sort();
            prop_assert_eq!(got, brute_force(&pts, &PAIR));
        }
    }
}
