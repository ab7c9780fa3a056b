//! End-to-end runs: data, calibration, ensembles, objectives, satisficing,
//! sensitivity and the files that record them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::RunConfig;
use super::output;
use super::tide_gauge::ingest_tide_gauge;
use crate::error::{Error, Result};
use crate::objectives::{
    density_histogram, evaluate_grid, expected_tradeoffs, pareto_filter, satisfice, ExpectedTradeoffs, ModelVersion, Objective,
    ObjectiveVector, SolutionRecord,
};
use crate::rng::{child_seed, labels, substream};
use crate::sealevel::{fit_polynomial, SlrCalibration, SlrParams, TideGaugeSeries};
use crate::sensitivity::{oat_sweep, sobol_indices, IndexOrder, OatReport, ObjectiveModel, Problem, SobolIndices};
use crate::stats;
use crate::surge::{
    block_maxima, fit_gev_mle, fit_semilog, hpd_interval, mcmc_gev, return_level_mle, return_level_posterior, AnnualMaximum,
    GevFit, McmcChain, ReturnLevelCurve, SemilogFit, SurgeHazard,
};
use crate::uncertainty::{generate_sows, Parameter, PriorSpec, StateOfTheWorld};

/// Objective pairs exported as density histograms.
pub const DENSITY_PAIRS: [(Objective, Objective); 4] = [
    (Objective::Investment, Objective::FloodProbability),
    (Objective::Investment, Objective::Damages),
    (Objective::FloodProbability, Objective::Damages),
    (Objective::TotalCost, Objective::FloodProbability),
];

/// Objectives of the exported Pareto front.
pub const PARETO_OBJECTIVES: [Objective; 3] = [Objective::Investment, Objective::FloodProbability, Objective::Damages];

const CHAIN_ROWS: usize = 10_000;

#[derive(Debug, Clone)]
pub struct GevStage {
    pub maxima: Vec<AnnualMaximum>,
    pub mle: GevFit,
    pub crest_level: f64,
    pub units_per_meter: f64,
    pub semilog: SemilogFit,
    pub mle_curve: ReturnLevelCurve,
    pub semilog_curve: ReturnLevelCurve,
}

#[derive(Debug, Clone)]
pub struct ChainStage {
    pub chain: McmcChain,
    pub curve: ReturnLevelCurve,
}

impl GevStage {
    pub fn hazard(&self, gev: crate::surge::GevParams) -> SurgeHazard {
        SurgeHazard {
            gev,
            crest_level: self.crest_level,
            units_per_meter: self.units_per_meter,
        }
    }
}

/// Everything computed for one model version.
#[derive(Debug, Clone)]
pub struct VersionRun {
    pub version: ModelVersion,
    pub n_sow: usize,
    pub records: Vec<SolutionRecord>,
    pub tradeoffs: ExpectedTradeoffs,
    pub fractions: BTreeMap<String, (usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct SensitivityRun {
    pub height: f64,
    pub sobol: Vec<SobolIndices>,
    pub oat: Vec<OatReport>,
}

pub struct Pipeline {
    pub config: RunConfig,
    pub out: PathBuf,
    series: Option<TideGaugeSeries>,
    slr: Option<SlrCalibration>,
    gev: Option<GevStage>,
    chain: Option<ChainStage>,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let out = config.output_dir.clone();
        Ok(Self {
            config,
            out,
            series: None,
            slr: None,
            gev: None,
            chain: None,
        })
    }

    pub fn with_output(mut self, out: impl Into<PathBuf>) -> Self {
        self.out = out.into();
        self
    }

    fn seed(&self) -> u64 {
        self.config.sampling.seed
    }

    fn version_dir(&self, v: ModelVersion) -> PathBuf {
        self.out.join(v.name())
    }

    pub fn series(&mut self) -> Result<&TideGaugeSeries> {
        if self.series.is_none() {
            let src = self
                .config
                .tide_gauge
                .as_ref()
                .ok_or_else(|| Error::config("no tide_gauge data source configured"))?;
            self.series = Some(ingest_tide_gauge(&src.path, src.format)?);
        }
        Ok(self.series.as_ref().expect("loaded"))
    }

    /// Fit, bootstrap and calibrate the sea-level model.
    pub fn slr(&mut self) -> Result<&SlrCalibration> {
        if self.slr.is_none() {
            let annual = self.series()?.annual_means();
            let sl = &self.config.sea_level;
            let cal = SlrCalibration::run(
                &annual,
                &sl.ensemble_settings(),
                sl.projection_year,
                &sl.assessment,
                sl.min_accepted,
                child_seed(self.seed(), "sea-level"),
            )?;
            self.slr = Some(cal);
        }
        Ok(self.slr.as_ref().expect("computed"))
    }

    /// Block maxima, GEV and semilog fits, and the crest level.
    pub fn gev(&mut self) -> Result<&GevStage> {
        if self.gev.is_none() {
            let sg = self.config.surge.clone();
            let maxima = block_maxima(self.series()?, sg.min_obs_per_year)?;
            let values: Vec<f64> = maxima.iter().map(|m| m.value).collect();
            let mle = fit_gev_mle(&values, sg.min_maxima)?;
            let crest_level = match sg.crest_level {
                Some(c) => c,
                None => mle.params.quantile(1.0 - self.config.flood_frequency.initial_frequency)?,
            };
            let semilog = fit_semilog(&values)?;
            self.gev = Some(GevStage {
                mle_curve: return_level_mle(&mle, &sg.return_periods)?,
                semilog_curve: semilog.curve(&sg.return_periods),
                semilog,
                maxima,
                mle,
                crest_level,
                units_per_meter: sg.level_units_per_meter,
            });
        }
        Ok(self.gev.as_ref().expect("computed"))
    }

    /// Posterior chain of the GEV parameters and its return-level curve.
    pub fn chain(&mut self) -> Result<&ChainStage> {
        if self.chain.is_none() {
            let seed = child_seed(self.seed(), "surge");
            let sg = self.config.surge.clone();
            let stage = self.gev()?;
            let values: Vec<f64> = stage.maxima.iter().map(|m| m.value).collect();
            let chain = mcmc_gev(&values, &stage.mle, &sg.mcmc, seed)?;
            self.chain = Some(ChainStage {
                curve: return_level_posterior(&chain, &sg.return_periods)?,
                chain,
            });
        }
        Ok(self.chain.as_ref().expect("computed"))
    }

    /// Point-value state of the world.
    pub fn base_sow(&mut self, version: ModelVersion) -> Result<StateOfTheWorld> {
        let cfg = &self.config;
        let mut sea_level = SlrParams {
            subsidence: cfg.sea_level.subsidence,
            linear_rate: cfg.sea_level.linear_rate,
            abrupt: cfg.sea_level.abrupt_mode,
            ..SlrParams::default()
        };
        let mut sow = StateOfTheWorld {
            index: 0,
            economic: cfg.economic,
            flood: cfg.flood_frequency,
            sea_level,
            surge: None,
        };
        if version.uses_slr_model() {
            let cal = self.slr()?;
            let q = &cal.fit.quadratic.coefficients;
            sea_level.reference_year = f64::from(cal.fit.reference_year);
            (sea_level.b, sea_level.c) = (q[1], q[2]);
            sea_level.t_star = cal.projection_year;
            sow.sea_level = sea_level;
        }
        if version == ModelVersion::SurgeUpgraded {
            let stage = self.gev()?;
            sow.surge = Some(stage.hazard(stage.mle.params));
        }
        Ok(sow)
    }

    /// The ensemble evaluated for `version`.
    pub fn ensemble(&mut self, version: ModelVersion) -> Result<Vec<StateOfTheWorld>> {
        let base = self.base_sow(version)?;
        if version == ModelVersion::Baseline {
            return Ok(vec![base]);
        }
        let seed = self.seed();
        let mut sows = generate_sows(&self.config.priors, &base, self.config.sampling.n_sow, seed)?;
        if version.uses_slr_model() {
            let members = &self.slr()?.members;
            for sow in &mut sows {
                let mut rng = substream(seed, labels::SLR_DRAW, sow.index as u64);
                let m = members[rng.random_range(0..members.len())];
                let s = &mut sow.sea_level;
                (s.a, s.b, s.c, s.c_star, s.t_star, s.reference_year, s.abrupt) =
                    (m.a, m.b, m.c, m.c_star, m.t_star, m.reference_year, m.abrupt);
            }
        }
        if version == ModelVersion::SurgeUpgraded {
            self.chain()?;
            let (Some(stage), Some(chain)) = (&self.gev, &self.chain) else {
                unreachable!("surge stages computed above")
            };
            let samples = &chain.chain.samples;
            for sow in &mut sows {
                let mut rng = substream(seed, labels::GEV_DRAW, sow.index as u64);
                sow.surge = Some(stage.hazard(samples[rng.random_range(0..samples.len())]));
            }
        }
        Ok(sows)
    }

    pub fn evaluate_version(&mut self, version: ModelVersion) -> Result<VersionRun> {
        let sows = self.ensemble(version)?;
        let grid = self.config.grid()?;
        let records = evaluate_grid(&sows, &grid, version, self.config.horizon)?;
        let tradeoffs = expected_tradeoffs(&records, &grid)?;
        let mut fractions = BTreeMap::new();
        for (name, set) in &self.config.thresholds {
            let s = satisfice(&records, set)?;
            fractions.insert(name.clone(), (s.indices.len(), s.fraction));
        }
        tracing::info!(
            version = version.name(),
            optimum = tradeoffs.optimal_height,
            "expected trade-offs"
        );
        Ok(VersionRun {
            version,
            n_sow: sows.len(),
            records,
            tradeoffs,
            fractions,
        })
    }

    /// Inputs varied in the sensitivity analysis of `version`.
    pub fn sensitivity_problem(&mut self, version: ModelVersion) -> Result<(Vec<Parameter>, Problem)> {
        let mut inputs: Vec<(Parameter, PriorSpec)> = self.config.priors.iter().map(|(p, s)| (*p, *s)).collect();
        if version.uses_slr_model() {
            let sl = self.config.sea_level.clone();
            let cal = self.slr()?;
            let reference = f64::from(cal.fit.reference_year);
            let ranges = [
                (Parameter::SlrLevel, cal.central_range(|p| p.a)),
                (Parameter::SlrRate, cal.central_range(|p| p.b)),
                (Parameter::SlrAcceleration, cal.central_range(|p| p.c)),
                (Parameter::AbruptRate, (sl.c_star_range[0], sl.c_star_range[1])),
                (
                    Parameter::AbruptOnset,
                    (sl.t_star_range[0].max(reference), sl.t_star_range[1]),
                ),
            ];
            inputs.extend(
                ranges
                    .into_iter()
                    .filter(|(_, (lo, hi))| hi > lo)
                    .map(|(p, (lo, hi))| (p, PriorSpec::uniform(lo, hi))),
            );
        }
        if version == ModelVersion::SurgeUpgraded {
            let chain = &self.chain()?.chain;
            for (k, p) in crate::io::config::GEV_PARAMETERS.into_iter().enumerate() {
                let (lo, hi) = hpd_interval(&chain.column(k), 0.95)?;
                if hi > lo {
                    inputs.push((p, PriorSpec::uniform(lo, hi)));
                }
            }
        }
        inputs.sort_by_key(|(p, _)| *p);
        let params = inputs.iter().map(|(p, _)| *p).collect();
        let problem = Problem::new(inputs.into_iter().map(|(p, s)| (p.name().to_string(), s)).collect())?;
        Ok((params, problem))
    }

    pub fn sensitivity(&mut self, version: ModelVersion, optimum: f64) -> Result<SensitivityRun> {
        let se = self.config.sensitivity.clone();
        let height = se.height.unwrap_or(optimum);
        let (parameters, problem) = self.sensitivity_problem(version)?;
        let model = ObjectiveModel {
            version,
            base: self.base_sow(version)?,
            parameters,
            height,
            horizon: self.config.horizon,
        };
        let sobol = sobol_indices(&model, &problem, se.n_base, self.seed(), se.second_order)?;
        let oat = oat_sweep(&model, &problem, se.oat_points)?;
        Ok(SensitivityRun { height, sobol, oat })
    }

    /// Quadratic fit to the annual means, without calibration.
    pub fn write_slr_fit(&mut self) -> Result<Value> {
        let out = self.out.clone();
        let fit = fit_polynomial(&self.series()?.annual_means())?;
        let q = &fit.quadratic;
        let summary = json!({
            "reference_year": fit.reference_year,
            "first_year": fit.first_year,
            "coefficients_m": q.coefficients,
            "standard_errors": q.standard_errors,
            "residual_sd_m": stats::variance(&q.residuals).sqrt(),
            "residual_lag1_autocorrelation": stats::lag1_autocorrelation(&q.residuals),
        });
        output::write_json(&out.join("slr_fit.json"), &summary)?;
        Ok(summary)
    }

    pub fn write_slr(&mut self) -> Result<Value> {
        let members = self.config.sea_level.projection_members;
        let out = self.out.clone();
        let cal = self.slr()?;
        output::write_slr_posterior(&out.join("slr_posterior.csv"), cal)?;
        output::write_slr_projections(&out.join("slr_projections.csv"), cal, members)?;
        let fit = &cal.fit.quadratic;
        let sorted = stats::sorted_copy(&cal.projections);
        let summary = json!({
            "reference_year": cal.fit.reference_year,
            "first_year": cal.fit.first_year,
            "coefficients_m": fit.coefficients,
            "standard_errors": fit.standard_errors,
            "residual_lag1_autocorrelation": stats::lag1_autocorrelation(&fit.residuals),
            "proposal_members": cal.proposal_size,
            "accepted_members": cal.members.len(),
            "projection_year": cal.projection_year,
            "projection_mean_m": stats::mean(&cal.projections)?,
            "projection_p05_m": stats::quantile_sorted(&sorted, 0.05),
            "projection_p50_m": stats::quantile_sorted(&sorted, 0.5),
            "projection_p95_m": stats::quantile_sorted(&sorted, 0.95),
        });
        output::write_json(&out.join("slr_calibration.json"), &summary)?;
        Ok(summary)
    }

    pub fn write_gev_fit(&mut self) -> Result<Value> {
        let out = self.out.clone();
        let stage = self.gev()?;
        output::write_block_maxima(&out.join("block_maxima.csv"), &stage.maxima)?;
        output::write_return_levels(&out.join("return_levels_mle.csv"), &stage.mle_curve)?;
        output::write_return_levels(&out.join("return_levels_semilog.csv"), &stage.semilog_curve)?;
        let summary = json!({
            "n_maxima": stage.maxima.len(),
            "mle": stage.mle,
            "semilog": stage.semilog,
            "crest_level_mm": stage.crest_level,
        });
        output::write_json(&out.join("gev_fit.json"), &summary)?;
        Ok(summary)
    }

    pub fn write_mcmc(&mut self) -> Result<Value> {
        let out = self.out.clone();
        let stage = self.chain()?;
        let chain = &stage.chain;
        output::write_return_levels(&out.join("return_levels_mcmc.csv"), &stage.curve)?;
        output::write_chain(&out.join("mcmc_chain.csv"), chain, chain.samples.len().div_ceil(CHAIN_ROWS))?;
        let mut hpd = BTreeMap::new();
        for (k, name) in ["location_mm", "scale_mm", "shape"].into_iter().enumerate() {
            hpd.insert(name, hpd_interval(&chain.column(k), 0.95)?);
        }
        let top = stage.curve.points.last();
        Ok(json!({
            "samples": chain.samples.len(),
            "burn_in": chain.burn_in,
            "acceptance_rate": chain.acceptance_rate,
            "tuning_warning": chain.tuning_warning,
            "hpd95": hpd,
            "longest_period_yr": top.map(|p| p.period),
            "longest_period_expected_mm": top.map(|p| p.expected),
        }))
    }

    /// Cost curve, Pareto front and density histograms of `run`.
    pub fn write_tradeoffs(&self, run: &VersionRun) -> Result<Value> {
        let dir = self.version_dir(run.version);
        let t = &run.tradeoffs;
        output::write_curve(&dir.join("cost_curve.csv"), &t.heights, &t.expected)?;
        let front = pareto_filter(&t.expected, &PARETO_OBJECTIVES)?;
        let heights: Vec<f64> = front.iter().map(|&i| t.heights[i]).collect();
        let points: Vec<ObjectiveVector> = front.iter().map(|&i| t.expected[i]).collect();
        output::write_curve(&dir.join("pareto.csv"), &heights, &points)?;
        for (x, y) in DENSITY_PAIRS {
            let h = density_histogram(&run.records, x, y, self.config.density.bins, self.config.density.log_axes)?;
            output::write_density(&dir.join(format!("density_{}__{}.csv", x.name(), y.name())), &h)?;
        }
        Ok(self.version_summary(run))
    }

    /// One `satisfice_<set>.csv` per threshold set.
    pub fn write_satisficing(&self, run: &VersionRun) -> Result<()> {
        let dir = self.version_dir(run.version);
        for (name, set) in &self.config.thresholds {
            let s = satisfice(&run.records, set)?;
            output::write_solutions(
                &dir.join(format!("satisfice_{name}.csv")),
                s.indices.iter().map(|&i| &run.records[i]),
            )?;
        }
        Ok(())
    }

    pub fn version_summary(&self, run: &VersionRun) -> Value {
        let t = &run.tradeoffs;
        let fractions: BTreeMap<&str, Value> = run
            .fractions
            .iter()
            .map(|(k, (count, f))| (k.as_str(), json!({ "count": count, "fraction": f })))
            .collect();
        json!({
            "n_sow": run.n_sow,
            "n_solutions": run.records.len(),
            "optimal_height_m": t.optimal_height,
            "expected_at_optimum": t.expected[t.optimal_index],
            "satisficing": fractions,
        })
    }

    pub fn write_sensitivity(&self, version: ModelVersion, run: &SensitivityRun) -> Result<Value> {
        let dir = self.version_dir(version);
        output::write_sobol(&dir, &run.sobol)?;
        output::write_oat(&dir, &run.oat)?;
        let per_objective: BTreeMap<&str, Value> = run
            .sobol
            .iter()
            .map(|s| {
                let first: BTreeMap<&str, f64> = s.names.iter().map(String::as_str).zip(s.first.iter().copied()).collect();
                let total: BTreeMap<&str, f64> = s.names.iter().map(String::as_str).zip(s.total.iter().copied()).collect();
                (
                    s.output.as_str(),
                    json!({ "first": first, "total": total, "rank_total": s.rank(IndexOrder::Total) }),
                )
            })
            .collect();
        Ok(json!({
            "evaluation_height_m": run.height,
            "n_base": self.config.sensitivity.n_base,
            "evaluations": run.sobol.first().map(|s| s.evaluations),
            "objectives": per_objective,
        }))
    }

    /// The full pipeline; returns the summary written to `summary.json`.
    pub fn run(&mut self) -> Result<Value> {
        std::fs::create_dir_all(&self.out)?;
        output::write_json(&self.out.join("config.json"), &self.config)?;
        let mut summary = BTreeMap::<String, Value>::new();
        summary.insert("seed".into(), json!(self.seed()));
        if self.config.needs_record() {
            let series = self.series()?;
            summary.insert(
                "tide_gauge".into(),
                json!({ "observations": series.len(), "dropped_sentinels": series.dropped_sentinels }),
            );
            let mut slr = self.write_slr()?;
            slr["trend_fit"] = self.write_slr_fit()?;
            summary.insert("sea_level".into(), slr);
        }
        if self.config.needs_surge() {
            let mut s = self.write_gev_fit()?;
            s["mcmc"] = self.write_mcmc()?;
            summary.insert("surge".into(), s);
        }
        let mut versions = BTreeMap::new();
        for version in self.config.model_versions.clone() {
            let run = self.evaluate_version(version)?;
            let mut v = self.write_tradeoffs(&run)?;
            self.write_satisficing(&run)?;
            let optimum = run.tradeoffs.optimal_height;
            drop(run);
            if self.config.sensitivity.enabled {
                let sens = self.sensitivity(version, optimum)?;
                v["sensitivity"] = self.write_sensitivity(version, &sens)?;
            }
            versions.insert(version.name().to_string(), v);
        }
        summary.insert("versions".into(), json!(versions));
        let summary = json!(summary);
        output::write_json(&self.out.join("summary.json"), &summary)?;
        Ok(summary)
    }
}

/// Run everything described by `config`, writing into `out` (or the
/// configured output directory).
pub fn run_pipeline(config: RunConfig, out: Option<&Path>) -> Result<Value> {
    let mut p = Pipeline::new(config)?;
    if let Some(out) = out {
        p = p.with_output(out);
    }
    p.run()
}

/// Serializable view of a version's expected optimum.
#[derive(Debug, Clone, Serialize)]
pub struct OptimumReport {
    pub version: ModelVersion,
    pub optimal_height_m: f64,
    pub expected: ObjectiveVector,
}

impl From<&VersionRun> for OptimumReport {
    fn from(run: &VersionRun) -> Self {
        Self {
            version: run.version,
            optimal_height_m: run.tradeoffs.optimal_height,
            expected: run.tradeoffs.expected[run.tradeoffs.optimal_index],
        }
    }
}
