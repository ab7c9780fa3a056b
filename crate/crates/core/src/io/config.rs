//! Run configuration: one JSON document, validated before any computation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::core_model::{EconomicParams, FloodFrequencyParams, GridSpec, HeightGrid};
use crate::error::{Error, Result};
use crate::objectives::{parse_thresholds, ModelVersion, Thresholds};
use crate::sealevel::{default_assessment, AbruptMode, EnsembleSettings, ResidualModel};
use crate::surge::{default_return_periods, McmcSettings};
use crate::uncertainty::{default_priors, Parameter, PriorSet, PriorSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataFormat {
    /// Rows `year,level_mm`.
    AnnualMean,
    /// Rows `YYYY-MM-DDTHH:MM:SS,level_mm`.
    HighFrequency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    pub path: PathBuf,
    pub format: DataFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeaLevelConfig {
    /// Land subsidence η (m/yr) used when no prior is given.
    pub subsidence: f64,
    /// Linear rise φ (m/yr) of the baseline and parametric versions.
    pub linear_rate: f64,
    pub n_hindcasts: usize,
    pub projection_year: f64,
    pub abrupt_mode: AbruptMode,
    pub c_star_range: [f64; 2],
    pub t_star_range: [f64; 2],
    pub residual_model: ResidualModel,
    pub assessment: PriorSpec,
    pub min_accepted: usize,
    /// Members written to the projection CSV.
    pub projection_members: usize,
}

impl Default for SeaLevelConfig {
    fn default() -> Self {
        Self {
            subsidence: 0.002,
            linear_rate: 0.008,
            n_hindcasts: 55_000,
            projection_year: 2100.0,
            abrupt_mode: AbruptMode::Ramp,
            c_star_range: [0.0, 0.035],
            t_star_range: [2015.0, 2090.0],
            residual_model: ResidualModel::Ar1,
            assessment: default_assessment(),
            min_accepted: 1000,
            projection_members: 200,
        }
    }
}

impl SeaLevelConfig {
    pub fn ensemble_settings(&self) -> EnsembleSettings {
        EnsembleSettings {
            members: self.n_hindcasts,
            residual_model: self.residual_model,
            abrupt: self.abrupt_mode,
            c_star_range: self.c_star_range,
            t_star_range: self.t_star_range,
            subsidence: self.subsidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurgeConfig {
    pub min_obs_per_year: usize,
    pub min_maxima: usize,
    pub mcmc: McmcSettings,
    /// Surge anomaly (mm) at zero effective height; `null` sets it to the
    /// level whose MLE exceedance equals the flood frequency `p₀`.
    pub crest_level: Option<f64>,
    pub level_units_per_meter: f64,
    pub return_periods: Vec<f64>,
}

impl Default for SurgeConfig {
    fn default() -> Self {
        Self {
            min_obs_per_year: 1,
            min_maxima: 20,
            mcmc: McmcSettings::default(),
            crest_level: None,
            level_units_per_meter: 1000.0,
            return_periods: default_return_periods(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    #[serde(default = "default_n_sow")]
    pub n_sow: usize,
    pub seed: u64,
}

fn default_n_sow() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivityConfig {
    pub enabled: bool,
    pub n_base: usize,
    pub oat_points: usize,
    /// Evaluation heightening (m); `null` uses each version's expected optimum.
    pub height: Option<f64>,
    pub second_order: bool,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            n_base: 1024,
            oat_points: 21,
            height: None,
            second_order: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensityConfig {
    pub bins: usize,
    pub log_axes: bool,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            bins: 50,
            log_axes: true,
        }
    }
}

pub fn default_thresholds() -> BTreeMap<String, Thresholds> {
    let two: Thresholds = [("flood_probability".to_string(), 1e-4), ("investment".to_string(), 1e8)].into();
    let mut three = two.clone();
    three.insert("damages".to_string(), 1e6);
    [("two_objective".to_string(), two), ("three_objective".to_string(), three)].into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_versions")]
    pub model_versions: Vec<ModelVersion>,
    #[serde(default = "default_horizon")]
    pub horizon: u32,
    #[serde(default)]
    pub economic: EconomicParams,
    #[serde(default)]
    pub flood_frequency: FloodFrequencyParams,
    /// Record used by the sea-level and surge models.
    #[serde(default)]
    pub tide_gauge: Option<DataSource>,
    #[serde(default)]
    pub sea_level: SeaLevelConfig,
    #[serde(default)]
    pub surge: SurgeConfig,
    #[serde(default = "default_priors")]
    pub priors: PriorSet,
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_thresholds")]
    pub thresholds: BTreeMap<String, Thresholds>,
    #[serde(default)]
    pub density: DensityConfig,
    #[serde(default)]
    pub sensitivity: SensitivityConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_versions() -> Vec<ModelVersion> {
    ModelVersion::ALL.to_vec()
}

fn default_horizon() -> u32 {
    75
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

/// Parameters the calibrated sea-level ensemble supplies.
pub const SLR_PARAMETERS: [Parameter; 5] = [
    Parameter::SlrLevel,
    Parameter::SlrRate,
    Parameter::SlrAcceleration,
    Parameter::AbruptRate,
    Parameter::AbruptOnset,
];

/// Parameters the MCMC chain supplies.
pub const GEV_PARAMETERS: [Parameter; 3] = [Parameter::GevLocation, Parameter::GevScale, Parameter::GevShape];

impl RunConfig {
    /// A config with every default and the given seed.
    pub fn with_seed(seed: u64) -> Self {
        serde_json::from_value(serde_json::json!({ "sampling": { "seed": seed } })).expect("defaults deserialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read a config; relative data paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let (Some(src), Some(dir)) = (cfg.tide_gauge.as_mut(), path.parent()) {
            if src.path.is_relative() {
                src.path = dir.join(&src.path);
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn grid(&self) -> Result<HeightGrid> {
        HeightGrid::try_from(self.grid).map_err(|e| Error::config(format!("grid: {e}")))
    }

    pub fn needs_record(&self) -> bool {
        self.model_versions.iter().any(|v| v.uses_slr_model())
    }

    pub fn needs_surge(&self) -> bool {
        self.model_versions.contains(&ModelVersion::SurgeUpgraded)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::config(e.to_string());
        if self.model_versions.is_empty() {
            return Err(Error::config("model_versions is empty"));
        }
        if self.horizon < 1 {
            return Err(Error::config("horizon must be >= 1"));
        }
        self.economic.validate().map_err(cfg)?;
        self.flood_frequency.validate().map_err(cfg)?;
        self.grid()?;
        if self.sampling.n_sow == 0 {
            return Err(Error::config("sampling.n_sow must be >= 1"));
        }
        for (param, prior) in &self.priors {
            prior.validate().map_err(|e| Error::config(format!("priors.{param}: {e}")))?;
            if self.needs_record() && (SLR_PARAMETERS.contains(param) || GEV_PARAMETERS.contains(param)) {
                return Err(Error::config(format!(
                    "priors.{param}: supplied by the calibrated sea-level or surge model; remove it"
                )));
            }
        }
        for (name, set) in &self.thresholds {
            parse_thresholds(set).map_err(|e| Error::config(format!("thresholds.{name}: {e}")))?;
        }
        if self.needs_record() && self.tide_gauge.is_none() {
            return Err(Error::config("slr_upgraded and surge_upgraded need a tide_gauge data source"));
        }
        let sl = &self.sea_level;
        sl.assessment
            .validate()
            .map_err(|e| Error::config(format!("sea_level.assessment: {e}")))?;
        if sl.n_hindcasts == 0 {
            return Err(Error::config("sea_level.n_hindcasts must be >= 1"));
        }
        if !(sl.c_star_range[0] >= 0.0 && sl.c_star_range[1] >= sl.c_star_range[0]) {
            return Err(Error::config("sea_level.c_star_range must satisfy 0 <= low <= high"));
        }
        if !(sl.t_star_range[1] >= sl.t_star_range[0]) {
            return Err(Error::config("sea_level.t_star_range must be ordered"));
        }
        if let ResidualModel::Block { length } = sl.residual_model {
            if length == 0 {
                return Err(Error::config("sea_level.residual_model.length must be >= 1"));
            }
        }
        let sg = &self.surge;
        sg.mcmc.validate()?;
        if !(sg.level_units_per_meter > 0.0) {
            return Err(Error::config("surge.level_units_per_meter must be > 0"));
        }
        if sg.return_periods.iter().any(|&t| !(t > 1.0)) {
            return Err(Error::config("surge.return_periods must all exceed 1"));
        }
        if matches!(sg.crest_level, Some(c) if !c.is_finite()) {
            return Err(Error::config("surge.crest_level must be finite"));
        }
        let se = &self.sensitivity;
        if se.enabled {
            if se.n_base < 64 || !se.n_base.is_power_of_two() {
                return Err(Error::config("sensitivity.n_base must be a power of two >= 64"));
            }
            if se.oat_points < 3 {
                return Err(Error::config("sensitivity.oat_points must be >= 3"));
            }
        }
        if self.density.bins == 0 {
            return Err(Error::config("density.bins must be >= 1"));
        }
        Ok(())
    }
}
