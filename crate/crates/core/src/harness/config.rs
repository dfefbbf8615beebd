//! System and experiment configuration, loadable from TOML.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::beam_design::{HierarchySpec, ScaOptions};
use crate::channel::{NlosModel, ScenarioSpec};
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, CarrierConfig, ModuleLayout, SectorGeometry};
use crate::mumimo::Precoding;

pub const BOLTZMANN: f64 = 1.380_649e-23;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    pub carrier: CarrierConfig,
    pub array: ArrayGeometry,
    pub sector: SectorGeometry,
    /// RF power per AMAF port (dBm).
    pub p_rf_dbm: f64,
    pub noise_figure_db: f64,
    pub temperature_k: f64,
    /// Gap between vertically stacked module apertures (half-wavelengths).
    pub module_gap: f64,
    /// User antenna height above ground (m).
    pub user_height: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            carrier: CarrierConfig::default(),
            array: ArrayGeometry::default(),
            sector: SectorGeometry::default(),
            p_rf_dbm: 32.0,
            noise_figure_db: 5.0,
            temperature_k: 290.0,
            module_gap: 1.0,
            user_height: 0.0,
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        self.carrier.validate()?;
        self.array.validate()?;
        self.sector.validate()?;
        if !(self.temperature_k > 0.0) {
            return Err(Error::invalid("temperature must be positive"));
        }
        if !(self.user_height >= 0.0 && self.user_height < self.sector.bs_height) {
            return Err(Error::invalid("user height must lie in [0, bs_height)"));
        }
        Ok(())
    }

    /// Receiver noise power `k T W · NF` in watts.
    pub fn noise_power(&self) -> f64 {
        BOLTZMANN * self.temperature_k * self.carrier.bandwidth * 10f64.powf(self.noise_figure_db / 10.0)
    }

    pub fn p_rf(&self) -> f64 {
        dbm_to_watts(self.p_rf_dbm)
    }

    /// Vertically stacked layout with one module per beam.
    pub fn layout(&self, modules: usize) -> Result<ModuleLayout> {
        ModuleLayout::stacked(modules, self.array.n_p, self.module_gap)
    }
}

/// Built-in scenario name or an inline cluster list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioChoice {
    Builtin(String),
    Custom(ScenarioSpec),
}

impl ScenarioChoice {
    pub fn resolve(&self) -> Result<ScenarioSpec> {
        match self {
            ScenarioChoice::Builtin(name) => ScenarioSpec::builtin(name),
            ScenarioChoice::Custom(spec) => Ok(spec.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecoderMode {
    Zf,
    None,
    Both,
}

impl PrecoderMode {
    pub fn modes(self) -> Vec<Precoding> {
        match self {
            PrecoderMode::Zf => vec![Precoding::Zf],
            PrecoderMode::None => vec![Precoding::None],
            PrecoderMode::Both => vec![Precoding::Zf, Precoding::None],
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "zf" => Ok(PrecoderMode::Zf),
            "none" => Ok(PrecoderMode::None),
            "both" => Ok(PrecoderMode::Both),
            other => Err(Error::invalid(format!("unknown precoder {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub scenario: ScenarioChoice,
    pub nlos_model: NlosModel,
    pub drops: usize,
    pub slots_per_drop: usize,
    pub users: usize,
    pub seed: u64,
    pub precoder: PrecoderMode,
    pub include_next: bool,
    /// Pilot SNR of the effective-channel estimate (dB); perfect CSI when absent.
    pub pilot_snr_db: Option<f64>,
    pub codebook: HierarchySpec,
    pub sca: ScaOptions,
    /// Keep a per-slot record of group members and rates.
    pub record_slots: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            system: SystemConfig::default(),
            scenario: ScenarioChoice::Builtin("scenario1".into()),
            nlos_model: NlosModel::Specular,
            drops: 100,
            slots_per_drop: 100,
            users: 64,
            seed: 1,
            precoder: PrecoderMode::Both,
            include_next: false,
            pilot_snr_db: None,
            codebook: HierarchySpec::default_three_level(),
            sca: ScaOptions::default(),
            record_slots: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.codebook.validate()?;
        self.scenario.resolve()?;
        if self.drops == 0 || self.slots_per_drop == 0 {
            return Err(Error::invalid("drops and slots_per_drop must be at least 1"));
        }
        if self.users == 0 {
            return Err(Error::invalid("at least one user per drop is required"));
        }
        let leaves = self.codebook.leaf_ids().len();
        if self.users < leaves {
            log::warn!("{} users for {} leaf beams: some pools will stay empty", self.users, leaves);
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}
