use std::path::{Path, PathBuf};

use haptikit_core::controller::{overlay_for_condition, Condition, ImpedanceConfig};
use haptikit_core::device::DeviceParams;
use haptikit_core::harness::{Apparatus, HandModel, MappingConfig, OperatorConfig, SessionPlan};
use serde::{Deserialize, Serialize};

use crate::Error;

/// Overlay given either by condition name ("handheld", "knob") or in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OverlaySpec {
    Named(Condition),
    Explicit(ImpedanceConfig),
}

impl OverlaySpec {
    pub fn resolve(&self, device: &DeviceParams) -> ImpedanceConfig {
        match self {
            OverlaySpec::Named(c) => overlay_for_condition(*c, device),
            OverlaySpec::Explicit(cfg) => cfg.clone(),
        }
    }
}

/// Device, overlay, mapping and hand for one input condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationConfig {
    pub device: DeviceParams,
    pub overlay: OverlaySpec,
    pub mapping: MappingConfig,
    pub hand: HandModel,
}

impl StationConfig {
    pub fn for_condition(condition: Condition) -> Self {
        Self {
            device: match condition {
                Condition::Handheld => DeviceParams::default(),
                Condition::Knob => DeviceParams::knob(),
            },
            overlay: OverlaySpec::Named(condition),
            mapping: MappingConfig::for_condition(condition),
            hand: HandModel::for_condition(condition),
        }
    }

    pub fn build(&self, condition: Condition) -> Result<Apparatus, Error> {
        let overlay = self.overlay.resolve(&self.device);
        Ok(Apparatus::new(condition, self.device.clone(), overlay, self.mapping.clone(), self.hand)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stations {
    pub handheld: StationConfig,
    pub knob: StationConfig,
}

impl Default for Stations {
    fn default() -> Self {
        Self {
            handheld: StationConfig::for_condition(Condition::Handheld),
            knob: StationConfig::for_condition(Condition::Knob),
        }
    }
}

impl Stations {
    pub fn get(&self, condition: Condition) -> &StationConfig {
        match condition {
            Condition::Handheld => &self.handheld,
            Condition::Knob => &self.knob,
        }
    }
}

/// Everything needed to run one participant's session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    #[serde(default)]
    pub stations: Stations,
    pub plan: SessionPlan,
    /// Seeds the synthetic operator and its questionnaire answers. Trial
    /// orders come from `plan.seed`.
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Used only for headless runs.
    #[serde(default)]
    pub operator: OperatorConfig,
}

impl SessionConfig {
    pub fn for_participant(participant_id: u32, seed: u64) -> Self {
        Self {
            stations: Stations::default(),
            plan: SessionPlan::for_participant(participant_id, seed),
            seed,
            output_dir: None,
            operator: OperatorConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.plan.validate()?;
        self.operator.validate()?;
        for c in Condition::ALL {
            let station = self.stations.get(c);
            station.build(c)?;
            self.plan.targets(c, station.mapping.screen_width)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<(), Error> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}
