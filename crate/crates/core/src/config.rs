//! Scenario configuration documents (JSON or TOML) and run metadata.
//!
//! Unknown keys are rejected, defaults are filled in by
//! [`ScenarioConfig::resolved`], and the resolved form is what gets echoed
//! into the metadata sidecar. A metadata document is itself accepted as a
//! config, so a run can be reproduced from its sidecar.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{Detection, LossPlacement, LoopLossSpec, MeasuredModes, Model, Scenario, Seed};
use crate::sensitivity::{linear_grid, log_grid, SnlConvention};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: Model,
    pub detection: Detection,
    pub gain: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement_gain: Option<f64>,
    #[serde(default)]
    pub pump_phase_loop: f64,
    #[serde(default = "default_pump_phase_measurement")]
    pub pump_phase_measurement: f64,
    pub seed: SeedConfig,
    #[serde(default)]
    pub loop_loss: LoopLossConfig,
    #[serde(default = "one")]
    pub detector_efficiency: f64,
    #[serde(default = "both")]
    pub measured_modes: MeasuredModes,
    pub phase_grid: PhaseGrid,
    #[serde(default)]
    pub snl_convention: SnlConvention,
}

fn default_pump_phase_measurement() -> f64 {
    PI
}

fn one() -> f64 {
    1.0
}

fn both() -> MeasuredModes {
    MeasuredModes::Both
}

/// Seed amplitudes as `[re, im]` pairs: `alpha` for the degenerate model,
/// `alpha_signal` / `alpha_idler` for the non-degenerate one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_signal: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_idler: Option<[f64; 2]>,
}

impl SeedConfig {
    pub fn degenerate(alpha: f64) -> Self {
        Self {
            alpha: Some([alpha, 0.0]),
            ..Self::default()
        }
    }

    pub fn nondegenerate(signal: f64, idler: f64) -> Self {
        Self {
            alpha_signal: Some([signal, 0.0]),
            alpha_idler: Some([idler, 0.0]),
            ..Self::default()
        }
    }

    fn to_seed(self, model: Model) -> Result<Seed> {
        let c = |v: [f64; 2]| Complex64::new(v[0], v[1]);
        match model {
            Model::Degenerate => {
                if self.alpha_signal.is_some() || self.alpha_idler.is_some() {
                    return Err(invalid(
                        "seed: alpha_signal/alpha_idler are only valid for the nondegenerate model",
                    ));
                }
                Ok(Seed::Degenerate {
                    alpha: c(self.alpha.unwrap_or([0.0, 0.0])),
                })
            }
            Model::Nondegenerate => {
                if self.alpha.is_some() {
                    return Err(invalid(
                        "seed: alpha is only valid for the degenerate model; use alpha_signal/alpha_idler",
                    ));
                }
                Ok(Seed::Nondegenerate {
                    signal: c(self.alpha_signal.unwrap_or([0.0, 0.0])),
                    idler: c(self.alpha_idler.unwrap_or([0.0, 0.0])),
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopLossConfig {
    pub total_transmission: f64,
    #[serde(default)]
    pub placement: PlacementConfig,
}

impl Default for LoopLossConfig {
    fn default() -> Self {
        Self {
            total_transmission: 1.0,
            placement: PlacementConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlacementConfig {
    Named(NamedPlacement),
    Custom(CustomPlacement),
}

impl Default for PlacementConfig {
    fn default() -> Self {
        PlacementConfig::Named(NamedPlacement::Symmetric)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedPlacement {
    Symmetric,
    OpaAtBs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomPlacement {
    pub cw_pre_fraction: f64,
}

impl From<PlacementConfig> for LossPlacement {
    fn from(p: PlacementConfig) -> Self {
        match p {
            PlacementConfig::Named(NamedPlacement::Symmetric) => LossPlacement::Symmetric,
            PlacementConfig::Named(NamedPlacement::OpaAtBs) => LossPlacement::OpaAtBs,
            PlacementConfig::Custom(c) => LossPlacement::Custom {
                cw_pre_fraction: c.cw_pre_fraction,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridScale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub scale: GridScale,
}

impl PhaseGrid {
    pub fn log(start: f64, stop: f64, points: usize) -> Self {
        Self {
            start,
            stop,
            points,
            scale: GridScale::Log,
        }
    }

    pub fn linear(start: f64, stop: f64, points: usize) -> Self {
        Self {
            start,
            stop,
            points,
            scale: GridScale::Linear,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.start.is_finite() || !self.stop.is_finite() {
            return Err(invalid("phase_grid: start and stop must be finite"));
        }
        if self.points == 0 {
            return Err(invalid("phase_grid.points must be >= 1"));
        }
        if self.points == 1 && self.start != self.stop {
            return Err(invalid("phase_grid: a single point needs start == stop"));
        }
        if self.points > 1 && !(self.stop > self.start) {
            return Err(invalid("phase_grid: stop must exceed start"));
        }
        if self.scale == GridScale::Log && !(self.start > 0.0) {
            return Err(invalid("phase_grid.start must be > 0 for a log grid"));
        }
        Ok(())
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        self.validate()?;
        Ok(match self.scale {
            GridScale::Linear => linear_grid(self.start, self.stop, self.points),
            GridScale::Log => log_grid(self.start, self.stop, self.points),
        })
    }
}

impl ScenarioConfig {
    /// A degenerate, lossless config with a real seed of `seed_photons`.
    pub fn degenerate(detection: Detection, gain: f64, seed_photons: f64, grid: PhaseGrid) -> Self {
        Self {
            model: Model::Degenerate,
            detection,
            gain,
            measurement_gain: None,
            pump_phase_loop: 0.0,
            pump_phase_measurement: PI,
            seed: SeedConfig::degenerate(seed_photons.max(0.0).sqrt()),
            loop_loss: LoopLossConfig::default(),
            detector_efficiency: 1.0,
            measured_modes: MeasuredModes::Both,
            phase_grid: grid,
            snl_convention: SnlConvention::default(),
        }
    }

    /// Parses JSON or TOML text. A run-metadata document is accepted too; its
    /// `resolved_config` is used.
    pub fn from_str_any(text: &str) -> Result<Self> {
        let value: serde_json::Value = match serde_json::from_str(text) {
            Ok(v) => v,
            Err(json_err) => toml::from_str::<toml::Value>(text)
                .map_err(|toml_err| {
                    invalid(format!(
                        "config is neither JSON ({json_err}) nor TOML ({})",
                        toml_err.message()
                    ))
                })
                .and_then(|t| {
                    serde_json::to_value(t).map_err(|e| invalid(format!("config: {e}")))
                })?,
        };
        let value = match value {
            serde_json::Value::Object(mut map) if map.contains_key("resolved_config") => {
                map.remove("resolved_config").unwrap_or_default()
            }
            v => v,
        };
        let cfg: Self = serde_json::from_value(value).map_err(|e| invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_str_any(&text)
    }

    /// Copy with every optional field made explicit.
    pub fn resolved(&self) -> Self {
        Self {
            measurement_gain: Some(self.measurement_gain.unwrap_or(self.gain)),
            ..self.clone()
        }
    }

    /// Checks every field, naming the offending key on failure.
    pub fn validate(&self) -> Result<()> {
        let nonneg = |key: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{key} = {v} must be finite and >= 0")))
            }
        };
        let finite = |key: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{key} must be finite")))
            }
        };
        nonneg("gain", self.gain)?;
        if let Some(g_m) = self.measurement_gain {
            nonneg("measurement_gain", g_m)?;
        }
        finite("pump_phase_loop", self.pump_phase_loop)?;
        finite("pump_phase_measurement", self.pump_phase_measurement)?;
        if !(0.0..=1.0).contains(&self.detector_efficiency) {
            return Err(invalid(format!(
                "detector_efficiency = {} outside [0, 1]",
                self.detector_efficiency
            )));
        }
        let t = self.loop_loss.total_transmission;
        if !(t > 0.0 && t <= 1.0) {
            return Err(invalid(format!("loop_loss.total_transmission = {t} outside (0, 1]")));
        }
        if let PlacementConfig::Custom(c) = self.loop_loss.placement {
            if !(0.0..=1.0).contains(&c.cw_pre_fraction) {
                return Err(invalid(format!(
                    "loop_loss.placement.cw_pre_fraction = {} outside [0, 1]",
                    c.cw_pre_fraction
                )));
            }
        }
        for (key, v) in [
            ("seed.alpha", self.seed.alpha),
            ("seed.alpha_signal", self.seed.alpha_signal),
            ("seed.alpha_idler", self.seed.alpha_idler),
        ] {
            if let Some([re, im]) = v {
                if !re.is_finite() || !im.is_finite() {
                    return Err(invalid(format!("{key} must be finite")));
                }
            }
        }
        self.phase_grid.validate()?;
        self.to_scenario().map(|_| ())
    }

    pub fn to_scenario(&self) -> Result<Scenario> {
        let seed = self.seed.to_seed(self.model)?;
        let scenario = Scenario {
            model: self.model,
            detection: self.detection,
            gain: self.gain,
            measurement_gain: self.measurement_gain.unwrap_or(self.gain),
            pump_phase_loop: self.pump_phase_loop,
            pump_phase_measurement: self.pump_phase_measurement,
            seed,
            loop_loss: LoopLossSpec {
                total_transmission: self.loop_loss.total_transmission,
                placement: self.loop_loss.placement.into(),
            },
            detector_efficiency: self.detector_efficiency,
            measured_modes: self.measured_modes,
        };
        scenario.validate().map_err(|e| match e {
            Error::InvalidArgument(msg) => invalid(format!("scenario: {msg}")),
            other => other,
        })?;
        Ok(scenario)
    }
}

/// Sidecar written next to every CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMetadata {
    pub resolved_config: ScenarioConfig,
    pub kappa_applied: f64,
    pub engine_version: String,
}

impl RunMetadata {
    pub fn new(config: &ScenarioConfig, kappa_applied: f64) -> Self {
        Self {
            resolved_config: config.resolved(),
            kappa_applied,
            engine_version: crate::ENGINE_VERSION.to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metadata serializes")
    }
}
