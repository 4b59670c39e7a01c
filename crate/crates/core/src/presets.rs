//! Frozen scenario sets behind each published figure.

use crate::config::{LoopLossConfig, NamedPlacement, PhaseGrid, PlacementConfig, ScenarioConfig, SeedConfig};
use crate::model::{Detection, MeasuredModes, Model};

pub const PRESET_NAMES: [&str; 9] = [
    "fig4a", "fig4b", "fig5a", "fig5b", "fig6a", "fig6b", "s1", "s2a", "s2b",
];

/// Shared working-point grid: 301 log-spaced phases from 1e-6 to 1 rad.
pub fn default_grid() -> PhaseGrid {
    PhaseGrid::log(1e-6, 1.0, 301)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PresetCurve {
    pub label: String,
    pub config: ScenarioConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigurePreset {
    pub name: &'static str,
    pub title: &'static str,
    pub curves: Vec<PresetCurve>,
}

impl FigurePreset {
    /// `<preset>_<label>.csv` for one curve.
    pub fn file_name(&self, curve: &PresetCurve) -> String {
        format!("{}_{}.csv", self.name, curve.label)
    }
}

fn curve(label: impl Into<String>, config: ScenarioConfig) -> PresetCurve {
    PresetCurve {
        label: label.into(),
        config,
    }
}

fn ph(g: f64, seed: f64) -> ScenarioConfig {
    ScenarioConfig::degenerate(Detection::ParametricHomodyne, g, seed, default_grid())
}

fn dd(g: f64, seed: f64) -> ScenarioConfig {
    ScenarioConfig::degenerate(Detection::Direct, g, seed, default_grid())
}

fn with_loss(mut cfg: ScenarioConfig, loss: f64, placement: NamedPlacement) -> ScenarioConfig {
    cfg.loop_loss = LoopLossConfig {
        total_transmission: 1.0 - loss,
        placement: PlacementConfig::Named(placement),
    };
    cfg
}

fn nondegenerate(
    detection: Detection,
    g: f64,
    seed: SeedConfig,
    measured: MeasuredModes,
) -> ScenarioConfig {
    ScenarioConfig {
        model: Model::Nondegenerate,
        seed,
        measured_modes: measured,
        ..ScenarioConfig::degenerate(detection, g, 0.0, default_grid())
    }
}

/// Compact number for labels: 0.5 → "0.5", 2.0 → "2".
fn num(v: f64) -> String {
    format!("{v}")
}

pub fn preset(name: &str) -> Option<FigurePreset> {
    let p = match name {
        "fig4a" => FigurePreset {
            name: "fig4a",
            title: "Parametric homodyne, lossless, N_seed = 10, balanced gain",
            curves: [0.5, 1.0, 1.5, 2.0]
                .iter()
                .map(|&g| curve(format!("g{}", num(g)), ph(g, 10.0)))
                .collect(),
        },
        "fig4b" => FigurePreset {
            name: "fig4b",
            title: "Parametric homodyne, lossless, unseeded, g = 2, varying g_m",
            curves: [2.0, 2.5, 3.0, 4.0]
                .iter()
                .map(|&g_m| {
                    let mut cfg = ph(2.0, 0.0);
                    cfg.measurement_gain = Some(g_m);
                    curve(format!("gm{}", num(g_m)), cfg)
                })
                .collect(),
        },
        "fig5a" => FigurePreset {
            name: "fig5a",
            title: "Parametric homodyne, g = g_m = 2, N_seed = 100, symmetric loop loss",
            curves: [0.0, 0.1, 0.3, 0.5, 0.9, 0.99]
                .iter()
                .map(|&loss| {
                    curve(
                        format!("loss{}", num((loss * 100.0_f64).round())),
                        with_loss(ph(2.0, 100.0), loss, NamedPlacement::Symmetric),
                    )
                })
                .collect(),
        },
        "fig5b" => FigurePreset {
            name: "fig5b",
            title: "Parametric homodyne, g = g_m = 2, N_seed = 100, symmetric vs asymmetric loss",
            curves: [0.3, 0.99]
                .iter()
                .flat_map(|&loss| {
                    let pct = num((loss * 100.0_f64).round());
                    [
                        curve(
                            format!("symmetric_loss{pct}"),
                            with_loss(ph(2.0, 100.0), loss, NamedPlacement::Symmetric),
                        ),
                        curve(
                            format!("asymmetric_loss{pct}"),
                            with_loss(ph(2.0, 100.0), loss, NamedPlacement::OpaAtBs),
                        ),
                    ]
                })
                .collect(),
        },
        "fig6a" => FigurePreset {
            name: "fig6a",
            title: "Direct detection, g = 2, lossless, varying seed",
            curves: [4, 6, 8, 10]
                .iter()
                .map(|&e| curve(format!("nseed1e{e}"), dd(2.0, 10f64.powi(e))))
                .chain([curve("ph_reference", ph(2.0, 1e10))])
                .collect(),
        },
        "fig6b" => FigurePreset {
            name: "fig6b",
            title: "Direct detection, g = 2, N_seed = 1e10, varying detector efficiency",
            curves: [1.0, 0.9, 0.8, 0.7, 0.5, 0.3]
                .iter()
                .map(|&eta| {
                    let mut cfg = dd(2.0, 1e10);
                    cfg.detector_efficiency = eta;
                    curve(format!("eta{}", num((eta * 100.0_f64).round())), cfg)
                })
                .chain([curve("ph_reference", ph(2.0, 1e10))])
                .collect(),
        },
        "s1" => FigurePreset {
            name: "s1",
            title: "Non-degenerate direct detection, g = 2, N_seed = 1e10, seed distribution",
            curves: vec![
                curve(
                    "single_mode_seed",
                    nondegenerate(
                        Detection::Direct,
                        2.0,
                        SeedConfig::nondegenerate(0.0, 1e5),
                        MeasuredModes::Both,
                    ),
                ),
                curve(
                    "symmetric_seed",
                    nondegenerate(
                        Detection::Direct,
                        2.0,
                        SeedConfig::nondegenerate(5e9f64.sqrt(), 5e9f64.sqrt()),
                        MeasuredModes::Both,
                    ),
                ),
            ],
        },
        "s2a" => FigurePreset {
            name: "s2a",
            title: "Non-degenerate parametric homodyne, single-mode detection, g = 2, N_seed = 10",
            curves: [2.0, 2.5, 3.0, 4.0]
                .iter()
                .map(|&g_m| {
                    let mut cfg = nondegenerate(
                        Detection::ParametricHomodyne,
                        2.0,
                        SeedConfig::nondegenerate(10f64.sqrt(), 0.0),
                        MeasuredModes::Signal,
                    );
                    cfg.measurement_gain = Some(g_m);
                    curve(format!("gm{}", num(g_m)), cfg)
                })
                .collect(),
        },
        "s2b" => FigurePreset {
            name: "s2b",
            title: "Non-degenerate parametric homodyne, dual-mode detection, N_seed = 10, balanced gain",
            curves: [0.7, 1.4, 2.0]
                .iter()
                .map(|&g| {
                    curve(
                        format!("g{}", num(g)),
                        nondegenerate(
                            Detection::ParametricHomodyne,
                            g,
                            SeedConfig::nondegenerate(10f64.sqrt(), 0.0),
                            MeasuredModes::Both,
                        ),
                    )
                })
                .collect(),
        },
        _ => return None,
    };
    Some(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_is_valid() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap();
            assert_eq!(p.name, name);
            assert!(!p.curves.is_empty());
            for c in &p.curves {
                c.config.validate().unwrap_or_else(|e| panic!("{name}/{}: {e}", c.label));
            }
            let mut files: Vec<_> = p.curves.iter().map(|c| p.file_name(c)).collect();
            files.sort();
            files.dedup();
            assert_eq!(files.len(), p.curves.len(), "{name}: duplicate labels");
        }
        assert!(preset("fig7").is_none());
    }

    #[test]
    fn curve_counts() {
        let count = |n: &str| preset(n).unwrap().curves.len();
        assert_eq!(count("fig4a"), 4);
        assert_eq!(count("fig4b"), 4);
        assert_eq!(count("fig5b"), 4);
        assert_eq!(count("s1"), 2);
        assert_eq!(count("s2b"), 3);
    }

    #[test]
    fn labels() {
        let p = preset("fig5b").unwrap();
        let labels: Vec<_> = p.curves.iter().map(|c| c.label.as_str()).collect();
        assert_eq!(
            labels,
            ["symmetric_loss30", "asymmetric_loss30", "symmetric_loss99", "asymmetric_loss99"]
        );
        assert_eq!(p.file_name(&p.curves[0]), "fig5b_symmetric_loss30.csv");
        let p = preset("fig4a").unwrap();
        assert_eq!(p.curves[0].label, "g0.5");
    }
}
