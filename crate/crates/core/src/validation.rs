//! Built-in cross-check suite: Gaussian channels and pipelines against the
//! Fock oracle, and the numeric estimator against the closed forms.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::fock::{
    self, Channel, DiscrepancyReport, FockInput, GaussianLossMap, CHANNEL_TOLERANCE,
    PIPELINE_TOLERANCE,
};
use crate::model::{Detection, LossPlacement, LoopLossSpec, MeasuredModes, Scenario};
use crate::sensitivity::{calibrate_kappa, standard_reference_set, KAPPA, KAPPA_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Channels,
    Pipelines,
    Analytic,
    All,
}

impl Level {
    fn includes(self, other: Level) -> bool {
        self == Level::All || self == other
    }
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "channels" => Ok(Level::Channels),
            "pipelines" => Ok(Level::Pipelines),
            "analytic" => Ok(Level::Analytic),
            "all" => Ok(Level::All),
            _ => Err(format!(
                "unknown validation level `{s}` (expected channels, pipelines, analytic or all)"
            )),
        }
    }
}

/// Deliberate defects for checking that the suite can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// The Gaussian side treats every loss channel as the identity.
    BrokenLossMap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseResult {
    pub group: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CaseResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<9} {:<48} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.group,
            self.name,
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub cases: Vec<CaseResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&CaseResult> {
        self.cases.iter().find(|c| !c.passed)
    }
}

pub fn run(level: Level, fault: Fault) -> ValidationReport {
    let mut cases = Vec::new();
    if level.includes(Level::Channels) {
        cases.extend(channel_cases(fault));
    }
    if level.includes(Level::Pipelines) {
        cases.extend(pipeline_cases());
    }
    if level.includes(Level::Analytic) {
        cases.extend(analytic_cases());
    }
    ValidationReport { cases }
}

/// The five oracle channels, each on vacuum, a coherent state and a
/// squeezed vacuum.
pub fn channel_matrix() -> Vec<(Channel, FockInput)> {
    let channels = [
        Channel::Phase { theta: 0.7 },
        Channel::BeamSplitter,
        Channel::SingleModeSqueezer { gain: 0.5, pump_phase: 0.3 },
        Channel::TwoModeSqueezer { gain: 0.4, pump_phase: -0.5 },
        Channel::Loss { eta: 0.6 },
    ];
    let inputs = [
        FockInput::Vacuum,
        FockInput::Coherent { alpha: Complex64::new(1.0, 0.4) },
        FockInput::Squeezed { gain: 0.5, pump_phase: 0.2 },
    ];
    channels
        .iter()
        .flat_map(|&c| inputs.iter().map(move |&i| (c, i)))
        .collect()
}

fn channel_cases(fault: Fault) -> Vec<CaseResult> {
    let loss_map = match fault {
        Fault::None => GaussianLossMap::Exact,
        Fault::BrokenLossMap => GaussianLossMap::Ignored,
    };
    channel_matrix()
        .par_iter()
        .map(|(channel, input)| {
            let name = format!("{} on {}", channel_name(channel), input_name(input));
            let measured: &[&[usize]] = if channel.arity() == 2 {
                &[&[0], &[1], &[0, 1]]
            } else {
                &[&[0]]
            };
            let outcome: Result<Vec<DiscrepancyReport>> = measured
                .iter()
                .map(|m| adaptive_channel(channel, input, m, loss_map))
                .collect();
            match outcome {
                Ok(reports) => {
                    let passed = reports.iter().all(|r| r.passes_abs(CHANNEL_TOLERANCE));
                    let worst_mean = reports.iter().map(|r| r.abs_error_mean).fold(0.0, f64::max);
                    let worst_var = reports.iter().map(|r| r.abs_error_var).fold(0.0, f64::max);
                    let cutoff = reports.iter().map(|r| r.cutoff).max().unwrap_or(0);
                    CaseResult {
                        group: "channels",
                        name,
                        passed,
                        detail: format!(
                            "|d mean| {worst_mean:.2e}  |d var| {worst_var:.2e}  cutoff {cutoff}"
                        ),
                    }
                }
                Err(e) => CaseResult {
                    group: "channels",
                    name,
                    passed: false,
                    detail: e.to_string(),
                },
            }
        })
        .collect()
}

fn adaptive_channel(
    channel: &Channel,
    input: &FockInput,
    measured: &[usize],
    loss_map: GaussianLossMap,
) -> Result<DiscrepancyReport> {
    let max_cutoff = if channel.arity() == 2 { 60 } else { 160 };
    fock::with_adaptive_cutoff(20, max_cutoff, |c| {
        fock::compare_channel_with(channel, input, c, measured, loss_map)
    })
}

/// Small degenerate pipelines with and without loss and measurement gain,
/// plus one tiny non-degenerate case.
pub fn pipeline_matrix() -> Vec<(String, Scenario, f64, usize)> {
    let sym = |loss| LoopLossSpec::from_total_loss(loss, LossPlacement::Symmetric);
    let asym = |loss| LoopLossSpec::from_total_loss(loss, LossPlacement::OpaAtBs);
    vec![
        (
            "direct g=0.4 N=1 lossless".into(),
            Scenario::degenerate(Detection::Direct, 0.4, 1.0),
            0.05,
            40,
        ),
        (
            "direct g=0.3 N=0.5 sym loss 20% eta_d=0.9".into(),
            Scenario::degenerate(Detection::Direct, 0.3, 0.5)
                .with_loop_loss(sym(0.2))
                .with_detector_efficiency(0.9),
            0.1,
            30,
        ),
        (
            "homodyne g=g_m=0.4 N=0.5 lossless".into(),
            Scenario::degenerate(Detection::ParametricHomodyne, 0.4, 0.5),
            0.1,
            40,
        ),
        (
            "homodyne g=0.3 g_m=0.5 N=0.8 asym loss 30% eta_d=0.8".into(),
            Scenario::degenerate(Detection::ParametricHomodyne, 0.3, 0.8)
                .with_measurement_gain(0.5)
                .with_loop_loss(asym(0.3))
                .with_detector_efficiency(0.8),
            0.2,
            40,
        ),
        (
            "direct g=0 N=1 (linear)".into(),
            Scenario::degenerate(Detection::Direct, 0.0, 1.0),
            0.3,
            20,
        ),
        (
            "nondegenerate direct g=0.1".into(),
            Scenario::nondegenerate(Detection::Direct, 0.1, 0.04, 0.01)
                .with_measured_modes(MeasuredModes::Both),
            0.1,
            6,
        ),
    ]
}

fn pipeline_cases() -> Vec<CaseResult> {
    pipeline_matrix()
        .par_iter()
        .map(|(name, scenario, phi, cutoff)| {
            match fock::compare_pipeline(scenario, *phi, *cutoff) {
                Ok(r) => CaseResult {
                    group: "pipelines",
                    name: name.clone(),
                    passed: r.passes_rel(PIPELINE_TOLERANCE),
                    detail: format!(
                        "rel mean {:.2e}  rel var {:.2e}  tail {:.1e}",
                        r.rel_error_mean(),
                        r.rel_error_var(),
                        r.tail_mass
                    ),
                },
                Err(e) => CaseResult {
                    group: "pipelines",
                    name: name.clone(),
                    passed: false,
                    detail: e.to_string(),
                },
            }
        })
        .collect()
}

fn analytic_cases() -> Vec<CaseResult> {
    let case = |name: &str, set: Vec<(Scenario, f64)>| match calibrate_kappa(&set) {
        Ok(cal) => CaseResult {
            group: "analytic",
            name: name.into(),
            passed: (cal.kappa - KAPPA).abs() <= 0.02 && cal.max_rel_deviation < KAPPA_TOLERANCE,
            detail: format!(
                "kappa {:.5}  max deviation {:.2e}",
                cal.kappa, cal.max_rel_deviation
            ),
        },
        Err(e) => CaseResult {
            group: "analytic",
            name: name.into(),
            passed: false,
            detail: e.to_string(),
        },
    };
    let mut mixed = standard_reference_set();
    for phi in [1e-3, 1e-2] {
        mixed.push((Scenario::degenerate(Detection::Direct, 2.0, 1e10), phi));
        mixed.push((Scenario::degenerate(Detection::Direct, 1.0, 1e4), phi));
    }
    vec![
        case("kappa, homodyne reference grid", standard_reference_set()),
        case("kappa, homodyne and direct", mixed),
    ]
}

fn channel_name(c: &Channel) -> String {
    match *c {
        Channel::Phase { theta } => format!("phase({theta})"),
        Channel::BeamSplitter => "beamsplitter".into(),
        Channel::SingleModeSqueezer { gain, .. } => format!("squeezer(g={gain})"),
        Channel::TwoModeSqueezer { gain, .. } => format!("two-mode squeezer(g={gain})"),
        Channel::Loss { eta } => format!("loss(eta={eta})"),
    }
}

fn input_name(i: &FockInput) -> String {
    match *i {
        FockInput::Vacuum => "vacuum".into(),
        FockInput::Coherent { alpha } => format!("coherent({}{:+}i)", alpha.re, alpha.im),
        FockInput::Squeezed { gain, .. } => format!("squeezed(g={gain})"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_parsing() {
        assert_eq!("all".parse::<Level>().unwrap(), Level::All);
        assert!("bogus".parse::<Level>().is_err());
    }

    #[test]
    fn analytic_level_passes() {
        let r = run(Level::Analytic, Fault::None);
        assert_eq!(r.cases.len(), 2);
        assert!(r.passed(), "{:?}", r.first_failure());
    }

    #[test]
    fn channel_matrix_shape() {
        assert_eq!(channel_matrix().len(), 15);
    }
}
