//! Closed-form sensitivity expressions, evaluated exactly as written.
//!
//! These use the single-differential-phase normalization, so absolute phase
//! variances differ from the numeric estimator by the global factor
//! [`crate::sensitivity::KAPPA`]. Ratios to the shot-noise limit need no
//! correction.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaId {
    DirectDetectionExact,
    DirectDetectionSmallPhase,
    SeedThreshold,
    ShotNoiseLimit,
    ParametricHomodyne,
    ParametricHomodyneRatio,
    ParametricHomodyneRatioLargeGain,
    LoopLossRatio,
    DetectorRatio,
    NondegenerateDirectLimit,
}

/// Echo of the arguments a formula was evaluated at.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct FormulaInputs {
    pub g: Option<f64>,
    pub g_m: Option<f64>,
    pub alpha2: Option<f64>,
    pub phi: Option<f64>,
    pub tl2: Option<f64>,
    pub td2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormResult {
    pub value: f64,
    pub formula_id: FormulaId,
    pub inputs: FormulaInputs,
}

impl ClosedFormResult {
    pub fn db(&self) -> f64 {
        10.0 * self.value.log10()
    }
}

/// How a non-degenerate seed is split between signal and idler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedDistribution {
    SingleMode,
    Symmetric,
}

fn check_gain(g: f64) -> Result<()> {
    if !g.is_finite() || g < 0.0 {
        return Err(invalid(format!("gain {g} must be finite and >= 0")));
    }
    Ok(())
}

fn check_open_quadrant(phi: f64) -> Result<()> {
    if !(phi > 0.0 && phi < FRAC_PI_2) {
        return Err(Error::Domain(format!(
            "phi = {phi} must lie strictly inside (0, pi/2)"
        )));
    }
    Ok(())
}

fn result(value: f64, formula_id: FormulaId, inputs: FormulaInputs) -> Result<ClosedFormResult> {
    if !value.is_finite() {
        return Err(Error::Domain(format!("{formula_id:?} is not finite at {inputs:?}")));
    }
    Ok(ClosedFormResult {
        value,
        formula_id,
        inputs,
    })
}

/// Direct-detection phase variance for the lossless loop:
/// `e^{-4g} sinh²(2g)/(2α⁴)·(tan²φ + cot²φ) + (e^{-4g} + tan²φ)/α²`.
pub fn dd_sensitivity_exact(g: f64, alpha2: f64, phi: f64) -> Result<ClosedFormResult> {
    check_gain(g)?;
    if !(alpha2 > 0.0) {
        return Err(invalid("direct detection needs a seed, alpha2 > 0"));
    }
    check_open_quadrant(phi)?;
    let t2 = phi.tan().powi(2);
    let squeeze = (-4.0 * g).exp();
    let value = squeeze * (2.0 * g).sinh().powi(2) / (2.0 * alpha2 * alpha2) * (t2 + 1.0 / t2)
        + (squeeze + t2) / alpha2;
    result(
        value,
        FormulaId::DirectDetectionExact,
        FormulaInputs { g: Some(g), alpha2: Some(alpha2), phi: Some(phi), ..Default::default() },
    )
}

/// Small-phase, moderately-high-gain form of [`dd_sensitivity_exact`]:
/// `e^{-4g}/α² + (φ²/α²)(1 + 1/(8α²)) + 1/(8α⁴φ²)`.
///
/// Meaningful when [`dd_small_phase_regime`] holds.
pub fn dd_sensitivity_small_phase(g: f64, alpha2: f64, phi: f64) -> Result<ClosedFormResult> {
    check_gain(g)?;
    if !(alpha2 > 0.0) {
        return Err(invalid("direct detection needs a seed, alpha2 > 0"));
    }
    check_open_quadrant(phi)?;
    let value = (-4.0 * g).exp() / alpha2
        + phi * phi / alpha2 * (1.0 + 1.0 / (8.0 * alpha2))
        + 1.0 / (8.0 * alpha2 * alpha2 * phi * phi);
    result(
        value,
        FormulaId::DirectDetectionSmallPhase,
        FormulaInputs { g: Some(g), alpha2: Some(alpha2), phi: Some(phi), ..Default::default() },
    )
}

/// Whether the small-phase approximation is within its stated regime:
/// `e^{-4g} sinh²(2g)` within 2% of 1/4 and `φ ≤ 0.01`.
pub fn dd_small_phase_regime(g: f64, phi: f64) -> bool {
    let high_gain = ((-4.0 * g).exp() * (2.0 * g).sinh().powi(2) - 0.25).abs() <= 0.02 * 0.25;
    high_gain && phi > 0.0 && phi <= 0.01
}

/// Seed photon number above which the squeezing floor dominates the vacuum
/// contamination: `e^{4g}/(8φ²)`.
pub fn seed_threshold(g: f64, phi: f64) -> Result<ClosedFormResult> {
    check_gain(g)?;
    if !(phi > 0.0) || !phi.is_finite() {
        return Err(Error::Domain(format!("seed threshold needs phi > 0, got {phi}")));
    }
    result(
        (4.0 * g).exp() / (8.0 * phi * phi),
        FormulaId::SeedThreshold,
        FormulaInputs { g: Some(g), phi: Some(phi), ..Default::default() },
    )
}

/// Shot-noise limit `1/N_in = 1/(α² e^{2g} + 2 sinh² g)`.
pub fn snl(g: f64, alpha2: f64) -> Result<ClosedFormResult> {
    check_gain(g)?;
    if !(alpha2 >= 0.0) {
        return Err(invalid("alpha2 must be >= 0"));
    }
    let photons = alpha2 * (2.0 * g).exp() + 2.0 * g.sinh().powi(2);
    if photons == 0.0 {
        return Err(Error::Domain("no photons in the loop: g = 0 and alpha2 = 0".into()));
    }
    result(
        1.0 / photons,
        FormulaId::ShotNoiseLimit,
        FormulaInputs { g: Some(g), alpha2: Some(alpha2), ..Default::default() },
    )
}

/// Parametric-homodyne phase variance, lossless with balanced gains:
/// `1/D + tan²φ (sinh²4g + 2α² e^{8g}) / (2 D²)` with `D = sinh²2g + α² e^{4g}`.
pub fn ph_sensitivity(g: f64, alpha2: f64, phi: f64) -> Result<ClosedFormResult> {
    check_gain(g)?;
    if !(alpha2 >= 0.0) {
        return Err(invalid("alpha2 must be >= 0"));
    }
    if !(phi.abs() < FRAC_PI_2) {
        return Err(Error::Domain(format!("phi = {phi} must satisfy |phi| < pi/2")));
    }
    let d = (2.0 * g).sinh().powi(2) + alpha2 * (4.0 * g).exp();
    if d == 0.0 {
        return Err(Error::Domain("no signal: g = 0 and alpha2 = 0".into()));
    }
    let value =
        1.0 / d + phi.tan().powi(2) * ((4.0 * g).sinh().powi(2) + 2.0 * alpha2 * (8.0 * g).exp()) / (2.0 * d * d);
    result(
        value,
        FormulaId::ParametricHomodyne,
        FormulaInputs {
            g: Some(g),
            g_m: Some(g),
            alpha2: Some(alpha2),
            phi: Some(phi),
            ..Default::default()
        },
    )
}

/// Best parametric-homodyne enhancement over the shot-noise limit:
/// `(2 sinh²g + α² e^{2g}) / (sinh²2g + α² e^{4g})`. Unseeded this is
/// `1/(2 cosh² g)`.
pub fn ph_ratio_min(g: f64, alpha2: f64) -> Result<ClosedFormResult> {
    check_gain(g)?;
    if !(alpha2 >= 0.0) {
        return Err(invalid("alpha2 must be >= 0"));
    }
    let inputs = FormulaInputs { g: Some(g), alpha2: Some(alpha2), ..Default::default() };
    if g == 0.0 {
        // both numerator and denominator reduce to α²
        if alpha2 == 0.0 {
            return Err(Error::Domain("ratio undefined for g = 0 and alpha2 = 0".into()));
        }
        return result(1.0, FormulaId::ParametricHomodyneRatio, inputs);
    }
    let num = 2.0 * g.sinh().powi(2) + alpha2 * (2.0 * g).exp();
    let den = (2.0 * g).sinh().powi(2) + alpha2 * (4.0 * g).exp();
    result(num / den, FormulaId::ParametricHomodyneRatio, inputs)
}

/// Large-gain form of [`ph_ratio_min`]: `e^{-2g} (4α² + 2)/(4α² + 1)`.
pub fn ph_ratio_large_gain(g: f64, alpha2: f64) -> Result<ClosedFormResult> {
    check_gain(g)?;
    if !(alpha2 >= 0.0) {
        return Err(invalid("alpha2 must be >= 0"));
    }
    result(
        (-2.0 * g).exp() * (4.0 * alpha2 + 2.0) / (4.0 * alpha2 + 1.0),
        FormulaId::ParametricHomodyneRatioLargeGain,
        FormulaInputs { g: Some(g), alpha2: Some(alpha2), ..Default::default() },
    )
}

/// Enhancement with symmetric loop loss, `e^{-2g} T_l² + R_l²`. `tl2` is the
/// power transmission of one loss stage; a loop of total round-trip
/// transmission `η` has `tl2 = √η`.
pub fn loss_ratio(g: f64, tl2: f64) -> Result<ClosedFormResult> {
    check_gain(g)?;
    if !(0.0..=1.0).contains(&tl2) {
        return Err(invalid(format!("tl2 = {tl2} outside [0, 1]")));
    }
    result(
        (-2.0 * g).exp() * tl2 + (1.0 - tl2),
        FormulaId::LoopLossRatio,
        FormulaInputs { g: Some(g), tl2: Some(tl2), ..Default::default() },
    )
}

/// Direct-detection enhancement with detector efficiency `td2`:
/// `T_d² e^{-2g} + R_d²`.
pub fn detector_ratio(g: f64, td2: f64) -> Result<ClosedFormResult> {
    check_gain(g)?;
    if !(0.0..=1.0).contains(&td2) {
        return Err(invalid(format!("td2 = {td2} outside [0, 1]")));
    }
    result(
        td2 * (-2.0 * g).exp() + (1.0 - td2),
        FormulaId::DetectorRatio,
        FormulaInputs { g: Some(g), td2: Some(td2), ..Default::default() },
    )
}

/// Strong-seed direct-detection limit of the non-degenerate loop:
/// `2e^{-2g}` for a single seeded mode, `e^{-2g}` for a symmetric seed.
pub fn nondeg_dd_limit(g: f64, seeding: SeedDistribution) -> Result<ClosedFormResult> {
    check_gain(g)?;
    let base = (-2.0 * g).exp();
    let value = match seeding {
        SeedDistribution::SingleMode => 2.0 * base,
        SeedDistribution::Symmetric => base,
    };
    result(
        value,
        FormulaId::NondegenerateDirectLimit,
        FormulaInputs { g: Some(g), ..Default::default() },
    )
}
