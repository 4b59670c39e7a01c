//! Error-propagation phase sensitivity `Δ²φ = Var N / (∂⟨N⟩/∂φ)²` on the
//! detected intensity, working-point sweeps, and optimum search.
//!
//! The model applies `±φ` to the two loop directions, so the fringe depends on
//! the differential phase `2φ`. The raw estimator therefore sits a factor
//! [`KAPPA`] below the closed-form expressions, which are normalized for a
//! single differential phase. Reported `delta2phi` and `snl` values are scaled
//! by κ so they line up with the closed forms; `ratio` is unaffected.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form;
use crate::error::{invalid, Error, Result};
use crate::model::{build_and_run, Detection, Model, Scenario, Seed};

/// Convention factor between the `±φ` estimator and the closed forms.
/// [`calibrate_kappa`] re-derives it numerically.
pub const KAPPA: f64 = 4.0;

/// Largest relative spread of κ accepted by [`calibrate_kappa`].
pub const KAPPA_TOLERANCE: f64 = 5e-3;

/// Photon number used as the shot-noise reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnlConvention {
    /// Loop photons of the lossless, perfectly detected configuration.
    LosslessNin,
    /// Loop photons after the loop loss, times the detector efficiency: what
    /// a classical interferometer with the same losses would deliver.
    #[default]
    NumericNin,
}

/// Finite-difference settings for `∂⟨N⟩/∂φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdOptions {
    /// Largest step, radians.
    pub step: f64,
    /// Shrink the step to `max(1e-6, 1e-4·|φ|)` when that is smaller.
    pub adaptive: bool,
    /// One level of Richardson extrapolation on the central difference.
    pub richardson: bool,
    /// Derivatives below this (photons/radian) are treated as stationary.
    pub singular_threshold: f64,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            adaptive: true,
            richardson: true,
            singular_threshold: 1e-12,
        }
    }
}

impl FdOptions {
    pub fn step_at(&self, phi: f64) -> f64 {
        if self.adaptive {
            (1e-4 * phi.abs()).clamp(1e-6, self.step.max(1e-6)).min(self.step)
        } else {
            self.step
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(invalid(format!("finite-difference step {} must be > 0", self.step)));
        }
        if !(self.singular_threshold >= 0.0) {
            return Err(invalid("singular threshold must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitivityPoint {
    pub phi: f64,
    pub mean_n: f64,
    pub var_n: f64,
    pub dmean_dphi: f64,
    /// `+∞` at stationary points of the mean intensity.
    pub delta2phi: f64,
    pub snl: f64,
    pub ratio: f64,
    pub ratio_db: f64,
}

impl SensitivityPoint {
    pub fn is_singular(&self) -> bool {
        self.delta2phi.is_infinite()
    }
}

#[derive(Debug, Clone)]
pub struct SensitivityCurve {
    pub scenario: Scenario,
    pub points: Vec<SensitivityPoint>,
    pub kappa_applied: f64,
    pub snl_convention: SnlConvention,
}

impl SensitivityCurve {
    /// Smallest finite ratio on the curve.
    pub fn best(&self) -> Option<&SensitivityPoint> {
        self.points
            .iter()
            .filter(|p| p.ratio.is_finite())
            .min_by(|a, b| a.ratio.total_cmp(&b.ratio))
    }
}

/// Result of [`Estimator::find_optimum`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Optimum {
    pub phi_star: f64,
    pub point: SensitivityPoint,
    /// The minimizer sits on an edge of the search interval.
    pub at_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaCalibration {
    pub kappa: f64,
    pub max_rel_deviation: f64,
    /// Closed-form over raw numeric `Δ²φ`, one per reference case.
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimator {
    pub fd: FdOptions,
    pub snl_convention: SnlConvention,
    pub kappa: f64,
}

impl Default for Estimator {
    fn default() -> Self {
        Self {
            fd: FdOptions::default(),
            snl_convention: SnlConvention::default(),
            kappa: KAPPA,
        }
    }
}

impl Estimator {
    pub fn with_convention(snl_convention: SnlConvention) -> Self {
        Self {
            snl_convention,
            ..Self::default()
        }
    }

    /// Raw `±φ` estimator without the κ rescaling.
    pub fn native() -> Self {
        Self {
            kappa: 1.0,
            ..Self::default()
        }
    }

    pub fn estimate(&self, scenario: &Scenario, phi: f64) -> Result<SensitivityPoint> {
        self.fd.validate()?;
        let report = build_and_run(scenario, phi)?;
        let moments = report.detector_state.photon_moments(&report.measured_modes)?;
        if !moments.mean_n.is_finite() || !moments.var_n.is_finite() {
            return Err(Error::NumericalFailure {
                phi,
                reason: "photon moments are not finite".into(),
            });
        }

        let h = self.fd.step_at(phi);
        let (coarse, scale) = central_difference(scenario, phi, h)?;
        let dmean_dphi = if self.fd.richardson {
            let (fine, _) = central_difference(scenario, phi, 0.5 * h)?;
            (4.0 * fine - coarse) / 3.0
        } else {
            coarse
        };
        // below this the difference quotient is rounding noise
        let roundoff_floor = 64.0 * f64::EPSILON * scale / h;
        let singular = !(dmean_dphi.abs() > self.fd.singular_threshold.max(roundoff_floor));

        let var_n = moments.var_n.max(0.0);
        let delta2phi = if singular {
            f64::INFINITY
        } else {
            self.kappa * var_n / (dmean_dphi * dmean_dphi)
        };

        let n_ref = match self.snl_convention {
            SnlConvention::LosslessNin => report.n_in,
            SnlConvention::NumericNin => report.n_loop * scenario.detector_efficiency,
        };
        if !(n_ref > 0.0) {
            return Err(Error::Domain(format!(
                "no photons reach the detector at phi = {phi}; the shot-noise reference is undefined"
            )));
        }
        let snl = self.kappa / (4.0 * n_ref);
        let ratio = delta2phi / snl;
        Ok(SensitivityPoint {
            phi,
            mean_n: moments.mean_n,
            var_n,
            dmean_dphi,
            delta2phi,
            snl,
            ratio,
            ratio_db: 10.0 * ratio.log10(),
        })
    }

    /// One point per grid value, in grid order. Points are evaluated in
    /// parallel.
    pub fn sweep(&self, scenario: &Scenario, phi_grid: &[f64]) -> Result<SensitivityCurve> {
        scenario.validate()?;
        if phi_grid.is_empty() {
            return Err(invalid("phase grid is empty"));
        }
        if let Some(w) = phi_grid.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(invalid(format!(
                "phase grid must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        let points = phi_grid
            .par_iter()
            .map(|&phi| {
                self.estimate(scenario, phi).map_err(|e| Error::AtPhase {
                    phi,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SensitivityCurve {
            scenario: scenario.clone(),
            points,
            kappa_applied: self.kappa,
            snl_convention: self.snl_convention,
        })
    }

    /// Minimizes `Δ²φ` over `[lo, hi]`: a log-spaced grid scan followed by
    /// golden-section refinement in `ln φ` around the best grid point.
    pub fn find_optimum(&self, scenario: &Scenario, interval: (f64, f64)) -> Result<Optimum> {
        const GRID_POINTS: usize = 121;
        let (lo, hi) = interval;
        if !(lo > 0.0 && hi > lo && hi < std::f64::consts::FRAC_PI_2) {
            return Err(invalid(format!(
                "search interval [{lo}, {hi}] must lie inside (0, pi/2)"
            )));
        }
        let grid = log_grid(lo, hi, GRID_POINTS);
        let curve = self.sweep(scenario, &grid)?;
        let (best_idx, _) = curve
            .points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.delta2phi.is_finite())
            .min_by(|a, b| a.1.delta2phi.total_cmp(&b.1.delta2phi))
            .ok_or(Error::NoOptimum { lo, hi })?;

        if best_idx == 0 || best_idx == grid.len() - 1 {
            let point = curve.points[best_idx];
            return Ok(Optimum {
                phi_star: point.phi,
                point,
                at_boundary: true,
            });
        }

        let objective = |ln_phi: f64| -> Result<f64> {
            Ok(self.estimate(scenario, ln_phi.exp())?.delta2phi)
        };
        let ln_star = golden_section(
            objective,
            grid[best_idx - 1].ln(),
            grid[best_idx + 1].ln(),
            1e-7,
        )?;
        let refined = self.estimate(scenario, ln_star.exp())?;
        let grid_best = curve.points[best_idx];
        let point = if refined.delta2phi <= grid_best.delta2phi {
            refined
        } else {
            grid_best
        };
        Ok(Optimum {
            phi_star: point.phi,
            point,
            at_boundary: false,
        })
    }
}

fn central_difference(scenario: &Scenario, phi: f64, h: f64) -> Result<(f64, f64)> {
    let mut vacuum_offset = 0.0;
    let mut mean_at = |p: f64| -> Result<f64> {
        let r = build_and_run(scenario, p)?;
        vacuum_offset = 0.5 * r.measured_modes.len() as f64;
        Ok(r.detector_state.photon_moments(&r.measured_modes)?.mean_n)
    };
    let plus = mean_at(phi + h)?;
    let minus = mean_at(phi - h)?;
    // the mean subtracts K/2 from Tr σ, so rounding noise is at least ε·K/2
    let scale = plus.abs().max(minus.abs()) + vacuum_offset;
    Ok(((plus - minus) / (2.0 * h), scale))
}

fn golden_section<F>(f: F, mut a: f64, mut b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| match i {
                    0 => lo,
                    _ if i == n - 1 => hi,
                    _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
                })
                .collect()
        }
    }
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Estimates κ as the median of closed-form over raw numeric `Δ²φ` across
/// lossless degenerate scenarios with a real seed. Parametric-homodyne cases
/// need balanced gains and the default pump phases.
pub fn calibrate_kappa(reference_set: &[(Scenario, f64)]) -> Result<KappaCalibration> {
    if reference_set.is_empty() {
        return Err(invalid("kappa calibration needs at least one reference case"));
    }
    let native = Estimator {
        snl_convention: SnlConvention::LosslessNin,
        ..Estimator::native()
    };
    let mut ratios = reference_set
        .par_iter()
        .map(|(scenario, phi)| {
            let closed = closed_form_counterpart(scenario, *phi)?;
            let numeric = native.estimate(scenario, *phi)?.delta2phi;
            if !numeric.is_finite() {
                return Err(Error::Domain(format!("numeric sensitivity is singular at phi = {phi}")));
            }
            Ok(closed / numeric)
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let kappa = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    let max_rel_deviation = ratios
        .iter()
        .map(|r| (r / kappa - 1.0).abs())
        .fold(0.0, f64::max);
    if !(max_rel_deviation < KAPPA_TOLERANCE) {
        return Err(Error::CalibrationFailure {
            max_rel_deviation,
            limit: KAPPA_TOLERANCE,
        });
    }
    ratios.shrink_to_fit();
    Ok(KappaCalibration {
        kappa,
        max_rel_deviation,
        ratios,
    })
}

/// The standard calibration grid: parametric homodyne, balanced, lossless,
/// `g ∈ {1, 2}`, `N_seed ∈ {10, 100}`, `φ ∈ {1e-3, 1e-2, 1e-1}`.
pub fn standard_reference_set() -> Vec<(Scenario, f64)> {
    let mut set = Vec::new();
    for g in [1.0, 2.0] {
        for n_seed in [10.0, 100.0] {
            for phi in [1e-3, 1e-2, 1e-1] {
                set.push((Scenario::degenerate(Detection::ParametricHomodyne, g, n_seed), phi));
            }
        }
    }
    set
}

fn closed_form_counterpart(scenario: &Scenario, phi: f64) -> Result<f64> {
    scenario.validate()?;
    let alpha2 = match scenario.seed {
        Seed::Degenerate { alpha } if scenario.model == Model::Degenerate && alpha.im == 0.0 => {
            alpha.norm_sqr()
        }
        _ => return Err(invalid("kappa reference cases must be degenerate with a real seed")),
    };
    if scenario.loop_loss.total_transmission != 1.0 || scenario.detector_efficiency != 1.0 {
        return Err(invalid("kappa reference cases must be lossless"));
    }
    if scenario.pump_phase_loop != 0.0 {
        return Err(invalid("kappa reference cases need zero loop pump phase"));
    }
    match scenario.detection {
        Detection::Direct => Ok(closed_form::dd_sensitivity_exact(scenario.gain, alpha2, phi)?.value),
        Detection::ParametricHomodyne => {
            if scenario.measurement_gain != scenario.gain
                || scenario.pump_phase_measurement != std::f64::consts::PI
            {
                return Err(invalid(
                    "parametric-homodyne reference cases need balanced gains and pump phase pi",
                ));
            }
            Ok(closed_form::ph_sensitivity(scenario.gain, alpha2, phi)?.value)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LossPlacement, LoopLossSpec};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn classical_interferometer_reaches_its_own_snl_near_dark_fringe() {
        let s = Scenario::degenerate(Detection::Direct, 0.0, 1e6);
        let p = Estimator::default().estimate(&s, 1e-3).unwrap();
        assert_abs_diff_eq!(p.ratio_db, 0.0, epsilon = 0.1);
        // The dark-port-only readout loses 1/cos²φ away from the dark fringe:
        // 3 dB at mid-fringe.
        let mid = Estimator::default().estimate(&s, FRAC_PI_4).unwrap();
        assert_abs_diff_eq!(mid.ratio_db, 10.0 * 2f64.log10(), epsilon = 1e-6);
    }

    #[test]
    fn balanced_homodyne_matches_closed_form() {
        let s = Scenario::degenerate(Detection::ParametricHomodyne, 2.0, 10.0);
        let p = Estimator::default().estimate(&s, 1e-4).unwrap();
        let closed = closed_form::ph_sensitivity(2.0, 10.0, 1e-4).unwrap().value;
        assert_relative_eq!(p.delta2phi, closed, max_relative = 1e-5);
        assert_abs_diff_eq!(p.ratio, 0.018729, epsilon = 2e-5);
        assert_abs_diff_eq!(p.ratio_db, -17.27, epsilon = 0.1);
    }

    #[test]
    fn derivative_matches_analytic_mean_intensity() {
        // ⟨N⟩ = sin²φ (α² e^{4g} + sinh² 2g) for the balanced lossless case
        for (g, a2, phi) in [(1.0, 10.0, 0.01), (2.0, 100.0, 0.1), (1.5, 3.0, 0.3)] {
            let s = Scenario::degenerate(Detection::ParametricHomodyne, g, a2);
            let p = Estimator::default().estimate(&s, phi).unwrap();
            let amplitude = a2 * (4.0 * g).exp() + (2.0 * g).sinh().powi(2);
            assert_relative_eq!(p.mean_n, phi.sin().powi(2) * amplitude, max_relative = 1e-9);
            assert_relative_eq!(p.dmean_dphi, (2.0 * phi).sin() * amplitude, max_relative = 1e-3);
        }
    }

    #[test]
    fn stationary_point_reports_infinity() {
        let s = Scenario::degenerate(Detection::Direct, 2.0, 1e10);
        let p = Estimator::default().estimate(&s, 0.0).unwrap();
        assert!(p.delta2phi.is_infinite());
        assert!(p.ratio_db.is_infinite());
        assert!(p.is_singular());
    }

    #[test]
    fn unseeded_direct_detection_has_no_signal() {
        // the two squeezed vacua are uncorrelated, so the dark-port mean is
        // flat in phi however much of it is lost
        for transmission in [1.0, 0.19, 0.023] {
            let s = Scenario::degenerate(Detection::Direct, 0.19, 0.0)
                .with_loop_loss(LoopLossSpec {
                    total_transmission: transmission,
                    placement: LossPlacement::Symmetric,
                })
                .with_detector_efficiency(0.81);
            for phi in [1e-5, 1e-3, 0.1, 0.9] {
                let p = Estimator::default().estimate(&s, phi).unwrap();
                assert!(p.is_singular(), "eta {transmission} phi {phi}: {p:?}");
            }
        }
    }

    #[test]
    fn sensitivity_is_even_in_phi() {
        let s = Scenario::degenerate(Detection::Direct, 1.5, 1e6);
        let e = Estimator::default();
        for phi in [1e-3, 0.02, 0.3] {
            let plus = e.estimate(&s, phi).unwrap();
            let minus = e.estimate(&s, -phi).unwrap();
            assert_relative_eq!(plus.delta2phi, minus.delta2phi, max_relative = 1e-6);
            assert_relative_eq!(plus.dmean_dphi, -minus.dmean_dphi, max_relative = 1e-6);
        }
    }

    #[test]
    fn halving_the_step_changes_little() {
        let s = Scenario::degenerate(Detection::ParametricHomodyne, 2.0, 10.0);
        for phi in [1e-3, 1e-2, 0.2] {
            let coarse = Estimator {
                fd: FdOptions { adaptive: false, ..FdOptions::default() },
                ..Estimator::default()
            };
            let fine = Estimator {
                fd: FdOptions { step: 0.5e-5, adaptive: false, ..FdOptions::default() },
                ..Estimator::default()
            };
            let a = coarse.estimate(&s, phi).unwrap().delta2phi;
            let b = fine.estimate(&s, phi).unwrap().delta2phi;
            assert_relative_eq!(a, b, max_relative = 1e-4);
        }
    }

    #[test]
    fn sweep_preserves_order_and_infinities() {
        let s = Scenario::degenerate(Detection::Direct, 1.0, 1e4);
        let grid = [0.0, 1e-3, 1e-2, 0.1];
        let c = Estimator::default().sweep(&s, &grid).unwrap();
        assert_eq!(c.points.len(), 4);
        for (p, phi) in c.points.iter().zip(grid) {
            assert_eq!(p.phi, phi);
        }
        assert!(c.points[0].delta2phi.is_infinite());
        assert_eq!(c.kappa_applied, KAPPA);
        assert!(Estimator::default().sweep(&s, &[0.1, 0.1]).is_err());
        assert!(Estimator::default().sweep(&s, &[]).is_err());
    }

    #[test]
    fn optimum_search() {
        let e = Estimator::default();
        let classical = Scenario::degenerate(Detection::Direct, 0.0, 1e6);
        let opt = e.find_optimum(&classical, (1e-4, 0.5)).unwrap();
        assert_abs_diff_eq!(opt.point.ratio_db, 0.0, epsilon = 0.1);

        let dd = Scenario::degenerate(Detection::Direct, 2.0, 1e10);
        let opt = e.find_optimum(&dd, (1e-5, 0.5)).unwrap();
        assert!(!opt.at_boundary);
        assert!(opt.phi_star > 0.0 && opt.phi_star < 0.1);
        assert!(opt.point.ratio_db <= -16.9, "{}", opt.point.ratio_db);

        let ph = Scenario::degenerate(Detection::ParametricHomodyne, 2.0, 10.0);
        let opt = e.find_optimum(&ph, (1e-4, 0.5)).unwrap();
        assert!(opt.at_boundary);
        assert_eq!(opt.phi_star, 1e-4);
    }

    #[test]
    fn optimum_rejects_bad_interval() {
        let s = Scenario::degenerate(Detection::Direct, 1.0, 100.0);
        assert!(Estimator::default().find_optimum(&s, (0.0, 0.1)).is_err());
        assert!(Estimator::default().find_optimum(&s, (0.1, 2.0)).is_err());
    }

    #[test]
    fn kappa_is_four_across_tracks() {
        let cal = calibrate_kappa(&standard_reference_set()).unwrap();
        assert_abs_diff_eq!(cal.kappa, 4.0, epsilon = 0.02);
        assert!(cal.max_rel_deviation < KAPPA_TOLERANCE);

        let mut mixed = standard_reference_set();
        for phi in [1e-3, 1e-2] {
            mixed.push((Scenario::degenerate(Detection::Direct, 2.0, 1e10), phi));
            mixed.push((Scenario::degenerate(Detection::Direct, 1.0, 1e4), phi));
        }
        mixed.push((Scenario::degenerate(Detection::ParametricHomodyne, 0.0, 10.0), 0.05));
        let cal = calibrate_kappa(&mixed).unwrap();
        assert_abs_diff_eq!(cal.kappa, 4.0, epsilon = 0.02);
        assert!(cal.max_rel_deviation < KAPPA_TOLERANCE);
    }

    #[test]
    fn kappa_rejects_lossy_references() {
        let lossy = Scenario::degenerate(Detection::ParametricHomodyne, 1.0, 10.0)
            .with_loop_loss(LoopLossSpec::from_total_loss(0.1, LossPlacement::Symmetric));
        assert!(calibrate_kappa(&[(lossy, 0.01)]).is_err());
        let unbalanced =
            Scenario::degenerate(Detection::ParametricHomodyne, 1.0, 10.0).with_measurement_gain(2.0);
        assert!(calibrate_kappa(&[(unbalanced, 0.01)]).is_err());
    }

    #[test]
    fn grids() {
        let g = log_grid(1e-4, 1e-1, 4);
        assert_eq!(g.len(), 4);
        assert_relative_eq!(g[1], 1e-3, max_relative = 1e-12);
        assert_eq!(g[3], 1e-1);
        assert_eq!(linear_grid(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
    }
}
