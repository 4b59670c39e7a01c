//! The Sagnac loop with an internal parametric amplifier.
//!
//! Mode layout. Degenerate: mode 0 is the seeded port `a`, mode 1 the dark
//! port `b`; after the first splitter they carry the clockwise and
//! counter-clockwise beams, after recombination the dark output `f` (mode 0)
//! and the bright output `h` (mode 1).
//!
//! Non-degenerate: modes 0/1 are signal/idler of the seeded port, modes 2/3
//! signal/idler of the dark port. Inside the loop 0/1 travel clockwise and
//! 2/3 counter-clockwise; at the output 0/1 are the dark-port signal/idler
//! and 2/3 the bright-port pair.
//!
//! The rotation phase enters as `+φ` on every clockwise mode and `-φ` on every
//! counter-clockwise mode. For two-mode squeezing this assigns the pair phase
//! `(φ_s + φ_i)/2` to both signal and idler; the individual optical
//! frequencies and the Sagnac delay only enter through `φ`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian::GaussianState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Degenerate,
    Nondegenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detection {
    Direct,
    ParametricHomodyne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasuredModes {
    Signal,
    Idler,
    Both,
}

/// Coherent seed injected at the bright input port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Seed {
    Degenerate { alpha: Complex64 },
    Nondegenerate { signal: Complex64, idler: Complex64 },
}

impl Seed {
    pub fn real(alpha: f64) -> Self {
        Seed::Degenerate {
            alpha: Complex64::new(alpha, 0.0),
        }
    }

    /// Total seed photon number `|α|²` (summed over signal and idler).
    pub fn photons(&self) -> f64 {
        match self {
            Seed::Degenerate { alpha } => alpha.norm_sqr(),
            Seed::Nondegenerate { signal, idler } => signal.norm_sqr() + idler.norm_sqr(),
        }
    }

    fn has_imaginary_part(&self) -> bool {
        match self {
            Seed::Degenerate { alpha } => alpha.im != 0.0,
            Seed::Nondegenerate { signal, idler } => signal.im != 0.0 || idler.im != 0.0,
        }
    }
}

/// Where the loop loss sits relative to the loop amplifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossPlacement {
    /// Equal loss before and after the amplifier in both directions.
    Symmetric,
    /// Amplifier right next to the splitter: the clockwise beam is lossless
    /// before it and sees the whole loss after it; the counter-clockwise beam
    /// the reverse.
    OpaAtBs,
    /// Clockwise beam sees `η^f` before and `η^{1-f}` after the amplifier;
    /// the counter-clockwise beam the complement.
    Custom { cw_pre_fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopLossSpec {
    /// Round-trip power transmission of each beam, in (0, 1].
    pub total_transmission: f64,
    pub placement: LossPlacement,
}

/// Power transmission before and after the loop amplifier for one direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionLoss {
    pub pre: f64,
    pub post: f64,
}

impl LoopLossSpec {
    pub fn lossless() -> Self {
        Self {
            total_transmission: 1.0,
            placement: LossPlacement::Symmetric,
        }
    }

    /// Loss specified as the fraction of power lost per round trip.
    pub fn from_total_loss(loss: f64, placement: LossPlacement) -> Self {
        Self {
            total_transmission: 1.0 - loss,
            placement,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let eta = self.total_transmission;
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(invalid(format!("loop transmission {eta} outside (0, 1]")));
        }
        if let LossPlacement::Custom { cw_pre_fraction } = self.placement {
            if !(0.0..=1.0).contains(&cw_pre_fraction) {
                return Err(invalid(format!(
                    "cw_pre_fraction {cw_pre_fraction} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// `[clockwise, counter-clockwise]` loss split.
    pub fn per_direction(&self) -> [DirectionLoss; 2] {
        let eta = self.total_transmission;
        let f = match self.placement {
            LossPlacement::Symmetric => 0.5,
            LossPlacement::OpaAtBs => 0.0,
            LossPlacement::Custom { cw_pre_fraction } => cw_pre_fraction,
        };
        let split = |pre_fraction: f64| DirectionLoss {
            pre: eta.powf(pre_fraction),
            post: eta.powf(1.0 - pre_fraction),
        };
        [split(f), split(1.0 - f)]
    }
}

/// One complete interferometer configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub model: Model,
    pub detection: Detection,
    /// Loop amplifier gain `g`.
    pub gain: f64,
    /// Measurement amplifier gain `g_m`; unused for direct detection.
    pub measurement_gain: f64,
    pub pump_phase_loop: f64,
    pub pump_phase_measurement: f64,
    pub seed: Seed,
    pub loop_loss: LoopLossSpec,
    /// Detector power efficiency `T_d²`.
    pub detector_efficiency: f64,
    /// Which dark-port modes are detected (non-degenerate only).
    pub measured_modes: MeasuredModes,
}

impl Scenario {
    /// Lossless degenerate configuration with a real seed of `seed_photons`
    /// photons and balanced gains.
    pub fn degenerate(detection: Detection, gain: f64, seed_photons: f64) -> Self {
        Self {
            model: Model::Degenerate,
            detection,
            gain,
            measurement_gain: gain,
            pump_phase_loop: 0.0,
            pump_phase_measurement: std::f64::consts::PI,
            seed: Seed::real(seed_photons.max(0.0).sqrt()),
            loop_loss: LoopLossSpec::lossless(),
            detector_efficiency: 1.0,
            measured_modes: MeasuredModes::Both,
        }
    }

    /// Lossless non-degenerate configuration with real signal and idler seeds.
    pub fn nondegenerate(
        detection: Detection,
        gain: f64,
        signal_photons: f64,
        idler_photons: f64,
    ) -> Self {
        Self {
            model: Model::Nondegenerate,
            seed: Seed::Nondegenerate {
                signal: Complex64::new(signal_photons.max(0.0).sqrt(), 0.0),
                idler: Complex64::new(idler_photons.max(0.0).sqrt(), 0.0),
            },
            ..Self::degenerate(detection, gain, 0.0)
        }
    }

    pub fn with_measurement_gain(mut self, g_m: f64) -> Self {
        self.measurement_gain = g_m;
        self
    }

    pub fn with_loop_loss(mut self, loss: LoopLossSpec) -> Self {
        self.loop_loss = loss;
        self
    }

    pub fn with_detector_efficiency(mut self, eta_d: f64) -> Self {
        self.detector_efficiency = eta_d;
        self
    }

    pub fn with_measured_modes(mut self, modes: MeasuredModes) -> Self {
        self.measured_modes = modes;
        self
    }

    /// Replaces the seed; the closed-form expressions assume a real seed, so a
    /// complex amplitude is accepted with a warning.
    pub fn with_seed(mut self, seed: Seed) -> Self {
        if seed.has_imaginary_part() {
            log::warn!("seed amplitude has an imaginary part; closed-form comparisons assume a real seed");
        }
        self.seed = seed;
        self
    }

    pub fn num_modes(&self) -> usize {
        match self.model {
            Model::Degenerate => 2,
            Model::Nondegenerate => 4,
        }
    }

    /// The same configuration without loop loss and with a perfect detector.
    pub fn lossless(&self) -> Self {
        Self {
            loop_loss: LoopLossSpec::lossless(),
            detector_efficiency: 1.0,
            ..self.clone()
        }
    }

    pub fn dark_port_modes(&self) -> Vec<usize> {
        match self.model {
            Model::Degenerate => vec![0],
            Model::Nondegenerate => vec![0, 1],
        }
    }

    pub fn bright_port_modes(&self) -> Vec<usize> {
        match self.model {
            Model::Degenerate => vec![1],
            Model::Nondegenerate => vec![2, 3],
        }
    }

    /// Output modes whose summed intensity is detected.
    pub fn detected_modes(&self) -> Vec<usize> {
        match (self.model, self.measured_modes) {
            (Model::Degenerate, _) => vec![0],
            (Model::Nondegenerate, MeasuredModes::Signal) => vec![0],
            (Model::Nondegenerate, MeasuredModes::Idler) => vec![1],
            (Model::Nondegenerate, MeasuredModes::Both) => vec![0, 1],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, g) in [("gain", self.gain), ("measurement_gain", self.measurement_gain)] {
            if !g.is_finite() || g < 0.0 {
                return Err(invalid(format!("{name} = {g} must be finite and >= 0")));
            }
        }
        for (name, p) in [
            ("pump_phase_loop", self.pump_phase_loop),
            ("pump_phase_measurement", self.pump_phase_measurement),
        ] {
            if !p.is_finite() {
                return Err(invalid(format!("{name} must be finite")));
            }
        }
        let eta_d = self.detector_efficiency;
        if !(0.0..=1.0).contains(&eta_d) {
            return Err(invalid(format!("detector_efficiency = {eta_d} outside [0, 1]")));
        }
        self.loop_loss.validate()?;
        match (self.model, &self.seed) {
            (Model::Degenerate, Seed::Degenerate { alpha }) if alpha.is_finite() => Ok(()),
            (Model::Nondegenerate, Seed::Nondegenerate { signal, idler })
                if signal.is_finite() && idler.is_finite() =>
            {
                Ok(())
            }
            (Model::Degenerate, Seed::Degenerate { .. })
            | (Model::Nondegenerate, Seed::Nondegenerate { .. }) => {
                Err(invalid("seed amplitude must be finite"))
            }
            _ => Err(invalid("seed kind does not match the interferometer model")),
        }
    }
}

/// Everything the detector sees, plus the bookkeeping needed for the
/// shot-noise reference.
#[derive(Debug, Clone)]
pub struct DetectionReport {
    /// Full state after the measurement amplifier and detector loss.
    pub detector_state: GaussianState,
    /// Modes of `detector_state` whose intensity is measured.
    pub measured_modes: Vec<usize>,
    /// Loop photon number just before recombination, lossless variant.
    pub n_in: f64,
    /// Loop photon number just before recombination, with the loop loss.
    pub n_loop: f64,
    /// Dark output before the measurement amplifier and detector loss.
    pub dark_port_state: GaussianState,
    /// Bright output (returned towards the seed laser). Not used by any
    /// sensitivity computation.
    pub bright_port_state: GaussianState,
}

/// Propagates the scenario through the interferometer at rotation phase `phi`.
pub fn build_and_run(scenario: &Scenario, phi: f64) -> Result<DetectionReport> {
    scenario.validate()?;
    if !phi.is_finite() {
        return Err(invalid("phase must be finite"));
    }
    let n_in = if scenario.loop_loss.total_transmission == 1.0 {
        None
    } else {
        Some(loop_photons(&scenario.lossless(), 0.0)?)
    };
    let (loop_state, recombined) = propagate(scenario, phi)?;
    let n_loop = total_photons(&loop_state)?;
    let n_in = n_in.unwrap_or(n_loop);

    let dark = scenario.dark_port_modes();
    let dark_port_state = recombined.reduced(&dark)?;
    let bright_port_state = recombined.reduced(&scenario.bright_port_modes())?;

    let mut detector = recombined;
    if scenario.detection == Detection::ParametricHomodyne {
        let (g_m, pump) = (scenario.measurement_gain, scenario.pump_phase_measurement);
        detector = match scenario.model {
            Model::Degenerate => detector.apply_single_mode_squeezer(0, g_m, pump)?,
            Model::Nondegenerate => detector.apply_two_mode_squeezer(0, 1, g_m, pump)?,
        };
    }
    let measured_modes = scenario.detected_modes();
    for &m in &measured_modes {
        detector = detector.apply_loss(m, scenario.detector_efficiency)?;
    }
    if !detector.is_finite() {
        return Err(Error::NumericalFailure {
            phi,
            reason: "detector state has non-finite moments".into(),
        });
    }

    Ok(DetectionReport {
        detector_state: detector,
        measured_modes,
        n_in,
        n_loop,
        dark_port_state,
        bright_port_state,
    })
}

/// Total mean photon number in the loop just before recombination, computed
/// on the lossless variant of the scenario. For a real degenerate seed this is
/// `α² e^{2g} + 2 sinh² g`.
pub fn n_in(scenario: &Scenario) -> Result<f64> {
    scenario.validate()?;
    loop_photons(&scenario.lossless(), 0.0)
}

fn loop_photons(scenario: &Scenario, phi: f64) -> Result<f64> {
    let (loop_state, _) = propagate(scenario, phi)?;
    total_photons(&loop_state)
}

fn total_photons(state: &GaussianState) -> Result<f64> {
    let all: Vec<usize> = (0..state.num_modes()).collect();
    Ok(state.photon_moments(&all)?.mean_n)
}

/// Returns the loop state just before recombination and the state just after.
fn propagate(scenario: &Scenario, phi: f64) -> Result<(GaussianState, GaussianState)> {
    let [cw, ccw] = scenario.loop_loss.per_direction();
    let (g, pump) = (scenario.gain, scenario.pump_phase_loop);
    let mut st = GaussianState::vacuum(scenario.num_modes())?;

    // (mode, direction loss, sign of the Sagnac phase) for every loop mode
    let loop_modes: Vec<(usize, DirectionLoss, f64)> = match scenario.model {
        Model::Degenerate => vec![(0, cw, 1.0), (1, ccw, -1.0)],
        Model::Nondegenerate => vec![(0, cw, 1.0), (1, cw, 1.0), (2, ccw, -1.0), (3, ccw, -1.0)],
    };
    // splitter pairs: (seeded-port mode, dark-port mode)
    let splitter_pairs: &[(usize, usize)] = match scenario.model {
        Model::Degenerate => &[(0, 1)],
        Model::Nondegenerate => &[(0, 2), (1, 3)],
    };

    st = match scenario.seed {
        Seed::Degenerate { alpha } => st.displace(0, alpha.re, alpha.im)?,
        Seed::Nondegenerate { signal, idler } => st
            .displace(0, signal.re, signal.im)?
            .displace(1, idler.re, idler.im)?,
    };
    for &(a, b) in splitter_pairs {
        st = st.apply_beamsplitter(a, b)?;
    }
    for &(m, loss, _) in &loop_modes {
        st = st.apply_loss(m, loss.pre)?;
    }
    st = match scenario.model {
        Model::Degenerate => st
            .apply_single_mode_squeezer(0, g, pump)?
            .apply_single_mode_squeezer(1, g, pump)?,
        Model::Nondegenerate => st
            .apply_two_mode_squeezer(0, 1, g, pump)?
            .apply_two_mode_squeezer(2, 3, g, pump)?,
    };
    for &(m, _, sign) in &loop_modes {
        st = st.apply_phase(m, sign * phi)?;
    }
    for &(m, loss, _) in &loop_modes {
        st = st.apply_loss(m, loss.post)?;
    }
    let loop_state = st.clone();
    for &(a, b) in splitter_pairs {
        st = st.apply_beamsplitter(a, b)?;
    }
    Ok((loop_state, st))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dark_mean_n(s: &Scenario, phi: f64) -> f64 {
        let r = build_and_run(s, phi).unwrap();
        r.dark_port_state.photon_moments(&[0]).unwrap().mean_n
    }

    #[test]
    fn dark_port_is_squeezed_vacuum_at_zero_phase() {
        let s = Scenario::degenerate(Detection::Direct, 2.0, 10.0);
        let r = build_and_run(&s, 0.0).unwrap();
        let d = &r.dark_port_state;
        assert_abs_diff_eq!(d.mean()[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.mean()[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.cov()[(0, 0)], 4f64.exp() / 4.0, epsilon = 1e-10);
        assert_abs_diff_eq!(d.cov()[(1, 1)], (-4f64).exp() / 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d.cov()[(0, 1)], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dark_mean_n(&s, 0.0), 13.1541164180, epsilon = 1e-9);
    }

    #[test]
    fn classical_fringe_without_gain() {
        let s = Scenario::degenerate(Detection::Direct, 0.0, 10.0);
        for phi in [0.0, 0.1, 0.5, 1.0, 2.0] {
            assert_abs_diff_eq!(dark_mean_n(&s, phi), 10.0 * phi.sin().powi(2), epsilon = 1e-12);
        }
    }

    #[test]
    fn amplified_signal_quadrature() {
        let s = Scenario::degenerate(Detection::Direct, 2.0, 10.0);
        let r = build_and_run(&s, 0.01).unwrap();
        let (x, y) = r.dark_port_state.quadrature_means(0).unwrap();
        // ⟨Y⟩ = √10 e^{2} sin φ, ⟨X⟩ = 0 for a real seed
        assert_abs_diff_eq!(y, 10f64.sqrt() * 2f64.exp() * 0.01f64.sin(), epsilon = 1e-12);
        assert_abs_diff_eq!(y, 0.23365, epsilon = 1e-4);
        assert_abs_diff_eq!(x, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn n_in_matches_closed_form() {
        let s = Scenario::degenerate(Detection::Direct, 2.0, 10.0);
        let expected = 10.0 * 4f64.exp() + 2.0 * 2f64.sinh().powi(2);
        assert_abs_diff_eq!(n_in(&s).unwrap(), expected, epsilon = 1e-10);
        assert_abs_diff_eq!(n_in(&s).unwrap(), 572.288, epsilon = 2e-3);
        assert_abs_diff_eq!(
            n_in(&Scenario::degenerate(Detection::Direct, 0.0, 0.0)).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            n_in(&Scenario::degenerate(Detection::Direct, 0.0, 10.0)).unwrap(),
            10.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn n_in_ignores_loss_but_n_loop_does_not() {
        let lossy = Scenario::degenerate(Detection::Direct, 1.0, 50.0)
            .with_loop_loss(LoopLossSpec::from_total_loss(0.3, LossPlacement::Symmetric));
        let r = build_and_run(&lossy, 0.02).unwrap();
        assert_abs_diff_eq!(r.n_in, n_in(&lossy).unwrap(), epsilon = 1e-10);
        assert!(r.n_loop < r.n_in);
    }

    #[test]
    fn splitter_conserves_photons_at_recombination() {
        let s = Scenario::degenerate(Detection::Direct, 1.3, 7.0);
        let r = build_and_run(&s, 0.37).unwrap();
        let dark = r.dark_port_state.photon_moments(&[0]).unwrap().mean_n;
        let bright = r.bright_port_state.photon_moments(&[0]).unwrap().mean_n;
        assert_abs_diff_eq!(dark + bright, r.n_loop, epsilon = 1e-9);
    }

    #[test]
    fn loss_split_per_direction() {
        let eta = 0.49;
        let sym = LoopLossSpec { total_transmission: eta, placement: LossPlacement::Symmetric };
        for d in sym.per_direction() {
            assert_abs_diff_eq!(d.pre, 0.7, epsilon = 1e-15);
            assert_abs_diff_eq!(d.post, 0.7, epsilon = 1e-15);
        }
        let asym = LoopLossSpec { total_transmission: eta, placement: LossPlacement::OpaAtBs };
        let [cw, ccw] = asym.per_direction();
        assert_eq!((cw.pre, cw.post), (1.0, eta));
        assert_eq!((ccw.pre, ccw.post), (eta, 1.0));
        let custom = LoopLossSpec {
            total_transmission: eta,
            placement: LossPlacement::Custom { cw_pre_fraction: 0.25 },
        };
        let [cw, ccw] = custom.per_direction();
        assert_abs_diff_eq!(cw.pre * cw.post, eta, epsilon = 1e-15);
        assert_abs_diff_eq!(cw.pre, ccw.post, epsilon = 1e-15);
    }

    #[test]
    fn invalid_scenarios_rejected() {
        let base = Scenario::degenerate(Detection::Direct, 1.0, 1.0);
        assert!(base.clone().with_detector_efficiency(1.2).validate().is_err());
        assert!(Scenario { gain: -1.0, ..base.clone() }.validate().is_err());
        assert!(Scenario { gain: f64::NAN, ..base.clone() }.validate().is_err());
        assert!(base
            .clone()
            .with_loop_loss(LoopLossSpec { total_transmission: 0.0, placement: LossPlacement::Symmetric })
            .validate()
            .is_err());
        let mismatched = Scenario { model: Model::Nondegenerate, ..base.clone() };
        assert!(mismatched.validate().is_err());
        assert!(build_and_run(&base, f64::NAN).is_err());
    }

    #[test]
    fn nondegenerate_layout() {
        let s = Scenario::nondegenerate(Detection::ParametricHomodyne, 1.0, 2.0, 2.0);
        let r = build_and_run(&s, 0.1).unwrap();
        assert_eq!(r.detector_state.num_modes(), 4);
        assert_eq!(r.dark_port_state.num_modes(), 2);
        assert_eq!(r.measured_modes, vec![0, 1]);
        let single = s.clone().with_measured_modes(MeasuredModes::Idler);
        assert_eq!(build_and_run(&single, 0.1).unwrap().measured_modes, vec![1]);
    }

    #[test]
    fn nondegenerate_unseeded_loop_photons() {
        // four loop modes, each carrying sinh²g of spontaneous photons
        let s = Scenario::nondegenerate(Detection::Direct, 0.8, 0.0, 0.0);
        assert_abs_diff_eq!(n_in(&s).unwrap(), 4.0 * 0.8f64.sinh().powi(2), epsilon = 1e-12);
    }
}
