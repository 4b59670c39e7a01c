//! Gaussian states over `M` optical modes and the channels acting on them.
//!
//! Quadratures follow `X = (a + a†)/2`, `Y = (a - a†)/(2i)`, so the vacuum has
//! variance 1/4 in each quadrature, a coherent state of amplitude `α` has mean
//! `(Re α, Im α)`, and the photon number of a mode is `X² + Y² - 1/2`.
//!
//! The mean vector is laid out as `(x₁, y₁, …, x_M, y_M)`. States are plain
//! values: every operation returns a new state and leaves its input intact.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};

/// Numerical tolerances shared by the Gaussian track and its tests.
pub mod tol {
    /// Absolute asymmetry allowed in a covariance matrix.
    pub const SYMMETRY: f64 = 1e-12;
    /// Slack on the uncertainty bound for symplectic eigenvalues.
    pub const PHYSICALITY: f64 = 1e-9;
    /// Agreement required between Gaussian and Fock photon moments.
    pub const MOMENTS: f64 = 1e-6;
}

/// Quadrature variance of the vacuum.
pub const VACUUM_VARIANCE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

/// Mean and variance of the total photon number over a set of modes.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub mean_n: f64,
    pub var_n: f64,
    pub modes: Vec<usize>,
}

impl GaussianState {
    pub fn vacuum(num_modes: usize) -> Result<Self> {
        if num_modes == 0 {
            return Err(invalid("a Gaussian state needs at least one mode"));
        }
        let dim = 2 * num_modes;
        Ok(Self {
            mean: DVector::zeros(dim),
            cov: DMatrix::identity(dim, dim) * VACUUM_VARIANCE,
        })
    }

    /// Builds a state from raw moments. The covariance must be square, match
    /// the mean, and be symmetric within [`tol::SYMMETRY`].
    pub fn from_moments(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(invalid(format!("mean vector length {dim} is not 2M with M >= 1")));
        }
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(invalid(format!(
                "covariance is {}x{}, expected {dim}x{dim}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        let asym = max_asymmetry(&cov);
        if asym > tol::SYMMETRY {
            return Err(invalid(format!("covariance asymmetric by {asym:.3e}")));
        }
        Ok(Self { mean, cov: symmetrized(cov) })
    }

    pub fn num_modes(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// `(⟨X⟩, ⟨Y⟩)` of one mode.
    pub fn quadrature_means(&self, mode: usize) -> Result<(f64, f64)> {
        self.check_mode(mode)?;
        Ok((self.mean[2 * mode], self.mean[2 * mode + 1]))
    }

    /// `(Var X, Var Y)` of one mode.
    pub fn quadrature_variances(&self, mode: usize) -> Result<(f64, f64)> {
        self.check_mode(mode)?;
        Ok((self.cov[(2 * mode, 2 * mode)], self.cov[(2 * mode + 1, 2 * mode + 1)]))
    }

    pub fn is_finite(&self) -> bool {
        self.mean.iter().chain(self.cov.iter()).all(|v| v.is_finite())
    }

    /// Marginal state of the listed modes, in the listed order.
    pub fn reduced(&self, modes: &[usize]) -> Result<Self> {
        self.check_mode_set(modes)?;
        let idx = quadrature_indices(modes);
        let mean = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.mean[i]));
        let cov = DMatrix::from_fn(idx.len(), idx.len(), |r, c| self.cov[(idx[r], idx[c])]);
        Ok(Self { mean, cov })
    }

    pub fn displace(&self, mode: usize, alpha_re: f64, alpha_im: f64) -> Result<Self> {
        self.check_mode(mode)?;
        if !alpha_re.is_finite() || !alpha_im.is_finite() {
            return Err(invalid("displacement amplitude must be finite"));
        }
        let mut out = self.clone();
        out.mean[2 * mode] += alpha_re;
        out.mean[2 * mode + 1] += alpha_im;
        Ok(out)
    }

    /// `a → a e^{iθ}` on one mode.
    pub fn apply_phase(&self, mode: usize, theta: f64) -> Result<Self> {
        self.check_mode(mode)?;
        if !theta.is_finite() {
            return Err(invalid("phase must be finite"));
        }
        let (s, c) = theta.sin_cos();
        let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        Ok(self.transformed(&[mode], &rot))
    }

    /// 50:50 splitter with `A → (A + B)/√2`, `B → (B - A)/√2`.
    pub fn apply_beamsplitter(&self, mode_a: usize, mode_b: usize) -> Result<Self> {
        self.check_pair(mode_a, mode_b)?;
        let r = std::f64::consts::FRAC_1_SQRT_2;
        #[rustfmt::skip]
        let s = DMatrix::from_row_slice(4, 4, &[
             r, 0.0,   r, 0.0,
            0.0,  r, 0.0,   r,
            -r, 0.0,   r, 0.0,
            0.0, -r, 0.0,   r,
        ]);
        Ok(self.transformed(&[mode_a, mode_b], &s))
    }

    /// Degenerate parametric amplifier `a → a cosh g + e^{iθ} a† sinh g`.
    ///
    /// At zero pump phase the X quadrature is stretched by `e^g` and Y is
    /// squeezed by `e^{-g}`; a pump phase of π swaps the two roles.
    pub fn apply_single_mode_squeezer(&self, mode: usize, g: f64, pump_phase: f64) -> Result<Self> {
        self.check_mode(mode)?;
        check_gain(g)?;
        if !pump_phase.is_finite() {
            return Err(invalid("pump phase must be finite"));
        }
        let (ch, sh) = (g.cosh(), g.sinh());
        let (sp, cp) = pump_phase.sin_cos();
        let s = DMatrix::from_row_slice(2, 2, &[ch + sh * cp, sh * sp, sh * sp, ch - sh * cp]);
        Ok(self.transformed(&[mode], &s))
    }

    /// Non-degenerate amplifier `a → a cosh g + e^{iθ} b† sinh g` and
    /// `b → b cosh g + e^{iθ} a† sinh g`.
    pub fn apply_two_mode_squeezer(
        &self,
        mode_a: usize,
        mode_b: usize,
        g: f64,
        pump_phase: f64,
    ) -> Result<Self> {
        self.check_pair(mode_a, mode_b)?;
        check_gain(g)?;
        if !pump_phase.is_finite() {
            return Err(invalid("pump phase must be finite"));
        }
        let (ch, sh) = (g.cosh(), g.sinh());
        let (sp, cp) = pump_phase.sin_cos();
        let (p, q) = (sh * cp, sh * sp);
        #[rustfmt::skip]
        let s = DMatrix::from_row_slice(4, 4, &[
             ch, 0.0,   p,   q,
            0.0,  ch,   q,  -p,
              p,   q,  ch, 0.0,
              q,  -p, 0.0,  ch,
        ]);
        Ok(self.transformed(&[mode_a, mode_b], &s))
    }

    /// Pure-loss channel of power transmission `eta`: the mode is mixed with
    /// vacuum on a beam splitter and the reflected part is discarded.
    pub fn apply_loss(&self, mode: usize, eta: f64) -> Result<Self> {
        self.check_mode(mode)?;
        if !(0.0..=1.0).contains(&eta) {
            return Err(invalid(format!("loss transmission {eta} outside [0, 1]")));
        }
        if eta == 1.0 {
            return Ok(self.clone());
        }
        let t = eta.sqrt();
        let mut out = self.transformed(&[mode], &(DMatrix::identity(2, 2) * t));
        for k in [2 * mode, 2 * mode + 1] {
            out.cov[(k, k)] += (1.0 - eta) * VACUUM_VARIANCE;
        }
        Ok(out)
    }

    /// Mean and variance of the summed photon number of `modes`.
    ///
    /// With `σ`, `m` the covariance and mean restricted to the `K` selected
    /// modes: `⟨N⟩ = Tr σ + mᵀm - K/2` and `Var N = 2 Tr σ² + 4 mᵀσm - K/4`.
    pub fn photon_moments(&self, modes: &[usize]) -> Result<MomentReport> {
        self.check_mode_set(modes)?;
        let sub = self.reduced(modes)?;
        let k = modes.len() as f64;
        let sigma = &sub.cov;
        let m = &sub.mean;
        let mean_n = sigma.trace() + m.dot(m) - 0.5 * k;
        let var_n = 2.0 * (sigma * sigma).trace() + 4.0 * m.dot(&(sigma * m)) - 0.25 * k;
        Ok(MomentReport {
            mean_n,
            var_n,
            modes: modes.to_vec(),
        })
    }

    /// Symplectic spectrum of the covariance, ascending. Physical states have
    /// every value at or above 1/4; pure states sit exactly at 1/4.
    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        let asym = max_asymmetry(&self.cov);
        if asym > tol::SYMMETRY {
            return Err(Error::InternalConsistency(format!(
                "covariance asymmetric by {asym:.3e}"
            )));
        }
        let n = self.num_modes();
        let dim = 2 * n;
        let eig = SymmetricEigen::new(self.cov.clone());
        let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let root = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
        let k = &root * symplectic_form(n) * &root;
        // k is antisymmetric with eigenvalues ±iν, so kᵀk carries ν² twice.
        let mut squares: Vec<f64> = SymmetricEigen::new(k.transpose() * &k)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        squares.sort_by(f64::total_cmp);
        debug_assert_eq!(squares.len(), dim);
        Ok(squares
            .chunks(2)
            .map(|pair| (0.5 * (pair[0] + pair[1])).max(0.0).sqrt())
            .collect())
    }

    /// Applies `S` to the quadratures of `modes`, leaving the rest untouched.
    fn transformed(&self, modes: &[usize], s: &DMatrix<f64>) -> Self {
        let idx = quadrature_indices(modes);
        let k = idx.len();
        let dim = self.mean.len();

        let local_mean = DVector::from_iterator(k, idx.iter().map(|&i| self.mean[i]));
        let new_mean = s * local_mean;
        let mut mean = self.mean.clone();
        for (j, &i) in idx.iter().enumerate() {
            mean[i] = new_mean[j];
        }

        let rows = DMatrix::from_fn(k, dim, |r, c| self.cov[(idx[r], c)]);
        let new_rows = s * rows;
        let mut cov = self.cov.clone();
        for (j, &i) in idx.iter().enumerate() {
            cov.row_mut(i).copy_from(&new_rows.row(j));
        }
        let cols = DMatrix::from_fn(dim, k, |r, c| cov[(r, idx[c])]);
        let new_cols = cols * s.transpose();
        for (j, &i) in idx.iter().enumerate() {
            cov.column_mut(i).copy_from(&new_cols.column(j));
        }

        Self {
            mean,
            cov: symmetrized(cov),
        }
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.num_modes() {
            return Err(invalid(format!(
                "mode {mode} out of range for a {}-mode state",
                self.num_modes()
            )));
        }
        Ok(())
    }

    fn check_pair(&self, a: usize, b: usize) -> Result<()> {
        self.check_mode(a)?;
        self.check_mode(b)?;
        if a == b {
            return Err(invalid(format!("two-mode operation needs distinct modes, got {a} twice")));
        }
        Ok(())
    }

    fn check_mode_set(&self, modes: &[usize]) -> Result<()> {
        if modes.is_empty() {
            return Err(invalid("mode set is empty"));
        }
        for (i, &m) in modes.iter().enumerate() {
            self.check_mode(m)?;
            if modes[..i].contains(&m) {
                return Err(invalid(format!("mode {m} listed twice")));
            }
        }
        Ok(())
    }
}

fn check_gain(g: f64) -> Result<()> {
    if !g.is_finite() || g < 0.0 {
        return Err(invalid(format!("parametric gain {g} must be finite and >= 0")));
    }
    Ok(())
}

fn quadrature_indices(modes: &[usize]) -> Vec<usize> {
    modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect()
}

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for r in 0..n {
        for c in (r + 1)..n {
            worst = worst.max((m[(r, c)] - m[(c, r)]).abs());
        }
    }
    worst
}

fn symmetrized(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// `Ω = ⊕ [[0, 1], [-1, 0]]` in the interleaved quadrature ordering.
fn symplectic_form(num_modes: usize) -> DMatrix<f64> {
    let dim = 2 * num_modes;
    let mut omega = DMatrix::zeros(dim, dim);
    for k in 0..num_modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn squeezed(g: f64) -> GaussianState {
        GaussianState::vacuum(1)
            .unwrap()
            .apply_single_mode_squeezer(0, g, 0.0)
            .unwrap()
    }

    fn assert_states_close(a: &GaussianState, b: &GaussianState, eps: f64) {
        assert_eq!(a.num_modes(), b.num_modes());
        for (x, y) in a.mean.iter().zip(b.mean.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = eps);
        }
        for (x, y) in a.cov.iter().zip(b.cov.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = eps);
        }
    }

    #[test]
    fn vacuum_has_quarter_variance_and_no_photons() {
        let v = GaussianState::vacuum(1).unwrap();
        assert_eq!(v.cov(), &DMatrix::from_diagonal_element(2, 2, 0.25));
        assert_eq!(v.mean(), &DVector::zeros(2));
        let m = v.photon_moments(&[0]).unwrap();
        assert_abs_diff_eq!(m.mean_n, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.var_n, 0.0, epsilon = 1e-15);

        let v2 = GaussianState::vacuum(2).unwrap();
        assert_eq!(v2.cov(), &(DMatrix::identity(4, 4) * 0.25));
    }

    #[test]
    fn zero_modes_rejected() {
        assert!(matches!(GaussianState::vacuum(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn coherent_state_is_poissonian() {
        let s = GaussianState::vacuum(1).unwrap().displace(0, 10f64.sqrt(), 0.0).unwrap();
        assert_abs_diff_eq!(s.mean()[0], 3.16228, epsilon = 1e-5);
        let m = s.photon_moments(&[0]).unwrap();
        assert_abs_diff_eq!(m.mean_n, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.var_n, 10.0, epsilon = 1e-10);

        let v = GaussianState::vacuum(1).unwrap();
        assert_eq!(v.displace(0, 0.0, 0.0).unwrap(), v);
        assert!(v.displace(1, 1.0, 0.0).is_err());
    }

    #[test]
    fn phase_rotates_quadratures() {
        let s = GaussianState::vacuum(1).unwrap().displace(0, 1.0, 0.0).unwrap();
        assert_eq!(s.apply_phase(0, 0.0).unwrap(), s);
        let r = s.apply_phase(0, PI / 2.0).unwrap();
        assert_abs_diff_eq!(r.mean()[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.mean()[1], 1.0, epsilon = 1e-15);

        let sq = squeezed(0.7).displace(0, 0.3, -0.2).unwrap();
        assert_states_close(&sq.apply_phase(0, 2.0 * PI).unwrap(), &sq, 1e-12);
    }

    #[test]
    fn beamsplitter_sign_convention() {
        let alpha = 1.7;
        let s = GaussianState::vacuum(2)
            .unwrap()
            .displace(0, alpha, 0.0)
            .unwrap()
            .apply_beamsplitter(0, 1)
            .unwrap();
        assert_abs_diff_eq!(s.mean()[0], alpha / 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.mean()[2], -alpha / 2f64.sqrt(), epsilon = 1e-15);

        let v = GaussianState::vacuum(2).unwrap();
        assert_states_close(&v.apply_beamsplitter(0, 1).unwrap(), &v, 1e-15);
        assert!(v.apply_beamsplitter(1, 1).is_err());
    }

    #[test]
    fn beamsplitter_round_trip_conserves_photons() {
        let s = GaussianState::vacuum(2)
            .unwrap()
            .displace(0, 1.3, 0.4)
            .unwrap()
            .apply_single_mode_squeezer(1, 0.8, 0.3)
            .unwrap();
        let before = s.photon_moments(&[0, 1]).unwrap().mean_n;
        // split, then recombine with the roles swapped
        let out = s.apply_beamsplitter(0, 1).unwrap().apply_beamsplitter(1, 0).unwrap();
        let after = out.photon_moments(&[0, 1]).unwrap().mean_n;
        assert_abs_diff_eq!(before, after, epsilon = 1e-10);
    }

    #[test]
    fn squeezed_vacuum_moments() {
        let s = squeezed(1.0);
        assert_abs_diff_eq!(s.cov()[(0, 0)], (2.0f64).exp() / 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.cov()[(1, 1)], (-2.0f64).exp() / 4.0, epsilon = 1e-14);
        let m = s.photon_moments(&[0]).unwrap();
        assert_abs_diff_eq!(m.mean_n, 1.38109784554, epsilon = 1e-10);
        // sinh²(2)/2; the Fock oracle reproduces this in tests/oracle.rs
        assert_abs_diff_eq!(m.var_n, 6.57705820900, epsilon = 1e-10);

        let v = GaussianState::vacuum(1).unwrap();
        assert_eq!(v.apply_single_mode_squeezer(0, 0.0, 1.0).unwrap(), v);
        assert!(v.apply_single_mode_squeezer(0, f64::NAN, 0.0).is_err());
        assert!(v.apply_single_mode_squeezer(0, f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn pump_phase_pi_swaps_squeezing_axis() {
        let s = GaussianState::vacuum(1)
            .unwrap()
            .apply_single_mode_squeezer(0, 1.0, PI)
            .unwrap();
        assert_abs_diff_eq!(s.cov()[(0, 0)], (-2.0f64).exp() / 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.cov()[(1, 1)], (2.0f64).exp() / 4.0, epsilon = 1e-14);
    }

    #[test]
    fn two_mode_squeezed_vacuum() {
        let s = GaussianState::vacuum(2)
            .unwrap()
            .apply_two_mode_squeezer(0, 1, 1.0, 0.0)
            .unwrap();
        let both = s.photon_moments(&[0, 1]).unwrap();
        assert_abs_diff_eq!(both.mean_n, 2.0 * 1f64.sinh().powi(2), epsilon = 1e-12);
        assert_abs_diff_eq!(both.mean_n, 2.76219569108, epsilon = 1e-10);
        for m in 0..2 {
            let single = s.photon_moments(&[m]).unwrap();
            assert_abs_diff_eq!(single.mean_n, 1f64.sinh().powi(2), epsilon = 1e-12);
        }
        let v = GaussianState::vacuum(2).unwrap();
        assert_eq!(v.apply_two_mode_squeezer(0, 1, 0.0, 0.4).unwrap(), v);
        assert!(v.apply_two_mode_squeezer(0, 0, 1.0, 0.0).is_err());
    }

    #[test]
    fn loss_map_edge_cases() {
        let s = squeezed(1.2).displace(0, 0.5, 0.1).unwrap();
        assert_eq!(s.apply_loss(0, 1.0).unwrap(), s);
        let gone = s.apply_loss(0, 0.0).unwrap();
        assert_states_close(&gone, &GaussianState::vacuum(1).unwrap(), 1e-15);
        assert!(s.apply_loss(0, 1.2).is_err());
        assert!(s.apply_loss(0, -0.1).is_err());

        let lossy = squeezed(2.0).apply_loss(0, 0.5).unwrap();
        let expected = 0.5 * (-4.0f64).exp() / 4.0 + 0.125;
        assert_abs_diff_eq!(lossy.cov()[(1, 1)], expected, epsilon = 1e-15);
        assert_abs_diff_eq!(lossy.cov()[(1, 1)], 0.12729, epsilon = 1e-5);
    }

    #[test]
    fn loss_scales_cross_covariances() {
        let s = GaussianState::vacuum(2)
            .unwrap()
            .apply_two_mode_squeezer(0, 1, 0.6, 0.0)
            .unwrap();
        let l = s.apply_loss(0, 0.49).unwrap();
        assert_abs_diff_eq!(l.cov()[(0, 2)], 0.7 * s.cov()[(0, 2)], epsilon = 1e-15);
        assert_abs_diff_eq!(l.cov()[(2, 2)], s.cov()[(2, 2)], epsilon = 1e-15);
    }

    #[test]
    fn symplectic_spectrum() {
        let v = GaussianState::vacuum(2).unwrap().symplectic_eigenvalues().unwrap();
        assert_eq!(v.len(), 2);
        for nu in v {
            assert_abs_diff_eq!(nu, 0.25, epsilon = 1e-12);
        }
        let pure = squeezed(2.0).symplectic_eigenvalues().unwrap();
        assert_abs_diff_eq!(pure[0], 0.25, epsilon = 1e-9);
        let mixed = squeezed(2.0).apply_loss(0, 0.5).unwrap().symplectic_eigenvalues().unwrap();
        assert!(mixed[0] > 0.25 + 1e-6);
    }

    #[test]
    fn asymmetric_covariance_rejected() {
        let cov = DMatrix::from_row_slice(2, 2, &[0.25, 0.1, 0.0, 0.25]);
        assert!(GaussianState::from_moments(DVector::zeros(2), cov).is_err());
    }

    #[test]
    fn moment_mode_set_validation() {
        let v = GaussianState::vacuum(2).unwrap();
        assert!(v.photon_moments(&[]).is_err());
        assert!(v.photon_moments(&[2]).is_err());
        assert!(v.photon_moments(&[0, 0]).is_err());
    }
}
