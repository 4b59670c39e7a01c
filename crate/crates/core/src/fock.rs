//! Truncated Fock-space density-matrix simulator used as an independent
//! check on the Gaussian track.
//!
//! Unitary channels are built by exponentiating their quadratic generators on
//! a padded cutoff and projecting back onto the working cutoff. Probability
//! that leaks past the cutoff is never renormalized away; it shows up as
//! `tail_mass = 1 - Tr ρ` and trips [`TAIL_TOLERANCE`].

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};
use std::f64::consts::FRAC_PI_4;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::gaussian::GaussianState;
use crate::model::{build_and_run, Detection, Model, Scenario, Seed};

/// Largest probability mass allowed to leak past the cutoff.
pub const TAIL_TOLERANCE: f64 = 1e-10;

/// Default bound on the product-basis dimension `(cutoff + 1)^modes`.
/// A dense density matrix at this size takes 256 MiB.
pub const DEFAULT_DIMENSION_LIMIT: usize = 4096;

/// Extra levels kept while exponentiating a generator, beyond the cutoff.
const PAD_LEVELS: usize = 20;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Channel {
    /// `a → a e^{iθ}`.
    Phase { theta: f64 },
    /// 50:50 splitter, `A → (A + B)/√2`, `B → (B - A)/√2`.
    BeamSplitter,
    /// `a → a cosh g + e^{iθ} a† sinh g`.
    SingleModeSqueezer { gain: f64, pump_phase: f64 },
    /// `a → a cosh g + e^{iθ} b† sinh g` and the same with `a ↔ b`.
    TwoModeSqueezer { gain: f64, pump_phase: f64 },
    /// Pure loss with power transmission `eta`.
    Loss { eta: f64 },
}

impl Channel {
    pub fn arity(&self) -> usize {
        match self {
            Channel::BeamSplitter | Channel::TwoModeSqueezer { .. } => 2,
            _ => 1,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Channel::Phase { theta } if !theta.is_finite() => Err(invalid("phase must be finite")),
            Channel::SingleModeSqueezer { gain, pump_phase }
            | Channel::TwoModeSqueezer { gain, pump_phase }
                if !(gain >= 0.0 && gain.is_finite() && pump_phase.is_finite()) =>
            {
                Err(invalid(format!("gain {gain} must be finite and >= 0")))
            }
            Channel::Loss { eta } if !(0.0..=1.0).contains(&eta) => {
                Err(invalid(format!("loss transmission {eta} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }

    fn apply_gaussian(&self, st: &GaussianState, modes: &[usize]) -> Result<GaussianState> {
        match *self {
            Channel::Phase { theta } => st.apply_phase(modes[0], theta),
            Channel::BeamSplitter => st.apply_beamsplitter(modes[0], modes[1]),
            Channel::SingleModeSqueezer { gain, pump_phase } => {
                st.apply_single_mode_squeezer(modes[0], gain, pump_phase)
            }
            Channel::TwoModeSqueezer { gain, pump_phase } => {
                st.apply_two_mode_squeezer(modes[0], modes[1], gain, pump_phase)
            }
            Channel::Loss { eta } => st.apply_loss(modes[0], eta),
        }
    }
}

/// Single-mode pure input states with closed-form Fock amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FockInput {
    Vacuum,
    Coherent { alpha: Complex64 },
    /// Squeezed vacuum with the same convention as the squeezer channel.
    Squeezed { gain: f64, pump_phase: f64 },
}

impl FockInput {
    /// Amplitudes `⟨n|ψ⟩` for `n = 0..=cutoff`.
    pub fn amplitudes(&self, cutoff: usize) -> Vec<Complex64> {
        let mut amp = vec![ZERO; cutoff + 1];
        match *self {
            FockInput::Vacuum => amp[0] = Complex64::new(1.0, 0.0),
            FockInput::Coherent { alpha } => {
                amp[0] = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
                for n in 1..=cutoff {
                    amp[n] = amp[n - 1] * alpha / (n as f64).sqrt();
                }
            }
            FockInput::Squeezed { gain, pump_phase } => {
                // c_{2k} = (e^{iθ} tanh g)^k √((2k)!) / (2^k k!) / √cosh g
                let r = Complex64::from_polar(gain.tanh(), pump_phase);
                let mut c = Complex64::new(1.0 / gain.cosh().sqrt(), 0.0);
                for k in 0..=cutoff / 2 {
                    amp[2 * k] = c;
                    let kf = (k + 1) as f64;
                    c *= r * ((2.0 * kf - 1.0) * (2.0 * kf)).sqrt() / (2.0 * kf);
                }
            }
        }
        amp
    }

    fn prepare_gaussian(&self, st: &GaussianState, mode: usize) -> Result<GaussianState> {
        match *self {
            FockInput::Vacuum => Ok(st.clone()),
            FockInput::Coherent { alpha } => st.displace(mode, alpha.re, alpha.im),
            FockInput::Squeezed { gain, pump_phase } => {
                st.apply_single_mode_squeezer(mode, gain, pump_phase)
            }
        }
    }
}

/// Density operator on the product basis `|n_0, …, n_{M-1}⟩`, `n_k ≤ cutoff`,
/// indexed by `Σ n_k (cutoff + 1)^{M-1-k}`.
#[derive(Debug, Clone)]
pub struct FockDensityMatrix {
    num_modes: usize,
    cutoff: usize,
    rho: DMatrix<Complex64>,
}

impl FockDensityMatrix {
    pub fn vacuum(num_modes: usize, cutoff: usize) -> Result<Self> {
        Self::product(&vec![FockInput::Vacuum; num_modes], cutoff, DEFAULT_DIMENSION_LIMIT)
    }

    /// Pure product state, one input per mode.
    pub fn product(inputs: &[FockInput], cutoff: usize, dimension_limit: usize) -> Result<Self> {
        if inputs.is_empty() {
            return Err(invalid("at least one mode is required"));
        }
        if cutoff == 0 {
            return Err(invalid("cutoff must be >= 1"));
        }
        let dim = checked_dimension(inputs.len(), cutoff, dimension_limit)?;
        let mut psi = vec![Complex64::new(1.0, 0.0)];
        for input in inputs {
            let amp = input.amplitudes(cutoff);
            psi = psi
                .iter()
                .flat_map(|&p| amp.iter().map(move |&a| p * a))
                .collect();
        }
        debug_assert_eq!(psi.len(), dim);
        let rho = DMatrix::from_fn(dim, dim, |r, c| psi[r] * psi[c].conj());
        let out = Self {
            num_modes: inputs.len(),
            cutoff,
            rho,
        };
        out.check_tail()?;
        Ok(out)
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dimension(&self) -> usize {
        self.rho.nrows()
    }

    pub fn rho(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn trace(&self) -> f64 {
        self.rho.diagonal().iter().map(|z| z.re).sum()
    }

    /// Probability lost past the cutoff so far.
    pub fn tail_mass(&self) -> f64 {
        (1.0 - self.trace()).max(0.0)
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.rho - self.rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.rho.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Photon-number distribution of one mode.
    pub fn marginal_distribution(&self, mode: usize) -> Result<Vec<f64>> {
        self.check_modes(&[mode])?;
        let mut p = vec![0.0; self.cutoff + 1];
        for i in 0..self.dimension() {
            p[self.digit(i, mode)] += self.rho[(i, i)].re;
        }
        Ok(p)
    }

    /// Mean and variance of the summed photon number of `modes`, taken on
    /// the truncated state as is.
    pub fn photon_moments(&self, modes: &[usize]) -> Result<(f64, f64)> {
        self.check_modes(modes)?;
        let (mut m1, mut m2) = (0.0, 0.0);
        for i in 0..self.dimension() {
            let n: usize = modes.iter().map(|&k| self.digit(i, k)).sum();
            let p = self.rho[(i, i)].re;
            m1 += p * n as f64;
            m2 += p * (n * n) as f64;
        }
        Ok((m1, m2 - m1 * m1))
    }

    pub fn apply(&self, channel: &Channel, modes: &[usize]) -> Result<Self> {
        channel.validate()?;
        if modes.len() != channel.arity() {
            return Err(invalid(format!(
                "channel acts on {} modes, got {}",
                channel.arity(),
                modes.len()
            )));
        }
        self.check_modes(modes)?;
        if modes.len() == 2 && modes[0] == modes[1] {
            return Err(invalid("two-mode channel needs distinct modes"));
        }
        let mut out = match *channel {
            Channel::Phase { theta } => self.phase(modes[0], theta),
            Channel::Loss { eta } => self.loss(modes[0], eta),
            _ => {
                let op = LocalOperator::cached_unitary(channel, self.cutoff);
                let plan = self.embed(modes, &op);
                self.with_rho(plan.conjugate(&self.rho))
            }
        };
        out.symmetrize();
        out.check_tail()?;
        Ok(out)
    }

    fn with_rho(&self, rho: DMatrix<Complex64>) -> Self {
        Self {
            num_modes: self.num_modes,
            cutoff: self.cutoff,
            rho,
        }
    }

    fn symmetrize(&mut self) {
        let d = self.dimension();
        for c in 0..d {
            self.rho[(c, c)].im = 0.0;
            for r in c + 1..d {
                let avg = 0.5 * (self.rho[(r, c)] + self.rho[(c, r)].conj());
                self.rho[(r, c)] = avg;
                self.rho[(c, r)] = avg.conj();
            }
        }
    }

    fn phase(&self, mode: usize, theta: f64) -> Self {
        let factor: Vec<Complex64> = self
            .digits(mode)
            .iter()
            .map(|&n| Complex64::from_polar(1.0, theta * n as f64))
            .collect();
        let mut rho = self.rho.clone();
        for (col, fc) in factor.iter().enumerate() {
            for (z, fr) in rho.column_mut(col).iter_mut().zip(&factor) {
                *z *= fr * fc.conj();
            }
        }
        self.with_rho(rho)
    }

    /// Operator sum with Kraus terms
    /// `E_k = Σ_n √(C(n,k) η^{n-k} (1-η)^k) |n-k⟩⟨n|`.
    fn loss(&self, mode: usize, eta: f64) -> Self {
        if eta == 1.0 {
            return self.clone();
        }
        let c = self.cutoff;
        let mut kraus = vec![vec![0.0; c + 1]; c + 1];
        for n in 0..=c {
            let mut binom = 1.0;
            for k in 0..=n {
                kraus[n][k] = (binom * eta.powi((n - k) as i32) * (1.0 - eta).powi(k as i32)).sqrt();
                binom *= (n - k) as f64 / (k + 1) as f64;
            }
        }
        let stride = self.stride(mode);
        let digit = self.digits(mode);
        let d = self.dimension();
        let mut rho = DMatrix::<Complex64>::zeros(d, d);
        for col in 0..d {
            let n = digit[col];
            for k in 0..=c - n {
                let weight_col = kraus[n + k][k];
                let src = self.rho.column(col + k * stride);
                let src = src.as_slice();
                let mut dst = rho.column_mut(col);
                for (r, z) in dst.as_mut_slice().iter_mut().enumerate() {
                    let m = digit[r];
                    if m + k <= c {
                        *z += src[r + k * stride] * (kraus[m + k][k] * weight_col);
                    }
                }
            }
        }
        self.with_rho(rho)
    }

    /// Lifts a local operator on `modes` to the full product basis.
    fn embed(&self, modes: &[usize], op: &LocalOperator) -> EmbeddedOperator {
        let offsets: Vec<usize> = (0..op.rows.len())
            .map(|l| op.local_digits(l).iter().zip(modes).map(|(&n, &m)| n * self.stride(m)).sum())
            .collect();
        let rows = op
            .rows
            .iter()
            .map(|row| row.iter().map(|&(lp, u)| (offsets[lp], u)).collect())
            .collect();
        let index = (0..self.dimension())
            .map(|i| {
                let l = modes.iter().fold(0, |acc, &m| acc * (self.cutoff + 1) + self.digit(i, m));
                (l, i - offsets[l])
            })
            .collect();
        EmbeddedOperator { rows, index }
    }

    fn digits(&self, mode: usize) -> Vec<usize> {
        (0..self.dimension()).map(|i| self.digit(i, mode)).collect()
    }

    fn stride(&self, mode: usize) -> usize {
        (self.cutoff + 1).pow((self.num_modes - 1 - mode) as u32)
    }

    fn digit(&self, index: usize, mode: usize) -> usize {
        (index / self.stride(mode)) % (self.cutoff + 1)
    }

    fn check_modes(&self, modes: &[usize]) -> Result<()> {
        match modes.iter().find(|&&m| m >= self.num_modes) {
            Some(m) => Err(invalid(format!("mode {m} out of range for {} modes", self.num_modes))),
            None => Ok(()),
        }
    }

    fn check_tail(&self) -> Result<()> {
        let tail = self.tail_mass();
        if tail < TAIL_TOLERANCE {
            return Ok(());
        }
        // Bound each mode's tail by a geometric decay matched to its mean;
        // the square root covers the slower tail of squeezed states.
        let worst_mean = (0..self.num_modes)
            .filter_map(|m| self.photon_moments(&[m]).ok())
            .map(|(mean, _)| mean)
            .fold(0.0, f64::max);
        let decay = (worst_mean / (worst_mean + 1.0)).sqrt();
        let by_decay = if decay > 0.0 && decay < 1.0 {
            ((0.01 * TAIL_TOLERANCE).ln() / decay.ln()).ceil() as usize
        } else {
            0
        };
        Err(Error::CutoffTooSmall {
            cutoff: self.cutoff,
            tail_mass: tail,
            suggested: by_decay.max(self.cutoff + (self.cutoff / 2).max(4)),
        })
    }
}

/// `U ⊗ 1` in sparse form: full index `i` has local row `index[i].0`, and
/// its column partners are `index[i].1 + offset` for each `(offset, u)` in
/// that row.
struct EmbeddedOperator {
    rows: Vec<Vec<(usize, Complex64)>>,
    index: Vec<(usize, usize)>,
}

impl EmbeddedOperator {
    /// `U x U†`.
    fn conjugate(&self, x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let d = x.nrows();
        let mut left = DMatrix::<Complex64>::zeros(d, d);
        for col in 0..d {
            let src = x.column(col);
            let src = src.as_slice();
            let mut dst = left.column_mut(col);
            for (z, &(l, base)) in dst.as_mut_slice().iter_mut().zip(&self.index) {
                *z = self.rows[l].iter().map(|&(off, u)| u * src[base + off]).sum();
            }
        }
        // column c of (U x) U† is Σ_c' conj(U[c, c']) (U x)[:, c']
        let mut out = DMatrix::<Complex64>::zeros(d, d);
        for (col, &(l, base)) in self.index.iter().enumerate() {
            let mut dst = out.column_mut(col);
            let dst = dst.as_mut_slice();
            for &(off, u) in &self.rows[l] {
                let w = u.conj();
                let src = left.column(base + off);
                for (z, s) in dst.iter_mut().zip(src.as_slice()) {
                    *z += w * s;
                }
            }
        }
        out
    }
}

fn checked_dimension(num_modes: usize, cutoff: usize, limit: usize) -> Result<usize> {
    let dim = (cutoff + 1)
        .checked_pow(num_modes as u32)
        .ok_or(Error::ResourceLimit {
            dimension: usize::MAX,
            limit,
        })?;
    if dim > limit {
        return Err(Error::ResourceLimit {
            dimension: dim,
            limit,
        });
    }
    Ok(dim)
}

/// Projected unitary on the local modes of a channel, stored as sparse rows
/// over the local index `Σ n_j (cutoff + 1)^{k-1-j}`.
struct LocalOperator {
    arity: usize,
    cutoff: usize,
    rows: Vec<Vec<(usize, Complex64)>>,
}

type OperatorKey = (u8, u64, u64, usize);

impl LocalOperator {
    /// Block exponentials dominate the cost of a channel and pipelines reuse
    /// the same few channels, so built operators are memoized.
    fn cached_unitary(channel: &Channel, cutoff: usize) -> Arc<Self> {
        const CAPACITY: usize = 64;
        static CACHE: OnceLock<Mutex<HashMap<OperatorKey, Arc<LocalOperator>>>> = OnceLock::new();
        let key = match *channel {
            Channel::BeamSplitter => (0, 0, 0, cutoff),
            Channel::SingleModeSqueezer { gain, pump_phase } => {
                (1, gain.to_bits(), pump_phase.to_bits(), cutoff)
            }
            Channel::TwoModeSqueezer { gain, pump_phase } => {
                (2, gain.to_bits(), pump_phase.to_bits(), cutoff)
            }
            _ => unreachable!("phase and loss are applied directly"),
        };
        let cache = CACHE.get_or_init(Default::default);
        if let Some(op) = cache.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return Arc::clone(op);
        }
        let op = Arc::new(Self::unitary(channel, cutoff));
        let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
        if map.len() >= CAPACITY {
            map.clear();
        }
        map.insert(key, Arc::clone(&op));
        op
    }

    fn unitary(channel: &Channel, cutoff: usize) -> Self {
        let arity = channel.arity();
        let pad = 2 * cutoff + PAD_LEVELS;
        let states: Vec<Vec<usize>> = match arity {
            1 => (0..=pad).map(|n| vec![n]).collect(),
            _ => (0..=pad)
                .flat_map(|a| (0..=pad).map(move |b| vec![a, b]))
                .collect(),
        };

        // Each generator conserves a simple quantity, so its matrix splits
        // into independent blocks labelled by it.
        let sector = |s: &[usize]| -> i64 {
            match channel {
                Channel::SingleModeSqueezer { .. } => (s[0] % 2) as i64,
                Channel::TwoModeSqueezer { .. } => s[0] as i64 - s[1] as i64,
                Channel::BeamSplitter => (s[0] + s[1]) as i64,
                _ => unreachable!("phase and loss are applied directly"),
            }
        };
        let mut sectors: BTreeMap<i64, Vec<Vec<usize>>> = BTreeMap::new();
        for s in states {
            sectors.entry(sector(&s)).or_default().push(s);
        }

        let mut op = Self {
            arity,
            cutoff,
            rows: vec![Vec::new(); (cutoff + 1).pow(arity as u32)],
        };
        for block in sectors.values() {
            if !block.iter().any(|s| s.iter().all(|&n| n <= cutoff)) {
                continue;
            }
            let position: BTreeMap<&[usize], usize> =
                block.iter().enumerate().map(|(i, s)| (s.as_slice(), i)).collect();
            let mut gen = DMatrix::<Complex64>::zeros(block.len(), block.len());
            for (j, s) in block.iter().enumerate() {
                for (target, coeff) in generator_action(channel, s) {
                    if let Some(&i) = position.get(target.as_slice()) {
                        gen[(i, j)] += coeff;
                    }
                }
            }
            let u = gen.exp();
            for (i, si) in block.iter().enumerate() {
                if si.iter().any(|&n| n > cutoff) {
                    continue;
                }
                let row = op.local_index(si);
                for (j, sj) in block.iter().enumerate() {
                    if sj.iter().all(|&n| n <= cutoff) && u[(i, j)] != ZERO {
                        let col = op.local_index(sj);
                        op.rows[row].push((col, u[(i, j)]));
                    }
                }
            }
        }
        op
    }

    fn local_index(&self, s: &[usize]) -> usize {
        s.iter().fold(0, |acc, &n| acc * (self.cutoff + 1) + n)
    }

    fn local_digits(&self, l: usize) -> Vec<usize> {
        let base = self.cutoff + 1;
        (0..self.arity)
            .rev()
            .map(|j| (l / base.pow(j as u32)) % base)
            .collect()
    }
}

/// `G|s⟩` for the anti-Hermitian generator `G` with `U = exp(G)`.
fn generator_action(channel: &Channel, s: &[usize]) -> Vec<(Vec<usize>, Complex64)> {
    let sq = |x: usize| (x as f64).sqrt();
    let mut out = Vec::new();
    match *channel {
        // (g/2)(e^{iθ} a†² - e^{-iθ} a²)
        Channel::SingleModeSqueezer { gain, pump_phase } => {
            let n = s[0];
            let e = Complex64::from_polar(0.5 * gain, pump_phase);
            out.push((vec![n + 2], e * sq((n + 1) * (n + 2))));
            if n >= 2 {
                out.push((vec![n - 2], -e.conj() * sq(n * (n - 1))));
            }
        }
        // g(e^{iθ} a†b† - e^{-iθ} ab)
        Channel::TwoModeSqueezer { gain, pump_phase } => {
            let (a, b) = (s[0], s[1]);
            let e = Complex64::from_polar(gain, pump_phase);
            out.push((vec![a + 1, b + 1], e * sq((a + 1) * (b + 1))));
            if a >= 1 && b >= 1 {
                out.push((vec![a - 1, b - 1], -e.conj() * sq(a * b)));
            }
        }
        // (π/4)(a†b - ab†)
        Channel::BeamSplitter => {
            let (a, b) = (s[0], s[1]);
            let t = Complex64::new(FRAC_PI_4, 0.0);
            if b >= 1 {
                out.push((vec![a + 1, b - 1], t * sq((a + 1) * b)));
            }
            if a >= 1 {
                out.push((vec![a - 1, b + 1], -t * sq(a * (b + 1))));
            }
        }
        Channel::Phase { .. } | Channel::Loss { .. } => {}
    }
    out
}

/// Moment discrepancy between the Gaussian track and the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscrepancyReport {
    pub mean_n_gauss: f64,
    pub mean_n_fock: f64,
    pub var_n_gauss: f64,
    pub var_n_fock: f64,
    pub abs_error_mean: f64,
    pub abs_error_var: f64,
    pub tail_mass: f64,
    pub cutoff: usize,
}

impl DiscrepancyReport {
    fn new(gauss: (f64, f64), fock: (f64, f64), tail_mass: f64, cutoff: usize) -> Self {
        Self {
            mean_n_gauss: gauss.0,
            mean_n_fock: fock.0,
            var_n_gauss: gauss.1,
            var_n_fock: fock.1,
            abs_error_mean: (gauss.0 - fock.0).abs(),
            abs_error_var: (gauss.1 - fock.1).abs(),
            tail_mass,
            cutoff,
        }
    }

    /// Errors relative to the Gaussian values, floored at 1e-8 photons so an
    /// empty port does not divide by zero.
    pub fn rel_error_mean(&self) -> f64 {
        self.abs_error_mean / self.mean_n_gauss.abs().max(1e-8)
    }

    pub fn rel_error_var(&self) -> f64 {
        self.abs_error_var / self.var_n_gauss.abs().max(1e-8)
    }

    pub fn passes_abs(&self, tol: f64) -> bool {
        self.tail_mass < TAIL_TOLERANCE && self.abs_error_mean < tol && self.abs_error_var < tol
    }

    pub fn passes_rel(&self, tol: f64) -> bool {
        self.tail_mass < TAIL_TOLERANCE && self.rel_error_mean() < tol && self.rel_error_var() < tol
    }
}

/// Pass threshold for single-channel comparisons.
pub const CHANNEL_TOLERANCE: f64 = 1e-6;
/// Pass threshold (relative) for full-pipeline comparisons.
pub const PIPELINE_TOLERANCE: f64 = 1e-4;

/// Runs `channel` on `input ⊗ vacuum…` in both tracks and compares the photon
/// moments of `measured`.
pub fn compare_channel(
    channel: &Channel,
    input: &FockInput,
    cutoff: usize,
    measured: &[usize],
) -> Result<DiscrepancyReport> {
    compare_channel_with(channel, input, cutoff, measured, GaussianLossMap::Exact)
}

/// Which loss map the Gaussian side of [`compare_channel_with`] uses.
/// `Ignored` treats every loss as the identity and exists only as a negative
/// control for the validation suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GaussianLossMap {
    #[default]
    Exact,
    Ignored,
}

pub fn compare_channel_with(
    channel: &Channel,
    input: &FockInput,
    cutoff: usize,
    measured: &[usize],
    loss_map: GaussianLossMap,
) -> Result<DiscrepancyReport> {
    channel.validate()?;
    let arity = channel.arity();
    let modes: Vec<usize> = (0..arity).collect();

    let mut inputs = vec![FockInput::Vacuum; arity];
    inputs[0] = *input;
    let rho = FockDensityMatrix::product(&inputs, cutoff, DEFAULT_DIMENSION_LIMIT)?
        .apply(channel, &modes)?;
    let fock = rho.photon_moments(measured)?;

    let mut st = input.prepare_gaussian(&GaussianState::vacuum(arity)?, 0)?;
    st = match (channel, loss_map) {
        (Channel::Loss { .. }, GaussianLossMap::Ignored) => st,
        _ => channel.apply_gaussian(&st, &modes)?,
    };
    let m = st.photon_moments(measured)?;
    Ok(DiscrepancyReport::new((m.mean_n, m.var_n), fock, rho.tail_mass(), cutoff))
}

/// [`compare_channel`] with the cutoff raised from `start` until the tail
/// gate passes or `max_cutoff` is exceeded.
pub fn compare_channel_adaptive(
    channel: &Channel,
    input: &FockInput,
    start: usize,
    max_cutoff: usize,
    measured: &[usize],
) -> Result<DiscrepancyReport> {
    with_adaptive_cutoff(start, max_cutoff, |c| compare_channel(channel, input, c, measured))
}

/// Calls `run` with growing cutoffs, starting at `start`, while it reports
/// [`Error::CutoffTooSmall`] and `max_cutoff` has not been reached.
pub fn with_adaptive_cutoff<F>(start: usize, max_cutoff: usize, mut run: F) -> Result<DiscrepancyReport>
where
    F: FnMut(usize) -> Result<DiscrepancyReport>,
{
    let mut cutoff = start;
    loop {
        match run(cutoff) {
            Err(Error::CutoffTooSmall { suggested, .. }) if cutoff < max_cutoff => {
                // the suggestion is generous; creep up so two-mode runs stay small
                cutoff = suggested.min(cutoff + (cutoff / 4).max(2)).min(max_cutoff);
            }
            other => return other,
        }
    }
}

/// Oracle run of the full interferometer.
#[derive(Debug, Clone)]
pub struct FockPipelineResult {
    pub state: FockDensityMatrix,
    pub measured_modes: Vec<usize>,
}

/// Propagates `scenario` through the interferometer in Fock space.
pub fn run_pipeline(
    scenario: &Scenario,
    phi: f64,
    cutoff: usize,
    dimension_limit: usize,
) -> Result<FockPipelineResult> {
    scenario.validate()?;
    if !phi.is_finite() {
        return Err(invalid("phase must be finite"));
    }
    let inputs: Vec<FockInput> = match scenario.seed {
        Seed::Degenerate { alpha } => vec![FockInput::Coherent { alpha }, FockInput::Vacuum],
        Seed::Nondegenerate { signal, idler } => vec![
            FockInput::Coherent { alpha: signal },
            FockInput::Coherent { alpha: idler },
            FockInput::Vacuum,
            FockInput::Vacuum,
        ],
    };
    let mut rho = FockDensityMatrix::product(&inputs, cutoff, dimension_limit)?;

    let [cw, ccw] = scenario.loop_loss.per_direction();
    let (g, pump) = (scenario.gain, scenario.pump_phase_loop);
    let (pairs, loop_modes): (Vec<(usize, usize)>, Vec<(usize, _, f64)>) = match scenario.model {
        Model::Degenerate => (vec![(0, 1)], vec![(0, cw, 1.0), (1, ccw, -1.0)]),
        Model::Nondegenerate => (
            vec![(0, 2), (1, 3)],
            vec![(0, cw, 1.0), (1, cw, 1.0), (2, ccw, -1.0), (3, ccw, -1.0)],
        ),
    };

    for &(a, b) in &pairs {
        rho = rho.apply(&Channel::BeamSplitter, &[a, b])?;
    }
    for &(m, loss, _) in &loop_modes {
        rho = rho.apply(&Channel::Loss { eta: loss.pre }, &[m])?;
    }
    match scenario.model {
        Model::Degenerate => {
            let sq = Channel::SingleModeSqueezer { gain: g, pump_phase: pump };
            rho = rho.apply(&sq, &[0])?.apply(&sq, &[1])?;
        }
        Model::Nondegenerate => {
            let tms = Channel::TwoModeSqueezer { gain: g, pump_phase: pump };
            rho = rho.apply(&tms, &[0, 1])?.apply(&tms, &[2, 3])?;
        }
    }
    for &(m, _, sign) in &loop_modes {
        rho = rho.apply(&Channel::Phase { theta: sign * phi }, &[m])?;
    }
    for &(m, loss, _) in &loop_modes {
        rho = rho.apply(&Channel::Loss { eta: loss.post }, &[m])?;
    }
    for &(a, b) in &pairs {
        rho = rho.apply(&Channel::BeamSplitter, &[a, b])?;
    }
    if scenario.detection == Detection::ParametricHomodyne {
        let (g_m, pump_m) = (scenario.measurement_gain, scenario.pump_phase_measurement);
        rho = match scenario.model {
            Model::Degenerate => rho.apply(
                &Channel::SingleModeSqueezer { gain: g_m, pump_phase: pump_m },
                &[0],
            )?,
            Model::Nondegenerate => rho.apply(
                &Channel::TwoModeSqueezer { gain: g_m, pump_phase: pump_m },
                &[0, 1],
            )?,
        };
    }
    let measured_modes = scenario.detected_modes();
    for &m in &measured_modes {
        rho = rho.apply(&Channel::Loss { eta: scenario.detector_efficiency }, &[m])?;
    }
    Ok(FockPipelineResult {
        state: rho,
        measured_modes,
    })
}

/// Compares detected-intensity moments of the full pipeline between the
/// Gaussian engine and the oracle.
pub fn compare_pipeline(scenario: &Scenario, phi: f64, cutoff: usize) -> Result<DiscrepancyReport> {
    compare_pipeline_with_limit(scenario, phi, cutoff, DEFAULT_DIMENSION_LIMIT)
}

pub fn compare_pipeline_with_limit(
    scenario: &Scenario,
    phi: f64,
    cutoff: usize,
    dimension_limit: usize,
) -> Result<DiscrepancyReport> {
    check_pipeline_domain(scenario, cutoff)?;
    let fock = run_pipeline(scenario, phi, cutoff, dimension_limit)?;
    let report = build_and_run(scenario, phi)?;
    let gauss = report.detector_state.photon_moments(&report.measured_modes)?;
    let fock_moments = fock.state.photon_moments(&fock.measured_modes)?;
    Ok(DiscrepancyReport::new(
        (gauss.mean_n, gauss.var_n),
        fock_moments,
        fock.state.tail_mass(),
        cutoff,
    ))
}

fn check_pipeline_domain(scenario: &Scenario, cutoff: usize) -> Result<()> {
    let g_m = match scenario.detection {
        Detection::Direct => 0.0,
        Detection::ParametricHomodyne => scenario.measurement_gain,
    };
    match scenario.model {
        Model::Degenerate => {
            if scenario.gain > 0.5 || g_m > 0.5 || scenario.seed.photons() > 1.0 {
                return Err(invalid(
                    "oracle pipelines are limited to g <= 0.5, g_m <= 0.5, |alpha|^2 <= 1",
                ));
            }
        }
        Model::Nondegenerate => {
            if scenario.gain > 0.3 || g_m > 0.3 || cutoff > 10 || scenario.seed.photons() > 1.0 {
                return Err(invalid(
                    "non-degenerate oracle pipelines are limited to g <= 0.3, cutoff <= 10, total seed <= 1",
                ));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LossPlacement, LoopLossSpec, MeasuredModes};
    use approx::assert_abs_diff_eq;

    fn sq(gain: f64) -> Channel {
        Channel::SingleModeSqueezer { gain, pump_phase: 0.0 }
    }

    #[test]
    fn squeezer_on_vacuum_matches_sinh_squared() {
        let rho = FockDensityMatrix::vacuum(1, 40).unwrap().apply(&sq(0.5), &[0]).unwrap();
        let (mean, _) = rho.photon_moments(&[0]).unwrap();
        assert_abs_diff_eq!(mean, 0.5f64.sinh().powi(2), epsilon = 1e-8);
    }

    #[test]
    fn squeezer_channel_agrees_with_analytic_input() {
        let built = FockDensityMatrix::vacuum(1, 30).unwrap().apply(&sq(0.4), &[0]).unwrap();
        let analytic = FockDensityMatrix::product(
            &[FockInput::Squeezed { gain: 0.4, pump_phase: 0.0 }],
            30,
            DEFAULT_DIMENSION_LIMIT,
        )
        .unwrap();
        let diff = (built.rho() - analytic.rho()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "{diff}");
    }

    #[test]
    fn coherent_loss_attenuates_linearly() {
        let input = FockInput::Coherent { alpha: Complex64::new(1.0, 0.0) };
        let rho = FockDensityMatrix::product(&[input], 30, DEFAULT_DIMENSION_LIMIT)
            .unwrap()
            .apply(&Channel::Loss { eta: 0.36 }, &[0])
            .unwrap();
        let (mean, var) = rho.photon_moments(&[0]).unwrap();
        assert_abs_diff_eq!(mean, 0.36, epsilon = 1e-8);
        assert_abs_diff_eq!(var, 0.36, epsilon = 1e-8);
    }

    #[test]
    fn two_mode_squeezed_vacuum_is_symmetric() {
        let tms = Channel::TwoModeSqueezer { gain: 0.5, pump_phase: 0.0 };
        let rho = FockDensityMatrix::vacuum(2, 20).unwrap().apply(&tms, &[0, 1]).unwrap();
        let (p0, p1) = (rho.marginal_distribution(0).unwrap(), rho.marginal_distribution(1).unwrap());
        for (a, b) in p0.iter().zip(&p1) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        let (_, joint_var) = rho.photon_moments(&[0, 1]).unwrap();
        assert_abs_diff_eq!(joint_var, 1f64.sinh().powi(2), epsilon = 1e-8);
    }

    #[test]
    fn unitaries_keep_the_state_physical() {
        let tms = Channel::TwoModeSqueezer { gain: 0.3, pump_phase: 0.7 };
        let rho = FockDensityMatrix::product(
            &[FockInput::Coherent { alpha: Complex64::new(0.6, -0.3) }, FockInput::Vacuum],
            16,
            DEFAULT_DIMENSION_LIMIT,
        )
        .unwrap()
        .apply(&Channel::BeamSplitter, &[0, 1])
        .unwrap()
        .apply(&tms, &[0, 1])
        .unwrap()
        .apply(&Channel::Phase { theta: 0.4 }, &[1])
        .unwrap();
        assert!(rho.tail_mass() < 1e-10);
        assert_abs_diff_eq!(rho.trace(), 1.0, epsilon = 1e-10);
        assert!(rho.hermiticity_error() < 1e-12);
        assert!(rho.min_eigenvalue() > -1e-10);
    }

    #[test]
    fn channel_comparisons_pass() {
        let cases = [
            (sq(0.75), FockInput::Vacuum, vec![0]),
            (
                Channel::BeamSplitter,
                FockInput::Coherent { alpha: Complex64::new(1.0, 0.0) },
                vec![0],
            ),
            (
                Channel::Loss { eta: 0.5 },
                FockInput::Squeezed { gain: 0.5, pump_phase: 0.0 },
                vec![0],
            ),
            (
                Channel::TwoModeSqueezer { gain: 0.5, pump_phase: 0.3 },
                FockInput::Coherent { alpha: Complex64::new(0.8, 0.5) },
                vec![0, 1],
            ),
            (
                Channel::Phase { theta: 0.9 },
                FockInput::Squeezed { gain: 0.6, pump_phase: 0.2 },
                vec![0],
            ),
        ];
        for (ch, input, measured) in cases {
            let r = compare_channel_adaptive(&ch, &input, 20, 120, &measured).unwrap();
            assert!(r.passes_abs(CHANNEL_TOLERANCE), "{ch:?} {input:?}: {r:?}");
        }
    }

    #[test]
    fn squeezed_vacuum_variance_cross_check() {
        let r = compare_channel_adaptive(&sq(0.75), &FockInput::Vacuum, 20, 120, &[0]).unwrap();
        assert_abs_diff_eq!(r.var_n_fock, 1.5f64.sinh().powi(2) / 2.0, epsilon = 1e-6);
        assert!(r.abs_error_var < 1e-6);
    }

    #[test]
    fn beamsplitter_on_coherent_is_exact() {
        let input = FockInput::Coherent { alpha: Complex64::new(1.0, 0.0) };
        let r = compare_channel(&Channel::BeamSplitter, &input, 24, &[1]).unwrap();
        assert!(r.abs_error_mean < 1e-10 && r.abs_error_var < 1e-10, "{r:?}");
    }

    #[test]
    fn broken_loss_map_is_detected() {
        let input = FockInput::Squeezed { gain: 0.5, pump_phase: 0.0 };
        let r = compare_channel_with(&Channel::Loss { eta: 0.5 }, &input, 40, &[0], GaussianLossMap::Ignored)
            .unwrap();
        assert!(!r.passes_abs(CHANNEL_TOLERANCE));
    }

    #[test]
    fn small_cutoff_is_rejected_with_suggestion() {
        let err = FockDensityMatrix::vacuum(1, 6).unwrap().apply(&sq(0.75), &[0]).unwrap_err();
        match err {
            Error::CutoffTooSmall { cutoff, tail_mass, suggested } => {
                assert_eq!(cutoff, 6);
                assert!(tail_mass >= TAIL_TOLERANCE);
                assert!(suggested > 6);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dimension_limit_is_enforced() {
        let s = Scenario::degenerate(Detection::Direct, 0.2, 0.5);
        assert!(matches!(
            compare_pipeline_with_limit(&s, 0.1, 30, 100),
            Err(Error::ResourceLimit { dimension: 961, limit: 100 })
        ));
    }

    #[test]
    fn pipeline_direct_detection() {
        let s = Scenario::degenerate(Detection::Direct, 0.4, 1.0);
        // displaced squeezed tails decay slowly: 2.4e-10 is still lost at 30
        assert!(matches!(
            compare_pipeline(&s, 0.05, 30),
            Err(Error::CutoffTooSmall { cutoff: 30, .. })
        ));
        let r = compare_pipeline(&s, 0.05, 40).unwrap();
        assert!(r.passes_rel(PIPELINE_TOLERANCE), "{r:?}");
    }

    #[test]
    fn pipeline_dark_port_at_zero_phase_is_squeezed_vacuum() {
        for g in [0.2, 0.5] {
            let s = Scenario::degenerate(Detection::Direct, g, 0.25);
            let r = compare_pipeline(&s, 0.0, 40).unwrap();
            assert_abs_diff_eq!(r.mean_n_fock, g.sinh().powi(2), epsilon = 1e-5);
        }
    }

    #[test]
    fn pipeline_without_gain_is_exact() {
        let s = Scenario::degenerate(Detection::Direct, 0.0, 1.0);
        let r = compare_pipeline(&s, 0.3, 20).unwrap();
        assert!(r.abs_error_mean < 1e-10 && r.abs_error_var < 1e-10, "{r:?}");
    }

    #[test]
    fn pipeline_with_losses_and_homodyne() {
        let s = Scenario::degenerate(Detection::ParametricHomodyne, 0.4, 0.8)
            .with_measurement_gain(0.3)
            .with_loop_loss(LoopLossSpec::from_total_loss(0.3, LossPlacement::OpaAtBs))
            .with_detector_efficiency(0.8);
        let r = compare_pipeline(&s, 0.2, 40).unwrap();
        assert!(r.passes_rel(PIPELINE_TOLERANCE), "{r:?}");
    }

    #[test]
    fn nondegenerate_pipeline() {
        let s = Scenario::nondegenerate(Detection::Direct, 0.1, 0.04, 0.01)
            .with_measured_modes(MeasuredModes::Both);
        let r = compare_pipeline(&s, 0.1, 6).unwrap();
        assert!(r.passes_rel(PIPELINE_TOLERANCE), "{r:?}");
    }

    #[test]
    fn cutoff_convergence() {
        let s = Scenario::degenerate(Detection::Direct, 0.2, 0.5);
        let a = compare_pipeline(&s, 0.1, 24).unwrap();
        let b = compare_pipeline(&s, 0.1, 48).unwrap();
        let budget = PIPELINE_TOLERANCE * a.mean_n_gauss;
        assert!((a.mean_n_fock - b.mean_n_fock).abs() < 0.1 * budget);
    }

    #[test]
    fn out_of_domain_pipelines_are_rejected() {
        let s = Scenario::degenerate(Detection::Direct, 0.8, 1.0);
        assert!(matches!(compare_pipeline(&s, 0.1, 20), Err(Error::InvalidArgument(_))));
    }
}
