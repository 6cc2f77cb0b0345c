//! Problem definition for a parallel multi-Λ system.
//!
//! The initial state `i` and the final state `f` are each coupled to `N`
//! intermediate states `k = 1..N`. State `k` sees the pump with strength
//! `α_k Ω_P(t)`, the Stokes field with strength `β_k Ω_S(t)`, and carries the
//! single-photon detuning `Δ_k`. Amplitude vectors are ordered
//! `(c_i, c_1, …, c_N, c_f)`.
//!
//! Frequencies are measured in units of the peak Rabi frequency, so a system
//! with `omega0 = 1` has detunings and inverse times directly in those units.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative tolerance used for proportionality of couplings.
pub const PROPORTIONALITY_RTOL: f64 = 1e-12;

/// Static definition of the multi-Λ system.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLambdaSystem {
    alphas: Vec<f64>,
    betas: Vec<f64>,
    detunings: Vec<f64>,
}

impl MultiLambdaSystem {
    /// Builds a system in the normalized convention `α_1 = β_1 = 1`.
    pub fn new(alphas: Vec<f64>, betas: Vec<f64>, detunings: Vec<f64>) -> Result<Self> {
        let sys = Self::unnormalized(alphas, betas, detunings)?;
        if sys.alphas[0] != 1.0 || sys.betas[0] != 1.0 {
            return Err(Error::InvalidSystem(format!(
                "couplings must be normalized to alpha_1 = beta_1 = 1 (got {}, {})",
                sys.alphas[0], sys.betas[0]
            )));
        }
        Ok(sys)
    }

    /// Builds a system without the `α_1 = β_1 = 1` convention.
    ///
    /// Needed for reduced systems, where the effective resonant state carries
    /// scaled couplings, and for randomized checks.
    pub fn unnormalized(alphas: Vec<f64>, betas: Vec<f64>, detunings: Vec<f64>) -> Result<Self> {
        let n = alphas.len();
        if n == 0 {
            return Err(Error::InvalidSystem("at least one intermediate state is required".into()));
        }
        if betas.len() != n || detunings.len() != n {
            return Err(Error::InvalidSystem(format!(
                "length mismatch: {} alphas, {} betas, {} detunings",
                n,
                betas.len(),
                detunings.len()
            )));
        }
        for (k, (&a, &b)) in alphas.iter().zip(&betas).enumerate() {
            if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
                return Err(Error::InvalidSystem(format!(
                    "couplings of state {} must be positive and finite (alpha = {a}, beta = {b})",
                    k + 1
                )));
            }
        }
        if let Some(d) = detunings.iter().find(|d| !d.is_finite()) {
            return Err(Error::InvalidSystem(format!("detuning {d} is not finite")));
        }
        Ok(Self { alphas, betas, detunings })
    }

    pub fn n_intermediate(&self) -> usize {
        self.alphas.len()
    }

    /// Dimension of the full Hilbert space, `N + 2`.
    pub fn dim(&self) -> usize {
        self.alphas.len() + 2
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    /// Same couplings, with `shift` added to every detuning (both lasers tuned
    /// together so that two-photon resonance is kept).
    pub fn with_common_shift(&self, shift: f64) -> Self {
        Self {
            alphas: self.alphas.clone(),
            betas: self.betas.clone(),
            detunings: self.detunings.iter().map(|d| d + shift).collect(),
        }
    }

    pub fn with_detunings(&self, detunings: Vec<f64>) -> Result<Self> {
        Self::unnormalized(self.alphas.clone(), self.betas.clone(), detunings)
    }

    /// Indices (0-based) of intermediate states with a detuning of exactly zero.
    pub fn resonant_indices(&self) -> Vec<usize> {
        self.detunings
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 0.0)
            .map(|(k, _)| k)
            .collect()
    }

    /// True when `α_k / β_k` is the same for every intermediate state.
    pub fn is_proportional(&self) -> bool {
        let all: Vec<usize> = (0..self.n_intermediate()).collect();
        self.is_proportional_among(&all)
    }

    /// True when `α_k / β_k` agrees across the listed states.
    pub fn is_proportional_among(&self, indices: &[usize]) -> bool {
        let Some(&first) = indices.first() else {
            return true;
        };
        let (a0, b0) = (self.alphas[first], self.betas[first]);
        indices.iter().all(|&k| {
            let lhs = self.alphas[k] * b0;
            let rhs = a0 * self.betas[k];
            (lhs - rhs).abs() <= PROPORTIONALITY_RTOL * (lhs.abs() + rhs.abs())
        })
    }
}

/// Envelope shape of the pump and Stokes pulses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PulseShape {
    #[default]
    Gaussian,
}

/// Pump and Stokes pulses in counterintuitive order: Stokes centered at
/// `-delay`, pump at `+delay`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulsePair {
    omega0: f64,
    width: f64,
    delay: f64,
    shape: PulseShape,
}

impl PulsePair {
    pub fn new(omega0: f64, width: f64, delay: f64, shape: PulseShape) -> Result<Self> {
        if !(omega0.is_finite() && omega0 >= 0.0) {
            return Err(Error::InvalidPulses(format!("omega0 must be non-negative, got {omega0}")));
        }
        for (name, v) in [("width", width), ("delay", delay)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidPulses(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { omega0, width, delay, shape })
    }

    /// Gaussian pair with the delay fixed at half the width.
    pub fn gaussian(omega0: f64, width: f64) -> Result<Self> {
        Self::new(omega0, width, 0.5 * width, PulseShape::Gaussian)
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn shape(&self) -> PulseShape {
        self.shape
    }

    /// Returns `(Ω_P(t), Ω_S(t))`.
    pub fn values(&self, t: f64) -> (f64, f64) {
        match self.shape {
            PulseShape::Gaussian => {
                let w2 = self.width * self.width;
                let p = self.omega0 * (-(t - self.delay).powi(2) / w2).exp();
                let s = self.omega0 * (-(t + self.delay).powi(2) / w2).exp();
                (p, s)
            }
        }
    }

    /// Returns `(dΩ_P/dt, dΩ_S/dt)`.
    pub fn derivatives(&self, t: f64) -> (f64, f64) {
        match self.shape {
            PulseShape::Gaussian => {
                let (p, s) = self.values(t);
                let w2 = self.width * self.width;
                (-2.0 * (t - self.delay) / w2 * p, -2.0 * (t + self.delay) / w2 * s)
            }
        }
    }

    /// Symmetric window `[-(4T + τ), 4T + τ]`; both envelopes are below
    /// `e^-16` of their peak at its edges.
    pub fn default_window(&self) -> (f64, f64) {
        let half = 4.0 * self.width + self.delay;
        (-half, half)
    }

    pub fn with_width(&self, width: f64) -> Result<Self> {
        let ratio = self.delay / self.width;
        Self::new(self.omega0, width, ratio * width, self.shape)
    }
}

/// Complex amplitudes ordered `(c_i, c_1, …, c_N, c_f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(Vec<Complex64>);

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Self {
        Self(amplitudes)
    }

    pub fn from_real(amplitudes: &[f64]) -> Self {
        Self(amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    /// All population in the initial state `i`.
    pub fn initial(n_intermediate: usize) -> Self {
        let mut c = vec![Complex64::new(0.0, 0.0); n_intermediate + 2];
        c[0] = Complex64::new(1.0, 0.0);
        Self(c)
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.0
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.0.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn initial_amplitude(&self) -> Complex64 {
        self.0[0]
    }

    pub fn final_amplitude(&self) -> Complex64 {
        self.0[self.0.len() - 1]
    }

    /// Total population of the intermediate states.
    pub fn intermediate_population(&self) -> f64 {
        let n = self.0.len();
        self.0[1..n - 1].iter().map(|c| c.norm_sqr()).sum()
    }

    /// `|⟨v|c⟩|²` for a real vector `v` of the same dimension.
    pub fn overlap_sqr_real(&self, v: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(v)
            .map(|(c, &x)| c * x)
            .sum::<Complex64>()
            .norm_sqr()
    }
}

/// Builds the real symmetric `(N+2)×(N+2)` Hamiltonian for the given envelope
/// values.
pub fn build_hamiltonian(sys: &MultiLambdaSystem, omega_p: f64, omega_s: f64) -> DMatrix<f64> {
    let n = sys.n_intermediate();
    let f = n + 1;
    let mut h = DMatrix::zeros(n + 2, n + 2);
    for k in 0..n {
        let p = sys.alphas[k] * omega_p;
        let s = sys.betas[k] * omega_s;
        h[(0, k + 1)] = p;
        h[(k + 1, 0)] = p;
        h[(k + 1, f)] = s;
        h[(f, k + 1)] = s;
        h[(k + 1, k + 1)] = sys.detunings[k];
    }
    h
}

/// Computes `out = H c` in O(N) using the arrow structure of the Hamiltonian.
pub fn apply_hamiltonian(
    sys: &MultiLambdaSystem,
    omega_p: f64,
    omega_s: f64,
    c: &[Complex64],
    out: &mut [Complex64],
) {
    let n = sys.n_intermediate();
    let f = n + 1;
    let ci = c[0];
    let cf = c[f];
    let mut acc_i = Complex64::new(0.0, 0.0);
    let mut acc_f = Complex64::new(0.0, 0.0);
    for k in 0..n {
        let p = sys.alphas[k] * omega_p;
        let s = sys.betas[k] * omega_s;
        let ck = c[k + 1];
        acc_i += ck * p;
        acc_f += ck * s;
        out[k + 1] = ci * p + ck * sys.detunings[k] + cf * s;
    }
    out[0] = acc_i;
    out[f] = acc_f;
}

/// The three sums `Σα_k²/Δ_k`, `Σβ_k²/Δ_k`, `Σα_kβ_k/Δ_k`, optionally with one
/// index left out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SSums {
    pub s_a2: f64,
    pub s_b2: f64,
    pub s_ab: f64,
    pub excluded_index: Option<usize>,
}

impl SSums {
    /// `S_a2 S_b2 - S_ab²`; vanishes exactly when the Hamiltonian has a zero
    /// eigenvalue (off resonance).
    pub fn gram_determinant(&self) -> f64 {
        self.s_a2 * self.s_b2 - self.s_ab * self.s_ab
    }
}

/// Evaluates the S-sums, skipping `excluded` when given.
pub fn s_sums(sys: &MultiLambdaSystem, excluded: Option<usize>) -> Result<SSums> {
    if let Some(n) = excluded {
        if n >= sys.n_intermediate() {
            return Err(Error::PreconditionViolated(format!(
                "excluded index {n} out of range for N = {}",
                sys.n_intermediate()
            )));
        }
    }
    let (mut s_a2, mut s_b2, mut s_ab) = (0.0, 0.0, 0.0);
    for k in (0..sys.n_intermediate()).filter(|&k| Some(k) != excluded) {
        let d = sys.detunings[k];
        if d == 0.0 {
            return Err(Error::ZeroDetuningInSum { index: k });
        }
        let (a, b) = (sys.alphas[k], sys.betas[k]);
        s_a2 += a * a / d;
        s_b2 += b * b / d;
        s_ab += a * b / d;
    }
    Ok(SSums { s_a2, s_b2, s_ab, excluded_index: excluded })
}

/// Products of detunings with zero, one or two factors left out.
#[derive(Debug, Clone, Copy)]
pub struct DetuningProducts<'a> {
    detunings: &'a [f64],
}

impl<'a> DetuningProducts<'a> {
    pub fn new(sys: &'a MultiLambdaSystem) -> Self {
        Self { detunings: &sys.detunings }
    }

    pub fn d_full(&self) -> f64 {
        self.detunings.iter().product()
    }

    pub fn d_excl_one(&self, n: usize) -> f64 {
        self.detunings
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != n)
            .map(|(_, d)| d)
            .product()
    }

    pub fn d_excl_two(&self, m: usize, n: usize) -> f64 {
        self.detunings
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != m && k != n)
            .map(|(_, d)| d)
            .product()
    }
}

fn cross(sys: &MultiLambdaSystem, k: usize, l: usize) -> f64 {
    sys.alphas[k] * sys.betas[l] - sys.alphas[l] * sys.betas[k]
}

/// `det H` off resonance, written through the S-sums:
/// `Ω_P² Ω_S² D (S_a2 S_b2 - S_ab²)`.
pub fn det_off_resonant_sums(sys: &MultiLambdaSystem, omega_p: f64, omega_s: f64) -> Result<f64> {
    let sums = s_sums(sys, None)?;
    let d = DetuningProducts::new(sys).d_full();
    Ok(omega_p.powi(2) * omega_s.powi(2) * d * sums.gram_determinant())
}

/// `det H` as the pair sum `Ω_P² Ω_S² Σ_{k<l} D_kl (α_kβ_l - α_lβ_k)²`.
///
/// Valid for any detunings: pairs whose complementary product contains a
/// zero detuning drop out on their own.
pub fn det_pair_sum(sys: &MultiLambdaSystem, omega_p: f64, omega_s: f64) -> f64 {
    let n = sys.n_intermediate();
    let prods = DetuningProducts::new(sys);
    let mut acc = 0.0;
    for k in 0..n {
        for l in k + 1..n {
            acc += prods.d_excl_two(k, l) * cross(sys, k, l).powi(2);
        }
    }
    omega_p.powi(2) * omega_s.powi(2) * acc
}

/// `det H` with exactly one resonant state `n`, as a sum over the other states.
pub fn det_single_resonant_pairs(
    sys: &MultiLambdaSystem,
    n: usize,
    omega_p: f64,
    omega_s: f64,
) -> f64 {
    let prods = DetuningProducts::new(sys);
    let acc: f64 = (0..sys.n_intermediate())
        .filter(|&k| k != n)
        .map(|k| prods.d_excl_two(n, k) * cross(sys, k, n).powi(2))
        .sum();
    omega_p.powi(2) * omega_s.powi(2) * acc
}

/// Bracket `α_n² S_b2⁽ⁿ⁾ - 2α_nβ_n S_ab⁽ⁿ⁾ + β_n² S_a2⁽ⁿ⁾` that governs the
/// single-resonance determinant and small eigenvalues.
pub fn resonant_bracket(sys: &MultiLambdaSystem, n: usize) -> Result<f64> {
    let s = s_sums(sys, Some(n))?;
    let (a, b) = (sys.alphas[n], sys.betas[n]);
    Ok(a * a * s.s_b2 - 2.0 * a * b * s.s_ab + b * b * s.s_a2)
}

/// `det H` with exactly one resonant state `n`, through the reduced S-sums.
pub fn det_single_resonant_sums(
    sys: &MultiLambdaSystem,
    n: usize,
    omega_p: f64,
    omega_s: f64,
) -> Result<f64> {
    let d = DetuningProducts::new(sys).d_excl_one(n);
    Ok(omega_p.powi(2) * omega_s.powi(2) * d * resonant_bracket(sys, n)?)
}

/// `det H` with exactly two resonant states `m` and `n`.
pub fn det_double_resonant(
    sys: &MultiLambdaSystem,
    m: usize,
    n: usize,
    omega_p: f64,
    omega_s: f64,
) -> f64 {
    let d = DetuningProducts::new(sys).d_excl_two(m, n);
    omega_p.powi(2) * omega_s.powi(2) * d * cross(sys, m, n).powi(2)
}

/// Closed-form determinant, dispatched on the number of exactly-zero
/// detunings. Three or more resonant states give a structural zero.
pub fn det_closed_form(sys: &MultiLambdaSystem, omega_p: f64, omega_s: f64) -> f64 {
    let res = sys.resonant_indices();
    match res.as_slice() {
        [] => det_pair_sum(sys, omega_p, omega_s),
        [n] => det_single_resonant_pairs(sys, *n, omega_p, omega_s),
        [m, n] => det_double_resonant(sys, *m, *n, omega_p, omega_s),
        _ => 0.0,
    }
}

/// The dark state `(Ω_S/Ω) |i⟩ - (Ω_P/Ω) |f⟩` for the given envelope values.
pub fn dark_state_from_envelopes(
    n_intermediate: usize,
    omega_p: f64,
    omega_s: f64,
) -> Option<StateVector> {
    let omega = omega_p.hypot(omega_s);
    if omega == 0.0 {
        return None;
    }
    let mut v = vec![0.0; n_intermediate + 2];
    v[0] = omega_s / omega;
    v[n_intermediate + 1] = -omega_p / omega;
    Some(StateVector::from_real(&v))
}

pub fn dark_state(sys: &MultiLambdaSystem, pulses: &PulsePair, t: f64) -> Result<StateVector> {
    let (p, s) = pulses.values(t);
    dark_state_from_envelopes(sys.n_intermediate(), p, s).ok_or(Error::BothEnvelopesZero { t })
}

/// A nontrivial solution `(a_i, a_f)` of the two endpoint equations of a
/// zero-eigenvalue eigenvector. Only meaningful when `S_a2 S_b2 = S_ab²`.
pub fn zero_eigvec_endpoints(sums: &SSums, omega_p: f64, omega_s: f64) -> (f64, f64) {
    // first row: S_a2 Ω_P a_i + S_ab Ω_S a_f = 0
    let (ai, af) = (sums.s_ab * omega_s, -sums.s_a2 * omega_p);
    if ai != 0.0 || af != 0.0 {
        return (ai, af);
    }
    // second row: S_ab Ω_P a_i + S_b2 Ω_S a_f = 0
    (sums.s_b2 * omega_s, -sums.s_ab * omega_p)
}

/// Zero-eigenvalue eigenvector with intermediate amplitudes
/// `a_k = -(α_kΩ_P a_i + β_kΩ_S a_f) / Δ_k`, normalized.
pub fn zero_eigvec_amplitudes(
    sys: &MultiLambdaSystem,
    pulses: &PulsePair,
    t: f64,
    a_i: f64,
    a_f: f64,
) -> Result<StateVector> {
    let (p, s) = pulses.values(t);
    let n = sys.n_intermediate();
    let mut v = vec![0.0; n + 2];
    v[0] = a_i;
    v[n + 1] = a_f;
    for k in 0..n {
        let d = sys.detunings[k];
        if d == 0.0 {
            return Err(Error::ZeroDetuningInSum { index: k });
        }
        v[k + 1] = -(sys.alphas[k] * p * a_i + sys.betas[k] * s * a_f) / d;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::PreconditionViolated("a_i and a_f are both zero".into()));
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(StateVector::from_real(&v))
}
