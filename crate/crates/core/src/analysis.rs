//! Analytic classification: when a zero eigenvalue and an adiabatic-transfer
//! (AT) state exist, where the no-transfer windows lie along a common
//! detuning, reduction of degenerate resonant states, adiabatic elimination
//! and the Landau–Zener estimate.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{s_sums, MultiLambdaSystem, PulsePair, SSums};

/// Relative tolerance for zero tests on S-sum expressions.
pub const ZERO_RTOL: f64 = 1e-9;

/// Below this relative size of `S_a2 S_b2` the verdict is flagged marginal.
pub const MARGINAL_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    OffResonant,
    SingleResonant,
    DegenerateResonant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroEigenvalue {
    None,
    Simple,
    Double,
    /// Three or more resonant states: a zero eigenvalue for any envelopes.
    Structural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtState {
    ExistsDarkState,
    ExistsGeneral,
    NotExists,
}

impl AtState {
    pub fn exists(self) -> bool {
        !matches!(self, AtState::NotExists)
    }

    pub fn code(self) -> &'static str {
        match self {
            AtState::ExistsDarkState => "exists_dark",
            AtState::ExistsGeneral => "exists_general",
            AtState::NotExists => "not_exists",
        }
    }
}

/// The condition that decided the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reason {
    /// `S_a2 S_b2 > 0`: the small eigenvalues connect `i` to `f`.
    SumProductPositive,
    /// `S_a2 S_b2 < 0`: the adiabatic state returns to `i`.
    SumProductNegative,
    PumpSumZero,
    StokesSumZero,
    AllSumsZero,
    /// `S_a2 S_b2` is within rounding of zero; finite-T behaviour dominates.
    Marginal,
    SingleResonance,
    ResonantProportional,
    ResonantNotProportional,
}

impl Reason {
    pub fn code(self) -> &'static str {
        match self {
            Reason::SumProductPositive => "sum_product_positive",
            Reason::SumProductNegative => "sum_product_negative",
            Reason::PumpSumZero => "pump_sum_zero",
            Reason::StokesSumZero => "stokes_sum_zero",
            Reason::AllSumsZero => "all_sums_zero",
            Reason::Marginal => "marginal",
            Reason::SingleResonance => "single_resonance",
            Reason::ResonantProportional => "resonant_proportional",
            Reason::ResonantNotProportional => "resonant_not_proportional",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Reason::SumProductPositive => "S_a2*S_b2 > 0",
            Reason::SumProductNegative => "S_a2*S_b2 < 0",
            Reason::PumpSumZero => "S_a2 = 0",
            Reason::StokesSumZero => "S_b2 = 0",
            Reason::AllSumsZero => "S_a2 = S_b2 = S_ab = 0, doubly degenerate zero eigenvalue",
            Reason::Marginal => "S_a2*S_b2 within rounding of zero",
            Reason::SingleResonance => "single-photon resonance",
            Reason::ResonantProportional => {
                "resonant couplings proportional, reduced to one effective resonant state"
            }
            Reason::ResonantNotProportional => "resonant couplings not proportional",
        }
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtClassification {
    pub regime: Regime,
    pub zero_eigenvalue: ZeroEigenvalue,
    pub at_state: AtState,
    pub reason: Reason,
    /// Full S-sums (off resonance only).
    pub sums: Option<SSums>,
}

/// Magnitude sums `Σα²/|Δ|`, `Σβ²/|Δ|`, `Σ|αβ|/|Δ|` used as scales for the
/// zero tests.
fn abs_scales(sys: &MultiLambdaSystem, excluded: Option<usize>) -> (f64, f64, f64) {
    let mut s = (0.0, 0.0, 0.0);
    for k in (0..sys.n_intermediate()).filter(|&k| Some(k) != excluded) {
        let d = sys.detunings()[k].abs();
        let (a, b) = (sys.alphas()[k], sys.betas()[k]);
        s.0 += a * a / d;
        s.1 += b * b / d;
        s.2 += (a * b).abs() / d;
    }
    s
}

fn is_zero(value: f64, scale: f64) -> bool {
    value.abs() <= ZERO_RTOL * scale
}

pub fn classify(sys: &MultiLambdaSystem) -> AtClassification {
    let resonant = sys.resonant_indices();
    match resonant.len() {
        0 => classify_off_resonant(sys),
        1 => classify_single_resonant(sys, resonant[0]),
        _ => classify_degenerate(sys, &resonant),
    }
}

fn classify_off_resonant(sys: &MultiLambdaSystem) -> AtClassification {
    let sums = s_sums(sys, None).expect("no zero detunings off resonance");
    let (sa, sb, sc) = abs_scales(sys, None);
    let a_zero = is_zero(sums.s_a2, sa);
    let b_zero = is_zero(sums.s_b2, sb);
    let ab_zero = is_zero(sums.s_ab, sc);

    let zero_eigenvalue = if a_zero && b_zero && ab_zero {
        ZeroEigenvalue::Double
    } else if is_zero(sums.gram_determinant(), sa * sb + sc * sc) {
        ZeroEigenvalue::Simple
    } else {
        ZeroEigenvalue::None
    };

    let product = sums.s_a2 * sums.s_b2;
    let (at_state, reason) = if zero_eigenvalue == ZeroEigenvalue::Double {
        (AtState::NotExists, Reason::AllSumsZero)
    } else if a_zero {
        (AtState::NotExists, Reason::PumpSumZero)
    } else if b_zero {
        (AtState::NotExists, Reason::StokesSumZero)
    } else {
        let marginal = product.abs() < MARGINAL_RTOL * sa * sb;
        let (state, reason) = if product > 0.0 {
            let state = if sys.is_proportional() {
                AtState::ExistsDarkState
            } else {
                AtState::ExistsGeneral
            };
            (state, Reason::SumProductPositive)
        } else {
            (AtState::NotExists, Reason::SumProductNegative)
        };
        (state, if marginal { Reason::Marginal } else { reason })
    };

    AtClassification {
        regime: Regime::OffResonant,
        zero_eigenvalue,
        at_state,
        reason,
        sums: Some(sums),
    }
}

fn single_resonant_zero(sys: &MultiLambdaSystem, n: usize) -> ZeroEigenvalue {
    let reduced = s_sums(sys, Some(n)).expect("only state n is resonant");
    let (a, b) = (sys.alphas()[n], sys.betas()[n]);
    let bracket = a * a * reduced.s_b2 - 2.0 * a * b * reduced.s_ab + b * b * reduced.s_a2;
    let (sa, sb, sc) = abs_scales(sys, Some(n));
    let scale = a * a * sb + 2.0 * (a * b).abs() * sc + b * b * sa;
    if is_zero(bracket, scale) {
        ZeroEigenvalue::Simple
    } else {
        ZeroEigenvalue::None
    }
}

fn classify_single_resonant(sys: &MultiLambdaSystem, n: usize) -> AtClassification {
    let at_state = if sys.is_proportional() {
        AtState::ExistsDarkState
    } else {
        AtState::ExistsGeneral
    };
    AtClassification {
        regime: Regime::SingleResonant,
        zero_eigenvalue: single_resonant_zero(sys, n),
        at_state,
        reason: Reason::SingleResonance,
        sums: None,
    }
}

fn classify_degenerate(sys: &MultiLambdaSystem, resonant: &[usize]) -> AtClassification {
    let structural = resonant.len() >= 3;
    let Ok((reduced, _)) = reduce_degenerate(sys, resonant) else {
        return AtClassification {
            regime: Regime::DegenerateResonant,
            zero_eigenvalue: if structural { ZeroEigenvalue::Structural } else { ZeroEigenvalue::None },
            at_state: AtState::NotExists,
            reason: Reason::ResonantNotProportional,
            sums: None,
        };
    };
    let inner = classify(&reduced);
    let zero_eigenvalue = if structural {
        ZeroEigenvalue::Structural
    } else if inner.zero_eigenvalue == ZeroEigenvalue::None {
        ZeroEigenvalue::Simple
    } else {
        ZeroEigenvalue::Double
    };
    AtClassification {
        regime: Regime::DegenerateResonant,
        zero_eigenvalue,
        at_state: inner.at_state,
        reason: Reason::ResonantProportional,
        sums: None,
    }
}

/// Replaces the resonant states in `resonant` by a single effective resonant
/// state with couplings `μ α_r, μ β_r` (`r` the first listed state,
/// `μ = sqrt(Σ α_k²) / α_r`). The effective state takes the position of `r`;
/// all other states are kept in order.
pub fn reduce_degenerate(
    sys: &MultiLambdaSystem,
    resonant: &[usize],
) -> Result<(MultiLambdaSystem, f64)> {
    let Some(&first) = resonant.first() else {
        return Err(Error::PreconditionViolated("no resonant states given".into()));
    };
    for &k in resonant {
        if k >= sys.n_intermediate() || sys.detunings()[k] != 0.0 {
            return Err(Error::PreconditionViolated(format!(
                "intermediate state {k} is not resonant"
            )));
        }
    }
    if !sys.is_proportional_among(resonant) {
        return Err(Error::NotProportional);
    }
    let a_first = sys.alphas()[first];
    let mu = resonant.iter().map(|&k| sys.alphas()[k].powi(2)).sum::<f64>().sqrt() / a_first;

    let (mut alphas, mut betas, mut detunings) = (Vec::new(), Vec::new(), Vec::new());
    for k in 0..sys.n_intermediate() {
        if k == first {
            alphas.push(mu * a_first);
            betas.push(mu * sys.betas()[first]);
            detunings.push(0.0);
        } else if !resonant.contains(&k) {
            alphas.push(sys.alphas()[k]);
            betas.push(sys.betas()[k]);
            detunings.push(sys.detunings()[k]);
        }
    }
    Ok((MultiLambdaSystem::unnormalized(alphas, betas, detunings)?, mu))
}

/// `S(Δ) = Σ c_k / (base_k + Δ)` with coincident poles merged.
struct PoleSum {
    poles: Vec<f64>,
    coeffs: Vec<f64>,
}

impl PoleSum {
    fn new(base: &[f64], weights: impl Iterator<Item = f64>) -> Self {
        let mut terms: Vec<(f64, f64)> = base.iter().map(|&b| -b).zip(weights).collect();
        terms.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut poles: Vec<f64> = Vec::new();
        let mut coeffs: Vec<f64> = Vec::new();
        for (p, c) in terms {
            if poles.last() == Some(&p) {
                *coeffs.last_mut().expect("paired with poles") += c;
            } else {
                poles.push(p);
                coeffs.push(c);
            }
        }
        Self { poles, coeffs }
    }

    fn eval(&self, delta: f64) -> f64 {
        self.poles.iter().zip(&self.coeffs).map(|(p, c)| c / (delta - p)).sum()
    }

    /// The single root between each pair of adjacent poles. `S` falls from
    /// `+∞` to `-∞` across every such interval, so bisection always brackets.
    fn roots(&self) -> Vec<f64> {
        self.poles
            .windows(2)
            .map(|w| {
                let (mut lo, mut hi) = (w[0], w[1]);
                loop {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break mid;
                    }
                    if self.eval(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
            })
            .collect()
    }
}

fn pole_sums(template: &MultiLambdaSystem) -> (PoleSum, PoleSum) {
    let base = template.detunings();
    let a = PoleSum::new(base, template.alphas().iter().map(|a| a * a));
    let b = PoleSum::new(base, template.betas().iter().map(|b| b * b));
    (a, b)
}

/// Common detunings `Δ ∈ [lo, hi]` at which `S_a2` or `S_b2` of
/// `template.with_common_shift(Δ)` vanishes, sorted and deduplicated.
pub fn at_window_boundaries(template: &MultiLambdaSystem, lo: f64, hi: f64) -> Vec<f64> {
    let (a, b) = pole_sums(template);
    let mut roots: Vec<f64> = a.roots().into_iter().chain(b.roots()).filter(|r| (lo..=hi).contains(r)).collect();
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (1.0 + y.abs()));
    roots
}

/// Closed intervals of common detuning inside `[lo, hi]` where no AT state
/// exists (`S_a2 S_b2 < 0`). Proportional couplings give none.
pub fn no_at_windows(template: &MultiLambdaSystem, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let (a, b) = pole_sums(template);
    a.roots()
        .into_iter()
        .zip(b.roots())
        .filter_map(|(ra, rb)| {
            let (l, h) = (ra.min(rb).max(lo), ra.max(rb).min(hi));
            let width_ok = (ra - rb).abs() > 1e-12 * (1.0 + ra.abs());
            (width_ok && l < h).then_some((l, h))
        })
        .collect()
}

/// Two-state model for `(c_i, c_f)` once every intermediate state is
/// adiabatically eliminated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveTwoState {
    pub sums: SSums,
}

impl EffectiveTwoState {
    /// `Δ_eff = S_b2 Ω_S² - S_a2 Ω_P²`
    pub fn detuning(&self, omega_p: f64, omega_s: f64) -> f64 {
        self.sums.s_b2 * omega_s * omega_s - self.sums.s_a2 * omega_p * omega_p
    }

    /// `Ω_eff = S_ab Ω_P Ω_S`
    pub fn coupling(&self, omega_p: f64, omega_s: f64) -> f64 {
        self.sums.s_ab * omega_p * omega_s
    }

    pub fn matrix(&self, omega_p: f64, omega_s: f64) -> DMatrix<f64> {
        let c = self.coupling(omega_p, omega_s);
        DMatrix::from_row_slice(
            2,
            2,
            &[omega_p * omega_p * self.sums.s_a2, c, c, omega_s * omega_s * self.sums.s_b2],
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EffectiveModel {
    /// Basis `(i, f)`.
    TwoState(DMatrix<f64>),
    /// Basis `(i, n, f)` with `n` the resonant state.
    ThreeState { resonant: usize, matrix: DMatrix<f64> },
}

impl EffectiveModel {
    pub fn matrix(&self) -> &DMatrix<f64> {
        match self {
            EffectiveModel::TwoState(m) => m,
            EffectiveModel::ThreeState { matrix, .. } => matrix,
        }
    }
}

/// Effective Hamiltonian at time `t` after eliminating all off-resonant
/// intermediate states. Validity needs `|Δ_k|` well above the couplings;
/// this is not checked.
pub fn adiabatic_eliminate(sys: &MultiLambdaSystem, pulses: &PulsePair, t: f64) -> Result<EffectiveModel> {
    let (p, s) = pulses.values(t);
    let resonant = sys.resonant_indices();
    match resonant.as_slice() {
        [] => {
            let sums = s_sums(sys, None)?;
            Ok(EffectiveModel::TwoState(EffectiveTwoState { sums }.matrix(p, s)))
        }
        &[n] => {
            let r = s_sums(sys, Some(n))?;
            let (a, b) = (sys.alphas()[n], sys.betas()[n]);
            let ps = p * s * r.s_ab;
            let matrix = DMatrix::from_row_slice(
                3,
                3,
                &[p * p * r.s_a2, a * p, ps, a * p, 0.0, b * s, ps, b * s, s * s * r.s_b2],
            );
            Ok(EffectiveModel::ThreeState { resonant: n, matrix })
        }
        _ => Err(Error::WrongResonanceCount { expected: 1, found: resonant.len() }),
    }
}

/// Landau–Zener view of the effective two-state crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LzEstimate {
    pub t_c: f64,
    pub xi: f64,
    pub pf_estimate: f64,
}

/// Crossing time, adiabaticity parameter `ξ` and the resulting rough
/// transfer probability for Gaussian pulses. The sums enter in units of
/// `1/Ω0`, which makes `ξ` dimensionless.
pub fn lz_estimate(sys: &MultiLambdaSystem, pulses: &PulsePair) -> Result<LzEstimate> {
    let found = sys.resonant_indices().len();
    if found != 0 {
        return Err(Error::WrongResonanceCount { expected: 0, found });
    }
    let sums = s_sums(sys, None)?;
    let product = sums.s_a2 * sums.s_b2;
    if !(product > 0.0) {
        return Err(Error::NoCrossing { product });
    }
    let (width, tau, omega0) = (pulses.width(), pulses.delay(), pulses.omega0());
    let log_ratio = (sums.s_b2 / sums.s_a2).ln();
    let t_c = width * width / (8.0 * tau) * log_ratio;
    let ratio = tau / width;
    let xi = omega0 / (4.0 * ratio) * sums.s_ab * sums.s_ab / product.sqrt()
        * (-2.0 * ratio * ratio - log_ratio * log_ratio / (32.0 * ratio * ratio)).exp();
    let area = omega0 * width;
    let pf_estimate = 1.0 - (-std::f64::consts::PI * area * area * xi).exp();
    Ok(LzEstimate { t_c, xi, pf_estimate })
}
