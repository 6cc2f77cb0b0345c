//! Time propagation of `i dc/dt = H(t) c` with an embedded Dormand–Prince
//! 5(4) pair, plus the quadrature estimate for the doubly degenerate
//! dark-state case.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{apply_hamiltonian, s_sums, MultiLambdaSystem, PulsePair, StateVector};

/// Largest tolerated `|‖c(t_end)‖ - 1|`.
pub const MAX_NORM_DRIFT: f64 = 1e-6;

/// Largest magnitude an S-sum may have for the degenerate prediction.
pub const DEGENERATE_SUM_TOL: f64 = 1e-9;

const MAX_STEPS: usize = 20_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub max_step: f64,
    /// Keep every `store_every`-th accepted step in the trajectory. The
    /// initial and final states are always kept.
    pub store_every: usize,
}

impl IntegratorConfig {
    pub const DEFAULT_REL_TOL: f64 = 1e-12;
    pub const DEFAULT_ABS_TOL: f64 = 1e-14;

    /// Default tolerances over the pulses' default window.
    pub fn for_pulses(pulses: &PulsePair) -> Self {
        let (t_start, t_end) = pulses.default_window();
        Self {
            rel_tol: Self::DEFAULT_REL_TOL,
            abs_tol: Self::DEFAULT_ABS_TOL,
            t_start,
            t_end,
            max_step: pulses.width() / 5.0,
            store_every: 1,
        }
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_store_every(mut self, store_every: usize) -> Self {
        self.store_every = store_every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidIntegrator(m));
        if !(self.t_start.is_finite() && self.t_end.is_finite() && self.t_start < self.t_end) {
            return bad(format!("need t_start < t_end, got [{}, {}]", self.t_start, self.t_end));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if !(self.max_step > 0.0) {
            return bad("max_step must be positive".into());
        }
        if self.store_every == 0 {
            return bad("store_every must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PropagationResult {
    pub time_grid: Vec<f64>,
    pub trajectory: Vec<StateVector>,
    /// `populations[m][j]` is `|c_m|²` at `time_grid[j]`.
    pub populations: Vec<Vec<f64>>,
    pub final_pf: f64,
    /// Largest total intermediate population over all accepted steps,
    /// including the ones not stored.
    pub max_intermediate_population: f64,
    pub norm_drift: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl PropagationResult {
    pub fn final_state(&self) -> &StateVector {
        self.trajectory.last().expect("trajectory holds at least the initial state")
    }
}

/// Per-state population series `|c_m(t)|²`, indexed `[state][time]`.
pub fn populations_timeseries(result: &PropagationResult) -> Vec<Vec<f64>> {
    let dim = result.trajectory.first().map_or(0, |c| c.len());
    let mut out = vec![Vec::with_capacity(result.trajectory.len()); dim];
    for c in &result.trajectory {
        for (m, p) in c.populations().into_iter().enumerate() {
            out[m].push(p);
        }
    }
    out
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Difference between the 5th- and 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const PI_ALPHA: f64 = 0.17;
const PI_BETA: f64 = 0.04;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

struct Rhs<'a> {
    sys: &'a MultiLambdaSystem,
    pulses: &'a PulsePair,
}

impl Rhs<'_> {
    /// `out = -i H(t) c`
    fn eval(&self, t: f64, c: &[Complex64], out: &mut [Complex64]) {
        let (p, s) = self.pulses.values(t);
        apply_hamiltonian(self.sys, p, s, c, out);
        for o in out.iter_mut() {
            *o = Complex64::new(o.im, -o.re);
        }
    }
}

/// Integrates the Schrödinger equation from `cfg.t_start` to `cfg.t_end`.
pub fn propagate(
    sys: &MultiLambdaSystem,
    pulses: &PulsePair,
    cfg: &IntegratorConfig,
    initial: &StateVector,
) -> Result<PropagationResult> {
    cfg.validate()?;
    let dim = sys.dim();
    if initial.len() != dim {
        return Err(Error::PreconditionViolated(format!(
            "initial state has {} components, system needs {dim}",
            initial.len()
        )));
    }
    if (initial.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::PreconditionViolated(format!(
            "initial state norm {} is not 1",
            initial.norm()
        )));
    }

    let rhs = Rhs { sys, pulses };
    let mut y: Vec<Complex64> = initial.amplitudes().to_vec();
    let mut t = cfg.t_start;
    let zero = Complex64::new(0.0, 0.0);
    let mut k: [Vec<Complex64>; 7] = std::array::from_fn(|_| vec![zero; dim]);
    let mut stage = vec![zero; dim];
    let mut y_new = vec![zero; dim];

    rhs.eval(t, &y, &mut k[0]);
    let mut h = initial_step(cfg, &y, &k[0]);
    let mut err_prev: f64 = 1e-4;

    let mut time_grid = vec![t];
    let mut trajectory = vec![initial.clone()];
    let mut max_inter = initial.intermediate_population();
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut last_rejected = false;

    while t < cfg.t_end {
        if accepted + rejected >= MAX_STEPS {
            return Err(Error::ToleranceNotMet { t, step: h });
        }
        let remaining = cfg.t_end - t;
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::ToleranceNotMet { t, step: h });
        }

        for s in 1..7 {
            for j in 0..dim {
                let mut acc = zero;
                for (r, kr) in k.iter().enumerate().take(s) {
                    acc += kr[j] * A[s][r];
                }
                stage[j] = y[j] + acc * h;
            }
            let (done, rest) = k.split_at_mut(s);
            let _ = done;
            rhs.eval(t + C[s] * h, &stage, &mut rest[0]);
        }
        // Stage 7 is evaluated at the 5th-order solution.
        y_new.copy_from_slice(&stage);

        let mut err_sq = 0.0;
        for j in 0..dim {
            let mut e = zero;
            for (r, kr) in k.iter().enumerate() {
                e += kr[j] * E[r];
            }
            let scale = cfg.abs_tol + cfg.rel_tol * y[j].norm().max(y_new[j].norm());
            err_sq += (e.norm() * h / scale).powi(2);
        }
        let err = (err_sq / dim as f64).sqrt();

        if err <= 1.0 {
            t = if last { cfg.t_end } else { t + h };
            y.copy_from_slice(&y_new);
            let (first, rest) = k.split_at_mut(1);
            first[0].copy_from_slice(&rest[5]);
            accepted += 1;

            let inter: f64 = y[1..dim - 1].iter().map(|c| c.norm_sqr()).sum();
            max_inter = max_inter.max(inter);
            if accepted.is_multiple_of(cfg.store_every) || t >= cfg.t_end {
                time_grid.push(t);
                trajectory.push(StateVector::new(y.clone()));
            }

            let err_c = err.max(1e-10);
            let mut factor = SAFETY * err_c.powf(-PI_ALPHA) * err_prev.powf(PI_BETA);
            factor = factor.clamp(MIN_FACTOR, MAX_FACTOR);
            if last_rejected {
                factor = factor.min(1.0);
            }
            h = (h * factor).min(cfg.max_step);
            err_prev = err_c;
            last_rejected = false;
        } else {
            rejected += 1;
            let factor = (SAFETY * err.powf(-PI_ALPHA)).max(MIN_FACTOR);
            h *= factor;
            last_rejected = true;
        }
    }

    let final_state = trajectory.last().expect("non-empty trajectory");
    let norm_drift = (final_state.norm() - 1.0).abs();
    if norm_drift > MAX_NORM_DRIFT {
        return Err(Error::NormDriftExceeded { drift: norm_drift });
    }
    let final_pf = final_state.final_amplitude().norm_sqr();
    let mut result = PropagationResult {
        time_grid,
        trajectory,
        populations: Vec::new(),
        final_pf,
        max_intermediate_population: max_inter,
        norm_drift,
        accepted_steps: accepted,
        rejected_steps: rejected,
    };
    result.populations = populations_timeseries(&result);
    Ok(result)
}

fn initial_step(cfg: &IntegratorConfig, y: &[Complex64], f0: &[Complex64]) -> f64 {
    let scaled = |v: &[Complex64]| {
        let s: f64 = v
            .iter()
            .zip(y)
            .map(|(a, b)| (a.norm() / (cfg.abs_tol + cfg.rel_tol * b.norm())).powi(2))
            .sum();
        (s / v.len() as f64).sqrt()
    };
    let d0 = scaled(y);
    let d1 = scaled(f0);
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(cfg.max_step).min(cfg.t_end - cfg.t_start)
}

/// Transfer probability `cos²[∫ θ̇ ν dt]` for proportional couplings with all
/// S-sums zero, integrated over the pulses' default window.
pub fn pf_degenerate_prediction(sys: &MultiLambdaSystem, pulses: &PulsePair) -> Result<f64> {
    if !sys.is_proportional() {
        return Err(Error::PreconditionViolated("couplings are not proportional".into()));
    }
    let sums = s_sums(sys, None)
        .map_err(|e| Error::PreconditionViolated(format!("S-sums undefined: {e}")))?;
    for (name, v) in [("S_a2", sums.s_a2), ("S_b2", sums.s_b2), ("S_ab", sums.s_ab)] {
        if v.abs() > DEGENERATE_SUM_TOL {
            return Err(Error::PreconditionViolated(format!("{name} = {v:e} is not zero")));
        }
    }
    let w: f64 = sys
        .alphas()
        .iter()
        .zip(sys.detunings())
        .map(|(a, d)| (a / d).powi(2))
        .sum();

    let integrand = |t: f64| {
        let (p, s) = pulses.values(t);
        let (dp, ds) = pulses.derivatives(t);
        let omega2 = p * p + s * s;
        if omega2 == 0.0 {
            return 0.0;
        }
        let theta_dot = (dp * s - p * ds) / omega2;
        theta_dot / (1.0 + omega2 * w).sqrt()
    };
    let (a, b) = pulses.default_window();
    let angle = adaptive_simpson(&integrand, a, b, 1e-12, 50);
    Ok(angle.cos().powi(2))
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    // Start from a uniform split so that narrow features are not missed by
    // the first coarse estimate.
    const PANELS: usize = 64;
    let h = (b - a) / PANELS as f64;
    (0..PANELS)
        .map(|i| {
            let x0 = a + i as f64 * h;
            let x1 = x0 + h;
            let (f0, fm, f1) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
            let whole = h / 6.0 * (f0 + 4.0 * fm + f1);
            simpson_rec(f, x0, x1, f0, fm, f1, whole, tol / PANELS as f64, max_depth)
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PulseShape;

    fn run(sys: &MultiLambdaSystem, pulses: &PulsePair) -> PropagationResult {
        let cfg = IntegratorConfig::for_pulses(pulses);
        propagate(sys, pulses, &cfg, &StateVector::initial(sys.n_intermediate())).unwrap()
    }

    #[test]
    fn fields_off_keeps_populations() {
        let sys = MultiLambdaSystem::new(vec![1.0, 2.0], vec![1.0, 0.5], vec![0.5, -1.5]).unwrap();
        let pulses = PulsePair::new(0.0, 10.0, 5.0, PulseShape::Gaussian).unwrap();
        let start = StateVector::from_real(&[0.6, 0.0, 0.8, 0.0]);
        let cfg = IntegratorConfig::for_pulses(&pulses);
        let r = propagate(&sys, &pulses, &cfg, &start).unwrap();
        for (m, series) in r.populations.iter().enumerate() {
            let p0 = start.populations()[m];
            let dev = series.iter().map(|p| (p - p0).abs()).fold(0.0, f64::max);
            assert!(dev < 1e-9, "state {m}: {dev:e}");
        }
        // Pure phase on the detuned state: c_2(t) = 0.8 exp(-i Δ_2 (t - t0)).
        let c2 = r.final_state().amplitudes()[2];
        let phase = -(-1.5) * (cfg.t_end - cfg.t_start);
        let expect = Complex64::from_polar(0.8, phase);
        assert!((c2 - expect).norm() < 1e-7, "{c2} vs {expect}");
    }

    #[test]
    fn starts_in_initial_state() {
        let sys = MultiLambdaSystem::new(vec![1.0], vec![1.0], vec![0.0]).unwrap();
        let pulses = PulsePair::gaussian(1.0, 5.0).unwrap();
        let r = run(&sys, &pulses);
        assert_eq!(r.populations[0][0], 1.0);
        assert_eq!(r.populations[1][0], 0.0);
        assert_eq!(r.populations[2][0], 0.0);
        assert_eq!(r.time_grid[0], -22.5);
        assert_eq!(*r.time_grid.last().unwrap(), 22.5);
    }

    #[test]
    fn resonant_three_level_stirap() {
        let sys = MultiLambdaSystem::new(vec![1.0], vec![1.0], vec![0.0]).unwrap();
        let pulses = PulsePair::gaussian(1.0, 30.0).unwrap();
        let r = run(&sys, &pulses);
        assert!(r.final_pf > 0.99, "P_f = {}", r.final_pf);
        assert!(r.norm_drift < 1e-9);
        for j in 0..r.time_grid.len() {
            let total: f64 = r.populations.iter().map(|s| s[j]).sum();
            assert!((total - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn dark_versus_general_transient_population() {
        let pulses = PulsePair::gaussian(1.0, 30.0).unwrap();
        let dark =
            MultiLambdaSystem::new(vec![1.0, 1.5, 0.5], vec![1.0, 1.5, 0.5], vec![0.5, 1.0, -3.0])
                .unwrap();
        let general =
            MultiLambdaSystem::new(vec![1.0, 1.5, 0.5], vec![1.0, 0.5, 1.5], vec![0.5, 1.0, -3.0])
                .unwrap();
        let rd = run(&dark, &pulses);
        let rg = run(&general, &pulses);
        assert!(rd.max_intermediate_population < 0.05, "{}", rd.max_intermediate_population);
        assert!(rg.max_intermediate_population > 0.05, "{}", rg.max_intermediate_population);
        assert!(rd.final_pf > 0.95 && rg.final_pf > 0.95);
    }

    #[test]
    fn store_every_thins_trajectory() {
        let sys = MultiLambdaSystem::new(vec![1.0], vec![1.0], vec![0.5]).unwrap();
        let pulses = PulsePair::gaussian(1.0, 10.0).unwrap();
        let cfg = IntegratorConfig::for_pulses(&pulses);
        let full = propagate(&sys, &pulses, &cfg, &StateVector::initial(1)).unwrap();
        let thin = propagate(&sys, &pulses, &cfg.clone().with_store_every(10), &StateVector::initial(1))
            .unwrap();
        assert!(thin.trajectory.len() < full.trajectory.len() / 5);
        assert_eq!(thin.final_pf, full.final_pf);
        assert_eq!(thin.max_intermediate_population, full.max_intermediate_population);
    }

    #[test]
    fn config_validation() {
        let pulses = PulsePair::gaussian(1.0, 10.0).unwrap();
        let sys = MultiLambdaSystem::new(vec![1.0], vec![1.0], vec![0.5]).unwrap();
        let base = IntegratorConfig::for_pulses(&pulses);
        let init = StateVector::initial(1);
        let mut c = base.clone();
        c.t_end = c.t_start;
        assert!(matches!(propagate(&sys, &pulses, &c, &init), Err(Error::InvalidIntegrator(_))));
        let c = base.clone().with_tolerances(0.0, 1e-12);
        assert!(matches!(propagate(&sys, &pulses, &c, &init), Err(Error::InvalidIntegrator(_))));
        let bad = StateVector::from_real(&[1.0, 1.0, 0.0]);
        assert!(matches!(propagate(&sys, &pulses, &base, &bad), Err(Error::PreconditionViolated(_))));
    }

    fn degenerate_system() -> MultiLambdaSystem {
        MultiLambdaSystem::new(vec![1.0; 3], vec![1.0; 3], vec![1.0, -1.5, -3.0]).unwrap()
    }

    #[test]
    fn degenerate_prediction_limits() {
        let sys = degenerate_system();
        let weak = PulsePair::gaussian(1e-9, 1.0).unwrap();
        assert!(pf_degenerate_prediction(&sys, &weak).unwrap() < 1e-6);
        let strong = PulsePair::gaussian(1e6, 1.0).unwrap();
        assert!(pf_degenerate_prediction(&sys, &strong).unwrap() > 0.99);
    }

    #[test]
    fn degenerate_prediction_independent_of_width() {
        let sys = degenerate_system();
        let a = pf_degenerate_prediction(&sys, &PulsePair::gaussian(1.0, 20.0).unwrap()).unwrap();
        let b = pf_degenerate_prediction(&sys, &PulsePair::gaussian(1.0, 80.0).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-9);
        assert!((a - 0.272917).abs() < 1e-5, "{a}");
    }

    #[test]
    fn degenerate_prediction_preconditions() {
        let pulses = PulsePair::gaussian(1.0, 20.0).unwrap();
        let nonprop = MultiLambdaSystem::new(vec![1.0, 2.0], vec![1.0, 0.5], vec![0.5, 1.5]).unwrap();
        assert!(matches!(pf_degenerate_prediction(&nonprop, &pulses), Err(Error::PreconditionViolated(_))));
        let nonzero = MultiLambdaSystem::new(vec![1.0, 1.0], vec![1.0, 1.0], vec![0.5, 1.5]).unwrap();
        assert!(matches!(pf_degenerate_prediction(&nonzero, &pulses), Err(Error::PreconditionViolated(_))));
        let resonant = MultiLambdaSystem::new(vec![1.0, 1.0], vec![1.0, 1.0], vec![0.0, 1.5]).unwrap();
        assert!(matches!(pf_degenerate_prediction(&resonant, &pulses), Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn simpson_integrates_gaussian() {
        let v = adaptive_simpson(&|x: f64| (-x * x).exp(), -10.0, 10.0, 1e-12, 40);
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }
}
