//! Instantaneous eigenstructure of the Hamiltonian.
//!
//! The eigensolver is a cyclic Jacobi iteration on a dense copy of the matrix.
//! Matrices here are small (`N + 2` rows) and the interesting physics sits in
//! eigenvalues many orders of magnitude below `‖H‖`, so the solver keeps
//! rotating until off-diagonal entries are negligible relative to the
//! diagonal they would perturb, not merely relative to `‖H‖`.
//!
//! Eigenpairs are followed through time by greedy maximal-overlap matching
//! between consecutive snapshots, with a continuous sign gauge.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, resonant_bracket, s_sums, MultiLambdaSystem, PulsePair};

/// Relative asymmetry accepted by [`eigendecompose`].
pub const SYMMETRY_RTOL: f64 = 1e-14;

/// Off-diagonal Frobenius norm, relative to `‖H‖_F`, below which the
/// iteration is considered converged.
pub const JACOBI_CONVERGENCE_RTOL: f64 = 1e-13;

/// Off-diagonal entries below this fraction of `‖H‖_F` are dropped outright.
const JACOBI_FLUSH_RTOL: f64 = 1e-24;

const MAX_SWEEPS: usize = 64;

/// Minimum overlap accepted when linking an eigenvector to its predecessor.
pub const MIN_TRACKING_OVERLAP: f64 = 0.5;

/// Ratio of the weaker to the stronger envelope below which the early/late
/// asymptotic formulas are considered valid.
pub const ASYMPTOTIC_RATIO: f64 = 0.1;

/// Eigenvalues in ascending order with eigenvectors stored as matching
/// columns.
#[derive(Debug, Clone)]
pub struct Eigendecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

pub fn eigendecompose(h: &DMatrix<f64>) -> Result<Eigendecomposition> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::NonSymmetricInput { max_deviation: f64::INFINITY });
    }
    let scale = h.norm();
    let mut max_dev = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            max_dev = max_dev.max((h[(i, j)] - h[(j, i)]).abs());
        }
    }
    if max_dev > SYMMETRY_RTOL * scale {
        return Err(Error::NonSymmetricInput { max_deviation: max_dev });
    }

    // Row-major working copy, symmetrized from the upper triangle.
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            a[i * n + j] = h[(i, j)];
            a[j * n + i] = h[(i, j)];
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let flush = JACOBI_FLUSH_RTOL * scale;
    let mut converged = n < 2 || scale == 0.0;
    let mut sweep = 0;
    while !converged {
        if sweep == MAX_SWEEPS {
            return Err(Error::NotConverged { sweeps: MAX_SWEEPS });
        }
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let g = 100.0 * apq.abs();
                let negligible =
                    sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs();
                if negligible || apq.abs() <= flush {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                rotate(&mut a, &mut v, n, p, q);
                rotated = true;
            }
        }
        sweep += 1;
        let off = off_diagonal_norm(&a, n);
        converged = !rotated || (off <= flush);
        if converged && off > JACOBI_CONVERGENCE_RTOL * scale {
            converged = false;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[x * n + x].total_cmp(&a[y * n + y]));
    let eigenvalues = order.iter().map(|&k| a[k * n + k]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| v[r * n + order[c]]);
    Ok(Eigendecomposition { eigenvalues, eigenvectors })
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[i * n + j] * a[i * n + j];
            }
        }
    }
    acc.sqrt()
}

/// Applies the Jacobi rotation that annihilates `a[p][q]`.
fn rotate(a: &mut [f64], v: &mut [f64], n: usize, p: usize, q: usize) {
    let apq = a[p * n + q];
    let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    a[p * n + p] -= t * apq;
    a[q * n + q] += t * apq;
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;
    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let arp = a[r * n + p];
        let arq = a[r * n + q];
        let new_rp = c * arp - s * arq;
        let new_rq = s * arp + c * arq;
        a[r * n + p] = new_rp;
        a[p * n + r] = new_rp;
        a[r * n + q] = new_rq;
        a[q * n + r] = new_rq;
    }
    for r in 0..n {
        let vrp = v[r * n + p];
        let vrq = v[r * n + q];
        v[r * n + p] = c * vrp - s * vrq;
        v[r * n + q] = s * vrp + c * vrq;
    }
}

/// Eigenpairs at one instant, labelled by persistent track ids.
///
/// `track_ids[m]` is the label of the `m`-th eigenpair (ascending order).
#[derive(Debug, Clone)]
pub struct SpectralSnapshot {
    pub t: f64,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
    pub track_ids: Vec<usize>,
}

impl SpectralSnapshot {
    /// Column index of the eigenpair carrying `track`.
    pub fn position_of(&self, track: usize) -> usize {
        self.track_ids
            .iter()
            .position(|&id| id == track)
            .expect("track id not present in snapshot")
    }

    pub fn eigenvalue_of(&self, track: usize) -> f64 {
        self.eigenvalues[self.position_of(track)]
    }

    pub fn eigenvector_of(&self, track: usize) -> Vec<f64> {
        self.eigenvectors.column(self.position_of(track)).iter().copied().collect()
    }
}

/// Diagonalizes `H(t)` on `time_grid` and links eigenpairs across steps.
pub fn track_spectrum(
    sys: &MultiLambdaSystem,
    pulses: &PulsePair,
    time_grid: &[f64],
) -> Result<Vec<SpectralSnapshot>> {
    if time_grid.is_empty() || time_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidTimeGrid);
    }
    let mut out: Vec<SpectralSnapshot> = Vec::with_capacity(time_grid.len());
    for &t in time_grid {
        let (p, s) = pulses.values(t);
        let eig = eigendecompose(&build_hamiltonian(sys, p, s))?;
        let snap = match out.last() {
            None => first_snapshot(t, eig),
            Some(prev) => link_snapshot(prev, t, eig)?,
        };
        out.push(snap);
    }
    Ok(out)
}

fn first_snapshot(t: f64, eig: Eigendecomposition) -> SpectralSnapshot {
    let Eigendecomposition { eigenvalues, mut eigenvectors } = eig;
    let n = eigenvalues.len();
    for c in 0..n {
        let mut col = eigenvectors.column_mut(c);
        let mut lead = 0;
        for r in 1..n {
            if col[r].abs() > col[lead].abs() {
                lead = r;
            }
        }
        if col[lead] < 0.0 {
            col.neg_mut();
        }
    }
    SpectralSnapshot { t, eigenvalues, eigenvectors, track_ids: (0..n).collect() }
}

fn link_snapshot(prev: &SpectralSnapshot, t: f64, eig: Eigendecomposition) -> Result<SpectralSnapshot> {
    let Eigendecomposition { eigenvalues, mut eigenvectors } = eig;
    let n = eigenvalues.len();
    let overlap = prev.eigenvectors.transpose() * &eigenvectors;

    let mut candidates: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            candidates.push((overlap[(i, j)].abs(), i, j));
        }
    }
    candidates.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let mut prev_used = vec![false; n];
    let mut match_of_curr: Vec<Option<usize>> = vec![None; n];
    let mut worst = f64::INFINITY;
    for (o, i, j) in candidates {
        if prev_used[i] || match_of_curr[j].is_some() {
            continue;
        }
        prev_used[i] = true;
        match_of_curr[j] = Some(i);
        worst = worst.min(o);
    }
    if worst < MIN_TRACKING_OVERLAP {
        return Err(Error::AmbiguousTracking { t, overlap: worst });
    }

    let mut track_ids = vec![0; n];
    for (j, m) in match_of_curr.into_iter().enumerate() {
        let i = m.expect("greedy matching covers every column");
        track_ids[j] = prev.track_ids[i];
        if overlap[(i, j)] < 0.0 {
            eigenvectors.column_mut(j).neg_mut();
        }
    }
    Ok(SpectralSnapshot { t, eigenvalues, eigenvectors, track_ids })
}

/// Track whose first eigenvector has the largest weight on basis state `basis`.
pub fn track_from_state(snapshots: &[SpectralSnapshot], basis: usize) -> usize {
    let first = &snapshots[0];
    let col = (0..first.eigenvalues.len())
        .max_by(|&x, &y| {
            first.eigenvectors[(basis, x)]
                .abs()
                .total_cmp(&first.eigenvectors[(basis, y)].abs())
        })
        .expect("non-empty snapshot");
    first.track_ids[col]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Early,
    Late,
}

/// Leading-order behaviour of the eigenvalues that vanish at `t → ∓∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticEigenvalues {
    pub side: Side,
    pub small: f64,
    /// One entry off resonance, the symmetric pair `(-x, +x)` on resonance.
    pub large: Vec<f64>,
}

/// Whether the envelope values are in the early (Stokes-dominated) or late
/// (pump-dominated) regime where the asymptotic formulas apply.
pub fn in_asymptotic_regime(omega_p: f64, omega_s: f64, side: Side) -> bool {
    match side {
        Side::Early => omega_s > 0.0 && omega_p / omega_s < ASYMPTOTIC_RATIO,
        Side::Late => omega_p > 0.0 && omega_s / omega_p < ASYMPTOTIC_RATIO,
    }
}

/// Small and large vanishing eigenvalues with every intermediate state off
/// resonance.
pub fn asymptotic_eigenvalues_offres(
    sys: &MultiLambdaSystem,
    omega_p: f64,
    omega_s: f64,
    side: Side,
) -> Result<AsymptoticEigenvalues> {
    let sums = s_sums(sys, None)?;
    let g = sums.gram_determinant();
    let (small, large) = match side {
        Side::Early => {
            if sums.s_b2 == 0.0 {
                return Err(Error::DegenerateSums { which: "Stokes (S_b2)" });
            }
            (-g / sums.s_b2 * omega_p * omega_p, -sums.s_b2 * omega_s * omega_s)
        }
        Side::Late => {
            if sums.s_a2 == 0.0 {
                return Err(Error::DegenerateSums { which: "pump (S_a2)" });
            }
            (-g / sums.s_a2 * omega_s * omega_s, -sums.s_a2 * omega_p * omega_p)
        }
    };
    Ok(AsymptoticEigenvalues { side, small, large: vec![large] })
}

/// Small eigenvalue and the symmetric pair of large ones when intermediate
/// state `n` is the only resonant one.
pub fn asymptotic_eigenvalues_res(
    sys: &MultiLambdaSystem,
    n: usize,
    omega_p: f64,
    omega_s: f64,
    side: Side,
) -> Result<AsymptoticEigenvalues> {
    if sys.resonant_indices() != [n] {
        return Err(Error::NotSingleResonance { index: n });
    }
    let bracket = resonant_bracket(sys, n)?;
    let (a, b) = (sys.alphas()[n], sys.betas()[n]);
    let (small, half_gap) = match side {
        Side::Early => (-bracket * omega_p * omega_p / (b * b), b * omega_s),
        Side::Late => (-bracket * omega_s * omega_s / (a * a), a * omega_p),
    };
    Ok(AsymptoticEigenvalues { side, small, large: vec![-half_gap, half_gap] })
}
