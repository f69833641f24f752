//! Uhlmann–Jozsa fidelity and the effective temperature of a state, i.e. the
//! Gibbs occupation whose state it most resembles.

use rayon::prelude::*;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::fock::{gibbs_populations, DensityMatrix};
use crate::linalg::{self, CMatrix};

/// Eigenvalues of σ below this are treated as zero when taking √σ.
pub const SQRT_CLIP: f64 = 1e-12;
/// Absolute tolerance of the golden-section refinement in n̄_eff.
pub const N_EFF_TOL: f64 = 1e-6;
const GRID_POINTS: usize = 64;
const LOG_GRID_START: f64 = 1e-4;

/// O(ρ, σ) = (Tr √(√σ ρ √σ))², clamped to [0, 1].
pub fn uhlmann_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: sigma.dim(),
        });
    }
    let (values, vectors) = linalg::eigh(sigma.matrix());
    if values[0] < -sigma.tol() {
        return Err(Error::NotPositive {
            min_eigenvalue: values[0],
        });
    }
    // √σ ρ √σ in σ's eigenbasis: (√s_j (V†ρV)_jk √s_k)
    let roots: Vec<f64> = values
        .iter()
        .map(|&v| if v < SQRT_CLIP { 0.0 } else { v.sqrt() })
        .collect();
    let rotated = vectors.adjoint() * rho.matrix() * &vectors;
    Ok(fidelity_from_weighted(&rotated, &roots))
}

/// Fidelity of `rho` against a state diagonal in the same basis with the given
/// (exact, non-negative) populations. No clipping is applied, so this differs
/// from [`uhlmann_fidelity`] by at most the weight of the clipped levels.
pub(crate) fn fidelity_with_diagonal(rho: &CMatrix, populations: &[f64]) -> f64 {
    let roots: Vec<f64> = populations.iter().map(|&p| p.max(0.0).sqrt()).collect();
    fidelity_from_weighted(rho, &roots)
}

fn fidelity_from_weighted(rho: &CMatrix, roots: &[f64]) -> f64 {
    let n = rho.nrows();
    let mut m = CMatrix::from_fn(n, n, |j, k| rho[(j, k)] * (roots[j] * roots[k]));
    linalg::symmetrize(&mut m);
    let trace_root: f64 = linalg::eigvalsh(&m)
        .into_iter()
        .map(|v| v.max(0.0).sqrt())
        .sum();
    (trace_root * trace_root).clamp(0.0, 1.0)
}

/// Maximizer of the Gibbs fidelity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveTemperature {
    pub n_eff: f64,
    pub fidelity: f64,
    /// The maximum sat on the upper end of the search bracket.
    pub at_boundary: bool,
}

/// Heuristic upper end of the n̄_eff search: 5(n_th + ⟨a†a⟩ + 0.1).
pub fn default_search_max(n_th: f64, rho: &DensityMatrix) -> f64 {
    5.0 * (n_th + rho.mean_photon_number() + 0.1)
}

/// argmax over n̄ ∈ [0, search_max] of O(ρ, Gibbs(n̄)): a 64-point scan (zero
/// plus log-spaced points from 1e-4) refined by golden-section search.
pub fn effective_temperature(rho: &DensityMatrix, search_max: f64) -> Result<EffectiveTemperature> {
    if !(search_max > 0.0) || !search_max.is_finite() {
        return Err(Error::domain(
            "search_max",
            search_max,
            "must be positive and finite",
        ));
    }
    let dim = rho.dim();
    let objective = |n: f64| fidelity_with_diagonal(rho.matrix(), &gibbs_populations(n, dim));

    let grid = scan_grid(search_max);
    let scores: Vec<f64> = grid.iter().map(|&n| objective(n)).collect();
    let best = scores
        .iter()
        .enumerate()
        .fold(0, |best, (i, &s)| if s > scores[best] { i } else { best });

    let lo = if best == 0 { 0.0 } else { grid[best - 1] };
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (mut n_eff, mut fidelity) = golden_section_max(&objective, lo, hi, N_EFF_TOL);
    if scores[best] > fidelity {
        n_eff = grid[best];
        fidelity = scores[best];
    }
    let at_boundary = search_max - n_eff <= N_EFF_TOL;
    Ok(EffectiveTemperature {
        n_eff,
        fidelity,
        at_boundary,
    })
}

fn scan_grid(search_max: f64) -> Vec<f64> {
    let mut grid = Vec::with_capacity(GRID_POINTS);
    grid.push(0.0);
    let count = GRID_POINTS - 1;
    if search_max <= LOG_GRID_START {
        for i in 1..=count {
            grid.push(search_max * i as f64 / count as f64);
        }
        return grid;
    }
    let (a, b) = (LOG_GRID_START.ln(), search_max.ln());
    for i in 0..count {
        let x = a + (b - a) * i as f64 / (count - 1) as f64;
        grid.push(x.exp());
    }
    *grid.last_mut().unwrap() = search_max;
    grid
}

fn golden_section_max<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    let f_mid = f(mid);
    [(x1, f1), (x2, f2), (mid, f_mid), (lo, f(lo))]
        .into_iter()
        .fold((mid, f_mid), |best, c| if c.1 > best.1 { c } else { best })
}

/// n̄_eff(τ) along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct EffTempTrace {
    pub times: Vec<f64>,
    pub n_eff: Vec<f64>,
    pub fidelity_at_opt: Vec<f64>,
    /// Sample indices whose maximizer hit `search_max`.
    pub boundary_hits: Vec<usize>,
}

impl EffTempTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

pub fn thermalization_trace(traj: &Trajectory, search_max: f64) -> Result<EffTempTrace> {
    let fits: Vec<EffectiveTemperature> = traj
        .states
        .par_iter()
        .map(|s| effective_temperature(s, search_max))
        .collect::<Result<_>>()?;
    Ok(EffTempTrace {
        times: traj.times.clone(),
        n_eff: fits.iter().map(|f| f.n_eff).collect(),
        fidelity_at_opt: fits.iter().map(|f| f.fidelity).collect(),
        boundary_hits: fits
            .iter()
            .enumerate()
            .filter(|(_, f)| f.at_boundary)
            .map(|(i, _)| i)
            .collect(),
    })
}
