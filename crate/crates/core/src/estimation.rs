//! Fisher information for the reservoir occupation n_th.
//!
//! Derivatives with respect to n_th come from the five-point central stencil
//! (−f(x+2h) + 8f(x+h) − 8f(x−h) + f(x−2h)) / 12h. The quantum Fisher
//! information uses the symmetric logarithmic derivative in the eigenbasis of
//! ρ; the classical one sums (∂p)²/p over measurement outcomes.

use rayon::prelude::*;

use crate::dynamics::{propagate, TimeGrid, Trajectory};
use crate::error::{Error, Result};
use crate::fock::{vacuum_state, DensityMatrix, Operator, SystemParams, Truncation};
use crate::linalg::{self, CMatrix};

/// Step configuration of the five-point stencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    /// Step relative to the point of evaluation.
    pub rel_step: f64,
    /// Smallest absolute step.
    pub abs_floor: f64,
}

impl FdConfig {
    pub const DEFAULT_REL_STEP: f64 = 1e-3;
    /// Much smaller relative step, for cross-checking the default.
    pub const FINE_REL_STEP: f64 = 1e-7;
    pub const DEFAULT_ABS_FLOOR: f64 = 1e-9;

    pub fn new(rel_step: f64, abs_floor: f64) -> Result<Self> {
        let cfg = FdConfig {
            rel_step,
            abs_floor,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn fine() -> Self {
        FdConfig {
            rel_step: Self::FINE_REL_STEP,
            abs_floor: Self::DEFAULT_ABS_FLOOR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_step > 0.0 && self.rel_step.is_finite()) {
            return Err(Error::domain("rel_step", self.rel_step, "must be positive"));
        }
        if !(self.abs_floor > 0.0 && self.abs_floor.is_finite()) {
            return Err(Error::domain("abs_floor", self.abs_floor, "must be positive"));
        }
        Ok(())
    }

    /// Step h at `x`, shrunk if x − 2h would not stay positive.
    pub fn step_at(&self, x: f64) -> Result<f64> {
        self.validate()?;
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::Step(format!(
                "evaluation point {x} must be positive"
            )));
        }
        let mut h = (self.rel_step * x).max(self.abs_floor);
        if x - 2.0 * h <= 0.0 {
            h = x / 4.0;
            if h < self.abs_floor {
                return Err(Error::Step(format!(
                    "x = {x:e} leaves no room for a step above the floor {:e}",
                    self.abs_floor
                )));
            }
        }
        Ok(h)
    }

    /// The four stencil abscissae, ordered +2h, +h, −h, −2h.
    pub fn stencil_points(&self, x: f64) -> Result<(f64, [f64; 4])> {
        let h = self.step_at(x)?;
        Ok((h, [x + 2.0 * h, x + h, x - h, x - 2.0 * h]))
    }
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            rel_step: Self::DEFAULT_REL_STEP,
            abs_floor: Self::DEFAULT_ABS_FLOOR,
        }
    }
}

/// Values the stencil can be applied to, entrywise.
pub trait Stencil: Sized {
    /// Combine samples at x+2h, x+h, x−h, x−2h.
    fn five_point(values: [&Self; 4], h: f64) -> Self;
}

impl Stencil for f64 {
    fn five_point([p2, p1, m1, m2]: [&Self; 4], h: f64) -> Self {
        (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h)
    }
}

impl Stencil for Vec<f64> {
    fn five_point([p2, p1, m1, m2]: [&Self; 4], h: f64) -> Self {
        (0..p2.len())
            .map(|i| f64::five_point([&p2[i], &p1[i], &m1[i], &m2[i]], h))
            .collect()
    }
}

impl Stencil for CMatrix {
    fn five_point([p2, p1, m1, m2]: [&Self; 4], h: f64) -> Self {
        (p1 - m1) * num_complex::Complex64::new(8.0 / (12.0 * h), 0.0)
            + (m2 - p2) * num_complex::Complex64::new(1.0 / (12.0 * h), 0.0)
    }
}

/// ∂f/∂x at `x` by the five-point stencil.
pub fn fd_derivative<T, F>(f: F, x: f64, cfg: &FdConfig) -> Result<T>
where
    T: Stencil,
    F: Fn(f64) -> Result<T>,
{
    let (h, points) = cfg.stencil_points(x)?;
    let p2 = f(points[0])?;
    let p1 = f(points[1])?;
    let m1 = f(points[2])?;
    let m2 = f(points[3])?;
    Ok(T::five_point([&p2, &p1, &m1, &m2], h))
}

/// Quantum Fisher information with the SLD it was computed from.
#[derive(Debug, Clone)]
pub struct SldResult {
    pub qfi: f64,
    pub sld: Operator,
    /// Pairs with λ_k + λ_l at or below this were left out.
    pub rank_tol: f64,
}

/// Relative cutoff applied to λ_k + λ_l when `rank_tol` is not given.
pub const DEFAULT_RANK_TOL_REL: f64 = 1e-12;

/// ℱ = 2 Σ |⟨k|∂ρ|l⟩|² / (λ_k + λ_l) over pairs above `rank_tol`
/// (default 1e-12 × the largest eigenvalue of ρ).
pub fn qfi(rho: &DensityMatrix, drho: &CMatrix, rank_tol: Option<f64>) -> Result<SldResult> {
    let n = rho.dim();
    if drho.nrows() != n || drho.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: drho.nrows(),
        });
    }
    let scale = linalg::max_abs(drho).max(1.0);
    let defect = linalg::hermiticity_defect(drho);
    if defect > 1e-8 * scale {
        return Err(Error::NotHermitian { deviation: defect });
    }
    let tr = linalg::trace(drho);
    if tr.norm() > 1e-6 {
        return Err(Error::Trace {
            trace: tr.re,
            expected: 0.0,
        });
    }

    let (values, vectors) = linalg::eigh(rho.matrix());
    let largest = values.last().copied().unwrap_or(0.0).max(0.0);
    let rank_tol = rank_tol.unwrap_or(DEFAULT_RANK_TOL_REL * largest);
    let rotated = vectors.adjoint() * drho * &vectors;
    let mut sld_eigen = CMatrix::zeros(n, n);
    let mut total = 0.0;
    for k in 0..n {
        for l in 0..n {
            let denom = values[k].max(0.0) + values[l].max(0.0);
            if denom > rank_tol {
                let d = rotated[(k, l)];
                total += 2.0 * d.norm_sqr() / denom;
                sld_eigen[(k, l)] = d * (2.0 / denom);
            }
        }
    }
    let mut sld = &vectors * sld_eigen * vectors.adjoint();
    linalg::symmetrize(&mut sld);
    Ok(SldResult {
        qfi: total.max(0.0),
        sld: Operator::from_matrix_unchecked(sld),
        rank_tol,
    })
}

/// Outcome probabilities below this are left out of the classical sum.
pub const DEFAULT_P_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfiResult {
    pub fisher: f64,
    /// Total probability of the outcomes dropped below the floor.
    pub skipped_mass: f64,
}

/// F = Σ (∂p_x)² / p_x with the default floor.
pub fn cfi(probabilities: &[f64], dprobabilities: &[f64]) -> Result<CfiResult> {
    cfi_with_floor(probabilities, dprobabilities, DEFAULT_P_FLOOR)
}

pub fn cfi_with_floor(
    probabilities: &[f64],
    dprobabilities: &[f64],
    p_floor: f64,
) -> Result<CfiResult> {
    if probabilities.len() != dprobabilities.len() {
        return Err(Error::DimensionMismatch {
            expected: probabilities.len(),
            found: dprobabilities.len(),
        });
    }
    if let Some(&p) = probabilities.iter().find(|&&p| p < -1e-12 || !p.is_finite()) {
        return Err(Error::domain("probability", p, "must be non-negative"));
    }
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Trace {
            trace: total,
            expected: 1.0,
        });
    }
    let mut fisher = 0.0;
    let mut skipped_mass = 0.0;
    for (&p, &dp) in probabilities.iter().zip(dprobabilities) {
        if p > p_floor {
            fisher += dp * dp / p;
        } else {
            skipped_mass += p.max(0.0);
        }
    }
    Ok(CfiResult {
        fisher,
        skipped_mass,
    })
}

/// Lower bound 1/(μ F) on the variance of an unbiased estimate of n_th.
pub fn cr_bound(fisher: f64, repetitions: u64) -> Result<f64> {
    if !(fisher > 0.0) || !fisher.is_finite() {
        return Err(Error::domain("fisher", fisher, "must be positive"));
    }
    if repetitions == 0 {
        return Err(Error::domain(
            "repetitions",
            0.0,
            "need at least one repetition",
        ));
    }
    Ok(1.0 / (repetitions as f64 * fisher))
}

/// Which Fisher information a series holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FisherKind {
    Qfi,
    CfiHomodyne { phi: f64 },
    CfiHeterodyne,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FisherSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: FisherKind,
    pub fd: FdConfig,
    /// Largest probability mass dropped below the outcome floor (CFI only).
    pub skipped_mass_max: f64,
}

impl FisherSeries {
    /// Relative change of the values over the final `fraction` of the samples.
    pub fn tail_relative_change(&self, fraction: f64) -> f64 {
        tail_relative_change(&self.values, fraction)
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("series is never empty")
    }

    /// First sample time at which the value reaches `fraction` of the final one.
    pub fn time_to_fraction(&self, fraction: f64) -> f64 {
        let target = fraction * self.last();
        self.values
            .iter()
            .position(|&v| v >= target)
            .map_or(f64::INFINITY, |i| self.times[i])
    }
}

/// (max − min) / |last| over the final `fraction` of `values`.
pub fn tail_relative_change(values: &[f64], fraction: f64) -> f64 {
    let len = values.len();
    let count = ((len as f64 * fraction).ceil() as usize).clamp(2, len);
    let tail = &values[len - count..];
    let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let last = values[len - 1].abs();
    if last == 0.0 {
        if hi - lo == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (hi - lo) / last
    }
}

/// Trajectory at n_th together with ∂ρ/∂n_th at every sample, from four
/// perturbed propagations that all start in the vacuum.
#[derive(Debug, Clone)]
pub struct PerturbedFamily {
    pub params: SystemParams,
    pub trunc: Truncation,
    pub fd: FdConfig,
    /// Stencil step actually used.
    pub h: f64,
    pub central: Trajectory,
    pub derivatives: Vec<CMatrix>,
    /// Largest leakage over all five propagations.
    pub leakage_max: f64,
}

impl PerturbedFamily {
    pub fn new(
        params: &SystemParams,
        grid: &TimeGrid,
        trunc: &Truncation,
        fd: &FdConfig,
    ) -> Result<Self> {
        params.validate()?;
        let (h, points) = fd.stencil_points(params.n_th)?;
        let rho0 = vacuum_state(trunc)?;
        // Every propagation uses the central step so the five runs share one
        // discretization.
        let grid = match grid.integrator_step {
            Some(_) => *grid,
            None => {
                let step = crate::dynamics::default_step(&params.with_n_th(points[0]), trunc);
                grid.with_step(step)?
            }
        };
        let n_values = [params.n_th, points[0], points[1], points[2], points[3]];
        let mut runs: Vec<Trajectory> = n_values
            .par_iter()
            .map(|&n| propagate(&rho0, &params.with_n_th(n), &grid, trunc))
            .collect::<Result<_>>()?;
        let central = runs.remove(0);
        let derivatives = (0..central.len())
            .map(|i| {
                CMatrix::five_point(
                    [
                        runs[0].states[i].matrix(),
                        runs[1].states[i].matrix(),
                        runs[2].states[i].matrix(),
                        runs[3].states[i].matrix(),
                    ],
                    h,
                )
            })
            .collect();
        let leakage_max = runs
            .iter()
            .map(|r| r.leakage_max)
            .fold(central.leakage_max, f64::max);
        Ok(PerturbedFamily {
            params: *params,
            trunc: *trunc,
            fd: *fd,
            h,
            central,
            derivatives,
            leakage_max,
        })
    }

    /// Like [`PerturbedFamily::new`], doubling `n_cut` on leakage failures.
    pub fn new_adaptive(
        params: &SystemParams,
        grid: &TimeGrid,
        trunc: &Truncation,
        fd: &FdConfig,
    ) -> Result<Self> {
        let mut current = *trunc;
        loop {
            match Self::new(params, grid, &current, fd) {
                Err(Error::TruncationInsufficient { .. })
                    if current.n_cut * 2 <= crate::dynamics::MAX_ADAPTIVE_N_CUT =>
                {
                    current = current.doubled();
                }
                other => return other,
            }
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.central.times
    }

    pub fn qfi_series(&self) -> Result<FisherSeries> {
        let values = self
            .central
            .states
            .par_iter()
            .zip(self.derivatives.par_iter())
            .map(|(rho, drho)| qfi(rho, drho, None).map(|r| r.qfi))
            .collect::<Result<Vec<f64>>>()?;
        Ok(FisherSeries {
            times: self.central.times.clone(),
            values,
            kind: FisherKind::Qfi,
            fd: self.fd,
            skipped_mass_max: 0.0,
        })
    }
}

/// ℱ(τ) along the evolution from the vacuum.
pub fn qfi_series(
    params: &SystemParams,
    grid: &TimeGrid,
    trunc: &Truncation,
    cfg: &FdConfig,
) -> Result<FisherSeries> {
    PerturbedFamily::new(params, grid, trunc, cfg)?.qfi_series()
}
