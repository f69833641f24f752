//! Lindblad evolution of the resonator, its steady state, and purity.
//!
//! The dissipator keeps the internal factor of two,
//! 𝒟(J)ρ = 2JρJ† − J†Jρ − ρJ†J, so a linear cavity relaxes its photon number
//! at rate 2γ.

use nalgebra::DVector;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{
    diagonal_energies, top_two_population, vacuum_state, DensityMatrix, Operator,
    SystemParams, Truncation,
};
use crate::linalg::{self, CMatrix, ZERO};

/// Largest tolerated |Tr ρ − 1| during propagation.
pub const TRACE_DRIFT_TOL: f64 = 1e-6;
/// Positivity tolerance for propagated samples.
pub const SAMPLE_TOL: f64 = 1e-7;
/// Fixed-point residual accepted from the steady-state solve.
pub const STEADY_RESIDUAL_TOL: f64 = 1e-8;
/// Largest dimension `propagate_adaptive` will try.
pub const MAX_ADAPTIVE_N_CUT: usize = 240;

/// Output sampling and internal step of a propagation, in units of τ = γt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub n_samples: usize,
    /// Internal Runge–Kutta step; `None` selects [`default_step`].
    pub integrator_step: Option<f64>,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_samples: usize) -> Result<Self> {
        let g = TimeGrid {
            t_start,
            t_end,
            n_samples,
            integrator_step: None,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_step(mut self, step: f64) -> Result<Self> {
        self.integrator_step = Some(step);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_start.is_finite() && self.t_end.is_finite()) {
            return Err(Error::domain("t_end", self.t_end, "must be finite"));
        }
        if !(self.t_end > self.t_start) {
            return Err(Error::domain("t_end", self.t_end, "must exceed t_start"));
        }
        if self.n_samples < 2 {
            return Err(Error::domain(
                "n_samples",
                self.n_samples as f64,
                "need at least two samples",
            ));
        }
        if let Some(h) = self.integrator_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::domain("integrator_step", h, "must be positive"));
            }
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.t_end - self.t_start) / (self.n_samples - 1) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let dt = self.spacing();
        (0..self.n_samples)
            .map(|i| {
                if i + 1 == self.n_samples {
                    self.t_end
                } else {
                    self.t_start + i as f64 * dt
                }
            })
            .collect()
    }
}

/// Default internal step: the inverse of a bound on the Liouvillian's spectral
/// radius in the truncated space, which keeps classical RK4 inside its
/// stability region for every coherence, including the fast Kerr-shifted ones
/// near the truncation edge.
pub fn default_step(params: &SystemParams, trunc: &Truncation) -> f64 {
    let top = (trunc.n_cut - 1) as f64;
    let coherent = params.delta.abs() * top
        + params.chi * top * (top - 1.0).max(0.0)
        + 4.0 * params.drive * top.sqrt();
    let dissipative = 2.0 * params.gamma * (2.0 * params.n_th + 1.0) * (2.0 * top + 1.0);
    (1.0 / (coherent + dissipative).max(1.0)).min(1e-2)
}

/// Sampled solution of the master equation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// Largest population in the two highest Fock levels, over every step.
    pub leakage_max: f64,
    /// Internal step actually used.
    pub step: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Generator of the resonator's master equation with the Hamiltonian's
/// tridiagonal structure unrolled, so one application costs O(n²).
#[derive(Debug, Clone)]
pub(crate) struct KerrGenerator {
    dim: usize,
    energies: Vec<f64>,
    drive: f64,
    sqrt: Vec<f64>,
    /// γ(n_th + 1), the rate multiplying 𝒟(a)
    down: f64,
    /// γ n_th, the rate multiplying 𝒟(a†)
    up: f64,
}

impl KerrGenerator {
    pub(crate) fn new(params: &SystemParams, dim: usize) -> Self {
        KerrGenerator {
            dim,
            energies: diagonal_energies(params, dim),
            drive: params.drive,
            sqrt: (0..=dim).map(|j| (j as f64).sqrt()).collect(),
            down: params.gamma * (params.n_th + 1.0),
            up: params.gamma * params.n_th,
        }
    }

    /// Diagonal of a a† in the truncated basis: j + 1, except 0 on the top level.
    fn aad(&self, j: usize) -> f64 {
        if j + 1 < self.dim {
            (j + 1) as f64
        } else {
            0.0
        }
    }

    /// out = dρ/dτ, both column-major n×n.
    pub(crate) fn apply(&self, rho: &[C64], out: &mut [C64]) {
        let n = self.dim;
        let at = |j: usize, k: usize| rho[k * n + j];
        let minus_i = C64::new(0.0, -1.0);
        for k in 0..n {
            for j in 0..n {
                let r = at(j, k);
                let mut comm = r * (self.energies[j] - self.energies[k]);
                if self.drive != 0.0 {
                    let mut d = ZERO;
                    if j + 1 < n {
                        d += at(j + 1, k) * self.sqrt[j + 1];
                    }
                    if j > 0 {
                        d += at(j - 1, k) * self.sqrt[j];
                    }
                    if k > 0 {
                        d -= at(j, k - 1) * self.sqrt[k];
                    }
                    if k + 1 < n {
                        d -= at(j, k + 1) * self.sqrt[k + 1];
                    }
                    comm += d * self.drive;
                }
                let mut value = minus_i * comm;

                let mut lower = -r * (j + k) as f64;
                if j + 1 < n && k + 1 < n {
                    lower += at(j + 1, k + 1) * (2.0 * self.sqrt[j + 1] * self.sqrt[k + 1]);
                }
                value += lower * self.down;

                if self.up != 0.0 {
                    let mut raise = -r * (self.aad(j) + self.aad(k));
                    if j > 0 && k > 0 {
                        raise += at(j - 1, k - 1) * (2.0 * self.sqrt[j] * self.sqrt[k]);
                    }
                    value += raise * self.up;
                }
                out[k * n + j] = value;
            }
        }
    }
}

/// dρ/dτ = −i[H, ρ] + γ(n_th+1)𝒟(a)ρ + γ n_th 𝒟(a†)ρ for an arbitrary
/// Hamiltonian matrix `h`.
pub fn lindblad_rhs(rho: &CMatrix, params: &SystemParams, h: &Operator) -> Result<Operator> {
    let n = rho.nrows();
    if rho.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rho.ncols(),
        });
    }
    if h.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: h.dim(),
        });
    }
    params.validate()?;
    let mut comm = h.matrix() * rho - rho * h.matrix();
    comm *= C64::new(0.0, -1.0);

    // dissipators via the structured generator with H switched off
    let dissipative = KerrGenerator::new(
        &SystemParams {
            delta: 0.0,
            chi: 0.0,
            drive: 0.0,
            ..*params
        },
        n,
    );
    let mut out = CMatrix::zeros(n, n);
    dissipative.apply(rho.as_slice(), out.as_mut_slice());
    Ok(Operator::from_matrix_unchecked(comm + out))
}

struct Rk4 {
    generator: KerrGenerator,
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    scratch: Vec<C64>,
}

impl Rk4 {
    fn new(generator: KerrGenerator) -> Self {
        let len = generator.dim * generator.dim;
        Rk4 {
            generator,
            k1: vec![ZERO; len],
            k2: vec![ZERO; len],
            k3: vec![ZERO; len],
            k4: vec![ZERO; len],
            scratch: vec![ZERO; len],
        }
    }

    fn step(&mut self, rho: &mut [C64], h: f64) {
        let g = &self.generator;
        g.apply(rho, &mut self.k1);
        for (s, (r, k)) in self.scratch.iter_mut().zip(rho.iter().zip(&self.k1)) {
            *s = r + k * (0.5 * h);
        }
        g.apply(&self.scratch, &mut self.k2);
        for (s, (r, k)) in self.scratch.iter_mut().zip(rho.iter().zip(&self.k2)) {
            *s = r + k * (0.5 * h);
        }
        g.apply(&self.scratch, &mut self.k3);
        for (s, (r, k)) in self.scratch.iter_mut().zip(rho.iter().zip(&self.k3)) {
            *s = r + k * h;
        }
        g.apply(&self.scratch, &mut self.k4);
        let w = h / 6.0;
        for i in 0..rho.len() {
            rho[i] += (self.k1[i] + (self.k2[i] + self.k3[i]) * 2.0 + self.k4[i]) * w;
        }
    }
}

/// Integrate the master equation from `rho0` with fixed-step classical RK4,
/// re-symmetrizing after every step.
pub fn propagate(
    rho0: &DensityMatrix,
    params: &SystemParams,
    grid: &TimeGrid,
    trunc: &Truncation,
) -> Result<Trajectory> {
    params.validate()?;
    grid.validate()?;
    trunc.validate()?;
    let n = trunc.n_cut;
    if rho0.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rho0.dim(),
        });
    }
    let spacing = grid.spacing();
    let requested = grid
        .integrator_step
        .unwrap_or_else(|| default_step(params, trunc));
    let substeps = (spacing / requested).ceil().max(1.0) as usize;
    let h = spacing / substeps as f64;

    let mut rk = Rk4::new(KerrGenerator::new(params, n));
    let mut rho = rho0.matrix().clone();
    let times = grid.times();
    let mut states = Vec::with_capacity(times.len());
    let mut leakage_max = top_two_population(&rho);
    let check = |rho: &CMatrix, t: f64, leakage_max: &mut f64| -> Result<()> {
        let tr = linalg::trace(rho).re;
        if !tr.is_finite() || (tr - 1.0).abs() > TRACE_DRIFT_TOL {
            return Err(Error::TraceDrift { time: t, trace: tr });
        }
        let leak = top_two_population(rho);
        *leakage_max = leakage_max.max(leak);
        if leak > trunc.leakage_tol {
            return Err(Error::TruncationInsufficient {
                n_cut: n,
                detail: format!(
                    "top-two-level population {leak:.3e} exceeds {:.3e} at gamma*t = {t:.6}",
                    trunc.leakage_tol
                ),
            });
        }
        Ok(())
    };
    check(&rho, times[0], &mut leakage_max)?;
    states.push(sample_state(&rho, times[0])?);

    for (i, &t_next) in times.iter().enumerate().skip(1) {
        for s in 0..substeps {
            rk.step(rho.as_mut_slice(), h);
            linalg::symmetrize(&mut rho);
            let t = times[i - 1] + (s + 1) as f64 * h;
            check(&rho, t, &mut leakage_max)?;
        }
        states.push(sample_state(&rho, t_next)?);
    }

    Ok(Trajectory {
        times,
        states,
        leakage_max,
        step: h,
    })
}

fn sample_state(rho: &CMatrix, t: f64) -> Result<DensityMatrix> {
    DensityMatrix::with_tol(rho.clone(), SAMPLE_TOL).map_err(|e| match e {
        Error::Trace { trace, .. } => Error::TraceDrift { time: t, trace },
        other => other,
    })
}

/// Propagate from the vacuum, doubling `n_cut` whenever the leakage check
/// fails. Returns the trajectory and the truncation that succeeded.
pub fn propagate_adaptive(
    params: &SystemParams,
    grid: &TimeGrid,
    trunc: &Truncation,
) -> Result<(Trajectory, Truncation)> {
    let mut current = *trunc;
    loop {
        let rho0 = vacuum_state(&current)?;
        match propagate(&rho0, params, grid, &current) {
            Err(Error::TruncationInsufficient { .. }) if current.n_cut * 2 <= MAX_ADAPTIVE_N_CUT => {
                current = current.doubled();
            }
            other => return other.map(|traj| (traj, current)),
        }
    }
}

/// Dense Liouvillian acting on column-major vec(ρ).
pub(crate) fn liouvillian(params: &SystemParams, dim: usize) -> CMatrix {
    let generator = KerrGenerator::new(params, dim);
    let len = dim * dim;
    let mut l = CMatrix::zeros(len, len);
    let mut basis = vec![ZERO; len];
    let mut column = vec![ZERO; len];
    for v in 0..len {
        basis[v] = C64::new(1.0, 0.0);
        generator.apply(&basis, &mut column);
        l.set_column(v, &DVector::from_column_slice(&column));
        basis[v] = ZERO;
    }
    l
}

/// Solve L·vec(ρ) = 0 with the (0,0) equation replaced by Tr ρ = 1.
pub fn steady_state(params: &SystemParams, trunc: &Truncation) -> Result<DensityMatrix> {
    params.validate()?;
    trunc.validate()?;
    let n = trunc.n_cut;
    let len = n * n;
    let mut l = liouvillian(params, n);
    for v in 0..len {
        l[(0, v)] = ZERO;
    }
    for j in 0..n {
        l[(0, j * n + j)] = C64::new(1.0, 0.0);
    }
    let mut rhs = DVector::from_element(len, ZERO);
    rhs[0] = C64::new(1.0, 0.0);
    let x = l
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("steady-state Liouvillian system is singular".into()))?;
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical(
            "steady-state solve produced non-finite entries".into(),
        ));
    }
    let mut rho = CMatrix::from_column_slice(n, n, x.as_slice());
    linalg::symmetrize(&mut rho);

    let generator = KerrGenerator::new(params, n);
    let mut residual = CMatrix::zeros(n, n);
    generator.apply(rho.as_slice(), residual.as_mut_slice());
    let worst = linalg::max_abs(&residual);
    if worst > STEADY_RESIDUAL_TOL {
        return Err(Error::Numerical(format!(
            "steady-state residual {worst:.3e} exceeds {STEADY_RESIDUAL_TOL:.0e}"
        )));
    }
    let leak = top_two_population(&rho);
    if leak > trunc.leakage_tol {
        return Err(Error::TruncationInsufficient {
            n_cut: n,
            detail: format!("steady-state top-two-level population {leak:.3e}"),
        });
    }
    DensityMatrix::new(rho).map_err(|e| match e {
        Error::NotPositive { min_eigenvalue } => Error::TruncationInsufficient {
            n_cut: n,
            detail: format!("steady state has eigenvalue {min_eigenvalue:.3e}"),
        },
        other => other,
    })
}

/// Largest dimension the dense steady-state solve is doubled up to.
pub const MAX_STEADY_N_CUT: usize = 60;

/// Like [`steady_state`], doubling `n_cut` while the truncation is too small.
pub fn steady_state_adaptive(
    params: &SystemParams,
    trunc: &Truncation,
) -> Result<(DensityMatrix, Truncation)> {
    let mut current = *trunc;
    loop {
        match steady_state(params, &current) {
            Err(Error::TruncationInsufficient { .. }) if current.n_cut * 2 <= MAX_STEADY_N_CUT => {
                current = current.doubled();
            }
            other => return other.map(|rho| (rho, current)),
        }
    }
}

/// Tr(ρ²)
pub fn purity(rho: &DensityMatrix) -> f64 {
    let m = rho.matrix();
    // Tr(ρ²) = Σ |ρ_jk|² for Hermitian ρ
    m.iter().map(|z| z.norm_sqr()).sum()
}
