//! Truncated Fock-space operators, the resonator Hamiltonian, and reference
//! states.
//!
//! Rates and frequencies are in units of the decay rate γ, and times are the
//! dimensionless τ = γt. The basis is |0⟩, |1⟩, … with 0-based indexing.

use std::ops::{Add, Deref, Mul, Sub};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, ONE, ZERO};

/// Default tolerance for the Hermiticity, trace and positivity checks.
pub const DEFAULT_STATE_TOL: f64 = 1e-9;

/// Physical parameters of the driven dissipative Kerr resonator, in units of γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Cavity-pump detuning δ.
    pub delta: f64,
    /// Kerr coefficient χ.
    pub chi: f64,
    /// Single-photon drive amplitude ℰ.
    pub drive: f64,
    /// Decay rate; 1 by convention.
    pub gamma: f64,
    /// Mean thermal photon number of the reservoir.
    pub n_th: f64,
}

impl SystemParams {
    pub fn new(delta: f64, chi: f64, drive: f64, n_th: f64) -> Result<Self> {
        let p = SystemParams {
            delta,
            chi,
            drive,
            gamma: 1.0,
            n_th,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("delta", self.delta),
            ("chi", self.chi),
            ("drive", self.drive),
            ("gamma", self.gamma),
            ("n_th", self.n_th),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(Error::domain(name, value, "must be finite"));
            }
        }
        if self.gamma <= 0.0 {
            return Err(Error::domain("gamma", self.gamma, "must be positive"));
        }
        if self.n_th < 0.0 {
            return Err(Error::domain("n_th", self.n_th, "must be non-negative"));
        }
        if self.chi < 0.0 {
            return Err(Error::domain("chi", self.chi, "must be non-negative"));
        }
        if self.drive < 0.0 {
            return Err(Error::domain("drive", self.drive, "must be non-negative"));
        }
        Ok(())
    }

    /// Copy with a different reservoir occupation.
    pub fn with_n_th(&self, n_th: f64) -> Self {
        SystemParams { n_th, ..*self }
    }
}

/// Size of the truncated Fock space and the tolerated population in its two
/// highest levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub n_cut: usize,
    pub leakage_tol: f64,
}

impl Truncation {
    pub const DEFAULT_N_CUT: usize = 30;
    pub const DEFAULT_LEAKAGE_TOL: f64 = 1e-8;

    pub fn new(n_cut: usize) -> Result<Self> {
        Self::with_leakage(n_cut, Self::DEFAULT_LEAKAGE_TOL)
    }

    pub fn with_leakage(n_cut: usize, leakage_tol: f64) -> Result<Self> {
        let t = Truncation { n_cut, leakage_tol };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cut < 2 {
            return Err(Error::InvalidDimension {
                dim: self.n_cut,
                min: 2,
            });
        }
        if !(self.leakage_tol > 0.0 && self.leakage_tol < 1.0) {
            return Err(Error::domain(
                "leakage_tol",
                self.leakage_tol,
                "must lie in (0, 1)",
            ));
        }
        Ok(())
    }

    /// Same leakage tolerance, twice the dimension.
    pub fn doubled(&self) -> Self {
        Truncation {
            n_cut: self.n_cut * 2,
            ..*self
        }
    }
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation {
            n_cut: Self::DEFAULT_N_CUT,
            leakage_tol: Self::DEFAULT_LEAKAGE_TOL,
        }
    }
}

/// A square complex matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator(CMatrix);

impl Operator {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Operator(m))
    }

    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        Operator(m)
    }

    pub fn zeros(dim: usize) -> Self {
        Operator(CMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Operator(CMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dagger(&self) -> Self {
        Operator(self.0.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        linalg::hermiticity_defect(&self.0) <= tol
    }
}

impl Deref for Operator {
    type Target = CMatrix;

    fn deref(&self) -> &CMatrix {
        &self.0
    }
}

impl Add for &Operator {
    type Output = Operator;

    fn add(self, rhs: &Operator) -> Operator {
        Operator(&self.0 + &rhs.0)
    }
}

impl Sub for &Operator {
    type Output = Operator;

    fn sub(self, rhs: &Operator) -> Operator {
        Operator(&self.0 - &rhs.0)
    }
}

impl Mul for &Operator {
    type Output = Operator;

    fn mul(self, rhs: &Operator) -> Operator {
        Operator(&self.0 * &rhs.0)
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;

    fn mul(self, rhs: f64) -> Operator {
        Operator(self.0.map(|z| z * rhs))
    }
}

/// A density matrix in the truncated Fock basis.
///
/// Construction checks Hermiticity, unit trace, and positivity, all to the
/// stored tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: CMatrix,
    tol: f64,
}

impl DensityMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        Self::with_tol(entries, DEFAULT_STATE_TOL)
    }

    pub fn with_tol(entries: CMatrix, tol: f64) -> Result<Self> {
        let op = Operator::new(entries)?;
        let entries = op.into_matrix();
        let defect = linalg::hermiticity_defect(&entries);
        if defect > tol {
            return Err(Error::NotHermitian { deviation: defect });
        }
        let tr = linalg::trace(&entries);
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(Error::Trace {
                trace: tr.re,
                expected: 1.0,
            });
        }
        let min_eig = linalg::eigvalsh(&entries)[0];
        if min_eig < -tol {
            return Err(Error::NotPositive {
                min_eigenvalue: min_eig,
            });
        }
        Ok(DensityMatrix { entries, tol })
    }

    /// Diagonal state with the given populations; populations must already be
    /// non-negative and sum to one.
    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        let n = populations.len();
        if n < 2 {
            return Err(Error::InvalidDimension { dim: n, min: 2 });
        }
        let mut m = CMatrix::zeros(n, n);
        for (j, &p) in populations.iter().enumerate() {
            m[(j, j)] = C64::new(p, 0.0);
        }
        Self::new(m)
    }

    /// Pure state |ψ⟩⟨ψ| from a normalized vector.
    pub fn pure(psi: &crate::linalg::CVector) -> Result<Self> {
        let m = psi * psi.adjoint();
        Self::new(m)
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        Self::diagonal(&vec![1.0 / dim as f64; dim])
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.entries[(j, j)].re).collect()
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.populations()
            .iter()
            .enumerate()
            .map(|(j, p)| j as f64 * p)
            .sum()
    }

    /// Population of the two highest Fock levels.
    pub fn leakage(&self) -> f64 {
        top_two_population(&self.entries)
    }

    /// Tr(ρ A)
    pub fn expect(&self, op: &CMatrix) -> C64 {
        let n = self.dim();
        let mut acc = ZERO;
        for j in 0..n {
            for k in 0..n {
                acc += self.entries[(j, k)] * op[(k, j)];
            }
        }
        acc
    }
}

pub(crate) fn top_two_population(m: &CMatrix) -> f64 {
    let n = m.nrows();
    m[(n - 1, n - 1)].re + m[(n - 2, n - 2)].re
}

/// Truncated annihilation operator: (j, j+1) entry √(j+1).
pub fn annihilation(dim: usize) -> Result<Operator> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim, min: 2 });
    }
    let mut m = CMatrix::zeros(dim, dim);
    for j in 0..dim - 1 {
        m[(j, j + 1)] = C64::new(((j + 1) as f64).sqrt(), 0.0);
    }
    Ok(Operator(m))
}

pub fn creation(dim: usize) -> Result<Operator> {
    Ok(annihilation(dim)?.dagger())
}

pub fn number(dim: usize) -> Result<Operator> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim, min: 2 });
    }
    Ok(Operator(CMatrix::from_diagonal(&nalgebra::DVector::from_fn(
        dim,
        |j, _| C64::new(j as f64, 0.0),
    ))))
}

/// Diagonal of δ a†a + χ a†a†aa in the Fock basis: δ n + χ n (n - 1).
pub(crate) fn diagonal_energies(params: &SystemParams, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|n| {
            let n = n as f64;
            params.delta * n + params.chi * n * (n - 1.0)
        })
        .collect()
}

/// Ĥ = δ a†a + χ a†a†aa + ℰ(a + a†) in the truncated basis.
pub fn hamiltonian(params: &SystemParams, trunc: &Truncation) -> Result<Operator> {
    params.validate()?;
    trunc.validate()?;
    let dim = trunc.n_cut;
    let mut m = CMatrix::zeros(dim, dim);
    for (n, e) in diagonal_energies(params, dim).into_iter().enumerate() {
        m[(n, n)] = C64::new(e, 0.0);
    }
    for j in 0..dim - 1 {
        let coupling = C64::new(params.drive * ((j + 1) as f64).sqrt(), 0.0);
        m[(j, j + 1)] = coupling;
        m[(j + 1, j)] = coupling;
    }
    Ok(Operator(m))
}

/// Truncated Gibbs state together with the normalization that was applied.
#[derive(Debug, Clone)]
pub struct GibbsState {
    pub state: DensityMatrix,
    /// Total weight Σ_{j<n_cut} p_j of the untruncated distribution; 1 means
    /// the truncation lost nothing.
    pub retained_weight: f64,
}

/// Thermal state with populations ∝ (n/(n+1))^j, renormalized over the
/// truncated basis.
pub fn gibbs_state(n_eff: f64, trunc: &Truncation) -> Result<GibbsState> {
    trunc.validate()?;
    if !(n_eff >= 0.0) || !n_eff.is_finite() {
        return Err(Error::domain("n_eff", n_eff, "must be finite and non-negative"));
    }
    let populations = gibbs_populations(n_eff, trunc.n_cut);
    let retained_weight = {
        let ratio = n_eff / (n_eff + 1.0);
        1.0 - ratio.powi(trunc.n_cut as i32)
    };
    let dim = trunc.n_cut;
    let mut m = CMatrix::zeros(dim, dim);
    for (j, p) in populations.into_iter().enumerate() {
        m[(j, j)] = C64::new(p, 0.0);
    }
    Ok(GibbsState {
        state: DensityMatrix {
            entries: m,
            tol: DEFAULT_STATE_TOL,
        },
        retained_weight,
    })
}

/// Renormalized truncated geometric populations.
pub(crate) fn gibbs_populations(n_eff: f64, dim: usize) -> Vec<f64> {
    if n_eff == 0.0 {
        let mut p = vec![0.0; dim];
        p[0] = 1.0;
        return p;
    }
    let ratio = n_eff / (n_eff + 1.0);
    let mut p = Vec::with_capacity(dim);
    let mut w = 1.0;
    for _ in 0..dim {
        p.push(w);
        w *= ratio;
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    p
}

/// Bose-Einstein occupation 1/(e^{βω} - 1).
pub fn thermal_occupation(beta_omega: f64) -> Result<f64> {
    if !(beta_omega > 0.0) {
        return Err(Error::domain(
            "beta_omega",
            beta_omega,
            "must be positive (finite, positive temperature)",
        ));
    }
    Ok(1.0 / beta_omega.exp_m1())
}

pub fn vacuum_state(trunc: &Truncation) -> Result<DensityMatrix> {
    trunc.validate()?;
    let dim = trunc.n_cut;
    let mut m = CMatrix::zeros(dim, dim);
    m[(0, 0)] = ONE;
    Ok(DensityMatrix {
        entries: m,
        tol: DEFAULT_STATE_TOL,
    })
}
