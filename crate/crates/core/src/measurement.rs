//! Homodyne and heterodyne measurements: their POVMs, outcome distributions,
//! and classical Fisher information along the evolution.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{cfi, FdConfig, FisherKind, FisherSeries, PerturbedFamily};
use crate::fock::{annihilation, DensityMatrix, Operator, SystemParams, Truncation};
use crate::dynamics::TimeGrid;
use crate::linalg::{self, CMatrix, CVector};

/// Completeness tolerance for constructed POVMs.
pub const COMPLETENESS_TOL: f64 = 1e-6;
/// Largest completeness defect a heterodyne grid may have.
pub const HETERODYNE_DEFECT_LIMIT: f64 = 1e-4;
/// Tail mass above which a coherent state does not fit the truncation.
pub const COHERENT_TAIL_TOL: f64 = 1e-8;

/// Q̂_φ = (a e^{−iφ} + a† e^{iφ}) / 2
pub fn quadrature_op(phi: f64, trunc: &Truncation) -> Result<Operator> {
    trunc.validate()?;
    let a = annihilation(trunc.n_cut)?.into_matrix();
    let phase = C64::from_polar(1.0, -phi);
    let q = (&a * phase + a.adjoint() * phase.conj()) * C64::new(0.5, 0.0);
    Ok(Operator::from_matrix_unchecked(q))
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeLabels {
    /// Quadrature eigenvalues.
    Real(Vec<f64>),
    /// Coherent amplitudes on the phase-space grid.
    Complex(Vec<C64>),
}

impl OutcomeLabels {
    pub fn len(&self) -> usize {
        match self {
            OutcomeLabels::Real(v) => v.len(),
            OutcomeLabels::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A POVM whose elements are all rank one: element i is
/// `scales[i] · |kets_i⟩⟨kets_i|`, integrated with measure `weights[i]`.
#[derive(Debug, Clone)]
pub struct Povm {
    /// Kets as the columns of a dim × outcomes matrix.
    kets: CMatrix,
    scales: Vec<f64>,
    pub weights: Vec<f64>,
    pub labels: OutcomeLabels,
    /// max-entry norm of Σ w_i Π_i − I.
    pub completeness_defect: f64,
}

impl Povm {
    fn assemble(kets: CMatrix, scales: Vec<f64>, weights: Vec<f64>, labels: OutcomeLabels) -> Self {
        let mut povm = Povm {
            kets,
            scales,
            weights,
            labels,
            completeness_defect: 0.0,
        };
        povm.completeness_defect = povm.compute_completeness_defect();
        povm
    }

    pub fn dim(&self) -> usize {
        self.kets.nrows()
    }

    pub fn len(&self) -> usize {
        self.kets.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Π_i as a matrix.
    pub fn element(&self, i: usize) -> Operator {
        let v = self.kets.column(i);
        Operator::from_matrix_unchecked(v * v.adjoint() * C64::new(self.scales[i], 0.0))
    }

    fn compute_completeness_defect(&self) -> f64 {
        let n = self.dim();
        let mut weighted = self.kets.clone();
        for (i, mut col) in weighted.column_iter_mut().enumerate() {
            col *= C64::new(self.weights[i] * self.scales[i], 0.0);
        }
        let sum = weighted * self.kets.adjoint();
        linalg::max_abs_diff(&sum, &CMatrix::identity(n, n))
    }

    /// w_i s_i ⟨v_i|A|v_i⟩ for every outcome.
    fn weighted_expectations(&self, a: &CMatrix) -> Vec<f64> {
        let av = a * &self.kets;
        (0..self.len())
            .map(|i| {
                let z = self.kets.column(i).dotc(&av.column(i));
                self.weights[i] * self.scales[i] * z.re
            })
            .collect()
    }
}

/// Projective quadrature measurement on the eigenbasis of the truncated Q̂_φ.
pub fn homodyne_povm(phi: f64, trunc: &Truncation) -> Result<Povm> {
    let q = quadrature_op(phi, trunc)?;
    let (values, vectors) = linalg::eigh(q.matrix());
    let n = values.len();
    Ok(Povm::assemble(
        vectors,
        vec![1.0; n],
        vec![1.0; n],
        OutcomeLabels::Real(values),
    ))
}

/// e^{−|α|²/2} αⁿ/√(n!) for n below `dim`, without renormalization.
fn coherent_amplitudes(alpha: C64, dim: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    v[0] = c;
    for k in 1..dim {
        c *= alpha / (k as f64).sqrt();
        v[k] = c;
    }
    v
}

/// |α⟩ in the truncated basis, renormalized; fails when more than
/// [`COHERENT_TAIL_TOL`] of the state lies beyond the truncation.
pub fn coherent_state(alpha: C64, trunc: &Truncation) -> Result<CVector> {
    trunc.validate()?;
    let v = coherent_amplitudes(alpha, trunc.n_cut);
    let kept: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let tail = 1.0 - kept;
    if tail > COHERENT_TAIL_TOL {
        return Err(Error::TruncationInsufficient {
            n_cut: trunc.n_cut,
            detail: format!("coherent state |{alpha}> leaves tail mass {tail:.3e}"),
        });
    }
    Ok(v.unscale(kept.sqrt()))
}

/// Heterodyne grid extent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeterodyneGrid {
    pub radius: f64,
    pub step: f64,
}

impl HeterodyneGrid {
    pub const DEFAULT_STEP: f64 = 0.25;

    /// Radius large enough for the Husimi support of a state with
    /// `mean_photons` and for completeness over the whole truncated space.
    pub fn default_for(mean_photons: f64, trunc: &Truncation) -> Self {
        let husimi = 3.0 + 2.0 * (mean_photons.max(0.0) + 1.0).sqrt();
        HeterodyneGrid {
            radius: husimi.max(completeness_radius(trunc.n_cut, 1e-5)),
            step: Self::DEFAULT_STEP,
        }
    }
}

/// Smallest radius R (on a 0.25 grid) with P(Poisson(R²) ≤ dim − 1) ≤ `missing`:
/// the weight the top Fock level loses outside the disc.
fn completeness_radius(dim: usize, missing: f64) -> f64 {
    let mut r: f64 = 1.0;
    loop {
        let mu = r * r;
        let mut term = (-mu).exp();
        let mut cdf = term;
        for k in 1..dim {
            term *= mu / k as f64;
            cdf += term;
        }
        if cdf <= missing || r > 50.0 {
            return r;
        }
        r += 0.25;
    }
}

/// Coherent-state POVM |α⟩⟨α|/π on a square grid of spacing `grid_step` inside
/// |α| ≤ `grid_radius`, with Riemann weight `grid_step²` per point.
///
/// The kets are the coherent states compressed onto the truncated space
/// (not renormalized), which is exactly the part of |α⟩⟨α| a truncated state
/// can see.
pub fn heterodyne_povm(grid_radius: f64, grid_step: f64, trunc: &Truncation) -> Result<Povm> {
    trunc.validate()?;
    if !(grid_radius > 0.0 && grid_radius.is_finite()) {
        return Err(Error::domain("grid_radius", grid_radius, "must be positive"));
    }
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(Error::domain("grid_step", grid_step, "must be positive"));
    }
    let m = (grid_radius / grid_step).floor() as i64;
    let mut alphas = Vec::new();
    for i in -m..=m {
        for j in -m..=m {
            let alpha = C64::new(i as f64 * grid_step, j as f64 * grid_step);
            if alpha.norm() <= grid_radius {
                alphas.push(alpha);
            }
        }
    }
    let dim = trunc.n_cut;
    let mut kets = CMatrix::zeros(dim, alphas.len());
    for (col, &alpha) in alphas.iter().enumerate() {
        kets.set_column(col, &coherent_amplitudes(alpha, dim));
    }
    let count = alphas.len();
    let povm = Povm::assemble(
        kets,
        vec![1.0 / PI; count],
        vec![grid_step * grid_step; count],
        OutcomeLabels::Complex(alphas),
    );
    if povm.completeness_defect > HETERODYNE_DEFECT_LIMIT {
        return Err(Error::GridInsufficient {
            defect: povm.completeness_defect,
            limit: HETERODYNE_DEFECT_LIMIT,
        });
    }
    Ok(povm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub probabilities: Vec<f64>,
    /// |Σ p − 1| before any clipping.
    pub normalization_defect: f64,
    /// Total negative mass set to zero.
    pub clipped_mass: f64,
}

/// p_i = w_i Tr(ρ Π_i), with roundoff negatives clipped to zero.
pub fn outcome_distribution(rho: &DensityMatrix, povm: &Povm) -> Result<Distribution> {
    if rho.dim() != povm.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.dim(),
            found: rho.dim(),
        });
    }
    let raw = povm.weighted_expectations(rho.matrix());
    let total: f64 = raw.iter().sum();
    let mut clipped_mass = 0.0;
    let probabilities = raw
        .into_iter()
        .map(|p| {
            if p < 0.0 {
                clipped_mass += -p;
                0.0
            } else {
                p
            }
        })
        .collect();
    Ok(Distribution {
        probabilities,
        normalization_defect: (total - 1.0).abs(),
        clipped_mass,
    })
}

/// ∂p_i = w_i Tr(∂ρ Π_i). The stencil is linear, so this equals the stencil
/// applied to the four perturbed distributions.
pub fn outcome_derivative(drho: &CMatrix, povm: &Povm) -> Result<Vec<f64>> {
    if drho.nrows() != povm.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.dim(),
            found: drho.nrows(),
        });
    }
    Ok(povm.weighted_expectations(drho))
}

/// Measurement whose classical Fisher information is tracked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasurementKind {
    Homodyne { phi: f64 },
    /// `None` picks [`HeterodyneGrid::default_for`] from the final state.
    Heterodyne(Option<HeterodyneGrid>),
}

impl PerturbedFamily {
    pub fn povm_for(&self, kind: &MeasurementKind) -> Result<Povm> {
        match kind {
            MeasurementKind::Homodyne { phi } => homodyne_povm(*phi, &self.trunc),
            MeasurementKind::Heterodyne(grid) => {
                let grid = grid.unwrap_or_else(|| {
                    let last = self.central.states.last().expect("non-empty trajectory");
                    HeterodyneGrid::default_for(last.mean_photon_number(), &self.trunc)
                });
                heterodyne_povm(grid.radius, grid.step, &self.trunc)
            }
        }
    }

    /// Classical Fisher information of `povm` at every sample.
    pub fn cfi_series_with(&self, povm: &Povm, kind: FisherKind) -> Result<FisherSeries> {
        let per_sample = self
            .central
            .states
            .par_iter()
            .zip(self.derivatives.par_iter())
            .map(|(rho, drho)| {
                let dist = outcome_distribution(rho, povm)?;
                let dp = outcome_derivative(drho, povm)?;
                // renormalize away the completeness defect of the grid
                let total: f64 = dist.probabilities.iter().sum();
                let p: Vec<f64> = dist.probabilities.iter().map(|x| x / total).collect();
                let dp: Vec<f64> = dp.iter().map(|x| x / total).collect();
                cfi(&p, &dp)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FisherSeries {
            times: self.central.times.clone(),
            values: per_sample.iter().map(|r| r.fisher).collect(),
            kind,
            fd: self.fd,
            skipped_mass_max: per_sample
                .iter()
                .map(|r| r.skipped_mass)
                .fold(0.0, f64::max),
        })
    }

    pub fn cfi_series(&self, kind: &MeasurementKind) -> Result<FisherSeries> {
        let povm = self.povm_for(kind)?;
        let label = match kind {
            MeasurementKind::Homodyne { phi } => FisherKind::CfiHomodyne { phi: *phi },
            MeasurementKind::Heterodyne(_) => FisherKind::CfiHeterodyne,
        };
        self.cfi_series_with(&povm, label)
    }
}

/// F(τ) of a homodyne or heterodyne measurement along the evolution.
pub fn cfi_series(
    params: &SystemParams,
    grid: &TimeGrid,
    trunc: &Truncation,
    cfg: &FdConfig,
    kind: &MeasurementKind,
) -> Result<FisherSeries> {
    PerturbedFamily::new(params, grid, trunc, cfg)?.cfi_series(kind)
}

/// Uniform scan φ_k = kπ/count, k = 0..count.
pub fn phase_scan(count: usize) -> Vec<f64> {
    (0..count).map(|k| PI * k as f64 / count as f64).collect()
}
