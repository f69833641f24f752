//! Energy spectrum of the resonator Hamiltonian and the spread of its
//! nearest-neighbour gaps.
//!
//! Level n is the n-th eigenvalue in ascending order.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fock::{hamiltonian, SystemParams, Truncation};

/// Levels kept above the highest window index so the window is free of
/// truncation-edge effects.
pub const DEFAULT_MARGIN: usize = 20;

/// Real eigenvalues of Ĥ, ascending.
pub fn spectrum(params: &SystemParams, trunc: &Truncation) -> Result<Vec<f64>> {
    let h = hamiltonian(params, trunc)?;
    // Ĥ is real symmetric
    let real = DMatrix::from_fn(h.dim(), h.dim(), |j, k| h[(j, k)].re);
    let mut values: Vec<f64> = real.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub eigenvalues: Vec<f64>,
    /// ΔE_n = E_{n+1} − E_n for every n.
    pub gaps: Vec<f64>,
    /// Inclusive gap-index window.
    pub window: (usize, usize),
    /// Sample variance (1/(N−1)) of the gaps inside the window.
    pub variance: f64,
}

impl SpectralReport {
    pub fn window_gaps(&self) -> &[f64] {
        &self.gaps[self.window.0..=self.window.1]
    }
}

pub fn gap_variance(eigenvalues: &[f64], n_lo: usize, n_hi: usize) -> Result<SpectralReport> {
    let gaps: Vec<f64> = eigenvalues.windows(2).map(|w| w[1] - w[0]).collect();
    if n_lo >= n_hi || n_hi >= gaps.len() {
        return Err(Error::Window {
            lo: n_lo,
            hi: n_hi,
            len: gaps.len(),
        });
    }
    let window = &gaps[n_lo..=n_hi];
    let count = window.len() as f64;
    let mean = window.iter().sum::<f64>() / count;
    let variance = window.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (count - 1.0);
    Ok(SpectralReport {
        eigenvalues: eigenvalues.to_vec(),
        gaps,
        window: (n_lo, n_hi),
        variance,
    })
}

/// Truncation that leaves `margin` levels above gap index `n_hi`.
pub fn truncation_for_window(n_hi: usize, margin: usize) -> Result<Truncation> {
    Truncation::new(n_hi + 2 + margin)
}

/// Spectrum and gap variance for the window, with the truncation chosen by
/// [`truncation_for_window`].
pub fn spectral_report(
    params: &SystemParams,
    n_lo: usize,
    n_hi: usize,
    margin: usize,
) -> Result<SpectralReport> {
    let trunc = truncation_for_window(n_hi, margin)?;
    gap_variance(&spectrum(params, &trunc)?, n_lo, n_hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_spectrum() {
        let params = SystemParams::new(1.5, 0.0, 0.0, 0.0).unwrap();
        let e = spectrum(&params, &Truncation::new(12).unwrap()).unwrap();
        for (n, v) in e.iter().enumerate() {
            assert!((v - 1.5 * n as f64).abs() < 1e-12);
        }
        let r = gap_variance(&e, 2, 9).unwrap();
        assert!(r.window_gaps().iter().all(|g| (g - 1.5).abs() < 1e-12));
        assert!(r.variance < 1e-24);
    }

    #[test]
    fn undriven_kerr_spectrum_is_closed_form() {
        let params = SystemParams::new(2.0, 0.5, 0.0, 0.0).unwrap();
        let e = spectrum(&params, &Truncation::new(15).unwrap()).unwrap();
        for (n, v) in e.iter().enumerate() {
            let n = n as f64;
            assert!((v - (2.0 * n + 0.5 * n * (n - 1.0))).abs() < 1e-10);
        }
    }

    #[test]
    fn window_gap_variance_closed_form() {
        let params = SystemParams::new(-3.5, 0.5, 0.0, 0.0).unwrap();
        let r = spectral_report(&params, 30, 50, DEFAULT_MARGIN).unwrap();
        // brute force over the arithmetic progression δ + 2χn, n = 30..=50
        let gaps: Vec<f64> = (30..=50).map(|n| -3.5 + 2.0 * 0.5 * n as f64).collect();
        let mean = gaps.iter().sum::<f64>() / 21.0;
        let brute = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / 20.0;
        assert!((brute - 38.5).abs() < 1e-12);
        for (g, expected) in r.window_gaps().iter().zip(&gaps) {
            assert!((g - expected).abs() < 1e-10);
        }
        assert!((r.variance - 38.5).abs() < 1e-9);
    }

    #[test]
    fn window_validation() {
        let e = vec![0.0, 1.0, 3.0, 6.0];
        assert!(gap_variance(&e, 1, 1).is_err());
        assert!(gap_variance(&e, 0, 3).is_err());
        assert!(gap_variance(&e, 0, 2).is_ok());
    }

    #[test]
    fn variance_is_shift_invariant_and_scales_quadratically() {
        let e = vec![0.0, 0.7, 1.9, 3.0, 4.6, 6.1];
        let base = gap_variance(&e, 0, 4).unwrap().variance;
        let shifted: Vec<f64> = e.iter().map(|x| x + 13.0).collect();
        assert!((gap_variance(&shifted, 0, 4).unwrap().variance - base).abs() < 1e-12);
        let scaled: Vec<f64> = e.iter().map(|x| x * -2.5).collect();
        let mut scaled_sorted = scaled.clone();
        scaled_sorted.sort_by(f64::total_cmp);
        assert!((gap_variance(&scaled_sorted, 0, 4).unwrap().variance - 6.25 * base).abs() < 1e-12);
    }

    #[test]
    fn driven_window_is_truncation_converged() {
        let params = SystemParams::new(-3.5, 1.0, 1.0, 0.0).unwrap();
        let base = truncation_for_window(50, DEFAULT_MARGIN).unwrap();
        let e1 = spectrum(&params, &base).unwrap();
        let e2 = spectrum(&params, &Truncation::new(base.n_cut + 20).unwrap()).unwrap();
        for n in 30..=51 {
            assert!((e1[n] - e2[n]).abs() < 1e-8, "level {n}");
        }
    }
}
