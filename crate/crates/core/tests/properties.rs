use std::f64::consts::PI;

use kerr_thermo::dynamics::{default_step, propagate, steady_state, TimeGrid};
use kerr_thermo::estimation::{cfi, fd_derivative, qfi, FdConfig, PerturbedFamily};
use kerr_thermo::fidelity::uhlmann_fidelity;
use kerr_thermo::fock::{gibbs_state, vacuum_state, DensityMatrix, SystemParams, Truncation};
use kerr_thermo::linalg::{self, CMatrix};
use kerr_thermo::measurement::{
    heterodyne_povm, homodyne_povm, outcome_derivative, outcome_distribution, HeterodyneGrid,
};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

fn config(cases: u32) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(0x6b65_7272),
        ..Config::default()
    }
}

fn complex_matrix(n: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec(-1.0f64..1.0, 2 * n * n)
        .prop_map(move |v| CMatrix::from_fn(n, n, |j, k| C64::new(v[2 * (j * n + k)], v[2 * (j * n + k) + 1])))
}

fn density(n: usize) -> impl Strategy<Value = DensityMatrix> {
    complex_matrix(n).prop_map(|g| {
        let m = &g * g.adjoint();
        let tr = linalg::trace(&m);
        DensityMatrix::new(m / tr).unwrap()
    })
}

fn unitary(n: usize) -> impl Strategy<Value = CMatrix> {
    complex_matrix(n).prop_map(|g| g.qr().q())
}

fn conjugate(u: &CMatrix, rho: &DensityMatrix) -> DensityMatrix {
    let mut m = u * rho.matrix() * u.adjoint();
    linalg::symmetrize(&mut m);
    DensityMatrix::new(m).unwrap()
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn fidelity_is_symmetric_and_bounded(rho in density(5), sigma in density(5)) {
        let a = uhlmann_fidelity(&rho, &sigma).unwrap();
        let b = uhlmann_fidelity(&sigma, &rho).unwrap();
        prop_assert!((a - b).abs() <= 1e-10, "{} vs {}", a, b);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((uhlmann_fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fidelity_is_unitarily_invariant(rho in density(5), sigma in density(5), u in unitary(5)) {
        let before = uhlmann_fidelity(&rho, &sigma).unwrap();
        let after = uhlmann_fidelity(&conjugate(&u, &rho), &conjugate(&u, &sigma)).unwrap();
        prop_assert!((before - after).abs() <= 1e-9);
    }

    #[test]
    fn commuting_fidelity_is_classical_overlap(
        p in prop::collection::vec(0.01f64..1.0, 6),
        q in prop::collection::vec(0.01f64..1.0, 6),
    ) {
        let norm = |v: &[f64]| { let s: f64 = v.iter().sum(); v.iter().map(|x| x / s).collect::<Vec<_>>() };
        let (p, q) = (norm(&p), norm(&q));
        let direct: f64 = p.iter().zip(&q).map(|(a, b)| (a * b).sqrt()).sum::<f64>().powi(2);
        let o = uhlmann_fidelity(&DensityMatrix::diagonal(&p).unwrap(), &DensityMatrix::diagonal(&q).unwrap()).unwrap();
        prop_assert!((o - direct).abs() < 1e-12);
    }

    #[test]
    fn stencil_is_exact_on_quartics(
        coeffs in prop::collection::vec(-5.0f64..5.0, 5),
        x in 0.05f64..3.0,
    ) {
        let poly = |t: f64| coeffs.iter().enumerate().map(|(k, c)| c * t.powi(k as i32)).sum::<f64>();
        let exact: f64 = coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c * x.powi(k as i32 - 1)).sum();
        let d: f64 = fd_derivative(|t| Ok(poly(t)), x, &FdConfig::default()).unwrap();
        // scale of the terms the stencil cancels
        let scale: f64 = coeffs.iter().enumerate()
            .map(|(k, c)| c.abs() * (k as f64 * x.powi(k as i32 - 1) + x.powi(k as i32) / x))
            .sum();
        prop_assert!((d - exact).abs() <= 1e-11 * scale, "{} vs {}", d, exact);
    }

    #[test]
    fn sld_identities_hold_for_random_families(a in complex_matrix(5), b in complex_matrix(5), x in -0.5f64..0.5) {
        // ρ(x) = M/Tr M with M = (A + xB)(A + xB)†
        let g = &a + &b * C64::new(x, 0.0);
        let m = &g * g.adjoint();
        let dm = &b * g.adjoint() + &g * b.adjoint();
        let tr = linalg::trace(&m).re;
        let dtr = linalg::trace(&dm).re;
        let rho = DensityMatrix::new(&m / C64::new(tr, 0.0)).unwrap();
        let mut drho = &dm / C64::new(tr, 0.0) - &m * C64::new(dtr / (tr * tr), 0.0);
        linalg::symmetrize(&mut drho);
        let r = qfi(&rho, &drho, None).unwrap();
        let l = r.sld.matrix();
        prop_assert!(r.sld.is_hermitian(1e-9));
        prop_assert!(linalg::trace(&(rho.matrix() * l)).norm() < 1e-8);
        let tr_ld = linalg::trace(&(l * &drho)).re;
        prop_assert!((tr_ld - r.qfi).abs() < 1e-8 * r.qfi.max(1.0));
        let tr_rl2 = linalg::trace(&(rho.matrix() * l * l)).re;
        prop_assert!((tr_rl2 - r.qfi).abs() < 1e-8 * r.qfi.max(1.0));

        // any projective measurement stays below the QFI
        let povm = homodyne_povm(x, &Truncation::new(5).unwrap()).unwrap();
        let p = outcome_distribution(&rho, &povm).unwrap().probabilities;
        let dp = outcome_derivative(&drho, &povm).unwrap();
        prop_assert!(cfi(&p, &dp).unwrap().fisher <= r.qfi * (1.0 + 1e-9));
    }

    #[test]
    fn homodyne_povms_are_complete(phi in 0.0f64..(2.0 * PI), n_cut in 2usize..40) {
        let povm = homodyne_povm(phi, &Truncation::new(n_cut).unwrap()).unwrap();
        prop_assert!(povm.completeness_defect < 1e-12);
        for i in 0..povm.len() {
            let e = povm.element(i);
            prop_assert!(linalg::eigvalsh(e.matrix())[0] >= -1e-10);
        }
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn propagation_keeps_state_invariants(
        delta in -4.0f64..4.0,
        chi in 0.0f64..1.0,
        drive in 0.0f64..1.2,
        n_th in 0.0f64..0.2,
    ) {
        let params = SystemParams::new(delta, chi, drive, n_th).unwrap();
        let trunc = Truncation::new(16).unwrap();
        let grid = TimeGrid::new(0.0, 2.0, 9).unwrap();
        let traj = propagate(&vacuum_state(&trunc).unwrap(), &params, &grid, &trunc).unwrap();
        for s in &traj.states {
            prop_assert!(linalg::hermiticity_defect(s.matrix()) == 0.0);
            prop_assert!((linalg::trace(s.matrix()).re - 1.0).abs() < 1e-6);
            prop_assert!(linalg::eigvalsh(s.matrix())[0] >= -1e-7);
        }

        let halved = grid.with_step(default_step(&params, &trunc) / 2.0).unwrap();
        let fine = propagate(&vacuum_state(&trunc).unwrap(), &params, &halved, &trunc).unwrap();
        for (a, b) in traj.states.iter().zip(&fine.states) {
            prop_assert!(linalg::max_abs_diff(a.matrix(), b.matrix()) <= 1e-8);
        }
    }
}

#[test]
fn heterodyne_completeness_on_default_grids() {
    for n_cut in [10, 20, 30] {
        let trunc = Truncation::new(n_cut).unwrap();
        let grid = HeterodyneGrid::default_for(0.2, &trunc);
        let povm = heterodyne_povm(grid.radius, grid.step, &trunc).unwrap();
        assert!(povm.completeness_defect <= 1e-4, "n_cut {n_cut}: {}", povm.completeness_defect);
    }
}

fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    0.5 * linalg::eigvalsh(&(a - b)).iter().map(|v| v.abs()).sum::<f64>()
}

#[test]
fn steady_state_matches_long_propagation_at_reference_parameters() {
    let trunc = Truncation::new(30).unwrap();
    let grid = TimeGrid::new(0.0, 30.0, 2).unwrap();
    for (chi, drive, n_th) in [(0.5, 1.0, 0.05), (0.65, 1.0, 0.1), (0.5, 0.5, 0.1)] {
        let params = SystemParams::new(-3.5, chi, drive, n_th).unwrap();
        let ss = steady_state(&params, &trunc).unwrap();
        let traj = propagate(&vacuum_state(&trunc).unwrap(), &params, &grid, &trunc).unwrap();
        let d = trace_distance(ss.matrix(), traj.states.last().unwrap().matrix());
        assert!(d <= 1e-6, "chi {chi} drive {drive} n_th {n_th}: {d:e}");
    }
}

#[test]
fn gibbs_spectrum_is_positive_and_nonincreasing() {
    for n in [0.01, 0.3, 2.0] {
        let g = gibbs_state(n, &Truncation::new(25).unwrap()).unwrap();
        let p = g.state.populations();
        assert!(p.iter().all(|&x| x > 0.0));
        assert!(p.windows(2).all(|w| w[1] <= w[0]));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }
}

#[test]
fn stencil_derivatives_of_trajectories_are_hermitian_and_traceless() {
    let params = SystemParams::new(-3.5, 0.5, 1.0, 0.05).unwrap();
    let trunc = Truncation::new(20).unwrap();
    let grid = TimeGrid::new(0.0, 5.0, 11).unwrap();
    let family = PerturbedFamily::new(&params, &grid, &trunc, &FdConfig::default()).unwrap();
    for d in &family.derivatives {
        assert!(linalg::hermiticity_defect(d) <= 1e-10);
        assert!(linalg::trace(d).norm() <= 1e-9);
    }
    let series = family.qfi_series().unwrap();
    assert_eq!(series.values[0], 0.0);
}

#[test]
fn heterodyne_fisher_is_stable_under_grid_refinement() {
    let params = SystemParams::new(-3.5, 0.65, 1.0, 0.05).unwrap();
    let trunc = Truncation::new(30).unwrap();
    let rho = steady_state(&params, &trunc).unwrap();
    let drho: CMatrix = fd_derivative(
        |x| Ok(steady_state(&params.with_n_th(x), &trunc)?.into_matrix()),
        0.05,
        &FdConfig::default(),
    )
    .unwrap();
    let grid = HeterodyneGrid::default_for(rho.mean_photon_number(), &trunc);
    let fisher = |step: f64| {
        let povm = heterodyne_povm(grid.radius, step, &trunc).unwrap();
        let p = outcome_distribution(&rho, &povm).unwrap().probabilities;
        let dp = outcome_derivative(&drho, &povm).unwrap();
        cfi(&p, &dp).unwrap().fisher
    };
    let coarse = fisher(grid.step);
    let fine = fisher(grid.step / 2.0);
    assert!((coarse - fine).abs() / fine <= 1e-3, "{coarse} vs {fine}");
}
