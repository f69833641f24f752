//! One test per acceptance criterion. Each prints a single
//! `[PASS]`/`[FAIL] criterion N` line before asserting.
//! Run with `cargo test --test acceptance -- --nocapture` to see them.

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use kerr_thermo::dynamics::{default_step, propagate, purity, steady_state, TimeGrid};
use kerr_thermo::estimation::{
    cfi, fd_derivative, qfi, tail_relative_change, FdConfig, FisherSeries, PerturbedFamily,
};
use kerr_thermo::fidelity::{default_search_max, thermalization_trace, uhlmann_fidelity};
use kerr_thermo::fock::{gibbs_state, vacuum_state, DensityMatrix, SystemParams, Truncation};
use kerr_thermo::linalg::{self, CMatrix};
use kerr_thermo::measurement::{
    heterodyne_povm, homodyne_povm, outcome_derivative, outcome_distribution, phase_scan,
    HeterodyneGrid, MeasurementKind,
};
use kerr_thermo::spectral::{spectral_report, DEFAULT_MARGIN};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DELTA: f64 = -3.5;
const N_TH: f64 = 0.05;

fn report(id: &str, ok: bool, detail: String) {
    println!("[{}] criterion {id}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {id}: {detail}");
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn trunc30() -> Truncation {
    Truncation::new(30).unwrap()
}

fn plateau_grid() -> TimeGrid {
    TimeGrid::new(0.0, 30.0, 301).unwrap()
}

fn qfi_plateau(params: &SystemParams, fd: &FdConfig) -> FisherSeries {
    PerturbedFamily::new(params, &plateau_grid(), &trunc30(), fd)
        .unwrap()
        .qfi_series()
        .unwrap()
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

#[test]
fn criterion_1_thermal_fixed_point() {
    let start = Instant::now();
    let params = SystemParams::new(DELTA, 0.0, 0.0, N_TH).unwrap();
    let ss = steady_state(&params, &trunc30()).unwrap();
    let gibbs = gibbs_state(N_TH, &trunc30()).unwrap().state;
    let f = uhlmann_fidelity(&ss, &gibbs).unwrap();
    let elapsed = start.elapsed();
    report(
        "1",
        f >= 1.0 - 1e-8 && within(elapsed, 5.0),
        format!("fidelity to Gibbs {f:.12}, {:.2} s", elapsed.as_secs_f64()),
    );
}

#[test]
fn criterion_2_thermal_qfi() {
    let start = Instant::now();
    let params = SystemParams::new(DELTA, 0.0, 0.0, N_TH).unwrap();
    let exact = 1.0 / (N_TH * (N_TH + 1.0));
    let coarse = qfi_plateau(&params, &FdConfig::default()).last();
    let fine = qfi_plateau(&params, &FdConfig::fine()).last();
    let elapsed = start.elapsed();
    let err_coarse = (coarse - exact).abs() / exact;
    let err_fine = (fine - exact).abs() / exact;
    report(
        "2",
        err_coarse <= 5e-3 && err_fine <= 5e-2 && within(elapsed, 120.0),
        format!(
            "plateau QFI {coarse:.6} (rel_step 1e-3, err {err_coarse:.1e}), {fine:.6} (rel_step 1e-7, err {err_fine:.1e}), exact {exact:.6}, {:.1} s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_3_heterodyne_oracle() {
    let params = SystemParams::new(DELTA, 0.0, 0.0, N_TH).unwrap();
    let trunc = trunc30();
    let fd = FdConfig::default();
    let rho = steady_state(&params, &trunc).unwrap();
    let drho: CMatrix = fd_derivative(
        |x| Ok(steady_state(&params.with_n_th(x), &trunc)?.into_matrix()),
        N_TH,
        &fd,
    )
    .unwrap();
    let grid = HeterodyneGrid::default_for(rho.mean_photon_number(), &trunc);
    let povm = heterodyne_povm(grid.radius, grid.step, &trunc).unwrap();
    let dist = outcome_distribution(&rho, &povm).unwrap();
    let total: f64 = dist.probabilities.iter().sum();
    let p: Vec<f64> = dist.probabilities.iter().map(|x| x / total).collect();
    let dp: Vec<f64> = outcome_derivative(&drho, &povm)
        .unwrap()
        .iter()
        .map(|x| x / total)
        .collect();
    let het = cfi(&p, &dp).unwrap().fisher;
    let quantum = qfi(&rho, &drho, None).unwrap().qfi;
    let exact = 1.0 / (N_TH + 1.0).powi(2);
    let err = (het - exact).abs() / exact;
    report(
        "3",
        err <= 1e-2 && het < quantum,
        format!("heterodyne CFI {het:.6} vs {exact:.6} (err {err:.1e}), QFI {quantum:.4}"),
    );
}

#[test]
fn criterion_4_gap_variance() {
    let start = Instant::now();
    let params = SystemParams::new(DELTA, 0.5, 0.0, 0.0).unwrap();
    let r = spectral_report(&params, 30, 50, DEFAULT_MARGIN).unwrap();
    let elapsed = start.elapsed();
    let err = (r.variance - 38.5).abs();
    report(
        "4",
        err <= 1e-9 && within(elapsed, 1.0),
        format!("variance {:.12} (err {err:.1e}), {:.3} s", r.variance, elapsed.as_secs_f64()),
    );
}

#[test]
fn criterion_5_purity() {
    let start = Instant::now();
    let trunc = trunc30();
    let gibbs = purity(&gibbs_state(N_TH, &trunc).unwrap().state);
    let gibbs_err = (gibbs - 1.0 / 1.1).abs();
    let steady = |chi: f64, drive: f64| {
        purity(&steady_state(&SystemParams::new(DELTA, chi, drive, N_TH).unwrap(), &trunc).unwrap())
    };
    let along_chi: Vec<f64> = [0.2, 0.4, 0.6, 0.8].iter().map(|&c| steady(c, 1.0)).collect();
    let along_drive: Vec<f64> = [0.25, 0.5, 0.75, 1.0].iter().map(|&e| steady(0.5, e)).collect();
    let elapsed = start.elapsed();
    report(
        "5",
        gibbs_err <= 1e-6
            && strictly_decreasing(&along_chi)
            && strictly_decreasing(&along_drive)
            && within(elapsed, 60.0),
        format!(
            "Gibbs purity err {gibbs_err:.1e}; along chi {along_chi:.5?}; along drive {along_drive:.5?}; {:.1} s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_6_qfi_grows_with_kerr() {
    let start = Instant::now();
    let series: Vec<FisherSeries> = [0.0, 0.3, 0.6]
        .iter()
        .map(|&chi| qfi_plateau(&SystemParams::new(DELTA, chi, 1.0, N_TH).unwrap(), &FdConfig::default()))
        .collect();
    let plateaus: Vec<f64> = series.iter().map(FisherSeries::last).collect();
    let t_linear = series[0].time_to_fraction(0.95);
    let t_kerr = series[2].time_to_fraction(0.95);
    let elapsed = start.elapsed();
    report(
        "6",
        strictly_increasing(&plateaus) && t_kerr > t_linear && within(elapsed, 600.0),
        format!(
            "plateau QFI {plateaus:.4?}; 95% time {t_linear} (chi 0) vs {t_kerr} (chi 0.6); {:.1} s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_7_qfi_grows_with_drive() {
    let start = Instant::now();
    let plateaus: Vec<f64> = [0.5, 1.0, 1.5]
        .iter()
        .map(|&e| qfi_plateau(&SystemParams::new(DELTA, 0.5, e, N_TH).unwrap(), &FdConfig::default()).last())
        .collect();
    let elapsed = start.elapsed();
    report(
        "7",
        strictly_increasing(&plateaus) && within(elapsed, 600.0),
        format!("plateau QFI {plateaus:.4?}; {:.1} s", elapsed.as_secs_f64()),
    );
}

struct Ordering {
    n_th: f64,
    qfi: FisherSeries,
    homodyne: Vec<(f64, FisherSeries)>,
    heterodyne: FisherSeries,
}

fn orderings() -> &'static (Vec<Ordering>, Duration) {
    static CELL: OnceLock<(Vec<Ordering>, Duration)> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let runs = [0.05, 0.1]
            .iter()
            .map(|&n_th| {
                let params = SystemParams::new(DELTA, 0.65, 1.0, n_th).unwrap();
                let family =
                    PerturbedFamily::new(&params, &plateau_grid(), &trunc30(), &FdConfig::default())
                        .unwrap();
                let homodyne = phase_scan(12)
                    .into_iter()
                    .map(|phi| (phi, family.cfi_series(&MeasurementKind::Homodyne { phi }).unwrap()))
                    .collect();
                Ordering {
                    n_th,
                    qfi: family.qfi_series().unwrap(),
                    homodyne,
                    heterodyne: family.cfi_series(&MeasurementKind::Heterodyne(None)).unwrap(),
                }
            })
            .collect();
        (runs, start.elapsed())
    })
}

#[test]
fn criterion_8_qfi_bounds_measurements() {
    let (runs, elapsed) = orderings();
    let mut violations = 0;
    let mut details = Vec::new();
    for run in runs {
        let cfis = run.homodyne.iter().map(|(_, s)| s).chain([&run.heterodyne]);
        for series in cfis {
            for (q, c) in run.qfi.values.iter().zip(&series.values) {
                if *c > q * (1.0 + 1e-6) {
                    violations += 1;
                }
            }
        }
        let best_hom = run.homodyne.iter().map(|(_, s)| s.last()).fold(f64::MIN, f64::max);
        let het = run.heterodyne.last();
        if best_hom < het {
            violations += 1;
        }
        details.push(format!(
            "n_th {}: QFI {:.4}, max hom {best_hom:.4}, het {het:.4}",
            run.n_th,
            run.qfi.last()
        ));
    }
    report(
        "8",
        violations == 0 && within(*elapsed, 1200.0),
        format!("{} ordering violations; {}; {:.1} s", violations, details.join("; "), elapsed.as_secs_f64()),
    );
}

#[test]
fn criterion_8_amplitude_quadrature_beats_phase_quadrature() {
    let (runs, _) = orderings();
    let mut ok = true;
    let mut details = Vec::new();
    for run in runs {
        let at = |phi: f64| {
            run.homodyne
                .iter()
                .find(|(p, _)| (p - phi).abs() < 1e-12)
                .expect("phase in scan")
                .1
                .last()
        };
        let (zero, half) = (at(0.0), at(PI / 2.0));
        ok &= zero >= half;
        details.push(format!("n_th {}: hom(0) {zero:.4}, hom(pi/2) {half:.4}", run.n_th));
    }
    report("8 (phase ordering)", ok, details.join("; "));
}

#[test]
fn criterion_9_effective_temperature() {
    let trunc = trunc30();
    let grid = TimeGrid::new(0.0, 30.0, 151).unwrap();
    let converged = |params: &SystemParams| {
        let traj = propagate(&vacuum_state(&trunc).unwrap(), params, &grid, &trunc).unwrap();
        let last = traj.states.last().unwrap();
        let trace = thermalization_trace(&traj, default_search_max(params.n_th, last)).unwrap();
        (tail_relative_change(&trace.n_eff, 0.1), *trace.n_eff.last().unwrap())
    };
    let (drift, driven) = converged(&SystemParams::new(DELTA, 0.5, 1.0, N_TH).unwrap());
    let (control_drift, control) = converged(&SystemParams::new(DELTA, 0.0, 0.0, N_TH).unwrap());
    let rel = (driven - N_TH).abs() / N_TH;
    report(
        "9",
        drift < 1e-3 && rel <= 0.3 && control_drift < 1e-3 && (control - N_TH).abs() <= 1e-3,
        format!(
            "driven n_eff {driven:.5} (off by {:.1}%, tail change {drift:.1e}); control {control:.6} (tail change {control_drift:.1e})",
            100.0 * rel
        ),
    );
}

fn random_density(rng: &mut ChaCha8Rng, n: usize) -> DensityMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let m = &g * g.adjoint();
    let tr = linalg::trace(&m);
    DensityMatrix::new(m / tr).unwrap()
}

#[test]
fn criterion_10_property_suites() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut failures = Vec::new();

    for _ in 0..8 {
        let params = SystemParams::new(
            rng.random_range(-4.0..4.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.2),
            rng.random_range(0.0..0.2),
        )
        .unwrap();
        let trunc = Truncation::new(16).unwrap();
        let grid = TimeGrid::new(0.0, 2.0, 5).unwrap();
        let traj = propagate(&vacuum_state(&trunc).unwrap(), &params, &grid, &trunc).unwrap();
        let halved = grid.with_step(default_step(&params, &trunc) / 2.0).unwrap();
        let fine = propagate(&vacuum_state(&trunc).unwrap(), &params, &halved, &trunc).unwrap();
        for (s, f) in traj.states.iter().zip(&fine.states) {
            let m = s.matrix();
            if linalg::hermiticity_defect(m) > 0.0
                || (linalg::trace(m).re - 1.0).abs() > 1e-6
                || linalg::eigvalsh(m)[0] < -1e-7
                || linalg::max_abs_diff(m, f.matrix()) > 1e-8
            {
                failures.push("dynamics");
            }
        }
    }

    for _ in 0..32 {
        let rho = random_density(&mut rng, 5);
        let sigma = random_density(&mut rng, 5);
        let u = CMatrix::from_fn(5, 5, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .qr()
            .q();
        let rotate = |d: &DensityMatrix| {
            let mut m = &u * d.matrix() * u.adjoint();
            linalg::symmetrize(&mut m);
            DensityMatrix::new(m).unwrap()
        };
        let f = uhlmann_fidelity(&rho, &sigma).unwrap();
        let back = uhlmann_fidelity(&sigma, &rho).unwrap();
        let rotated = uhlmann_fidelity(&rotate(&rho), &rotate(&sigma)).unwrap();
        if (f - back).abs() > 1e-10 || !(0.0..=1.0).contains(&f) || (f - rotated).abs() > 1e-9 {
            failures.push("fidelity");
        }
    }

    for _ in 0..32 {
        let c: Vec<f64> = (0..5).map(|_| rng.random_range(-5.0..5.0)).collect();
        let x: f64 = rng.random_range(0.05..3.0);
        let d: f64 = fd_derivative(
            |t| Ok(c.iter().enumerate().map(|(k, ck)| ck * t.powi(k as i32)).sum::<f64>()),
            x,
            &FdConfig::default(),
        )
        .unwrap();
        let exact: f64 = (1..5).map(|k| k as f64 * c[k] * x.powi(k as i32 - 1)).sum();
        let scale: f64 = (0..5)
            .map(|k| c[k].abs() * (k as f64 * x.powi(k as i32 - 1) + x.powi(k as i32) / x))
            .sum();
        if (d - exact).abs() > 1e-11 * scale {
            failures.push("stencil");
        }
    }

    for _ in 0..8 {
        let trunc = Truncation::new(rng.random_range(5..31)).unwrap();
        if homodyne_povm(rng.random_range(0.0..2.0 * PI), &trunc).unwrap().completeness_defect > 1e-6 {
            failures.push("homodyne completeness");
        }
    }
    for n_cut in [10, 20, 30] {
        let trunc = Truncation::new(n_cut).unwrap();
        let grid = HeterodyneGrid::default_for(0.2, &trunc);
        if heterodyne_povm(grid.radius, grid.step, &trunc).unwrap().completeness_defect > 1e-4 {
            failures.push("heterodyne completeness");
        }
    }

    let elapsed = start.elapsed();
    report(
        "10",
        failures.is_empty() && within(elapsed, 300.0),
        format!("{} property failures {failures:?}; {:.1} s", failures.len(), elapsed.as_secs_f64()),
    );
}
