//! Execution of a resolved scenario over its sweep points, and the figure
//! checks evaluated on the results.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use anyhow::{bail, Context, Result};
use kerr_thermo::dynamics::{
    propagate, propagate_adaptive, purity, steady_state, steady_state_adaptive, Trajectory,
};
use kerr_thermo::estimation::{cr_bound, tail_relative_change, FisherKind, PerturbedFamily};
use kerr_thermo::fidelity::{default_search_max, effective_temperature, thermalization_trace};
use kerr_thermo::fock::{vacuum_state, DensityMatrix, SystemParams, Truncation};
use kerr_thermo::measurement::{heterodyne_povm, MeasurementKind, COMPLETENESS_TOL};
use kerr_thermo::spectral::{spectral_report, truncation_for_window};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Command, ScenarioConfig, SweepPoint};

/// One CSV worth of results.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem.
    pub name: String,
    /// Sweep point the series belongs to, for per-point tables.
    pub point: Option<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointReport {
    pub index: usize,
    pub params: BTreeMap<&'static str, f64>,
    pub n_cut: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leakage_max: Option<f64>,
    /// Cramér–Rao bound 1/(μF) at the final sample.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cr_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub points: Vec<PointReport>,
    /// In order of first occurrence, without repeats.
    pub warnings: Vec<String>,
}

enum Data {
    Series(Vec<String>, Vec<Vec<f64>>),
    Row(Vec<String>, Vec<f64>),
}

struct PointResult {
    data: Data,
    report: PointReport,
    warnings: Vec<String>,
}

/// φ in units of π, e.g. "0.9pi".
fn phase_label(phi: f64) -> String {
    let turns = (phi / PI * 1e9).round() / 1e9;
    format!("{turns}pi")
}

/// Column name of a homodyne series.
pub fn homodyne_column(phi: f64) -> String {
    format!("cfi_hom_phi{}", phase_label(phi))
}

fn table_stem(cfg: &ScenarioConfig, point: &SweepPoint) -> String {
    let mut stem = cfg.command.name().to_string();
    for (key, value) in &point.swept {
        stem.push_str(&format!("_{key}{value}"));
    }
    stem
}

pub fn execute(cfg: &ScenarioConfig) -> Result<Outcome> {
    if cfg.command == Command::ReproduceFigure {
        bail!("reproduce-figure must be resolved to a preset's command before running");
    }
    let points = cfg.sweep.points()?;
    let results: Vec<PointResult> = points
        .par_iter()
        .map(|p| run_point(cfg, p).with_context(|| p.label()))
        .collect::<Result<_>>()?;

    let mut tables = Vec::new();
    let mut summary: Option<Table> = None;
    for (point, result) in points.iter().zip(&results) {
        match &result.data {
            Data::Series(columns, rows) => tables.push(Table {
                name: table_stem(cfg, point),
                point: Some(point.label()),
                columns: columns.clone(),
                rows: rows.clone(),
            }),
            Data::Row(columns, values) => {
                let table = summary.get_or_insert_with(|| Table {
                    name: cfg.command.name().to_string(),
                    point: None,
                    columns: point
                        .swept
                        .iter()
                        .map(|(k, _)| k.to_string())
                        .chain(columns.iter().cloned())
                        .collect(),
                    rows: Vec::new(),
                });
                table
                    .rows
                    .push(point.swept.iter().map(|(_, v)| *v).chain(values.iter().copied()).collect());
            }
        }
    }
    tables.extend(summary);

    let mut warnings: Vec<String> = Vec::new();
    for w in results.iter().flat_map(|r| r.warnings.iter()) {
        if !warnings.contains(w) {
            warnings.push(w.clone());
        }
    }
    Ok(Outcome {
        tables,
        points: results.into_iter().map(|r| r.report).collect(),
        warnings,
    })
}

fn param_map(p: &SystemParams) -> BTreeMap<&'static str, f64> {
    BTreeMap::from([
        ("delta", p.delta),
        ("chi", p.chi),
        ("drive", p.drive),
        ("gamma", p.gamma),
        ("n_th", p.n_th),
    ])
}

fn trajectory(cfg: &ScenarioConfig, params: &SystemParams) -> Result<(Trajectory, Truncation)> {
    if cfg.adaptive {
        Ok(propagate_adaptive(params, &cfg.grid, &cfg.trunc)?)
    } else {
        Ok((propagate(&vacuum_state(&cfg.trunc)?, params, &cfg.grid, &cfg.trunc)?, cfg.trunc))
    }
}

fn family(cfg: &ScenarioConfig, params: &SystemParams) -> Result<PerturbedFamily> {
    if cfg.adaptive {
        Ok(PerturbedFamily::new_adaptive(params, &cfg.grid, &cfg.trunc, &cfg.fd)?)
    } else {
        Ok(PerturbedFamily::new(params, &cfg.grid, &cfg.trunc, &cfg.fd)?)
    }
}

fn steady(cfg: &ScenarioConfig, params: &SystemParams) -> Result<(DensityMatrix, Truncation)> {
    if cfg.adaptive {
        Ok(steady_state_adaptive(params, &cfg.trunc)?)
    } else {
        Ok((steady_state(params, &cfg.trunc)?, cfg.trunc))
    }
}

fn run_point(cfg: &ScenarioConfig, point: &SweepPoint) -> Result<PointResult> {
    let params = &point.params;
    let label = point.label();
    let mut warnings = Vec::new();
    let mut report = PointReport {
        index: point.index,
        params: param_map(params),
        n_cut: cfg.trunc.n_cut,
        leakage_max: None,
        cr_bound: None,
    };
    let columns = |names: &[&str]| names.iter().map(|s| s.to_string()).collect::<Vec<_>>();

    let data = match cfg.command {
        Command::Thermalize => {
            let (traj, trunc) = trajectory(cfg, params)?;
            let last = traj.states.last().expect("trajectory has samples");
            let trace = thermalization_trace(&traj, default_search_max(params.n_th, last))?;
            if !trace.boundary_hits.is_empty() {
                warnings.push(format!(
                    "{label}: effective-temperature search ended on its upper bound at {} samples",
                    trace.boundary_hits.len()
                ));
            }
            report.n_cut = trunc.n_cut;
            report.leakage_max = Some(traj.leakage_max);
            let rows = (0..trace.len())
                .map(|i| vec![trace.times[i], trace.n_eff[i], trace.fidelity_at_opt[i]])
                .collect();
            Data::Series(columns(&["gamma_t", "n_eff", "fidelity_at_opt"]), rows)
        }
        Command::Qfi | Command::Cfi => {
            let family = family(cfg, params)?;
            report.n_cut = family.trunc.n_cut;
            report.leakage_max = Some(family.leakage_max);
            let qfi = family.qfi_series()?;
            report.cr_bound = cr_bound(qfi.last(), cfg.repetitions).ok();
            let mut names = columns(&["gamma_t", "qfi"]);
            let mut series = vec![qfi.times.clone(), qfi.values.clone()];
            if cfg.command == Command::Cfi {
                for &phi in &cfg.measurement.homodyne {
                    let s = family.cfi_series(&MeasurementKind::Homodyne { phi })?;
                    if s.skipped_mass_max > 0.0 {
                        warnings.push(format!(
                            "{label}: homodyne phi={} dropped probability mass up to {:.3e} below the outcome floor",
                            phase_label(phi),
                            s.skipped_mass_max
                        ));
                    }
                    names.push(homodyne_column(phi));
                    series.push(s.values);
                }
                if cfg.measurement.heterodyne {
                    let last = family.central.states.last().expect("trajectory has samples");
                    let grid = cfg.measurement.grid_for(last.mean_photon_number(), &family.trunc);
                    let povm = heterodyne_povm(grid.radius, grid.step, &family.trunc)?;
                    if povm.completeness_defect > COMPLETENESS_TOL {
                        warnings.push(format!(
                            "{label}: heterodyne grid (radius {:.3}, step {}) has completeness defect {:.3e}",
                            grid.radius, grid.step, povm.completeness_defect
                        ));
                    }
                    let s = family.cfi_series_with(&povm, FisherKind::CfiHeterodyne)?;
                    if s.skipped_mass_max > 0.0 {
                        warnings.push(format!(
                            "{label}: heterodyne dropped probability mass up to {:.3e} below the outcome floor",
                            s.skipped_mass_max
                        ));
                    }
                    names.push("cfi_het".into());
                    series.push(s.values);
                }
            }
            let rows = (0..qfi.times.len())
                .map(|i| series.iter().map(|s| s[i]).collect())
                .collect();
            Data::Series(names, rows)
        }
        Command::Spectrum => {
            let r = spectral_report(params, cfg.window.0, cfg.window.1, cfg.margin)?;
            report.n_cut = truncation_for_window(cfg.window.1, cfg.margin)?.n_cut;
            Data::Row(columns(&["var_gap"]), vec![r.variance])
        }
        Command::PuritySweep => {
            let (rho, trunc) = steady(cfg, params)?;
            report.n_cut = trunc.n_cut;
            report.leakage_max = Some(rho.leakage());
            Data::Row(columns(&["purity"]), vec![purity(&rho)])
        }
        Command::SteadyState => {
            let (rho, trunc) = steady(cfg, params)?;
            report.n_cut = trunc.n_cut;
            report.leakage_max = Some(rho.leakage());
            let eff = effective_temperature(&rho, default_search_max(params.n_th, &rho))?;
            if eff.at_boundary {
                warnings.push(format!(
                    "{label}: effective-temperature search ended on its upper bound"
                ));
            }
            Data::Row(
                columns(&["mean_photons", "purity", "n_eff", "fidelity_at_opt"]),
                vec![rho.mean_photon_number(), purity(&rho), eff.n_eff, eff.fidelity],
            )
        }
        Command::ReproduceFigure => unreachable!("rejected in execute"),
    };
    Ok(PointResult {
        data,
        report,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub description: String,
    pub passed: bool,
}

fn check(description: String, passed: bool) -> Check {
    Check {
        description,
        passed,
    }
}

fn plateaus(outcome: &Outcome) -> Vec<f64> {
    outcome
        .tables
        .iter()
        .filter_map(|t| t.column("qfi").and_then(|v| v.last().copied()))
        .collect()
}

fn time_to_fraction(table: &Table, fraction: f64) -> f64 {
    let (Some(t), Some(v)) = (table.column("gamma_t"), table.column("qfi")) else {
        return f64::NAN;
    };
    let target = fraction * v.last().copied().unwrap_or(f64::NAN);
    v.iter()
        .position(|&x| x >= target)
        .map_or(f64::INFINITY, |i| t[i])
}

fn strictly(values: &[f64], increasing: bool) -> bool {
    values
        .windows(2)
        .all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
}

/// Acceptance checks that apply to the data of `figure`. Empty when none do.
pub fn figure_checks(figure: &str, cfg: &ScenarioConfig, outcome: &Outcome) -> Vec<Check> {
    let family = figure.trim_end_matches(|c: char| c.is_ascii_lowercase());
    match family {
        "fig2" => {
            let n_th = cfg.sweep.n_th[0];
            let Some(n_eff) = outcome.tables.first().and_then(|t| t.column("n_eff")) else {
                return Vec::new();
            };
            let drift = tail_relative_change(&n_eff, 0.1);
            let last = *n_eff.last().expect("non-empty series");
            let off = (last - n_th).abs() / n_th;
            vec![
                check(
                    format!("n_eff converged: relative change {drift:.3e} over the final 10% < 1e-3"),
                    drift < 1e-3,
                ),
                check(
                    format!("converged n_eff {last:.6} within 30% of n_th = {n_th} (off by {:.1}%)", 100.0 * off),
                    off <= 0.3,
                ),
            ]
        }
        "fig3" | "fig5" => {
            let axis = if family == "fig3" { "chi" } else { "drive" };
            let values = plateaus(outcome);
            let mut checks = vec![check(
                format!("plateau QFI strictly increasing in {axis}: {values:.4?}"),
                values.len() > 1 && strictly(&values, true),
            )];
            if family == "fig3" {
                if let (Some(first), Some(last)) = (outcome.tables.first(), outcome.tables.last()) {
                    let (t0, t1) = (time_to_fraction(first, 0.95), time_to_fraction(last, 0.95));
                    checks.push(check(
                        format!("largest chi reaches 95% of its plateau later than the smallest ({t1} > {t0})"),
                        t1 > t0,
                    ));
                }
            }
            checks
        }
        "fig7" => {
            let axis = cfg.sweep.swept_keys().first().copied().unwrap_or("sweep");
            let Some(values) = outcome.tables.first().and_then(|t| t.column("purity")) else {
                return Vec::new();
            };
            vec![check(
                format!("steady-state purity strictly decreasing in {axis}: {values:.5?}"),
                strictly(&values, false),
            )]
        }
        "fig8" => outcome
            .tables
            .iter()
            .flat_map(|t| {
                let qfi = t.column("qfi").unwrap_or_default();
                let measured: Vec<&String> =
                    t.columns.iter().filter(|c| c.starts_with("cfi_")).collect();
                let bounded = measured.iter().all(|c| {
                    t.column(c)
                        .unwrap_or_default()
                        .iter()
                        .zip(&qfi)
                        .all(|(f, q)| *f <= q * (1.0 + 1e-6))
                });
                let mut checks = vec![check(
                    "QFI bounds every measured CFI at every sample (slack 1e-6 relative)".into(),
                    bounded,
                )];
                let het = t.column("cfi_het").and_then(|v| v.last().copied());
                let hom = measured
                    .iter()
                    .filter(|c| c.starts_with("cfi_hom"))
                    .filter_map(|c| t.column(c).and_then(|v| v.last().copied()))
                    .fold(f64::NEG_INFINITY, f64::max);
                if let Some(het) = het {
                    if hom.is_finite() {
                        checks.push(check(
                            format!("best homodyne CFI {hom:.4} >= heterodyne CFI {het:.4} at plateau"),
                            hom >= het,
                        ));
                    }
                }
                checks
            })
            .collect(),
        _ => Vec::new(),
    }
}
