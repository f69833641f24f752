//! Named parameter sets for the figures of the Kerr thermometry study.
//!
//! Each preset records which of its keys were chosen here rather than taken
//! from the figure caption; those are listed as inferred in the sidecar.

use crate::config::Command;

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub command: Command,
    pub text: String,
    pub inferred: &'static [&'static str],
}

fn time_series(
    name: &'static str,
    command: Command,
    params: &str,
    inferred: &'static [&'static str],
) -> Preset {
    Preset {
        name,
        command,
        text: format!(
            "command = \"{}\"\n{params}t_end = 30.0\nn_samples = 301\nn_cut = 30\n",
            command.name()
        ),
        inferred,
    }
}

fn range(lo: f64, step: f64, count: usize) -> String {
    let values: Vec<String> = (0..count)
        .map(|k| format!("{:?}", ((lo + step * k as f64) * 1e9).round() / 1e9))
        .collect();
    format!("[{}]", values.join(", "))
}

pub fn all() -> Vec<Preset> {
    let mut presets = Vec::new();
    for (name, n_th, drive) in [
        ("fig2a", 0.05, 1.0),
        ("fig2b", 0.1, 1.0),
        ("fig2c", 0.05, 0.5),
        ("fig2d", 0.1, 0.5),
    ] {
        presets.push(time_series(
            name,
            Command::Thermalize,
            &format!("delta = -3.5\nchi = 0.5\ndrive = {drive:?}\nn_th = {n_th:?}\n"),
            &["t_end", "n_samples", "n_cut"],
        ));
    }
    for (name, n_th) in [("fig3a", 0.05), ("fig3b", 0.1), ("fig3c", 0.15)] {
        presets.push(time_series(
            name,
            Command::Qfi,
            &format!("delta = -3.5\nchi = [0.0, 0.3, 0.6]\ndrive = 1.0\nn_th = {n_th:?}\n"),
            &["chi", "t_end", "n_samples", "n_cut"],
        ));
    }
    for (name, n_th) in [("fig5a", 0.05), ("fig5b", 0.1), ("fig5c", 0.15)] {
        presets.push(time_series(
            name,
            Command::Qfi,
            &format!("delta = -3.5\nchi = 0.5\ndrive = [0.5, 1.0, 1.5]\nn_th = {n_th:?}\n"),
            &["drive", "t_end", "n_samples", "n_cut"],
        ));
    }
    for (name, n_th) in [("fig8a", 0.05), ("fig8b", 0.1), ("fig8c", 0.15)] {
        presets.push(time_series(
            name,
            Command::Cfi,
            &format!(
                "delta = -3.5\nchi = 0.65\ndrive = 1.0\nn_th = {n_th:?}\nmeasurement = \"both\"\nphi = \"0.9pi\"\n"
            ),
            &["t_end", "n_samples", "n_cut"],
        ));
    }
    presets.push(Preset {
        name: "fig4",
        command: Command::Spectrum,
        text: format!(
            "command = \"spectrum\"\ndelta = -3.5\ndrive = 1.0\nchi = {}\nwindow_lo = 30\nwindow_hi = 50\n",
            range(0.0, 0.05, 21)
        ),
        inferred: &["chi"],
    });
    presets.push(Preset {
        name: "fig6",
        command: Command::Spectrum,
        text: format!(
            "command = \"spectrum\"\ndelta = -3.5\nchi = 1.0\ndrive = {}\nwindow_lo = 30\nwindow_hi = 50\n",
            range(0.0, 0.1, 21)
        ),
        inferred: &["drive"],
    });
    presets.push(Preset {
        name: "fig7a",
        command: Command::PuritySweep,
        text: format!(
            "command = \"purity-sweep\"\ndelta = -3.5\nn_th = 0.05\ndrive = 1.0\nchi = {}\nn_cut = 30\n",
            range(0.0, 0.1, 11)
        ),
        inferred: &["chi", "drive", "n_cut"],
    });
    presets.push(Preset {
        name: "fig7b",
        command: Command::PuritySweep,
        text: format!(
            "command = \"purity-sweep\"\ndelta = -3.5\nn_th = 0.05\nchi = 0.5\ndrive = {}\nn_cut = 30\n",
            range(0.0, 0.125, 9)
        ),
        inferred: &["chi", "drive", "n_cut"],
    });
    presets
}

pub fn find(name: &str) -> Option<Preset> {
    all().into_iter().find(|p| p.name == name)
}

pub fn names() -> Vec<&'static str> {
    all().iter().map(|p| p.name).collect()
}
