//! Declarative scenario runner for the Kerr thermometry toolkit.
//!
//! A run resolves its configuration from an optional figure preset, an
//! optional config file and `--override` flags, executes the command over the
//! Cartesian product of the sweep lists, and writes one CSV per series plus a
//! JSON run report. `reproduce-figure` additionally writes a sidecar listing
//! the preset parameters and the acceptance checks evaluated on the data.

pub mod config;
pub mod output;
pub mod presets;
pub mod scenario;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use toml::Value;

use config::{parse_document, parse_override, resolve, Command, Document, ScenarioConfig};
use presets::Preset;
use scenario::{execute, figure_checks, Check, Outcome, PointReport};

/// Everything given on the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub command: Command,
    pub config: Option<PathBuf>,
    pub preset: Option<String>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub overrides: Vec<String>,
}

/// Resolved configuration with its provenance.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ScenarioConfig,
    pub preset: Option<Preset>,
    /// Keys set by the config file or overrides rather than the preset.
    pub user_keys: BTreeSet<String>,
}

fn string_key(doc: &Document, key: &str) -> Option<String> {
    match doc.get(key) {
        Some(Value::String(s)) => Some(s.clone()),
        _ => None,
    }
}

pub fn load(inv: &Invocation) -> Result<Loaded> {
    let mut user = Document::default();
    if let Some(path) = &inv.config {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        user.merge(parse_document(&text, &path.display().to_string())?);
    }
    for spec in &inv.overrides {
        user.merge(parse_override(spec)?);
    }
    if let Some(out) = &inv.out {
        let quoted = Value::String(out.display().to_string());
        user.merge(parse_override(&format!("output={quoted}"))?);
    }

    let figure = match (&inv.preset, inv.command) {
        (Some(name), _) => Some(name.clone()),
        (None, Command::ReproduceFigure) => string_key(&user, "figure"),
        (None, _) => None,
    };
    let preset = figure
        .map(|name| {
            presets::find(&name).ok_or_else(|| {
                anyhow!("unknown figure {name:?}; known: {}", presets::names().join(", "))
            })
        })
        .transpose()?;

    if preset.is_none() && inv.config.is_none() {
        if inv.command == Command::ReproduceFigure {
            bail!("reproduce-figure needs --preset <name> or a `figure` key");
        }
        bail!("nothing to run: give --config <path> and/or --preset <name>");
    }

    let mut doc = match &preset {
        Some(p) => parse_document(&p.text, &format!("preset {}", p.name))?,
        None => Document::default(),
    };
    if inv.command != Command::ReproduceFigure {
        // outside reproduce-figure a preset only supplies parameters
        doc.remove("command");
    }
    let user_keys: BTreeSet<String> = user.keys().map(String::from).collect();
    doc.merge(user);

    let command = match (inv.command, &preset) {
        (Command::ReproduceFigure, Some(p)) => {
            doc.merge(parse_override(&format!("figure=\"{}\"", p.name))?);
            p.command
        }
        (Command::ReproduceFigure, None) => unreachable!("checked above"),
        (c, _) => c,
    };
    if let Some(named) = string_key(&doc, "command") {
        if named != command.name() {
            bail!(
                "configuration is for command {named:?}, but {:?} was requested",
                inv.command.name()
            );
        }
    }
    let mut config = resolve(&doc, command)?;
    if inv.command != Command::ReproduceFigure {
        config.figure = None;
    }
    Ok(Loaded {
        config,
        preset,
        user_keys,
    })
}

#[derive(Debug, Serialize)]
struct RunReport<'a> {
    library_version: &'a str,
    command: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    figure: Option<&'a str>,
    config: &'a toml::Table,
    config_sha256: &'a str,
    n_cut_used: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    leakage_max: Option<f64>,
    wall_time_s: f64,
    points: &'a [PointReport],
    warnings: &'a [String],
    files: Vec<String>,
}

/// Files written by a successful run.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub checks: Vec<Check>,
}

fn resolved_value(cfg: &ScenarioConfig, key: &str) -> Option<String> {
    cfg.resolved.values().find_map(|section| match section {
        Value::Table(t) => t.get(key).map(|v| v.to_string()),
        _ => None,
    })
}

fn sidecar(loaded: &Loaded, hash: &str, checks: &[Check]) -> String {
    let cfg = &loaded.config;
    let preset = loaded.preset.as_ref().expect("figure runs have a preset");
    let mut text = String::new();
    let _ = writeln!(text, "figure: {}", preset.name);
    let _ = writeln!(text, "command: {}", cfg.command.name());
    let _ = writeln!(text, "config-sha256: {hash}");
    let _ = writeln!(text, "\nparameters");
    let doc = parse_document(&preset.text, preset.name).expect("presets parse");
    for key in doc.keys().filter(|k| *k != "command") {
        let value = resolved_value(cfg, key).unwrap_or_default();
        let mut notes = Vec::new();
        if preset.inferred.contains(&key) {
            notes.push("inferred");
        }
        if loaded.user_keys.contains(key) {
            notes.push("overridden");
        }
        let notes = if notes.is_empty() {
            String::new()
        } else {
            format!("  [{}]", notes.join(", "))
        };
        let _ = writeln!(text, "  {key} = {value}{notes}");
    }
    let _ = writeln!(text, "\nacceptance checks");
    if checks.is_empty() {
        let _ = writeln!(text, "  none: no acceptance criterion covers this figure's data");
    }
    for c in checks {
        let _ = writeln!(
            text,
            "  [{}] {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.description
        );
    }
    text
}

fn render(loaded: &Loaded, outcome: &Outcome, wall_time_s: f64) -> (Vec<(String, String)>, Vec<Check>) {
    let cfg = &loaded.config;
    let hash = output::sha256_hex(&cfg.canonical_text());
    let mut header = vec![
        format!("kerr-thermo {}", kerr_thermo::VERSION),
        format!("config-sha256: {hash}"),
        format!("command: {}", cfg.command.name()),
    ];
    if let Some(f) = &cfg.figure {
        header.push(format!("figure: {f}"));
    }
    let mut files: Vec<(String, String)> = outcome
        .tables
        .iter()
        .map(|t| (format!("{}.csv", t.name), output::render_csv(t, &header)))
        .collect();

    let mut checks = Vec::new();
    if let Some(figure) = &cfg.figure {
        checks = figure_checks(figure, cfg, outcome);
        files.push((format!("{figure}.txt"), sidecar(loaded, &hash, &checks)));
    }

    let report = RunReport {
        library_version: kerr_thermo::VERSION,
        command: cfg.command.name(),
        figure: cfg.figure.as_deref(),
        config: &cfg.resolved,
        config_sha256: &hash,
        n_cut_used: outcome.points.iter().map(|p| p.n_cut).max().unwrap_or(cfg.trunc.n_cut),
        leakage_max: outcome
            .points
            .iter()
            .filter_map(|p| p.leakage_max)
            .reduce(f64::max),
        wall_time_s,
        points: &outcome.points,
        warnings: &outcome.warnings,
        files: files.iter().map(|(name, _)| name.clone()).collect(),
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    files.push(("report.json".into(), json));
    (files, checks)
}

pub fn run(inv: &Invocation) -> Result<Summary> {
    let start = Instant::now();
    if inv.jobs == Some(0) {
        bail!("--jobs must be at least 1");
    }
    let loaded = load(inv)?;
    output::ensure_writable(&loaded.config.output)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(inv.jobs.unwrap_or(0))
        .build()
        .context("cannot start the worker pool")?;
    let outcome = pool.install(|| execute(&loaded.config))?;
    let (files, checks) = render(&loaded, &outcome, start.elapsed().as_secs_f64());
    let written = output::write_all(&loaded.config.output, &files)?;
    Ok(Summary {
        files: written,
        warnings: outcome.warnings,
        checks,
    })
}
