//! Scenario configuration.
//!
//! A configuration is a TOML document whose keys may sit at the top level or
//! under their section header (`[params]`, `[grid]`, ...). Documents from a
//! preset, a file and `--override` flags are merged key by key, later sources
//! winning, and then resolved into a [`ScenarioConfig`] with defaults applied.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use kerr_thermo::dynamics::TimeGrid;
use kerr_thermo::estimation::FdConfig;
use kerr_thermo::fock::{SystemParams, Truncation};
use kerr_thermo::measurement::{phase_scan, HeterodyneGrid};
use kerr_thermo::spectral::DEFAULT_MARGIN;
use toml::{Table, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Thermalize,
    Qfi,
    Cfi,
    Spectrum,
    PuritySweep,
    SteadyState,
    ReproduceFigure,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Thermalize => "thermalize",
            Command::Qfi => "qfi",
            Command::Cfi => "cfi",
            Command::Spectrum => "spectrum",
            Command::PuritySweep => "purity-sweep",
            Command::SteadyState => "steady-state",
            Command::ReproduceFigure => "reproduce-figure",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        [
            Command::Thermalize,
            Command::Qfi,
            Command::Cfi,
            Command::Spectrum,
            Command::PuritySweep,
            Command::SteadyState,
            Command::ReproduceFigure,
        ]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| anyhow!("field `command`: unknown command {s:?}"))
    }

    /// Whether the command produces one time series per sweep point.
    pub fn is_time_series(self) -> bool {
        matches!(self, Command::Thermalize | Command::Qfi | Command::Cfi)
    }
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("params", &["delta", "chi", "drive", "n_th", "gamma"]),
    ("grid", &["t_start", "t_end", "n_samples", "integrator_step"]),
    ("trunc", &["n_cut", "leakage_tol"]),
    ("fd", &["rel_step", "abs_floor"]),
    ("measurement", &["measurement", "phi", "het_radius", "het_step"]),
    ("spectrum", &["window_lo", "window_hi", "margin"]),
    ("run", &["command", "figure", "repetitions", "seed", "output"]),
];

fn section_of(key: &str) -> Option<&'static str> {
    SCHEMA
        .iter()
        .find(|(_, keys)| keys.contains(&key))
        .map(|(section, _)| *section)
}

/// Flat key → value map of one or more merged sources.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document(BTreeMap<String, Value>);

impl Document {
    pub fn get(&self, key: &str) -> Option<&Value> {
        self.0.get(key)
    }

    /// Keys of `other` replace those of `self`.
    pub fn merge(&mut self, other: Document) {
        self.0.extend(other.0);
    }

    pub fn remove(&mut self, key: &str) -> Option<Value> {
        self.0.remove(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    fn insert(&mut self, key: String, value: Value, origin: &str, text: &str) -> Result<()> {
        if section_of(&key).is_none() {
            bail!("{origin}{}: unknown key `{key}`", at_line(text, &key));
        }
        if self.0.insert(key.clone(), value).is_some() {
            bail!("{origin}{}: key `{key}` given twice", at_line(text, &key));
        }
        Ok(())
    }
}

/// ", line N" for the first line that assigns `key`, if any.
fn at_line(text: &str, key: &str) -> String {
    text.lines()
        .position(|line| {
            line.trim_start()
                .strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| format!(", line {}", i + 1))
        .unwrap_or_default()
}

fn section_line(text: &str, name: &str) -> String {
    let header = format!("[{name}]");
    text.lines()
        .position(|line| line.trim() == header)
        .map(|i| format!(", line {}", i + 1))
        .unwrap_or_default()
}

/// Parse one configuration source. `origin` prefixes every error message.
pub fn parse_document(text: &str, origin: &str) -> Result<Document> {
    let table: Table = text.parse().map_err(|e| anyhow!("{origin}: {e}"))?;
    let mut doc = Document::default();
    for (name, value) in table {
        match value {
            Value::Table(inner) => {
                if !SCHEMA.iter().any(|(s, _)| *s == name) {
                    bail!("{origin}{}: unknown section [{name}]", section_line(text, &name));
                }
                for (key, v) in inner {
                    if section_of(&key).is_some_and(|s| s != name) {
                        bail!(
                            "{origin}{}: key `{key}` belongs in [{}], not [{name}]",
                            at_line(text, &key),
                            section_of(&key).unwrap_or_default()
                        );
                    }
                    doc.insert(key, v, origin, text)?;
                }
            }
            v => doc.insert(name, v, origin, text)?,
        }
    }
    Ok(doc)
}

/// `key=value` or `section.key=value`. Values that are not valid TOML are
/// taken as bare strings, so `n_cut=auto` works without quotes.
pub fn parse_override(spec: &str) -> Result<Document> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("override {spec:?}: expected key=value"))?;
    let key = key.trim();
    let key = match key.split_once('.') {
        Some((section, inner)) => {
            if section_of(inner) != Some(section) {
                bail!("override {spec:?}: unknown key `{key}`");
            }
            inner
        }
        None => key,
    };
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let mut doc = Document::default();
    doc.insert(key.to_string(), value, &format!("override {spec:?}"), "")?;
    Ok(doc)
}

struct Reader<'a>(&'a Document);

fn number(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        other => bail!("field `{key}`: expected a number, found {other}"),
    }
}

/// Accepts plain radians and multiples of π written as "0.9pi" or "pi".
fn angle(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::String(s) => {
            let s = s.trim();
            let factor = match s.strip_suffix("pi") {
                Some("") => 1.0,
                Some(head) => head
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| anyhow!("field `{key}`: cannot read {s:?} as an angle"))?,
                None => {
                    return s
                        .parse::<f64>()
                        .map_err(|_| anyhow!("field `{key}`: cannot read {s:?} as an angle"))
                }
            };
            Ok(factor * PI)
        }
        other => number(key, other),
    }
}

impl Reader<'_> {
    fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.0.get(key).map(|v| number(key, v)).transpose()
    }

    fn list<T>(&self, key: &str, item: impl Fn(&str, &Value) -> Result<T>) -> Result<Option<Vec<T>>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => {
                if items.is_empty() {
                    bail!("field `{key}`: list must not be empty");
                }
                items.iter().map(|v| item(key, v)).collect::<Result<_>>().map(Some)
            }
            Some(v) => Ok(Some(vec![item(key, v)?])),
        }
    }

    fn count(&self, key: &str) -> Result<Option<u64>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(other) => bail!("field `{key}`: expected a non-negative integer, found {other}"),
        }
    }

    fn string(&self, key: &str) -> Result<Option<String>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(other) => bail!("field `{key}`: expected a string, found {other}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub delta: Vec<f64>,
    pub chi: Vec<f64>,
    pub drive: Vec<f64>,
    pub n_th: Vec<f64>,
    pub gamma: f64,
}

/// One element of the Cartesian product of the sweep lists.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub params: SystemParams,
    /// Values of the swept keys only.
    pub swept: Vec<(&'static str, f64)>,
}

impl SweepPoint {
    pub fn label(&self) -> String {
        if self.swept.is_empty() {
            format!("sweep point {}", self.index)
        } else {
            let parts: Vec<String> = self.swept.iter().map(|(k, v)| format!("{k}={v}")).collect();
            format!("sweep point {} ({})", self.index, parts.join(", "))
        }
    }
}

impl Sweep {
    fn lists(&self) -> [(&'static str, &[f64]); 4] {
        [
            ("delta", &self.delta),
            ("chi", &self.chi),
            ("drive", &self.drive),
            ("n_th", &self.n_th),
        ]
    }

    /// Keys with more than one value, in parameter order.
    pub fn swept_keys(&self) -> Vec<&'static str> {
        self.lists()
            .iter()
            .filter(|(_, v)| v.len() > 1)
            .map(|(k, _)| *k)
            .collect()
    }

    /// Row-major product: the last parameter varies fastest.
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        let mut points = Vec::new();
        for &delta in &self.delta {
            for &chi in &self.chi {
                for &drive in &self.drive {
                    for &n_th in &self.n_th {
                        let index = points.len();
                        let params = SystemParams {
                            delta,
                            chi,
                            drive,
                            gamma: self.gamma,
                            n_th,
                        };
                        let values = [("delta", delta), ("chi", chi), ("drive", drive), ("n_th", n_th)];
                        let swept = self
                            .swept_keys()
                            .iter()
                            .map(|k| *values.iter().find(|(name, _)| name == k).expect("known key"))
                            .collect();
                        let point = SweepPoint { index, params, swept };
                        params.validate().with_context(|| point.label())?;
                        points.push(point);
                    }
                }
            }
        }
        Ok(points)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSpec {
    pub homodyne: Vec<f64>,
    pub heterodyne: bool,
    pub het_radius: Option<f64>,
    pub het_step: Option<f64>,
}

impl MeasurementSpec {
    /// Explicit grid when both settings are given; the radius otherwise
    /// follows the state.
    pub fn grid_for(&self, mean_photons: f64, trunc: &Truncation) -> HeterodyneGrid {
        let auto = HeterodyneGrid::default_for(mean_photons, trunc);
        HeterodyneGrid {
            radius: self.het_radius.unwrap_or(auto.radius),
            step: self.het_step.unwrap_or(auto.step),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub command: Command,
    pub figure: Option<String>,
    pub sweep: Sweep,
    pub grid: TimeGrid,
    pub trunc: Truncation,
    /// `n_cut = "auto"`: grow the truncation on leakage failures.
    pub adaptive: bool,
    pub fd: FdConfig,
    pub measurement: MeasurementSpec,
    pub window: (usize, usize),
    pub margin: usize,
    pub repetitions: u64,
    pub seed: u64,
    pub output: PathBuf,
    /// Every field with defaults filled in, sectioned as in the input format.
    pub resolved: Table,
}

/// Parse and resolve a single self-contained document, which must name its
/// `command`.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let doc = parse_document(text, "config")?;
    let command = Reader(&doc)
        .string("command")?
        .ok_or_else(|| anyhow!("field `command` is required"))?;
    resolve(&doc, Command::parse(&command)?)
}

/// Apply defaults to `doc` and validate it for `command`.
pub fn resolve(doc: &Document, command: Command) -> Result<ScenarioConfig> {
    let r = Reader(doc);
    if let Some(named) = r.string("command")? {
        Command::parse(&named)?;
    }
    let figure = r.string("figure")?;

    let required = |key: &str| -> Result<Vec<f64>> {
        r.list(key, number)?
            .ok_or_else(|| anyhow!("field `{key}` is required"))
    };
    let n_th = match (command, r.list("n_th", number)?) {
        (_, Some(v)) => v,
        // the spectrum does not depend on the reservoir
        (Command::Spectrum, None) => vec![0.0],
        (_, None) => bail!("field `n_th` is required"),
    };
    let sweep = Sweep {
        delta: required("delta")?,
        chi: required("chi")?,
        drive: required("drive")?,
        n_th,
        gamma: r.f64("gamma")?.unwrap_or(1.0),
    };
    sweep.points()?;

    let mut grid = TimeGrid::new(
        r.f64("t_start")?.unwrap_or(0.0),
        r.f64("t_end")?.unwrap_or(30.0),
        r.count("n_samples")?.unwrap_or(301) as usize,
    )?;
    if let Some(step) = r.f64("integrator_step")? {
        grid = grid.with_step(step)?;
    }

    let leakage_tol = r.f64("leakage_tol")?.unwrap_or(Truncation::DEFAULT_LEAKAGE_TOL);
    let (n_cut, adaptive) = match doc.get("n_cut") {
        None => (Truncation::DEFAULT_N_CUT, false),
        Some(Value::String(s)) if s == "auto" => (Truncation::DEFAULT_N_CUT, true),
        Some(Value::Integer(i)) if *i >= 0 => (*i as usize, false),
        Some(other) => bail!("field `n_cut`: expected an integer or \"auto\", found {other}"),
    };
    let trunc = Truncation::with_leakage(n_cut, leakage_tol)?;

    let fd = FdConfig::new(
        r.f64("rel_step")?.unwrap_or(FdConfig::DEFAULT_REL_STEP),
        r.f64("abs_floor")?.unwrap_or(FdConfig::DEFAULT_ABS_FLOOR),
    )?;

    let kind = r.string("measurement")?.unwrap_or_else(|| "both".into());
    let (homodyne_on, heterodyne) = match kind.as_str() {
        "homodyne" => (true, false),
        "heterodyne" => (false, true),
        "both" => (true, true),
        other => bail!("field `measurement`: expected homodyne, heterodyne or both, found {other:?}"),
    };
    let phi = r.list("phi", angle)?.unwrap_or_else(|| phase_scan(12));
    let measurement = MeasurementSpec {
        homodyne: if homodyne_on { phi.clone() } else { Vec::new() },
        heterodyne,
        het_radius: r.f64("het_radius")?,
        het_step: r.f64("het_step")?,
    };
    for (key, value) in [("het_radius", measurement.het_radius), ("het_step", measurement.het_step)] {
        if let Some(v) = value {
            if !(v > 0.0 && v.is_finite()) {
                bail!("field `{key}`: must be positive, found {v}");
            }
        }
    }

    let window = (
        r.count("window_lo")?.unwrap_or(30) as usize,
        r.count("window_hi")?.unwrap_or(50) as usize,
    );
    if window.0 >= window.1 {
        bail!("fields `window_lo`/`window_hi`: need window_lo < window_hi, found {}..{}", window.0, window.1);
    }
    let margin = r.count("margin")?.unwrap_or(DEFAULT_MARGIN as u64) as usize;
    let repetitions = r.count("repetitions")?.unwrap_or(1);
    if repetitions == 0 {
        bail!("field `repetitions`: must be at least 1");
    }
    let seed = r.count("seed")?.unwrap_or(0);
    let output = PathBuf::from(r.string("output")?.unwrap_or_else(|| "out".into()));

    let floats = |v: &[f64]| Value::Array(v.iter().map(|x| Value::Float(*x)).collect());
    let mut sections: BTreeMap<&str, Table> = BTreeMap::new();
    let mut put = |key: &str, value: Value| {
        let section = section_of(key).expect("schema key");
        sections.entry(section).or_default().insert(key.into(), value);
    };
    put("delta", floats(&sweep.delta));
    put("chi", floats(&sweep.chi));
    put("drive", floats(&sweep.drive));
    put("n_th", floats(&sweep.n_th));
    put("gamma", Value::Float(sweep.gamma));
    put("t_start", Value::Float(grid.t_start));
    put("t_end", Value::Float(grid.t_end));
    put("n_samples", Value::Integer(grid.n_samples as i64));
    if let Some(step) = grid.integrator_step {
        put("integrator_step", Value::Float(step));
    }
    put(
        "n_cut",
        if adaptive { Value::String("auto".into()) } else { Value::Integer(n_cut as i64) },
    );
    put("leakage_tol", Value::Float(leakage_tol));
    put("rel_step", Value::Float(fd.rel_step));
    put("abs_floor", Value::Float(fd.abs_floor));
    put("measurement", Value::String(kind));
    put("phi", floats(&phi));
    if let Some(v) = measurement.het_radius {
        put("het_radius", Value::Float(v));
    }
    if let Some(v) = measurement.het_step {
        put("het_step", Value::Float(v));
    }
    put("window_lo", Value::Integer(window.0 as i64));
    put("window_hi", Value::Integer(window.1 as i64));
    put("margin", Value::Integer(margin as i64));
    put("command", Value::String(command.name().into()));
    if let Some(f) = &figure {
        put("figure", Value::String(f.clone()));
    }
    put("repetitions", Value::Integer(repetitions as i64));
    put("seed", Value::Integer(seed as i64));
    put("output", Value::String(output.display().to_string()));
    let resolved = sections
        .into_iter()
        .map(|(k, v)| (k.to_string(), Value::Table(v)))
        .collect();

    Ok(ScenarioConfig {
        command,
        figure,
        sweep,
        grid,
        trunc,
        adaptive,
        fd,
        measurement,
        window,
        margin,
        repetitions,
        seed,
        output,
        resolved,
    })
}

impl ScenarioConfig {
    /// Canonical text of the resolved configuration without the output
    /// location, which does not affect results.
    pub fn canonical_text(&self) -> String {
        let mut table = self.resolved.clone();
        if let Some(Value::Table(run)) = table.get_mut("run") {
            run.remove("output");
        }
        toml::to_string(&table).expect("resolved config serializes")
    }
}
