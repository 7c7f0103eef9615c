//! Experiment configuration: INI-style `key = value` text with `[section]`
//! headers (parsed as TOML), or the same structure as JSON.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use toml::{Table, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    FieldCheck,
    BoundarySpecdim,
    CriticalBoundary,
    BulkSpecdim,
    TransformTable,
    BallMass,
    CouplingCheck,
    IdentityChecks,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::FieldCheck,
        ExperimentKind::BoundarySpecdim,
        ExperimentKind::CriticalBoundary,
        ExperimentKind::BulkSpecdim,
        ExperimentKind::TransformTable,
        ExperimentKind::BallMass,
        ExperimentKind::CouplingCheck,
        ExperimentKind::IdentityChecks,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::FieldCheck => "field_check",
            ExperimentKind::BoundarySpecdim => "boundary_specdim",
            ExperimentKind::CriticalBoundary => "critical_boundary",
            ExperimentKind::BulkSpecdim => "bulk_specdim",
            ExperimentKind::TransformTable => "transform_table",
            ExperimentKind::BallMass => "ball_mass",
            ExperimentKind::CouplingCheck => "coupling_check",
            ExperimentKind::IdentityChecks => "identity_checks",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ExperimentKind::ALL.iter().copied().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
            match nearest(s, &names) {
                Some(n) => format!("unknown experiment `{s}` (did you mean `{n}`?)"),
                None => format!("unknown experiment `{s}`; expected one of {}", names.join(", ")),
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    Padded,
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelParams {
    /// One experiment run per value.
    pub gamma: Vec<f64>,
    pub mass: f64,
    pub eps: f64,
    /// Boundary experiment: also run the critical flavor.
    pub include_critical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridParams {
    /// Lower-left corner (a line grid uses `origin_x`).
    pub origin_x: f64,
    pub origin_y: f64,
    pub extent: f64,
    pub resolution: usize,
    pub embedding: EmbeddingKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McParams {
    pub n_bridges: usize,
    pub n_steps: usize,
    pub replicates: usize,
    pub t_low: f64,
    pub t_high: Option<f64>,
    pub n_t_points: usize,
    /// One fixed field instead of a fresh field per replicate.
    pub quenched: bool,
    pub tail_correction: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformParams {
    pub alphas: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// Offsets `|y - x|` along the first axis.
    pub offsets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryParams {
    /// Point at which the heat kernel is sampled.
    pub x: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub n_times: usize,
    /// Sample LBM paths written for plotting.
    pub n_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalParams {
    /// Cutoffs `ε = 2^{-k}`.
    pub levels: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallParams {
    pub r_min: f64,
    pub r_max: f64,
    pub n_radii: usize,
    /// Region of ball centers.
    pub region_lo: f64,
    pub region_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingParams {
    pub gap_x: f64,
    pub gap_y: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub model: ModelParams,
    pub grid: GridParams,
    pub mc: McParams,
    pub transform: TransformParams,
    pub boundary: BoundaryParams,
    pub critical: CriticalParams,
    pub ballmass: BallParams,
    pub coupling: CouplingParams,
}

impl ExperimentConfig {
    /// Documented defaults for `kind`.
    pub fn defaults(kind: ExperimentKind) -> Self {
        use ExperimentKind::*;
        let gamma = match kind {
            BoundarySpecdim => vec![0.0, 1.0, 2.0],
            BulkSpecdim => vec![0.5, 1.0, 1.5],
            TransformTable => vec![0.0],
            CriticalBoundary | CouplingCheck | IdentityChecks => vec![0.0],
            FieldCheck | BallMass => vec![1.0],
        };
        let eps = match kind {
            BoundarySpecdim => 1.0 / 1024.0,
            CriticalBoundary => 1.0 / 256.0,
            FieldCheck => 1.0 / 64.0,
            BallMass => 1.0 / 256.0,
            _ => 0.1,
        };
        let grid = match kind {
            BoundarySpecdim => GridParams { origin_x: -1.0, origin_y: 0.0, extent: 2.0, resolution: 4096, embedding: EmbeddingKind::Padded },
            CriticalBoundary => GridParams { origin_x: 0.0, origin_y: 0.0, extent: 1.0, resolution: 2048, embedding: EmbeddingKind::Padded },
            FieldCheck => GridParams { origin_x: 0.0, origin_y: 0.0, extent: 1.0, resolution: 128, embedding: EmbeddingKind::Padded },
            BallMass => GridParams { origin_x: 0.0, origin_y: 0.0, extent: 1.0, resolution: 512, embedding: EmbeddingKind::Padded },
            _ => GridParams { origin_x: -12.8, origin_y: -12.8, extent: 25.6, resolution: 512, embedding: EmbeddingKind::Periodic },
        };
        let (alphas, lambdas, offsets) = match kind {
            TransformTable => (vec![0.5, 1.0, 2.0], vec![0.5, 1.0, 2.0, 4.0], vec![0.0, 1.0]),
            _ => (vec![1.0], vec![0.5, 1.0, 2.0, 4.0, 8.0], vec![0.0]),
        };
        let replicates = match kind {
            CriticalBoundary => 100,
            BallMass => 50,
            CouplingCheck => 10_000,
            IdentityChecks => 100_000,
            _ => 200,
        };
        ExperimentConfig {
            experiment: kind,
            master_seed: 1,
            output_dir: PathBuf::from(format!("results/{}", kind.name())),
            model: ModelParams { gamma, mass: 1.0, eps, include_critical: kind == BoundarySpecdim },
            grid,
            mc: McParams { n_bridges: 1000, n_steps: 32, replicates, t_low: 1e-4, t_high: None, n_t_points: 40, quenched: false, tail_correction: true },
            transform: TransformParams { alphas, lambdas, offsets },
            boundary: BoundaryParams { x: 0.0, t_min: 1e-6, t_max: 1e-2, n_times: 9, n_paths: 8 },
            critical: CriticalParams { levels: vec![4, 5, 6, 7, 8] },
            ballmass: BallParams { r_min: 0.02, r_max: 0.2, n_radii: 6, region_lo: 0.3, region_hi: 0.7 },
            coupling: CouplingParams { gap_x: 1.0, gap_y: 1.0, horizon: 4.0, n_steps: 40_000, eta: 1.0 },
        }
    }
}

/// Closest candidate by Levenshtein distance, if reasonably close.
pub(crate) fn nearest<'a>(word: &str, candidates: &[&'a str]) -> Option<&'a str> {
    candidates
        .iter()
        .map(|c| (strsim::levenshtein(word, c), *c))
        .filter(|(d, c)| *d <= 2.max(c.len() / 3))
        .min()
        .map(|(_, c)| c)
}

const SECTIONS: [&str; 8] = ["model", "grid", "mc", "transform", "boundary", "critical", "ballmass", "coupling"];
const ROOT_KEYS: [&str; 3] = ["experiment", "master_seed", "output_dir"];

/// Pulls typed values out of the parsed table, collecting every problem.
struct Reader {
    root: Table,
    errors: Vec<String>,
    seen: BTreeSet<(String, String)>,
}

impl Reader {
    fn lookup(&mut self, section: &str, key: &str) -> Option<Value> {
        self.seen.insert((section.to_string(), key.to_string()));
        if section.is_empty() {
            return self.root.get(key).cloned();
        }
        match self.root.get(section) {
            Some(Value::Table(t)) => t.get(key).cloned(),
            _ => None,
        }
    }

    fn path(section: &str, key: &str) -> String {
        if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        }
    }

    fn mismatch(&mut self, section: &str, key: &str, want: &str, got: &Value) {
        self.errors.push(format!("`{}`: expected {want}, found {}", Self::path(section, key), got.type_str()));
    }

    fn float(&mut self, section: &str, key: &str, slot: &mut f64) {
        if let Some(v) = self.lookup(section, key) {
            match as_float(&v) {
                Some(x) => *slot = x,
                None => self.mismatch(section, key, "a number", &v),
            }
        }
    }

    fn opt_float(&mut self, section: &str, key: &str, slot: &mut Option<f64>) {
        if let Some(v) = self.lookup(section, key) {
            match as_float(&v) {
                Some(x) => *slot = Some(x),
                None => self.mismatch(section, key, "a number", &v),
            }
        }
    }

    fn count(&mut self, section: &str, key: &str, slot: &mut usize) {
        if let Some(v) = self.lookup(section, key) {
            match v.as_integer() {
                Some(i) if i >= 0 => *slot = i as usize,
                _ => self.mismatch(section, key, "a nonnegative integer", &v),
            }
        }
    }

    fn flag(&mut self, section: &str, key: &str, slot: &mut bool) {
        if let Some(v) = self.lookup(section, key) {
            match v.as_bool() {
                Some(b) => *slot = b,
                None => self.mismatch(section, key, "true or false", &v),
            }
        }
    }

    /// A number or a list of numbers.
    fn floats(&mut self, section: &str, key: &str, slot: &mut Vec<f64>) {
        if let Some(v) = self.lookup(section, key) {
            let parsed = match &v {
                Value::Array(a) => a.iter().map(as_float).collect::<Option<Vec<f64>>>(),
                other => as_float(other).map(|x| vec![x]),
            };
            match parsed {
                Some(xs) => *slot = xs,
                None => self.mismatch(section, key, "a number or a list of numbers", &v),
            }
        }
    }

    fn unknown_keys(&mut self) {
        let mut errs = Vec::new();
        for (k, v) in &self.root {
            if SECTIONS.contains(&k.as_str()) {
                match v {
                    Value::Table(t) => {
                        let known: Vec<&str> = self.seen.iter().filter(|(s, _)| s == k).map(|(_, key)| key.as_str()).collect();
                        for key in t.keys() {
                            if !known.contains(&key.as_str()) {
                                errs.push(unknown(&format!("{k}.{key}"), key, &known));
                            }
                        }
                    }
                    other => errs.push(format!("`{k}`: expected a [{k}] section, found {}", other.type_str())),
                }
            } else if !ROOT_KEYS.contains(&k.as_str()) {
                let mut all: Vec<&str> = ROOT_KEYS.to_vec();
                all.extend(SECTIONS);
                // a misplaced section key is also worth pointing at
                let section_keys: Vec<&str> = self.seen.iter().map(|(_, key)| key.as_str()).collect();
                let msg = match nearest(k, &all).or_else(|| nearest(k, &section_keys)) {
                    Some(n) => format!("unknown key `{k}` (did you mean `{n}`?)"),
                    None => format!("unknown key `{k}`"),
                };
                errs.push(msg);
            }
        }
        self.errors.extend(errs);
    }
}

fn unknown(path: &str, key: &str, known: &[&str]) -> String {
    match nearest(key, known) {
        Some(n) => format!("unknown key `{path}` (did you mean `{n}`?)"),
        None => format!("unknown key `{path}`"),
    }
}

fn as_float(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn json_to_toml(v: serde_json::Value, path: &str) -> Result<Value> {
    use serde_json::Value as J;
    Ok(match v {
        J::Null => return Err(Error::Config(vec![format!("`{path}`: null is not allowed")])),
        J::Bool(b) => Value::Boolean(b),
        J::Number(n) => match n.as_i64() {
            Some(i) => Value::Integer(i),
            None => match n.as_u64() {
                Some(u) => Value::String(u.to_string()),
                None => Value::Float(n.as_f64().unwrap_or(f64::NAN)),
            },
        },
        J::String(s) => Value::String(s),
        J::Array(a) => Value::Array(a.into_iter().map(|x| json_to_toml(x, path)).collect::<Result<_>>()?),
        J::Object(o) => {
            let mut t = Table::new();
            for (k, x) in o {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                t.insert(k, json_to_toml(x, &p)?);
            }
            Value::Table(t)
        }
    })
}

/// Parses and validates a config; JSON is recognized by a leading `{`.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let root: Table = if text.trim_start().starts_with('{') {
        let j: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(vec![format!("JSON syntax: {e}")]))?;
        match json_to_toml(j, "")? {
            Value::Table(t) => t,
            _ => return Err(Error::Config(vec!["top level must be an object".into()])),
        }
    } else {
        text.parse::<Table>().map_err(|e| Error::Config(vec![format!("syntax: {}", e.to_string().trim_end())]))?
    };
    let kind = match root.get("experiment") {
        Some(Value::String(s)) => s.parse::<ExperimentKind>().map_err(|e| Error::Config(vec![e]))?,
        Some(other) => return Err(Error::Config(vec![format!("`experiment`: expected a string, found {}", other.type_str())])),
        None => return Err(Error::Config(vec!["missing key `experiment`".into()])),
    };
    let mut c = ExperimentConfig::defaults(kind);
    let mut r = Reader { root, errors: Vec::new(), seen: BTreeSet::new() };
    r.seen.insert((String::new(), "experiment".into()));
    if let Some(v) = r.lookup("", "master_seed") {
        match &v {
            Value::Integer(i) if *i >= 0 => c.master_seed = *i as u64,
            Value::String(s) if s.parse::<u64>().is_ok() => c.master_seed = s.parse().unwrap(),
            _ => r.mismatch("", "master_seed", "an unsigned 64-bit integer", &v),
        }
    }
    if let Some(v) = r.lookup("", "output_dir") {
        match v.as_str() {
            Some(s) => c.output_dir = PathBuf::from(s),
            None => r.mismatch("", "output_dir", "a string", &v),
        }
    }

    r.floats("model", "gamma", &mut c.model.gamma);
    r.float("model", "mass", &mut c.model.mass);
    r.float("model", "eps", &mut c.model.eps);
    r.flag("model", "include_critical", &mut c.model.include_critical);

    r.float("grid", "origin_x", &mut c.grid.origin_x);
    r.float("grid", "origin_y", &mut c.grid.origin_y);
    r.float("grid", "extent", &mut c.grid.extent);
    r.count("grid", "resolution", &mut c.grid.resolution);
    if let Some(v) = r.lookup("grid", "embedding") {
        match v.as_str() {
            Some("padded") => c.grid.embedding = EmbeddingKind::Padded,
            Some("periodic") => c.grid.embedding = EmbeddingKind::Periodic,
            _ => r.errors.push("`grid.embedding`: expected \"padded\" or \"periodic\"".into()),
        }
    }

    r.count("mc", "n_bridges", &mut c.mc.n_bridges);
    r.count("mc", "n_steps", &mut c.mc.n_steps);
    r.count("mc", "replicates", &mut c.mc.replicates);
    r.float("mc", "t_low", &mut c.mc.t_low);
    r.opt_float("mc", "t_high", &mut c.mc.t_high);
    r.count("mc", "n_t_points", &mut c.mc.n_t_points);
    r.flag("mc", "quenched", &mut c.mc.quenched);
    r.flag("mc", "tail_correction", &mut c.mc.tail_correction);

    r.floats("transform", "alphas", &mut c.transform.alphas);
    r.floats("transform", "lambdas", &mut c.transform.lambdas);
    r.floats("transform", "offsets", &mut c.transform.offsets);

    r.float("boundary", "x", &mut c.boundary.x);
    r.float("boundary", "t_min", &mut c.boundary.t_min);
    r.float("boundary", "t_max", &mut c.boundary.t_max);
    r.count("boundary", "n_times", &mut c.boundary.n_times);
    r.count("boundary", "n_paths", &mut c.boundary.n_paths);

    if let Some(v) = r.lookup("critical", "levels") {
        let parsed = match &v {
            Value::Array(a) => a.iter().map(|x| x.as_integer().and_then(|i| u32::try_from(i).ok())).collect::<Option<Vec<u32>>>(),
            _ => None,
        };
        match parsed {
            Some(l) => c.critical.levels = l,
            None => r.mismatch("critical", "levels", "a list of nonnegative integers", &v),
        }
    }

    r.float("ballmass", "r_min", &mut c.ballmass.r_min);
    r.float("ballmass", "r_max", &mut c.ballmass.r_max);
    r.count("ballmass", "n_radii", &mut c.ballmass.n_radii);
    r.float("ballmass", "region_lo", &mut c.ballmass.region_lo);
    r.float("ballmass", "region_hi", &mut c.ballmass.region_hi);

    r.float("coupling", "gap_x", &mut c.coupling.gap_x);
    r.float("coupling", "gap_y", &mut c.coupling.gap_y);
    r.float("coupling", "horizon", &mut c.coupling.horizon);
    r.count("coupling", "n_steps", &mut c.coupling.n_steps);
    r.float("coupling", "eta", &mut c.coupling.eta);

    r.unknown_keys();
    let mut errors = r.errors;
    errors.extend(validate(&c));
    if errors.is_empty() {
        Ok(c)
    } else {
        Err(Error::Config(errors))
    }
}

fn floats_value(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| Value::Float(x)).collect())
}

/// Renders every field, so that `parse_config(render_config(c)) == c`.
pub fn render_config(c: &ExperimentConfig) -> String {
    let mut root = Table::new();
    root.insert("experiment".into(), Value::String(c.experiment.name().into()));
    root.insert(
        "master_seed".into(),
        match i64::try_from(c.master_seed) {
            Ok(i) => Value::Integer(i),
            Err(_) => Value::String(c.master_seed.to_string()),
        },
    );
    root.insert("output_dir".into(), Value::String(c.output_dir.to_string_lossy().into_owned()));

    let mut t = Table::new();
    t.insert("gamma".into(), floats_value(&c.model.gamma));
    t.insert("mass".into(), Value::Float(c.model.mass));
    t.insert("eps".into(), Value::Float(c.model.eps));
    t.insert("include_critical".into(), Value::Boolean(c.model.include_critical));
    root.insert("model".into(), Value::Table(t));

    let mut t = Table::new();
    t.insert("origin_x".into(), Value::Float(c.grid.origin_x));
    t.insert("origin_y".into(), Value::Float(c.grid.origin_y));
    t.insert("extent".into(), Value::Float(c.grid.extent));
    t.insert("resolution".into(), Value::Integer(c.grid.resolution as i64));
    let emb = match c.grid.embedding {
        EmbeddingKind::Padded => "padded",
        EmbeddingKind::Periodic => "periodic",
    };
    t.insert("embedding".into(), Value::String(emb.into()));
    root.insert("grid".into(), Value::Table(t));

    let mut t = Table::new();
    t.insert("n_bridges".into(), Value::Integer(c.mc.n_bridges as i64));
    t.insert("n_steps".into(), Value::Integer(c.mc.n_steps as i64));
    t.insert("replicates".into(), Value::Integer(c.mc.replicates as i64));
    t.insert("t_low".into(), Value::Float(c.mc.t_low));
    if let Some(h) = c.mc.t_high {
        t.insert("t_high".into(), Value::Float(h));
    }
    t.insert("n_t_points".into(), Value::Integer(c.mc.n_t_points as i64));
    t.insert("quenched".into(), Value::Boolean(c.mc.quenched));
    t.insert("tail_correction".into(), Value::Boolean(c.mc.tail_correction));
    root.insert("mc".into(), Value::Table(t));

    let mut t = Table::new();
    t.insert("alphas".into(), floats_value(&c.transform.alphas));
    t.insert("lambdas".into(), floats_value(&c.transform.lambdas));
    t.insert("offsets".into(), floats_value(&c.transform.offsets));
    root.insert("transform".into(), Value::Table(t));

    let mut t = Table::new();
    t.insert("x".into(), Value::Float(c.boundary.x));
    t.insert("t_min".into(), Value::Float(c.boundary.t_min));
    t.insert("t_max".into(), Value::Float(c.boundary.t_max));
    t.insert("n_times".into(), Value::Integer(c.boundary.n_times as i64));
    t.insert("n_paths".into(), Value::Integer(c.boundary.n_paths as i64));
    root.insert("boundary".into(), Value::Table(t));

    let mut t = Table::new();
    t.insert("levels".into(), Value::Array(c.critical.levels.iter().map(|&l| Value::Integer(l as i64)).collect()));
    root.insert("critical".into(), Value::Table(t));

    let mut t = Table::new();
    t.insert("r_min".into(), Value::Float(c.ballmass.r_min));
    t.insert("r_max".into(), Value::Float(c.ballmass.r_max));
    t.insert("n_radii".into(), Value::Integer(c.ballmass.n_radii as i64));
    t.insert("region_lo".into(), Value::Float(c.ballmass.region_lo));
    t.insert("region_hi".into(), Value::Float(c.ballmass.region_hi));
    root.insert("ballmass".into(), Value::Table(t));

    let mut t = Table::new();
    t.insert("gap_x".into(), Value::Float(c.coupling.gap_x));
    t.insert("gap_y".into(), Value::Float(c.coupling.gap_y));
    t.insert("horizon".into(), Value::Float(c.coupling.horizon));
    t.insert("n_steps".into(), Value::Integer(c.coupling.n_steps as i64));
    t.insert("eta".into(), Value::Float(c.coupling.eta));
    root.insert("coupling".into(), Value::Table(t));

    toml::to_string(&root).expect("config tables always serialize")
}

fn positive(errs: &mut Vec<String>, name: &str, x: f64) {
    if !(x > 0.0 && x.is_finite()) {
        errs.push(format!("`{name}` = {x} must be positive and finite"));
    }
}

/// Every violated constraint, for the experiment the config names.
pub fn validate(c: &ExperimentConfig) -> Vec<String> {
    use ExperimentKind::*;
    let mut e = Vec::new();
    let k = c.experiment;
    positive(&mut e, "model.mass", c.model.mass);
    positive(&mut e, "grid.extent", c.grid.extent);
    if !(c.grid.origin_x.is_finite() && c.grid.origin_y.is_finite()) {
        e.push("grid origin must be finite".into());
    }
    if c.grid.resolution < 8 || !c.grid.resolution.is_power_of_two() {
        e.push(format!("`grid.resolution` = {} must be a power of two ≥ 8", c.grid.resolution));
    }
    if c.model.gamma.is_empty() && !matches!(k, CriticalBoundary | CouplingCheck | IdentityChecks) {
        e.push("`model.gamma` must list at least one value".into());
    }
    let bulk = matches!(k, BulkSpecdim | TransformTable | BallMass | FieldCheck);
    for &g in &c.model.gamma {
        if bulk && !(0.0..2.0).contains(&g) {
            e.push(format!("`model.gamma` = {g}: γ ∈ [0,2) required"));
        }
        if k == BoundarySpecdim && !(0.0..2.0 * std::f64::consts::SQRT_2).contains(&g) {
            e.push(format!("`model.gamma` = {g}: γ ∈ [0,2√2) required for the boundary"));
        }
    }
    if !matches!(k, CouplingCheck | IdentityChecks) {
        positive(&mut e, "model.eps", c.model.eps);
    }
    if matches!(k, BulkSpecdim | TransformTable) {
        if c.mc.n_bridges < 2 {
            e.push("`mc.n_bridges` must be at least 2".into());
        }
        if c.mc.n_steps < 2 {
            e.push("`mc.n_steps` must be at least 2".into());
        }
        if c.mc.n_t_points < 5 {
            e.push("`mc.n_t_points` must be at least 5".into());
        }
        positive(&mut e, "mc.t_low", c.mc.t_low);
        if let Some(h) = c.mc.t_high {
            if !(h > c.mc.t_low && h.is_finite()) {
                e.push(format!("`mc.t_high` = {h} must exceed t_low"));
            }
        }
        if c.transform.lambdas.is_empty() || c.transform.lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            e.push("`transform.lambdas` must be a nonempty list of positive numbers".into());
        }
        if c.transform.alphas.is_empty() || c.transform.alphas.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
            e.push("`transform.alphas` must be a nonempty list of numbers ≥ 0".into());
        }
    }
    if k == BulkSpecdim {
        let l = &c.transform.lambdas;
        let (lo, hi) = (l.iter().copied().fold(f64::INFINITY, f64::min), l.iter().copied().fold(0.0, f64::max));
        if l.len() < 4 || hi / lo < 10.0 * (1.0 - 1e-12) {
            e.push("`transform.lambdas`: need at least 4 values spanning a decade".into());
        }
        if c.transform.alphas.iter().any(|&a| a <= 0.0) {
            e.push("`transform.alphas`: α > 0 required for the spectral dimension".into());
        }
    }
    if k == TransformTable && c.transform.offsets.iter().any(|&d| !(d >= 0.0 && d.is_finite())) {
        e.push("`transform.offsets` must be ≥ 0".into());
    }
    if k == BoundarySpecdim {
        let b = &c.boundary;
        if !(b.t_min > 0.0 && b.t_max / b.t_min >= 100.0) {
            e.push("`boundary.t_min`/`t_max` must be positive and span two decades".into());
        }
        if b.n_times < 4 {
            e.push("`boundary.n_times` must be at least 4".into());
        }
        if !(b.x > c.grid.origin_x && b.x < c.grid.origin_x + c.grid.extent) {
            e.push(format!("`boundary.x` = {} outside the grid", b.x));
        }
        if c.model.include_critical && !(c.model.eps < (-1.0f64).exp()) {
            e.push("critical flavor needs `model.eps` < e⁻¹".into());
        }
    }
    if k == CriticalBoundary {
        if c.critical.levels.len() < 2 {
            e.push("`critical.levels` needs at least two cutoffs".into());
        }
        if c.critical.levels.iter().any(|&l| l < 2 || l > 30) {
            e.push("`critical.levels` must lie in 2..=30 (ε = 2^-k < e⁻¹)".into());
        }
        if c.critical.levels.windows(2).any(|w| w[1] <= w[0]) {
            e.push("`critical.levels` must be strictly increasing".into());
        }
    }
    if matches!(k, CriticalBoundary | BallMass | FieldCheck | CouplingCheck | IdentityChecks) && c.mc.replicates < 2 {
        e.push("`mc.replicates` must be at least 2".into());
    }
    if k == BallMass {
        let b = &c.ballmass;
        if !(b.r_min > 0.0 && b.r_max < 1.0 && b.r_max / b.r_min >= 10.0 * (1.0 - 1e-12)) {
            e.push("`ballmass` radii must lie in (0,1) and span a decade".into());
        }
        if b.n_radii < 4 {
            e.push("`ballmass.n_radii` must be at least 4".into());
        }
        if !(b.region_hi > b.region_lo) {
            e.push("`ballmass.region_hi` must exceed region_lo".into());
        }
    }
    if k == CouplingCheck {
        positive(&mut e, "coupling.horizon", c.coupling.horizon);
        positive(&mut e, "coupling.eta", c.coupling.eta);
        if c.coupling.n_steps < 1 {
            e.push("`coupling.n_steps` must be positive".into());
        }
    }
    e
}
