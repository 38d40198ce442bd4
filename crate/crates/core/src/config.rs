//! Run configuration: a TOML document with one command block.
//!
//! ```toml
//! preset = "fig2"          # optional defaults for [model] and [simulate]
//!
//! [model]
//! d1 = 1.0
//! d2 = 1.0
//! chi = 20.0
//! lambda = 1.0
//! length = 1.0             # or L
//! sensitivity = "log"      # or "linear"
//!
//! [simulate]
//! t_end = 50.0
//! snapshot_times = [0.0, 10.0]
//!
//! [output]
//! dir = "runs/fig2"
//! ```
//!
//! Model keys may also sit at the top level. `[raw]` takes the dimensional
//! coefficients instead of `[model]`. Unknown keys are errors, and every
//! problem in a document is reported at once.

use std::collections::BTreeSet;
use std::fmt;

use toml::{Table, Value};

use crate::model::{nondimensionalize, ModelParams, RawParams, SensitivitySpec};
use crate::pde::{InitialData, WaveScale, MIN_CELLS};
use crate::presets::{preset, PRESET_NAMES};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

/// All problems found in one document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

impl ConfigErrors {
    pub fn mentions(&self, needle: &str) -> bool {
        self.0.iter().any(|e| e.to_string().contains(needle))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensitivityKind {
    Linear,
    Logarithmic,
}

impl SensitivityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SensitivityKind::Linear => "linear",
            SensitivityKind::Logarithmic => "log",
        }
    }

    pub fn spec(self) -> SensitivitySpec {
        match self {
            SensitivityKind::Linear => SensitivitySpec::Linear,
            SensitivityKind::Logarithmic => SensitivitySpec::Logarithmic,
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "linear" | "lin" => Some(SensitivityKind::Linear),
            "log" | "logarithmic" => Some(SensitivityKind::Logarithmic),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSection {
    pub d1: f64,
    pub d2: f64,
    pub chi: f64,
    pub lambda: f64,
    pub length: f64,
    pub sensitivity: SensitivityKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawSection {
    pub d1: f64,
    pub d2: f64,
    pub chi: f64,
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub length: f64,
    pub sensitivity: SensitivityKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamSource {
    Model(ModelSection),
    /// Dimensional coefficients, nondimensionalized before use.
    Raw(RawSection),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeConfig {
    pub k_max: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BifurcateConfig {
    pub k: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateConfig {
    /// Defaults to `max(256, 64 L)` per length.
    pub n_cells: Option<usize>,
    pub t_end: f64,
    pub dt_max: f64,
    pub snapshot_times: Vec<f64>,
    pub initial: InitialData,
    /// Domain lengths to run; empty means the model length only.
    pub lengths: Vec<f64>,
    pub stop_when_steady: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyConfig {
    pub k: usize,
    pub s_max: f64,
    pub n_cells: usize,
    pub s0: Option<f64>,
    pub write_profiles: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Analyze(AnalyzeConfig),
    Bifurcate(BifurcateConfig),
    Simulate(SimulateConfig),
    Steady(SteadyConfig),
}

pub const COMMANDS: [&str; 4] = ["analyze", "bifurcate", "simulate", "steady"];

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Analyze(_) => "analyze",
            Command::Bifurcate(_) => "bifurcate",
            Command::Simulate(_) => "simulate",
            Command::Steady(_) => "steady",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: Option<String>,
    /// Diagnostics are recorded every `cadence` accepted steps.
    pub cadence: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, cadence: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub params: ParamSource,
    pub command: Command,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn model_params(&self) -> ModelParams {
        match self.params {
            ParamSource::Model(m) => ModelParams::new(m.d1, m.d2, m.chi, m.lambda, m.length, m.sensitivity.spec())
                .expect("validated during parsing"),
            ParamSource::Raw(r) => nondimensionalize(
                &RawParams::new(r.d1, r.d2, r.chi, r.lambda, r.mu, r.alpha, r.beta, r.length, r.sensitivity.spec())
                    .expect("validated during parsing"),
            ),
        }
    }
}

pub const DEFAULT_T_END: f64 = 100.0;
pub const DEFAULT_DT_MAX: f64 = 1e-2;
pub const DEFAULT_K_MAX: usize = 20;
pub const DEFAULT_STEADY_CELLS: usize = 512;
pub const DEFAULT_S_MAX: f64 = 0.02;

/// Reads keys from one table, remembering which were used.
struct Reader<'a> {
    table: &'a Table,
    prefix: String,
    used: BTreeSet<String>,
}

impl<'a> Reader<'a> {
    fn new(table: &'a Table, prefix: &str) -> Self {
        Reader {
            table,
            prefix: prefix.to_string(),
            used: BTreeSet::new(),
        }
    }

    fn path(&self, key: &str) -> String {
        if self.prefix.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.prefix)
        }
    }

    fn raw(&mut self, key: &str) -> Option<&'a Value> {
        let v = self.table.get(key);
        if v.is_some() {
            self.used.insert(key.to_string());
        }
        v
    }

    fn err(&self, errors: &mut Vec<ConfigError>, key: &str, message: impl Into<String>) {
        errors.push(ConfigError {
            path: self.path(key),
            message: message.into(),
        });
    }

    fn number(&mut self, key: &str, errors: &mut Vec<ConfigError>) -> Option<f64> {
        match self.raw(key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.err(errors, key, format!("expected a number, found {}", other.type_str()));
                None
            }
        }
    }

    fn count(&mut self, key: &str, errors: &mut Vec<ConfigError>) -> Option<usize> {
        match self.raw(key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as usize),
            Value::Integer(i) => {
                self.err(errors, key, format!("must be a non-negative integer (got {i})"));
                None
            }
            other => {
                self.err(errors, key, format!("expected an integer, found {}", other.type_str()));
                None
            }
        }
    }

    fn string(&mut self, key: &str, errors: &mut Vec<ConfigError>) -> Option<&'a str> {
        match self.raw(key)? {
            Value::String(s) => Some(s.as_str()),
            other => {
                self.err(errors, key, format!("expected a string, found {}", other.type_str()));
                None
            }
        }
    }

    fn boolean(&mut self, key: &str, errors: &mut Vec<ConfigError>) -> Option<bool> {
        match self.raw(key)? {
            Value::Boolean(b) => Some(*b),
            other => {
                self.err(errors, key, format!("expected true or false, found {}", other.type_str()));
                None
            }
        }
    }

    fn numbers(&mut self, key: &str, errors: &mut Vec<ConfigError>) -> Option<Vec<f64>> {
        let Value::Array(items) = self.raw(key)? else {
            self.err(errors, key, "expected an array of numbers");
            return None;
        };
        let mut out = Vec::new();
        for (i, v) in items.iter().enumerate() {
            match v {
                Value::Float(x) => out.push(*x),
                Value::Integer(n) => out.push(*n as f64),
                other => {
                    self.err(errors, &format!("{key}[{i}]"), format!("expected a number, found {}", other.type_str()));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn counts(&mut self, key: &str, errors: &mut Vec<ConfigError>) -> Option<Vec<usize>> {
        let value = self.raw(key)?;
        let items = match value {
            Value::Integer(_) => std::slice::from_ref(value),
            Value::Array(items) => items.as_slice(),
            other => {
                self.err(errors, key, format!("expected an integer or array of integers, found {}", other.type_str()));
                return None;
            }
        };
        let mut out = Vec::new();
        for (i, v) in items.iter().enumerate() {
            match v {
                Value::Integer(n) if *n >= 1 => out.push(*n as usize),
                other => {
                    self.err(errors, &format!("{key}[{i}]"), format!("expected a positive integer, found {other}"));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn pair(&mut self, key: &str, errors: &mut Vec<ConfigError>) -> Option<(f64, f64)> {
        let v = self.numbers(key, errors)?;
        if v.len() != 2 {
            self.err(errors, key, format!("expected [amplitude, mode], got {} values", v.len()));
            return None;
        }
        Some((v[0], v[1]))
    }

    /// Reports every key not read, except the ones listed in `skip`.
    fn finish(self, errors: &mut Vec<ConfigError>, skip: &[&str]) {
        for key in self.table.keys() {
            if !self.used.contains(key) && !skip.contains(&key.as_str()) {
                errors.push(ConfigError {
                    path: self.path(key),
                    message: "unknown key".into(),
                });
            }
        }
    }
}

fn require_positive(errors: &mut Vec<ConfigError>, path: &str, value: f64) {
    if !(value.is_finite() && value > 0.0) {
        errors.push(ConfigError {
            path: path.to_string(),
            message: format!("must be positive (got {value})"),
        });
    }
}

fn require_finite(errors: &mut Vec<ConfigError>, path: &str, value: f64) {
    if !value.is_finite() {
        errors.push(ConfigError {
            path: path.to_string(),
            message: format!("must be finite (got {value})"),
        });
    }
}

fn missing(errors: &mut Vec<ConfigError>, path: &str) {
    errors.push(ConfigError {
        path: path.to_string(),
        message: "missing (no preset supplies it)".into(),
    });
}

const MODEL_KEYS: [&str; 7] = ["d1", "d2", "chi", "lambda", "length", "L", "sensitivity"];
const TABLES: [&str; 7] = ["model", "raw", "analyze", "bifurcate", "simulate", "steady", "output"];

#[derive(Default)]
struct PartialModel {
    d1: Option<f64>,
    d2: Option<f64>,
    chi: Option<f64>,
    lambda: Option<f64>,
    length: Option<f64>,
    sensitivity: Option<SensitivityKind>,
    sensitivity_given: bool,
}

fn sensitivity_key(r: &mut Reader, errors: &mut Vec<ConfigError>) -> Option<SensitivityKind> {
    let s = r.string("sensitivity", errors)?;
    let kind = SensitivityKind::parse(s);
    if kind.is_none() {
        r.err(errors, "sensitivity", format!("unknown sensitivity `{s}` (expected \"linear\" or \"log\")"));
    }
    kind
}

fn read_model_keys(r: &mut Reader, errors: &mut Vec<ConfigError>, into: &mut PartialModel) {
    let set = |slot: &mut Option<f64>, v: Option<f64>, key: &str, r: &Reader, errors: &mut Vec<ConfigError>| {
        if let Some(v) = v {
            if slot.is_some() {
                r.err(errors, key, "given more than once");
            }
            *slot = Some(v);
        }
    };
    let v = r.number("d1", errors);
    set(&mut into.d1, v, "d1", r, errors);
    let v = r.number("d2", errors);
    set(&mut into.d2, v, "d2", r, errors);
    let v = r.number("chi", errors);
    set(&mut into.chi, v, "chi", r, errors);
    let v = r.number("lambda", errors);
    set(&mut into.lambda, v, "lambda", r, errors);
    let v = r.number("length", errors);
    set(&mut into.length, v, "length", r, errors);
    let v = r.number("L", errors);
    set(&mut into.length, v, "L", r, errors);
    into.sensitivity_given |= r.table.contains_key("sensitivity");
    if let Some(kind) = sensitivity_key(r, errors) {
        if into.sensitivity.is_some() {
            r.err(errors, "sensitivity", "given more than once");
        }
        into.sensitivity = Some(kind);
    }
}

fn sub_table<'a>(root: &'a Table, key: &str, errors: &mut Vec<ConfigError>) -> Option<&'a Table> {
    match root.get(key)? {
        Value::Table(t) => Some(t),
        other => {
            errors.push(ConfigError {
                path: key.to_string(),
                message: format!("expected a table, found {}", other.type_str()),
            });
            None
        }
    }
}

/// Parses a configuration whose command is named in the document itself.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    parse_config_for(text, None)
}

/// Parses a configuration for an invocation that names `command`.
pub fn parse_config_for(text: &str, command: Option<&str>) -> Result<RunConfig, ConfigErrors> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        ConfigErrors(vec![ConfigError {
            path: String::new(),
            message: format!("not a valid TOML document: {}", e.message()),
        }])
    })?;
    parse_table(&root, command)
}

pub fn parse_table(root: &Table, invoked: Option<&str>) -> Result<RunConfig, ConfigErrors> {
    let mut errors = Vec::new();
    let mut top = Reader::new(root, "");

    let preset_name = top.string("preset", &mut errors).map(str::to_string);
    let preset = preset_name.as_deref().and_then(|n| {
        let p = preset(n);
        if p.is_none() {
            top.err(
                &mut errors,
                "preset",
                format!("unknown preset `{n}` (known: {})", PRESET_NAMES.join(", ")),
            );
        }
        p
    });

    // command selection
    let declared = top.string("command", &mut errors).map(str::to_string);
    if let Some(c) = &declared {
        if !COMMANDS.contains(&c.as_str()) {
            top.err(&mut errors, "command", format!("unknown command `{c}`"));
        }
    }
    let blocks: Vec<&str> = COMMANDS.iter().copied().filter(|c| root.contains_key(*c)).collect();
    let chosen: Option<String> = match (declared.as_deref(), invoked) {
        (Some(d), Some(i)) if d != i => {
            errors.push(ConfigError {
                path: "command".into(),
                message: format!("document is for `{d}` but `{i}` was invoked"),
            });
            None
        }
        (Some(d), _) => Some(d.to_string()),
        (None, Some(i)) => Some(i.to_string()),
        (None, None) => None,
    };
    let command_name = match (&chosen, blocks.as_slice()) {
        (Some(c), bs) if bs.iter().all(|b| b == c) => Some(c.clone()),
        (Some(c), bs) => {
            errors.push(ConfigError {
                path: String::new(),
                message: format!(
                    "exactly one command: `{c}` selected but the document also has [{}]",
                    bs.iter().filter(|b| *b != c).copied().collect::<Vec<_>>().join("], [")
                ),
            });
            None
        }
        (None, [one]) => Some(one.to_string()),
        (None, []) => {
            errors.push(ConfigError {
                path: String::new(),
                message: "exactly one command: none given (add a command block or `command = ...`)".into(),
            });
            None
        }
        (None, many) => {
            errors.push(ConfigError {
                path: String::new(),
                message: format!("exactly one command: found [{}]", many.join("] and [")),
            });
            None
        }
    };

    // model parameters
    let mut partial = PartialModel::default();
    read_model_keys(&mut top, &mut errors, &mut partial);
    let has_flat = MODEL_KEYS.iter().any(|k| root.contains_key(*k));
    if let Some(t) = sub_table(root, "model", &mut errors) {
        let mut r = Reader::new(t, "model");
        read_model_keys(&mut r, &mut errors, &mut partial);
        r.finish(&mut errors, &[]);
    }
    let params = if let Some(t) = sub_table(root, "raw", &mut errors) {
        if root.contains_key("model") || has_flat {
            errors.push(ConfigError {
                path: "raw".into(),
                message: "give either [raw] or model parameters, not both".into(),
            });
        }
        parse_raw(t, &mut errors).map(ParamSource::Raw)
    } else {
        resolve_model(partial, preset.as_ref().map(|p| &p.params), &mut errors).map(ParamSource::Model)
    };

    // output
    let mut output = OutputConfig::default();
    if let Some(t) = sub_table(root, "output", &mut errors) {
        let mut r = Reader::new(t, "output");
        if let Some(d) = r.string("dir", &mut errors) {
            output.dir = Some(d.to_string());
        }
        if let Some(c) = r.count("cadence", &mut errors) {
            if c == 0 {
                r.err(&mut errors, "cadence", "must be at least 1");
            }
            output.cadence = c;
        }
        r.finish(&mut errors, &[]);
    }

    let empty = Table::new();
    let command = command_name.as_deref().and_then(|name| {
        let t = sub_table(root, name, &mut errors).unwrap_or(&empty);
        let mut r = Reader::new(t, name);
        let c = match name {
            "analyze" => parse_analyze(&mut r, &mut errors),
            "bifurcate" => parse_bifurcate(&mut r, &mut errors),
            "simulate" => parse_simulate(&mut r, &mut errors, preset.as_ref()),
            "steady" => parse_steady(&mut r, &mut errors),
            _ => None,
        };
        r.finish(&mut errors, &[]);
        c
    });

    top.finish(&mut errors, &TABLES);
    for key in root.keys() {
        if let Some(Value::Table(_)) = root.get(key) {
            if !TABLES.contains(&key.as_str()) && !errors.iter().any(|e| e.path == *key) {
                errors.push(ConfigError {
                    path: key.clone(),
                    message: "unknown key".into(),
                });
            }
        }
    }

    match (params, command) {
        (Some(params), Some(command)) if errors.is_empty() => Ok(RunConfig {
            preset: preset_name,
            params,
            command,
            output,
        }),
        _ => {
            if errors.is_empty() {
                errors.push(ConfigError {
                    path: String::new(),
                    message: "incomplete configuration".into(),
                });
            }
            Err(ConfigErrors(errors))
        }
    }
}

fn resolve_model(p: PartialModel, preset: Option<&ModelParams>, errors: &mut Vec<ConfigError>) -> Option<ModelSection> {
    let before = errors.len();
    let pick = |v: Option<f64>, from_preset: Option<f64>, key: &str, errors: &mut Vec<ConfigError>| {
        let out = v.or(from_preset);
        let path = format!("model.{key}");
        match out {
            None => missing(errors, &path),
            Some(x) if key == "chi" => require_finite(errors, &path, x),
            Some(x) => require_positive(errors, &path, x),
        }
        out.unwrap_or(f64::NAN)
    };
    let d1 = pick(p.d1, preset.map(|m| m.d1), "d1", errors);
    let d2 = pick(p.d2, preset.map(|m| m.d2), "d2", errors);
    let chi = pick(p.chi, preset.map(|m| m.chi), "chi", errors);
    let lambda = pick(p.lambda, preset.map(|m| m.lambda), "lambda", errors);
    let length = pick(p.length, preset.map(|m| m.length), "length", errors);
    let sensitivity = p.sensitivity.or_else(|| {
        preset.map(|m| {
            if m.sensitivity.is_linear() {
                SensitivityKind::Linear
            } else {
                SensitivityKind::Logarithmic
            }
        })
    });
    if sensitivity.is_none() && !p.sensitivity_given {
        missing(errors, "model.sensitivity");
    }
    (errors.len() == before && sensitivity.is_some()).then(|| ModelSection {
        d1,
        d2,
        chi,
        lambda,
        length,
        sensitivity: sensitivity.unwrap(),
    })
}

fn parse_raw(t: &Table, errors: &mut Vec<ConfigError>) -> Option<RawSection> {
    let before = errors.len();
    let mut r = Reader::new(t, "raw");
    let mut get = |key: &str, errors: &mut Vec<ConfigError>| {
        let v = r.number(key, errors);
        match v {
            Some(x) => require_positive(errors, &format!("raw.{key}"), x),
            None if !t.contains_key(key) => missing(errors, &format!("raw.{key}")),
            None => {}
        }
        v.unwrap_or(f64::NAN)
    };
    let d1 = get("d1", errors);
    let d2 = get("d2", errors);
    let chi = get("chi", errors);
    let lambda = get("lambda", errors);
    let mu = get("mu", errors);
    let alpha = get("alpha", errors);
    let beta = get("beta", errors);
    let length = match (t.contains_key("length"), t.contains_key("L")) {
        (true, true) => {
            r.err(errors, "L", "given together with `length`");
            f64::NAN
        }
        (_, true) => get("L", errors),
        _ => get("length", errors),
    };
    let sensitivity = sensitivity_key(&mut r, errors);
    if sensitivity.is_none() && !t.contains_key("sensitivity") {
        missing(errors, "raw.sensitivity");
    }
    r.finish(errors, &[]);
    (errors.len() == before).then(|| RawSection {
        d1,
        d2,
        chi,
        lambda,
        mu,
        alpha,
        beta,
        length,
        sensitivity: sensitivity.unwrap(),
    })
}

fn parse_analyze(r: &mut Reader, errors: &mut Vec<ConfigError>) -> Option<Command> {
    let k_max = r.count("k_max", errors).unwrap_or(DEFAULT_K_MAX);
    if k_max == 0 {
        r.err(errors, "k_max", "must be at least 1");
    }
    Some(Command::Analyze(AnalyzeConfig { k_max }))
}

fn parse_bifurcate(r: &mut Reader, errors: &mut Vec<ConfigError>) -> Option<Command> {
    let k = r.counts("k", errors).unwrap_or_else(|| vec![1]);
    if k.is_empty() {
        r.err(errors, "k", "must list at least one mode");
    }
    Some(Command::Bifurcate(BifurcateConfig { k }))
}

fn parse_simulate(r: &mut Reader, errors: &mut Vec<ConfigError>, preset: Option<&crate::presets::Preset>) -> Option<Command> {
    let n_cells = r.count("n_cells", errors);
    if let Some(n) = n_cells {
        if n < MIN_CELLS {
            r.err(errors, "n_cells", format!("must be at least {MIN_CELLS} (got {n})"));
        }
    }
    let t_end = r
        .number("t_end", errors)
        .or(preset.map(|p| p.t_end))
        .unwrap_or(DEFAULT_T_END);
    require_positive(errors, &r.path("t_end"), t_end);
    let dt_max = r.number("dt_max", errors).unwrap_or(DEFAULT_DT_MAX);
    require_positive(errors, &r.path("dt_max"), dt_max);
    let snapshot_times = r.numbers("snapshot_times", errors).unwrap_or_default();
    for (i, t) in snapshot_times.iter().enumerate() {
        if !(t.is_finite() && *t >= 0.0 && *t <= t_end) {
            r.err(errors, &format!("snapshot_times[{i}]"), format!("must lie in [0, t_end] (got {t})"));
        }
    }
    let stop_when_steady = r.boolean("stop_when_steady", errors).unwrap_or(true);

    let named = r.string("initial", errors);
    let pairs = ["initial_u", "initial_v", "base_u", "base_v", "initial_scale"];
    let explicit = pairs.iter().any(|k| r.table.contains_key(*k));
    let mut initial = preset.map(|p| p.initial).unwrap_or_else(InitialData::default_perturbation);
    if let Some(name) = named {
        if explicit {
            r.err(errors, "initial", "give either a preset name or amplitude/mode pairs, not both");
        }
        match crate::presets::preset(name) {
            Some(p) => initial = p.initial,
            None => r.err(errors, "initial", format!("unknown preset `{name}`")),
        }
    }
    if explicit {
        if let Some(p) = r.pair("initial_u", errors) {
            initial.u = p;
        }
        if let Some(p) = r.pair("initial_v", errors) {
            initial.v = p;
        }
        if let Some(b) = r.number("base_u", errors) {
            require_positive(errors, &r.path("base_u"), b);
            initial.base_u = Some(b);
        }
        if let Some(b) = r.number("base_v", errors) {
            require_positive(errors, &r.path("base_v"), b);
            initial.base_v = Some(b);
        }
        if let Some(s) = r.string("initial_scale", errors) {
            match s {
                "domain" => initial.scale = WaveScale::Domain,
                "absolute" => initial.scale = WaveScale::Absolute,
                other => r.err(errors, "initial_scale", format!("expected \"domain\" or \"absolute\", got `{other}`")),
            }
        }
    }
    for (key, (a, m)) in [("initial_u", initial.u), ("initial_v", initial.v)] {
        if !(a.is_finite() && m.is_finite() && m >= 0.0) {
            r.err(errors, key, format!("amplitude and mode must be finite, mode >= 0 (got [{a}, {m}])"));
        }
    }
    let lengths = r
        .numbers("lengths", errors)
        .or_else(|| preset.map(|p| p.lengths.clone()))
        .unwrap_or_default();
    for (i, l) in lengths.iter().enumerate() {
        require_positive(errors, &r.path(&format!("lengths[{i}]")), *l);
    }
    Some(Command::Simulate(SimulateConfig {
        n_cells,
        t_end,
        dt_max,
        snapshot_times,
        initial,
        lengths,
        stop_when_steady,
    }))
}

fn parse_steady(r: &mut Reader, errors: &mut Vec<ConfigError>) -> Option<Command> {
    let k = r.count("k", errors).unwrap_or(1);
    if k == 0 {
        r.err(errors, "k", "must be at least 1");
    }
    let s_max = r.number("s_max", errors).unwrap_or(DEFAULT_S_MAX);
    if !(s_max.is_finite() && s_max >= 0.0) {
        r.err(errors, "s_max", format!("must be non-negative (got {s_max})"));
    }
    let n_cells = r.count("n_cells", errors).unwrap_or(DEFAULT_STEADY_CELLS);
    if n_cells < MIN_CELLS {
        r.err(errors, "n_cells", format!("must be at least {MIN_CELLS} (got {n_cells})"));
    }
    let s0 = r.number("s0", errors);
    if let Some(s) = s0 {
        require_positive(errors, &r.path("s0"), s);
    }
    let write_profiles = r.boolean("write_profiles", errors).unwrap_or(false);
    Some(Command::Steady(SteadyConfig {
        k,
        s_max,
        n_cells,
        s0,
        write_profiles,
    }))
}

fn float(x: f64) -> Value {
    Value::Float(x)
}

fn floats(xs: &[f64]) -> Value {
    Value::Array(xs.iter().copied().map(Value::Float).collect())
}

/// The fully resolved configuration as a TOML table (no preset lookups
/// needed to read it back).
pub fn to_table(config: &RunConfig) -> Table {
    let mut root = Table::new();
    root.insert("command".into(), Value::String(config.command.name().into()));
    if let Some(p) = &config.preset {
        root.insert("preset".into(), Value::String(p.clone()));
    }
    match config.params {
        ParamSource::Model(m) => {
            let mut t = Table::new();
            t.insert("d1".into(), float(m.d1));
            t.insert("d2".into(), float(m.d2));
            t.insert("chi".into(), float(m.chi));
            t.insert("lambda".into(), float(m.lambda));
            t.insert("length".into(), float(m.length));
            t.insert("sensitivity".into(), Value::String(m.sensitivity.as_str().into()));
            root.insert("model".into(), Value::Table(t));
        }
        ParamSource::Raw(r) => {
            let mut t = Table::new();
            for (k, v) in [
                ("d1", r.d1),
                ("d2", r.d2),
                ("chi", r.chi),
                ("lambda", r.lambda),
                ("mu", r.mu),
                ("alpha", r.alpha),
                ("beta", r.beta),
                ("length", r.length),
            ] {
                t.insert(k.into(), float(v));
            }
            t.insert("sensitivity".into(), Value::String(r.sensitivity.as_str().into()));
            root.insert("raw".into(), Value::Table(t));
        }
    }
    let mut t = Table::new();
    match &config.command {
        Command::Analyze(a) => {
            t.insert("k_max".into(), Value::Integer(a.k_max as i64));
        }
        Command::Bifurcate(b) => {
            t.insert("k".into(), Value::Array(b.k.iter().map(|&k| Value::Integer(k as i64)).collect()));
        }
        Command::Simulate(s) => {
            if let Some(n) = s.n_cells {
                t.insert("n_cells".into(), Value::Integer(n as i64));
            }
            t.insert("t_end".into(), float(s.t_end));
            t.insert("dt_max".into(), float(s.dt_max));
            t.insert("snapshot_times".into(), floats(&s.snapshot_times));
            t.insert("stop_when_steady".into(), Value::Boolean(s.stop_when_steady));
            t.insert("initial_u".into(), floats(&[s.initial.u.0, s.initial.u.1]));
            t.insert("initial_v".into(), floats(&[s.initial.v.0, s.initial.v.1]));
            if let Some(b) = s.initial.base_u {
                t.insert("base_u".into(), float(b));
            }
            if let Some(b) = s.initial.base_v {
                t.insert("base_v".into(), float(b));
            }
            let scale = match s.initial.scale {
                WaveScale::Domain => "domain",
                WaveScale::Absolute => "absolute",
            };
            t.insert("initial_scale".into(), Value::String(scale.into()));
            t.insert("lengths".into(), floats(&s.lengths));
        }
        Command::Steady(s) => {
            t.insert("k".into(), Value::Integer(s.k as i64));
            t.insert("s_max".into(), float(s.s_max));
            t.insert("n_cells".into(), Value::Integer(s.n_cells as i64));
            if let Some(s0) = s.s0 {
                t.insert("s0".into(), float(s0));
            }
            t.insert("write_profiles".into(), Value::Boolean(s.write_profiles));
        }
    }
    root.insert(config.command.name().into(), Value::Table(t));
    let mut out = Table::new();
    if let Some(d) = &config.output.dir {
        out.insert("dir".into(), Value::String(d.clone()));
    }
    out.insert("cadence".into(), Value::Integer(config.output.cadence as i64));
    root.insert("output".into(), Value::Table(out));
    root
}

pub fn to_toml(config: &RunConfig) -> String {
    toml::to_string(&to_table(config)).expect("tables of plain values serialize")
}

/// Sets a dotted key (`model.chi`, `simulate.t_end`, or a bare model key
/// such as `chi`) to a number.
pub fn set_number(root: &mut Table, key: &str, value: f64) -> Result<(), ConfigError> {
    let (section, leaf) = match key.split_once('.') {
        Some((s, l)) => (s, l),
        None if MODEL_KEYS.contains(&key) => {
            if root.contains_key("raw") {
                ("raw", key)
            } else {
                ("model", key)
            }
        }
        None => {
            return Err(ConfigError {
                path: key.into(),
                message: "use section.key for non-model parameters".into(),
            })
        }
    };
    if !TABLES.contains(&section) {
        return Err(ConfigError {
            path: key.into(),
            message: format!("unknown section `{section}`"),
        });
    }
    // a flat model key would clash with the one we add to [model]
    if section == "model" {
        root.remove(leaf);
    }
    let entry = root
        .entry(section.to_string())
        .or_insert_with(|| Value::Table(Table::new()));
    let Value::Table(t) = entry else {
        return Err(ConfigError {
            path: section.into(),
            message: "expected a table".into(),
        });
    };
    let v = if value.fract() == 0.0 && ["n_cells", "k", "k_max", "cadence"].contains(&leaf) {
        Value::Integer(value as i64)
    } else {
        Value::Float(value)
    };
    t.insert(leaf.to_string(), v);
    Ok(())
}
