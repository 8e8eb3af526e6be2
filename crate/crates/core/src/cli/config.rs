//! Run configuration files.
//!
//! A TOML document with up to four sections:
//!
//! ```toml
//! [engine]
//! n_farmlets = 10
//! dsps_per_farmlet = 5
//! ticks = 10000
//! error_rate = 0.01
//! check_cost = 1
//! check_fanout = "round-robin"   # or "all-peers"
//! queue_mode = "per-dsp"         # or "shared"
//! seed = [362436069, 521288629]
//! budget_cap = false
//! budget_interval = 100
//! budget_pa = 80
//! budget_os = 10
//!
//! [scheduler]
//! d = 0.5
//! c = 1.0
//! epsilon = 1e-9
//!
//! [model]
//! capacity = 1000
//! base_rate = 20
//! arrival_rate = 12.0            # default: 0.6 * base_rate
//! penalty_e1 = 0.7               # ... through penalty_e10
//!
//! [sweep]
//! d_min = 0.0001                 # or an explicit d_values = [...]
//! d_max = 3.0
//! d_points = 12
//! error_rates = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1]
//! replicates = 1
//! ```
//!
//! Every key is optional. Unknown sections and keys are rejected.

use std::fmt::Write as _;

use thiserror::Error;
use toml::{Table, Value};

use crate::engine::{CheckFanout, ConfigError, EngineConfig, QueueMode};
use crate::model::FaultId;
use crate::sweep::{log_spaced, SweepError, SweepGrid};

const ENGINE_KEYS: &[&str] = &[
    "n_farmlets",
    "dsps_per_farmlet",
    "ticks",
    "error_rate",
    "check_cost",
    "check_fanout",
    "queue_mode",
    "seed",
    "budget_cap",
    "budget_interval",
    "budget_pa",
    "budget_os",
];
const SCHEDULER_KEYS: &[&str] = &["d", "c", "epsilon"];
const MODEL_KEYS: &[&str] = &[
    "capacity",
    "base_rate",
    "arrival_rate",
    "penalty_e1",
    "penalty_e2",
    "penalty_e3",
    "penalty_e4",
    "penalty_e5",
    "penalty_e6",
    "penalty_e7",
    "penalty_e8",
    "penalty_e9",
    "penalty_e10",
];
const SWEEP_KEYS: &[&str] = &["d_values", "d_min", "d_max", "d_points", "error_rates", "replicates"];
const SECTIONS: &[(&str, &[&str])] = &[
    ("engine", ENGINE_KEYS),
    ("scheduler", SCHEDULER_KEYS),
    ("model", MODEL_KEYS),
    ("sweep", SWEEP_KEYS),
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown section [{section}]{}", hint(suggestion))]
    UnknownSection {
        section: String,
        suggestion: Option<String>,
    },
    #[error("unknown key {path}{}", hint(suggestion))]
    UnknownKey {
        path: String,
        suggestion: Option<String>,
    },
    #[error("{path}: expected {expected}")]
    Type { path: String, expected: &'static str },
    #[error("{0}")]
    Constraint(#[from] ConfigError),
    #[error("{0}")]
    Grid(#[from] SweepError),
}

fn hint(suggestion: &Option<String>) -> String {
    suggestion
        .as_ref()
        .map(|s| format!(" (did you mean `{s}`?)"))
        .unwrap_or_default()
}

/// Engine settings plus the sweep grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub engine: EngineConfig,
    pub grid: SweepGrid,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ParseError> {
        self.engine.validate()?;
        self.grid.validate()?;
        Ok(())
    }
}

fn nearest(word: &str, candidates: &[&str]) -> Option<String> {
    candidates
        .iter()
        .map(|c| (strsim::levenshtein(word, c), *c))
        .filter(|(dist, c)| *dist <= 3.max(c.len() / 3))
        .min()
        .map(|(_, c)| c.to_string())
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Typed access to one section's values.
struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
}

impl<'a> Section<'a> {
    fn path(&self, key: &str) -> String {
        format!("[{}].{}", self.name, key)
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn type_err(&self, key: &str, expected: &'static str) -> ParseError {
        ParseError::Type {
            path: self.path(key),
            expected,
        }
    }

    fn float(&self, key: &str) -> Result<Option<f64>, ParseError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(*f)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(self.type_err(key, "a number")),
        }
    }

    fn uint<T: TryFrom<i64>>(&self, key: &str) -> Result<Option<T>, ParseError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) => T::try_from(*i)
                .map(Some)
                .map_err(|_| ParseError::Constraint(ConfigError::new(self.path(key), format!("{i} is out of range")))),
            Some(_) => Err(self.type_err(key, "a non-negative integer")),
        }
    }

    fn boolean(&self, key: &str) -> Result<Option<bool>, ParseError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(_) => Err(self.type_err(key, "true or false")),
        }
    }

    fn string(&self, key: &str) -> Result<Option<&'a str>, ParseError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(_) => Err(self.type_err(key, "a string")),
        }
    }

    fn floats(&self, key: &str) -> Result<Option<Vec<f64>>, ParseError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::Float(f) => Ok(*f),
                    Value::Integer(i) => Ok(*i as f64),
                    _ => Err(self.type_err(key, "an array of numbers")),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(_) => Err(self.type_err(key, "an array of numbers")),
        }
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ParseError> {
    let doc: Table = text.parse().map_err(|e: toml::de::Error| ParseError::Syntax {
        line: e.span().map_or(1, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;

    for (name, value) in &doc {
        let Some((_, keys)) = SECTIONS.iter().find(|(s, _)| s == name) else {
            let names: Vec<&str> = SECTIONS.iter().map(|(s, _)| *s).collect();
            return Err(ParseError::UnknownSection {
                section: name.clone(),
                suggestion: nearest(name, &names),
            });
        };
        let Value::Table(table) = value else {
            return Err(ParseError::Type {
                path: format!("[{name}]"),
                expected: "a section",
            });
        };
        if let Some(key) = table.keys().find(|k| !keys.contains(&k.as_str())) {
            return Err(ParseError::UnknownKey {
                path: format!("[{name}].{key}"),
                suggestion: nearest(key, keys),
            });
        }
    }

    let section = |name: &'static str| Section {
        name,
        table: doc.get(name).and_then(Value::as_table),
    };
    let (eng, sch, mdl, swp) = (section("engine"), section("scheduler"), section("model"), section("sweep"));

    let mut cfg = RunConfig::default();
    let e = &mut cfg.engine;
    if let Some(v) = eng.uint("n_farmlets")? {
        e.n_farmlets = v;
    }
    if let Some(v) = eng.uint("dsps_per_farmlet")? {
        e.dsps_per_farmlet = v;
    }
    if let Some(v) = eng.uint("ticks")? {
        e.ticks = v;
    }
    if let Some(v) = eng.float("error_rate")? {
        e.error_rate = v;
    }
    if let Some(v) = eng.uint("check_cost")? {
        e.check_cost = v;
    }
    if let Some(v) = eng.string("check_fanout")? {
        e.check_fanout = CheckFanout::parse(v).ok_or_else(|| eng.type_err("check_fanout", "\"round-robin\" or \"all-peers\""))?;
    }
    if let Some(v) = eng.string("queue_mode")? {
        e.queue_mode = QueueMode::parse(v).ok_or_else(|| eng.type_err("queue_mode", "\"per-dsp\" or \"shared\""))?;
    }
    if let Some(v) = eng.get("seed") {
        let pair = v
            .as_array()
            .filter(|a| a.len() == 2)
            .and_then(|a| {
                let z = a[0].as_integer().and_then(|x| u32::try_from(x).ok())?;
                let w = a[1].as_integer().and_then(|x| u32::try_from(x).ok())?;
                Some((z, w))
            })
            .ok_or_else(|| eng.type_err("seed", "two unsigned 32-bit integers [z, w]"))?;
        e.seed = pair;
    }
    if let Some(v) = eng.boolean("budget_cap")? {
        e.budget_cap = v;
    }
    if let Some(v) = eng.uint("budget_interval")? {
        e.budget.interval = v;
    }
    if let Some(v) = eng.uint("budget_pa")? {
        e.budget.pa = v;
    }
    if let Some(v) = eng.uint("budget_os")? {
        e.budget.os = v;
    }

    if let Some(v) = sch.float("d")? {
        e.scheduler.d = v;
    }
    if let Some(v) = sch.float("c")? {
        e.scheduler.c = v;
    }
    if let Some(v) = sch.float("epsilon")? {
        e.scheduler.epsilon = v;
    }

    if let Some(v) = mdl.uint("capacity")? {
        e.model.capacity = v;
    }
    if let Some(v) = mdl.uint("base_rate")? {
        e.model.base_rate = v;
    }
    if let Some(v) = mdl.float("arrival_rate")? {
        e.model.arrival_rate = Some(v);
    }
    for id in FaultId::ALL {
        if let Some(v) = mdl.float(&format!("penalty_{id}"))? {
            e.model.penalties.set(id, v);
        }
    }

    let g = &mut cfg.grid;
    let spaced = ["d_min", "d_max", "d_points"].iter().any(|k| swp.get(k).is_some());
    if let Some(v) = swp.floats("d_values")? {
        if spaced {
            return Err(ConfigError::new(
                swp.path("d_values"),
                "cannot be combined with d_min/d_max/d_points",
            )
            .into());
        }
        g.d_values = v;
    } else if spaced {
        let lo = swp.float("d_min")?.unwrap_or(1e-4);
        let hi = swp.float("d_max")?.unwrap_or(3.0);
        let n: usize = swp.uint("d_points")?.unwrap_or(12);
        if !(lo > 0.0 && hi > lo && n >= 1) {
            return Err(ConfigError::new(
                swp.path("d_min"),
                format!("need 0 < d_min < d_max and d_points >= 1, got {lo}, {hi}, {n}"),
            )
            .into());
        }
        g.d_values = log_spaced(lo, hi, n);
    }
    if let Some(v) = swp.floats("error_rates")? {
        g.error_rates = v;
    }
    if let Some(v) = swp.uint("replicates")? {
        g.replicates = v;
    }

    cfg.validate()?;
    Ok(cfg)
}

/// Renders every setting as a configuration document that parses back to
/// an identical [`RunConfig`].
pub fn dump_config(cfg: &RunConfig) -> String {
    let e = &cfg.engine;
    let mut out = String::new();
    let floats = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
    // writing to a String cannot fail
    let _ = writeln!(out, "[engine]");
    let _ = writeln!(out, "n_farmlets = {}", e.n_farmlets);
    let _ = writeln!(out, "dsps_per_farmlet = {}", e.dsps_per_farmlet);
    let _ = writeln!(out, "ticks = {}", e.ticks);
    let _ = writeln!(out, "error_rate = {:?}", e.error_rate);
    let _ = writeln!(out, "check_cost = {}", e.check_cost);
    let _ = writeln!(out, "check_fanout = \"{}\"", e.check_fanout.as_str());
    let _ = writeln!(out, "queue_mode = \"{}\"", e.queue_mode.as_str());
    let _ = writeln!(out, "seed = [{}, {}]", e.seed.0, e.seed.1);
    let _ = writeln!(out, "budget_cap = {}", e.budget_cap);
    let _ = writeln!(out, "budget_interval = {}", e.budget.interval);
    let _ = writeln!(out, "budget_pa = {}", e.budget.pa);
    let _ = writeln!(out, "budget_os = {}", e.budget.os);
    let _ = writeln!(out, "\n[scheduler]");
    let _ = writeln!(out, "d = {:?}", e.scheduler.d);
    let _ = writeln!(out, "c = {:?}", e.scheduler.c);
    let _ = writeln!(out, "epsilon = {:?}", e.scheduler.epsilon);
    let _ = writeln!(out, "\n[model]");
    let _ = writeln!(out, "capacity = {}", e.model.capacity);
    let _ = writeln!(out, "base_rate = {}", e.model.base_rate);
    if let Some(a) = e.model.arrival_rate {
        let _ = writeln!(out, "arrival_rate = {a:?}");
    }
    for id in FaultId::ALL {
        let _ = writeln!(out, "penalty_{id} = {:?}", e.model.penalties.get(id));
    }
    let _ = writeln!(out, "\n[sweep]");
    let _ = writeln!(out, "d_values = [{}]", floats(&cfg.grid.d_values));
    let _ = writeln!(out, "error_rates = [{}]", floats(&cfg.grid.error_rates));
    let _ = writeln!(out, "replicates = {}", cfg.grid.replicates);
    out
}
