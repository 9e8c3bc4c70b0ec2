//! Run configuration: a JSON file plus dotted `key=value` overrides.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::global::OptimizeOptions;
use crate::qfi::QfiMethod;
use crate::ssh::SshChainSpec;
use crate::xy::{Boundary, XYChainSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    QfiScan,
    PhaseDiagram,
    Collapse,
    GlobalOpt,
    SshBands,
    SshQfi,
    SshWinding,
    OracleCheck,
}

impl Task {
    pub const ALL: [Task; 8] = [
        Task::QfiScan,
        Task::PhaseDiagram,
        Task::Collapse,
        Task::GlobalOpt,
        Task::SshBands,
        Task::SshQfi,
        Task::SshWinding,
        Task::OracleCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::QfiScan => "qfi-scan",
            Task::PhaseDiagram => "phase-diagram",
            Task::Collapse => "collapse",
            Task::GlobalOpt => "global-opt",
            Task::SshBands => "ssh-bands",
            Task::SshQfi => "ssh-qfi",
            Task::SshWinding => "ssh-winding",
            Task::OracleCheck => "oracle-check",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown task '{name}'")))
    }
}

/// Modular XY chain parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct XyModel {
    pub n_sites: usize,
    pub cell_size: usize,
    #[serde(rename = "J")]
    pub inter_coupling: f64,
    #[serde(rename = "J0")]
    pub intra_coupling: f64,
    pub gamma: f64,
    pub h: f64,
    pub boundary: Boundary,
}

impl Default for XyModel {
    fn default() -> Self {
        XyModel {
            n_sites: 100,
            cell_size: 2,
            inter_coupling: 0.4,
            intra_coupling: 1.0,
            gamma: 0.3,
            h: 0.0,
            boundary: Boundary::Antiperiodic,
        }
    }
}

impl XyModel {
    pub fn spec(&self) -> Result<XYChainSpec> {
        let s = XYChainSpec::new(self.n_sites, self.cell_size)?
            .with_inter_coupling(self.inter_coupling)
            .with_intra_coupling(self.intra_coupling)
            .with_anisotropy(self.gamma)
            .with_field(self.h)
            .with_boundary(self.boundary);
        s.validate()?;
        Ok(s)
    }

    /// Set a named parameter; `N` resizes the chain.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "h" => self.h = value,
            "J" => self.inter_coupling = value,
            "J0" => self.intra_coupling = value,
            "gamma" => self.gamma = value,
            "N" => self.n_sites = as_count(name, value)?,
            _ => return Err(Error::Config(format!("unknown XY parameter '{name}'"))),
        }
        Ok(())
    }
}

/// Modular SSH chain parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SshModel {
    pub dimers_per_cell: usize,
    #[serde(rename = "J2")]
    pub j2: f64,
    #[serde(rename = "J")]
    pub inter_coupling: f64,
    pub n_cells: usize,
}

impl Default for SshModel {
    fn default() -> Self {
        SshModel { dimers_per_cell: 2, j2: 2.0, inter_coupling: 1.0, n_cells: 100 }
    }
}

impl SshModel {
    pub fn spec(&self) -> Result<SshChainSpec> {
        SshChainSpec::new(self.dimers_per_cell, self.j2, self.inter_coupling, self.n_cells)
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "J2" => self.j2 = value,
            "J" => self.inter_coupling = value,
            "l" => self.n_cells = as_count(name, value)?,
            _ => return Err(Error::Config(format!("unknown SSH parameter '{name}'"))),
        }
        Ok(())
    }
}

fn as_count(name: &str, value: f64) -> Result<usize> {
    // geometric axes land a few ulps away from integers
    let rounded = value.round();
    if rounded >= 1.0 && (value - rounded).abs() < 1e-6 && rounded < 1e9 {
        Ok(rounded as usize)
    } else {
        Err(Error::Config(format!("{name} must be a positive integer, got {value}")))
    }
}

/// One swept parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    /// Geometric instead of linear spacing.
    #[serde(default)]
    pub log: bool,
}

impl AxisConfig {
    pub fn values(&self) -> Vec<f64> {
        let n = self.count;
        if n == 1 {
            return vec![self.min];
        }
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                if self.log {
                    self.min * (self.max / self.min).powf(t)
                } else {
                    self.min + (self.max - self.min) * t
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ColorScale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotConfig {
    pub enabled: bool,
    pub scale: ColorScale,
}

impl Default for PlotConfig {
    fn default() -> Self {
        PlotConfig { enabled: true, scale: ColorScale::Linear }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollapseConfig {
    pub sizes: Vec<usize>,
    /// Critical fields to fit; empty means the positive transfer-matrix roots.
    pub h_c: Vec<f64>,
    /// Data at `h = h_c + x/N` for `x` in `[-x_range, x_range]`.
    pub x_range: f64,
    pub points: usize,
    pub window: f64,
    pub fit_h_c: bool,
    /// Fit an existing `N, h, Q` CSV instead of computing the data.
    pub dataset: Option<String>,
}

impl Default for CollapseConfig {
    fn default() -> Self {
        CollapseConfig {
            sizes: vec![160, 320, 640, 1280],
            h_c: vec![],
            x_range: 4.0,
            points: 41,
            window: 0.1,
            fit_h_c: false,
            dataset: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalConfig {
    pub widths: Vec<f64>,
    pub h0: f64,
    pub quadrature_points: usize,
    pub center_min: f64,
    pub center_max: f64,
    pub scan_points: usize,
    /// When non-empty, also fit `G_opt ∼ N^{-b}` over these sizes.
    pub sizes: Vec<usize>,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        let o = OptimizeOptions::default();
        GlobalConfig {
            widths: vec![0.2, 0.5, 1.0],
            h0: 0.0,
            quadrature_points: 51,
            center_min: o.center_range.0,
            center_max: o.center_range.1,
            scan_points: o.scan_points,
            sizes: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub cases: usize,
    pub sizes: Vec<usize>,
    pub tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { cases: 20, sizes: vec![6, 8, 10], tolerance: 1e-6 }
    }
}

/// Complete description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub task: Task,
    #[serde(default)]
    pub xy: XyModel,
    #[serde(default)]
    pub ssh: SshModel,
    #[serde(default)]
    pub axes: Vec<AxisConfig>,
    /// Parameter the QFI is taken with respect to.
    #[serde(default = "default_parameter")]
    pub parameter: String,
    #[serde(default)]
    pub method: Option<QfiMethod>,
    #[serde(default)]
    pub collapse: CollapseConfig,
    #[serde(default)]
    pub global: GlobalConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    /// Momentum samples for winding numbers and gap searches.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub plot: PlotConfig,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Output directory; the command line takes precedence.
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

fn default_parameter() -> String {
    "h".into()
}

fn default_samples() -> usize {
    401
}

fn default_workers() -> usize {
    1
}

impl SweepConfig {
    /// Parse JSON text, apply `key=value` overrides, and validate.
    pub fn from_json(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config is not valid JSON: {e}")))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: SweepConfig =
            serde_json::from_value(value).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.axes.len() > 2 {
            return Err(Error::Config("at most two swept axes".into()));
        }
        for a in &self.axes {
            if a.count == 0 {
                return Err(Error::Config(format!("axis '{}' needs count >= 1", a.name)));
            }
            if !(a.min.is_finite() && a.max.is_finite()) || (a.log && !(a.min > 0.0 && a.max > 0.0)) {
                return Err(Error::Config(format!("axis '{}' has an invalid range", a.name)));
            }
            let known: &[&str] = match self.task {
                Task::QfiScan => &["h", "J", "J0", "gamma", "N"],
                Task::PhaseDiagram => &["h", "J", "gamma"],
                Task::SshBands => &["p"],
                Task::SshQfi => &["J", "J2", "l", "p"],
                Task::SshWinding => &["J", "J2"],
                Task::Collapse | Task::GlobalOpt | Task::OracleCheck => &[],
            };
            if !known.contains(&a.name.as_str()) {
                return Err(Error::Config(format!(
                    "axis '{}' is not a parameter of task {} (expected one of {:?})",
                    a.name,
                    self.task.name(),
                    known
                )));
            }
        }
        if self.axes.len() == 2 && self.axes[0].name == self.axes[1].name {
            return Err(Error::Config("the two axes must differ".into()));
        }
        if crate::xy::Parameter::from_name(&self.parameter).is_none() {
            return Err(Error::Config(format!("unknown QFI parameter '{}'", self.parameter)));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, excluding the worker count and the
    /// output directory, neither of which changes results.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).unwrap_or(Value::Null);
        if let Value::Object(m) = &mut v {
            m.remove("workers");
            m.remove("out");
        }
        sha256_hex(canonical(&v).as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// JSON text with object keys sorted at every level.
pub fn canonical(v: &Value) -> String {
    match v {
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            let body: Vec<String> = keys
                .into_iter()
                .map(|k| format!("{}:{}", Value::String(k.clone()), canonical(&m[k])))
                .collect();
            format!("{{{}}}", body.join(","))
        }
        Value::Array(a) => format!("[{}]", a.iter().map(canonical).collect::<Vec<_>>().join(",")),
        other => other.to_string(),
    }
}

/// Apply `a.b.c=value`; the value is parsed as JSON when possible and kept
/// as a string otherwise. Numeric path segments index into arrays.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("override key '{path}' has an empty segment")));
    }
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    for (i, key) in keys.iter().enumerate() {
        let last = i + 1 == keys.len();
        if node.is_null() {
            *node = Value::Object(Map::new());
        }
        node = match node {
            Value::Array(items) => {
                let len = items.len();
                let idx: usize = key
                    .parse()
                    .map_err(|_| Error::Config(format!("'{key}' in '{path}' must index an array")))?;
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("index {idx} out of range in '{path}' (length {len})")))?;
                if last {
                    *slot = parsed;
                    return Ok(());
                }
                slot
            }
            Value::Object(map) => {
                if last {
                    map.insert(key.to_string(), parsed);
                    return Ok(());
                }
                map.entry(key.to_string()).or_insert(Value::Null)
            }
            _ => return Err(Error::Config(format!("'{key}' in '{path}' is not inside an object"))),
        };
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = SweepConfig::from_json(r#"{"task": "qfi-scan"}"#, &[]).unwrap();
        assert_eq!(c.task, Task::QfiScan);
        assert_eq!(c.xy, XyModel::default());
        assert_eq!(c.workers, 1);
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let c = SweepConfig::from_json(
            r#"{"task": "qfi-scan", "axes": [{"name": "h", "min": 0, "max": 1, "count": 3}]}"#,
            &["xy.J=0.7".into(), "axes.0.count=5".into(), "xy.boundary=periodic".into()],
        )
        .unwrap();
        assert_eq!(c.xy.inter_coupling, 0.7);
        assert_eq!(c.axes[0].count, 5);
        assert_eq!(c.xy.boundary, Boundary::Periodic);
    }

    #[test]
    fn bad_inputs_are_config_errors() {
        for (text, over) in [
            (r#"{"task": "nope"}"#, vec![]),
            (r#"{"task": "qfi-scan", "extra": 1}"#, vec![]),
            (r#"{"task": "qfi-scan", "axes": [{"name": "zeta", "min": 0, "max": 1, "count": 3}]}"#, vec![]),
            (r#"{"task": "qfi-scan", "axes": [{"name": "h", "min": 0, "max": 1, "count": 0}]}"#, vec![]),
            (r#"{"task": "qfi-scan"}"#, vec!["novalue".to_string()]),
            ("not json", vec![]),
        ] {
            assert!(matches!(SweepConfig::from_json(text, &over), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn hash_ignores_workers_and_key_order() {
        let a = SweepConfig::from_json(r#"{"task": "qfi-scan", "seed": 3, "workers": 1}"#, &[]).unwrap();
        let b = SweepConfig::from_json(r#"{"workers": 8, "seed": 3, "task": "qfi-scan"}"#, &[]).unwrap();
        let c = SweepConfig::from_json(r#"{"task": "qfi-scan", "seed": 4}"#, &[]).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn log_axis_is_geometric() {
        let a = AxisConfig { name: "J".into(), min: 0.1, max: 10.0, count: 3, log: true };
        let v = a.values();
        assert!((v[1] - 1.0).abs() < 1e-12);
    }
}
