//! Sweep execution behind the `sensor` command: configuration, per-row
//! evaluation with an on-disk cache, CSV tables and SVG figures.
//!
//! Every task turns its configuration into a list of independent row jobs.
//! Jobs run on the worker pool, results are merged by index, and a failing
//! job becomes a row with a `failed: ...` status instead of aborting the run.

pub mod cache;
pub mod config;
pub mod svg;
pub mod table;
mod tasks;

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::Serialize;

pub use cache::{RowCache, CACHE_ENV};
pub use config::{SweepConfig, Task};
pub use svg::{emit_svg, PlotKind};
pub use table::{Cell, ColumnType, Table};
pub use tasks::random_oracle_rings;

use crate::error::{Error, Result};
use crate::par::{self, Execution};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Process exit code for an error: 2 for configuration problems, 3 for
/// computation failures, 4 for I/O.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Validation(_) | Error::Size { .. } => 2,
        Error::Io(_) => 4,
        Error::AtPoint { source, .. } => exit_code(source),
        Error::Numerical { .. } | Error::Degenerate { .. } | Error::GapClosed { .. } => 3,
    }
}

/// A table to write, with an optional figure.
pub(crate) struct Output {
    pub name: String,
    pub table: Table,
    pub plot: Option<(PlotKind, String)>,
    /// Extra figures drawn from derived tables that are not written as CSV.
    pub extra_plots: Vec<(String, Table, PlotKind, String)>,
}

impl Output {
    pub fn new(name: &str, table: Table) -> Self {
        Output { name: name.into(), table, plot: None, extra_plots: Vec::new() }
    }

    pub fn with_plot(mut self, kind: PlotKind, title: impl Into<String>) -> Self {
        self.plot = Some((kind, title.into()));
        self
    }
}

pub(crate) struct TaskOutput {
    pub outputs: Vec<Output>,
    /// Rows of the main table and how many of them failed.
    pub rows: usize,
    pub failed: usize,
    /// A check the task performs itself (oracle agreement) did not hold.
    pub check_failure: Option<String>,
}

/// Shared state of one run.
pub(crate) struct Ctx<'a> {
    pub cfg: &'a SweepConfig,
    pub cache: &'a RowCache,
    pub exec: Execution,
}

pub(crate) type RowResult<R> = std::result::Result<R, String>;

impl Ctx<'_> {
    /// Evaluate `eval` on every point, reusing cached rows. The cache key is
    /// the task name plus the serialized point, so a point must carry every
    /// input its row depends on. Failed rows are not cached.
    pub fn rows<P, R, F>(&self, kind: &str, points: &[P], exec: Execution, eval: F) -> Result<Vec<RowResult<R>>>
    where
        P: Serialize + Sync,
        R: Serialize + DeserializeOwned + Send,
        F: Fn(&P) -> Result<R> + Sync + Send,
    {
        let outcomes = par::map(points, exec, |p| -> Result<RowResult<R>> {
            let key = RowCache::key(kind, p);
            if let Some(hit) = self.cache.get::<R>(kind, &key) {
                return Ok(Ok(hit));
            }
            match eval(p) {
                Ok(r) => {
                    self.cache.put(kind, &key, &r)?;
                    Ok(Ok(r))
                }
                Err(e @ Error::Io(_)) => Err(e),
                Err(e) => Ok(Err(e.to_string())),
            }
        });
        outcomes.into_iter().collect()
    }

    /// Inner parallelism for work done inside one row.
    pub fn inner(&self, n_rows: usize) -> Execution {
        if n_rows > 1 {
            Execution::Sequential
        } else {
            self.exec
        }
    }
}

/// Where and how to run.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    /// Cache directory; `None` uses `$SENSOR_CACHE_DIR` or `<out>/.cache`.
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub task: String,
    pub config_sha256: String,
    pub files: Vec<PathBuf>,
    pub rows: usize,
    pub failed: usize,
    pub computed: usize,
    pub cached: usize,
}

/// Run the configured task and write its tables, figures and a
/// `run.meta.json` sidecar into `opts.out`.
///
/// Files are written even when every row failed; the error returned then
/// carries the computation-failure exit code.
pub fn run(cfg: &SweepConfig, opts: &RunOptions) -> Result<RunReport> {
    cfg.validate()?;
    let hash = cfg.hash();
    std::fs::create_dir_all(&opts.out)?;
    let cache = match &opts.cache_dir {
        Some(d) => RowCache::new(d),
        None => RowCache::for_output(&opts.out),
    };
    let ctx = Ctx { cfg, cache: &cache, exec: Execution::from_workers(cfg.workers) };
    let result = tasks::run_task(&ctx)?;

    let mut files = Vec::new();
    for out in &result.outputs {
        let mut t = out.table.clone();
        let mut meta = vec![
            ("version".to_string(), VERSION.to_string()),
            ("task".to_string(), cfg.task.name().to_string()),
            ("table".to_string(), out.name.clone()),
            ("config_sha256".to_string(), hash.clone()),
        ];
        meta.append(&mut t.meta);
        t.meta = meta;
        let path = opts.out.join(format!("{}.csv", out.name));
        t.save(&path)?;
        files.push(path);
        let figures = out
            .plot
            .iter()
            .map(|(k, title)| (out.name.clone(), &out.table, k, title))
            .chain(out.extra_plots.iter().map(|(n, t, k, title)| (n.clone(), t, k, title)));
        for (name, table, kind, title) in figures {
            if !cfg.plot.enabled {
                break;
            }
            let path = opts.out.join(format!("{name}.svg"));
            let svg = svg::render(table, kind, title)?;
            let svg = svg.replacen('\n', &format!("\n<!-- config_sha256: {hash} version: {VERSION} -->\n"), 1);
            table::write_atomic(&path, svg.as_bytes())?;
            files.push(path);
        }
    }

    let report = RunReport {
        task: cfg.task.name().into(),
        config_sha256: hash.clone(),
        files,
        rows: result.rows,
        failed: result.failed,
        computed: cache.misses(),
        cached: cache.hits(),
    };
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = serde_json::json!({
        "version": VERSION,
        "task": cfg.task.name(),
        "config_sha256": hash,
        "timestamp_unix": timestamp,
        "workers": cfg.workers,
        "cache_dir": cache.root(),
        "report": &report,
        "config": cfg,
    });
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Config(e.to_string()))?;
    table::write_atomic(&opts.out.join("run.meta.json"), text.as_bytes())?;

    if result.rows > 0 && result.failed == result.rows {
        return Err(Error::numerical(
            format!("all {} rows failed", result.rows),
            format!("task {}", cfg.task.name()),
        ));
    }
    if let Some(msg) = result.check_failure {
        return Err(Error::numerical(msg, format!("task {}", cfg.task.name())));
    }
    Ok(report)
}

/// Load a JSON config file and apply overrides; I/O problems reading the
/// file are configuration errors.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<SweepConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    SweepConfig::from_json(&text, overrides)
}
