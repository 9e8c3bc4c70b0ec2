use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{AxisConfig, ColorScale, SshModel, Task, XyModel};
use super::svg::PlotKind;
use super::table::{Cell, ColumnType, Table};
use super::{Ctx, Output, RowResult, TaskOutput};
use crate::ed::compare_with_free_fermion;
use crate::error::{Error, Result};
use crate::global::{optimize_control_field, CachedSource, DirectSource, GlobalSensingProblem, OptimizeOptions};
use crate::par::Execution;
use crate::phase::{find_critical_fields, Branch, CellParams, Region, TransferMatrixCell};
use crate::qfi::{qfi, qfi_auto, QfiMethod};
use crate::scaling::{fit_collapse, fit_power_with_offset, loglog_slope, CollapseOptions, ScalingDataset, ScalingRecord};
use crate::ssh::{band_susceptibilities, bands_at, gap_closings, half_filling_qfi, winding_number};
use crate::xy::{Boundary, Parameter, XYChainSpec};

use ColumnType::{Int, Num, Text};

pub(crate) fn run_task(ctx: &Ctx) -> Result<TaskOutput> {
    match ctx.cfg.task {
        Task::QfiScan => qfi_scan(ctx),
        Task::PhaseDiagram => phase_diagram(ctx),
        Task::Collapse => collapse(ctx),
        Task::GlobalOpt => global_opt(ctx),
        Task::SshBands => ssh_bands(ctx),
        Task::SshQfi => ssh_qfi(ctx),
        Task::SshWinding => ssh_winding(ctx),
        Task::OracleCheck => oracle_check(ctx),
    }
}

/// Cartesian product of the axes, last axis fastest.
fn grid(axes: &[AxisConfig]) -> Vec<Vec<f64>> {
    let mut out = vec![vec![]];
    for a in axes {
        let vals = a.values();
        out = out
            .into_iter()
            .flat_map(|prefix| {
                vals.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

fn status<R>(r: &RowResult<R>) -> Cell {
    match r {
        Ok(_) => "ok".into(),
        Err(e) => format!("failed: {e}").into(),
    }
}

fn count_failed<R>(rows: &[RowResult<R>]) -> usize {
    rows.iter().filter(|r| r.is_err()).count()
}

fn at_point(index: usize, e: Error) -> Error {
    Error::Config(format!("grid point {index}: {e}"))
}

fn opt_num(x: Option<f64>) -> Cell {
    Cell::Num(x.unwrap_or(f64::NAN))
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn columns<'a>(names: impl IntoIterator<Item = &'a str>, ty: ColumnType) -> Vec<(&'a str, ColumnType)> {
    names.into_iter().map(|n| (n, ty)).collect()
}

/// Figure for a table over the swept axes: a line per row group for one
/// axis or when `series` is swept, a heatmap otherwise.
fn sweep_plot(axes: &[AxisConfig], value: &str, series: &str, scale: ColorScale) -> Option<PlotKind> {
    let log_y = scale == ColorScale::Log;
    match axes {
        [a] => Some(PlotKind::Lines { x: a.name.clone(), y: value.into(), group: vec![], log_y }),
        [a, b] if b.name == series => {
            Some(PlotKind::Lines { x: a.name.clone(), y: value.into(), group: vec![b.name.clone()], log_y })
        }
        [a, b] if a.name == series => {
            Some(PlotKind::Lines { x: b.name.clone(), y: value.into(), group: vec![a.name.clone()], log_y })
        }
        [a, b] => Some(PlotKind::Heatmap { x: a.name.clone(), y: b.name.clone(), value: value.into(), scale }),
        _ => None,
    }
}

// ---------------------------------------------------------------- qfi-scan

#[derive(Serialize)]
struct QfiPoint<'a> {
    model: &'a XyModel,
    parameter: &'a str,
    method: Option<QfiMethod>,
}

#[derive(Serialize, Deserialize)]
struct QfiRow {
    q: f64,
    method: QfiMethod,
    converged: bool,
    gap_closed: bool,
}

fn qfi_scan(ctx: &Ctx) -> Result<TaskOutput> {
    let cfg = ctx.cfg;
    let p = Parameter::from_name(&cfg.parameter).ok_or_else(|| Error::Config("unknown parameter".into()))?;
    let coords = grid(&cfg.axes);
    let mut models = Vec::with_capacity(coords.len());
    for (i, c) in coords.iter().enumerate() {
        let mut m = cfg.xy.clone();
        for (a, &v) in cfg.axes.iter().zip(c) {
            m.set(&a.name, v).map_err(|e| at_point(i, e))?;
        }
        m.spec().map_err(|e| at_point(i, e))?;
        models.push(m);
    }
    let points: Vec<QfiPoint> =
        models.iter().map(|m| QfiPoint { model: m, parameter: p.name(), method: cfg.method }).collect();
    let rows = ctx.rows("qfi-scan", &points, ctx.exec, |pt| {
        let spec = pt.model.spec()?;
        let r = match pt.method {
            Some(m) => qfi(&spec, p, m, None)?,
            None => qfi_auto(&spec, p)?,
        };
        if !r.value.is_finite() {
            return Err(Error::numerical(format!("QFI is {}", r.value), "qfi-scan"));
        }
        Ok(QfiRow { q: r.value, method: r.method, converged: r.converged, gap_closed: r.gap_closed })
    })?;

    let mut cols = columns(cfg.axes.iter().map(|a| a.name.as_str()), Num);
    cols.extend([("N", Int), ("Q", Num), ("Q_per_site", Num), ("method", Text), ("converged", Int), ("gap_closed", Int), ("status", Text)]);
    let mut table = Table::new(&cols);
    table.set_meta("parameter", p.name());
    for ((c, m), r) in coords.iter().zip(&models).zip(&rows) {
        let mut row: Vec<Cell> = c.iter().map(|&v| Cell::Num(v)).collect();
        let n = m.n_sites as f64;
        row.push(m.n_sites.into());
        match r {
            Ok(v) => row.extend([v.q.into(), (v.q / n).into(), v.method.name().into(), v.converged.into(), v.gap_closed.into()]),
            Err(_) => row.extend([f64::NAN.into(), f64::NAN.into(), "".into(), false.into(), false.into()]),
        }
        row.push(status(r));
        table.push(row)?;
    }
    let mut out = Output::new("qfi_scan", table);
    if let Some(k) = sweep_plot(&cfg.axes, "Q", "N", cfg.plot.scale) {
        out = out.with_plot(k, format!("QFI with respect to {}", p.name()));
    }
    Ok(TaskOutput { rows: rows.len(), failed: count_failed(&rows), outputs: vec![out], check_failure: None })
}

// ----------------------------------------------------------- phase-diagram

#[derive(Serialize)]
struct CellPoint {
    h: f64,
    j: f64,
    gamma: f64,
    r: usize,
}

#[derive(Serialize, Deserialize)]
struct CellRow {
    f_plus: f64,
    f_minus: f64,
    paramagnetic: bool,
}

#[derive(Serialize, Deserialize)]
struct RootRow {
    h: f64,
    plus: bool,
}

fn phase_diagram(ctx: &Ctx) -> Result<TaskOutput> {
    let cfg = ctx.cfg;
    if cfg.axes.is_empty() {
        return Err(Error::Config("phase-diagram needs one or two axes among h, J, gamma".into()));
    }
    let coords = grid(&cfg.axes);
    let r = cfg.xy.cell_size;
    let points: Vec<CellPoint> = coords
        .iter()
        .map(|c| {
            let mut p = CellPoint { h: cfg.xy.h, j: cfg.xy.inter_coupling, gamma: cfg.xy.gamma, r };
            for (a, &v) in cfg.axes.iter().zip(c) {
                match a.name.as_str() {
                    "h" => p.h = v,
                    "J" => p.j = v,
                    _ => p.gamma = v,
                }
            }
            p
        })
        .collect();
    for (i, p) in points.iter().enumerate() {
        CellParams::new(p.h, p.j, p.gamma, p.r).validate().map_err(|e| at_point(i, e))?;
    }
    let rows = ctx.rows("phase-diagram", &points, ctx.exec, |p| {
        let c = TransferMatrixCell::new(CellParams::new(p.h, p.j, p.gamma, p.r))?;
        Ok(CellRow {
            f_plus: c.branch_value(Branch::Plus),
            f_minus: c.branch_value(Branch::Minus),
            paramagnetic: c.region() == Region::Paramagnetic,
        })
    })?;

    // a point is on a boundary when a sign of f± differs from the next
    // point along either axis
    let counts: Vec<usize> = cfg.axes.iter().map(|a| a.count).collect();
    let signs = |i: usize| rows[i].as_ref().ok().map(|v| (v.f_plus > 0.0, v.f_minus > 0.0));
    let boundary = |i: usize| -> bool {
        let mut stride = 1;
        for (k, &n) in counts.iter().enumerate().rev() {
            let idx = (i / stride) % n;
            if idx + 1 < n {
                if let (Some(a), Some(b)) = (signs(i), signs(i + stride)) {
                    if a != b {
                        return true;
                    }
                }
            }
            stride *= counts[k];
        }
        false
    };

    let mut cols = columns(cfg.axes.iter().map(|a| a.name.as_str()), Num);
    cols.extend([("f_plus", Num), ("f_minus", Num), ("region", Text), ("paramagnetic", Int), ("boundary", Int), ("status", Text)]);
    let mut table = Table::new(&cols);
    table.set_meta("r", r.to_string());
    for (i, (c, row)) in coords.iter().zip(&rows).enumerate() {
        let mut cells: Vec<Cell> = c.iter().map(|&v| Cell::Num(v)).collect();
        match row {
            Ok(v) => cells.extend([
                v.f_plus.into(),
                v.f_minus.into(),
                if v.paramagnetic { "paramagnetic" } else { "ordered" }.into(),
                v.paramagnetic.into(),
                boundary(i).into(),
            ]),
            Err(_) => cells.extend([f64::NAN.into(), f64::NAN.into(), "".into(), Cell::Int(-1), false.into()]),
        }
        cells.push(status(row));
        table.push(cells)?;
    }
    let kind = match cfg.axes.as_slice() {
        [a] => PlotKind::Lines { x: a.name.clone(), y: "paramagnetic".into(), group: vec![], log_y: false },
        [a, b] => PlotKind::Heatmap {
            x: a.name.clone(),
            y: b.name.clone(),
            value: "paramagnetic".into(),
            scale: ColorScale::Linear,
        },
        _ => unreachable!("axes validated"),
    };
    let main = Output::new("phase_diagram", table).with_plot(kind, format!("paramagnetic regions, r = {r}"));

    // critical fields at the base couplings, over the swept field range
    let (lo, hi) = cfg.axes.iter().find(|a| a.name == "h").map(|a| (a.min.min(a.max), a.min.max(a.max))).unwrap_or((-1.5, 1.5));
    let base = CellPoint { h: 0.0, j: cfg.xy.inter_coupling, gamma: cfg.xy.gamma, r };
    let roots = ctx.rows("critical-fields", &[(&base, lo, hi)], ctx.exec, |(b, lo, hi)| {
        let set = find_critical_fields(b.j, b.gamma, b.r, (*lo, *hi), 1e-12)?;
        Ok(set.critical_fields.iter().map(|c| RootRow { h: c.h, plus: c.branch == Branch::Plus }).collect::<Vec<_>>())
    })?;
    let mut crit = Table::new(&[("h", Num), ("branch", Text), ("J", Num), ("gamma", Num), ("r", Int)]);
    match &roots[0] {
        Ok(list) => {
            for c in list {
                crit.push(vec![
                    c.h.into(),
                    if c.plus { Branch::Plus.label() } else { Branch::Minus.label() }.into(),
                    base.j.into(),
                    base.gamma.into(),
                    r.into(),
                ])?;
            }
        }
        Err(e) => crit.set_meta("error", e.clone()),
    }
    Ok(TaskOutput {
        rows: rows.len(),
        failed: count_failed(&rows),
        outputs: vec![main, Output::new("critical_fields", crit)],
        check_failure: None,
    })
}

// ----------------------------------------------------------------- collapse

#[derive(Serialize)]
struct FieldPoint<'a> {
    model: &'a XyModel,
}

#[derive(Serialize)]
struct FitPoint<'a> {
    h_c: f64,
    records: &'a [ScalingRecord],
    options: &'a CollapseOptions,
}

#[derive(Serialize, Deserialize)]
struct FitRow {
    beta: f64,
    nu: f64,
    beta_err: f64,
    nu_err: f64,
    h_c: f64,
    cost: f64,
    on_boundary: bool,
    slope: Option<f64>,
    slope_err: Option<f64>,
}

fn default_critical_fields(m: &XyModel) -> Result<Vec<f64>> {
    let set = find_critical_fields(m.inter_coupling, m.gamma, m.cell_size, (0.0, 1.5), 1e-12)?;
    Ok(set.positive())
}

/// `(h_c, N, x, h, Q)` records from an existing CSV with `N`, `h`, `Q`
/// columns and optionally `h_c`.
fn load_dataset(path: &str) -> Result<Vec<(Option<f64>, ScalingRecord)>> {
    let t = Table::load(std::path::Path::new(path)).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("cannot read dataset {path}: {io}")),
        other => other,
    })?;
    let ns = t.numbers("N")?;
    let hs = t.numbers("h")?;
    let qs = t.numbers("Q")?;
    let hc = t.numbers("h_c").ok();
    let mut out = Vec::new();
    for i in 0..t.len() {
        if !(ns[i] >= 1.0 && hs[i].is_finite() && qs[i] > 0.0 && qs[i].is_finite()) {
            continue;
        }
        out.push((hc.as_ref().map(|v| v[i]), ScalingRecord { n: ns[i] as usize, h: hs[i], q: qs[i] }));
    }
    Ok(out)
}

fn collapse(ctx: &Ctx) -> Result<TaskOutput> {
    let cfg = ctx.cfg;
    let cc = &cfg.collapse;
    let mut outputs = Vec::new();
    let (h_cs, data, data_rows, data_failed) = if let Some(path) = &cc.dataset {
        let recs = load_dataset(path)?;
        let h_cs = if cc.h_c.is_empty() {
            let mut v: Vec<f64> = recs.iter().filter_map(|r| r.0).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            if v.is_empty() {
                default_critical_fields(&cfg.xy)?
            } else {
                v
            }
        } else {
            cc.h_c.clone()
        };
        let per_hc: Vec<Vec<ScalingRecord>> = h_cs
            .iter()
            .map(|&h_c| recs.iter().filter(|r| r.0.is_none_or(|x| x == h_c)).map(|r| r.1).collect())
            .collect();
        let n = recs.len();
        (h_cs, per_hc, n, 0)
    } else {
        if cc.sizes.len() < 3 || cc.points < 2 || !(cc.x_range > 0.0) {
            return Err(Error::Config("collapse needs at least 3 sizes, 2 points and x_range > 0".into()));
        }
        let h_cs = if cc.h_c.is_empty() { default_critical_fields(&cfg.xy)? } else { cc.h_c.clone() };
        if h_cs.is_empty() {
            return Err(Error::Config("no critical field to fit; set collapse.h_c".into()));
        }
        let xs: Vec<f64> =
            (0..cc.points).map(|i| -cc.x_range + 2.0 * cc.x_range * i as f64 / (cc.points - 1) as f64).collect();
        let mut meta = Vec::new();
        let mut models = Vec::new();
        for &h_c in &h_cs {
            for &n in &cc.sizes {
                for &x in &xs {
                    let mut m = cfg.xy.clone();
                    m.n_sites = n;
                    m.h = h_c + x / n as f64;
                    m.spec().map_err(|e| at_point(models.len(), e))?;
                    meta.push((h_c, n, x));
                    models.push(m);
                }
            }
        }
        let points: Vec<FieldPoint> = models.iter().map(|m| FieldPoint { model: m }).collect();
        let rows = ctx.rows("collapse-data", &points, ctx.exec, |pt| {
            let r = qfi_auto(&pt.model.spec()?, Parameter::Field)?;
            if !(r.value.is_finite() && r.value > 0.0) {
                return Err(Error::numerical(format!("QFI is {}", r.value), "collapse data"));
            }
            Ok(r.value)
        })?;
        let mut table = Table::new(&[("h_c", Num), ("N", Int), ("x", Num), ("h", Num), ("Q", Num), ("status", Text)]);
        let mut per_hc: Vec<Vec<ScalingRecord>> = vec![Vec::new(); h_cs.len()];
        for (i, ((&(h_c, n, x), m), r)) in meta.iter().zip(&models).zip(&rows).enumerate() {
            let q = *r.as_ref().unwrap_or(&f64::NAN);
            table.push(vec![h_c.into(), n.into(), x.into(), m.h.into(), q.into(), status(r)])?;
            if r.is_ok() {
                per_hc[i / (cc.sizes.len() * xs.len())].push(ScalingRecord { n, h: m.h, q });
            }
        }
        let plot = PlotKind::Lines { x: "x".into(), y: "Q".into(), group: vec!["h_c".into(), "N".into()], log_y: true };
        outputs.push(Output::new("collapse_data", table).with_plot(plot, "QFI near the critical fields"));
        let failed = count_failed(&rows);
        (h_cs, per_hc, rows.len(), failed)
    };

    let opts = CollapseOptions { window: cc.window, fit_h_c: cc.fit_h_c, ..CollapseOptions::default() };
    let fit_points: Vec<FitPoint> =
        h_cs.iter().zip(&data).map(|(&h_c, recs)| FitPoint { h_c, records: recs, options: &opts }).collect();
    let inner = ctx.inner(fit_points.len());
    let fits = ctx.rows("collapse-fit", &fit_points, ctx.exec, |fp| {
        let ds = ScalingDataset::new(fp.records.to_vec())?;
        let f = fit_collapse(&ds, fp.h_c, fp.options, inner)?;
        Ok(FitRow {
            beta: f.beta,
            nu: f.nu,
            beta_err: f.beta_err,
            nu_err: f.nu_err,
            h_c: f.h_c,
            cost: f.collapse_cost,
            on_boundary: f.on_boundary,
            slope: f.slope_at_h_c.as_ref().map(|s| s.slope),
            slope_err: f.slope_at_h_c.as_ref().map(|s| s.stderr),
        })
    })?;
    let mut fit_table = Table::new(&[
        ("h_c", Num),
        ("beta", Num),
        ("nu", Num),
        ("beta_err", Num),
        ("nu_err", Num),
        ("h_c_fit", Num),
        ("cost", Num),
        ("on_boundary", Int),
        ("slope_at_h_c", Num),
        ("slope_err", Num),
        ("status", Text),
    ]);
    let mut scaled = Table::new(&[("h_c", Num), ("N", Int), ("scaled_x", Num), ("scaled_Q", Num)]);
    let mut extra = Vec::new();
    for (k, ((&h_c, recs), f)) in h_cs.iter().zip(&data).zip(&fits).enumerate() {
        let cells: Vec<Cell> = match f {
            Ok(v) => vec![
                v.beta.into(),
                v.nu.into(),
                v.beta_err.into(),
                v.nu_err.into(),
                v.h_c.into(),
                v.cost.into(),
                v.on_boundary.into(),
                opt_num(v.slope),
                opt_num(v.slope_err),
            ],
            Err(_) => {
                let mut c = vec![Cell::Num(f64::NAN); 6];
                c.push(false.into());
                c.extend([Cell::Num(f64::NAN), Cell::Num(f64::NAN)]);
                c
            }
        };
        let mut row = vec![Cell::Num(h_c)];
        row.extend(cells);
        row.push(status(f));
        fit_table.push(row)?;
        if let Ok(v) = f {
            let mut one = Table::new(&[("N", Int), ("scaled_x", Num), ("scaled_Q", Num)]);
            let mut sorted = recs.clone();
            sorted.sort_by(|a, b| a.n.cmp(&b.n).then(a.h.total_cmp(&b.h)));
            for rec in &sorted {
                let n = rec.n as f64;
                let sx = n.powf(1.0 / v.nu) * (rec.h - v.h_c);
                let sq = rec.q * n.powf(-v.beta / v.nu);
                scaled.push(vec![h_c.into(), rec.n.into(), sx.into(), sq.into()])?;
                one.push(vec![rec.n.into(), sx.into(), sq.into()])?;
            }
            let kind = PlotKind::Lines { x: "scaled_x".into(), y: "scaled_Q".into(), group: vec!["N".into()], log_y: false };
            let title = format!("collapse at h_c = {h_c:.4}: beta = {:.3}, nu = {:.3}", v.beta, v.nu);
            extra.push((format!("collapse_{k}"), one, kind, title));
        }
    }
    let mut scaled_out = Output::new("collapse_scaled", scaled);
    scaled_out.extra_plots = extra;
    outputs.push(Output::new("collapse_fit", fit_table));
    outputs.push(scaled_out);
    let fit_failed = count_failed(&fits);
    Ok(TaskOutput {
        rows: data_rows + fits.len(),
        failed: data_failed + fit_failed,
        outputs,
        check_failure: None,
    })
}

// --------------------------------------------------------------- global-opt

#[derive(Serialize)]
struct GlobalPoint<'a> {
    model: &'a XyModel,
    width: f64,
    h0: f64,
    quadrature_points: usize,
    options: &'a OptimizeOptions,
}

#[derive(Serialize, Deserialize)]
struct GlobalRow {
    h_ctr: f64,
    effective_center: f64,
    g_opt: f64,
    curve: Vec<(f64, f64)>,
}

fn global_opt(ctx: &Ctx) -> Result<TaskOutput> {
    let cfg = ctx.cfg;
    let g = &cfg.global;
    if g.widths.is_empty() {
        return Err(Error::Config("global.widths is empty".into()));
    }
    let sizes = if g.sizes.is_empty() { vec![cfg.xy.n_sites] } else { g.sizes.clone() };
    let opts = OptimizeOptions {
        center_range: (g.center_min, g.center_max),
        scan_points: g.scan_points,
        ..OptimizeOptions::default()
    };
    let mut models = Vec::new();
    for &n in &sizes {
        let mut m = cfg.xy.clone();
        m.n_sites = n;
        m.spec().map_err(|e| Error::Config(format!("N = {n}: {e}")))?;
        models.push(m);
    }
    let mut pairs = Vec::new();
    for &w in &g.widths {
        GlobalSensingProblem::new(g.h0, w, g.quadrature_points).map_err(|e| Error::Config(e.to_string()))?;
        for (k, &n) in sizes.iter().enumerate() {
            pairs.push((w, n, k));
        }
    }
    // one memoized QFI source per size, shared by every width
    let sources: Vec<CachedSource<DirectSource>> =
        models.iter().map(|m| m.spec().map(|s| CachedSource::new(DirectSource::new(s)))).collect::<Result<_>>()?;
    let points: Vec<GlobalPoint> = pairs
        .iter()
        .map(|&(w, _, k)| GlobalPoint { model: &models[k], width: w, h0: g.h0, quadrature_points: g.quadrature_points, options: &opts })
        .collect();
    let index: BTreeMap<(u64, usize), usize> = pairs.iter().map(|&(w, n, k)| ((w.to_bits(), n), k)).collect();
    let rows = ctx.rows("global-opt", &points, Execution::Sequential, |pt| {
        let problem = GlobalSensingProblem::new(pt.h0, pt.width, pt.quadrature_points)?;
        let k = index[&(pt.width.to_bits(), pt.model.n_sites)];
        let r = optimize_control_field(&problem, &sources[k], pt.options, ctx.exec)?;
        Ok(GlobalRow { h_ctr: r.h_ctr, effective_center: r.effective_center, g_opt: r.g_opt, curve: r.g_curve })
    })?;

    let mut main = Table::new(&[("width", Num), ("N", Int), ("h_ctr", Num), ("effective_center", Num), ("G_opt", Num), ("status", Text)]);
    let mut curve = Table::new(&[("width", Num), ("N", Int), ("h_ctr", Num), ("G", Num)]);
    for (&(w, n, _), r) in pairs.iter().zip(&rows) {
        match r {
            Ok(v) => {
                main.push(vec![w.into(), n.into(), v.h_ctr.into(), v.effective_center.into(), v.g_opt.into(), status(r)])?;
                for &(c, gv) in &v.curve {
                    curve.push(vec![w.into(), n.into(), c.into(), gv.into()])?;
                }
            }
            Err(_) => main.push(vec![w.into(), n.into(), f64::NAN.into(), f64::NAN.into(), f64::NAN.into(), status(r)])?,
        }
    }
    let mut outputs = vec![Output::new("global_opt", main)];
    let plot = PlotKind::Lines { x: "h_ctr".into(), y: "G".into(), group: vec!["width".into(), "N".into()], log_y: true };
    outputs.push(Output::new("global_curve", curve).with_plot(plot, "average inverse QFI against control field"));

    if sizes.len() >= 3 {
        let mut expo = Table::new(&[("width", Num), ("b", Num), ("stderr", Num), ("status", Text)]);
        for &w in &g.widths {
            let pts: Vec<(f64, f64)> = pairs
                .iter()
                .zip(&rows)
                .filter(|((pw, _, _), _)| *pw == w)
                .filter_map(|((_, n, _), r)| r.as_ref().ok().map(|v| (*n as f64, v.g_opt)))
                .collect();
            match loglog_slope(&pts) {
                Ok(f) => expo.push(vec![w.into(), (-f.slope).into(), f.stderr.into(), "ok".into()])?,
                Err(e) => expo.push(vec![w.into(), f64::NAN.into(), f64::NAN.into(), format!("failed: {e}").into()])?,
            }
        }
        outputs.push(Output::new("global_exponent", expo));
    }
    Ok(TaskOutput { rows: rows.len(), failed: count_failed(&rows), outputs, check_failure: None })
}

// ---------------------------------------------------------------- ssh tasks

fn ssh_model_at(base: &SshModel, axes: &[AxisConfig], c: &[f64], index: usize) -> Result<SshModel> {
    let mut m = base.clone();
    for (a, &v) in axes.iter().zip(c) {
        if a.name != "p" {
            m.set(&a.name, v).map_err(|e| at_point(index, e))?;
        }
    }
    m.spec().map_err(|e| at_point(index, e))?;
    Ok(m)
}

#[derive(Serialize)]
struct BandPoint<'a> {
    model: &'a SshModel,
    p: f64,
}

#[derive(Serialize, Deserialize)]
struct BandRow {
    energies: Vec<f64>,
    chi: Vec<Option<f64>>,
}

fn ssh_bands(ctx: &Ctx) -> Result<TaskOutput> {
    let cfg = ctx.cfg;
    let model = &cfg.ssh;
    let spec = model.spec().map_err(|e| Error::Config(e.to_string()))?;
    let ps = match cfg.axes.first() {
        Some(a) => a.values(),
        None => {
            let n = cfg.samples.max(2);
            (0..n).map(|i| -PI + 2.0 * PI * i as f64 / (n - 1) as f64).collect()
        }
    };
    let points: Vec<BandPoint> = ps.iter().map(|&p| BandPoint { model, p }).collect();
    let rows = ctx.rows("ssh-bands", &points, ctx.exec, |pt| {
        let b = bands_at(&spec, pt.p)?;
        let s = band_susceptibilities(&spec, pt.p)?;
        Ok(BandRow { energies: b.energies, chi: s.chi.iter().map(|&x| finite(x)).collect() })
    })?;
    let mut table = Table::new(&[("p", Num), ("band", Int), ("E", Num), ("chi", Num), ("status", Text)]);
    table.set_meta("dimers_per_cell", spec.dimers_per_cell.to_string());
    let m = spec.bands();
    for (&p, r) in ps.iter().zip(&rows) {
        for band in 0..m {
            let (e, chi) = match r {
                Ok(v) => (v.energies[band], opt_num(v.chi[band])),
                Err(_) => (f64::NAN, Cell::Num(f64::NAN)),
            };
            table.push(vec![p.into(), band.into(), e.into(), chi, status(r)])?;
        }
    }
    let plot = PlotKind::Lines { x: "p".into(), y: "E".into(), group: vec!["band".into()], log_y: false };
    let out = Output::new("ssh_bands", table)
        .with_plot(plot, format!("SSH bands, r = {}, J2 = {}, J = {}", spec.dimers_per_cell, spec.j2, spec.inter_coupling));
    Ok(TaskOutput { rows: rows.len(), failed: count_failed(&rows), outputs: vec![out], check_failure: None })
}

#[derive(Serialize)]
struct ChainPoint<'a> {
    model: &'a SshModel,
}

#[derive(Serialize, Deserialize)]
struct SshQfiRow {
    qfi: f64,
    zone_edge: f64,
    divergence: Option<f64>,
}

fn ssh_qfi(ctx: &Ctx) -> Result<TaskOutput> {
    let cfg = ctx.cfg;
    if cfg.axes.iter().any(|a| a.name == "p") {
        return Err(Error::Config("ssh-qfi sums over momenta; sweep p with ssh-bands".into()));
    }
    let coords = grid(&cfg.axes);
    let models = coords
        .iter()
        .enumerate()
        .map(|(i, c)| ssh_model_at(&cfg.ssh, &cfg.axes, c, i))
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<ChainPoint> = models.iter().map(|m| ChainPoint { model: m }).collect();
    let inner = ctx.inner(points.len());
    let rows = ctx.rows("ssh-qfi", &points, ctx.exec, |pt| {
        let q = half_filling_qfi(&pt.model.spec()?, inner)?;
        if !q.qfi.is_finite() {
            return Err(Error::numerical(format!("half-filling QFI is {}", q.qfi), "ssh-qfi"));
        }
        Ok(SshQfiRow { qfi: q.qfi, zone_edge: q.zone_edge, divergence: q.divergence })
    })?;
    let mut table = Table::new(&[
        ("J", Num),
        ("J2", Num),
        ("l", Int),
        ("r", Int),
        ("qfi", Num),
        ("zone_edge", Num),
        ("bulk", Num),
        ("qfi_per_cell", Num),
        ("divergence_p", Num),
        ("status", Text),
    ]);
    for (m, r) in models.iter().zip(&rows) {
        let mut row: Vec<Cell> = vec![m.inter_coupling.into(), m.j2.into(), m.n_cells.into(), m.dimers_per_cell.into()];
        match r {
            Ok(v) => row.extend([
                v.qfi.into(),
                v.zone_edge.into(),
                (v.qfi - v.zone_edge).into(),
                (v.qfi / m.n_cells as f64).into(),
                opt_num(v.divergence),
            ]),
            Err(_) => row.extend((0..5).map(|_| Cell::Num(f64::NAN))),
        }
        row.push(status(r));
        table.push(row)?;
    }
    let mut main = Output::new("ssh_qfi", table);
    if let Some(k) = sweep_plot(&cfg.axes, "qfi", "l", cfg.plot.scale) {
        main = main.with_plot(k, "half-filling QFI with respect to J2");
    }
    let mut outputs = vec![main];

    // size scaling per (J, J2) when the chain length is swept
    if cfg.axes.iter().any(|a| a.name == "l" && a.count >= 3) {
        // (l, qfi, bulk) per (J, J2), keyed by bit patterns
        type Series = Vec<(f64, f64, f64)>;
        let mut groups: BTreeMap<(u64, u64), Series> = BTreeMap::new();
        let mut order = Vec::new();
        for (m, r) in models.iter().zip(&rows) {
            let key = (m.inter_coupling.to_bits(), m.j2.to_bits());
            if !groups.contains_key(&key) {
                order.push((key, m.inter_coupling, m.j2));
            }
            let e = groups.entry(key).or_default();
            if let Ok(v) = r {
                e.push((m.n_cells as f64, v.qfi, v.qfi - v.zone_edge));
            }
        }
        let mut sc = Table::new(&[
            ("J", Num),
            ("J2", Num),
            ("slope", Num),
            ("slope_err", Num),
            ("bulk_slope", Num),
            ("offset_exponent", Num),
            ("offset", Num),
            ("status", Text),
        ]);
        for (key, j, j2) in order {
            let pts = &groups[&key];
            let total: Vec<(f64, f64)> = pts.iter().map(|p| (p.0, p.1)).collect();
            let bulk: Vec<(f64, f64)> = pts.iter().map(|p| (p.0, p.2)).collect();
            let mut row: Vec<Cell> = vec![j.into(), j2.into()];
            match loglog_slope(&total) {
                Ok(f) => {
                    let b = loglog_slope(&bulk).map(|b| b.slope).unwrap_or(f64::NAN);
                    let (oe, off) = fit_power_with_offset(&total, (0.0, 4.0))
                        .map(|o| (o.exponent, o.offset))
                        .unwrap_or((f64::NAN, f64::NAN));
                    row.extend([f.slope.into(), f.stderr.into(), b.into(), oe.into(), off.into(), "ok".into()]);
                }
                Err(e) => {
                    row.extend((0..5).map(|_| Cell::Num(f64::NAN)));
                    row.push(format!("failed: {e}").into());
                }
            }
            sc.push(row)?;
        }
        outputs.push(Output::new("ssh_qfi_scaling", sc));
    }
    Ok(TaskOutput { rows: rows.len(), failed: count_failed(&rows), outputs, check_failure: None })
}

#[derive(Serialize)]
struct WindingPoint<'a> {
    model: &'a SshModel,
    samples: usize,
}

#[derive(Serialize, Deserialize)]
struct WindingRow {
    index: i64,
    winding: i64,
    zak_parity: i64,
    residual: f64,
}

#[derive(Serialize, Deserialize)]
struct ClosingRow {
    j: f64,
    lower_band: usize,
    momentum: f64,
    gap: f64,
    zero_energy: bool,
}

fn ssh_winding(ctx: &Ctx) -> Result<TaskOutput> {
    let cfg = ctx.cfg;
    let coords = grid(&cfg.axes);
    let models = coords
        .iter()
        .enumerate()
        .map(|(i, c)| ssh_model_at(&cfg.ssh, &cfg.axes, c, i))
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<WindingPoint> = models.iter().map(|m| WindingPoint { model: m, samples: cfg.samples }).collect();
    let rows = ctx.rows("ssh-winding", &points, ctx.exec, |pt| {
        let w = winding_number(&pt.model.spec()?, pt.samples)?;
        Ok(WindingRow { index: w.index, winding: w.winding, zak_parity: w.zak_parity, residual: w.residual })
    })?;
    let mut table = Table::new(&[
        ("J", Num),
        ("J2", Num),
        ("r", Int),
        ("index", Int),
        ("winding", Int),
        ("zak_parity", Int),
        ("residual", Num),
        ("status", Text),
    ]);
    for (m, r) in models.iter().zip(&rows) {
        let mut row: Vec<Cell> = vec![m.inter_coupling.into(), m.j2.into(), m.dimers_per_cell.into()];
        match r {
            Ok(v) => row.extend([v.index.into(), v.winding.into(), v.zak_parity.into(), v.residual.into()]),
            Err(_) => row.extend([Cell::Int(-1), Cell::Int(0), Cell::Int(-1), Cell::Num(f64::NAN)]),
        }
        row.push(status(r));
        table.push(row)?;
    }
    let mut main = Output::new("ssh_winding", table);
    if let Some(k) = sweep_plot(&cfg.axes, "index", "", ColorScale::Linear) {
        main = main.with_plot(k, format!("topological index, r = {}", cfg.ssh.dimers_per_cell));
    }
    let mut outputs = vec![main];

    if let Some(a) = cfg.axes.iter().find(|a| a.name == "J") {
        let (lo, hi) = (a.min.min(a.max), a.min.max(a.max));
        if lo > 0.0 && hi > lo {
            let spec = cfg.ssh.spec().map_err(|e| Error::Config(e.to_string()))?;
            let scan = a.count.max(3);
            let point = (&cfg.ssh, lo, hi, scan, cfg.samples);
            let found = ctx.rows("ssh-gap-closings", &[point], ctx.exec, |&(_, lo, hi, scan, samples)| {
                let list = gap_closings(&spec, (lo, hi), scan, samples)?;
                Ok(list
                    .iter()
                    .map(|g| ClosingRow { j: g.j, lower_band: g.lower_band, momentum: g.momentum, gap: g.gap, zero_energy: g.zero_energy })
                    .collect::<Vec<_>>())
            })?;
            let mut t = Table::new(&[("J", Num), ("J2", Num), ("lower_band", Int), ("momentum", Num), ("gap", Num), ("zero_energy", Int)]);
            match &found[0] {
                Ok(list) => {
                    for g in list {
                        t.push(vec![g.j.into(), spec.j2.into(), g.lower_band.into(), g.momentum.into(), g.gap.into(), g.zero_energy.into()])?;
                    }
                }
                Err(e) => t.set_meta("error", e.clone()),
            }
            outputs.push(Output::new("ssh_gap_closings", t));
        }
    }
    Ok(TaskOutput { rows: rows.len(), failed: count_failed(&rows), outputs, check_failure: None })
}

// ------------------------------------------------------------- oracle-check

/// Randomized closed spin rings for the exact-diagonalization cross-check,
/// drawn from a seeded stream so that a seed always yields the same cases.
/// Sizes cycle through `sizes`; the cell size is a random divisor of `N`.
pub fn random_oracle_rings(seed: u64, cases: usize, sizes: &[usize]) -> Result<Vec<XYChainSpec>> {
    if sizes.is_empty() || sizes.iter().any(|&n| !(3..=crate::ed::MAX_SITES).contains(&n)) {
        return Err(Error::Config(format!(
            "oracle sizes must lie in 3..={}",
            crate::ed::MAX_SITES
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(cases);
    for i in 0..cases {
        let n = sizes[i % sizes.len()];
        let divisors: Vec<usize> = (1..=n / 2).filter(|r| n.is_multiple_of(*r)).collect();
        let r = divisors[rng.random_range(0..divisors.len())];
        let j = rng.random_range(0.2..1.5);
        let gamma = rng.random_range(0.2..1.0);
        let h = rng.random_range(-1.5..1.5);
        out.push(
            XYChainSpec::new(n, r)?
                .with_inter_coupling(j)
                .with_anisotropy(gamma)
                .with_field(h)
                .with_boundary(Boundary::Periodic),
        );
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct OracleRow {
    free_fermion: f64,
    exact: f64,
    periodic_sector: bool,
}

fn oracle_check(ctx: &Ctx) -> Result<TaskOutput> {
    let cfg = ctx.cfg;
    let oc = &cfg.oracle;
    let p = Parameter::from_name(&cfg.parameter).ok_or_else(|| Error::Config("unknown parameter".into()))?;
    let specs = random_oracle_rings(cfg.seed, oc.cases, &oc.sizes)?;
    let points: Vec<(&XYChainSpec, &str)> = specs.iter().map(|s| (s, p.name())).collect();
    let rows = ctx.rows("oracle-check", &points, ctx.exec, |(spec, _)| {
        let c = compare_with_free_fermion(spec, p)?;
        Ok(OracleRow { free_fermion: c.free_fermion, exact: c.exact, periodic_sector: c.sector == Boundary::Periodic })
    })?;
    let mut table = Table::new(&[
        ("case", Int),
        ("N", Int),
        ("r", Int),
        ("J", Num),
        ("gamma", Num),
        ("h", Num),
        ("sector", Text),
        ("Q_free_fermion", Num),
        ("Q_exact", Num),
        ("rel_err", Num),
        ("pass", Int),
        ("status", Text),
    ]);
    table.set_meta("parameter", p.name());
    table.set_meta("tolerance", oc.tolerance.to_string());
    let mut worst: f64 = 0.0;
    let mut mismatches = 0;
    for (i, (s, r)) in specs.iter().zip(&rows).enumerate() {
        let mut row: Vec<Cell> = vec![
            i.into(),
            s.n_sites.into(),
            s.cell_size.into(),
            s.inter_coupling.into(),
            s.anisotropy.into(),
            s.mean_field().into(),
        ];
        match r {
            Ok(v) => {
                let rel = (v.free_fermion - v.exact).abs() / v.exact.abs();
                let pass = rel <= oc.tolerance;
                worst = worst.max(rel);
                mismatches += usize::from(!pass);
                row.extend([
                    if v.periodic_sector { "periodic" } else { "antiperiodic" }.into(),
                    v.free_fermion.into(),
                    v.exact.into(),
                    rel.into(),
                    pass.into(),
                ]);
            }
            Err(_) => row.extend(["".into(), f64::NAN.into(), f64::NAN.into(), f64::NAN.into(), false.into()]),
        }
        row.push(status(r));
        table.push(row)?;
    }
    table.set_meta("max_rel_err", super::table::format_float(worst));
    let check_failure = (mismatches > 0)
        .then(|| format!("{mismatches} of {} cases exceed relative error {}", specs.len(), oc.tolerance));
    Ok(TaskOutput {
        rows: rows.len(),
        failed: count_failed(&rows),
        outputs: vec![Output::new("oracle_check", table)],
        check_failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_order_is_last_axis_fastest() {
        let a = AxisConfig { name: "h".into(), min: 0.0, max: 1.0, count: 2, log: false };
        let b = AxisConfig { name: "J".into(), min: 0.0, max: 2.0, count: 3, log: false };
        let g = grid(&[a, b]);
        assert_eq!(g, vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![0.0, 2.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]]);
        assert_eq!(grid(&[]), vec![Vec::<f64>::new()]);
    }

    #[test]
    fn oracle_rings_depend_only_on_seed() {
        let a = random_oracle_rings(7, 20, &[6, 8, 10]).unwrap();
        let b = random_oracle_rings(7, 20, &[6, 8, 10]).unwrap();
        let c = random_oracle_rings(8, 20, &[6, 8, 10]).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|s| s.n_sites % s.cell_size == 0 && s.boundary == Boundary::Periodic));
    }
}
