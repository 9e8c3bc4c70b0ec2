//! Power-law exponents from QFI data: log-log slopes and finite-size-scaling
//! collapse under `Q = N^{β/ν} f(N^{1/ν}(h − h_c))`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::nelder_mead;
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub n: usize,
    pub h: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScalingDataset {
    pub records: Vec<ScalingRecord>,
}

impl ScalingDataset {
    pub fn new(records: Vec<ScalingRecord>) -> Result<Self> {
        if let Some(bad) = records.iter().find(|r| !(r.q > 0.0 && r.q.is_finite() && r.h.is_finite())) {
            return Err(Error::validation(format!(
                "scaling data need finite positive Q (N={}, h={}, Q={})",
                bad.n, bad.h, bad.q
            )));
        }
        Ok(ScalingDataset { records })
    }

    /// Points grouped by `N`, each group sorted by `h`.
    pub fn groups(&self) -> BTreeMap<usize, Vec<(f64, f64)>> {
        let mut g: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
        for r in &self.records {
            g.entry(r.n).or_default().push((r.h, r.q));
        }
        for pts in g.values_mut() {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        g
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups().keys().copied().collect()
    }

    /// Keep only records with `|h − h_c| ≤ half_width`.
    pub fn window(&self, h_c: f64, half_width: f64) -> Self {
        ScalingDataset {
            records: self.records.iter().copied().filter(|r| (r.h - h_c).abs() <= half_width).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ScalingDataset {
            records: self.records.iter().map(|r| ScalingRecord { q: r.q * factor, ..*r }).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the residual variance.
    pub stderr: f64,
    pub residuals: Vec<f64>,
}

/// Least-squares slope of `ln Q` against `ln N`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::validation("log-log fit needs at least 3 points"));
    }
    if points.iter().any(|&(n, q)| !(n > 0.0 && q > 0.0)) {
        return Err(Error::validation("log-log fit needs positive N and Q"));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::validation("log-log fit needs distinct N"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - intercept - slope * x).collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let stderr = (rss / (m - 2.0) / sxx).sqrt();
    Ok(SlopeFit { slope, intercept, stderr, residuals })
}

/// `Q ≈ c + A·N^s` with a free constant `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetPowerFit {
    pub offset: f64,
    pub amplitude: f64,
    pub exponent: f64,
    /// Sum of squared relative residuals.
    pub rss: f64,
}

/// Best `(c, A)` for a fixed exponent, minimizing relative residuals.
fn offset_lsq(points: &[(f64, f64)], s: f64) -> Option<(f64, f64, f64)> {
    let (mut sw, mut swx, mut swxx, mut swy, mut swxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(n, q) in points {
        let w = 1.0 / (q * q);
        let x = n.powf(s);
        sw += w;
        swx += w * x;
        swxx += w * x * x;
        swy += w * q;
        swxy += w * x * q;
    }
    let det = sw * swxx - swx * swx;
    if !(det.abs() > 1e-300) {
        return None;
    }
    let a = (sw * swxy - swx * swy) / det;
    let c = (swy - a * swx) / sw;
    let rss = points.iter().map(|&(n, q)| ((q - c - a * n.powf(s)) / q).powi(2)).sum();
    Some((c, a, rss))
}

/// Fit `Q = c + A N^s` with `s` searched in `[s_lo, s_hi]`.
pub fn fit_power_with_offset(points: &[(f64, f64)], (s_lo, s_hi): (f64, f64)) -> Result<OffsetPowerFit> {
    if points.len() < 4 {
        return Err(Error::validation("an offset power law needs at least 4 points"));
    }
    if points.iter().any(|&(n, q)| !(n > 0.0 && q.is_finite() && q != 0.0)) {
        return Err(Error::validation("offset fit needs positive N and nonzero finite Q"));
    }
    if !(s_lo < s_hi) {
        return Err(Error::validation("exponent range must be ordered"));
    }
    let rss = |s: f64| offset_lsq(points, s).map(|t| t.2).unwrap_or(f64::INFINITY);
    let m = 400;
    let step = (s_hi - s_lo) / m as f64;
    let best = (0..=m)
        .map(|i| s_lo + step * i as f64)
        .min_by(|a, b| rss(*a).total_cmp(&rss(*b)))
        .unwrap_or(s_lo);
    let (s, _) = crate::optim::golden_section(rss, (best - step).max(s_lo), (best + step).min(s_hi), 1e-10);
    let (offset, amplitude, rss) =
        offset_lsq(points, s).ok_or_else(|| Error::numerical("singular offset fit", "power law with offset"))?;
    Ok(OffsetPowerFit { offset, amplitude, exponent: s, rss })
}

fn interpolate(curve: &[(f64, f64)], x: f64) -> Option<f64> {
    let first = curve.first()?;
    let last = curve.last()?;
    if x < first.0 || x > last.0 {
        return None;
    }
    let k = curve.partition_point(|p| p.0 < x);
    if k == 0 {
        return Some(first.1);
    }
    let (x0, y0) = curve[k - 1];
    let (x1, y1) = curve[k];
    if x1 == x0 {
        return Some(y0);
    }
    Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}

fn rescale(groups: &BTreeMap<usize, Vec<(f64, f64)>>, beta: f64, nu: f64, h_c: f64) -> Vec<Vec<(f64, f64)>> {
    groups
        .iter()
        .map(|(&n, pts)| {
            let n = n as f64;
            let sx = n.powf(1.0 / nu);
            let sy = n.powf(-beta / nu);
            let mut c: Vec<(f64, f64)> = pts.iter().map(|&(h, q)| (sx * (h - h_c), q * sy)).collect();
            c.sort_by(|a, b| a.0.total_cmp(&b.0));
            c
        })
        .collect()
}

/// Collapse quality: mean squared deviation of each rescaled point from the
/// piecewise-linear curves of the other sizes, over the abscissa range all
/// sizes share, divided by the variance of the points used. A single size
/// costs 0; no shared range costs `+∞`.
pub fn collapse_cost(data: &ScalingDataset, beta: f64, nu: f64, h_c: f64) -> f64 {
    let groups = data.groups();
    if groups.len() <= 1 {
        return 0.0;
    }
    if !(nu > 0.0 && beta.is_finite()) {
        return f64::INFINITY;
    }
    let curves = rescale(&groups, beta, nu, h_c);
    let lo = curves.iter().filter_map(|c| c.first()).map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let hi = curves.iter().filter_map(|c| c.last()).map(|p| p.0).fold(f64::INFINITY, f64::min);
    if !(lo < hi) {
        return f64::INFINITY;
    }
    let mut sq = 0.0;
    let mut pairs = 0usize;
    let mut used = Vec::new();
    for (g, curve) in curves.iter().enumerate() {
        for &(x, y) in curve.iter().filter(|p| p.0 >= lo && p.0 <= hi) {
            used.push(y);
            for (o, other) in curves.iter().enumerate() {
                if o == g {
                    continue;
                }
                if let Some(yi) = interpolate(other, x) {
                    sq += (y - yi).powi(2);
                    pairs += 1;
                }
            }
        }
    }
    if pairs == 0 || used.len() < 2 {
        return f64::INFINITY;
    }
    let mean = used.iter().sum::<f64>() / used.len() as f64;
    let var = used.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / used.len() as f64;
    if var == 0.0 {
        return if sq == 0.0 { 0.0 } else { f64::INFINITY };
    }
    sq / pairs as f64 / var
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseBounds {
    pub beta: (f64, f64),
    pub nu: (f64, f64),
}

impl Default for CollapseBounds {
    fn default() -> Self {
        CollapseBounds { beta: (0.5, 3.0), nu: (0.3, 3.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseOptions {
    pub bounds: CollapseBounds,
    /// Only data with `|h − h_c|` within this window enter the fit.
    pub window: f64,
    pub grid: usize,
    /// Fit `h_c` as a third parameter, starting from the given value.
    pub fit_h_c: bool,
}

impl Default for CollapseOptions {
    fn default() -> Self {
        CollapseOptions { bounds: CollapseBounds::default(), window: 0.1, grid: 41, fit_h_c: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub beta: f64,
    pub nu: f64,
    pub h_c: f64,
    pub collapse_cost: f64,
    pub beta_err: f64,
    pub nu_err: f64,
    /// Optimum lies on the edge of the search box.
    pub on_boundary: bool,
    /// Log-log slope of `Q(h_c)` against `N`, interpolated per size.
    pub slope_at_h_c: Option<SlopeFit>,
}

fn in_bounds(b: &CollapseBounds, beta: f64, nu: f64) -> bool {
    beta >= b.beta.0 && beta <= b.beta.1 && nu >= b.nu.0 && nu <= b.nu.1
}

/// Half-width of the interval around `x0` along one coordinate where
/// `cost ≤ 1.1 × c0`.
fn half_width(cost: impl Fn(f64) -> f64, x0: f64, c0: f64, lo: f64, hi: f64) -> f64 {
    let limit = 1.1 * c0.max(1e-300);
    let step = (hi - lo) / 2000.0;
    let walk = |dir: f64| {
        let mut x = x0;
        loop {
            let next = x + dir * step;
            if next < lo || next > hi || cost(next) > limit {
                return x;
            }
            x = next;
        }
    };
    (walk(1.0) - walk(-1.0)) / 2.0
}

/// Minimize [`collapse_cost`] over `(β, ν)`: a coarse grid over the bounds,
/// then simplex refinement from the best cell.
pub fn fit_collapse(data: &ScalingDataset, h_c: f64, opts: &CollapseOptions, exec: Execution) -> Result<ScalingFit> {
    let b = opts.bounds;
    if !(b.beta.0 < b.beta.1 && b.nu.0 < b.nu.1 && b.nu.0 > 0.0) {
        return Err(Error::validation("collapse bounds must be ordered with nu > 0"));
    }
    if opts.grid < 2 {
        return Err(Error::validation("collapse grid needs at least 2 points per axis"));
    }
    let data = data.window(h_c, opts.window);
    if data.sizes().len() < 3 {
        return Err(Error::validation("collapse needs at least 3 system sizes inside the window"));
    }
    let g = opts.grid;
    let axis = |(lo, hi): (f64, f64), i: usize| lo + (hi - lo) * i as f64 / (g - 1) as f64;
    let cells: Vec<(f64, f64)> = (0..g).flat_map(|i| (0..g).map(move |k| (i, k))).map(|(i, k)| (axis(b.beta, i), axis(b.nu, k))).collect();
    let costs = par::map(&cells, exec, |&(beta, nu)| collapse_cost(&data, beta, nu, h_c));
    let (start, start_cost) = cells
        .iter()
        .zip(&costs)
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(c, v)| (*c, *v))
        .ok_or_else(|| Error::validation("empty collapse grid"))?;
    if !start_cost.is_finite() {
        return Err(Error::numerical("no overlapping rescaled data anywhere on the grid", "collapse"));
    }

    let dbeta = (b.beta.1 - b.beta.0) / (g - 1) as f64;
    let dnu = (b.nu.1 - b.nu.0) / (g - 1) as f64;
    let (beta, nu, h_c, cost) = if opts.fit_h_c {
        let width = opts.window;
        let objective = |x: &[f64]| {
            if !in_bounds(&b, x[0], x[1]) || (x[2] - h_c).abs() > width {
                f64::INFINITY
            } else {
                collapse_cost(&data, x[0], x[1], x[2])
            }
        };
        let m = nelder_mead(objective, &[start.0, start.1, h_c], &[dbeta, dnu, width / 50.0], 1e-7, 1e-14, 4000);
        (m.x[0], m.x[1], m.x[2], m.value)
    } else {
        let objective = |x: &[f64]| {
            if !in_bounds(&b, x[0], x[1]) {
                f64::INFINITY
            } else {
                collapse_cost(&data, x[0], x[1], h_c)
            }
        };
        let m = nelder_mead(objective, &[start.0, start.1], &[dbeta, dnu], 1e-7, 1e-14, 4000);
        (m.x[0], m.x[1], h_c, m.value)
    };
    let (beta, nu, cost) = if cost <= start_cost { (beta, nu, cost) } else { (start.0, start.1, start_cost) };

    let beta_err = half_width(|x| collapse_cost(&data, x, nu, h_c), beta, cost, b.beta.0, b.beta.1);
    let nu_err = half_width(|x| collapse_cost(&data, beta, x, h_c), nu, cost, b.nu.0, b.nu.1);
    let edge = |x: f64, (lo, hi): (f64, f64), d: f64| (x - lo).abs() < 1e-3 * d || (hi - x).abs() < 1e-3 * d;
    let on_boundary = edge(beta, b.beta, dbeta) || edge(nu, b.nu, dnu);

    let peaks: Vec<(f64, f64)> = data
        .groups()
        .iter()
        .filter_map(|(&n, pts)| interpolate(pts, h_c).map(|q| (n as f64, q)))
        .collect();
    let slope_at_h_c = loglog_slope(&peaks).ok();
    Ok(ScalingFit { beta, nu, h_c, collapse_cost: cost, beta_err, nu_err, on_boundary, slope_at_h_c })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(beta: f64, nu: f64, h_c: f64) -> ScalingDataset {
        let mut records = Vec::new();
        for n in [20usize, 40, 80, 160] {
            let nf = n as f64;
            for i in 0..41 {
                let h = h_c + (-4.0 + 0.2 * i as f64) / nf;
                let x = nf.powf(1.0 / nu) * (h - h_c);
                records.push(ScalingRecord { n, h, q: nf.powf(beta / nu) / (1.0 + x * x) });
            }
        }
        ScalingDataset::new(records).unwrap()
    }

    #[test]
    fn offset_fit_recovers_planted_law() {
        let pts: Vec<(f64, f64)> = [50.0, 100.0, 200.0, 400.0, 800.0].iter().map(|&n: &f64| (n, 7.0 + 0.3 * n.powf(1.7))).collect();
        let f = fit_power_with_offset(&pts, (0.0, 4.0)).unwrap();
        assert!((f.exponent - 1.7).abs() < 1e-6, "{f:?}");
        assert!((f.offset - 7.0).abs() < 1e-4);
    }

    #[test]
    fn exact_power_law_slope() {
        let pts: Vec<(f64, f64)> = [10.0, 20.0, 40.0, 80.0].iter().map(|&n: &f64| (n, 3.0 * n * n)).collect();
        let fit = loglog_slope(&pts).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!(fit.stderr < 1e-10);
    }

    #[test]
    fn slope_rejects_nonpositive() {
        assert!(loglog_slope(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
        assert!(loglog_slope(&[(1.0, 1.0), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn single_size_costs_nothing() {
        let d = ScalingDataset::new(vec![
            ScalingRecord { n: 8, h: 0.1, q: 1.0 },
            ScalingRecord { n: 8, h: 0.2, q: 2.0 },
        ])
        .unwrap();
        assert_eq!(collapse_cost(&d, 2.0, 1.0, 0.0), 0.0);
    }

    #[test]
    fn disjoint_ranges_cost_infinity() {
        let d = ScalingDataset::new(vec![
            ScalingRecord { n: 10, h: 0.0, q: 1.0 },
            ScalingRecord { n: 10, h: 0.1, q: 1.0 },
            ScalingRecord { n: 20, h: 0.5, q: 1.0 },
            ScalingRecord { n: 20, h: 0.6, q: 1.0 },
        ])
        .unwrap();
        assert!(collapse_cost(&d, 2.0, 1.0, 0.0).is_infinite());
    }

    #[test]
    fn planted_exponents_minimize_cost() {
        let d = synthetic(2.0, 1.0, 0.3);
        let at = collapse_cost(&d, 2.0, 1.0, 0.3);
        assert!(at < 1e-3, "{at}");
        assert!(collapse_cost(&d, 2.2, 1.0, 0.3) > at);
        assert!(collapse_cost(&d, 2.0, 1.2, 0.3) > at);
    }

    #[test]
    fn fit_recovers_planted_exponents() {
        for (beta, nu) in [(2.0, 1.0), (1.5, 0.8)] {
            let d = synthetic(beta, nu, 0.3);
            let fit = fit_collapse(&d, 0.3, &CollapseOptions::default(), Execution::Sequential).unwrap();
            assert!((fit.beta - beta).abs() < 0.02, "{fit:?}");
            assert!((fit.nu - nu).abs() < 0.02, "{fit:?}");
            assert!(!fit.on_boundary);
        }
    }

    #[test]
    fn rescaling_q_keeps_argmin() {
        let d = synthetic(2.0, 1.0, 0.3);
        let a = fit_collapse(&d, 0.3, &CollapseOptions::default(), Execution::Sequential).unwrap();
        let b = fit_collapse(&d.scaled(17.0), 0.3, &CollapseOptions::default(), Execution::Sequential).unwrap();
        assert!((a.beta - b.beta).abs() < 1e-6 && (a.nu - b.nu).abs() < 1e-6);
    }
}
