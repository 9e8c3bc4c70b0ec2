//! Global sensing: prior-averaged inverse QFI over a field interval, its
//! optimization over a control field, and its scaling with probe size.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::golden_section;
use crate::par::{self, Execution};
use crate::qfi::qfi_auto;
use crate::scaling::{loglog_slope, SlopeFit};
use crate::xy::{Parameter, XYChainSpec};

/// QFI with respect to the field as a function of the total field.
pub trait QfiSource: Sync {
    /// `Ok(None)` marks a point where the gap closes and `Q` is not finite.
    fn qfi(&self, h: f64) -> Result<Option<f64>>;
}

/// Evaluates the chain directly at every request.
#[derive(Debug, Clone)]
pub struct DirectSource {
    pub spec: XYChainSpec,
}

impl DirectSource {
    pub fn new(spec: XYChainSpec) -> Self {
        DirectSource { spec }
    }
}

impl QfiSource for DirectSource {
    fn qfi(&self, h: f64) -> Result<Option<f64>> {
        match qfi_auto(&self.spec.clone().with_field(h), Parameter::Field) {
            Ok(r) if r.gap_closed || !r.value.is_finite() => Ok(None),
            Ok(r) => Ok(Some(r.value)),
            Err(Error::Numerical { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// Memoizes another source on the exact bit pattern of `h`.
pub struct CachedSource<S> {
    inner: S,
    memo: Mutex<HashMap<u64, Option<f64>>>,
}

impl<S: QfiSource> CachedSource<S> {
    pub fn new(inner: S) -> Self {
        CachedSource { inner, memo: Mutex::new(HashMap::new()) }
    }

    pub fn len(&self) -> usize {
        self.memo.lock().map(|m| m.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<S: QfiSource> QfiSource for CachedSource<S> {
    fn qfi(&self, h: f64) -> Result<Option<f64>> {
        let key = h.to_bits();
        if let Some(v) = self.memo.lock().ok().and_then(|m| m.get(&key).copied()) {
            return Ok(v);
        }
        let v = self.inner.qfi(h)?;
        if let Ok(mut m) = self.memo.lock() {
            m.insert(key, v);
        }
        Ok(v)
    }
}

/// Linear interpolation in a precomputed `(h, Q)` scan.
#[derive(Debug, Clone)]
pub struct TabulatedSource {
    points: Vec<(f64, f64)>,
}

impl TabulatedSource {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::validation("a tabulated QFI scan needs at least 2 points"));
        }
        if points.iter().any(|p| !p.0.is_finite() || !(p.1 > 0.0)) {
            return Err(Error::validation("tabulated QFI must be positive at finite fields"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(TabulatedSource { points })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }
}

impl QfiSource for TabulatedSource {
    fn qfi(&self, h: f64) -> Result<Option<f64>> {
        let (lo, hi) = self.range();
        if h < lo || h > hi {
            return Err(Error::validation(format!("h = {h} outside tabulated range [{lo}, {hi}]")));
        }
        let k = self.points.partition_point(|p| p.0 < h).max(1);
        let (x0, y0) = self.points[k - 1];
        let (x1, y1) = self.points[k];
        let t = if x1 > x0 { (h - x0) / (x1 - x0) } else { 0.0 };
        Ok(Some(y0 + t * (y1 - y0)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalSensingProblem {
    pub h0: f64,
    pub width: f64,
    pub quadrature_points: usize,
}

impl GlobalSensingProblem {
    pub fn new(h0: f64, width: f64, quadrature_points: usize) -> Result<Self> {
        let p = GlobalSensingProblem { h0, width, quadrature_points };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite() && self.h0.is_finite()) {
            return Err(Error::validation("global sensing needs a finite interval of positive width"));
        }
        if self.quadrature_points < 51 {
            return Err(Error::validation("global sensing needs at least 51 quadrature points"));
        }
        Ok(())
    }
}

/// `G = (1/Δh) ∫ dh / Q(h + h_ctr)` over `[h0 − Δh/2, h0 + Δh/2]` by the
/// trapezoidal rule. Nodes where the gap closes are moved by one node spacing
/// toward the interval center.
pub fn average_uncertainty(problem: &GlobalSensingProblem, source: &dyn QfiSource, h_ctr: f64) -> Result<f64> {
    problem.validate()?;
    let n = problem.quadrature_points;
    let spacing = problem.width / (n - 1) as f64;
    let start = problem.h0 - problem.width / 2.0 + h_ctr;
    let center = problem.h0 + h_ctr;
    let mut sum = 0.0;
    for i in 0..n {
        let h = start + spacing * i as f64;
        let q = match source.qfi(h)? {
            Some(q) => q,
            None => {
                let nudged = if h < center { h + spacing } else { h - spacing };
                source.qfi(nudged)?.ok_or_else(|| {
                    Error::numerical(format!("gap closed at h = {h} and at the nudged node"), "global quadrature")
                })?
            }
        };
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::numerical(format!("QFI {q} at h = {h}"), "global quadrature"));
        }
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        sum += w / q;
    }
    Ok(sum * spacing / problem.width)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    /// Range searched for the effective center `h0 + h_ctr`.
    pub center_range: (f64, f64),
    pub scan_points: usize,
    pub refine_minima: usize,
    pub tolerance: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions { center_range: (-1.5, 1.5), scan_points: 301, refine_minima: 3, tolerance: 1e-7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalSensingResult {
    pub problem: GlobalSensingProblem,
    /// `(h_ctr, G)` at every scanned center.
    pub g_curve: Vec<(f64, f64)>,
    pub h_ctr: f64,
    pub g_opt: f64,
    pub effective_center: f64,
}

/// Minimize `G` over `h_ctr`: a dense scan of effective centers, then
/// golden-section refinement within one scan step of the best local minima.
pub fn optimize_control_field(
    problem: &GlobalSensingProblem,
    source: &dyn QfiSource,
    opts: &OptimizeOptions,
    exec: Execution,
) -> Result<GlobalSensingResult> {
    problem.validate()?;
    let (lo, hi) = opts.center_range;
    if !(lo < hi) || opts.scan_points < 3 {
        return Err(Error::validation("control-field scan needs an ordered range and at least 3 points"));
    }
    let m = opts.scan_points;
    let step = (hi - lo) / (m - 1) as f64;
    let ctrs: Vec<f64> = (0..m).map(|i| lo + step * i as f64 - problem.h0).collect();
    let values = par::map(&ctrs, exec, |&c| average_uncertainty(problem, source, c).ok());
    let g_curve: Vec<(f64, f64)> = ctrs
        .iter()
        .zip(&values)
        .filter_map(|(&c, v)| v.filter(|g| g.is_finite()).map(|g| (c, g)))
        .collect();
    if g_curve.is_empty() {
        return Err(Error::numerical("G is non-finite at every scanned center", "control-field scan"));
    }

    let val = |i: usize| values[i].unwrap_or(f64::INFINITY);
    let mut minima: Vec<usize> = (0..m)
        .filter(|&i| {
            let v = val(i);
            v.is_finite() && (i == 0 || v <= val(i - 1)) && (i == m - 1 || v <= val(i + 1))
        })
        .collect();
    minima.sort_by(|&a, &b| val(a).total_cmp(&val(b)).then(ctrs[a].abs().total_cmp(&ctrs[b].abs())));
    minima.truncate(opts.refine_minima.max(1));

    let refined = par::map(&minima, exec, |&i| {
        let a = (ctrs[i] - step).max(lo - problem.h0);
        let b = (ctrs[i] + step).min(hi - problem.h0);
        let g = |c: f64| average_uncertainty(problem, source, c).unwrap_or(f64::INFINITY);
        let (c, v) = golden_section(g, a, b, opts.tolerance);
        if v <= val(i) {
            (c, v)
        } else {
            (ctrs[i], val(i))
        }
    });
    let (h_ctr, g_opt) = refined
        .into_iter()
        .min_by(|a, b| {
            let close = (a.1 - b.1).abs() <= 1e-9 * a.1.max(b.1);
            if close {
                // mirror-image optima are equally good; report the positive one
                if (a.0.abs() - b.0.abs()).abs() < 1e-5 {
                    b.0.total_cmp(&a.0)
                } else {
                    a.0.abs().total_cmp(&b.0.abs())
                }
            } else {
                a.1.total_cmp(&b.1)
            }
        })
        .ok_or_else(|| Error::numerical("no local minimum of G", "control-field scan"))?;
    Ok(GlobalSensingResult {
        problem: *problem,
        g_curve,
        h_ctr,
        g_opt,
        effective_center: problem.h0 + h_ctr,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalExponent {
    /// `G_opt ∼ N^{−b}`.
    pub b: f64,
    pub stderr: f64,
    pub sizes: Vec<usize>,
    pub g_opt: Vec<f64>,
    pub fit: SlopeFit,
}

/// Exponent `b` of `G_opt ∼ N^{−b}` for one probe design at several sizes,
/// each evaluated with the direct solver.
pub fn global_exponent(
    template: &XYChainSpec,
    problem: &GlobalSensingProblem,
    sizes: &[usize],
    opts: &OptimizeOptions,
    exec: Execution,
) -> Result<GlobalExponent> {
    if sizes.len() < 3 {
        return Err(Error::validation("global exponent needs at least 3 sizes"));
    }
    let mut g_opt = Vec::with_capacity(sizes.len());
    for &n in sizes {
        if n % template.cell_size != 0 {
            return Err(Error::validation(format!("N = {n} is not a multiple of r = {}", template.cell_size)));
        }
        let spec = template.resized(n / template.cell_size)?;
        let src = CachedSource::new(DirectSource::new(spec));
        g_opt.push(optimize_control_field(problem, &src, opts, exec)?.g_opt);
    }
    let pts: Vec<(f64, f64)> = sizes.iter().zip(&g_opt).map(|(&n, &g)| (n as f64, g)).collect();
    let fit = loglog_slope(&pts)?;
    Ok(GlobalExponent { b: -fit.slope, stderr: fit.stderr, sizes: sizes.to_vec(), g_opt, fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant(f64);
    impl QfiSource for Constant {
        fn qfi(&self, _: f64) -> Result<Option<f64>> {
            Ok(Some(self.0))
        }
    }

    struct Lorentz;
    impl QfiSource for Lorentz {
        fn qfi(&self, h: f64) -> Result<Option<f64>> {
            Ok(Some(1.0 + 100.0 / (1.0 + 400.0 * (h - 0.7).powi(2))))
        }
    }

    #[test]
    fn constant_qfi_gives_its_inverse() {
        let p = GlobalSensingProblem::new(0.0, 1.0, 51).unwrap();
        let g = average_uncertainty(&p, &Constant(4.0), 0.3).unwrap();
        assert!((g - 0.25).abs() < 1e-15);
    }

    #[test]
    fn narrow_prior_is_local() {
        let p = GlobalSensingProblem::new(0.2, 1e-8, 51).unwrap();
        let g = average_uncertainty(&p, &Lorentz, 0.1).unwrap();
        let q = Lorentz.qfi(0.3).unwrap().unwrap();
        assert!((g * q - 1.0).abs() < 1e-9);
    }

    #[test]
    fn quadrature_converges() {
        let a = average_uncertainty(&GlobalSensingProblem::new(0.0, 1.0, 401).unwrap(), &Lorentz, 0.5).unwrap();
        let b = average_uncertainty(&GlobalSensingProblem::new(0.0, 1.0, 201).unwrap(), &Lorentz, 0.5).unwrap();
        assert!((a - b).abs() / a < 1e-3);
    }

    #[test]
    fn optimum_sits_on_peak_and_bounds_curve() {
        let p = GlobalSensingProblem::new(0.0, 1e-4, 51).unwrap();
        let r = optimize_control_field(&p, &Lorentz, &OptimizeOptions::default(), Execution::Sequential).unwrap();
        assert!((r.effective_center - 0.7).abs() < 1e-4, "{}", r.effective_center);
        assert!(r.g_curve.iter().all(|&(_, g)| g >= r.g_opt));
    }

    #[test]
    fn rejects_bad_problems() {
        assert!(GlobalSensingProblem::new(0.0, 0.0, 51).is_err());
        assert!(GlobalSensingProblem::new(0.0, 1.0, 50).is_err());
    }

    #[test]
    fn tabulated_interpolates() {
        let t = TabulatedSource::new(vec![(0.0, 1.0), (1.0, 3.0)]).unwrap();
        assert_eq!(t.qfi(0.5).unwrap(), Some(2.0));
        assert!(t.qfi(1.5).is_err());
    }

    #[test]
    fn cache_hits_return_same_value() {
        let spec = XYChainSpec::new(16, 2).unwrap().with_inter_coupling(0.4).with_anisotropy(0.3);
        let src = CachedSource::new(DirectSource::new(spec));
        let a = src.qfi(0.3).unwrap();
        let b = src.qfi(0.3).unwrap();
        assert_eq!(a, b);
        assert_eq!(src.len(), 1);
    }
}
