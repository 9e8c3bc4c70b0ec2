//! Thermodynamic-limit critical fields from the cell transfer matrix.
//!
//! At a gap closing the Bogoliubov recurrence decouples into a two-term
//! linear recursion whose one-cell propagator `M̃` must have an eigenvalue
//! `±1`, i.e. `det(M̃ ± I) = 0`. Each site factor carries `1/(1−γ)`; we work
//! with `P = (1−γ)^r M̃`, for which
//! `(1−γ)^{2r} det(M̃ ± I) = det P ± (1−γ)^r tr P + (1−γ)^{2r}`,
//! so the roots are unchanged and nothing blows up as `γ → 1⁻`.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// Anisotropies at or above `1 − ISING_MARGIN` make every factor singular.
pub const ISING_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub h: f64,
    /// Inter-cell coupling; the intra-cell coupling is 1.
    pub j: f64,
    pub gamma: f64,
    pub r: usize,
}

impl CellParams {
    pub fn new(h: f64, j: f64, gamma: f64, r: usize) -> Self {
        CellParams { h, j, gamma, r }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(Error::validation("cell size must be at least 1"));
        }
        if ![self.h, self.j, self.gamma].iter().all(|x| x.is_finite()) {
            return Err(Error::validation("non-finite cell parameter"));
        }
        if self.j == 0.0 {
            return Err(Error::validation("inter-cell coupling must be nonzero"));
        }
        if self.gamma >= 1.0 - ISING_MARGIN {
            return Err(Error::validation(format!(
                "gamma = {} is at the Ising point where every transfer factor is singular; \
                 use the gamma-rescaled determinant (TransferMatrixCell::scaled) with gamma < 1",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// One-cell transfer matrix, stored in the rescaled form `P = (1−γ)^r M̃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrixCell {
    pub params: CellParams,
    scaled: Matrix2<f64>,
}

/// Site factor `(1−γ)·M_n` for left coupling `jl` and right coupling `jr`.
fn scaled_factor(h: f64, gamma: f64, jl: f64, jr: f64) -> Matrix2<f64> {
    Matrix2::new(-2.0 * h / jr, -(1.0 + gamma) * jl / jr, 1.0 - gamma, 0.0)
}

/// Site factor `M_n` itself.
pub fn site_factor(h: f64, gamma: f64, jl: f64, jr: f64) -> Matrix2<f64> {
    scaled_factor(h, gamma, jl, jr) / (1.0 - gamma)
}

impl TransferMatrixCell {
    pub fn new(params: CellParams) -> Result<Self> {
        params.validate()?;
        let CellParams { h, j, gamma, r } = params;
        let scaled = if r == 1 {
            scaled_factor(h, gamma, j, j)
        } else {
            let first = scaled_factor(h, gamma, 1.0, j);
            let middle = scaled_factor(h, gamma, 1.0, 1.0);
            let last = scaled_factor(h, gamma, j, 1.0);
            let mut m = first;
            for _ in 0..r - 2 {
                m *= middle;
            }
            m * last
        };
        Ok(TransferMatrixCell { params, scaled })
    }

    /// `M̃` itself.
    pub fn m_tilde(&self) -> Matrix2<f64> {
        self.scaled / self.scale()
    }

    /// `P = (1−γ)^r M̃`.
    pub fn scaled(&self) -> Matrix2<f64> {
        self.scaled
    }

    fn scale(&self) -> f64 {
        (1.0 - self.params.gamma).powi(self.params.r as i32)
    }

    /// `(1−γ)^{2r} det(M̃ + s·I)` for `s = ±1`; same sign and roots as the
    /// unscaled determinant.
    pub fn branch_value(&self, branch: Branch) -> f64 {
        let c = self.scale();
        let p = &self.scaled;
        p.determinant() + branch.sign() * c * p.trace() + c * c
    }

    /// `det(M̃ ± I)` without rescaling.
    pub fn det_shifted(&self, branch: Branch) -> f64 {
        (self.m_tilde() + Matrix2::identity() * branch.sign()).determinant()
    }

    pub fn region(&self) -> Region {
        if self.branch_value(Branch::Plus) * self.branch_value(Branch::Minus) > 0.0 {
            Region::Ordered
        } else {
            Region::Paramagnetic
        }
    }
}

pub fn cell_transfer_matrix(h: f64, j: f64, gamma: f64, r: usize) -> Result<TransferMatrixCell> {
    TransferMatrixCell::new(CellParams::new(h, j, gamma, r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// `det(M̃ + I) = 0`
    Plus,
    /// `det(M̃ − I) = 0`
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Branch::Plus => "+I",
            Branch::Minus => "-I",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Ordered,
    Paramagnetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalField {
    pub h: f64,
    pub branch: Branch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseBoundarySet {
    pub critical_fields: Vec<CriticalField>,
    pub j: f64,
    pub gamma: f64,
    pub r: usize,
    pub tolerance: f64,
    pub warnings: Vec<String>,
}

impl PhaseBoundarySet {
    pub fn fields(&self) -> Vec<f64> {
        self.critical_fields.iter().map(|c| c.h).collect()
    }

    pub fn positive(&self) -> Vec<f64> {
        self.fields().into_iter().filter(|&h| h > 0.0).collect()
    }
}

/// Samples per sign branch: islands near `|h| → 1` are `O(1/r²)` apart.
pub fn scan_samples(r: usize) -> usize {
    (40 * r * r).max(400)
}

fn bisect(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, mut fa: f64, tol: f64) -> Result<f64> {
    while (b - a).abs() > tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// All sign changes of `det(M̃(h) ± I)` on `[lo, hi]`, refined by bisection
/// to `|Δh| < tolerance`.
pub fn find_critical_fields(
    j: f64,
    gamma: f64,
    r: usize,
    interval: (f64, f64),
    tolerance: f64,
) -> Result<PhaseBoundarySet> {
    let (lo, hi) = interval;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::validation(format!("bad search interval [{lo}, {hi}]")));
    }
    if !(tolerance > 0.0) {
        return Err(Error::validation("tolerance must be positive"));
    }
    CellParams::new(0.0, j, gamma, r).validate()?;

    let n = scan_samples(r);
    let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let mut roots = Vec::new();
    let mut warnings = Vec::new();
    for branch in [Branch::Plus, Branch::Minus] {
        let f = |h: f64| cell_transfer_matrix(h, j, gamma, r).map(|c| c.branch_value(branch));
        let values = grid.iter().map(|&h| f(h)).collect::<Result<Vec<_>>>()?;
        for (i, w) in values.windows(2).enumerate() {
            let (a, b) = (grid[i], grid[i + 1]);
            if w[0] == 0.0 {
                roots.push(CriticalField { h: a, branch });
                if i == 0 {
                    warnings.push(format!("root at scan endpoint h = {a}; widen the interval"));
                }
            } else if w[0] * w[1] < 0.0 {
                roots.push(CriticalField { h: bisect(f, a, b, w[0], tolerance)?, branch });
            }
        }
        if values[n] == 0.0 {
            roots.push(CriticalField { h: hi, branch });
            warnings.push(format!("root at scan endpoint h = {hi}; widen the interval"));
        }
    }
    roots.sort_by(|a, b| a.h.total_cmp(&b.h));
    roots.dedup_by(|a, b| (a.h - b.h).abs() < 2.0 * tolerance);
    Ok(PhaseBoundarySet { critical_fields: roots, j, gamma, r, tolerance, warnings })
}

/// Largest spacing between adjacent critical fields with `|h| < h_max`.
pub fn largest_gap(set: &PhaseBoundarySet, h_max: f64) -> Option<f64> {
    let inside: Vec<f64> = set.fields().into_iter().filter(|h| h.abs() < h_max).collect();
    inside.windows(2).map(|w| w[1] - w[0]).reduce(f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    H,
    Gamma,
    J,
}

impl Axis {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "h" => Ok(Axis::H),
            "gamma" => Ok(Axis::Gamma),
            "J" | "j" => Ok(Axis::J),
            _ => Err(Error::validation(format!("unknown phase-diagram axis '{name}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::H => "h",
            Axis::Gamma => "gamma",
            Axis::J => "J",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub axis: Axis,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl AxisSpec {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => vec![],
            1 => vec![self.min],
            n => (0..n).map(|i| self.min + (self.max - self.min) * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub x: f64,
    pub y: f64,
    pub f_plus: f64,
    pub f_minus: f64,
    pub region: Region,
    /// A sign of `f±` differs from the next point along either axis.
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub x_axis: Axis,
    pub y_axis: Axis,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major, `ys.len()` rows of `xs.len()` points.
    pub points: Vec<GridPoint>,
}

impl PhaseDiagram {
    pub fn at(&self, ix: usize, iy: usize) -> &GridPoint {
        &self.points[iy * self.xs.len() + ix]
    }
}

/// Region labels and `f±` over a rectangular grid of two of `(h, γ, J)`;
/// the third comes from `fixed`.
pub fn phase_diagram_grid(
    x: &AxisSpec,
    y: &AxisSpec,
    fixed: CellParams,
    exec: Execution,
) -> Result<PhaseDiagram> {
    if x.axis == y.axis {
        return Err(Error::validation("phase-diagram axes must differ"));
    }
    let xs = x.values();
    let ys = y.values();
    let coords: Vec<(f64, f64)> = ys.iter().flat_map(|&b| xs.iter().map(move |&a| (a, b))).collect();
    let set = |p: &mut CellParams, axis: Axis, v: f64| match axis {
        Axis::H => p.h = v,
        Axis::Gamma => p.gamma = v,
        Axis::J => p.j = v,
    };
    let evaluated = par::map_indexed(&coords, exec, |i, &(a, b)| {
        let mut p = fixed;
        set(&mut p, x.axis, a);
        set(&mut p, y.axis, b);
        TransferMatrixCell::new(p)
            .map(|c| (c.branch_value(Branch::Plus), c.branch_value(Branch::Minus), c.region()))
            .map_err(|e| Error::at(i, e))
    });
    let evaluated = evaluated.into_iter().collect::<Result<Vec<_>>>()?;
    let nx = xs.len();
    let flips = |i: usize, k: usize| {
        let (a, b) = (&evaluated[i], &evaluated[k]);
        (a.0 > 0.0) != (b.0 > 0.0) || (a.1 > 0.0) != (b.1 > 0.0)
    };
    let points = coords
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| {
            let (ix, iy) = (i % nx, i / nx);
            let boundary = (ix + 1 < nx && flips(i, i + 1)) || (iy + 1 < ys.len() && flips(i, i + nx));
            let (f_plus, f_minus, region) = evaluated[i];
            GridPoint { x: a, y: b, f_plus, f_minus, region, boundary }
        })
        .collect();
    Ok(PhaseDiagram { x_axis: x.axis, y_axis: y.axis, xs, ys, points })
}

/// Number of disjoint paramagnetic intervals along a line of `h` values.
pub fn count_paramagnetic_runs(regions: &[Region]) -> usize {
    let mut count = 0;
    let mut inside = false;
    for &r in regions {
        let para = r == Region::Paramagnetic;
        if para && !inside {
            count += 1;
        }
        inside = para;
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_of_two_is_edge_factors_only() {
        let c = cell_transfer_matrix(0.3, 0.4, 0.2, 2).unwrap();
        let expect = site_factor(0.3, 0.2, 1.0, 0.4) * site_factor(0.3, 0.2, 0.4, 1.0);
        assert!((c.m_tilde() - expect).norm() < 1e-12);
    }

    #[test]
    fn product_is_associative() {
        let (h, g) = (0.37, 0.21);
        let a = site_factor(h, g, 1.0, 0.6);
        let b = site_factor(h, g, 1.0, 1.0);
        let c = site_factor(h, g, 0.6, 1.0);
        let cell = cell_transfer_matrix(h, 0.6, g, 3).unwrap();
        assert!(((a * b) * c - a * (b * c)).norm() < 1e-12);
        assert!((cell.m_tilde() - (a * b) * c).norm() < 1e-12);
    }

    #[test]
    fn unit_coupling_is_power_of_uniform_factor() {
        let (h, g) = (0.8, 0.45);
        let u = site_factor(h, g, 1.0, 1.0);
        for r in 1..6 {
            let cell = cell_transfer_matrix(h, 1.0, g, r).unwrap();
            assert!((cell.m_tilde() - u.pow(r as u32)).norm() < 1e-10 * u.norm().powi(r as i32));
        }
    }

    #[test]
    fn scaled_determinant_matches_unscaled() {
        let cell = cell_transfer_matrix(0.3, 0.4, 0.3, 3).unwrap();
        let c2 = (0.7f64).powi(6);
        for b in [Branch::Plus, Branch::Minus] {
            assert!((cell.branch_value(b) - c2 * cell.det_shifted(b)).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_closed_form() {
        for g in [0.1, 0.5, 0.9] {
            let cell = cell_transfer_matrix(0.3, 1.0, g, 1).unwrap();
            assert!((cell.det_shifted(Branch::Plus) - (2.0 - 0.6) / (1.0 - g)).abs() < 1e-12);
            assert!((cell.det_shifted(Branch::Minus) - (2.0 + 0.6) / (1.0 - g)).abs() < 1e-12);
            let set = find_critical_fields(1.0, g, 1, (-2.0, 2.0), 1e-12).unwrap();
            let f = set.fields();
            assert_eq!(f.len(), 2);
            assert!((f[0] + 1.0).abs() < 1e-10 && (f[1] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn ising_point_rejected() {
        assert!(cell_transfer_matrix(0.5, 0.4, 1.0, 2).is_err());
        assert!(cell_transfer_matrix(0.5, 0.4, 0.99, 2).is_ok());
    }

    #[test]
    fn no_roots_is_empty() {
        let set = find_critical_fields(1.0, 0.5, 1, (2.0, 3.0), 1e-10).unwrap();
        assert!(set.critical_fields.is_empty());
    }

    #[test]
    fn degenerate_grid_matches_scan() {
        let x = AxisSpec { axis: Axis::H, min: -1.2, max: 1.2, points: 241 };
        let y = AxisSpec { axis: Axis::Gamma, min: 0.3, max: 0.3, points: 1 };
        let d = phase_diagram_grid(&x, &y, CellParams::new(0.0, 0.4, 0.3, 2), Execution::Sequential).unwrap();
        let marks = d.points.iter().filter(|p| p.boundary).count();
        let set = find_critical_fields(0.4, 0.3, 2, (-1.2, 1.2), 1e-10).unwrap();
        assert_eq!(marks, set.critical_fields.len());
    }
}
