//! Ground-state quantum Fisher information of the modular XY chain.
//!
//! Three independent routes are provided:
//!
//! * [`qfi_finite_difference`]: centered fidelity from the Onishi overlap of
//!   two Bogoliubov vacua, `Q ≈ 8(1 − F)/ε²`, Richardson-refined. This is the
//!   reference value.
//! * [`qfi_trace_formula`]: `Q = −2 Tr(2M₂ − M₁²)` with
//!   `M₁ = Uᵀ∂U + Vᵀ∂V` and `M₂ = ½(Uᵀ∂²U + Vᵀ∂²V)`, from gauge-aligned
//!   central differences of the eigenvectors.
//! * [`qfi_bloch`]: perturbative sum over cell-momentum blocks, exact in the
//!   `ε → 0` limit and much cheaper for long closed chains.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{log_cos_sq_sum, polar_factor};
use crate::par::{self, Execution};
use crate::xy::{decompose, BogoliubovDecomposition, Boundary, Parameter, XYChainSpec};

/// Anisotropies closer to zero than this leave a degenerate ground state.
pub const MIN_ANISOTROPY: f64 = 1e-6;
/// Smallest finite-difference step accepted.
pub const MIN_STEP: f64 = 1e-9;
/// Relative change between refinements below which a result is converged.
pub const CONVERGENCE_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QfiMethod {
    OverlapFiniteDifference,
    TraceFormula,
    BlochPerturbative,
    ExactDiagonalization,
}

impl QfiMethod {
    pub fn name(self) -> &'static str {
        match self {
            QfiMethod::OverlapFiniteDifference => "overlap_finite_difference",
            QfiMethod::TraceFormula => "trace_formula",
            QfiMethod::BlochPerturbative => "bloch_perturbative",
            QfiMethod::ExactDiagonalization => "exact_diagonalization",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QfiResult {
    pub value: f64,
    pub parameter: Parameter,
    /// Final finite-difference step (0 for the perturbative route).
    pub step: f64,
    pub method: QfiMethod,
    pub spec: XYChainSpec,
    /// The last two refinements agree to [`CONVERGENCE_TOL`].
    pub converged: bool,
    /// Smallest quasiparticle energy below `1e-12` at the evaluation point.
    pub gap_closed: bool,
}

impl QfiResult {
    pub(crate) fn richardson(
        coarse: f64,
        fine: f64,
        step: f64,
        parameter: Parameter,
        method: QfiMethod,
        spec: &XYChainSpec,
        gap_closed: bool,
    ) -> Self {
        let value = (4.0 * fine - coarse) / 3.0;
        let converged = (fine - coarse).abs() <= CONVERGENCE_TOL * value.abs().max(1e-300);
        QfiResult {
            value: clamp_floor(value),
            parameter,
            step,
            method,
            spec: spec.clone(),
            converged,
            gap_closed,
        }
    }
}

/// Small negative values from rounding are clamped to zero.
fn clamp_floor(q: f64) -> f64 {
    if (-1e-8..0.0).contains(&q) {
        0.0
    } else {
        q
    }
}

/// `ε = 1e-5 · max(1, |λ|)` unless a step is given.
pub fn resolve_step(at: f64, step: Option<f64>) -> Result<f64> {
    let eps = step.unwrap_or(1e-5 * at.abs().max(1.0));
    if !(eps.is_finite() && eps >= MIN_STEP) {
        return Err(Error::validation(format!(
            "finite-difference step {eps:e} below {MIN_STEP:e}"
        )));
    }
    Ok(eps)
}

fn check_spec(spec: &XYChainSpec) -> Result<()> {
    spec.validate()?;
    if spec.anisotropy.abs() < MIN_ANISOTROPY {
        return Err(Error::validation(format!(
            "|gamma| = {:e} is below {MIN_ANISOTROPY:e}; the isotropic ground state is degenerate",
            spec.anisotropy.abs()
        )));
    }
    Ok(())
}

/// `|⟨ψ₁|ψ₂⟩| = √|det(U₁ᵀU₂ + V₁ᵀV₂)|`, clamped to `[0, 1]`.
pub fn onishi_overlap(d1: &BogoliubovDecomposition, d2: &BogoliubovDecomposition) -> Result<f64> {
    if d1.n_sites() != d2.n_sites() {
        return Err(Error::validation(format!(
            "decompositions of {} and {} sites",
            d1.n_sites(),
            d2.n_sites()
        )));
    }
    let w = d1.u.transpose() * &d2.u + d1.v.transpose() * &d2.v;
    let det = w.determinant();
    if !det.is_finite() {
        return Err(Error::numerical(
            "non-finite Onishi determinant",
            crate::linalg::fingerprint(&w),
        ));
    }
    Ok(det.abs().sqrt().clamp(0.0, 1.0))
}

/// `1 − |⟨ψ₁|ψ₂⟩|` from the principal angles between the two quasiparticle
/// subspaces. Agrees with `1 − onishi_overlap` but keeps relative precision
/// when the states nearly coincide.
pub fn infidelity(d1: &BogoliubovDecomposition, d2: &BogoliubovDecomposition) -> Result<f64> {
    if d1.n_sites() != d2.n_sites() {
        return Err(Error::validation("decompositions differ in size"));
    }
    let log_cos_sq = log_cos_sq_sum(&d1.stacked(), &d2.stacked())?;
    // F = √∏cos θ  ⇒  ln F = ¼ Σ ln cos²θ
    let value = -(0.25 * log_cos_sq).exp_m1();
    if !value.is_finite() {
        return Err(Error::numerical("non-finite overlap", "principal angles"));
    }
    Ok(value)
}

fn overlap_estimate(spec: &XYChainSpec, p: Parameter, eps: f64) -> Result<f64> {
    let x = spec.parameter(p);
    let lo = decompose(&spec.with_parameter(p, x - eps / 2.0))?;
    let hi = decompose(&spec.with_parameter(p, x + eps / 2.0))?;
    Ok(8.0 * infidelity(&lo, &hi)? / (eps * eps))
}

/// QFI from the centered Onishi fidelity at steps `ε` and `ε/2`, combined by
/// one Richardson step.
pub fn qfi_finite_difference(
    spec: &XYChainSpec,
    p: Parameter,
    step: Option<f64>,
) -> Result<QfiResult> {
    check_spec(spec)?;
    let eps = resolve_step(spec.parameter(p), step)?;
    let gap_closed = decompose(spec)?.gap_closed();
    let coarse = overlap_estimate(spec, p, eps)?;
    let fine = overlap_estimate(spec, p, eps / 2.0)?;
    Ok(QfiResult::richardson(
        coarse,
        fine,
        eps / 2.0,
        p,
        QfiMethod::OverlapFiniteDifference,
        spec,
        gap_closed,
    ))
}

/// Pieces of the trace expression. `u_term + v_term + interference` equals
/// the QFI; `trace_m1` should vanish.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceTerms {
    /// `2 Tr[(Uᵀ∂U)² − Uᵀ∂²U]`
    pub u_term: f64,
    /// `2 Tr[(Vᵀ∂V)² − Vᵀ∂²V]`
    pub v_term: f64,
    /// `4 Tr[Uᵀ∂U Vᵀ∂V]`
    pub interference: f64,
    pub trace_m1: f64,
}

impl TraceTerms {
    pub fn total(&self) -> f64 {
        self.u_term + self.v_term + self.interference
    }

    fn blend(coarse: &Self, fine: &Self) -> Self {
        let r = |a: f64, b: f64| (4.0 * b - a) / 3.0;
        TraceTerms {
            u_term: r(coarse.u_term, fine.u_term),
            v_term: r(coarse.v_term, fine.v_term),
            interference: r(coarse.interference, fine.interference),
            trace_m1: r(coarse.trace_m1, fine.trace_m1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFormulaResult {
    pub qfi: QfiResult,
    pub terms: TraceTerms,
}

/// Smallest singular value of `X±ᵀX` accepted when aligning gauges. Below
/// it the positive-energy subspace rotated too far within one step.
const ALIGNMENT_FLOOR: f64 = 0.5;

/// Rotate the columns of `x` onto `reference` with the orthogonal Procrustes
/// factor, fixing sign, ordering and mixing inside degenerate levels at once.
fn align(x: DMatrix<f64>, reference: &DMatrix<f64>) -> Result<Option<DMatrix<f64>>> {
    let (rot, smin) = polar_factor(x.transpose() * reference)?;
    if smin < ALIGNMENT_FLOOR {
        return Ok(None);
    }
    Ok(Some(x * rot))
}

fn trace_terms_at(spec: &XYChainSpec, p: Parameter, delta: f64) -> Result<Option<TraceTerms>> {
    let n = spec.n_sites;
    let x = spec.parameter(p);
    let center = decompose(spec)?.stacked();
    let plus = decompose(&spec.with_parameter(p, x + delta))?.stacked();
    let minus = decompose(&spec.with_parameter(p, x - delta))?.stacked();
    let (Some(plus), Some(minus)) = (align(plus, &center)?, align(minus, &center)?) else {
        return Ok(None);
    };
    let d1 = (&plus - &minus) / (2.0 * delta);
    let d2 = (&plus - &center * 2.0 + &minus) / (delta * delta);

    let u = center.rows(0, n);
    let v = center.rows(n, n);
    let a = u.transpose() * d1.rows(0, n);
    let b = v.transpose() * d1.rows(n, n);
    // Differentiating UᵀU + VᵀV = I twice fixes the sum of the curvature
    // traces to −‖∂[U; V]‖², which needs no second differences. Only the
    // split between the U and V parts comes from the noisier `d2` stencil.
    let curvature = -d1.norm_squared();
    let split = (u.transpose() * d2.rows(0, n)).trace() - (v.transpose() * d2.rows(n, n)).trace();
    let u2 = 0.5 * (curvature + split);
    let v2 = 0.5 * (curvature - split);
    Ok(Some(TraceTerms {
        u_term: 2.0 * ((&a * &a).trace() - u2),
        v_term: 2.0 * ((&b * &b).trace() - v2),
        interference: 4.0 * (&a * &b).trace(),
        trace_m1: a.trace() + b.trace(),
    }))
}

/// QFI from the trace of the second-order expansion of the Onishi matrix.
///
/// Eigenvectors at `λ ± δ` are aligned to those at `λ` before differencing;
/// if the alignment fails (the positive-energy subspace rotated by a level
/// crossing) the step is reduced tenfold, twice, before giving up.
pub fn qfi_trace_formula(
    spec: &XYChainSpec,
    p: Parameter,
    step: Option<f64>,
) -> Result<TraceFormulaResult> {
    check_spec(spec)?;
    let at = spec.parameter(p);
    let mut delta = step.unwrap_or(1e-4 * at.abs().max(1.0));
    resolve_step(at, Some(delta))?;
    let gap_closed = decompose(spec)?.gap_closed();
    for _ in 0..3 {
        let coarse = trace_terms_at(spec, p, delta)?;
        let fine = trace_terms_at(spec, p, delta / 2.0)?;
        if let (Some(c), Some(f)) = (coarse, fine) {
            let terms = TraceTerms::blend(&c, &f);
            let mut qfi = QfiResult::richardson(
                c.total(),
                f.total(),
                delta / 2.0,
                p,
                QfiMethod::TraceFormula,
                spec,
                gap_closed,
            );
            qfi.value = clamp_floor(terms.total());
            return Ok(TraceFormulaResult { qfi, terms });
        }
        delta /= 10.0;
        if delta < MIN_STEP {
            break;
        }
    }
    Err(Error::numerical(
        "gauge alignment failed: level crossing inside the difference stencil",
        format!("{}={at}", p.name()),
    ))
}

/// Perturbative QFI over cell-momentum blocks (closed chains only).
pub fn qfi_bloch(spec: &XYChainSpec, p: Parameter) -> Result<QfiResult> {
    check_spec(spec)?;
    let r = crate::xy::qfi_bloch(spec, p)?;
    Ok(QfiResult {
        value: clamp_floor(r.value),
        parameter: p,
        step: 0.0,
        method: QfiMethod::BlochPerturbative,
        spec: spec.clone(),
        converged: true,
        gap_closed: r.gap_closed,
    })
}

/// Evaluate with the requested method.
pub fn qfi(spec: &XYChainSpec, p: Parameter, method: QfiMethod, step: Option<f64>) -> Result<QfiResult> {
    match method {
        QfiMethod::OverlapFiniteDifference => qfi_finite_difference(spec, p, step),
        QfiMethod::TraceFormula => qfi_trace_formula(spec, p, step).map(|r| r.qfi),
        QfiMethod::BlochPerturbative => qfi_bloch(spec, p),
        QfiMethod::ExactDiagonalization => {
            let sector = ground_sector(spec)?;
            crate::ed::qfi_ed(spec, p, step, crate::ed::Sector::Parity(sector.spin_parity))
        }
    }
}

/// Fastest applicable route: momentum blocks for closed chains with a
/// cell-periodic field, the overlap route otherwise.
pub fn qfi_auto(spec: &XYChainSpec, p: Parameter) -> Result<QfiResult> {
    if spec.boundary.is_closed() && spec.field_is_cell_periodic() {
        qfi_bloch(spec, p)
    } else {
        qfi_finite_difference(spec, p, None)
    }
}

/// One QFI per grid value of `p`, computed independently and returned in
/// grid order. A failing point aborts the scan with its index attached.
pub fn qfi_scan(
    template: &XYChainSpec,
    p: Parameter,
    grid: &[f64],
    method: QfiMethod,
    exec: Execution,
) -> Result<Vec<QfiResult>> {
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("scan grid contains non-finite values"));
    }
    let results = par::map(grid, exec, |&x| qfi(&template.with_parameter(p, x), p, method, None));
    results
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::at(i, e)))
        .collect()
}

/// Parity sector hosting the lowest physical free-fermion ground state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorChoice {
    /// Fermionic boundary condition of the chosen sector.
    pub boundary: Boundary,
    /// Matching eigenvalue of `∏σᶻ` in the spin model.
    pub spin_parity: i8,
    pub energy: f64,
}

/// Pick the parity sector of a spin chain's ground state.
///
/// On a ring, even fermion parity pairs with antiperiodic fermions and odd
/// parity with periodic ones; a vacuum whose own parity disagrees with its
/// sector is not a physical state. The lower of the physical vacua wins.
/// Open chains have a single sector.
pub fn ground_sector(spec: &XYChainSpec) -> Result<SectorChoice> {
    let sign_n: i8 = if spec.n_sites.is_multiple_of(2) { 1 } else { -1 };
    if !spec.boundary.is_closed() {
        let d = decompose(spec)?;
        return Ok(SectorChoice {
            boundary: Boundary::Open,
            spin_parity: sign_n * d.vacuum_parity(),
            energy: d.ground_energy(),
        });
    }
    let mut best: Option<SectorChoice> = None;
    for (boundary, required) in [(Boundary::Antiperiodic, 1i8), (Boundary::Periodic, -1i8)] {
        let d = decompose(&spec.clone().with_boundary(boundary))?;
        if d.vacuum_parity() != required {
            continue;
        }
        let cand = SectorChoice {
            boundary,
            spin_parity: sign_n * required,
            energy: d.ground_energy(),
        };
        if best.is_none_or(|b| cand.energy < b.energy) {
            best = Some(cand);
        }
    }
    best.ok_or_else(|| {
        Error::numerical("no physical parity sector", format!("N={}", spec.n_sites))
    })
}
