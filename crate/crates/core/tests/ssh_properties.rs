use modsense::par::Execution;
use modsense::ssh::{
    band_susceptibilities, bands_at, build_bloch, chiral_operator, closed_form_band_susceptibility, closed_form_omegas,
    gap_closings, half_filling_qfi, min_band_gap, winding_number, SshChainSpec,
};
use proptest::prelude::*;
use std::f64::consts::PI;

prop_compose! {
    fn chain()(r in 1usize..5, j2 in 0.2f64..3.0, j in 0.1f64..4.0) -> SshChainSpec {
        SshChainSpec::new(r, j2, j, 16).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bloch_matrix_is_hermitian_and_chiral(spec in chain(), p in -PI..PI) {
        let h = build_bloch(&spec, p);
        prop_assert!((&h - h.adjoint()).norm() < 1e-12);
        let g = chiral_operator(spec.bands());
        prop_assert!((&g * &h * &g + &h).norm() < 1e-12);
    }

    #[test]
    fn bands_pair_and_vectors_are_orthonormal(spec in chain(), p in -PI..PI) {
        let b = bands_at(&spec, p).unwrap();
        for (lo, hi) in b.energies.iter().zip(b.energies.iter().rev()) {
            prop_assert!((lo + hi).abs() < 1e-10);
        }
        let v = &b.vectors;
        let gram = v.adjoint() * v;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((gram[(i, j)].re - want).abs() < 1e-10 && gram[(i, j)].im.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn two_dimer_cell_matches_closed_forms(j2 in 0.2f64..3.0, j in 0.1f64..4.0, p in -PI..PI) {
        prop_assume!((j - j2).abs() > 1e-2 && (j * j2 - 1.0).abs() > 1e-2);
        let spec = SshChainSpec::new(2, j2, j, 16).unwrap();
        let e = bands_at(&spec, p).unwrap().energies;
        let (w1, w2) = closed_form_omegas(j2, j, p);
        for (got, want) in e.iter().zip([-w2, -w1, w1, w2]) {
            prop_assert!((got - want).abs() < 1e-10);
        }
        let chi = band_susceptibilities(&spec, p).unwrap().chi;
        for (band, c) in chi.iter().enumerate() {
            let cf = closed_form_band_susceptibility(j2, j, p, band).unwrap();
            prop_assert!((cf - c).abs() <= 1e-8 * c.abs().max(1e-12), "band {band}: {cf} vs {c}");
        }
    }

    #[test]
    fn index_is_quantized_wherever_the_gap_is_open(spec in chain()) {
        let gap = min_band_gap(&spec, spec.dimers_per_cell - 1, 401).unwrap().0;
        prop_assume!(gap > 1e-3);
        let w = winding_number(&spec, 401).unwrap();
        prop_assert!(w.residual < 0.05, "residual {}", w.residual);
        prop_assert!(w.index >= 0);
    }
}

/// Closings, index jumps and QFI peaks all sit at `J = J2` and `J = 1/J2`.
#[test]
fn boundary_detectors_agree() {
    let j2 = 2.0;
    let base = SshChainSpec::new(2, j2, 1.0, 100).unwrap();
    let closings: Vec<f64> = gap_closings(&base, (0.1, 4.0), 200, 256).unwrap().iter().map(|g| g.j).collect();
    let js: Vec<f64> = (0..=390).map(|i| 0.1 + 0.01 * i as f64 + 0.005).collect();
    let index: Vec<i64> = js.iter().map(|&j| winding_number(&base.with_inter_coupling(j), 401).unwrap().index).collect();
    let jumps: Vec<f64> = js.windows(2).zip(index.windows(2)).filter(|(_, w)| w[0] != w[1]).map(|(j, _)| 0.5 * (j[0] + j[1])).collect();
    let q: Vec<f64> = js
        .iter()
        .map(|&j| half_filling_qfi(&base.with_inter_coupling(j), Execution::Sequential).unwrap().qfi)
        .collect();
    let peaks: Vec<f64> = (1..js.len() - 1).filter(|&i| q[i] > q[i - 1] && q[i] > q[i + 1]).map(|i| js[i]).collect();
    for want in [0.5, 2.0] {
        assert!(closings.iter().any(|c| (c - want).abs() < 1e-3), "closings {closings:?}");
        assert!(jumps.iter().any(|c| (c - want).abs() <= 0.01), "index jumps {jumps:?}");
        assert!(peaks.iter().any(|c| (c - want).abs() <= 0.01), "QFI peaks {peaks:?}");
    }
    assert_eq!(jumps.len(), 2, "{jumps:?}");
}

#[test]
fn momentum_sum_converges_per_site() {
    for (j, j2) in [(1.0, 2.0), (3.0, 2.0), (0.3, 2.0), (1.2, 0.6)] {
        let per_site = |l: usize| {
            let spec = SshChainSpec::new(2, j2, j, l).unwrap();
            half_filling_qfi(&spec, Execution::Sequential).unwrap().qfi / spec.n_sites() as f64
        };
        let (a, b) = (per_site(200), per_site(400));
        assert!((a - b).abs() < 0.01 * b, "({j}, {j2}): {a} vs {b}");
    }
}
