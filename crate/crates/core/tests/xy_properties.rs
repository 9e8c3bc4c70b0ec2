use modsense::linalg::eigh;
use modsense::xy::{build_bdg_matrix, decompose, Boundary, XYChainSpec};
use proptest::prelude::*;

fn boundary() -> impl Strategy<Value = Boundary> {
    prop_oneof![Just(Boundary::Periodic), Just(Boundary::Antiperiodic), Just(Boundary::Open)]
}

prop_compose! {
    fn chain()(r in 1usize..5, l in 3usize..8, j in 0.1f64..2.0, j0 in 0.5f64..1.5,
               gamma in -1.0f64..1.0, h in -2.0f64..2.0, b in boundary()) -> XYChainSpec {
        XYChainSpec::new(r * l, r).unwrap()
            .with_inter_coupling(j)
            .with_intra_coupling(j0)
            .with_anisotropy(gamma)
            .with_field(h)
            .with_boundary(b)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bogoliubov_columns_are_orthonormal(spec in chain()) {
        prop_assert!(decompose(&spec).unwrap().orthonormality_residual() < 1e-10);
    }

    #[test]
    fn spectrum_comes_in_opposite_pairs(spec in chain()) {
        let (vals, _) = eigh(build_bdg_matrix(&spec).unwrap().full()).unwrap();
        for (a, b) in vals.iter().zip(vals.iter().rev()) {
            prop_assert!((a + b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn quasiparticle_energies_are_sorted_and_nonnegative(spec in chain()) {
        let d = decompose(&spec).unwrap();
        prop_assert!(d.energies.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(d.energies[0] >= 0.0);
        prop_assert!((d.ground_energy() + d.energies.iter().sum::<f64>()).abs() < 1e-9 * d.energies.len() as f64);
    }

    #[test]
    fn flipping_anisotropy_negates_pairing_block(spec in chain()) {
        let flipped = spec.clone().with_anisotropy(-spec.anisotropy);
        let (m, f) = (build_bdg_matrix(&spec).unwrap(), build_bdg_matrix(&flipped).unwrap());
        prop_assert_eq!(&m.a, &f.a);
        prop_assert_eq!(&m.b, &(-&f.b));
        let (e, ef) = (decompose(&spec).unwrap().energies, decompose(&flipped).unwrap().energies);
        for (x, y) in e.iter().zip(&ef) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn unit_inter_coupling_equals_uniform_chain(r in 1usize..6, l in 3usize..10, gamma in -1.0f64..1.0,
                                                h in -2.0f64..2.0, b in boundary()) {
        let modular = XYChainSpec::new(r * l, r).unwrap().with_inter_coupling(1.0)
            .with_anisotropy(gamma).with_field(h).with_boundary(b);
        let uniform = XYChainSpec::uniform(r * l).unwrap().with_anisotropy(gamma).with_field(h).with_boundary(b);
        let (m, u) = (build_bdg_matrix(&modular).unwrap(), build_bdg_matrix(&uniform).unwrap());
        prop_assert_eq!(m.a.as_slice(), u.a.as_slice());
        prop_assert_eq!(m.b.as_slice(), u.b.as_slice());
    }

    #[test]
    fn bond_list_follows_cell_pattern(spec in chain()) {
        let bonds = spec.build_couplings().unwrap();
        let closed = spec.boundary.is_closed();
        prop_assert_eq!(bonds.len(), if closed { spec.n_sites } else { spec.n_sites - 1 });
        for (j, &c) in bonds.iter().enumerate() {
            let crosses = (j + 1) % spec.cell_size == 0;
            let want = if crosses { spec.inter_coupling } else { spec.intra_coupling };
            prop_assert_eq!(c, want);
        }
    }

    #[test]
    fn bdg_blocks_have_required_symmetry(spec in chain()) {
        let m = build_bdg_matrix(&spec).unwrap();
        prop_assert_eq!(&m.a, &m.a.transpose());
        prop_assert_eq!(&m.b, &(-m.b.transpose()));
    }
}
