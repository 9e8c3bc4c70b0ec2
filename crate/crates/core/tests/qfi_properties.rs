use modsense::qfi::{qfi_auto, qfi_finite_difference, qfi_trace_formula};
use modsense::xy::{decompose, Boundary, Parameter, XYChainSpec};
use proptest::prelude::*;

fn param() -> impl Strategy<Value = Parameter> {
    prop_oneof![Just(Parameter::Field), Just(Parameter::InterCoupling), Just(Parameter::Anisotropy)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    // The map c_j -> (-1)^j c_j^dagger that sends h to -h respects a ring's
    // boundary only when N is even.
    #[test]
    fn qfi_is_even_in_uniform_field(r in 1usize..5, l in 4usize..30, j in 0.1f64..2.0,
                                    gamma in 0.05f64..0.95, h in 0.0f64..2.0) {
        prop_assume!((r * l) % 2 == 0);
        let spec = XYChainSpec::new(r * l, r).unwrap().with_inter_coupling(j).with_anisotropy(gamma);
        let plus = qfi_auto(&spec.clone().with_field(h), Parameter::Field).unwrap();
        let minus = qfi_auto(&spec.with_field(-h), Parameter::Field).unwrap();
        prop_assume!(!plus.gap_closed);
        prop_assert!((plus.value - minus.value).abs() <= 1e-8 * plus.value.abs().max(1e-12),
            "{} vs {}", plus.value, minus.value);
    }

    #[test]
    fn overlap_and_trace_routes_agree(r in 1usize..4, l in 3usize..8, j in 0.2f64..1.6,
                                      gamma in 0.1f64..0.9, h in -1.5f64..1.5, p in param(),
                                      open in any::<bool>()) {
        let b = if open { Boundary::Open } else { Boundary::Antiperiodic };
        let spec = XYChainSpec::new(r * l, r).unwrap().with_inter_coupling(j).with_anisotropy(gamma)
            .with_field(h).with_boundary(b);
        // an edge mode pinned near zero energy makes every finite-difference route ill-conditioned
        prop_assume!(decompose(&spec).unwrap().min_energy() > 1e-6);
        let ov = qfi_finite_difference(&spec, p, None).unwrap();
        let tr = qfi_trace_formula(&spec, p, None).unwrap().qfi;
        prop_assume!(ov.converged && tr.converged && !ov.gap_closed);
        prop_assert!(ov.value >= 0.0 && tr.value >= 0.0);
        prop_assert!((ov.value - tr.value).abs() <= 1e-4 * ov.value.max(tr.value).max(1e-8),
            "overlap {} trace {}", ov.value, tr.value);
    }
}
