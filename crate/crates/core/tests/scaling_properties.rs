use modsense::par::Execution;
use modsense::phase::find_critical_fields;
use modsense::qfi::qfi_auto;
use modsense::scaling::{collapse_cost, fit_collapse, loglog_slope, CollapseOptions, ScalingDataset, ScalingRecord};
use modsense::xy::{Parameter, XYChainSpec};
use proptest::prelude::*;

const SIZES: [usize; 4] = [40, 80, 160, 320];

/// Data obeying `Q = N^{β/ν} f(N^{1/ν}(h − h_c))` exactly.
fn planted(beta: f64, nu: f64, h_c: f64) -> ScalingDataset {
    let f = |x: f64| 1.0 / (1.0 + x * x) + 0.2;
    let mut recs = Vec::new();
    for &n in &SIZES {
        let nf = n as f64;
        for i in 0..41 {
            let x = -4.0 + 8.0 * i as f64 / 40.0;
            let h = h_c + x / nf.powf(1.0 / nu);
            recs.push(ScalingRecord { n, h, q: nf.powf(beta / nu) * f(x) });
        }
    }
    ScalingDataset::new(recs).unwrap()
}

fn opts() -> CollapseOptions {
    CollapseOptions { window: f64::INFINITY, ..CollapseOptions::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn collapse_recovers_planted_exponents(beta in 1.2f64..2.6, nu in 0.6f64..1.6, h_c in -1.0f64..1.0) {
        let fit = fit_collapse(&planted(beta, nu, h_c), h_c, &opts(), Execution::Sequential).unwrap();
        prop_assert!((fit.beta - beta).abs() < 0.02 && (fit.nu - nu).abs() < 0.02,
            "planted ({beta}, {nu}), fitted ({}, {})", fit.beta, fit.nu);
        prop_assert!(fit.collapse_cost >= 0.0);
    }

    #[test]
    fn rescaling_all_data_leaves_fit_unchanged(beta in 1.2f64..2.6, nu in 0.6f64..1.6, factor in 1e-3f64..1e3) {
        let data = planted(beta, nu, 0.3);
        let a = fit_collapse(&data, 0.3, &opts(), Execution::Sequential).unwrap();
        let b = fit_collapse(&data.scaled(factor), 0.3, &opts(), Execution::Sequential).unwrap();
        prop_assert!((a.beta - b.beta).abs() < 1e-6 && (a.nu - b.nu).abs() < 1e-6);
    }

    #[test]
    fn cost_is_nonnegative(beta in 0.5f64..3.0, nu in 0.3f64..3.0) {
        prop_assert!(collapse_cost(&planted(2.0, 1.0, 0.0), beta, nu, 0.0) >= 0.0);
    }

    #[test]
    fn loglog_slope_recovers_power_laws(s in -3.0f64..3.0, a in 1e-3f64..1e3) {
        let pts: Vec<(f64, f64)> = SIZES.iter().map(|&n| (n as f64, a * (n as f64).powf(s))).collect();
        let fit = loglog_slope(&pts).unwrap();
        prop_assert!((fit.slope - s).abs() < 1e-10 && fit.stderr < 1e-8);
    }
}

#[test]
fn loglog_slope_rejects_nonpositive_values() {
    assert!(loglog_slope(&[(10.0, 1.0), (20.0, 0.0), (40.0, 2.0)]).is_err());
}

/// Both positive critical fields of one chain fall in the same class, and the
/// collapse exponents agree with the direct slope of `Q(h_c)`.
#[test]
fn critical_points_share_exponents() {
    let roots = find_critical_fields(0.4, 0.3, 2, (0.0, 1.5), 1e-12).unwrap().positive();
    let sizes = [160, 320, 640, 1280];
    let mut fits = Vec::new();
    for &h_c in &roots {
        let mut recs = Vec::new();
        for &n in &sizes {
            let spec = XYChainSpec::new(n, 2).unwrap().with_inter_coupling(0.4).with_anisotropy(0.3);
            for i in 0..41 {
                let h = h_c + (-4.0 + 8.0 * i as f64 / 40.0) / n as f64;
                let q = qfi_auto(&spec.clone().with_field(h), Parameter::Field).unwrap().value;
                recs.push(ScalingRecord { n, h, q });
            }
        }
        let data = ScalingDataset::new(recs).unwrap();
        let fit = fit_collapse(&data, h_c, &CollapseOptions::default(), Execution::Parallel).unwrap();
        let slope = fit.slope_at_h_c.clone().unwrap();
        // at h = h_c the ansatz gives Q ~ N^{beta/nu}
        let ratio = fit.beta / fit.nu;
        let ratio_err = fit.beta_err / fit.nu + fit.beta * fit.nu_err / (fit.nu * fit.nu);
        assert!(
            (ratio - slope.slope).abs() <= ratio_err + 2.0 * slope.stderr,
            "h_c {h_c}: beta/nu {ratio} ± {ratio_err} vs slope {} ± {}",
            slope.slope,
            slope.stderr
        );
        fits.push(fit);
    }
    assert!((fits[0].beta - fits[1].beta).abs() < 0.1, "{} vs {}", fits[0].beta, fits[1].beta);
    assert!((fits[0].nu - fits[1].nu).abs() < 0.1, "{} vs {}", fits[0].nu, fits[1].nu);
}
