use modsense::ed::{ground_state, qfi_ed, Sector};
use modsense::qfi::{ground_sector, qfi_finite_difference};
use modsense::xy::{decompose, Boundary, Parameter, XYChainSpec};

fn chain(n: usize, r: usize, j: f64, gamma: f64, h: f64) -> XYChainSpec {
    XYChainSpec::new(n, r)
        .unwrap()
        .with_inter_coupling(j)
        .with_anisotropy(gamma)
        .with_field(h)
        .with_boundary(Boundary::Periodic)
}

#[test]
fn ground_energy_matches_spin_model() {
    for (n, r, j, g, h) in [(6, 2, 0.4, 0.3, 0.2), (8, 2, 0.7, 0.5, 0.9), (9, 3, 0.4, 0.6, 0.05), (8, 4, 1.3, 0.2, 1.1)] {
        let spec = chain(n, r, j, g, h);
        let ed = ground_state(&spec, Sector::Full).unwrap();
        let ff = ground_sector(&spec).unwrap();
        assert!((ed.energy - ff.energy).abs() < 1e-9, "N={n}: ed {} ff {}", ed.energy, ff.energy);
        let blk = ground_state(&spec, Sector::Parity(ff.spin_parity)).unwrap();
        assert!((blk.energy - ff.energy).abs() < 1e-9);
    }
}

#[test]
fn open_chain_energy_matches() {
    let spec = chain(7, 1, 1.0, 0.4, 0.6).with_boundary(Boundary::Open);
    let ed = ground_state(&spec, Sector::Full).unwrap();
    let ff = decompose(&spec).unwrap();
    assert!((ed.energy - ff.ground_energy()).abs() < 1e-9);
}

#[test]
fn qfi_matches_exact_diagonalization() {
    for (n, r, j, g, h) in [(6, 2, 0.4, 0.3, 0.5), (8, 2, 0.4, 0.3, 0.214), (10, 2, 0.7, 0.5, 1.3)] {
        let spec = chain(n, r, j, g, h);
        let sector = ground_sector(&spec).unwrap();
        let ff_spec = spec.clone().with_boundary(sector.boundary);
        for p in [Parameter::Field, Parameter::InterCoupling] {
            let ff = qfi_finite_difference(&ff_spec, p, None).unwrap();
            let ed = qfi_ed(&spec, p, None, Sector::Parity(sector.spin_parity)).unwrap();
            let rel = (ff.value - ed.value).abs() / ed.value;
            assert!(rel < 1e-6, "N={n} {p:?}: ff {} ed {} rel {rel:e}", ff.value, ed.value);
        }
    }
}
