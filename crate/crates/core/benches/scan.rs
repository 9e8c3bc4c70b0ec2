use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use modsense::par::Execution;
use modsense::qfi::{qfi_scan, QfiMethod};
use modsense::ssh::{half_filling_qfi, SshChainSpec};
use modsense::xy::{Parameter, XYChainSpec};

fn modes() -> Vec<(&'static str, Execution)> {
    let mut m = vec![("sequential", Execution::Sequential)];
    if cfg!(feature = "parallel") {
        m.push(("parallel", Execution::Parallel));
    }
    m
}

fn field_scan(c: &mut Criterion) {
    let template = XYChainSpec::new(100, 2)
        .unwrap()
        .with_inter_coupling(0.4)
        .with_anisotropy(0.3);
    let grid: Vec<f64> = (0..48).map(|i| i as f64 * 0.025).collect();
    let mut group = c.benchmark_group("qfi_scan_N100");
    group.sample_size(10);
    for (name, exec) in modes() {
        for method in [QfiMethod::BlochPerturbative, QfiMethod::OverlapFiniteDifference] {
            group.bench_with_input(BenchmarkId::new(name, method.name()), &exec, |b, &exec| {
                b.iter(|| qfi_scan(&template, Parameter::Field, &grid, method, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn ssh_sum(c: &mut Criterion) {
    let spec = SshChainSpec::new(2, 2.0, 1.0, 400).unwrap();
    let mut group = c.benchmark_group("ssh_half_filling_l400");
    for (name, exec) in modes() {
        group.bench_function(name, |b| b.iter(|| half_filling_qfi(&spec, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, field_scan, ssh_sum);
criterion_main!(benches);
