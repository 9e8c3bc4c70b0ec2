use std::fs;
use std::path::Path;

use modsense::orchestrator::{run, RunOptions, SweepConfig, Table};
use proptest::prelude::*;

fn config(task: &str, counts: (usize, usize), workers: usize) -> SweepConfig {
    let body = match task {
        "qfi-scan" => format!(
            r#"{{"task": "qfi-scan", "xy": {{"n_sites": 16, "cell_size": 2}},
                "axes": [{{"name": "h", "min": -1, "max": 1, "count": {}}}, {{"name": "gamma", "min": 0.1, "max": 0.9, "count": {}}}]}}"#,
            counts.0, counts.1
        ),
        "phase-diagram" => format!(
            r#"{{"task": "phase-diagram", "xy": {{"cell_size": 3}},
                "axes": [{{"name": "h", "min": -1.2, "max": 1.2, "count": {}}}, {{"name": "J", "min": 0.2, "max": 1.5, "count": {}}}]}}"#,
            counts.0, counts.1
        ),
        _ => format!(
            r#"{{"task": "ssh-winding", "ssh": {{"dimers_per_cell": 2}},
                "axes": [{{"name": "J", "min": 0.15, "max": 3.05, "count": {}}}, {{"name": "J2", "min": 0.35, "max": 2.95, "count": {}}}]}}"#,
            counts.0, counts.1
        ),
    };
    SweepConfig::from_json(&body, &[format!("workers={workers}")]).unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file() && p.file_name().unwrap() != "run.meta.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn task() -> impl Strategy<Value = &'static str> {
    prop_oneof![Just("qfi-scan"), Just("phase-diagram"), Just("ssh-winding")]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn output_bytes_do_not_depend_on_workers(task in task(), a in 1usize..7, b in 1usize..5, w in 2usize..9) {
        let dir = tempfile::tempdir().unwrap();
        let mut outputs = Vec::new();
        for workers in [1, w] {
            let out = dir.path().join(format!("w{workers}"));
            let opts = RunOptions { out: out.clone(), cache_dir: Some(dir.path().join(format!("cache{workers}"))) };
            run(&config(task, (a, b), workers), &opts).unwrap();
            outputs.push(files(&out));
        }
        prop_assert_eq!(&outputs[0], &outputs[1]);
    }

    #[test]
    fn tables_have_one_row_per_grid_point_and_carry_the_hash(task in task(), a in 1usize..7, b in 1usize..5) {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(task, (a, b), 2);
        let opts = RunOptions { out: dir.path().join("out"), cache_dir: Some(dir.path().join("cache")) };
        let report = run(&cfg, &opts).unwrap();
        let hash = cfg.hash();
        for path in &report.files {
            let text = fs::read_to_string(path).unwrap();
            prop_assert!(text.contains(&hash), "{} lacks the config hash", path.display());
        }
        let main = Table::load(&report.files[0]).unwrap();
        prop_assert_eq!(main.len(), a * b);
        prop_assert_eq!(main.meta("config_sha256"), Some(hash.as_str()));
    }
}

#[test]
fn rerun_with_cache_recomputes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("qfi-scan", (6, 3), 4);
    let opts = RunOptions { out: dir.path().join("out"), cache_dir: Some(dir.path().join("cache")) };
    let first = run(&cfg, &opts).unwrap();
    let before = files(&opts.out);
    let second = run(&cfg, &opts).unwrap();
    assert_eq!((first.computed, first.cached), (18, 0));
    assert_eq!((second.computed, second.cached), (0, 18));
    assert_eq!(before, files(&opts.out));
}
