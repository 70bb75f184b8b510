use active_stokes::experiments::{run, run_all, ExperimentId, ExperimentSpec, Manifest, RunOptions};

#[test]
fn quick_manifest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions { out_dir: Some(dir.path().to_path_buf()), ..RunOptions::default() };
    let summary = run_all(&Manifest::quick().experiment, &opts).unwrap();
    for line in summary.lines() {
        println!("{line}");
    }
    assert!(summary.passed(), "{:?}", summary.first_failure);
    for id in ExperimentId::ALL {
        assert!(dir.path().join(format!("{id}.csv")).exists());
        assert!(dir.path().join(format!("{id}.toml")).exists());
    }
}

#[test]
fn concurrent_and_sequential_runs_agree() {
    let specs = vec![
        ExperimentSpec::new(ExperimentId::SeparationDiagnostics).with_param("ns", toml::Value::Array(vec![400.into()])),
        ExperimentSpec::new(ExperimentId::EnergySigns).with_param("grid", 2),
        ExperimentSpec::new(ExperimentId::EnergySigns).with_param("grid", 3),
    ];
    let a = run_all(&specs, &RunOptions::default()).unwrap();
    let b = run_all(&specs, &RunOptions { concurrent: true, ..RunOptions::default() }).unwrap();
    let stems: Vec<_> = a.reports.iter().map(|r| r.stem.clone()).collect();
    assert_eq!(stems, ["separation_diagnostics", "energy_signs", "energy_signs_1"]);
    for (x, y) in a.reports.iter().zip(&b.reports) {
        assert_eq!(x.csv.render(), y.csv.render());
        assert_eq!(x.input_hash, y.input_hash);
    }
}

#[test]
fn seed_override_keeps_the_list_length() {
    let spec = ExperimentSpec::new(ExperimentId::SeparationDiagnostics).with_param("ns", toml::Value::Array(vec![300.into()]));
    let r = run(&spec, &RunOptions { seed: Some(40), ..RunOptions::default() });
    assert_eq!(r.params.seeds, vec![40, 41, 42]);
    assert!(r.passed());
}
