macro_rules! example {
    ($module:ident, $file:literal) => {
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }
    };
}

example!(kernels, "kernels.rs");
example!(swimmer, "swimmer.rs");
example!(suspension, "suspension.rs");
example!(effective, "effective.rs");
example!(fokker_planck, "fokker_planck.rs");
example!(stats, "stats.rs");
example!(experiments, "experiments.rs");

#[test]
fn every_example_runs() {
    kernels::run_example().expect("kernels");
    swimmer::run_example().expect("swimmer");
    suspension::run_example().expect("suspension");
    effective::run_example().expect("effective");
    fokker_planck::run_example().expect("fokker_planck");
    stats::run_example().expect("stats");
    experiments::run_example().expect("experiments");
}
