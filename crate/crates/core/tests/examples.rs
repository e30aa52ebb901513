//! Every runnable example doubles as a smoke test.

#[allow(dead_code)]
#[path = "../examples/baselines.rs"]
mod baselines;

#[allow(dead_code)]
#[path = "../examples/donor_selection.rs"]
mod donor_selection;

#[allow(dead_code)]
#[path = "../examples/donor_sweep.rs"]
mod donor_sweep;

#[allow(dead_code)]
#[path = "../examples/fallback_pipeline.rs"]
mod fallback_pipeline;

#[allow(dead_code)]
#[path = "../examples/file_formats.rs"]
mod file_formats;

#[allow(dead_code)]
#[path = "../examples/hsvt_denoise.rs"]
mod hsvt_denoise;

#[allow(dead_code)]
#[path = "../examples/loo_benchmark.rs"]
mod loo_benchmark;

#[allow(dead_code)]
#[path = "../examples/recover_identifiable.rs"]
mod recover_identifiable;

#[allow(dead_code)]
#[path = "../examples/structural_model.rs"]
mod structural_model;

#[allow(dead_code)]
#[path = "../examples/subspace_test.rs"]
mod subspace_test;


#[test]
fn baselines_example_runs() {
    baselines::run().expect("baselines example should run");
}

#[test]
fn donor_selection_example_runs() {
    donor_selection::run().expect("donor_selection example should run");
}

#[test]
fn donor_sweep_example_runs() {
    donor_sweep::run().expect("donor_sweep example should run");
}

#[test]
fn fallback_pipeline_example_runs() {
    fallback_pipeline::run().expect("fallback_pipeline example should run");
}

#[test]
fn file_formats_example_runs() {
    file_formats::run().expect("file_formats example should run");
}

#[test]
fn hsvt_denoise_example_runs() {
    hsvt_denoise::run().expect("hsvt_denoise example should run");
}

#[test]
fn loo_benchmark_example_runs() {
    loo_benchmark::run().expect("loo_benchmark example should run");
}

#[test]
fn recover_identifiable_example_runs() {
    recover_identifiable::run().expect("recover_identifiable example should run");
}

#[test]
fn structural_model_example_runs() {
    structural_model::run().expect("structural_model example should run");
}

#[test]
fn subspace_test_example_runs() {
    subspace_test::run().expect("subspace_test example should run");
}

#[test]
fn tandem_example_runs() {
    tandem::run().expect("tandem example should run");
}
