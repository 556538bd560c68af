use std::sync::Arc;

use arhgof::arh::{self, ArhSpec, KernelFamily, KernelSpec, Nonlinearity};
use arhgof::experiment::{run_experiment, ExperimentConfig};
use arhgof::gof::{self, GofOptions};
use arhgof::sde::{self, SdeKind, SdeModel};
use arhgof::spectest::{self, SpecTestOptions};
use arhgof::{rng, Execution, Grid};
use rand::Rng;

fn arh1(n: usize, seed: u64) -> arhgof::FunctionalSample {
    let spec = ArhSpec {
        kernels: vec![KernelSpec::with_norm(KernelFamily::Parabolic, 0.7)],
        nonlinearity: Nonlinearity::None,
        grid: Arc::new(Grid::uniform(51, 1.0, 0.0).unwrap()),
        burn_in: 50,
    };
    arh::simulate_arh(&spec, n, seed).unwrap()
}

#[test]
fn substreams_are_reproducible_and_distinct() {
    let a: Vec<u64> = (0..4).map(|_| 0).scan(rng::substream(9, 3), |r, _| Some(r.random())).collect();
    let b: Vec<u64> = (0..4).map(|_| 0).scan(rng::substream(9, 3), |r, _| Some(r.random())).collect();
    let c: Vec<u64> = (0..4).map(|_| 0).scan(rng::substream(9, 4), |r, _| Some(r.random())).collect();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_ne!(rng::child_seed(9, 0), rng::child_seed(9, 1));
}

#[test]
fn gof_is_identical_across_execution_modes() {
    let data = arh1(60, 4);
    let run = |exec| {
        let opts = GofOptions {
            b: 80,
            execution: exec,
            ..GofOptions::default()
        };
        gof::arh_gof_test_with(&data, 1, &opts, 12).unwrap()
    };
    let seq = run(Execution::Sequential);
    let par = run(Execution::default());
    assert_eq!(seq.statistic.to_bits(), par.statistic.to_bits());
    assert_eq!(seq.boot_statistics, par.boot_statistics);
    assert_eq!(seq.p_value, par.p_value);
}

#[test]
fn experiment_is_identical_across_execution_modes() {
    let cfg = ExperimentConfig {
        scenario: "arh1".into(),
        n: 40,
        m: 4,
        b: 30,
        delta: 0.05,
        burn_in: 20,
        ..ExperimentConfig::default()
    };
    let seq = run_experiment(&cfg, Execution::Sequential).unwrap();
    let par = run_experiment(&cfg, Execution::default()).unwrap();
    assert_eq!(seq.results_csv(), par.results_csv());
    assert_eq!(seq.replicates_csv(), par.replicates_csv());
    assert_eq!(
        serde_json::to_string(&seq).unwrap(),
        serde_json::to_string(&par).unwrap()
    );
}

#[test]
fn spec_test_is_identical_across_execution_modes() {
    let model = SdeModel::new(SdeKind::Ou { kappa: 0.5, sigma: 0.2 }, 0.0);
    let path = sde::euler_maruyama(&model, 40.0, 0.05, 3).unwrap();
    let run = |exec| {
        let opts = SpecTestOptions {
            b: 20,
            execution: exec,
            ..SpecTestOptions::default()
        };
        spectest::two_stage_test_with(&path, 1.0, &opts, 8).unwrap()
    };
    let seq = run(Execution::Sequential);
    let par = run(Execution::default());
    assert_eq!(
        serde_json::to_string(&seq).unwrap(),
        serde_json::to_string(&par).unwrap()
    );
}
