use std::sync::Arc;

use arhgof::arh::{self, ArhSpec, KernelFamily, KernelSpec, Nonlinearity};
use arhgof::gof::{self, GofOptions};
use arhgof::sde::{self, SdeKind, SdeModel};
use arhgof::spectest::{self, Decision, SpecTestOptions};
use arhgof::{Error, Grid};

fn sample(kernels: Vec<KernelSpec>, n: usize, seed: u64) -> arhgof::FunctionalSample {
    let spec = ArhSpec {
        kernels,
        nonlinearity: Nonlinearity::None,
        grid: Arc::new(Grid::uniform(101, 1.0, 0.0).unwrap()),
        burn_in: arh::DEFAULT_BURN_IN,
    };
    arh::simulate_arh(&spec, n, seed).unwrap()
}

fn opts(b: usize) -> GofOptions {
    GofOptions { b, ..GofOptions::default() }
}

#[test]
fn independence_is_rejected_for_strong_arh1() {
    let data = sample(vec![KernelSpec::with_norm(KernelFamily::Parabolic, 0.7)], 150, 21);
    let res = gof::arh_gof_test_with(&data, 0, &opts(200), 1).unwrap();
    assert!(res.p_value < 0.01, "p = {}", res.p_value);
    assert!(res.lambda.is_none());
    let res = gof::arh_gof_test_with(&data, 1, &opts(200), 1).unwrap();
    assert!(res.lambda.is_some());
    assert!(!res.p_tilde_set.is_empty());
}

#[test]
fn order_scan_stops_at_first_acceptance() {
    let data = sample(vec![KernelSpec::with_norm(KernelFamily::Parabolic, 0.7)], 150, 22);
    let scan = gof::arh_order_scan(&data, 3, &opts(200), 0.05, 5).unwrap();
    let order = scan.order.expect("some order accepted");
    assert!(order >= 1);
    assert_eq!(scan.tests.len(), order + 1);
    assert!(scan.tests[..order].iter().all(|t| t.p_value < 0.05));
    assert!(scan.tests[order].p_value >= 0.05);
}

#[test]
fn small_b_carries_a_warning() {
    let data = sample(vec![], 40, 23);
    let res = gof::arh_gof_test_with(&data, 1, &opts(20), 1).unwrap();
    assert!(res.warning.is_some());
    assert!(gof::arh_gof_test_with(&data, 1, &opts(100), 1).unwrap().warning.is_none());
}

#[test]
fn too_few_curves_for_the_order() {
    let data = sample(vec![], 3, 24);
    assert!(matches!(
        gof::arh_gof_test_with(&data, 3, &opts(10), 1),
        Err(Error::InsufficientLags { .. })
    ));
}

#[test]
fn spec_test_rejects_a_strongly_nonlinear_drift_at_stage_one() {
    let model = SdeModel::new(SdeKind::Ckls { kappa: 0.2, mu: 0.09, sigma: 3.0, gamma: 1.5 }, 0.09);
    let path = sde::euler_maruyama(&model, 250.0, 0.01, 9).unwrap();
    let o = SpecTestOptions { b: 200, ..SpecTestOptions::default() };
    let res = spectest::two_stage_test_with(&path, 1.0, &o, 2).unwrap();
    assert!(res.decision.rejects());
    if res.decision == Decision::RejectStage1 {
        assert!(res.p2.is_none() && res.f_statistic.is_none());
    }
}

#[test]
fn spec_test_reports_both_stages_on_ou_data() {
    let model = SdeModel::new(SdeKind::Ou { kappa: 0.5, sigma: 0.05f64.sqrt() }, 0.0);
    let path = sde::euler_maruyama(&model, 100.0, 0.01, 10).unwrap();
    let o = SpecTestOptions { b: 60, ..SpecTestOptions::default() };
    let res = spectest::two_stage_test_with(&path, 1.0, &o, 3).unwrap();
    assert_eq!(res.n_curves, 100);
    assert!(res.kappa_hat > 0.0 && res.sigma_hat > 0.0);
    assert!((res.sigma_hat - 0.05f64.sqrt()).abs() < 0.02);
    if res.p1 >= 0.025 {
        assert!(res.p2.is_some());
    }
}
