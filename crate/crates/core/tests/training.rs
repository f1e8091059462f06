use raf_lab_core::networks::{build_fnn, build_resnet, init_params, ActivationConfig, Ansatz, InitScheme, NetworkSpec};
use raf_lab_core::problems::catalog;
use raf_lab_core::training::{
    lr_at, pde_loss, pde_loss_and_gradient, regression_loss, regression_loss_and_gradient, train_loop, Objective,
    PdeObjective, RegressionObjective, Schedule, TrainConfig,
};
use raf_lab_core::BasicActivation as K;

fn central_difference(f: impl Fn(&[f64]) -> f64, theta: &[f64], h: f64) -> Vec<f64> {
    let mut t = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            t[i] = theta[i] + h;
            let up = f(&t);
            t[i] = theta[i] - h;
            let down = f(&t);
            t[i] = theta[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    d / b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300)
}

#[test]
fn penalized_pde_gradient_matches_differences_of_the_loss() {
    let problem = catalog("low-regularity").unwrap();
    let spec = NetworkSpec::Resnet(build_resnet(2, 6, 1, &ActivationConfig::poly_sine_gaussian()).unwrap());
    let net = init_params(&spec, 4, InitScheme::InverseSqrtFanIn).unwrap();
    let mut sampler = problem.sampler(4);
    let (interior, boundary) = (sampler.interior(70), sampler.boundary(30));
    let ansatz = Ansatz::plain(net);
    let (loss, grad) = pde_loss_and_gradient(&problem, &ansatz, &interior, Some((&boundary, 2.5))).unwrap();
    let loss_at = |theta: &[f64]| {
        let mut a = ansatz.clone();
        a.net.set_trainable_vector(theta).unwrap();
        pde_loss(&problem, &a, &interior, Some((&boundary, 2.5))).unwrap()
    };
    let theta = ansatz.net.trainable_vector();
    assert!((loss - loss_at(&theta)).abs() <= 1e-12 * loss);
    let fd = central_difference(loss_at, &theta, 1e-6);
    assert!(rel(&grad, &fd) <= 1e-6, "{}", rel(&grad, &fd));
}

#[test]
fn chunked_regression_gradient_matches_differences_of_the_loss() {
    let problem = catalog("regression-discontinuous").unwrap();
    let spec =
        NetworkSpec::Fnn(build_fnn(1, &[10, 10], &ActivationConfig::partition(&[K::Sine, K::Gaussian])).unwrap());
    let net = init_params(&spec, 9, InitScheme::InverseSqrtFanIn).unwrap();
    // more rows than one evaluation chunk
    let pts = problem.sampler(9).interior(150);
    let targets = problem.rhs_values(&pts);
    let ansatz = Ansatz::plain(net);
    let (loss, grad) = regression_loss_and_gradient(&ansatz, &pts, &targets).unwrap();
    let loss_at = |theta: &[f64]| {
        let mut a = ansatz.clone();
        a.net.set_trainable_vector(theta).unwrap();
        regression_loss(&a, &pts, &targets).unwrap()
    };
    let theta = ansatz.net.trainable_vector();
    assert!((loss - loss_at(&theta)).abs() <= 1e-13 * loss);
    assert!(rel(&grad, &central_difference(loss_at, &theta, 1e-6)) <= 1e-6);
}

#[test]
fn short_pde_run_improves_and_reports_every_iteration() {
    let problem = catalog("poisson-smooth").unwrap();
    let spec = NetworkSpec::Resnet(build_resnet(2, 12, 1, &ActivationConfig::poly_sine_gaussian()).unwrap());
    let net = init_params(&spec, 0, InitScheme::InverseSqrtFanIn).unwrap();
    let cfg = TrainConfig {
        iterations: 150,
        samples: 128,
        test_samples: 256,
        lr: 5e-3,
        window: 10,
        ..TrainConfig::default()
    };
    let mut obj = PdeObjective::new(problem.clone(), Ansatz { net, wrap: problem.wrap.clone() }, &cfg, 0).unwrap();
    let initial = obj.test_error().unwrap();
    let out = train_loop(&mut obj, &cfg).unwrap();
    assert!(out.abort.is_none());
    let recs = &out.metrics.records;
    assert_eq!(recs.len(), 150);
    assert_eq!(recs[0].rel_l2, initial);
    for (n, r) in recs.iter().enumerate() {
        assert_eq!(r.iter, n);
        assert_eq!(r.lr, lr_at(n, &cfg));
    }
    assert!(out.metrics.best() < 0.5 * initial, "{} vs {initial}", out.metrics.best());
}

#[test]
fn regression_objective_rejects_mismatched_networks() {
    let problem = catalog("regression-discontinuous").unwrap();
    let spec = NetworkSpec::Fnn(build_fnn(2, &[4], &ActivationConfig::partition(&[K::Relu])).unwrap());
    let net = init_params(&spec, 0, InitScheme::InverseSqrtFanIn).unwrap();
    assert!(RegressionObjective::new(problem, Ansatz::plain(net), &TrainConfig::default(), 0).is_err());
}

#[test]
fn cosine_schedule_runs_from_lr_to_zero() {
    let cfg = TrainConfig { iterations: 400, lr: 2e-3, schedule: Schedule::Cosine, ..TrainConfig::default() };
    assert_eq!(lr_at(0, &cfg), 2e-3);
    assert!((lr_at(200, &cfg) - 1e-3).abs() < 1e-15);
    assert!(lr_at(400, &cfg).abs() < 1e-18);
    for n in 1..=400 {
        assert!(lr_at(n, &cfg) <= lr_at(n - 1, &cfg));
    }
}
