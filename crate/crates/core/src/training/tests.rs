use super::*;
use crate::activations::BasicActivation as K;
use crate::networks::{
    boundary_wrap, build_fnn, build_resnet, init_params, random_smooth_network, ActivationConfig, Architecture,
    BoundaryDomain, HiddenLayer, InitScheme, LayerActivation, NetworkParams, NetworkSpec,
};
use crate::problems::catalog;
use ndarray::array;

#[test]
fn regression_loss_examples() {
    assert_eq!(regression_loss_values(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    assert_eq!(regression_loss_values(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.5);
    assert_eq!(regression_loss_values(&[1.0, 3.0], &[1.0, 1.0]).unwrap(), 1.0);
    assert!(regression_loss_values(&[], &[]).is_err());
}

#[test]
fn pde_loss_examples() {
    assert_eq!(pde_loss_values(&[0.0, 0.0, 0.0], None).unwrap(), 0.0);
    assert_eq!(pde_loss_values(&[1.0, 1.0], None).unwrap(), 1.0);
    assert_eq!(pde_loss_values(&[1.0, 1.0], Some((&[2.0], 0.5))).unwrap(), 3.0);
}

/// `x1 x2` as two square neurons: ((x1 + x2)^2 - (x1 - x2)^2) / 4.
fn product_net() -> NetworkParams {
    NetworkParams::fnn(
        2,
        vec![HiddenLayer::new(
            array![[1.0, 1.0], [1.0, -1.0]],
            array![0.0, 0.0],
            LayerActivation::uniform(K::Square, 2),
        )],
        array![0.25, -0.25],
    )
    .unwrap()
}

#[test]
fn exact_solution_ansatz_has_negligible_loss() {
    // x1(1-x1)x2(1-x2) * x1 x2 is the Poisson solution
    let p = catalog("poisson-smooth").unwrap();
    let a = boundary_wrap(product_net(), BoundaryDomain::UnitSquare).unwrap();
    let pts = p.sampler(0).interior(1000);
    for (u, e) in a.eval_batch(&pts).unwrap().iter().zip(p.exact_values(&pts)) {
        assert!((u - e).abs() < 1e-16);
    }
    assert!(pde_loss(&p, &a, &pts, None).unwrap() <= 1e-18);
}

#[test]
fn relative_l2_examples() {
    let u = [1.0, -2.0, 3.0];
    assert_eq!(relative_l2(&u, &u).unwrap(), 0.0);
    assert_eq!(relative_l2(&[0.0; 3], &u).unwrap(), 1.0);
    let twice: Vec<f64> = u.iter().map(|v| 2.0 * v).collect();
    assert_eq!(relative_l2(&twice, &u).unwrap(), 1.0);
    assert!(matches!(relative_l2(&u, &[0.0; 3]), Err(Error::UndefinedMetric(_))));
}

#[test]
fn lr_schedule_examples() {
    let cfg = TrainConfig { lr: 1e-3, decay: 0.95, decay_every: 100, ..TrainConfig::default() };
    assert_eq!(lr_at(0, &cfg), 1e-3);
    assert_eq!(lr_at(99, &cfg), 1e-3);
    assert!((lr_at(100, &cfg) - 9.5e-4).abs() < 1e-18);
    assert!((lr_at(250, &cfg) - 9.025e-4).abs() < 1e-18);
    for sched in [Schedule::Step, Schedule::Cosine] {
        let cfg = TrainConfig { schedule: sched, iterations: 2000, ..cfg.clone() };
        for n in 0..3000 {
            assert!(lr_at(n + 1, &cfg) <= lr_at(n, &cfg));
        }
    }
}

#[test]
fn config_validation() {
    let bad = TrainConfig { decay: 1.5, ..TrainConfig::default() };
    assert_eq!(bad.validate().unwrap_err().0, "q");
    let bad = TrainConfig { penalty: -1.0, ..TrainConfig::default() };
    assert_eq!(bad.validate().unwrap_err().0, "lambda");
    let bad = TrainConfig { samples: 0, ..TrainConfig::default() };
    assert_eq!(bad.validate().unwrap_err().0, "samples");
    assert!(TrainConfig { decay: 1.0, ..TrainConfig::default() }.validate().is_ok());
}

fn fd_gradient(f: impl Fn(&[f64]) -> f64, theta: &[f64], h: f64) -> Vec<f64> {
    let mut t = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            let mut at = |k: f64| {
                t[i] = theta[i] + k * h;
                f(&t)
            };
            let d = (at(-2.0) - 8.0 * at(-1.0) + 8.0 * at(1.0) - at(2.0)) / (12.0 * h);
            t[i] = theta[i];
            d
        })
        .collect()
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    d / b.iter().map(|y| y * y).sum::<f64>().sqrt()
}

#[test]
fn pde_gradients_match_finite_differences() {
    for name in ["poisson-smooth", "low-regularity", "oscillation-6pi", "oscillation-40"] {
        let p = catalog(name).unwrap();
        let net = random_smooth_network(7, Architecture::Resnet, 2, &[6, 6]).unwrap();
        let mut a = crate::networks::Ansatz { net, wrap: p.wrap.clone() };
        let pts = p.sampler(1).interior(20);
        let bpts = p.sampler(2).boundary(10);
        let (loss, grad) = pde_loss_and_gradient(&p, &a, &pts, Some((&bpts, 0.7))).unwrap();
        assert!((loss - pde_loss(&p, &a, &pts, Some((&bpts, 0.7))).unwrap()).abs() <= 1e-12 * loss);
        let theta = a.net.trainable_vector();
        let probe = std::cell::RefCell::new(a.clone());
        let fd = fd_gradient(
            |t| {
                let mut q = probe.borrow_mut();
                q.net.set_trainable_vector(t).unwrap();
                pde_loss(&p, &q, &pts, Some((&bpts, 0.7))).unwrap()
            },
            &theta,
            1e-4,
        );
        assert!(rel(&grad, &fd) < 1e-6, "{name}: {}", rel(&grad, &fd));
        a.net.set_trainable_vector(&theta).unwrap();
    }
}

#[test]
fn regression_gradient_matches_finite_differences() {
    let net = random_smooth_network(3, Architecture::Fnn, 1, &[8, 8]).unwrap();
    let a = crate::networks::Ansatz::plain(net);
    let pts = ndarray::Array2::from_shape_fn((15, 1), |(i, _)| -1.0 + i as f64 / 7.0);
    let y: Vec<f64> = (0..15).map(|i| (i as f64).sin()).collect();
    let (loss, grad) = regression_loss_and_gradient(&a, &pts, &y).unwrap();
    assert!((loss - regression_loss(&a, &pts, &y).unwrap()).abs() < 1e-15);
    let theta = a.net.trainable_vector();
    let probe = std::cell::RefCell::new(a.clone());
    let fd = fd_gradient(
        |t| {
            let mut q = probe.borrow_mut();
            q.net.set_trainable_vector(t).unwrap();
            regression_loss(&q, &pts, &y).unwrap()
        },
        &theta,
        1e-4,
    );
    assert!(rel(&grad, &fd) < 1e-7);
}

/// `J = 1/2 sum c_i (theta_i - t_i)^2`, minimized at `t`.
struct Quadratic {
    theta: Vec<f64>,
    target: Vec<f64>,
    curvature: Vec<f64>,
}

impl Objective for Quadratic {
    fn params(&self) -> Vec<f64> {
        self.theta.clone()
    }
    fn set_params(&mut self, p: &[f64]) -> Result<()> {
        self.theta = p.to_vec();
        Ok(())
    }
    fn loss_and_gradient(&mut self) -> Result<(f64, Vec<f64>)> {
        let mut loss = 0.0;
        let grad = (0..self.theta.len())
            .map(|i| {
                let e = self.theta[i] - self.target[i];
                loss += 0.5 * self.curvature[i] * e * e;
                self.curvature[i] * e
            })
            .collect();
        Ok((loss, grad))
    }
    fn test_error(&self) -> Result<f64> {
        relative_l2(&self.theta, &self.target)
    }
}

#[test]
fn quadratic_toy_converges() {
    let mut q =
        Quadratic { theta: vec![0.0; 4], target: vec![1.0, -2.0, 0.5, 3.0], curvature: vec![1.0, 4.0, 0.25, 2.0] };
    let cfg = TrainConfig { iterations: 5000, lr: 0.05, decay: 0.9, ..TrainConfig::default() };
    let out = train_loop(&mut q, &cfg).unwrap();
    assert!(out.abort.is_none());
    assert_eq!(out.metrics.records.len(), 5000);
    for (p, t) in out.params.iter().zip(&q.target) {
        assert!((p - t).abs() <= 1e-6, "{p} vs {t}");
    }
}

#[test]
fn zero_iterations_leave_params() {
    let mut q = Quadratic { theta: vec![0.5], target: vec![1.0], curvature: vec![1.0] };
    let out = train_loop(&mut q, &TrainConfig { iterations: 0, ..TrainConfig::default() }).unwrap();
    assert_eq!(out.params, vec![0.5]);
    assert!(out.metrics.is_empty());
}

struct Exploding(usize);

impl Objective for Exploding {
    fn params(&self) -> Vec<f64> {
        vec![0.0]
    }
    fn set_params(&mut self, _: &[f64]) -> Result<()> {
        Ok(())
    }
    fn loss_and_gradient(&mut self) -> Result<(f64, Vec<f64>)> {
        self.0 += 1;
        Ok((if self.0 > 3 { f64::INFINITY } else { 1.0 }, vec![1.0]))
    }
    fn test_error(&self) -> Result<f64> {
        Ok(1.0)
    }
}

#[test]
fn overflow_aborts_with_iteration() {
    let out = train_loop(&mut Exploding(0), &TrainConfig { iterations: 10, ..TrainConfig::default() }).unwrap();
    let (iter, err) = out.abort.unwrap();
    assert_eq!(iter, 3);
    assert!(matches!(err, Error::NumericOverflow(_)));
    assert_eq!(out.metrics.records.len(), 3);
}

fn small_pde_run(seed: u64) -> TrainOutcome {
    let p = catalog("poisson-smooth").unwrap();
    let spec = NetworkSpec::Resnet(build_resnet(2, 8, 1, &ActivationConfig::poly_sine_gaussian()).unwrap());
    let net = init_params(&spec, seed, InitScheme::default()).unwrap();
    let a = boundary_wrap(net, BoundaryDomain::UnitSquare).unwrap();
    let cfg = TrainConfig { iterations: 30, samples: 64, test_samples: 64, window: 10, ..TrainConfig::default() };
    let mut obj = PdeObjective::new(p, a, &cfg, seed).unwrap();
    train_loop(&mut obj, &cfg).unwrap()
}

#[test]
fn training_is_deterministic_and_decreases_loss() {
    let a = small_pde_run(5);
    let b = small_pde_run(5);
    assert_eq!(a.params, b.params);
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.metrics.to_csv(), b.metrics.to_csv());
    assert_ne!(a.params, small_pde_run(6).params);
    assert!(a.metrics.best_moving_average().is_some());
}

#[test]
fn regression_training_improves() {
    let p = catalog("regression-discontinuous").unwrap();
    let spec = NetworkSpec::Fnn(build_fnn(1, &[16, 16], &ActivationConfig::poly_sine_gaussian()).unwrap());
    let net = init_params(&spec, 0, InitScheme::default()).unwrap();
    let cfg = TrainConfig { iterations: 1000, samples: 200, test_samples: 200, lr: 1e-2, ..TrainConfig::default() };
    let mut obj = RegressionObjective::new(p, crate::networks::Ansatz::plain(net), &cfg, 0).unwrap();
    let out = train_loop(&mut obj, &cfg).unwrap();
    let first = out.metrics.records[0].rel_l2;
    assert!(out.metrics.best() < 0.5 * first, "{} vs {first}", out.metrics.best());
}
