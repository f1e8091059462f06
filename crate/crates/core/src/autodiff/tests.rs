use super::*;
use crate::activations::{BasicActivation as K, RafSpec, RafTerm};
use crate::networks::{random_smooth_network, Architecture, HiddenLayer, LayerActivation, NetworkParams};
use ndarray::{array, Array1};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// One-neuron FNN `a * act(w x + b)` with every block frozen.
fn scalar_net(kind: K, w: f64) -> NetworkParams {
    let mut net = NetworkParams::fnn(
        1,
        vec![HiddenLayer::new(array![[w]], array![0.0], LayerActivation::uniform(kind, 1))],
        array![1.0],
    )
    .unwrap();
    net.freeze_all();
    net
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

#[test]
fn eval_examples() {
    assert_eq!(eval(&scalar_net(K::Sine, 1.0), &[0.0]).unwrap(), 0.0);
    assert_eq!(eval(&scalar_net(K::Square, 1.0), &[3.0]).unwrap(), 9.0);
    assert_eq!(eval(&scalar_net(K::Identity, 2.0), &[3.0]).unwrap(), 6.0);
    assert!(matches!(eval(&scalar_net(K::Sine, 1.0), &[0.0, 1.0]), Err(Error::Dimension { .. })));
    assert!(matches!(eval(&scalar_net(K::Pow2, 100.0), &[1.0]), Err(Error::NumericOverflow(_))));
    assert!(matches!(eval(&scalar_net(K::Sine, 1.0), &[f64::INFINITY]), Err(Error::NumericOverflow(_))));
}

#[test]
fn param_gradient_examples() {
    // phi = theta x with theta the only trainable scalar
    let mut net = scalar_net(K::Identity, 2.0);
    net.layers[0].train_weight = true;
    assert_eq!(param_gradient(&net, &[3.0]).unwrap(), vec![3.0]);

    // phi = alpha sin(beta x)
    let mut net = scalar_net(K::Sine, 1.0);
    net.layers[0].activation = LayerActivation::from_rafs(&[RafSpec {
        terms: vec![RafTerm { kind: K::Sine, alpha: 1.0, beta: 2.0 }],
        train_alpha: true,
        train_beta: true,
    }])
    .unwrap();
    assert_eq!(param_gradient(&net, &[0.0]).unwrap(), vec![0.0, 0.0]);
    let g = param_gradient(&net, &[0.5]).unwrap();
    assert!((g[0] - 1f64.sin()).abs() < 1e-15);
    assert!((g[1] - 0.5 * 1f64.cos()).abs() < 1e-15);

    let net = scalar_net(K::Floor, 1.0);
    assert_eq!(eval(&net, &[1.5]).unwrap(), 1.0);
    let mut net = net;
    net.train_output = true;
    assert!(matches!(param_gradient(&net, &[1.5]), Err(Error::UnsupportedDerivative(_))));
}

#[test]
fn input_derivative_examples() {
    assert_eq!(input_gradient(&scalar_net(K::Sine, 1.0), &[0.0]).unwrap(), vec![1.0]);
    assert_eq!(input_laplacian(&scalar_net(K::Sine, 1.0), &[0.0]).unwrap(), 0.0);

    // x1^2 + x2^2 as two square neurons
    let net = NetworkParams::fnn(
        2,
        vec![HiddenLayer::new(
            array![[1.0, 0.0], [0.0, 1.0]],
            array![0.0, 0.0],
            LayerActivation::uniform(K::Square, 2),
        )],
        array![1.0, 1.0],
    )
    .unwrap();
    assert_eq!(input_gradient(&net, &[1.0, 2.0]).unwrap(), vec![2.0, 4.0]);
    for x in [[1.0, 2.0], [-0.3, 7.0], [0.0, 0.0]] {
        assert_eq!(input_laplacian(&net, &x).unwrap(), 4.0);
    }
    assert!(matches!(input_laplacian(&scalar_net(K::Step, 1.0), &[0.2]), Err(Error::UnsupportedDerivative(_))));
    // ReLU has a weak second derivative, taken as zero
    assert_eq!(input_laplacian(&scalar_net(K::Relu, 1.0), &[0.2]).unwrap(), 0.0);
    assert_eq!(input_gradient(&scalar_net(K::Relu, 1.0), &[0.0]).unwrap(), vec![0.0]);
}

#[test]
fn fd_oracle_examples() {
    let sq = scalar_net(K::Square, 1.0);
    let e = fd_oracle(&sq, &[1.0], 1e-4).unwrap();
    assert!((e.gradient[0] - 2.0).abs() <= 1e-7);
    let e = fd_oracle(&sq, &[0.0], 1e-3).unwrap();
    assert!((e.laplacian - 2.0).abs() <= 1e-6);
    assert!(matches!(fd_oracle(&sq, &[0.0], 0.0), Err(Error::Parameter(_))));
    assert!(matches!(fd_oracle(&sq, &[0.0], -1.0), Err(Error::Parameter(_))));
}

fn random_shape(rng: &mut ChaCha8Rng) -> (Architecture, usize, Vec<usize>) {
    let d = rng.random_range(1..=3);
    if rng.random_bool(0.5) {
        let depth = rng.random_range(1..=4);
        let widths = (0..depth).map(|_| rng.random_range(2..=16)).collect();
        (Architecture::Fnn, d, widths)
    } else {
        let w = rng.random_range(2..=16);
        let depth = rng.random_range(1..=4);
        (Architecture::Resnet, d, vec![w; depth])
    }
}

#[test]
fn gradients_match_finite_differences_on_random_nets() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..100 {
        let (arch, d, widths) = random_shape(&mut rng);
        let net = random_smooth_network(i, arch, d, &widths).unwrap();
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pg = param_gradient(&net, &x).unwrap();
        let pfd = fd_param_gradient(&net, &x, 1e-4).unwrap();
        assert!(rel_err(&pg, &pfd) <= 1e-5, "net {i}: param rel err {}", rel_err(&pg, &pfd));
        let ig = input_gradient(&net, &x).unwrap();
        let fd = fd_oracle(&net, &x, 1e-4).unwrap();
        assert!(rel_err(&ig, &fd.gradient) <= 1e-5, "net {i}: input rel err {}", rel_err(&ig, &fd.gradient));
        let lap = input_laplacian(&net, &x).unwrap();
        let fd2 = fd_oracle(&net, &x, 1e-3).unwrap();
        assert!(rel_err(&[lap], &[fd2.laplacian]) <= 1e-4, "net {i}: laplacian {lap} vs {}", fd2.laplacian);
    }
}

#[test]
fn batched_trace_matches_pointwise() {
    let net = random_smooth_network(4, Architecture::Resnet, 2, &[7, 7, 7, 7]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pts = ndarray::Array2::from_shape_simple_fn((9, 2), || rng.random_range(-1.0..1.0));
    let g = Graph::of(&net);
    let t = g.forward(pts.view(), DerivOrder::Laplacian, true).unwrap();
    let mut total = vec![0.0; net.param_count()];
    for (b, row) in pts.rows().into_iter().enumerate() {
        let x = row.to_vec();
        let j = second_order(&net, &x).unwrap();
        let jb = t.jet(b);
        assert!((j.value - jb.value).abs() < 1e-14);
        assert!((j.laplacian() - jb.laplacian()).abs() < 1e-12);
        for (acc, v) in total.iter_mut().zip(param_gradient(&net, &x).unwrap()) {
            *acc += v;
        }
    }
    // seeding only the value component of every sample sums the gradients
    let seeds = vec![Jet::constant(1.0, 2); 9];
    let bg = t.backward(&seeds).unwrap();
    assert!(rel_err(&bg, &total) < 1e-13);
}

/// Gradient of the Laplacian output with respect to parameters, checked by
/// differencing the Laplacian itself.
#[test]
fn laplacian_parameter_gradient_matches_differences() {
    for seed in 0..10 {
        let net = random_smooth_network(seed, Architecture::Resnet, 2, &[6, 6]).unwrap();
        let x = [0.3, -0.4];
        let g = Graph::of(&net);
        let p = ndarray::Array2::from_shape_vec((1, 2), x.to_vec()).unwrap();
        let t = g.forward(p.view(), DerivOrder::Laplacian, true).unwrap();
        let mut seed_jet = Jet::constant(0.0, 2);
        seed_jet.diag = [1.0, 1.0, 0.0, 0.0];
        seed_jet.grad = [0.5, -0.25, 0.0, 0.0];
        let got = t.backward(&[seed_jet]).unwrap();
        let theta = net.trainable_vector();
        let mut probe = net.clone();
        let h = 1e-5;
        let functional = |n: &NetworkParams| {
            let j = second_order(n, &x).unwrap();
            j.laplacian() + 0.5 * j.grad[0] - 0.25 * j.grad[1]
        };
        let mut fd = Vec::new();
        for i in 0..theta.len() {
            let mut t = theta.clone();
            t[i] += h;
            probe.set_trainable_vector(&t).unwrap();
            let fp = functional(&probe);
            t[i] -= 2.0 * h;
            probe.set_trainable_vector(&t).unwrap();
            let fm = functional(&probe);
            fd.push((fp - fm) / (2.0 * h));
        }
        assert!(rel_err(&got, &fd) < 1e-6, "seed {seed}: {}", rel_err(&got, &fd));
    }
}

#[test]
fn linearity_of_composed_graphs() {
    let phi = random_smooth_network(1, Architecture::Fnn, 2, &[5, 5]).unwrap();
    let psi = random_smooth_network(2, Architecture::Resnet, 2, &[4, 4]).unwrap();
    let (a, b) = (1.5, -0.75);
    let mut g = Graph::new(2);
    let p = g.network(&phi, g.input()).unwrap();
    let q = g.network(&psi, g.input()).unwrap();
    let pa = g.scale(p, a);
    let qb = g.scale(q, b);
    let out = g.add(pa, qb);
    g.set_output(out);
    assert_eq!(g.param_count(), phi.param_count() + psi.param_count());
    let x = [0.2, 0.9];
    let pts = ndarray::Array2::from_shape_vec((1, 2), x.to_vec()).unwrap();
    let combined = g.forward(pts.view(), DerivOrder::Value, true).unwrap().backward(&[Jet::constant(1.0, 2)]).unwrap();
    let mut expect: Vec<f64> = param_gradient(&phi, &x).unwrap().iter().map(|v| a * v).collect();
    expect.extend(param_gradient(&psi, &x).unwrap().iter().map(|v| b * v));
    assert!(rel_err(&combined, &expect) < 1e-15);
}

#[test]
fn resnet_skip_parity() {
    // zero every hidden weight and bias: g_l = act(0) and output follows the skips
    let mut net = random_smooth_network(3, Architecture::Resnet, 2, &[4, 4, 4, 4]).unwrap();
    for layer in &mut net.layers {
        layer.weight.fill(0.0);
        layer.bias.fill(0.0);
        layer.activation = LayerActivation::uniform(K::Sine, 4);
    }
    let x = [0.4, -0.8];
    let h0 = net.lift.as_ref().unwrap().dot(&Array1::from(x.to_vec()));
    // h1 = g1 = 0, h2 = h0 + g2 = h0, h3 = 0, h4 = h2 + g4 = h0
    let expect = net.output.dot(&h0);
    assert!((eval(&net, &x).unwrap() - expect).abs() < 1e-15);

    // two layers: h2 = h0 + g2, h1 = g1
    let mut net = random_smooth_network(5, Architecture::Resnet, 1, &[3, 3]).unwrap();
    for layer in &mut net.layers {
        layer.activation = LayerActivation::uniform(K::Identity, 3);
    }
    let x = [0.7];
    let h0 = net.lift.as_ref().unwrap().column(0).to_owned() * x[0];
    let h1 = net.layers[0].weight.dot(&h0) + &net.layers[0].bias;
    let h2 = &h0 + &(net.layers[1].weight.dot(&h1) + &net.layers[1].bias);
    assert!((eval(&net, &x).unwrap() - net.output.dot(&h2)).abs() < 1e-14);
}

#[test]
fn sine_frequency_layer_differentiates() {
    let net = NetworkParams::fnn(
        1,
        vec![HiddenLayer::new(array![[1.0]], array![0.0], LayerActivation::single(vec![K::Sine], vec![2.0 * PI]))],
        array![1.0],
    )
    .unwrap();
    let j = second_order(&net, &[0.125]).unwrap();
    assert!((j.value - (PI / 4.0).sin()).abs() < 1e-15);
    assert!((j.grad[0] - 2.0 * PI * (PI / 4.0).cos()).abs() < 1e-13);
    assert!((j.diag[0] + 4.0 * PI * PI * (PI / 4.0).sin()).abs() < 1e-12);
}

#[test]
fn determinism() {
    let net = random_smooth_network(12, Architecture::Resnet, 3, &[16, 16, 16, 16]).unwrap();
    let x = [0.1, 0.2, 0.3];
    assert_eq!(param_gradient(&net, &x).unwrap(), param_gradient(&net, &x).unwrap());
    assert_eq!(second_order(&net, &x).unwrap(), second_order(&net, &x).unwrap());
}
