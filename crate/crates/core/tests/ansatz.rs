use proptest::prelude::*;
use raf_lab_core::networks::{build_resnet, init_params, ActivationConfig, Ansatz, InitScheme, NetworkSpec};
use raf_lab_core::ntk::{eigenvalues, jacobian, ntk_pde, ntk_regression, residual_jacobian};
use raf_lab_core::problems::{catalog, ProblemKind, CATALOG};
use raf_lab_core::BasicActivation as K;

fn wrapped(name: &str, seed: u64, config: &ActivationConfig) -> (raf_lab_core::ProblemSpec, Ansatz) {
    let problem = catalog(name).unwrap();
    let spec = NetworkSpec::Resnet(build_resnet(problem.dim(), 8, 1, config).unwrap());
    let net = init_params(&spec, seed, InitScheme::InverseSqrtFanIn).unwrap();
    let ansatz = Ansatz { net, wrap: problem.wrap.clone() };
    (problem, ansatz)
}

fn pde_problems() -> Vec<&'static str> {
    CATALOG.into_iter().filter(|n| catalog(n).unwrap().kind == ProblemKind::Pde).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn wrapped_networks_meet_the_boundary_data(seed in 0u64..1000, which in 0usize..4) {
        let names = pde_problems();
        let (problem, ansatz) = wrapped(names[which % names.len()], seed, &ActivationConfig::poly_sine_gaussian());
        let pts = problem.sampler(seed).boundary(32);
        let got = ansatz.eval_batch(&pts).unwrap();
        for (u, g) in got.iter().zip(problem.exact_values(&pts)) {
            prop_assert!((u - g).abs() <= 1e-10 * (1.0 + g.abs()), "{}: {u} vs {g}", problem.name);
        }
    }

    #[test]
    fn kernels_are_gram_matrices_of_jacobians(seed in 0u64..1000) {
        let (problem, ansatz) = wrapped("poisson-smooth", seed, &ActivationConfig::partition(&[K::Sine, K::Relu3]));
        let pts = problem.sampler(seed).interior(12);
        let j = jacobian(&ansatz, &pts).unwrap();
        let k = ntk_regression(&ansatz, &pts).unwrap();
        let r = residual_jacobian(&problem, &ansatz, &pts).unwrap();
        let kp = ntk_pde(&problem, &ansatz, &pts).unwrap();
        for (kernel, g) in [(&k.matrix, j.dot(&j.t())), (&kp.matrix, r.dot(&r.t()))] {
            let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in kernel.iter().zip(g.iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + scale));
            }
            let ev = eigenvalues(kernel).unwrap();
            prop_assert!(ev[0] >= -1e-8 * ev[ev.len() - 1]);
        }
    }
}

#[test]
fn residuals_of_wrapped_networks_match_pointwise_operator() {
    for name in pde_problems() {
        let (problem, ansatz) = wrapped(name, 3, &ActivationConfig::poly_sine_gaussian());
        let pts = problem.sampler(3).interior(20);
        let batch = problem.residuals(&ansatz, &pts).unwrap();
        for (x, r) in pts.rows().into_iter().zip(batch) {
            let x = x.to_vec();
            let pointwise = raf_lab_core::problems::apply_operator(&problem, &ansatz, &x).unwrap();
            assert!((r - pointwise).abs() <= 1e-10 * (1.0 + r.abs()), "{name}: {r} vs {pointwise}");
        }
    }
}
