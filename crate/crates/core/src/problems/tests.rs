use super::*;
use crate::activations::BasicActivation;
use crate::networks::{build_fnn, init_params, ActivationConfig, InitScheme, NetworkSpec};
use std::io::Write;

/// `D u - f` with `D` applied by central differences to the plain exact
/// solution: an oracle independent of the jet arithmetic.
fn fd_residual(p: &ProblemSpec, x: &[f64]) -> f64 {
    let u = |y: &[f64]| p.exact_value(y);
    let h = 1e-4;
    let mut lap = 0.0;
    let mut grad = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for k in 0..x.len() {
        xp[k] = x[k] + h;
        let fp = u(&xp);
        xp[k] = x[k] - h;
        let fm = u(&xp);
        xp[k] = x[k];
        grad[k] = (fp - fm) / (2.0 * h);
        lap += (fp - 2.0 * u(x) + fm) / (h * h);
    }
    let value = u(x);
    let mut du = 0.0;
    for t in &p.operator.terms {
        du += match *t {
            OperatorTerm::Identity => value,
            OperatorTerm::NegLaplacian => -lap,
            OperatorTerm::NegDivRadialCoef => {
                let r = norm(x);
                -(r * lap + x.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>() / r)
            }
            OperatorTerm::ShiftedSquare { shift } => (value + shift).powi(2),
        };
    }
    du - (p.rhs)(x)
}

#[test]
fn catalog_examples() {
    let p = catalog("poisson-smooth").unwrap();
    assert!((p.exact_value(&[0.5, 0.5]) - 0.015625).abs() < 1e-16);
    assert!(((p.rhs)(&[0.5, 0.5]) - 0.25).abs() < 1e-15);

    let p = catalog("low-regularity").unwrap();
    let x = [0.75 * 0.6, 0.75 * 0.8];
    assert!(((p.rhs)(&x) - 3.0 * PI * PI).abs() < 1e-12);
    assert!(((p.rhs)(&x) - 29.6088).abs() < 1e-4);

    let p = catalog("oscillation-6pi").unwrap();
    let f = (p.rhs)(&[1.0 / 12.0, 1.0 / 12.0]);
    assert!((f - (72.0 * PI * PI + 9.0)).abs() < 1e-10);
    assert!((f - 719.608).abs() < 1e-2);

    assert!(matches!(catalog("heat"), Err(Error::Parameter(_))));
}

#[test]
fn every_problem_is_self_consistent() {
    for name in CATALOG {
        let p = catalog(name).unwrap();
        for seed in 0..3 {
            assert!(p.check_consistency(seed).unwrap() <= SELF_CONSISTENCY_TOL, "{name}");
        }
    }
}

#[test]
fn rhs_matches_finite_difference_operator() {
    for name in ["poisson-smooth", "low-regularity", "oscillation-6pi", "oscillation-40"] {
        let p = catalog(name).unwrap();
        let pts = p.sampler(4).with_exclusion(0.05).interior(200);
        let scale = pts.rows().into_iter().map(|r| (p.rhs)(&r.to_vec()).abs()).fold(1.0f64, f64::max);
        for r in pts.rows() {
            let res = fd_residual(&p, &r.to_vec());
            assert!(res.abs() <= 1e-5 * scale, "{name} at {r}: {res}");
        }
    }
}

#[test]
fn consistency_gate_catches_a_wrong_rhs() {
    let mut p = catalog("poisson-smooth").unwrap();
    p.rhs = Arc::new(|x: &[f64]| 1e-6 + x[0]);
    assert!(matches!(p.check_consistency(0), Err(Error::Consistency(_))));
}

fn zero_ansatz(p: &ProblemSpec) -> Ansatz {
    let spec =
        NetworkSpec::Fnn(build_fnn(p.dim(), &[8], &ActivationConfig::partition(&[BasicActivation::Sine])).unwrap());
    let mut net = init_params(&spec, 0, InitScheme::default()).unwrap();
    net.zero_weights();
    Ansatz { net, wrap: p.wrap.clone() }
}

#[test]
fn zero_ansatz_residuals() {
    let p = catalog("poisson-smooth").unwrap();
    let r = apply_operator(&p, &zero_ansatz(&p), &[0.5, 0.5]).unwrap();
    assert!((r + 0.25).abs() < 1e-15);

    let p = catalog("oscillation-6pi").unwrap();
    let a = zero_ansatz(&p);
    for x in [[0.1, 0.2], [0.7, 0.35]] {
        let r = apply_operator(&p, &a, &x).unwrap();
        assert!((r - (4.0 - (p.rhs)(&x))).abs() < 1e-12);
    }
}

#[test]
fn exact_solution_as_ansatz_has_tiny_residual() {
    // the wrap with a network realizing exactly the Poisson solution's quotient
    // is not available, so check the exact field through the same trace path
    let p = catalog("poisson-smooth").unwrap();
    let pts = p.sampler(1).interior(100);
    let r = p.exact_residuals(&pts).unwrap();
    let loss = r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64;
    assert!(loss <= 1e-18);
}

#[test]
fn wraps_match_exact_boundary_values() {
    for name in ["poisson-smooth", "low-regularity", "oscillation-6pi", "oscillation-40"] {
        let p = catalog(name).unwrap();
        let a = zero_ansatz(&p);
        let mut spec = a.clone();
        // any network: use nonzero output to exercise the factor
        spec.net.output.fill(0.3);
        spec.net.layers[0].bias.fill(0.4);
        let pts = DomainSampler::new(p.domain, 3).boundary(500);
        let got = spec.eval_batch(&pts).unwrap();
        for (row, g) in pts.rows().into_iter().zip(got) {
            let u = p.exact_value(&row.to_vec());
            assert!((g - u).abs() <= 1e-12, "{name} at {row}: {g} vs {u}");
        }
    }
}

#[test]
fn regression_target_examples() {
    let f = regression_target("regression-discontinuous").unwrap();
    assert_eq!(f(0.5), 0.0);
    assert_eq!(f(-0.5), 0.0);
    assert_eq!(f(0.0), 1.0);
    assert!(regression_target("sawtooth").is_err());
}

#[test]
fn psnr_examples() {
    assert_eq!(psnr_from_mse(1.0, 0.01).unwrap(), Psnr::Finite(20.0));
    assert_eq!(psnr_from_mse(255.0, 255.0 * 255.0).unwrap(), Psnr::Finite(0.0));
    assert_eq!(psnr_from_mse(1.0, 0.0).unwrap(), Psnr::PerfectFit);
    let mut last = f64::INFINITY;
    for k in 1..50 {
        let v = psnr_from_mse(2.0, k as f64 * 0.01).unwrap().as_f64();
        assert!(v < last);
        last = v;
    }
}

#[test]
fn pgm_loading() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.pgm");
    std::fs::write(&path, b"P2\n# tiny\n2 2\n255\n0 255\n255 0\n").unwrap();
    let ds = load_signal(&path, SignalFormat::Pgm).unwrap();
    assert_eq!(ds.values, vec![-1.0, 1.0, 1.0, -1.0]);
    for r in ds.coords.rows() {
        assert!(r.iter().all(|&v| v == -1.0 || v == 1.0));
    }
    assert_eq!(ds.max, 2.0);

    let path = dir.path().join("b.pgm");
    let mut f = std::fs::File::create(&path).unwrap();
    f.write_all(b"P5 3 1 255\n").unwrap();
    f.write_all(&[0, 128, 255]).unwrap();
    drop(f);
    let ds = load_signal(&path, SignalFormat::Pgm).unwrap();
    assert_eq!(ds.coords.column(0).to_vec(), vec![-1.0, 0.0, 1.0]);
    assert_eq!(ds.values[2], 1.0);

    std::fs::write(&path, b"P2\n2 ").unwrap();
    assert!(matches!(load_signal(&path, SignalFormat::Pgm), Err(Error::Format { offset: 5, .. })));
    std::fs::write(&path, b"P5 2 2 255\n\x01\x02").unwrap();
    assert!(matches!(load_signal(&path, SignalFormat::Pgm), Err(Error::Format { .. })));
    std::fs::write(&path, b"P7 2 2 255\n").unwrap();
    assert!(matches!(load_signal(&path, SignalFormat::Pgm), Err(Error::Format { offset: 0, .. })));
    assert!(matches!(load_signal(&dir.path().join("missing.pgm"), SignalFormat::Pgm), Err(Error::Io(_))));
}

#[test]
fn csv_loading() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    std::fs::write(&path, "t,value\n0,1\n1,3\n2,2\n3,5\n").unwrap();
    let ds = load_signal(&path, SignalFormat::Csv).unwrap();
    assert_eq!(ds.len(), 4);
    assert!(ds.coords.iter().all(|v| (-1.0..=1.0).contains(v)));
    assert_eq!(ds.coords[[0, 0]], -1.0);
    assert_eq!(ds.coords[[3, 0]], 1.0);
    assert_eq!(ds.values, vec![-1.0, 0.0, -0.5, 1.0]);
    std::fs::write(&path, "0,1\n1,x\n").unwrap();
    assert!(matches!(load_signal(&path, SignalFormat::Csv), Err(Error::Format { offset: 4, .. })));
}

#[test]
fn quantized_psnr_reaches_perfect_fit() {
    let ds = SignalDataset::from_image(2, 2, &[100, 100, 100, 100], 255, "const").unwrap();
    let exact = ds.values[0];
    let close = vec![exact + 1e-3; 4];
    assert_eq!(psnr(&close, &ds).unwrap(), Psnr::PerfectFit);
    let far = vec![exact + 0.1; 4];
    assert!(matches!(psnr(&far, &ds).unwrap(), Psnr::Finite(_)));
}

#[test]
fn synthetic_image_is_in_range() {
    let ds = synthetic_image(32).unwrap();
    assert_eq!(ds.len(), 1024);
    assert!(ds.values.iter().all(|v| (-1.0..=1.0).contains(v)));
    assert_eq!(ds, synthetic_image(32).unwrap());
}
