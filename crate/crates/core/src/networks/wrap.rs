//! Boundary-enforcing ansatz `u(x) = h(x) phi(x) + l(x)`.

use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::NetworkParams;
use crate::autodiff::{DerivOrder, Graph, Jet, JetFn};
use crate::error::{param_err, Error, Result};

/// Domain whose boundary the wrapper enforces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryDomain {
    /// `[0, 1]^2`, zero on the boundary.
    UnitSquare,
    /// `|x| <= 1`, zero on the boundary.
    UnitDisc,
    /// `[a, b]` with prescribed end values.
    Interval { a: f64, b: f64, value_a: f64, value_b: f64, pa: f64, pb: f64 },
}

impl BoundaryDomain {
    pub fn interval(a: f64, b: f64, value_a: f64, value_b: f64) -> Self {
        BoundaryDomain::Interval { a, b, value_a, value_b, pa: 1.0, pb: 1.0 }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "unit-square" => Ok(BoundaryDomain::UnitSquare),
            "unit-disc" => Ok(BoundaryDomain::UnitDisc),
            other => Err(param_err(format!("unsupported boundary domain `{other}`"))),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            BoundaryDomain::UnitSquare | BoundaryDomain::UnitDisc => 2,
            BoundaryDomain::Interval { .. } => 1,
        }
    }
}

/// Factor `h` vanishing on the boundary and lift `l` matching boundary data.
#[derive(Clone)]
pub struct BoundaryWrap {
    pub domain: BoundaryDomain,
    pub factor: JetFn,
    pub lift: Option<JetFn>,
}

impl fmt::Debug for BoundaryWrap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryWrap").field("domain", &self.domain).field("lift", &self.lift.is_some()).finish()
    }
}

impl BoundaryWrap {
    pub fn new(domain: BoundaryDomain) -> Result<Self> {
        let (factor, lift): (JetFn, Option<JetFn>) = match domain {
            BoundaryDomain::UnitSquare => (Arc::new(|x: &[Jet]| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1])), None),
            BoundaryDomain::UnitDisc => (Arc::new(|x: &[Jet]| 1.0 - Jet::norm(x)), None),
            BoundaryDomain::Interval { a, b, value_a, value_b, pa, pb } => {
                if !(a < b) {
                    return Err(param_err(format!("interval needs a < b, got [{a}, {b}]")));
                }
                if !(pa > 0.0 && pa <= 1.0 && pb > 0.0 && pb <= 1.0) {
                    return Err(param_err(format!("exponents must lie in (0, 1], got {pa}, {pb}")));
                }
                // (x - a)^pa (x - b)^pb written with a real-valued branch:
                // -(x - a)^pa (b - x)^pb, which is the same for pa = pb = 1.
                let factor: JetFn = Arc::new(move |x: &[Jet]| -((x[0] - a).powf(pa) * (b - x[0]).powf(pb)));
                let slope = (value_b - value_a) / (b - a);
                let lift: JetFn = Arc::new(move |x: &[Jet]| (x[0] - a) * slope + value_a);
                (factor, Some(lift))
            }
        };
        Ok(BoundaryWrap { domain, factor, lift })
    }

    /// Replaces the lift, for boundary data beyond the built-in domains.
    pub fn with_lift(mut self, lift: JetFn) -> Self {
        self.lift = Some(lift);
        self
    }

    /// Appends `h * phi + l` to a graph.
    pub fn apply(&self, graph: &mut Graph<'_>, phi: usize) -> usize {
        let h = graph.field(self.factor.clone());
        let u = graph.mul(phi, h);
        match &self.lift {
            Some(l) => {
                let l = graph.field(l.clone());
                graph.add(u, l)
            }
            None => u,
        }
    }
}

/// A network, optionally wrapped to satisfy boundary conditions exactly.
#[derive(Debug, Clone)]
pub struct Ansatz {
    pub net: NetworkParams,
    pub wrap: Option<BoundaryWrap>,
}

/// Wraps `net` for `domain`.
pub fn boundary_wrap(net: NetworkParams, domain: BoundaryDomain) -> Result<Ansatz> {
    if net.input_dim != domain.dim() {
        return Err(Error::Dimension { expected: domain.dim(), got: net.input_dim });
    }
    Ok(Ansatz { net, wrap: Some(BoundaryWrap::new(domain)?) })
}

impl Ansatz {
    pub fn plain(net: NetworkParams) -> Self {
        Ansatz { net, wrap: None }
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim
    }

    pub fn graph(&self) -> Graph<'_> {
        let mut g = Graph::new(self.net.input_dim);
        let phi = g.network(&self.net, g.input()).expect("input arity matches the network");
        let out = match &self.wrap {
            Some(w) => w.apply(&mut g, phi),
            None => phi,
        };
        g.set_output(out);
        g
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval_batch(&point(x, self.input_dim())?)?[0])
    }

    pub fn eval_batch(&self, points: &Array2<f64>) -> Result<Vec<f64>> {
        let graph = self.graph();
        let mut out = Vec::with_capacity(points.nrows());
        for chunk in points.axis_chunks_iter(ndarray::Axis(0), 64) {
            out.extend(graph.forward(chunk, DerivOrder::Value, false)?.values());
        }
        Ok(out)
    }

    pub fn jet(&self, x: &[f64]) -> Result<Jet> {
        let p = point(x, self.input_dim())?;
        Ok(self.graph().forward(p.view(), DerivOrder::Laplacian, false)?.jet(0))
    }
}

fn point(x: &[f64], dim: usize) -> Result<Array2<f64>> {
    if x.len() != dim {
        return Err(Error::Dimension { expected: dim, got: x.len() });
    }
    Ok(Array2::from_shape_vec((1, dim), x.to_vec()).expect("one row"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::networks::{random_smooth_network, Architecture};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn square_and_disc_vanish_on_boundary() {
        let net = random_smooth_network(3, Architecture::Fnn, 2, &[8, 8]).unwrap();
        let sq = boundary_wrap(net.clone(), BoundaryDomain::UnitSquare).unwrap();
        let disc = boundary_wrap(net, BoundaryDomain::UnitDisc).unwrap();
        assert_eq!(sq.eval(&[0.0, 0.7]).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut sq_pts = Array2::zeros((10_000, 2));
        let mut disc_pts = Array2::zeros((10_000, 2));
        for i in 0..10_000 {
            let t: f64 = rng.random();
            let side = i % 4;
            let (x, y) = match side {
                0 => (0.0, t),
                1 => (1.0, t),
                2 => (t, 0.0),
                _ => (t, 1.0),
            };
            sq_pts[[i, 0]] = x;
            sq_pts[[i, 1]] = y;
            let th = 2.0 * std::f64::consts::PI * t;
            disc_pts[[i, 0]] = th.cos();
            disc_pts[[i, 1]] = th.sin();
        }
        assert!(sq.eval_batch(&sq_pts).unwrap().iter().all(|&v| v == 0.0));
        assert!(disc.eval_batch(&disc_pts).unwrap().iter().all(|&v| v.abs() <= 1e-15));
    }

    #[test]
    fn interval_lift_hits_end_values() {
        let net = random_smooth_network(5, Architecture::Fnn, 1, &[6]).unwrap();
        let w = boundary_wrap(net, BoundaryDomain::interval(0.0, 1.0, 1.0, 3.0)).unwrap();
        assert_eq!(w.eval(&[0.0]).unwrap(), 1.0);
        assert_eq!(w.eval(&[1.0]).unwrap(), 3.0);
        let lift = w.wrap.as_ref().unwrap().lift.as_ref().unwrap();
        assert_eq!(lift(&Jet::coordinates(&[0.25])).value, 1.5);
    }

    #[test]
    fn wrapped_derivatives_follow_product_rule() {
        let net = random_smooth_network(8, Architecture::Fnn, 2, &[6, 6]).unwrap();
        let w = boundary_wrap(net.clone(), BoundaryDomain::UnitSquare).unwrap();
        let x = [0.3, 0.6];
        let phi = crate::autodiff::second_order(&net, &x).unwrap();
        let h = (w.wrap.as_ref().unwrap().factor)(&Jet::coordinates(&x));
        let expect = phi * h;
        let got = w.jet(&x).unwrap();
        assert!((got.value - expect.value).abs() < 1e-15);
        for k in 0..2 {
            assert!((got.grad[k] - expect.grad[k]).abs() < 1e-14);
            assert!((got.diag[k] - expect.diag[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn invalid_domains() {
        let bad = BoundaryDomain::Interval { a: 1.0, b: 0.0, value_a: 0.0, value_b: 0.0, pa: 1.0, pb: 1.0 };
        assert!(BoundaryWrap::new(bad).is_err());
        let bad = BoundaryDomain::Interval { a: 0.0, b: 1.0, value_a: 0.0, value_b: 0.0, pa: 1.5, pb: 1.0 };
        assert!(BoundaryWrap::new(bad).is_err());
        assert!(BoundaryDomain::from_name("torus").is_err());
    }
}
