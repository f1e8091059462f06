//! Uniform samplers on the experiment domains.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    UnitSquare,
    UnitDisc,
    Interval { a: f64, b: f64 },
}

impl DomainKind {
    pub fn dim(&self) -> usize {
        match self {
            DomainKind::UnitSquare | DomainKind::UnitDisc => 2,
            DomainKind::Interval { .. } => 1,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match *self {
            DomainKind::UnitSquare => x.iter().all(|v| (0.0..=1.0).contains(v)),
            DomainKind::UnitDisc => x[0] * x[0] + x[1] * x[1] <= 1.0,
            DomainKind::Interval { a, b } => (a..=b).contains(&x[0]),
        }
    }
}

/// Random stream of domain points. Points closer than `exclusion` to the
/// origin are redrawn.
#[derive(Debug, Clone)]
pub struct DomainSampler {
    pub kind: DomainKind,
    pub exclusion: f64,
    rng: ChaCha8Rng,
}

impl DomainSampler {
    pub fn new(kind: DomainKind, seed: u64) -> Self {
        DomainSampler { kind, exclusion: 0.0, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn with_exclusion(mut self, radius: f64) -> Self {
        self.exclusion = radius;
        self
    }

    /// Independent sampler on stream `stream` of the same seed.
    pub fn with_stream(mut self, stream: u64) -> Self {
        self.rng.set_stream(stream);
        self
    }

    fn point(&mut self, out: &mut [f64]) {
        match self.kind {
            DomainKind::UnitSquare => {
                out[0] = self.rng.random();
                out[1] = self.rng.random();
            }
            DomainKind::UnitDisc => {
                let r = self.rng.random::<f64>().sqrt();
                let t = 2.0 * PI * self.rng.random::<f64>();
                out[0] = r * t.cos();
                out[1] = r * t.sin();
            }
            DomainKind::Interval { a, b } => out[0] = a + (b - a) * self.rng.random::<f64>(),
        }
    }

    /// `n` i.i.d. uniform interior points, one per row.
    pub fn interior(&mut self, n: usize) -> Array2<f64> {
        let d = self.kind.dim();
        let mut pts = Array2::zeros((n, d));
        let mut buf = [0.0; 2];
        for mut row in pts.rows_mut() {
            loop {
                self.point(&mut buf[..d]);
                let r2: f64 = buf[..d].iter().map(|v| v * v).sum();
                if self.exclusion == 0.0 || r2 >= self.exclusion * self.exclusion {
                    break;
                }
            }
            for (o, v) in row.iter_mut().zip(&buf[..d]) {
                *o = *v;
            }
        }
        pts
    }

    /// `n` uniform points on the boundary (arc length measure).
    pub fn boundary(&mut self, n: usize) -> Array2<f64> {
        let d = self.kind.dim();
        let mut pts = Array2::zeros((n, d));
        for (i, mut row) in pts.rows_mut().into_iter().enumerate() {
            match self.kind {
                DomainKind::UnitSquare => {
                    let t: f64 = self.rng.random();
                    let (x, y) = match self.rng.random_range(0..4) {
                        0 => (0.0, t),
                        1 => (1.0, t),
                        2 => (t, 0.0),
                        _ => (t, 1.0),
                    };
                    row[0] = x;
                    row[1] = y;
                }
                DomainKind::UnitDisc => {
                    let t = 2.0 * PI * self.rng.random::<f64>();
                    row[0] = t.cos();
                    row[1] = t.sin();
                }
                DomainKind::Interval { a, b } => row[0] = if i % 2 == 0 { a } else { b },
            }
        }
        pts
    }
}

/// `n` uniform interior points of `kind` from a fresh stream seeded by `seed`.
pub fn sample_interior(kind: DomainKind, n: usize, seed: u64) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(param_err("sample count must be at least 1"));
    }
    Ok(DomainSampler::new(kind, seed).interior(n))
}
