//! Error curves, best-historical and moving-average trackers.

use std::collections::VecDeque;

use serde::Serialize;

/// One row of the training curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Record {
    pub iter: usize,
    pub loss: f64,
    pub rel_l2: f64,
    pub lr: f64,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub records: Vec<Record>,
    pub window: usize,
    best: f64,
    best_moving_average: Option<f64>,
    recent: VecDeque<f64>,
}

impl Metrics {
    pub fn new(window: usize) -> Self {
        assert!(window >= 1, "metric window must be positive");
        Metrics {
            records: Vec::new(),
            window,
            best: f64::INFINITY,
            best_moving_average: None,
            recent: VecDeque::with_capacity(window),
        }
    }

    pub fn push(&mut self, record: Record) {
        self.best = self.best.min(record.rel_l2);
        if self.recent.len() == self.window {
            self.recent.pop_front();
        }
        self.recent.push_back(record.rel_l2);
        if let Some(avg) = self.moving_average() {
            self.best_moving_average = Some(self.best_moving_average.map_or(avg, |b: f64| b.min(avg)));
        }
        self.records.push(record);
    }

    /// Best test error so far (infinite before the first record).
    pub fn best(&self) -> f64 {
        self.best
    }

    /// Mean of the last `window` test errors, once that many are recorded.
    pub fn moving_average(&self) -> Option<f64> {
        (self.recent.len() == self.window).then(|| self.recent.iter().sum::<f64>() / self.window as f64)
    }

    pub fn best_moving_average(&self) -> Option<f64> {
        self.best_moving_average
    }

    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// The curve as CSV with floats written in round-trip exponent form.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,loss,rel_l2,lr,elapsed_ms\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                r.iter, r.loss, r.rel_l2, r.lr, r.elapsed_ms
            ));
        }
        out
    }
}
