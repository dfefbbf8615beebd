//! Aggregated Monte Carlo results.

use serde::{Deserialize, Serialize};

use crate::mumimo::Precoding;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub drop: usize,
    pub user: usize,
    /// Index of the assigned beam in the leaf list.
    pub beam: usize,
    pub selections: usize,
    /// Sum of per-slot rates, per precoding mode (bit/s/Hz).
    pub rate_sum: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub drop: usize,
    pub slot: usize,
    pub users: Vec<usize>,
    pub beams: Vec<usize>,
    /// `rates[mode][member]`.
    pub rates: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricStore {
    pub beam_ids: Vec<usize>,
    pub modes: Vec<Precoding>,
    /// Realised rate of every scheduled user-slot, `rates[mode][beam]`.
    pub rates: Vec<Vec<Vec<f64>>>,
    pub users: Vec<UserRecord>,
    pub slots: usize,
    pub scheduled: usize,
    /// Subcarrier precoders that needed the regularised fallback.
    pub regularized: usize,
    pub max_condition: f64,
    pub slot_log: Vec<SlotRecord>,
}

impl MetricStore {
    pub fn new(beam_ids: Vec<usize>, modes: Vec<Precoding>) -> Self {
        let rates = vec![vec![Vec::new(); beam_ids.len()]; modes.len()];
        MetricStore { beam_ids, modes, rates, users: Vec::new(), slots: 0, scheduled: 0, regularized: 0, max_condition: 0.0, slot_log: Vec::new() }
    }

    pub fn mode_index(&self, mode: Precoding) -> Option<usize> {
        self.modes.iter().position(|m| *m == mode)
    }

    /// Mean rate of beam `c` under `mode`, `None` when the beam was never scheduled.
    pub fn beam_mean(&self, mode: Precoding, c: usize) -> Option<f64> {
        let v = &self.rates[self.mode_index(mode)?][c];
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Mean over all scheduled user-slots.
    pub fn overall_mean(&self, mode: Precoding) -> Option<f64> {
        let m = self.mode_index(mode)?;
        let n: usize = self.rates[m].iter().map(|v| v.len()).sum();
        (n > 0).then(|| self.rates[m].iter().flatten().sum::<f64>() / n as f64)
    }

    /// Average of the per-beam means over beams that were scheduled at least once.
    pub fn mean_of_beam_means(&self, mode: Precoding) -> Option<f64> {
        let means: Vec<f64> = (0..self.beam_ids.len()).filter_map(|c| self.beam_mean(mode, c)).collect();
        (!means.is_empty()).then(|| means.iter().sum::<f64>() / means.len() as f64)
    }

    /// Max minus min of the per-beam means.
    pub fn beam_mean_spread(&self, mode: Precoding) -> Option<f64> {
        let means: Vec<f64> = (0..self.beam_ids.len()).filter_map(|c| self.beam_mean(mode, c)).collect();
        if means.is_empty() {
            return None;
        }
        let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
        Some(hi - lo)
    }

    /// Empirical CDF `(rate, F)` of beam `c`, one point per distinct sample.
    pub fn cdf(&self, mode: Precoding, c: usize) -> Vec<(f64, f64)> {
        let Some(m) = self.mode_index(mode) else { return Vec::new() };
        let mut v = self.rates[m][c].clone();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, x) in v.iter().enumerate() {
            let f = (i + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == *x => last.1 = f,
                _ => out.push((*x, f)),
            }
        }
        out
    }

    /// Append `other`, which must cover the same beams and modes.
    pub fn merge(&mut self, other: MetricStore) {
        debug_assert_eq!(self.beam_ids, other.beam_ids);
        debug_assert_eq!(self.modes, other.modes);
        for (a, b) in self.rates.iter_mut().zip(other.rates) {
            for (x, y) in a.iter_mut().zip(b) {
                x.extend(y);
            }
        }
        self.users.extend(other.users);
        self.slots += other.slots;
        self.scheduled += other.scheduled;
        self.regularized += other.regularized;
        self.max_condition = self.max_condition.max(other.max_condition);
        self.slot_log.extend(other.slot_log);
    }
}
