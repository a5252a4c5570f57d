//! Per-service prediction windows holding untreated current and future
//! requests, with reconciliation of mis-predicted arrivals.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::forecast::Forecaster;
use crate::model::ServiceId;

/// One request. Real requests carry their true arrival slot; phantoms are
/// false-positive predictions that never truly arrive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub service: ServiceId,
    pub arrival_slot: u64,
    pub phantom: bool,
    /// Stamped on every enqueue into an instance queue; strictly increasing
    /// along each FIFO.
    pub ticket: u64,
}

#[derive(Debug, Default, Clone, Copy)]
pub struct RequestIds(u64);

impl RequestIds {
    pub fn next(&mut self) -> u64 {
        self.0 += 1;
        self.0
    }
}

#[derive(Debug, Clone, Default)]
struct WindowSlot {
    requests: VecDeque<Request>,
    /// Everything that ever entered this slot (prediction plus revealed
    /// shortfall); upper bound on its content.
    entered: u32,
    /// Real requests not covered by the prediction, released on arrival.
    shortfall: u32,
}

/// Counts moved into a window by one advance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Entering {
    /// Size of the newly created farthest slot.
    pub tail: u32,
    /// Unpredicted real requests released into the current slot.
    pub shortfall: u32,
}

impl Entering {
    pub fn total(&self) -> u64 {
        u64::from(self.tail) + u64::from(self.shortfall)
    }
}

#[derive(Debug, Clone)]
pub struct PredictionWindow {
    pub service: ServiceId,
    size: u32,
    /// `slots[d]` holds requests of slot `t + d`.
    slots: VecDeque<WindowSlot>,
    forecaster: Forecaster,
}

impl PredictionWindow {
    /// Builds the window at slot `t0`: the current slot holds its true
    /// arrivals, slots `1..=size` hold predictions.
    pub fn new<R: Rng>(
        service: ServiceId,
        size: u32,
        forecaster: Forecaster,
        t0: u64,
        truth: impl Fn(u64) -> u32,
        ids: &mut RequestIds,
        rng: &mut R,
    ) -> Self {
        let mut w = Self {
            service,
            size,
            slots: VecDeque::with_capacity(size as usize + 1),
            forecaster,
        };
        let a0 = truth(t0);
        let mut first = WindowSlot::default();
        first.entered = a0;
        for _ in 0..a0 {
            first.requests.push_back(w.make(ids, t0, false));
        }
        w.forecaster.observe(a0);
        w.slots.push_back(first);
        for d in 1..=u64::from(size) {
            let slot = w.predict_slot(t0 + d, truth(t0 + d), ids, rng);
            w.slots.push_back(slot);
        }
        w
    }

    fn make(&self, ids: &mut RequestIds, arrival_slot: u64, phantom: bool) -> Request {
        Request {
            id: ids.next(),
            service: self.service,
            arrival_slot,
            phantom,
            ticket: 0,
        }
    }

    fn predict_slot<R: Rng>(
        &self,
        slot: u64,
        truth: u32,
        ids: &mut RequestIds,
        rng: &mut R,
    ) -> WindowSlot {
        let predicted = self.forecaster.predict(truth, rng);
        let real = predicted.min(truth);
        let mut reqs: Vec<Request> = (0..predicted)
            .map(|i| self.make(ids, slot, i >= real))
            .collect();
        reqs.shuffle(rng);
        WindowSlot {
            requests: reqs.into(),
            entered: predicted,
            shortfall: truth - real,
        }
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    /// `Q^(d)`: untreated requests of slot `t + d`.
    pub fn q(&self, d: usize) -> u32 {
        self.slots.get(d).map_or(0, |s| s.requests.len() as u32)
    }

    /// `Q^p`: total untreated requests in the window.
    pub fn q_p(&self) -> u64 {
        self.slots.iter().map(|s| s.requests.len() as u64).sum()
    }

    /// Per-slot counts `[Q^(0), ..., Q^(D)]`.
    pub fn counts(&self) -> Vec<u32> {
        (0..self.slots.len()).map(|d| self.q(d)).collect()
    }

    /// Upper bound of each slot: everything that entered it.
    pub fn bounds(&self) -> Vec<u32> {
        self.slots.iter().map(|s| s.entered).collect()
    }

    /// Removes the first `n` requests of slot `d`.
    pub fn take(&mut self, d: usize, n: usize) -> Vec<Request> {
        let slot = &mut self.slots[d];
        let n = n.min(slot.requests.len());
        slot.requests.drain(..n).collect()
    }

    pub fn iter_requests(&self) -> impl Iterator<Item = &Request> {
        self.slots.iter().flat_map(|s| s.requests.iter())
    }

    /// Moves the window from slot `t` to `t + 1`: the current slot must be
    /// empty (fully-efficient admission), the arrivals of `t + 1` are
    /// revealed, and the new farthest slot `t + 1 + size` is predicted.
    pub fn advance<R: Rng>(
        &mut self,
        t: u64,
        truth: impl Fn(u64) -> u32,
        ids: &mut RequestIds,
        rng: &mut R,
    ) -> Result<Entering, String> {
        let head = self.slots.pop_front().unwrap_or_default();
        if !head.requests.is_empty() {
            return Err(format!(
                "{}: {} requests of slot {t} left unadmitted",
                self.service,
                head.requests.len()
            ));
        }
        let next = t + 1;
        let tail_slot = next + u64::from(self.size);
        let mut entering = Entering::default();

        if self.size == 0 {
            // No lookahead: the current slot is simply the truth.
            let a = truth(next);
            let mut slot = WindowSlot::default();
            slot.entered = a;
            for _ in 0..a {
                slot.requests.push_back(self.make(ids, next, false));
            }
            self.forecaster.observe(a);
            self.slots.push_back(slot);
            entering.tail = a;
            return Ok(entering);
        }

        let shortfall = self.slots.front().map_or(0, |s| s.shortfall);
        let extra: Vec<Request> = (0..shortfall)
            .map(|_| self.make(ids, next, false))
            .collect();
        if let Some(cur) = self.slots.front_mut() {
            cur.requests.extend(extra);
            cur.entered += shortfall;
            cur.shortfall = 0;
        }
        entering.shortfall = shortfall;
        self.forecaster.observe(truth(next));

        let slot = self.predict_slot(tail_slot, truth(tail_slot), ids, rng);
        entering.tail = slot.entered;
        self.slots.push_back(slot);
        Ok(entering)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::ForecasterSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn window(
        spec: ForecasterSpec,
        size: u32,
        series: &'static [u32],
    ) -> (PredictionWindow, RequestIds, ChaCha8Rng) {
        let mut ids = RequestIds::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let truth = |t: u64| series.get(t as usize).copied().unwrap_or(0);
        let w = PredictionWindow::new(
            ServiceId(0),
            size,
            Forecaster::new(spec),
            0,
            truth,
            &mut ids,
            &mut rng,
        );
        (w, ids, rng)
    }

    fn truth_of(series: &'static [u32]) -> impl Fn(u64) -> u32 {
        |t: u64| series.get(t as usize).copied().unwrap_or(0)
    }

    #[test]
    fn perfect_prediction_fills_slots_with_truth() {
        const S: &[u32] = &[1, 4, 2, 7];
        let (mut w, mut ids, mut rng) = window(ForecasterSpec::Perfect, 2, S);
        assert_eq!(w.counts(), vec![1, 4, 2]);
        assert!(w.iter_requests().all(|r| !r.phantom));
        w.take(0, 1);
        let e = w.advance(0, truth_of(S), &mut ids, &mut rng).unwrap();
        assert_eq!(
            e,
            Entering {
                tail: 7,
                shortfall: 0
            }
        );
        assert_eq!(w.counts(), vec![4, 2, 7]);
    }

    #[test]
    fn all_false_negative_reveals_truth_on_arrival() {
        const S: &[u32] = &[0, 3, 5];
        let (mut w, mut ids, mut rng) = window(ForecasterSpec::AllFalseNegative, 1, S);
        assert_eq!(w.counts(), vec![0, 0]);
        let e = w.advance(0, truth_of(S), &mut ids, &mut rng).unwrap();
        assert_eq!(
            e,
            Entering {
                tail: 0,
                shortfall: 3
            }
        );
        assert_eq!(w.counts(), vec![3, 0]);
        assert!(w.iter_requests().all(|r| !r.phantom && r.arrival_slot == 1));
    }

    #[test]
    fn false_positive_adds_phantoms_only() {
        const S: &[u32] = &[0, 2];
        let (w, _, _) = window(ForecasterSpec::FalsePositive { rate: 5.0 }, 1, S);
        let real = w.iter_requests().filter(|r| !r.phantom).count();
        let phantom = w.iter_requests().filter(|r| r.phantom).count();
        assert_eq!(real, 2);
        assert_eq!(w.q(1) as usize, 2 + phantom);
    }

    #[test]
    fn unadmitted_current_slot_is_rejected() {
        const S: &[u32] = &[2, 0];
        let (mut w, mut ids, mut rng) = window(ForecasterSpec::Perfect, 0, S);
        assert!(w.advance(0, truth_of(S), &mut ids, &mut rng).is_err());
    }

    #[test]
    fn learned_forecaster_reconciles_surplus_and_shortfall() {
        // MA(1) predicts the last revealed count: slot 1 predicted 6 with truth 2
        // (4 phantoms), slot 2 predicted 2 with truth 5 (3 revealed later).
        const S: &[u32] = &[6, 2, 5];
        let (mut w, mut ids, mut rng) = window(ForecasterSpec::MovingAverage { window: 1 }, 1, S);
        assert_eq!(w.q(1), 6);
        assert_eq!(w.iter_requests().filter(|r| r.phantom).count(), 4);
        w.take(0, 6);
        let e = w.advance(0, truth_of(S), &mut ids, &mut rng).unwrap();
        assert_eq!(
            e,
            Entering {
                tail: 2,
                shortfall: 0
            }
        );
        w.take(0, 6);
        let e = w.advance(1, truth_of(S), &mut ids, &mut rng).unwrap();
        assert_eq!(e.shortfall, 3);
        assert_eq!(w.q(0), 5);
    }

    #[test]
    fn take_is_front_first() {
        const S: &[u32] = &[3];
        let (mut w, _, _) = window(ForecasterSpec::Perfect, 0, S);
        let ids: Vec<u64> = w.iter_requests().map(|r| r.id).collect();
        let got: Vec<u64> = w.take(0, 2).into_iter().map(|r| r.id).collect();
        assert_eq!(got, ids[..2]);
        assert_eq!(w.q_p(), 1);
    }
}
