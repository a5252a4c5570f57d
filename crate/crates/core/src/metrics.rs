//! Per-slot costs and backlog, response-time statistics, run summaries and
//! the drift bound constant.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::window::Request;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SlotMetrics {
    pub slot: u64,
    /// Communication cost.
    pub m: f64,
    /// Energy cost.
    pub g: f64,
    /// Weighted total queue length.
    pub h: f64,
    /// Real requests completed.
    pub completions: u64,
    /// Real requests completed no later than their true arrival slot.
    pub pre_served: u64,
}

/// Response time in ms; `None` for phantoms or unfinished requests.
pub fn response_time(req: &Request, completion_slot: u64, slot_length_ms: f64) -> Option<f64> {
    if req.phantom {
        return None;
    }
    Some(completion_slot.saturating_sub(req.arrival_slot) as f64 * slot_length_ms)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResponseStats {
    pub count: u64,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunSummary {
    pub slots: u64,
    /// Mean of `m + γ·g` over measured slots.
    pub time_avg_cost: f64,
    pub time_avg_m: f64,
    pub time_avg_g: f64,
    pub time_avg_h: f64,
    pub max_h: f64,
    pub response: ResponseStats,
    pub pre_served: u64,
    pub phantom_completions: u64,
}

/// Streaming per-run accumulator. Slots before `warmup` are excluded from
/// every average.
#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    gamma: f64,
    warmup: u64,
    slot_length_ms: f64,
    slots: u64,
    sum_m: f64,
    sum_g: f64,
    sum_h: f64,
    max_h: f64,
    /// Response time in slots -> count.
    responses: BTreeMap<u64, u64>,
    pre_served: u64,
    phantom_completions: u64,
}

impl MetricsAccumulator {
    pub fn new(gamma: f64, warmup: u64, slot_length_ms: f64) -> Self {
        Self {
            gamma,
            warmup,
            slot_length_ms,
            slots: 0,
            sum_m: 0.0,
            sum_g: 0.0,
            sum_h: 0.0,
            max_h: 0.0,
            responses: BTreeMap::new(),
            pre_served: 0,
            phantom_completions: 0,
        }
    }

    /// Records slot `t`'s costs and completions; returns its metrics.
    pub fn record(&mut self, t: u64, m: f64, g: f64, h: f64, completed: &[Request]) -> SlotMetrics {
        let mut sm = SlotMetrics {
            slot: t,
            m,
            g,
            h,
            ..Default::default()
        };
        let measured = t >= self.warmup;
        for r in completed {
            if r.phantom {
                if measured {
                    self.phantom_completions += 1;
                }
                continue;
            }
            sm.completions += 1;
            if t <= r.arrival_slot {
                sm.pre_served += 1;
            }
            if measured {
                *self
                    .responses
                    .entry(t.saturating_sub(r.arrival_slot))
                    .or_default() += 1;
            }
        }
        if measured {
            self.slots += 1;
            self.sum_m += m;
            self.sum_g += g;
            self.sum_h += h;
            self.max_h = self.max_h.max(h);
            self.pre_served += sm.pre_served;
        }
        sm
    }

    pub fn summary(&self) -> RunSummary {
        let n = self.slots.max(1) as f64;
        RunSummary {
            slots: self.slots,
            time_avg_cost: (self.sum_m + self.gamma * self.sum_g) / n,
            time_avg_m: self.sum_m / n,
            time_avg_g: self.sum_g / n,
            time_avg_h: self.sum_h / n,
            max_h: self.max_h,
            response: response_stats(&self.responses, self.slot_length_ms),
            pre_served: self.pre_served,
            phantom_completions: self.phantom_completions,
        }
    }
}

/// Nearest-rank percentile of a histogram: the smallest value whose
/// cumulative count reaches `ceil(p/100 · n)`.
pub fn nearest_rank(hist: &BTreeMap<u64, u64>, p: f64) -> Option<u64> {
    let n: u64 = hist.values().sum();
    if n == 0 {
        return None;
    }
    let rank = ((p / 100.0 * n as f64).ceil() as u64).clamp(1, n);
    let mut seen = 0;
    hist.iter().find_map(|(&v, &c)| {
        seen += c;
        (seen >= rank).then_some(v)
    })
}

fn response_stats(hist: &BTreeMap<u64, u64>, slot_ms: f64) -> ResponseStats {
    let count: u64 = hist.values().sum();
    if count == 0 {
        return ResponseStats::default();
    }
    let total: u64 = hist.iter().map(|(&v, &c)| v * c).sum();
    let pct = |p| nearest_rank(hist, p).unwrap_or(0) as f64 * slot_ms;
    ResponseStats {
        count,
        mean_ms: total as f64 / count as f64 * slot_ms,
        p50_ms: pct(50.0),
        p95_ms: pct(95.0),
        p99_ms: pct(99.0),
    }
}

/// Inputs of the drift bound constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// Number of services.
    pub services: f64,
    pub a_max: f64,
    /// Largest prediction window.
    pub d: f64,
    /// Largest number of instances of any VNF.
    pub b_max: f64,
    pub phi_max: f64,
    pub alpha: f64,
}

/// Constant `B` bounding the one-slot drift of the quadratic Lyapunov
/// function.
#[allow(non_snake_case)]
pub fn drift_bound_B(p: &BoundParams) -> f64 {
    let BoundParams {
        services: k,
        a_max: a,
        d,
        b_max: b,
        phi_max: phi,
        alpha,
    } = *p;
    let w = (d + 1.0).powi(2);
    0.5 * (k * a * a + k * w * a * a)
        + alpha / 2.0 * k * b * (w * a * a + phi * phi)
        + alpha / 2.0 * k * b * (b * b * phi * phi + phi * phi)
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub replications: usize,
    pub time_avg_cost: Stat,
    pub time_avg_m: Stat,
    pub time_avg_g: Stat,
    pub time_avg_h: Stat,
    pub response_mean_ms: Stat,
    pub response_p50_ms: Stat,
    pub response_p95_ms: Stat,
    pub response_p99_ms: Stat,
}

pub fn aggregate(runs: &[RunSummary]) -> AggregateSummary {
    let col = |f: fn(&RunSummary) -> f64| Stat::of(&runs.iter().map(f).collect::<Vec<_>>());
    AggregateSummary {
        replications: runs.len(),
        time_avg_cost: col(|r| r.time_avg_cost),
        time_avg_m: col(|r| r.time_avg_m),
        time_avg_g: col(|r| r.time_avg_g),
        time_avg_h: col(|r| r.time_avg_h),
        response_mean_ms: col(|r| r.response.mean_ms),
        response_p50_ms: col(|r| r.response.p50_ms),
        response_p95_ms: col(|r| r.response.p95_ms),
        response_p99_ms: col(|r| r.response.p99_ms),
    }
}
