//! Arrival predictors: oracle-based models (perfect, all-false-negative,
//! false-positive) and learned one-step forecasters.

use std::collections::VecDeque;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ForecasterSpec {
    Perfect,
    AllFalseNegative,
    /// Truth plus `Poisson(rate)` phantom requests per predicted slot.
    FalsePositive {
        rate: f64,
    },
    MovingAverage {
        window: usize,
    },
    Ewma {
        weight: f64,
    },
    /// Scalar constant-level Kalman filter.
    Kalman {
        process_var: f64,
        obs_var: f64,
    },
    /// Samples the empirical distribution of the last `history_len` counts.
    DistributionEstimator {
        history_len: usize,
    },
}

impl ForecasterSpec {
    /// Forecasters that learn from history rather than reading the truth.
    pub fn is_learned(&self) -> bool {
        matches!(
            self,
            ForecasterSpec::MovingAverage { .. }
                | ForecasterSpec::Ewma { .. }
                | ForecasterSpec::Kalman { .. }
                | ForecasterSpec::DistributionEstimator { .. }
        )
    }
}

/// Per-service predictor state.
#[derive(Debug, Clone)]
pub struct Forecaster {
    spec: ForecasterSpec,
    history: VecDeque<u32>,
    cap: usize,
    level: Option<f64>,
    variance: f64,
}

impl Forecaster {
    pub fn new(spec: ForecasterSpec) -> Self {
        let cap = match &spec {
            ForecasterSpec::MovingAverage { window } => (*window).max(1),
            ForecasterSpec::DistributionEstimator { history_len } => (*history_len).max(1),
            _ => 1,
        };
        Self {
            spec,
            history: VecDeque::with_capacity(cap),
            cap,
            level: None,
            variance: 0.0,
        }
    }

    pub fn spec(&self) -> &ForecasterSpec {
        &self.spec
    }

    /// Feeds the true count of a slot once it is revealed.
    pub fn observe(&mut self, count: u32) {
        if self.history.len() == self.cap {
            self.history.pop_front();
        }
        self.history.push_back(count);
        let z = f64::from(count);
        match self.spec {
            ForecasterSpec::Ewma { weight } => {
                self.level = Some(match self.level {
                    None => z,
                    Some(prev) => weight * z + (1.0 - weight) * prev,
                });
            }
            ForecasterSpec::Kalman {
                process_var,
                obs_var,
            } => match self.level {
                None => {
                    self.level = Some(z);
                    self.variance = obs_var;
                }
                Some(x) => {
                    let p = self.variance + process_var;
                    let denom = p + obs_var;
                    let gain = if denom > 0.0 { p / denom } else { 1.0 };
                    self.level = Some(x + gain * (z - x));
                    self.variance = (1.0 - gain) * p;
                }
            },
            _ => {}
        }
    }

    /// Learned forecast of the next slot. Zero before any observation.
    pub fn forecast<R: Rng>(&self, rng: &mut R) -> u32 {
        if self.history.is_empty() {
            return 0;
        }
        let est = match self.spec {
            ForecasterSpec::MovingAverage { .. } => {
                self.history.iter().map(|&c| f64::from(c)).sum::<f64>() / self.history.len() as f64
            }
            ForecasterSpec::Ewma { .. } | ForecasterSpec::Kalman { .. } => {
                self.level.unwrap_or(0.0)
            }
            ForecasterSpec::DistributionEstimator { .. } => {
                let h: Vec<u32> = self.history.iter().copied().collect();
                return h.choose(rng).copied().unwrap_or(0);
            }
            _ => return self.history.back().copied().unwrap_or(0),
        };
        est.max(0.0).round() as u32
    }

    /// Predicted count for a future slot whose true count is `truth`.
    pub fn predict<R: Rng>(&self, truth: u32, rng: &mut R) -> u32 {
        match self.spec {
            ForecasterSpec::Perfect => truth,
            ForecasterSpec::AllFalseNegative => 0,
            ForecasterSpec::FalsePositive { rate } => truth + phantoms(rate, rng),
            _ => self.forecast(rng),
        }
    }
}

fn phantoms<R: Rng>(rate: f64, rng: &mut R) -> u32 {
    if rate <= 0.0 {
        return 0;
    }
    let x: f64 = Poisson::new(rate).expect("positive rate").sample(rng);
    x as u32
}

/// Replays `history` through a fresh forecaster and returns its forecast of
/// the next slot. Empty history forecasts zero.
pub fn forecast_next<R: Rng>(spec: &ForecasterSpec, history: &[u32], rng: &mut R) -> u32 {
    let mut f = Forecaster::new(spec.clone());
    for &h in history {
        f.observe(h);
    }
    f.forecast(rng)
}
