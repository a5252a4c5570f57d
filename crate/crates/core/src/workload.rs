//! Per-slot arrival counts: Poisson generation, trace files, and the
//! per-service prediction window sizes.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::TraceError;

/// Default per-slot arrival bound; large enough to never bind in practice.
pub const DEFAULT_A_MAX: u32 = 10_000;

/// Default slot length in milliseconds.
pub const DEFAULT_SLOT_MS: f64 = 10.0;

/// Arrival counts `A_k(t)` per service and slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalTrace {
    pub counts: Vec<Vec<u32>>,
    pub slot_length_ms: f64,
}

impl ArrivalTrace {
    /// Arrivals for service `k` at slot `t`; zero past the end of the trace.
    pub fn at(&self, k: usize, t: u64) -> u32 {
        self.counts[k].get(t as usize).copied().unwrap_or(0)
    }

    pub fn services(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().map(Vec::len).min().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Uses one recorded series for `services` services, service `k` reading
    /// it cyclically from offset `k * len / services`.
    pub fn from_series_rotated(
        series: &[u32],
        services: usize,
        horizon: usize,
        slot_length_ms: f64,
    ) -> Self {
        let n = series.len().max(1);
        let counts = (0..services)
            .map(|k| {
                let off = k * n / services.max(1);
                (0..horizon)
                    .map(|t| series.get((off + t) % n).copied().unwrap_or(0))
                    .collect()
            })
            .collect();
        Self {
            counts,
            slot_length_ms,
        }
    }
}

fn poisson_series<R: Rng>(rate: f64, horizon: usize, a_max: u32, rng: &mut R) -> Vec<u32> {
    if rate <= 0.0 {
        return vec![0; horizon];
    }
    let dist = Poisson::new(rate).expect("positive finite rate");
    (0..horizon)
        .map(|_| {
            let x: f64 = dist.sample(rng);
            (x as u64).min(u64::from(a_max)) as u32
        })
        .collect()
}

/// I.i.d. Poisson counts per slot for every service, truncated at `a_max`.
pub fn generate_poisson(rates: &[f64], horizon: usize, a_max: u32, seed: u64) -> ArrivalTrace {
    let counts = rates
        .iter()
        .enumerate()
        .map(|(k, &rate)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64 + 1);
            poisson_series(rate, horizon, a_max, &mut rng)
        })
        .collect();
    ArrivalTrace {
        counts,
        slot_length_ms: DEFAULT_SLOT_MS,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceFormat {
    /// One non-negative integer per line: the arrival count of that slot.
    #[default]
    Counts,
    /// One arrival timestamp (milliseconds) per line, optionally under a
    /// `timestamp_ms` header; binned into slots.
    TimestampMs,
}

/// Parses a single-series trace file into per-slot counts.
pub fn load_trace(
    path: &Path,
    format: TraceFormat,
    slot_length_ms: f64,
) -> Result<Vec<u32>, TraceError> {
    let text = fs::read_to_string(path).map_err(|source| TraceError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_trace(&text, format, slot_length_ms).map_err(|e| match e {
        TraceError::Parse { line, msg, .. } => TraceError::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        },
        other => other,
    })
}

pub fn parse_trace(
    text: &str,
    format: TraceFormat,
    slot_length_ms: f64,
) -> Result<Vec<u32>, TraceError> {
    let parse_err = |line: usize, msg: String| TraceError::Parse {
        path: Default::default(),
        line,
        msg,
    };
    let lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    match format {
        TraceFormat::Counts => {
            let counts = lines
                .map(|(n, l)| {
                    l.parse::<u32>().map_err(|e| {
                        parse_err(n, format!("expected a non-negative count, got {l:?}: {e}"))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if counts.is_empty() {
                return Err(TraceError::Empty);
            }
            Ok(counts)
        }
        TraceFormat::TimestampMs => {
            if slot_length_ms <= 0.0 {
                return Err(parse_err(0, "slot length must be positive".into()));
            }
            let mut stamps = Vec::new();
            for (n, l) in lines {
                let field = l.split(',').next().unwrap_or(l).trim();
                if stamps.is_empty() && field == "timestamp_ms" {
                    continue;
                }
                let ts: f64 = field.parse().map_err(|e| {
                    parse_err(n, format!("expected a timestamp in ms, got {field:?}: {e}"))
                })?;
                if !ts.is_finite() || ts < 0.0 {
                    return Err(parse_err(n, format!("timestamp {ts} out of range")));
                }
                stamps.push(ts);
            }
            if stamps.is_empty() {
                return Err(TraceError::Empty);
            }
            let first = stamps.iter().copied().fold(f64::INFINITY, f64::min);
            let slot_of = |ts: f64| ((ts - first) / slot_length_ms).floor() as usize;
            let slots = stamps.iter().map(|&t| slot_of(t)).max().unwrap_or(0) + 1;
            let mut counts = vec![0u32; slots];
            for ts in stamps {
                counts[slot_of(ts)] += 1;
            }
            Ok(counts)
        }
    }
}

/// Window size per service, each drawn uniformly from `{0, ..., 2*d_avg}`.
pub fn assign_window_sizes(d_avg: u32, services: usize, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..services)
        .map(|_| rng.random_range(0..=2 * d_avg))
        .collect()
}
