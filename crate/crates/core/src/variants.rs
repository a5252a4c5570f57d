//! Alternative chaining rules: sampled POSCARS variants and baselines.
//! Admission and allocation stay those of POSCARS.

use std::fmt;

use rand::seq::{index, IndexedRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConstraintError;
use crate::model::{ServerId, SystemModel};
use crate::poscars::{argmin_price, successor_candidates, Candidate, ControlParams};
use crate::queues::{Route, Snapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ChainingStrategy {
    Poscars,
    /// Argmin over `d` uniformly sampled successors.
    PPod {
        d: usize,
    },
    /// Batches to the lowest-price distinct instances among `d·z` probes.
    PBs {
        d: usize,
        batch: u64,
    },
    /// Batches one by one to the currently cheapest probe, updating its queue.
    PBf {
        d: usize,
        batch: u64,
    },
    Random,
    Jsq,
    OneHop,
}

impl fmt::Display for ChainingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Poscars => write!(f, "poscars"),
            Self::PPod { d } => write!(f, "p-pod(d={d})"),
            Self::PBs { d, batch } => write!(f, "p-bs(d={d},b={batch})"),
            Self::PBf { d, batch } => write!(f, "p-bf(d={d},b={batch})"),
            Self::Random => write!(f, "random"),
            Self::Jsq => write!(f, "jsq"),
            Self::OneHop => write!(f, "onehop"),
        }
    }
}

impl ChainingStrategy {
    pub fn validate(&self) -> Result<(), String> {
        match *self {
            Self::PPod { d: 0 } => Err("probe ratio must be >= 1".into()),
            Self::PBs { d, batch } | Self::PBf { d, batch } if d == 0 || batch == 0 => {
                Err("probe ratio and batch must be >= 1".into())
            }
            _ => Ok(()),
        }
    }
}

/// Uniform sample of `min(k, n)` candidates without replacement, in
/// sampling order.
fn probe<'a, R: Rng>(cands: &'a [Candidate], k: usize, rng: &mut R) -> Vec<&'a Candidate> {
    let k = k.min(cands.len());
    index::sample(rng, cands.len(), k)
        .into_iter()
        .map(|i| &cands[i])
        .collect()
}

pub fn p_pod_choose<R: Rng>(cands: &[Candidate], d: usize, rng: &mut R) -> Option<ServerId> {
    argmin_price(probe(cands, d, rng)).map(|c| c.server)
}

fn batch_sizes(carry: u64, batch: u64) -> Vec<u64> {
    let z = carry.div_ceil(batch);
    (0..z).map(|b| batch.min(carry - b * batch)).collect()
}

pub fn p_bs_assign<R: Rng>(
    cands: &[Candidate],
    carry: u64,
    batch: u64,
    d: usize,
    rng: &mut R,
) -> Vec<(ServerId, u64)> {
    let sizes = batch_sizes(carry, batch);
    if sizes.is_empty() || cands.is_empty() {
        return Vec::new();
    }
    let mut probed = probe(cands, d.saturating_mul(sizes.len()), rng);
    probed.sort_by(|a, b| a.price.total_cmp(&b.price).then(a.server.cmp(&b.server)));
    // Fewer probes than batches: wrap around the probes in price order.
    sizes
        .iter()
        .enumerate()
        .map(|(b, &n)| (probed[b % probed.len()].server, n))
        .collect()
}

pub fn p_bf_assign<R: Rng>(
    cands: &[Candidate],
    carry: u64,
    batch: u64,
    d: usize,
    params: &ControlParams,
    rng: &mut R,
) -> Vec<(ServerId, u64)> {
    let sizes = batch_sizes(carry, batch);
    if sizes.is_empty() || cands.is_empty() {
        return Vec::new();
    }
    let mut probed: Vec<Candidate> = probe(cands, d.saturating_mul(sizes.len()), rng)
        .into_iter()
        .copied()
        .collect();
    sizes
        .iter()
        .map(|&n| {
            let best = argmin_price(&probed).expect("non-empty probe set").server;
            let c = probed
                .iter_mut()
                .find(|c| c.server == best)
                .expect("probed");
            c.queue += n;
            c.price = params.v * c.w + params.alpha * c.queue as f64;
            (best, n)
        })
        .collect()
}

/// Random, JSQ and OneHop successor choice.
pub fn baseline_choose<R: Rng>(
    strategy: ChainingStrategy,
    cands: &[Candidate],
    rng: &mut R,
) -> Option<ServerId> {
    match strategy {
        ChainingStrategy::Random => cands.choose(rng).map(|c| c.server),
        ChainingStrategy::Jsq => {
            let min_q = cands.iter().map(|c| c.queue).min()?;
            let tied: Vec<&Candidate> = cands.iter().filter(|c| c.queue == min_q).collect();
            tied.choose(rng).map(|c| c.server)
        }
        ChainingStrategy::OneHop => {
            let by_w = |pool: &mut dyn Iterator<Item = &Candidate>| {
                pool.fold(None, |best: Option<&Candidate>, c| match best {
                    Some(b) if (b.w, b.server) <= (c.w, c.server) => Some(b),
                    _ => Some(c),
                })
                .map(|c| c.server)
            };
            by_w(&mut cands.iter().filter(|c| c.queue < u64::from(c.phi_max)))
                .or_else(|| by_w(&mut cands.iter()))
        }
        _ => None,
    }
}

/// Chaining decisions of every instance under `strategy`.
pub fn decide_chaining_with<R: Rng>(
    strategy: ChainingStrategy,
    model: &SystemModel,
    snap: &Snapshot,
    params: &ControlParams,
    rng: &mut R,
) -> Result<Vec<Option<Route>>, ConstraintError> {
    (0..model.instances().len())
        .map(|i| {
            if model.next_vnf(model.instances()[i].vnf).is_none() {
                return Ok(None);
            }
            let cands = successor_candidates(model, snap, i, params);
            if cands.is_empty() {
                return Err(ConstraintError::NoReachableSuccessor { instance: i });
            }
            let carry = snap.carry[i];
            let route = match strategy {
                ChainingStrategy::Poscars => {
                    Route::Single(argmin_price(&cands).expect("non-empty").server)
                }
                ChainingStrategy::PPod { d } => {
                    Route::Single(p_pod_choose(&cands, d, rng).expect("non-empty"))
                }
                ChainingStrategy::PBs { d, batch } => {
                    Route::Batches(p_bs_assign(&cands, carry, batch, d, rng))
                }
                ChainingStrategy::PBf { d, batch } => {
                    Route::Batches(p_bf_assign(&cands, carry, batch, d, params, rng))
                }
                _ => Route::Single(baseline_choose(strategy, &cands, rng).expect("non-empty")),
            };
            Ok(Some(route))
        })
        .collect()
}
