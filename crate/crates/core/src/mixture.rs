//! Weighted dataset mixture with per-epoch shuffling inside each dataset.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{seeded, Rng};

/// Per-dataset sampling weights. Datasets without an explicit weight get 1.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureSpec {
    pub weights: BTreeMap<String, f64>,
    pub seed: u64,
}

impl MixtureSpec {
    pub fn weight(&self, dataset: &str) -> f64 {
        self.weights.get(dataset).copied().unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Draw {
    pub dataset: String,
    pub index: usize,
    pub epoch: u64,
}

struct Pool {
    name: String,
    order: Vec<usize>,
    cursor: usize,
    epoch: u64,
}

/// Infinite deterministic stream of `(dataset, entry index)` draws.
pub struct MixtureStream {
    pools: Vec<Pool>,
    cumulative: Vec<f64>,
    rng: Rng,
}

impl MixtureStream {
    /// `sizes` maps each dataset to its number of entries.
    pub fn new(spec: &MixtureSpec, sizes: &BTreeMap<String, usize>) -> Result<Self> {
        for (name, w) in &spec.weights {
            if !sizes.contains_key(name) {
                return Err(Error::UnknownDataset(name.clone()));
            }
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::InvalidConfig(alloc::format!("weight for `{name}` must be non-negative, got {w}")));
            }
        }
        let mut rng = seeded(spec.seed);
        let mut pools = Vec::new();
        let mut raw = Vec::new();
        for (name, &n) in sizes {
            let w = spec.weight(name);
            if w == 0.0 {
                continue;
            }
            if n == 0 {
                return Err(Error::Empty("a weighted dataset has no entries"));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            pools.push(Pool { name: name.clone(), order, cursor: 0, epoch: 0 });
            raw.push(w);
        }
        let total: f64 = raw.iter().sum();
        if pools.is_empty() || total <= 0.0 {
            return Err(Error::InvalidConfig("mixture needs at least one positive weight".into()));
        }
        let mut acc = 0.0;
        let cumulative = raw
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        Ok(Self { pools, cumulative, rng })
    }

    /// Normalized weights in dataset-name order.
    pub fn probabilities(&self) -> Vec<(String, f64)> {
        let mut prev = 0.0;
        self.pools
            .iter()
            .zip(&self.cumulative)
            .map(|(p, c)| {
                let out = (p.name.clone(), c - prev);
                prev = *c;
                out
            })
            .collect()
    }

    fn pick(&mut self) -> usize {
        let u: f64 = self.rng.random();
        self.cumulative.iter().position(|c| u < *c).unwrap_or(self.pools.len() - 1)
    }
}

impl Iterator for MixtureStream {
    type Item = Draw;

    fn next(&mut self) -> Option<Draw> {
        let i = self.pick();
        let pool = &mut self.pools[i];
        if pool.cursor == pool.order.len() {
            pool.order.shuffle(&mut self.rng);
            pool.cursor = 0;
            pool.epoch += 1;
        }
        let index = pool.order[pool.cursor];
        pool.cursor += 1;
        Some(Draw { dataset: pool.name.clone(), index, epoch: pool.epoch })
    }
}
