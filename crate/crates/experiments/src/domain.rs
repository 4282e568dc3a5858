//! Synthetic instances: items on a ring, each bidder interested in an arc.

use imlca_core::{Bundle, TableValuation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ExperimentError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticDomainSpec {
    pub num_bidders: usize,
    pub num_items: usize,
    /// Length of each bidder's arc of interest.
    pub interest_size: usize,
    /// Range of per-item base values.
    pub base_range: (f64, f64),
    /// Range of the per-bidder synergy factor.
    pub synergy_range: (f64, f64),
}

impl Default for SyntheticDomainSpec {
    fn default() -> Self {
        Self {
            num_bidders: 6,
            num_items: 12,
            interest_size: 8,
            base_range: (5.0, 15.0),
            synergy_range: (0.2, 1.0),
        }
    }
}

impl SyntheticDomainSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ExperimentError::Domain(m));
        if self.num_bidders == 0 || self.num_items == 0 {
            return bad("need at least one bidder and one item".into());
        }
        if self.num_items > 20 {
            return bad(format!("{} items exceed the value table limit of 20", self.num_items));
        }
        if self.interest_size == 0 || self.interest_size > self.num_items {
            return bad(format!("interest size {} not in 1..={}", self.interest_size, self.num_items));
        }
        let (lo, hi) = self.base_range;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return bad(format!("base range {:?}", self.base_range));
        }
        let (lo, hi) = self.synergy_range;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return bad(format!("synergy range {:?}", self.synergy_range));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidderProfile {
    pub interest: Vec<usize>,
    /// Base value per interest item, aligned with `interest`.
    pub base: Vec<f64>,
    pub synergy: f64,
}

impl BidderProfile {
    pub fn value(&self, bundle: &Bundle) -> f64 {
        let mut sum = 0.0;
        let mut k = 0usize;
        for (j, b) in self.interest.iter().zip(&self.base) {
            if bundle.contains(*j) {
                sum += b;
                k += 1;
            }
        }
        if k == 0 {
            return 0.0;
        }
        let span = (self.interest.len().max(2) - 1) as f64;
        sum * (1.0 + self.synergy * (k - 1) as f64 / span)
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub seed: u64,
    pub num_items: usize,
    pub bidders: Vec<BidderProfile>,
    pub values: Vec<TableValuation>,
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

pub fn generate_instance(spec: &SyntheticDomainSpec, seed: u64) -> Result<Instance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = spec.num_items;
    let bidders: Vec<BidderProfile> = (0..spec.num_bidders)
        .map(|_| {
            let start = rng.random_range(0..m);
            let interest = (0..spec.interest_size).map(|d| (start + d) % m).collect();
            let base = (0..spec.interest_size).map(|_| draw(&mut rng, spec.base_range)).collect();
            let synergy = draw(&mut rng, spec.synergy_range);
            BidderProfile { interest, base, synergy }
        })
        .collect();
    let values = bidders
        .iter()
        .map(|b| TableValuation::from_fn(m, |x| b.value(x)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(Instance {
        seed,
        num_items: m,
        bidders,
        values,
    })
}
