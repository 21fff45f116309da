use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ConsensusError;

/// "At least `threshold` endorsements, each from a distinct org in `orgs`."
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndorsementPolicy {
    threshold: usize,
    orgs: BTreeSet<String>,
}

impl EndorsementPolicy {
    pub fn new<I, S>(threshold: usize, orgs: I) -> Result<Self, ConsensusError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let orgs: BTreeSet<String> = orgs.into_iter().map(Into::into).collect();
        if threshold == 0 || orgs.is_empty() || threshold > orgs.len() {
            return Err(ConsensusError::InvalidPolicy {
                threshold,
                orgs: orgs.len(),
            });
        }
        Ok(EndorsementPolicy { threshold, orgs })
    }

    /// "1 of {org}".
    pub fn single(org: &str) -> Self {
        EndorsementPolicy::new(1, [org]).expect("1-of-1 is well formed")
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn orgs(&self) -> &BTreeSet<String> {
        &self.orgs
    }

    /// `endorsing_orgs` may repeat; only distinct member orgs count.
    pub fn is_satisfied_by<'a, I>(&self, endorsing_orgs: I) -> bool
    where
        I: IntoIterator<Item = &'a str>,
    {
        let distinct: BTreeSet<&str> = endorsing_orgs
            .into_iter()
            .filter(|o| self.orgs.contains(*o))
            .collect();
        distinct.len() >= self.threshold
    }
}

impl std::fmt::Display for EndorsementPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let orgs: Vec<&str> = self.orgs.iter().map(String::as_str).collect();
        write!(f, "{} of {{{}}}", self.threshold, orgs.join(", "))
    }
}

/// Block cutting bounds: a block is cut as soon as either is reached.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrdererConfig {
    pub max_block_txs: usize,
    pub batch_timeout_ticks: u64,
}

impl OrdererConfig {
    pub fn new(max_block_txs: usize, batch_timeout_ticks: u64) -> Result<Self, ConsensusError> {
        if max_block_txs == 0 || batch_timeout_ticks == 0 {
            return Err(ConsensusError::InvalidOrdererConfig);
        }
        Ok(OrdererConfig {
            max_block_txs,
            batch_timeout_ticks,
        })
    }
}

impl Default for OrdererConfig {
    fn default() -> Self {
        OrdererConfig {
            max_block_txs: 10,
            batch_timeout_ticks: 2,
        }
    }
}
