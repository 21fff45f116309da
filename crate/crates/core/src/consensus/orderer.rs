use std::collections::{BTreeMap, VecDeque};

use super::{ConsensusError, OrdererConfig};
use crate::crypto::Digest;
use crate::ledger::{Block, BlockHeader, EndorsedTransaction, Envelope};

#[derive(Clone, Debug)]
struct ChannelQueue {
    pending: VecDeque<(EndorsedTransaction, u64)>,
    next_number: u64,
    prev_hash: Digest,
}

/// Single trusted ordering node: FIFO per channel, cut by size or age.
#[derive(Clone, Debug)]
pub struct Orderer {
    config: OrdererConfig,
    now: u64,
    channels: BTreeMap<String, ChannelQueue>,
}

impl Orderer {
    pub fn new(config: OrdererConfig) -> Self {
        Orderer {
            config,
            now: 0,
            channels: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> OrdererConfig {
        self.config
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    /// Start sequencing `channel_id` after its genesis header.
    pub fn register_channel(&mut self, channel_id: &str, genesis: &BlockHeader) {
        self.channels
            .entry(channel_id.to_owned())
            .or_insert_with(|| ChannelQueue {
                pending: VecDeque::new(),
                next_number: genesis.number + 1,
                prev_hash: genesis.hash(),
            });
    }

    pub fn pending(&self, channel_id: &str) -> usize {
        self.channels.get(channel_id).map_or(0, |q| q.pending.len())
    }

    pub fn has_pending(&self) -> bool {
        self.channels.values().any(|q| !q.pending.is_empty())
    }

    /// Enqueue in arrival order; arrival order is block order.
    pub fn submit(&mut self, tx: EndorsedTransaction) -> Result<(), ConsensusError> {
        let well_formed = tx.proposal.client_signature.as_bytes().len() == 64
            && !tx.endorsements.is_empty()
            && tx.endorsements.iter().all(|e| e.signature.as_bytes().len() == 64);
        if !well_formed {
            return Err(ConsensusError::MalformedTransaction(tx.proposal.tx_id));
        }
        let now = self.now;
        let q = self
            .channels
            .get_mut(&tx.proposal.channel_id)
            .ok_or_else(|| ConsensusError::UnknownChannel(tx.proposal.channel_id.clone()))?;
        q.pending.push_back((tx, now));
        Ok(())
    }

    /// Advance the clock to `now` and cut every block that is due, in
    /// channel-id order. Flags are left unset.
    pub fn tick(&mut self, now: u64) -> Vec<(String, Block)> {
        self.now = self.now.max(now);
        let cfg = self.config;
        let mut out = Vec::new();
        for (channel_id, q) in &mut self.channels {
            while q.pending.len() >= cfg.max_block_txs {
                out.push((channel_id.clone(), q.cut(cfg.max_block_txs)));
            }
            let timed_out = q
                .pending
                .front()
                .is_some_and(|(_, at)| self.now - at >= cfg.batch_timeout_ticks);
            if timed_out {
                let n = q.pending.len();
                out.push((channel_id.clone(), q.cut(n)));
            }
        }
        out
    }
}

impl ChannelQueue {
    fn cut(&mut self, n: usize) -> Block {
        let envelopes = self
            .pending
            .drain(..n)
            .map(|(tx, _)| Envelope::Transaction(tx).encode())
            .collect();
        let block = Block::new(self.next_number, self.prev_hash, envelopes);
        self.next_number += 1;
        self.prev_hash = block.header.hash();
        block
    }
}
