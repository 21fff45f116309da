use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::crypto::Digest;
use crate::ledger::Block;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeerStatus {
    Consistent,
    /// Shorter chain, every block it holds agrees with the majority.
    Behind,
    Divergent,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeerDivergence {
    pub height: u64,
    pub tip_hash: Option<Digest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_hash: Option<Digest>,
    pub status: PeerStatus,
    /// Lowest block number whose contents differ from the majority.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_divergent_height: Option<u64>,
    /// Same blocks as the majority but a different state hash.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub state_mismatch: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairDivergence {
    pub a: String,
    pub b: String,
    pub height: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub channel: String,
    pub peers: BTreeMap<String, PeerDivergence>,
    /// Lowest height at which each differing pair disagrees.
    pub pairs: Vec<PairDivergence>,
}

impl DivergenceReport {
    pub fn divergent_peers(&self) -> Vec<&str> {
        self.peers
            .iter()
            .filter(|(_, p)| p.status == PeerStatus::Divergent)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn behind_peers(&self) -> Vec<&str> {
        self.peers
            .iter()
            .filter(|(_, p)| p.status == PeerStatus::Behind)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn is_clean(&self) -> bool {
        self.peers.values().all(|p| p.status == PeerStatus::Consistent)
    }

    pub fn summary(&self) -> String {
        if self.is_clean() {
            return format!("{}: no divergence", self.channel);
        }
        let mut parts = Vec::new();
        for (id, p) in &self.peers {
            match p.status {
                PeerStatus::Consistent => {}
                PeerStatus::Behind => parts.push(format!("{id} behind at height {}", p.height)),
                PeerStatus::Divergent => match p.first_divergent_height {
                    Some(h) => parts.push(format!("{id} divergent at height {h}")),
                    None => parts.push(format!("{id} divergent (state hash)")),
                },
            }
        }
        format!("{}: {}", self.channel, parts.join("; "))
    }
}

/// One peer's replica as seen by the differ.
pub struct ChainView<'a> {
    pub blocks: &'a [Block],
    pub state_hash: Option<Digest>,
}

/// The value held by a strict plurality, if there is one.
fn majority<T: Ord + Copy>(values: impl Iterator<Item = T>) -> Option<T> {
    let mut counts: BTreeMap<T, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    let best = *counts.values().max()?;
    let mut winners = counts.iter().filter(|(_, c)| **c == best);
    let first = winners.next().map(|(v, _)| *v);
    match winners.next() {
        Some(_) => None,
        None => first,
    }
}

/// Compare replicas block by block. At each height the fingerprint held by
/// a strict plurality of the peers that have the block is the reference;
/// without one, every peer at that height counts as divergent there.
pub fn diff_chains(channel: &str, views: &BTreeMap<String, ChainView<'_>>) -> DivergenceReport {
    let fps: BTreeMap<&str, Vec<Digest>> = views
        .iter()
        .map(|(id, v)| (id.as_str(), v.blocks.iter().map(Block::fingerprint).collect()))
        .collect();
    let max_height = fps.values().map(Vec::len).max().unwrap_or(0);

    let mut first_bad: BTreeMap<&str, u64> = BTreeMap::new();
    for h in 0..max_height {
        let at_h = fps.iter().filter_map(|(id, f)| f.get(h).map(|d| (*id, *d)));
        let reference = majority(at_h.clone().map(|(_, d)| d));
        for (id, d) in at_h {
            if Some(d) != reference {
                first_bad.entry(id).or_insert(h as u64);
            }
        }
    }

    let full_height = views
        .iter()
        .filter(|(id, _)| !first_bad.contains_key(id.as_str()))
        .map(|(_, v)| v.blocks.len())
        .max()
        .unwrap_or(max_height);
    let state_reference = majority(
        views
            .iter()
            .filter(|(id, v)| !first_bad.contains_key(id.as_str()) && v.blocks.len() == full_height)
            .filter_map(|(_, v)| v.state_hash),
    );

    let mut peers = BTreeMap::new();
    for (id, v) in views {
        let height = v.blocks.len() as u64;
        let first = first_bad.get(id.as_str()).copied();
        let state_mismatch = first.is_none()
            && v.blocks.len() == full_height
            && v.state_hash.is_some()
            && v.state_hash != state_reference;
        let status = if first.is_some() || state_mismatch {
            PeerStatus::Divergent
        } else if v.blocks.len() < full_height {
            PeerStatus::Behind
        } else {
            PeerStatus::Consistent
        };
        peers.insert(
            id.clone(),
            PeerDivergence {
                height,
                tip_hash: v.blocks.last().map(|b| b.header.hash()),
                state_hash: v.state_hash,
                status,
                first_divergent_height: first,
                state_mismatch,
            },
        );
    }

    let ids: Vec<&str> = fps.keys().copied().collect();
    let mut pairs = Vec::new();
    for (i, a) in ids.iter().enumerate() {
        for b in &ids[i + 1..] {
            let (fa, fb) = (&fps[a], &fps[b]);
            if let Some(h) = fa.iter().zip(fb).position(|(x, y)| x != y) {
                pairs.push(PairDivergence {
                    a: (*a).to_owned(),
                    b: (*b).to_owned(),
                    height: h as u64,
                });
            }
        }
    }

    DivergenceReport {
        channel: channel.to_owned(),
        peers,
        pairs,
    }
}
