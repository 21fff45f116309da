//! Block and transaction model, hash-chained block store, versioned world
//! state and per-key history.

mod block;
mod state;
mod store;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use block::{
    endorsement_payload, Block, BlockHeader, Endorsement, EndorsedTransaction, Envelope,
    TransactionProposal, HEADER_IMAGE_LEN,
};
pub use state::{HistoryEntry, HistoryIndex, StateEntry, WorldState};
pub use store::{
    block_file_name, export_blocks, import_blocks, read_block_file, verify_chain, write_block_file,
    BlockStore, ChainCheck,
};

use crate::crypto::Digest;
use crate::encoding::{hex_bytes, DecodeError};

/// Commit coordinates of a write: (block number, index within block).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Version {
    pub block_num: u64,
    pub tx_num: u64,
}

impl Version {
    pub fn new(block_num: u64, tx_num: u64) -> Self {
        Version { block_num, tx_num }
    }
}

impl std::fmt::Display for Version {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.block_num, self.tx_num)
    }
}

/// A key read during simulation and the committed version it observed.
/// `version == None` is the absent-marker.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KVRead {
    pub key: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<Version>,
}

/// A buffered write; `value == None` is a delete.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KVWrite {
    pub key: String,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "hex_bytes::option"
    )]
    pub value: Option<Vec<u8>>,
}

impl KVWrite {
    pub fn is_delete(&self) -> bool {
        self.value.is_none()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadWriteSet {
    pub reads: Vec<KVRead>,
    pub writes: Vec<KVWrite>,
}

impl ReadWriteSet {
    pub fn is_read_only(&self) -> bool {
        self.writes.is_empty()
    }
}

/// Per-transaction outcome of block validation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ValidationCode {
    Valid,
    MvccConflict,
    EndorsementPolicyFailure,
    BadSignature,
    DuplicateTxid,
    ChaincodeNotInstalled,
}

impl ValidationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ValidationCode::Valid => "VALID",
            ValidationCode::MvccConflict => "MVCC_CONFLICT",
            ValidationCode::EndorsementPolicyFailure => "ENDORSEMENT_POLICY_FAILURE",
            ValidationCode::BadSignature => "BAD_SIGNATURE",
            ValidationCode::DuplicateTxid => "DUPLICATE_TXID",
            ValidationCode::ChaincodeNotInstalled => "CHAINCODE_NOT_INSTALLED",
        }
    }
}

impl std::fmt::Display for ValidationCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const KEY_SEPARATOR: char = '\u{0}';

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("illegal U+0000 in composite key component {0:?}")]
    IllegalCharacter(String),
    #[error("block {got} does not link to tip (expected number {expected_number}, prev_hash {expected_prev})")]
    ChainLinkageError {
        got: u64,
        expected_number: u64,
        expected_prev: Digest,
    },
    #[error("block {0} has no validity flags")]
    UnvalidatedBlock(u64),
    #[error("block {block}: envelope {index} does not decode: {source}")]
    MalformedEnvelope {
        block: u64,
        index: usize,
        source: DecodeError,
    },
    #[error("bad genesis block: {0}")]
    BadGenesis(String),
    #[error("block store I/O: {0}")]
    Io(String),
}

/// Build a composite key: `namespace \0 attr1 \0 ... attrN \0`.
pub fn create_composite_key(namespace: &str, attributes: &[&str]) -> Result<String, LedgerError> {
    let mut key = String::with_capacity(
        namespace.len() + attributes.iter().map(|a| a.len() + 1).sum::<usize>() + 1,
    );
    for part in std::iter::once(&namespace).chain(attributes.iter()) {
        if part.contains(KEY_SEPARATOR) {
            return Err(LedgerError::IllegalCharacter((*part).to_owned()));
        }
        key.push_str(part);
        key.push(KEY_SEPARATOR);
    }
    Ok(key)
}

/// Inverse of [`create_composite_key`].
pub fn split_composite_key(key: &str) -> Option<(&str, Vec<&str>)> {
    let body = key.strip_suffix(KEY_SEPARATOR)?;
    let mut parts = body.split(KEY_SEPARATOR);
    let ns = parts.next()?;
    Some((ns, parts.collect()))
}

/// Read access to committed state, shared by ledgers and test snapshots.
pub trait StateView {
    fn state_entry(&self, key: &str) -> Option<&StateEntry>;
    fn history(&self, key: &str) -> &[HistoryEntry];
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitReport {
    pub applied: usize,
    pub skipped: usize,
}

/// One peer's replica of one channel.
#[derive(Clone, Debug)]
pub struct Ledger {
    channel_id: String,
    store: BlockStore,
    state: WorldState,
    history: HistoryIndex,
    tx_ids: HashSet<String>,
}

impl Ledger {
    /// Start a replica from a genesis block.
    pub fn new(channel_id: impl Into<String>, genesis: Block) -> Result<Self, LedgerError> {
        if genesis.header.number != 0 || genesis.header.prev_hash != Digest::ZERO {
            return Err(LedgerError::BadGenesis("number/prev_hash".into()));
        }
        let flags = genesis
            .validity_flags
            .as_ref()
            .ok_or(LedgerError::UnvalidatedBlock(0))?;
        if flags.len() != genesis.envelopes.len()
            || flags.iter().any(|f| *f != ValidationCode::Valid)
        {
            return Err(LedgerError::BadGenesis("genesis must be all VALID".into()));
        }
        let mut store = BlockStore::default();
        store.append(genesis)?;
        Ok(Ledger {
            channel_id: channel_id.into(),
            store,
            state: WorldState::default(),
            history: HistoryIndex::default(),
            tx_ids: HashSet::new(),
        })
    }

    /// Rebuild a replica by committing `blocks` in order.
    pub fn replay(channel_id: &str, blocks: Vec<Block>) -> Result<Self, LedgerError> {
        let mut it = blocks.into_iter();
        let genesis = it
            .next()
            .ok_or_else(|| LedgerError::BadGenesis("empty block list".into()))?;
        let mut ledger = Ledger::new(channel_id, genesis)?;
        for b in it {
            ledger.commit_block(b)?;
        }
        Ok(ledger)
    }

    pub fn channel_id(&self) -> &str {
        &self.channel_id
    }

    pub fn blocks(&self) -> &BlockStore {
        &self.store
    }

    pub(crate) fn blocks_mut(&mut self) -> &mut BlockStore {
        &mut self.store
    }

    pub fn world_state(&self) -> &WorldState {
        &self.state
    }

    pub fn height(&self) -> u64 {
        self.store.height()
    }

    pub fn contains_tx_id(&self, tx_id: &str) -> bool {
        self.tx_ids.contains(tx_id)
    }

    pub fn ws_get(&self, key: &str) -> Option<&StateEntry> {
        self.state.get(key)
    }

    pub fn get_history_for_key(&self, key: &str) -> &[HistoryEntry] {
        self.history.get(key)
    }

    pub fn state_hash(&self) -> Digest {
        self.state.state_hash()
    }

    /// Append a validated block and apply the writes of its VALID
    /// transactions. Nothing is mutated if any check fails.
    pub fn commit_block(&mut self, block: Block) -> Result<CommitReport, LedgerError> {
        let number = block.header.number;
        let flags = match &block.validity_flags {
            Some(f) if f.len() == block.envelopes.len() => f.clone(),
            _ => return Err(LedgerError::UnvalidatedBlock(number)),
        };
        self.store.check_linkage(&block.header)?;

        let mut decoded = Vec::with_capacity(block.envelopes.len());
        for (index, flag) in flags.iter().enumerate() {
            match (block.decode_envelope(index), flag) {
                (Ok(env), _) => decoded.push(Some(env)),
                (Err(source), ValidationCode::Valid) => {
                    return Err(LedgerError::MalformedEnvelope {
                        block: number,
                        index,
                        source,
                    })
                }
                (Err(_), _) => decoded.push(None),
            }
        }

        let mut report = CommitReport::default();
        for (tx_num, (env, flag)) in decoded.iter().zip(&flags).enumerate() {
            let Some(Envelope::Transaction(tx)) = env else {
                continue;
            };
            // Unauthenticated envelopes must not reserve a tx_id.
            if *flag != ValidationCode::BadSignature {
                self.tx_ids.insert(tx.proposal.tx_id.clone());
            }
            if *flag != ValidationCode::Valid {
                report.skipped += 1;
                continue;
            }
            let version = Version::new(number, tx_num as u64);
            for w in &tx.rwset.writes {
                self.state.apply(w, version);
                self.history.record(w, version, &tx.proposal.tx_id);
            }
            report.applied += 1;
        }
        self.store.append(block)?;
        Ok(report)
    }
}

impl StateView for Ledger {
    fn state_entry(&self, key: &str) -> Option<&StateEntry> {
        self.state.get(key)
    }

    fn history(&self, key: &str) -> &[HistoryEntry] {
        self.history.get(key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CITIZEN_NS: &str = "org.citizen-network.citizennet.citizen";

    #[test]
    fn composite_key_format() {
        assert_eq!(
            create_composite_key(CITIZEN_NS, &["12345678911"]).unwrap(),
            "org.citizen-network.citizennet.citizen\u{0}12345678911\u{0}"
        );
        assert_eq!(create_composite_key("ns", &[]).unwrap(), "ns\u{0}");
        assert_ne!(
            create_composite_key("ns", &["ab", "c"]).unwrap(),
            create_composite_key("ns", &["a", "bc"]).unwrap()
        );
        assert!(matches!(
            create_composite_key("ns", &["a\u{0}b"]),
            Err(LedgerError::IllegalCharacter(_))
        ));
        assert!(create_composite_key("n\u{0}s", &[]).is_err());
    }

    #[test]
    fn composite_key_splits_back() {
        let k = create_composite_key("ns", &["a", "", "c"]).unwrap();
        assert_eq!(split_composite_key(&k), Some(("ns", vec!["a", "", "c"])));
        assert_eq!(split_composite_key("no-separator"), None);
    }

    #[test]
    fn versions_order_lexicographically() {
        assert!(Version::new(1, 9) < Version::new(2, 0));
        assert!(Version::new(2, 0) < Version::new(2, 1));
    }

    #[test]
    fn validation_code_serializes_verbatim() {
        let s = serde_json::to_string(&ValidationCode::MvccConflict).unwrap();
        assert_eq!(s, "\"MVCC_CONFLICT\"");
        assert_eq!(
            ValidationCode::EndorsementPolicyFailure.to_string(),
            "ENDORSEMENT_POLICY_FAILURE"
        );
    }
}
