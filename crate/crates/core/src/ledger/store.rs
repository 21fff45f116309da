use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Block, BlockHeader, Envelope, LedgerError, ValidationCode};
use crate::crypto::Digest;
use crate::encoding::hex_bytes;

/// Append-only sequence of blocks starting at genesis.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BlockStore {
    blocks: Vec<Block>,
}

impl BlockStore {
    pub fn height(&self) -> u64 {
        self.blocks.len() as u64
    }

    pub fn tip(&self) -> Option<&Block> {
        self.blocks.last()
    }

    pub fn get(&self, number: u64) -> Option<&Block> {
        self.blocks.get(usize::try_from(number).ok()?)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Block> {
        self.blocks.iter()
    }

    pub fn as_slice(&self) -> &[Block] {
        &self.blocks
    }

    pub fn verify_chain(&self) -> ChainCheck {
        verify_chain(&self.blocks)
    }

    pub(crate) fn check_linkage(&self, header: &BlockHeader) -> Result<(), LedgerError> {
        let (expected_number, expected_prev) = match self.blocks.last() {
            Some(tip) => (tip.header.number + 1, tip.header.hash()),
            None => (0, Digest::ZERO),
        };
        if header.number != expected_number || header.prev_hash != expected_prev {
            return Err(LedgerError::ChainLinkageError {
                got: header.number,
                expected_number,
                expected_prev,
            });
        }
        Ok(())
    }

    pub(crate) fn append(&mut self, block: Block) -> Result<(), LedgerError> {
        self.check_linkage(&block.header)?;
        self.blocks.push(block);
        Ok(())
    }

    /// Direct mutable access for tamper injection.
    pub(crate) fn block_mut(&mut self, number: u64) -> Option<&mut Block> {
        self.blocks.get_mut(usize::try_from(number).ok()?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainCheck {
    Ok,
    FirstBadHeight(u64),
}

impl ChainCheck {
    pub fn is_ok(&self) -> bool {
        matches!(self, ChainCheck::Ok)
    }
}

/// Recompute every data hash and prev-hash link from genesis and report the
/// lowest position whose stored hashes disagree.
pub fn verify_chain(blocks: &[Block]) -> ChainCheck {
    for (i, b) in blocks.iter().enumerate() {
        let h = &b.header;
        let expected_prev = match i {
            0 => Digest::ZERO,
            _ => blocks[i - 1].header.hash(),
        };
        if h.number != i as u64
            || h.prev_hash != expected_prev
            || h.data_hash != Block::compute_data_hash(&b.envelopes)
        {
            return ChainCheck::FirstBadHeight(i as u64);
        }
    }
    ChainCheck::Ok
}

#[derive(Serialize, Deserialize)]
struct BlockFile {
    header: BlockHeader,
    #[serde(with = "hex_bytes::list")]
    envelopes: Vec<Vec<u8>>,
    validity_flags: Option<Vec<ValidationCode>>,
    /// Human-readable digest of the envelopes; ignored on import.
    #[serde(default, skip_deserializing)]
    summary: Vec<Value>,
}

fn summarize(block: &Block) -> Vec<Value> {
    block
        .envelopes
        .iter()
        .map(|raw| match Envelope::decode(raw) {
            Ok(Envelope::Config(cfg)) => json!({"type": "config", "channel_id": cfg.channel_id}),
            Ok(Envelope::Transaction(tx)) => json!({
                "type": "transaction",
                "tx_id": tx.proposal.tx_id,
                "chaincode": tx.proposal.chaincode_name,
                "function": tx.proposal.function,
                "creator": tx.proposal.creator,
                "endorsers": tx.endorsements.iter().map(|e| e.org_id.clone()).collect::<Vec<_>>(),
            }),
            Err(e) => json!({"type": "undecodable", "error": e.to_string()}),
        })
        .collect()
}

pub fn block_file_name(number: u64) -> String {
    format!("block_{number:06}.json")
}

/// Write one JSON document per block into `dir`.
pub fn export_blocks(blocks: &[Block], dir: &Path) -> Result<(), LedgerError> {
    let io = |e: std::io::Error| LedgerError::Io(e.to_string());
    fs::create_dir_all(dir).map_err(io)?;
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.extension().is_some_and(|e| e == "json") {
            fs::remove_file(path).map_err(io)?;
        }
    }
    for (i, b) in blocks.iter().enumerate() {
        write_block_file(b, &dir.join(block_file_name(i as u64)))?;
    }
    Ok(())
}

pub fn read_block_file(path: &Path) -> Result<Block, LedgerError> {
    let text = fs::read_to_string(path).map_err(|e| LedgerError::Io(format!("{}: {e}", path.display())))?;
    let f: BlockFile = serde_json::from_str(&text)
        .map_err(|e| LedgerError::Io(format!("{}: {e}", path.display())))?;
    Ok(Block {
        header: f.header,
        envelopes: f.envelopes,
        validity_flags: f.validity_flags,
    })
}

pub fn write_block_file(block: &Block, path: &Path) -> Result<(), LedgerError> {
    let file = BlockFile {
        header: block.header.clone(),
        envelopes: block.envelopes.clone(),
        validity_flags: block.validity_flags.clone(),
        summary: summarize(block),
    };
    let mut text = serde_json::to_string_pretty(&file).map_err(|e| LedgerError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| LedgerError::Io(format!("{}: {e}", path.display())))
}

/// Read every `block_NNNNNN.json` in `dir`, ordered by file name. No chain
/// checks are applied; use [`verify_chain`] or replay for that.
pub fn import_blocks(dir: &Path) -> Result<Vec<Block>, LedgerError> {
    let io = |e: std::io::Error| LedgerError::Io(format!("{}: {e}", dir.display()));
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("block_") && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    paths.iter().map(|p| read_block_file(p)).collect()
}
