use serde::{Deserialize, Serialize};

use crate::ledger::{Block, HEADER_IMAGE_LEN};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mutation {
    /// XOR one byte of the block image with `mask`.
    FlipByte { offset: usize, mask: u8 },
    /// Alter a payload byte and recompute the data hash, so the block is
    /// self-consistent and only the next block's link exposes it.
    Forge { offset: usize },
}

impl Mutation {
    pub fn flip(offset: usize) -> Self {
        Mutation::FlipByte { offset, mask: 0xFF }
    }
}

/// Apply `m` to `block` in place. Returns false if the offset is outside
/// the image (or, for forgeries, outside the payload).
pub fn apply_mutation(block: &mut Block, m: Mutation) -> bool {
    match m {
        Mutation::FlipByte { offset, mask } => mask != 0 && block.xor_image_byte(offset, mask),
        Mutation::Forge { offset } => {
            let payload = block.image_len() - HEADER_IMAGE_LEN;
            if payload == 0 {
                return false;
            }
            block.xor_image_byte(HEADER_IMAGE_LEN + offset % payload, 0xFF);
            block.header.data_hash = Block::compute_data_hash(&block.envelopes);
            true
        }
    }
}
