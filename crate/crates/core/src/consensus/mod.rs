//! The three consensus stages as separate, individually testable steps:
//! endorsement (simulate and sign), ordering (sequence and cut blocks) and
//! validation (signatures, policy, MVCC).

mod endorse;
mod orderer;
mod policy;
mod validate;

use thiserror::Error;

pub use endorse::{collect_endorsements, simulate_and_endorse, EndorsementEnv};
pub use orderer::Orderer;
pub use policy::{EndorsementPolicy, OrdererConfig};
pub use validate::{mvcc_validate, validate_block, BlockOverlay, VersionSource};

pub use crate::ledger::ValidationCode;
use crate::runtime::ContractError;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConsensusError {
    #[error("invalid endorsement policy: need 1 <= k ({threshold}) <= |orgs| ({orgs})")]
    InvalidPolicy { threshold: usize, orgs: usize },
    #[error("orderer bounds must be positive")]
    InvalidOrdererConfig,
    #[error("peer {peer} has not installed chaincode {chaincode}")]
    NotAnEndorser { peer: String, chaincode: String },
    #[error("peer {peer} has not joined channel {channel}")]
    NotInChannel { peer: String, channel: String },
    #[error("creator {creator} belongs to no member org of channel {channel}")]
    CreatorNotMember { creator: String, channel: String },
    #[error("client signature on proposal {0} does not verify")]
    BadClientSignature(String),
    #[error("contract rejected proposal: {0}")]
    Contract(#[from] ContractError),
    #[error("endorsement mismatch: {0}")]
    EndorsementMismatch(String),
    #[error("unknown channel {0}")]
    UnknownChannel(String),
    #[error("malformed transaction {0}")]
    MalformedTransaction(String),
}
