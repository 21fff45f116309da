//! A permissioned, multi-channel ledger simulator hosting a citizen
//! identity chaincode.
//!
//! Transactions follow execute-order-validate: peers simulate and endorse a
//! proposal, an orderer batches endorsed transactions into hash-chained
//! blocks, and every peer validates and commits each block independently.

pub mod citizen;
pub mod consensus;
pub mod crypto;
pub mod encoding;
pub mod ledger;
pub mod membership;
pub mod runtime;
pub mod sim;
