use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::diff::DivergenceReport;
use super::scenario::Expectation;
use super::tamper::Mutation;
use super::SimError;
use crate::crypto::Digest;
use crate::ledger::ValidationCode;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxError {
    pub code: String,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxKind {
    Propose,
    Forge,
}

/// One client request and everything that happened to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TxRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    pub tick: u64,
    pub kind: TxKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub actor: String,
    pub channel: String,
    pub chaincode: String,
    pub function: String,
    pub tx_id: String,
    pub endorsers: Vec<String>,
    /// Orgs of the endorsements carried by the transaction.
    pub endorsing_orgs: Vec<String>,
    pub mutating: bool,
    pub submitted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<TxError>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<u64>,
    /// Validation code assigned by each committing peer.
    pub codes: BTreeMap<String, ValidationCode>,
}

impl TxRecord {
    /// The code every committing peer agrees on, if they agree.
    pub fn agreed_code(&self) -> Option<ValidationCode> {
        let mut it = self.codes.values();
        let first = *it.next()?;
        it.all(|c| *c == first).then_some(first)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssertionResult {
    pub step: usize,
    pub tick: u64,
    pub expectation: Expectation,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncFailure {
    pub tick: u64,
    pub peer: String,
    pub channel: String,
    pub block: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TamperRecord {
    pub tick: u64,
    pub peer: String,
    pub channel: String,
    pub block: u64,
    pub mutation: Mutation,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSummary {
    pub heights: BTreeMap<String, u64>,
    pub tip_hashes: BTreeMap<String, Digest>,
    pub state_hashes: BTreeMap<String, Digest>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub seed: u64,
    pub final_tick: u64,
    pub channels: BTreeMap<String, ChannelSummary>,
    pub transactions: Vec<TxRecord>,
    pub assertions: Vec<AssertionResult>,
    pub sync_failures: Vec<SyncFailure>,
    pub tampering: Vec<TamperRecord>,
    pub dishonest_peers: BTreeSet<String>,
    pub divergence: BTreeMap<String, DivergenceReport>,
}

impl SimReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::Io(e.to_string()))
    }

    pub fn failed_assertions(&self) -> impl Iterator<Item = &AssertionResult> {
        self.assertions.iter().filter(|a| !a.passed)
    }

    /// `Err(AssertionFailed)` for the first failed expectation.
    pub fn check(&self) -> Result<(), SimError> {
        match self.failed_assertions().next() {
            None => Ok(()),
            Some(a) => Err(SimError::AssertionFailed {
                step: a.step,
                detail: a.detail.clone(),
            }),
        }
    }

    pub fn tx(&self, label: &str) -> Option<&TxRecord> {
        self.transactions
            .iter()
            .rev()
            .find(|t| t.label.as_deref() == Some(label))
    }
}
