use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::SimError;
use crate::citizen::CHAINCODE_NAME;
use crate::ledger::ValidationCode;

fn default_chaincode() -> String {
    CHAINCODE_NAME.to_owned()
}

fn default_mask() -> u8 {
    0xFF
}

/// Contract arguments; non-string JSON values are passed as their JSON
/// text, so records can be written inline.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Args(pub Vec<Value>);

impl Args {
    pub fn to_strings(&self) -> Vec<String> {
        self.0
            .iter()
            .map(|v| match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Propose {
    pub channel: String,
    #[serde(default = "default_chaincode")]
    pub chaincode: String,
    pub function: String,
    #[serde(default)]
    pub args: Args,
    /// Peers to collect endorsements from; by default one endorsing peer
    /// per policy org until the mutating (or read-only) policy is met.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endorsers: Option<Vec<String>>,
    /// Send the endorsed transaction to the orderer. Defaults to true for
    /// mutating functions and false for read-only ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submit: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// A write placed into a hand-built read/write set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForgedWrite {
    /// Raw state key, or an Aadhaar number for the citizen asset key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aadhaar: Option<String>,
    /// Stored canonically encoded; null deletes.
    pub value: Value,
}

/// A transaction whose read/write set was not produced by simulation:
/// the listed peers sign whatever the actor supplies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Forge {
    pub channel: String,
    #[serde(default = "default_chaincode")]
    pub chaincode: String,
    pub function: String,
    #[serde(default)]
    pub args: Args,
    pub writes: Vec<ForgedWrite>,
    pub endorsers: Vec<String>,
    /// Corrupt the first endorsement signature.
    #[serde(default)]
    pub corrupt_signature: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "expect", rename_all = "snake_case", deny_unknown_fields)]
pub enum Expectation {
    /// Every committing peer assigned `code` to the labelled transaction.
    TxCode { label: String, code: ValidationCode },
    /// Endorsement of the labelled proposal succeeded.
    ResponseOk { label: String },
    /// Endorsement was refused with the given error code.
    ResponseError { label: String, code: String },
    /// The response equals `value`.
    ResponseEquals { label: String, value: Value },
    /// The response is an object with exactly these field names.
    ResponseFields { label: String, fields: Vec<String> },
    /// The response is a list of `len` items.
    ResponseLen { label: String, len: usize },
    /// A citizen asset field as committed on `peer` (all joined peers if
    /// omitted). `value: null` asserts the field or record is absent.
    StateField {
        channel: String,
        aadhaar: String,
        field: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        peer: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        value: Option<Value>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        contains: Option<String>,
    },
    HistoryLen {
        channel: String,
        aadhaar: String,
        len: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        peer: Option<String>,
    },
    ChainHeight {
        channel: String,
        height: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        peer: Option<String>,
    },
    /// All peers on the channel share tip hash and state hash.
    Converged { channel: String },
    /// `first_bad: null` asserts the chain verifies.
    Verify {
        peer: String,
        channel: String,
        first_bad: Option<u64>,
    },
    /// Exactly `peers` are divergent on `channel`.
    Divergent { channel: String, peers: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Propose(Propose),
    Forge(Forge),
    /// Delay every later step by `ticks`.
    AdvanceTicks { ticks: u64 },
    /// Flip a byte of `peer`'s copy of block `block` (at `offset` of the
    /// block image), or with `forge` rewrite the block so it is internally
    /// consistent.
    Tamper {
        peer: String,
        channel: String,
        block: u64,
        #[serde(default)]
        offset: usize,
        #[serde(default = "default_mask")]
        mask: u8,
        #[serde(default)]
        forge: bool,
    },
    Join { peer: String, channel: String },
    /// Remove the actor's identity from the membership registry.
    RevokeClient,
    Expect(Expectation),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioStep {
    pub at_tick: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor: Option<String>,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub steps: Vec<ScenarioStep>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let s: Scenario =
            serde_json::from_str(text).map_err(|e| SimError::ScenarioParse(e.to_string()))?;
        s.check_order()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn check_order(&self) -> Result<(), SimError> {
        for (i, w) in self.steps.windows(2).enumerate() {
            if w[1].at_tick < w[0].at_tick {
                return Err(SimError::ScenarioParse(format!(
                    "step {} (tick {}) precedes step {} (tick {})",
                    i + 1,
                    w[1].at_tick,
                    i,
                    w[0].at_tick
                )));
            }
        }
        Ok(())
    }

    pub fn push(&mut self, at_tick: u64, actor: Option<&str>, action: Action) -> &mut Self {
        self.steps.push(ScenarioStep {
            at_tick,
            actor: actor.map(str::to_owned),
            action,
        });
        self
    }
}
