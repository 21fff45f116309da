use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::SimError;
use crate::citizen::{self, to_display, CitizenAsset};
use crate::encoding::{canonical_decode, from_canonical};
use crate::ledger::{split_composite_key, Block, Envelope, Ledger};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    State,
    History,
    Block,
}

impl std::str::FromStr for QueryKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "state" => Ok(QueryKind::State),
            "history" => Ok(QueryKind::History),
            "block" => Ok(QueryKind::Block),
            other => Err(SimError::Usage(format!("unknown query kind {other:?}"))),
        }
    }
}

/// An all-digit key names a citizen asset; anything else is a raw key.
pub fn resolve_key(input: &str) -> String {
    if !input.is_empty() && input.bytes().all(|b| b.is_ascii_digit()) {
        citizen::asset_key(input).expect("digits contain no separator")
    } else {
        input.to_owned()
    }
}

/// Human-readable form of a state key: `namespace/attr/...`.
pub fn display_key(key: &str) -> String {
    match split_composite_key(key) {
        Some((ns, attrs)) => std::iter::once(ns).chain(attrs).collect::<Vec<_>>().join("/"),
        None => key.to_owned(),
    }
}

/// Citizen records use the display field names; other values are shown as
/// decoded JSON, or hex if they are not canonical.
pub fn render_value(bytes: &[u8]) -> Value {
    if let Ok(asset) = from_canonical::<CitizenAsset>(bytes) {
        return Value::Object(to_display(&asset.to_fields()));
    }
    match canonical_decode(bytes) {
        Ok(v) => v,
        Err(_) => json!({ "hex": hex::encode(bytes) }),
    }
}

pub fn render_state(ledger: &Ledger, key: &str) -> Result<Value, SimError> {
    let entry = ledger
        .ws_get(key)
        .ok_or_else(|| SimError::NotFound(display_key(key)))?;
    Ok(json!({
        "key": display_key(key),
        "version": entry.version.to_string(),
        "value": render_value(&entry.value),
    }))
}

pub fn render_history(ledger: &Ledger, key: &str) -> Result<Value, SimError> {
    let history = ledger.get_history_for_key(key);
    if history.is_empty() {
        return Err(SimError::NotFound(display_key(key)));
    }
    let versions: Vec<Value> = history
        .iter()
        .map(|h| {
            json!({
                "version": h.version.to_string(),
                "tx_id": h.tx_id,
                "value": h.value.as_deref().map_or(Value::Null, render_value),
                "deleted": h.value.is_none(),
            })
        })
        .collect();
    Ok(json!({ "key": display_key(key), "versions": versions }))
}

pub fn render_block(block: &Block) -> Value {
    let envelopes: Vec<Value> = block
        .envelopes
        .iter()
        .enumerate()
        .map(|(i, raw)| {
            let flag = block
                .validity_flags
                .as_ref()
                .and_then(|f| f.get(i))
                .map(|c| c.as_str());
            match Envelope::decode(raw) {
                Ok(Envelope::Config(cfg)) => json!({
                    "type": "config",
                    "channel_id": cfg.channel_id,
                    "member_orgs": cfg.member_orgs,
                    "policies": cfg.policies.iter().map(|(k, p)| (k.clone(), Value::String(p.to_string()))).collect::<serde_json::Map<_, _>>(),
                    "validation": flag,
                }),
                Ok(Envelope::Transaction(tx)) => json!({
                    "type": "transaction",
                    "tx_id": tx.proposal.tx_id,
                    "creator": tx.proposal.creator,
                    "chaincode": tx.proposal.chaincode_name,
                    "function": tx.proposal.function,
                    "args": tx.proposal.args,
                    "timestamp": tx.proposal.timestamp,
                    "endorsements": tx.endorsements.iter().map(|e| json!({"endorser": e.endorser_id, "org": e.org_id})).collect::<Vec<_>>(),
                    "reads": tx.rwset.reads.iter().map(|r| json!({"key": display_key(&r.key), "version": r.version.map(|v| v.to_string())})).collect::<Vec<_>>(),
                    "writes": tx.rwset.writes.iter().map(|w| json!({"key": display_key(&w.key), "value": w.value.as_deref().map_or(Value::Null, render_value)})).collect::<Vec<_>>(),
                    "validation": flag,
                }),
                Err(e) => json!({ "type": "undecodable", "error": e.to_string(), "validation": flag }),
            }
        })
        .collect();
    json!({
        "number": block.header.number,
        "hash": block.header.hash(),
        "prev_hash": block.header.prev_hash,
        "data_hash": block.header.data_hash,
        "envelopes": envelopes,
    })
}
