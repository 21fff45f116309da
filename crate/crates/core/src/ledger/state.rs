use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{KVWrite, Version};
use crate::crypto::{hash, Digest};
use crate::encoding::{frame_encoded_list, hex_bytes, to_canonical};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateEntry {
    pub key: String,
    #[serde(with = "hex_bytes")]
    pub value: Vec<u8>,
    pub version: Version,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub key: String,
    /// `None` marks a delete.
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "hex_bytes::option"
    )]
    pub value: Option<Vec<u8>>,
    pub version: Version,
    pub tx_id: String,
}

/// Current value and version of every live key.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WorldState {
    entries: BTreeMap<String, StateEntry>,
}

impl WorldState {
    pub fn get(&self, key: &str) -> Option<&StateEntry> {
        self.entries.get(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &StateEntry> {
        self.entries.values()
    }

    pub(crate) fn apply(&mut self, write: &KVWrite, version: Version) {
        match &write.value {
            Some(v) => {
                self.entries.insert(
                    write.key.clone(),
                    StateEntry {
                        key: write.key.clone(),
                        value: v.clone(),
                        version,
                    },
                );
            }
            None => {
                self.entries.remove(&write.key);
            }
        }
    }

    /// Digest over every (key, value, version) in key order.
    pub fn state_hash(&self) -> Digest {
        let items: Vec<Vec<u8>> = self
            .entries
            .values()
            .map(|e| to_canonical(e).expect("state entries are encodable"))
            .collect();
        hash(&frame_encoded_list(&items))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HistoryIndex {
    by_key: BTreeMap<String, Vec<HistoryEntry>>,
}

impl HistoryIndex {
    pub fn get(&self, key: &str) -> &[HistoryEntry] {
        self.by_key.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn keys(&self) -> impl Iterator<Item = &String> {
        self.by_key.keys()
    }

    pub(crate) fn record(&mut self, write: &KVWrite, version: Version, tx_id: &str) {
        let list = self.by_key.entry(write.key.clone()).or_default();
        debug_assert!(list.last().is_none_or(|l| l.version < version));
        list.push(HistoryEntry {
            key: write.key.clone(),
            value: write.value.clone(),
            version,
            tx_id: tx_id.to_owned(),
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn put(k: &str, v: &[u8]) -> KVWrite {
        KVWrite {
            key: k.into(),
            value: Some(v.to_vec()),
        }
    }

    #[test]
    fn apply_and_delete() {
        let mut ws = WorldState::default();
        assert!(ws.get("k").is_none());
        ws.apply(&put("k", b"v"), Version::new(5, 0));
        let e = ws.get("k").unwrap();
        assert_eq!((e.value.as_slice(), e.version), (&b"v"[..], Version::new(5, 0)));
        ws.apply(
            &KVWrite {
                key: "k".into(),
                value: None,
            },
            Version::new(6, 0),
        );
        assert!(ws.get("k").is_none());
    }

    #[test]
    fn state_hash_tracks_versions() {
        let mut a = WorldState::default();
        let mut b = WorldState::default();
        assert_eq!(a.state_hash(), b.state_hash());
        a.apply(&put("k", b"v"), Version::new(1, 0));
        b.apply(&put("k", b"v"), Version::new(1, 1));
        assert_ne!(a.state_hash(), b.state_hash());
    }
}
