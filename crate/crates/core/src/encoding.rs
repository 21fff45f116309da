//! Canonical byte encoding for structured records.
//!
//! Every peer must hash identical bytes for the same logical value, so the
//! encoding is a small tagged binary format with map keys emitted in
//! code-point order:
//!
//! ```text
//! string  's' u32-be(len) utf8
//! integer 'i' i64-be
//! bool    't' | 'f'
//! list    'l' u32-be(count) item*
//! map     'm' u32-be(count) (u32-be(len) key-utf8 value)*
//! ```
//!
//! Only those five kinds are accepted. Byte strings travel as lowercase hex
//! strings (see [`hex_bytes`]).

use serde::{de::DeserializeOwned, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("unsupported value kind: {0}")]
    UnsupportedValue(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("truncated input at offset {0}")]
    Truncated(usize),
    #[error("unknown tag {tag:#04x} at offset {offset}")]
    UnknownTag { tag: u8, offset: usize },
    #[error("invalid utf-8 at offset {0}")]
    InvalidUtf8(usize),
    #[error("map keys out of order or duplicated at offset {0}")]
    NonCanonicalMap(usize),
    #[error("{0} trailing bytes")]
    TrailingBytes(usize),
    #[error("structure mismatch: {0}")]
    Shape(String),
}

const TAG_STR: u8 = b's';
const TAG_INT: u8 = b'i';
const TAG_TRUE: u8 = b't';
const TAG_FALSE: u8 = b'f';
const TAG_LIST: u8 = b'l';
const TAG_MAP: u8 = b'm';

pub fn canonical_encode(value: &Value) -> Result<Vec<u8>, EncodeError> {
    let mut out = Vec::new();
    encode_into(value, &mut out)?;
    Ok(out)
}

/// Serialize `value` through serde, then canonically encode it.
pub fn to_canonical<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, EncodeError> {
    let tree =
        serde_json::to_value(value).map_err(|e| EncodeError::UnsupportedValue(e.to_string()))?;
    canonical_encode(&tree)
}

pub fn from_canonical<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, DecodeError> {
    let tree = canonical_decode(bytes)?;
    serde_json::from_value(tree).map_err(|e| DecodeError::Shape(e.to_string()))
}

/// The canonical encoding of a list whose items are already encoded.
///
/// `frame_encoded_list(&[enc(a), enc(b)]) == canonical_encode([a, b])`.
pub fn frame_encoded_list<B: AsRef<[u8]>>(items: &[B]) -> Vec<u8> {
    let total: usize = items.iter().map(|i| i.as_ref().len()).sum();
    let mut out = Vec::with_capacity(5 + total);
    out.push(TAG_LIST);
    out.extend_from_slice(&(items.len() as u32).to_be_bytes());
    for item in items {
        out.extend_from_slice(item.as_ref());
    }
    out
}

fn encode_into(value: &Value, out: &mut Vec<u8>) -> Result<(), EncodeError> {
    match value {
        Value::String(s) => write_str(TAG_STR, s, out),
        Value::Number(n) => {
            let i = n
                .as_i64()
                .ok_or_else(|| EncodeError::UnsupportedValue(format!("number {n}")))?;
            out.push(TAG_INT);
            out.extend_from_slice(&i.to_be_bytes());
        }
        Value::Bool(true) => out.push(TAG_TRUE),
        Value::Bool(false) => out.push(TAG_FALSE),
        Value::Array(items) => {
            out.push(TAG_LIST);
            out.extend_from_slice(&(items.len() as u32).to_be_bytes());
            for item in items {
                encode_into(item, out)?;
            }
        }
        Value::Object(map) => {
            let mut entries: Vec<(&String, &Value)> = map.iter().collect();
            entries.sort_by(|a, b| a.0.cmp(b.0));
            out.push(TAG_MAP);
            out.extend_from_slice(&(entries.len() as u32).to_be_bytes());
            for (k, v) in entries {
                out.extend_from_slice(&(k.len() as u32).to_be_bytes());
                out.extend_from_slice(k.as_bytes());
                encode_into(v, out)?;
            }
        }
        Value::Null => return Err(EncodeError::UnsupportedValue("null".into())),
    }
    Ok(())
}

fn write_str(tag: u8, s: &str, out: &mut Vec<u8>) {
    out.push(tag);
    out.extend_from_slice(&(s.len() as u32).to_be_bytes());
    out.extend_from_slice(s.as_bytes());
}

pub fn canonical_decode(bytes: &[u8]) -> Result<Value, DecodeError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let v = cur.value()?;
    if cur.pos != bytes.len() {
        return Err(DecodeError::TrailingBytes(bytes.len() - cur.pos));
    }
    Ok(v)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.bytes.len())
            .ok_or(DecodeError::Truncated(self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize, DecodeError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn string(&mut self) -> Result<String, DecodeError> {
        let at = self.pos;
        let len = self.u32()?;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| DecodeError::InvalidUtf8(at))
    }

    fn value(&mut self) -> Result<Value, DecodeError> {
        let offset = self.pos;
        let tag = self.take(1)?[0];
        match tag {
            TAG_STR => Ok(Value::String(self.string()?)),
            TAG_INT => {
                let b = self.take(8)?;
                Ok(Value::from(i64::from_be_bytes(b.try_into().expect("8 bytes"))))
            }
            TAG_TRUE => Ok(Value::Bool(true)),
            TAG_FALSE => Ok(Value::Bool(false)),
            TAG_LIST => {
                let n = self.u32()?;
                let mut items = Vec::with_capacity(n.min(1024));
                for _ in 0..n {
                    items.push(self.value()?);
                }
                Ok(Value::Array(items))
            }
            TAG_MAP => {
                let n = self.u32()?;
                let mut map = Map::new();
                let mut prev: Option<String> = None;
                for _ in 0..n {
                    let at = self.pos;
                    let k = self.string()?;
                    if prev.as_ref().is_some_and(|p| *p >= k) {
                        return Err(DecodeError::NonCanonicalMap(at));
                    }
                    let v = self.value()?;
                    prev = Some(k.clone());
                    map.insert(k, v);
                }
                Ok(Value::Object(map))
            }
            tag => Err(DecodeError::UnknownTag { tag, offset }),
        }
    }
}

/// Serde helpers that carry byte strings as lowercase hex.
pub mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }

    pub mod option {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(bytes: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
            match bytes {
                Some(b) => s.serialize_str(&hex::encode(b)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<u8>>, D::Error> {
            Option::<String>::deserialize(d)?
                .map(|s| hex::decode(s).map_err(serde::de::Error::custom))
                .transpose()
        }
    }

    pub mod list {
        use serde::ser::SerializeSeq;
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(items: &[Vec<u8>], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(items.len()))?;
            for item in items {
                seq.serialize_element(&hex::encode(item))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<u8>>, D::Error> {
            Vec::<String>::deserialize(d)?
                .into_iter()
                .map(|s| hex::decode(s).map_err(serde::de::Error::custom))
                .collect()
        }
    }
}
