use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Vote {
    #[serde(rename = "Not Eligible")]
    NotEligible,
    #[serde(rename = "Eligible")]
    Eligible,
}

/// The identity record stored under the citizen namespace, keyed by
/// Aadhaar number.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitizenAsset {
    pub aadhaar: String,
    pub name: String,
    pub dob: String,
    pub father_name: String,
    pub vote: Vote,
    pub pan: String,
    #[serde(default)]
    pub accounts: BTreeMap<String, String>,
    pub phone: String,
    pub current_state: String,
    pub pincode: String,
    pub address: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voter_id: Option<String>,
}

/// Every field name of [`CitizenAsset`], in declaration order.
pub const FIELD_NAMES: [&str; 12] = [
    "aadhaar",
    "name",
    "dob",
    "father_name",
    "vote",
    "pan",
    "accounts",
    "phone",
    "current_state",
    "pincode",
    "address",
    "voter_id",
];

/// Fields a citizen may ask to change.
pub const WRITABLE_FIELDS: [&str; 5] = ["phone", "current_state", "pincode", "address", "accounts"];

pub fn is_field_name(name: &str) -> bool {
    FIELD_NAMES.contains(&name)
}

/// Label used when rendering records for operators.
pub fn display_name(field: &str) -> &str {
    match field {
        "aadhaar" => "AADHAR Number",
        "name" => "Name",
        "dob" => "DOB",
        "father_name" => "Father Name",
        "vote" => "Vote",
        "pan" => "PAN",
        "accounts" => "Accounts",
        "phone" => "Phone",
        "current_state" => "Current State",
        "pincode" => "pincode",
        "address" => "Address",
        "voter_id" => "VoterID",
        other => other,
    }
}

/// Field-name → value pairs; a full record or a consent-filtered subset.
pub type Projection = BTreeMap<String, Value>;

impl CitizenAsset {
    pub fn to_fields(&self) -> Projection {
        match serde_json::to_value(self).expect("asset serializes") {
            Value::Object(m) => m.into_iter().collect(),
            _ => unreachable!("asset is a struct"),
        }
    }

    /// The fields of `self` named in `scope`; absent optional fields are
    /// omitted.
    pub fn project(&self, scope: &BTreeSet<String>) -> Projection {
        self.to_fields()
            .into_iter()
            .filter(|(k, _)| scope.contains(k))
            .collect()
    }
}

/// Re-key a field map with display names, preserving declaration order.
pub fn to_display(fields: &Projection) -> Map<String, Value> {
    let mut out = Map::new();
    for name in FIELD_NAMES {
        if let Some(v) = fields.get(name) {
            out.insert(display_name(name).to_owned(), v.clone());
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestStatus {
    Pending,
    Approved,
    Rejected,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeRequest {
    pub request_id: String,
    pub aadhaar: String,
    pub changes: BTreeMap<String, Value>,
    pub status: RequestStatus,
    pub requested_by: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsentStatus {
    Active,
    Revoked,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsentRecord {
    pub aadhaar: String,
    pub grantee_org: String,
    pub scope: BTreeSet<String>,
    pub status: ConsentStatus,
    pub granted_at: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revoked_at: Option<u64>,
}

impl ConsentRecord {
    pub fn is_active(&self) -> bool {
        self.status == ConsentStatus::Active
    }
}
