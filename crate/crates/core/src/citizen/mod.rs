//! The citizen identity chaincode.
//!
//! Only UIDAI administrators write citizen records. Citizens read their own
//! record, file change requests, grant or revoke consent, and trigger the
//! vote-eligibility check. Third parties read only what a citizen has
//! consented to share with their organization.

mod asset;
mod eligibility;

use std::collections::{BTreeMap, BTreeSet};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use asset::{
    display_name, is_field_name, to_display, ChangeRequest, CitizenAsset, ConsentRecord,
    ConsentStatus, Projection, RequestStatus, Vote, FIELD_NAMES, WRITABLE_FIELDS,
};
pub use eligibility::{age_in_years, format_date, is_of_voting_age, parse_dob, voter_id, VOTING_AGE};

use crate::crypto::hash;
use crate::encoding::{from_canonical, to_canonical};
use crate::ledger::create_composite_key;
use crate::membership::Role;
use crate::runtime::{Chaincode, ContractContext, ContractError, FunctionClass};

pub const CHAINCODE_NAME: &str = "citizennet";
pub const ASSET_NAMESPACE: &str = "org.citizen-network.citizennet.citizen";
pub const CHANGE_REQUEST_NAMESPACE: &str = "org.citizen-network.citizennet.changereq";
pub const CONSENT_NAMESPACE: &str = "org.citizen-network.citizennet.consent";

pub const NOT_ELIGIBLE_YET: &str = "not eligible yet";

pub mod functions {
    pub const REGISTER_CITIZEN: &str = "registerCitizen";
    pub const VIEW_AADHAR: &str = "viewaadhar";
    pub const VIEW_HISTORY: &str = "viewHistory";
    pub const REQUEST_CHANGE: &str = "requestChange";
    pub const DECIDE_CHANGE: &str = "decideChange";
    pub const GRANT_CONSENT: &str = "grantConsent";
    pub const REVOKE_CONSENT: &str = "revokeConsent";
    pub const UPDATE_VOTE_ELIGIBILITY: &str = "updateVoteEligibility";
    pub const KYC_SHARE: &str = "kycShare";
}

use functions::*;

const FUNCTIONS: [(&str, FunctionClass); 9] = [
    (REGISTER_CITIZEN, FunctionClass::Mutating),
    (VIEW_AADHAR, FunctionClass::ReadOnly),
    (VIEW_HISTORY, FunctionClass::ReadOnly),
    (REQUEST_CHANGE, FunctionClass::Mutating),
    (DECIDE_CHANGE, FunctionClass::Mutating),
    (GRANT_CONSENT, FunctionClass::Mutating),
    (REVOKE_CONSENT, FunctionClass::Mutating),
    (UPDATE_VOTE_ELIGIBILITY, FunctionClass::Mutating),
    (KYC_SHARE, FunctionClass::ReadOnly),
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CitizenError {
    #[error("unauthorized")]
    Unauthorized,
    #[error("citizen {0} is already registered")]
    AlreadyRegistered(String),
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("{0} not found")]
    NotFound(String),
    #[error("access denied")]
    AccessDenied,
    #[error("field {0} cannot be changed by request")]
    ImmutableField(String),
    #[error("request {0} is not pending")]
    NotPending(String),
    #[error("invalid consent scope: {0}")]
    InvalidScope(String),
    #[error("no active consent for {0}")]
    NoActiveConsent(String),
    #[error("citizen {0} is already eligible")]
    AlreadyEligible(String),
    #[error("requested fields do not intersect the consent scope")]
    EmptyIntersection,
    #[error("stored record under {0:?} does not decode")]
    CorruptRecord(String),
}

impl CitizenError {
    pub fn code(&self) -> &'static str {
        match self {
            CitizenError::Unauthorized => "Unauthorized",
            CitizenError::AlreadyRegistered(_) => "AlreadyRegistered",
            CitizenError::InvalidField(_) => "InvalidField",
            CitizenError::NotFound(_) => "NotFound",
            CitizenError::AccessDenied => "AccessDenied",
            CitizenError::ImmutableField(_) => "ImmutableField",
            CitizenError::NotPending(_) => "NotPending",
            CitizenError::InvalidScope(_) => "InvalidScope",
            CitizenError::NoActiveConsent(_) => "NoActiveConsent",
            CitizenError::AlreadyEligible(_) => "AlreadyEligible",
            CitizenError::EmptyIntersection => "EmptyIntersection",
            CitizenError::CorruptRecord(_) => "CorruptRecord",
        }
    }
}

impl From<CitizenError> for ContractError {
    fn from(e: CitizenError) -> Self {
        ContractError::Rejected {
            code: e.code().to_owned(),
            message: e.to_string(),
        }
    }
}

pub fn asset_key(aadhaar: &str) -> Result<String, ContractError> {
    create_composite_key(ASSET_NAMESPACE, &[aadhaar])
        .map_err(|e| ContractError::BadArguments(e.to_string()))
}

pub fn change_request_key(request_id: &str) -> Result<String, ContractError> {
    create_composite_key(CHANGE_REQUEST_NAMESPACE, &[request_id])
        .map_err(|e| ContractError::BadArguments(e.to_string()))
}

pub fn consent_key(aadhaar: &str, grantee_org: &str) -> Result<String, ContractError> {
    create_composite_key(CONSENT_NAMESPACE, &[aadhaar, grantee_org])
        .map_err(|e| ContractError::BadArguments(e.to_string()))
}

/// Asset fields as submitted for registration. `vote` and `voter_id` are
/// accepted but ignored: new records always start "Not Eligible".
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Registration {
    pub aadhaar: String,
    pub name: String,
    pub dob: String,
    pub father_name: String,
    #[serde(default)]
    pub vote: Option<Vote>,
    pub pan: String,
    #[serde(default)]
    pub accounts: BTreeMap<String, String>,
    pub phone: String,
    pub current_state: String,
    pub pincode: String,
    pub address: String,
    #[serde(default)]
    pub voter_id: Option<String>,
}

fn validate_aadhaar(aadhaar: &str) -> Result<(), CitizenError> {
    if aadhaar.is_empty() || !aadhaar.bytes().all(|b| b.is_ascii_digit()) {
        return Err(CitizenError::InvalidField(format!("aadhaar {aadhaar:?}")));
    }
    Ok(())
}

fn arg<'a>(args: &'a [String], i: usize, name: &str) -> Result<&'a str, ContractError> {
    args.get(i)
        .map(String::as_str)
        .ok_or_else(|| ContractError::BadArguments(format!("missing argument {i} ({name})")))
}

fn expect_args(args: &[String], n: usize) -> Result<(), ContractError> {
    if args.len() != n {
        return Err(ContractError::BadArguments(format!(
            "expected {n} arguments, got {}",
            args.len()
        )));
    }
    Ok(())
}

fn parse_json<T: DeserializeOwned>(s: &str, what: &str) -> Result<T, ContractError> {
    serde_json::from_str(s).map_err(|e| ContractError::BadArguments(format!("{what}: {e}")))
}

fn respond<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, ContractError> {
    to_canonical(value).map_err(|e| ContractError::BadArguments(e.to_string()))
}

fn load<T: DeserializeOwned>(
    ctx: &mut ContractContext<'_>,
    key: &str,
) -> Result<Option<T>, ContractError> {
    match ctx.get_state(key) {
        None => Ok(None),
        Some(bytes) => from_canonical(&bytes)
            .map(Some)
            .map_err(|_| CitizenError::CorruptRecord(key.to_owned()).into()),
    }
}

fn store<T: Serialize>(ctx: &mut ContractContext<'_>, key: &str, value: &T) -> Result<(), ContractError> {
    let bytes = to_canonical(value).map_err(|e| ContractError::BadArguments(e.to_string()))?;
    ctx.put_state(key, bytes)
}

fn load_asset(ctx: &mut ContractContext<'_>, aadhaar: &str) -> Result<CitizenAsset, ContractError> {
    load(ctx, &asset_key(aadhaar)?)?.ok_or_else(|| CitizenError::NotFound(aadhaar.to_owned()).into())
}

enum Access {
    Full,
    Scoped(BTreeSet<String>),
}

impl Access {
    fn render(&self, asset: &CitizenAsset) -> Projection {
        match self {
            Access::Full => asset.to_fields(),
            Access::Scoped(scope) => asset.project(scope),
        }
    }
}

fn is_owner(ctx: &ContractContext<'_>, aadhaar: &str) -> bool {
    let inv = ctx.invoker();
    inv.role == Role::Citizen && inv.bound_aadhaar.as_deref() == Some(aadhaar)
}

fn active_consent(
    ctx: &mut ContractContext<'_>,
    aadhaar: &str,
) -> Result<Option<ConsentRecord>, ContractError> {
    let org = ctx.invoker().org_id.clone();
    let record: Option<ConsentRecord> = load(ctx, &consent_key(aadhaar, &org)?)?;
    Ok(record.filter(ConsentRecord::is_active))
}

fn access_for(ctx: &mut ContractContext<'_>, aadhaar: &str) -> Result<Access, ContractError> {
    if ctx.invoker().role == Role::UidaiAdmin || is_owner(ctx, aadhaar) {
        return Ok(Access::Full);
    }
    match active_consent(ctx, aadhaar)? {
        Some(c) => Ok(Access::Scoped(c.scope)),
        None => Err(CitizenError::AccessDenied.into()),
    }
}

fn parse_field_list(raw: &str, what: &str) -> Result<BTreeSet<String>, ContractError> {
    parse_json::<Vec<String>>(raw, what).map(|v| v.into_iter().collect())
}

/// Apply requested changes to `asset`; every key must be writable.
fn merge_changes(
    asset: &mut CitizenAsset,
    changes: &BTreeMap<String, Value>,
) -> Result<(), CitizenError> {
    for (field, value) in changes {
        if !WRITABLE_FIELDS.contains(&field.as_str()) {
            return Err(if is_field_name(field) {
                CitizenError::ImmutableField(field.clone())
            } else {
                CitizenError::InvalidField(field.clone())
            });
        }
        let bad = || CitizenError::InvalidField(format!("{field}: {value}"));
        match field.as_str() {
            "accounts" => {
                asset.accounts = serde_json::from_value(value.clone()).map_err(|_| bad())?;
            }
            _ => {
                let s = value.as_str().ok_or_else(bad)?.to_owned();
                match field.as_str() {
                    "phone" => asset.phone = s,
                    "current_state" => asset.current_state = s,
                    "pincode" => asset.pincode = s,
                    "address" => asset.address = s,
                    _ => unreachable!("writable field list"),
                }
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CitizenContract;

impl CitizenContract {
    fn register_citizen(&self, ctx: &mut ContractContext<'_>, args: &[String]) -> Result<Vec<u8>, ContractError> {
        expect_args(args, 1)?;
        if ctx.invoker().role != Role::UidaiAdmin {
            return Err(CitizenError::Unauthorized.into());
        }
        let reg: Registration = parse_json(&args[0], "citizen record")
            .map_err(|e| CitizenError::InvalidField(e.to_string()))?;
        validate_aadhaar(&reg.aadhaar)?;
        if parse_dob(&reg.dob).is_none() {
            return Err(CitizenError::InvalidField(format!("dob {:?}", reg.dob)).into());
        }
        let key = asset_key(&reg.aadhaar)?;
        if ctx.get_state(&key).is_some() {
            return Err(CitizenError::AlreadyRegistered(reg.aadhaar).into());
        }
        let asset = CitizenAsset {
            aadhaar: reg.aadhaar,
            name: reg.name,
            dob: reg.dob,
            father_name: reg.father_name,
            vote: Vote::NotEligible,
            pan: reg.pan,
            accounts: reg.accounts,
            phone: reg.phone,
            current_state: reg.current_state,
            pincode: reg.pincode,
            address: reg.address,
            voter_id: None,
        };
        store(ctx, &key, &asset)?;
        respond(&asset)
    }

    fn view_aadhar(&self, ctx: &mut ContractContext<'_>, args: &[String]) -> Result<Vec<u8>, ContractError> {
        expect_args(args, 1)?;
        let aadhaar = &args[0];
        let access = access_for(ctx, aadhaar)?;
        let asset = load_asset(ctx, aadhaar)?;
        respond(&access.render(&asset))
    }

    fn view_history(&self, ctx: &mut ContractContext<'_>, args: &[String]) -> Result<Vec<u8>, ContractError> {
        expect_args(args, 1)?;
        let aadhaar = &args[0];
        let key = asset_key(aadhaar)?;
        let access = access_for(ctx, aadhaar)?;
        let history = ctx.get_history(&key);
        if history.is_empty() {
            return Err(CitizenError::NotFound(aadhaar.clone()).into());
        }
        let mut versions = Vec::with_capacity(history.len());
        for entry in history {
            let Some(bytes) = entry.value else { continue };
            let asset: CitizenAsset =
                from_canonical(&bytes).map_err(|_| CitizenError::CorruptRecord(key.clone()))?;
            versions.push(access.render(&asset));
        }
        respond(&versions)
    }

    fn request_change(&self, ctx: &mut ContractContext<'_>, args: &[String]) -> Result<Vec<u8>, ContractError> {
        expect_args(args, 2)?;
        let aadhaar = &args[0];
        if !is_owner(ctx, aadhaar) {
            return Err(CitizenError::Unauthorized.into());
        }
        let changes: BTreeMap<String, Value> = parse_json(&args[1], "changes")?;
        if changes.is_empty() {
            return Err(CitizenError::InvalidField("empty change set".into()).into());
        }
        let asset = load_asset(ctx, aadhaar)?;
        // Dry-run so that bad requests are refused up front.
        merge_changes(&mut asset.clone(), &changes)?;

        let request_id = hash(ctx.tx_id().as_bytes()).to_hex();
        let request = ChangeRequest {
            request_id: request_id.clone(),
            aadhaar: aadhaar.clone(),
            changes,
            status: RequestStatus::Pending,
            requested_by: ctx.invoker().identity_id.clone(),
        };
        store(ctx, &change_request_key(&request_id)?, &request)?;
        respond(&request)
    }

    fn decide_change(&self, ctx: &mut ContractContext<'_>, args: &[String]) -> Result<Vec<u8>, ContractError> {
        expect_args(args, 2)?;
        if ctx.invoker().role != Role::UidaiAdmin {
            return Err(CitizenError::Unauthorized.into());
        }
        let request_id = &args[0];
        let approve = match args[1].as_str() {
            "approve" | "true" => true,
            "reject" | "false" => false,
            other => return Err(ContractError::BadArguments(format!("decision {other:?}"))),
        };
        let key = change_request_key(request_id)?;
        let mut request: ChangeRequest =
            load(ctx, &key)?.ok_or_else(|| CitizenError::NotFound(request_id.clone()))?;
        if request.status != RequestStatus::Pending {
            return Err(CitizenError::NotPending(request_id.clone()).into());
        }
        let mut response = serde_json::Map::new();
        if approve {
            let mut asset = load_asset(ctx, &request.aadhaar)?;
            merge_changes(&mut asset, &request.changes)?;
            store(ctx, &asset_key(&request.aadhaar)?, &asset)?;
            response.insert("asset".into(), serde_json::to_value(&asset).expect("asset"));
            request.status = RequestStatus::Approved;
        } else {
            request.status = RequestStatus::Rejected;
        }
        store(ctx, &key, &request)?;
        response.insert("request".into(), serde_json::to_value(&request).expect("request"));
        respond(&response)
    }

    fn grant_consent(&self, ctx: &mut ContractContext<'_>, args: &[String]) -> Result<Vec<u8>, ContractError> {
        expect_args(args, 2)?;
        let aadhaar = match (ctx.invoker().role, &ctx.invoker().bound_aadhaar) {
            (Role::Citizen, Some(a)) => a.clone(),
            _ => return Err(CitizenError::Unauthorized.into()),
        };
        let grantee_org = &args[0];
        let scope = parse_field_list(&args[1], "scope")?;
        if scope.is_empty() {
            return Err(CitizenError::InvalidScope("empty".into()).into());
        }
        if let Some(bad) = scope.iter().find(|f| !is_field_name(f)) {
            return Err(CitizenError::InvalidScope(bad.clone()).into());
        }
        if grantee_org.is_empty() {
            return Err(ContractError::BadArguments("empty grantee org".into()));
        }
        load_asset(ctx, &aadhaar)?;
        let record = ConsentRecord {
            aadhaar: aadhaar.clone(),
            grantee_org: grantee_org.clone(),
            scope,
            status: ConsentStatus::Active,
            granted_at: ctx.tx_timestamp(),
            revoked_at: None,
        };
        store(ctx, &consent_key(&aadhaar, grantee_org)?, &record)?;
        respond(&record)
    }

    fn revoke_consent(&self, ctx: &mut ContractContext<'_>, args: &[String]) -> Result<Vec<u8>, ContractError> {
        expect_args(args, 1)?;
        let aadhaar = match (ctx.invoker().role, &ctx.invoker().bound_aadhaar) {
            (Role::Citizen, Some(a)) => a.clone(),
            _ => return Err(CitizenError::Unauthorized.into()),
        };
        let grantee_org = &args[0];
        let key = consent_key(&aadhaar, grantee_org)?;
        let mut record: ConsentRecord = load(ctx, &key)?
            .filter(ConsentRecord::is_active)
            .ok_or_else(|| CitizenError::NoActiveConsent(grantee_org.clone()))?;
        record.status = ConsentStatus::Revoked;
        record.revoked_at = Some(ctx.tx_timestamp());
        store(ctx, &key, &record)?;
        respond(&record)
    }

    fn update_vote_eligibility(
        &self,
        ctx: &mut ContractContext<'_>,
        args: &[String],
    ) -> Result<Vec<u8>, ContractError> {
        expect_args(args, 1)?;
        let aadhaar = &args[0];
        if !(ctx.invoker().role == Role::UidaiAdmin || is_owner(ctx, aadhaar)) {
            return Err(CitizenError::Unauthorized.into());
        }
        let mut asset = load_asset(ctx, aadhaar)?;
        if asset.vote == Vote::Eligible {
            return Err(CitizenError::AlreadyEligible(aadhaar.clone()).into());
        }
        let dob = parse_dob(&asset.dob)
            .ok_or_else(|| CitizenError::InvalidField(format!("dob {:?}", asset.dob)))?;
        if !is_of_voting_age(dob, ctx.tx_date()) {
            return respond(NOT_ELIGIBLE_YET);
        }
        asset.vote = Vote::Eligible;
        asset.voter_id = Some(voter_id(&asset.pincode, &asset.aadhaar));
        store(ctx, &asset_key(aadhaar)?, &asset)?;
        respond(&asset)
    }

    fn kyc_share(&self, ctx: &mut ContractContext<'_>, args: &[String]) -> Result<Vec<u8>, ContractError> {
        expect_args(args, 2)?;
        if ctx.invoker().role != Role::ThirdParty {
            return Err(CitizenError::Unauthorized.into());
        }
        let aadhaar = arg(args, 0, "aadhaar")?;
        let requested = parse_field_list(arg(args, 1, "fields")?, "requested fields")?;
        let asset = load_asset(ctx, aadhaar)?;
        let consent = active_consent(ctx, aadhaar)?.ok_or(CitizenError::AccessDenied)?;
        let allowed: BTreeSet<String> = requested.intersection(&consent.scope).cloned().collect();
        if allowed.is_empty() {
            return Err(CitizenError::EmptyIntersection.into());
        }
        respond(&asset.project(&allowed))
    }
}

impl Chaincode for CitizenContract {
    fn name(&self) -> &str {
        CHAINCODE_NAME
    }

    fn functions(&self) -> &[(&'static str, FunctionClass)] {
        &FUNCTIONS
    }

    fn invoke(
        &self,
        ctx: &mut ContractContext<'_>,
        function: &str,
        args: &[String],
    ) -> Result<Vec<u8>, ContractError> {
        match function {
            REGISTER_CITIZEN => self.register_citizen(ctx, args),
            VIEW_AADHAR => self.view_aadhar(ctx, args),
            VIEW_HISTORY => self.view_history(ctx, args),
            REQUEST_CHANGE => self.request_change(ctx, args),
            DECIDE_CHANGE => self.decide_change(ctx, args),
            GRANT_CONSENT => self.grant_consent(ctx, args),
            REVOKE_CONSENT => self.revoke_consent(ctx, args),
            UPDATE_VOTE_ELIGIBILITY => self.update_vote_eligibility(ctx, args),
            KYC_SHARE => self.kyc_share(ctx, args),
            other => Err(ContractError::UnknownFunction {
                chaincode: CHAINCODE_NAME.to_owned(),
                function: other.to_owned(),
            }),
        }
    }
}

/// The record of the worked example: Aadhaar 12345678911, pincode 522309.
/// The date of birth is not given in the example; 15/08/2003 is used.
pub fn sample_registration() -> Value {
    serde_json::json!({
        "aadhaar": "12345678911",
        "name": "ABC XYZ",
        "dob": "15/08/2003",
        "father_name": "XYZ ABC",
        "vote": "Not Eligible",
        "pan": "ABC1234P",
        "accounts": {"SBI00082": "12345678901"},
        "phone": "91XXXXXXXX",
        "current_state": "Andhra Pradesh",
        "pincode": "522309",
        "address": "DEF street, Door No: 1-1-1, KLM Apartment"
    })
}
