use std::collections::{BTreeMap, HashSet};

use super::ValidationCode;
use crate::crypto;
use crate::ledger::{Block, EndorsedTransaction, Envelope, Ledger, ReadWriteSet, Version, WorldState};
use crate::membership::{IdentityKind, Membership};
use crate::runtime::{ContractCatalog, FunctionClass};

/// Current committed version of a key, if the key exists.
pub trait VersionSource {
    fn current_version(&self, key: &str) -> Option<Version>;
}

impl VersionSource for WorldState {
    fn current_version(&self, key: &str) -> Option<Version> {
        self.get(key).map(|e| e.version)
    }
}

impl VersionSource for Ledger {
    fn current_version(&self, key: &str) -> Option<Version> {
        self.world_state().current_version(key)
    }
}

/// Committed versions overlaid with the writes of earlier VALID
/// transactions in the block being validated.
pub struct BlockOverlay<'a, S: VersionSource + ?Sized> {
    base: &'a S,
    block_num: u64,
    writes: BTreeMap<String, Option<Version>>,
}

impl<'a, S: VersionSource + ?Sized> BlockOverlay<'a, S> {
    pub fn new(base: &'a S, block_num: u64) -> Self {
        BlockOverlay {
            base,
            block_num,
            writes: BTreeMap::new(),
        }
    }

    pub fn apply(&mut self, rwset: &ReadWriteSet, tx_num: usize) {
        let version = Version::new(self.block_num, tx_num as u64);
        for w in &rwset.writes {
            self.writes
                .insert(w.key.clone(), w.value.as_ref().map(|_| version));
        }
    }
}

impl<S: VersionSource + ?Sized> VersionSource for BlockOverlay<'_, S> {
    fn current_version(&self, key: &str) -> Option<Version> {
        match self.writes.get(key) {
            Some(v) => *v,
            None => self.base.current_version(key),
        }
    }
}

/// True iff every recorded read version still matches the current one
/// (the absent-marker only matches an absent key).
pub fn mvcc_validate(rwset: &ReadWriteSet, state: &dyn VersionSource) -> bool {
    rwset
        .reads
        .iter()
        .all(|r| state.current_version(&r.key) == r.version)
}

fn signatures_ok(tx: &EndorsedTransaction, membership: &Membership, channel_id: &str) -> bool {
    let p = &tx.proposal;
    if p.channel_id != channel_id {
        return false;
    }
    let Some(channel) = membership.channel(channel_id) else {
        return false;
    };
    let client_ok = matches!(
        membership.identity(&p.creator),
        Some(id) if matches!(&id.kind, IdentityKind::Client(c) if channel.member_orgs.contains(&c.org_id))
            && p.verify_signature(&id.verify_key)
    );
    if !client_ok || tx.endorsements.is_empty() {
        return false;
    }
    let payload = tx.payload();
    tx.endorsements.iter().all(|e| match membership.identity(&e.endorser_id) {
        Some(id) => {
            matches!(&id.kind, IdentityKind::Peer { org_id, .. } if *org_id == e.org_id)
                && crypto::verify(&id.verify_key, &payload, &e.signature)
        }
        None => false,
    })
}

fn check_tx(
    tx: &EndorsedTransaction,
    ledger: &Ledger,
    membership: &Membership,
    catalog: &ContractCatalog,
    seen: &HashSet<&str>,
) -> ValidationCode {
    let p = &tx.proposal;
    if !signatures_ok(tx, membership, ledger.channel_id()) {
        return ValidationCode::BadSignature;
    }
    if ledger.contains_tx_id(&p.tx_id) || seen.contains(p.tx_id.as_str()) {
        return ValidationCode::DuplicateTxid;
    }
    let channel = membership.channel(ledger.channel_id());
    let class = catalog.function_class(&p.chaincode_name, &p.function);
    let policy = match (channel, class) {
        (Some(ch), Some(class)) => ch.policy_for(&p.chaincode_name, class),
        _ => None,
    };
    let Some(policy) = policy else {
        return ValidationCode::ChaincodeNotInstalled;
    };
    // A read-only function cannot carry writes, whatever its endorsers say.
    if class == Some(FunctionClass::ReadOnly) && !tx.rwset.writes.is_empty() {
        return ValidationCode::EndorsementPolicyFailure;
    }
    if !policy.is_satisfied_by(tx.endorsements.iter().map(|e| e.org_id.as_str())) {
        return ValidationCode::EndorsementPolicyFailure;
    }
    ValidationCode::Valid
}

/// Assign a validation code to every transaction of `block`, in order, as
/// seen from `ledger` (the replica about to commit it).
pub fn validate_block(
    ledger: &Ledger,
    membership: &Membership,
    catalog: &ContractCatalog,
    mut block: Block,
) -> Block {
    let mut overlay = BlockOverlay::new(ledger, block.header.number);
    let decoded: Vec<Option<EndorsedTransaction>> = block
        .envelopes
        .iter()
        .map(|raw| match Envelope::decode(raw) {
            Ok(Envelope::Transaction(tx)) => Some(tx),
            _ => None,
        })
        .collect();
    let mut seen: HashSet<&str> = HashSet::new();
    let mut flags = Vec::with_capacity(decoded.len());
    for (tx_num, tx) in decoded.iter().enumerate() {
        let Some(tx) = tx else {
            flags.push(ValidationCode::BadSignature);
            continue;
        };
        let mut code = check_tx(tx, ledger, membership, catalog, &seen);
        if code == ValidationCode::Valid && !mvcc_validate(&tx.rwset, &overlay) {
            code = ValidationCode::MvccConflict;
        }
        if code != ValidationCode::BadSignature {
            seen.insert(tx.proposal.tx_id.as_str());
        }
        if code == ValidationCode::Valid {
            overlay.apply(&tx.rwset, tx_num);
        }
        flags.push(code);
    }
    block.validity_flags = Some(flags);
    block
}
