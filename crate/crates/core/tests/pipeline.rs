//! Drive endorse -> order -> validate -> commit by hand, without the
//! simulator's event loop.

mod common;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde_json::json;

use citizennet::consensus::{collect_endorsements, EndorsementEnv, Orderer, OrdererConfig};
use citizennet::crypto::{generate_identity, seed_from_label, sign, IdentityKeys, Signature};
use citizennet::ledger::{endorsement_payload, Endorsement, EndorsedTransaction, TransactionProposal, ValidationCode};
use citizennet::membership::{IdentityKind, Network};
use citizennet::runtime::invoke_contract;
use citizennet::sim::Simulation;

use common::{network, record, replay_valid_writes, world_state_of};

const CH: &str = "identity-main";

fn keys(label: &str) -> IdentityKeys {
    generate_identity(&seed_from_label(b"citizennet-sim/7", label)).unwrap()
}

struct Bed {
    net: Network,
    orderer: Orderer,
    now: u64,
    nonce: u64,
}

impl Bed {
    fn new() -> Self {
        let net = Simulation::new(network()).unwrap().network().clone();
        let mut orderer = Orderer::new(OrdererConfig::new(10, 1).unwrap());
        for ch in ["identity-main", "health"] {
            let genesis = net.peer("uidai-p0").unwrap().ledger(ch).unwrap().blocks().get(0).unwrap();
            orderer.register_channel(ch, &genesis.header);
        }
        Bed { net, orderer, now: 0, nonce: 0 }
    }

    fn proposal(&mut self, client: &str, function: &str, args: Vec<String>) -> TransactionProposal {
        self.nonce += 1;
        TransactionProposal::signed(&keys(&format!("client/{client}")), CH, "citizennet", function, args, self.nonce, self.now)
    }

    fn endorse(&self, p: &TransactionProposal, peers: &[&str]) -> EndorsedTransaction {
        let env = EndorsementEnv {
            membership: &self.net.membership,
            catalog: &self.net.catalog,
            epoch: NaiveDate::from_ymd_opt(2021, 1, 17).unwrap(),
        };
        let peers: Vec<_> = peers.iter().map(|id| self.net.peer(id).unwrap()).collect();
        collect_endorsements(env, p, &peers).unwrap()
    }

    /// Submit `txs` as one batch and deliver the block to every member peer.
    fn commit(&mut self, txs: Vec<EndorsedTransaction>) -> Vec<ValidationCode> {
        let n = txs.len();
        for tx in txs {
            self.orderer.submit(tx).unwrap();
        }
        self.now += 1;
        let blocks = self.orderer.tick(self.now);
        assert_eq!(blocks.len(), 1);
        let (ch, block) = blocks.into_iter().next().unwrap();
        assert_eq!(block.envelopes.len(), n);
        let peers: Vec<String> = self
            .net
            .peers()
            .filter(|p| p.has_joined(&ch))
            .map(|p| p.peer_id.clone())
            .collect();
        let mut flags: BTreeMap<String, Vec<ValidationCode>> = BTreeMap::new();
        for p in peers {
            flags.insert(p.clone(), self.net.deliver_block(&p, &ch, block.clone()).unwrap());
        }
        let first = flags.values().next().unwrap().clone();
        assert!(flags.values().all(|f| *f == first), "peers disagree: {flags:?}");
        first
    }

    fn check_replicas(&self) {
        for p in self.net.peers().filter(|p| p.has_joined(CH)) {
            let l = p.ledger(CH).unwrap();
            assert!(l.blocks().verify_chain().is_ok());
            assert_eq!(replay_valid_writes(l.blocks().as_slice()), world_state_of(l), "{}", p.peer_id);
        }
    }
}

fn registration(aadhaar: &str) -> Vec<String> {
    vec![record(aadhaar, "15/08/2003", "522309").to_string()]
}

#[test]
fn seed_labels_reproduce_registered_identities() {
    let bed = Bed::new();
    let admin = keys("client/admin");
    let id = bed.net.membership.identity(&admin.identity_id).expect("admin registered");
    assert_eq!(id.verify_key, admin.verify_key);
    assert!(matches!(&id.kind, IdentityKind::Client(c) if c.org_id == "UIDAI"));
    let peer = keys("peer/uidai-p0");
    assert_eq!(bed.net.peer("uidai-p0").unwrap().keys.identity_id, peer.identity_id);
}

#[test]
fn valid_transaction_commits_everywhere() {
    let mut bed = Bed::new();
    let p = bed.proposal("admin", "registerCitizen", registration("12345678911"));
    let tx = bed.endorse(&p, &["uidai-p0", "uidai-p1"]);
    assert_eq!(tx.endorsements.len(), 2);
    assert_eq!(bed.commit(vec![tx]), [ValidationCode::Valid]);
    for p in bed.net.peers().filter(|p| p.has_joined(CH)) {
        assert_eq!(p.ledger(CH).unwrap().height(), 2);
    }
    bed.check_replicas();
}

#[test]
fn duplicate_tx_id_within_and_across_blocks() {
    let mut bed = Bed::new();
    let p = bed.proposal("admin", "registerCitizen", registration("12345678911"));
    let tx = bed.endorse(&p, &["uidai-p0"]);
    assert_eq!(bed.commit(vec![tx.clone(), tx.clone()]), [ValidationCode::Valid, ValidationCode::DuplicateTxid]);
    assert_eq!(bed.commit(vec![tx]), [ValidationCode::DuplicateTxid]);
    bed.check_replicas();
}

#[test]
fn bad_signatures_are_flagged() {
    let mut bed = Bed::new();
    let p = bed.proposal("admin", "registerCitizen", registration("12345678911"));
    let good = bed.endorse(&p, &["uidai-p0"]);

    let mut bad_client = good.clone();
    let mut sig = bad_client.proposal.client_signature.as_bytes().to_vec();
    sig[0] ^= 1;
    bad_client.proposal.client_signature = Signature::from_bytes(sig);

    let mut bad_endorser = good.clone();
    let mut sig = bad_endorser.endorsements[0].signature.as_bytes().to_vec();
    sig[5] ^= 0x80;
    bad_endorser.endorsements[0].signature = Signature::from_bytes(sig);

    // An endorsement claiming an org the endorser does not belong to.
    let mut wrong_org = good.clone();
    wrong_org.endorsements[0].org_id = "BankX".into();

    let flags = bed.commit(vec![bad_client, bad_endorser, wrong_org, good]);
    assert_eq!(
        flags,
        [ValidationCode::BadSignature, ValidationCode::BadSignature, ValidationCode::BadSignature, ValidationCode::Valid]
    );
    bed.check_replicas();
}

#[test]
fn writes_without_authority_endorsement_fail_policy() {
    let mut bed = Bed::new();
    let p = bed.proposal("admin", "registerCitizen", registration("12345678911"));
    let tx = bed.endorse(&p, &["citizens-p0", "bankx-p0"]);
    assert_eq!(bed.commit(vec![tx]), [ValidationCode::EndorsementPolicyFailure]);
    let l = bed.net.peer("uidai-p0").unwrap().ledger(CH).unwrap();
    assert!(l.world_state().is_empty());
}

#[test]
fn unknown_chaincode_is_not_installed() {
    let mut bed = Bed::new();
    let admin = keys("client/admin");
    let p = TransactionProposal::signed(&admin, CH, "ghost", "anything", vec![], 99, 0);
    let rwset = Default::default();
    let peer = keys("peer/uidai-p0");
    let payload = endorsement_payload(&p, &rwset, b"");
    let tx = EndorsedTransaction {
        proposal: p,
        rwset,
        response: vec![],
        endorsements: vec![Endorsement {
            endorser_id: peer.identity_id.clone(),
            org_id: "UIDAI".into(),
            signature: sign(&peer.signing_key, &payload),
        }],
    };
    assert_eq!(bed.commit(vec![tx]), [ValidationCode::ChaincodeNotInstalled]);
}

#[test]
fn conflicting_writes_in_one_block_keep_the_first() {
    let mut bed = Bed::new();
    let mut a = record("12345678911", "15/08/2003", "522309");
    let mut b = a.clone();
    a["phone"] = json!("9000000001");
    b["phone"] = json!("9000000002");
    let pa = bed.proposal("admin", "registerCitizen", vec![a.to_string()]);
    let pb = bed.proposal("admin-2", "registerCitizen", vec![b.to_string()]);
    let ta = bed.endorse(&pa, &["uidai-p0"]);
    let tb = bed.endorse(&pb, &["uidai-p1"]);
    assert_eq!(bed.commit(vec![ta, tb]), [ValidationCode::Valid, ValidationCode::MvccConflict]);
    bed.check_replicas();

    // The committed record is the first one, on every peer.
    let env = citizennet::runtime::InvocationEnv {
        invoker: bed.net.membership.client(&keys("client/admin").identity_id).unwrap().clone(),
        channel_id: CH.into(),
        tx_id: "q".into(),
        timestamp: bed.now,
        epoch: NaiveDate::from_ymd_opt(2021, 1, 17).unwrap(),
    };
    for p in bed.net.peers().filter(|p| p.has_joined(CH)) {
        let out = invoke_contract(&bed.net.catalog, p.ledger(CH).unwrap(), &env, "citizennet", "viewaadhar", &["12345678911".into()]).unwrap();
        let v = citizennet::encoding::canonical_decode(&out.response).unwrap();
        assert_eq!(v["phone"], "9000000001", "{}", p.peer_id);
    }
}
