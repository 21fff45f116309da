#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use citizennet::crypto;
use citizennet::ledger::{Block, Envelope, Ledger, ValidationCode, Version};
use citizennet::membership::IdentityKind;
use citizennet::sim::{
    Action, Args, ChannelSpec, ClientSpec, Forge, ForgedWrite, OrgSpec, PeerSpec, Propose, Scenario,
    SimConfig, Simulation,
};

pub const NETWORK: &str = include_str!("../../../../scenarios/network.json");

pub fn fixture(name: &str) -> Scenario {
    let text = match name {
        "walkthrough" => include_str!("../../../../scenarios/walkthrough.json"),
        "consent" => include_str!("../../../../scenarios/consent.json"),
        "mvcc" => include_str!("../../../../scenarios/mvcc.json"),
        "tamper" => include_str!("../../../../scenarios/tamper.json"),
        "empty" => include_str!("../../../../scenarios/empty.json"),
        other => panic!("no fixture {other}"),
    };
    Scenario::from_json(text).unwrap()
}

pub fn network() -> SimConfig {
    SimConfig::from_json(NETWORK).unwrap()
}

pub fn run(config: &SimConfig, scenario: &Scenario) -> Simulation {
    let mut sim = Simulation::new(config.clone()).unwrap();
    sim.run(scenario).unwrap();
    sim
}

pub fn record(aadhaar: &str, dob: &str, pincode: &str) -> Value {
    json!({
        "aadhaar": aadhaar,
        "name": format!("Citizen {aadhaar}"),
        "dob": dob,
        "father_name": "Parent",
        "pan": format!("PAN{}", &aadhaar[aadhaar.len() - 4..]),
        "accounts": {},
        "phone": "91XXXXXXXX",
        "current_state": "Andhra Pradesh",
        "pincode": pincode,
        "address": "Somewhere"
    })
}

pub fn propose(channel: &str, function: &str, args: Vec<Value>, label: Option<String>) -> Action {
    Action::Propose(Propose {
        channel: channel.into(),
        chaincode: "citizennet".into(),
        function: function.into(),
        args: Args(args),
        endorsers: None,
        submit: None,
        label,
    })
}

// ---- replay oracle --------------------------------------------------------

pub type PlainState = BTreeMap<String, (Vec<u8>, Version)>;

/// Apply the writes of every VALID transaction, in block order, to a plain
/// map. Knows nothing about world-state internals.
pub fn replay_valid_writes(blocks: &[Block]) -> PlainState {
    let mut state = PlainState::new();
    for b in blocks {
        let flags = b.validity_flags.as_ref().expect("committed blocks carry flags");
        for (i, raw) in b.envelopes.iter().enumerate() {
            if flags[i] != ValidationCode::Valid {
                continue;
            }
            let Ok(Envelope::Transaction(tx)) = Envelope::decode(raw) else {
                continue;
            };
            let version = Version { block_num: b.header.number, tx_num: i as u64 };
            for w in &tx.rwset.writes {
                match &w.value {
                    Some(v) => {
                        state.insert(w.key.clone(), (v.clone(), version));
                    }
                    None => {
                        state.remove(&w.key);
                    }
                }
            }
        }
    }
    state
}

pub fn world_state_of(ledger: &Ledger) -> PlainState {
    ledger
        .world_state()
        .iter()
        .map(|e| (e.key.clone(), (e.value.clone(), e.version)))
        .collect()
}

/// Peers whose world state differs from the oracle replay of their own
/// blocks, as (peer, channel) pairs. Peers flagged dishonest are skipped.
pub fn replay_mismatches(sim: &Simulation) -> (usize, Vec<(String, String)>) {
    let dishonest = sim.report().dishonest_peers;
    let mut checked = 0;
    let mut bad = Vec::new();
    for p in sim.network().peers() {
        if dishonest.contains(&p.peer_id) {
            continue;
        }
        for ch in p.joined_channels() {
            let l = p.ledger(ch).unwrap();
            checked += 1;
            if replay_valid_writes(l.blocks().as_slice()) != world_state_of(l) {
                bad.push((p.peer_id.clone(), ch.clone()));
            }
        }
    }
    (checked, bad)
}

// ---- write-authority audit -----------------------------------------------

#[derive(Debug, Default)]
pub struct AuditResult {
    pub valid_mutating: usize,
    pub violations: Vec<String>,
}

/// Every VALID transaction that writes must carry a verifying endorsement
/// from a registered peer of `authority`.
pub fn audit_write_authority(sim: &Simulation, authority: &str) -> AuditResult {
    let membership = &sim.network().membership;
    let mut out = AuditResult::default();
    for p in sim.network().peers() {
        for ch in p.joined_channels() {
            for b in p.ledger(ch).unwrap().blocks().iter() {
                let flags = b.validity_flags.as_ref().unwrap();
                for (i, raw) in b.envelopes.iter().enumerate() {
                    let Ok(Envelope::Transaction(tx)) = Envelope::decode(raw) else {
                        continue;
                    };
                    if flags[i] != ValidationCode::Valid || tx.rwset.writes.is_empty() {
                        continue;
                    }
                    out.valid_mutating += 1;
                    let payload = tx.payload();
                    let endorsed = tx.endorsements.iter().any(|e| {
                        membership.identity(&e.endorser_id).is_some_and(|id| {
                            matches!(&id.kind, IdentityKind::Peer { org_id, .. } if org_id == authority)
                                && crypto::verify(&id.verify_key, &payload, &e.signature)
                        })
                    });
                    if !endorsed {
                        out.violations.push(format!(
                            "{}/{ch} block {} tx {i} ({})",
                            p.peer_id, b.header.number, tx.proposal.function
                        ));
                    }
                }
            }
        }
    }
    out
}

// ---- generated workloads ---------------------------------------------------

pub const CITIZENS: usize = 12;

pub fn aadhaar_of(i: usize) -> String {
    format!("50000000{i:03}")
}

/// Three channels, six peers; UIDAI is the write authority everywhere.
pub fn convergence_config() -> SimConfig {
    let org = |id: &str, kind: &str| OrgSpec {
        id: id.into(),
        kind: serde_json::from_value(json!(kind)).unwrap(),
    };
    let channel = |id: &str, members: &[&str]| ChannelSpec {
        id: id.into(),
        members: members.iter().map(|s| s.to_string()).collect(),
        policies: BTreeMap::new(),
    };
    let peer = |id: &str, org: &str, chans: &[&str]| PeerSpec {
        id: id.into(),
        org: org.into(),
        channels: chans.iter().map(|s| s.to_string()).collect(),
        chaincodes: vec!["citizennet".into()],
    };
    let mut clients = vec![
        ClientSpec { id: "admin".into(), org: "UIDAI".into(), role: citizennet::membership::Role::UidaiAdmin, aadhaar: None },
        ClientSpec { id: "admin-2".into(), org: "UIDAI".into(), role: citizennet::membership::Role::UidaiAdmin, aadhaar: None },
        ClientSpec { id: "bankx".into(), org: "BankX".into(), role: citizennet::membership::Role::ThirdParty, aadhaar: None },
        ClientSpec { id: "hospital".into(), org: "Hospitals".into(), role: citizennet::membership::Role::ThirdParty, aadhaar: None },
    ];
    for i in 0..CITIZENS {
        clients.push(ClientSpec {
            id: format!("c-{i:02}"),
            org: "Citizens".into(),
            role: citizennet::membership::Role::Citizen,
            aadhaar: Some(aadhaar_of(i)),
        });
    }
    SimConfig {
        seed: 99,
        epoch_date: chrono::NaiveDate::from_ymd_opt(2021, 1, 17).unwrap(),
        orderer: citizennet::consensus::OrdererConfig::new(5, 1).unwrap(),
        orgs: vec![
            org("UIDAI", "government_body"),
            org("Citizens", "citizen_registry"),
            org("BankX", "private_org"),
            org("Hospitals", "private_org"),
        ],
        channels: vec![
            channel("identity-main", &["UIDAI", "Citizens", "BankX"]),
            channel("health", &["UIDAI", "Citizens", "Hospitals"]),
            channel("finance", &["UIDAI", "Citizens", "BankX"]),
        ],
        peers: vec![
            peer("uidai-p0", "UIDAI", &["identity-main", "health", "finance"]),
            peer("uidai-p1", "UIDAI", &["identity-main", "finance"]),
            peer("citizens-p0", "Citizens", &["identity-main", "health"]),
            peer("bankx-p0", "BankX", &["identity-main", "finance"]),
            peer("hospitals-p0", "Hospitals", &["health"]),
            peer("hospitals-p1", "Hospitals", &["health"]),
        ],
        clients,
    }
}

fn third_party_for(channel: &str) -> (&'static str, &'static str) {
    match channel {
        "health" => ("hospital", "Hospitals"),
        _ => ("bankx", "BankX"),
    }
}

fn random_dob(rng: &mut ChaCha8Rng) -> String {
    let y = rng.gen_range(1995..=2008);
    let m = rng.gen_range(1..=12);
    let d = rng.gen_range(1..=28);
    format!("{d:02}/{m:02}/{y}")
}

/// `mutating` mutating proposals plus a sprinkling of reads, spread over
/// three channels, with frequent same-key collisions. Some are refused at
/// endorsement (duplicate registration, revoking nothing, and so on).
pub fn convergence_scenario(seed: u64, mutating: usize) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channels = ["identity-main", "health", "finance"];
    let mut s = Scenario { name: Some(format!("convergence-{seed}")), steps: vec![] };
    let mut count = 0;
    let mut tick = 0;
    // Everyone is registered on every channel first.
    for ch in channels {
        for i in 0..CITIZENS {
            let args = vec![record(&aadhaar_of(i), &random_dob(&mut rng), "5000")];
            s.push(tick, Some("admin"), propose(ch, "registerCitizen", args, None));
            count += 1;
        }
    }
    while count < mutating {
        tick += 1;
        for _ in 0..rng.gen_range(2..=6) {
            if count >= mutating {
                break;
            }
            let ch = channels[rng.gen_range(0..channels.len())];
            // Half the traffic goes to a few hot records to force conflicts.
            let i = if rng.gen_bool(0.5) { rng.gen_range(0..3) } else { rng.gen_range(0..CITIZENS) };
            let citizen = format!("c-{i:02}");
            let aadhaar = aadhaar_of(i);
            let (third, third_org) = third_party_for(ch);
            let pick = rng.gen_range(0..100);
            let grant = |scope: Value| propose(ch, "grantConsent", vec![json!(third_org), scope], None);
            let (actor, action) = match pick {
                // Racing writers of one record in one batch. Once the
                // citizen is of age only the first can win.
                0..=9 => {
                    let update = || propose(ch, "updateVoteEligibility", vec![json!(aadhaar)], None);
                    s.push(tick, Some("admin"), update());
                    s.push(tick, Some("admin-2"), update());
                    count += 2;
                    let change = vec![json!(aadhaar), json!({ "address": format!("Door {tick}") })];
                    (citizen.as_str(), propose(ch, "requestChange", change, None))
                }
                10..=19 => (citizen.as_str(), grant(json!(["name", "pan", "vote"]))),
                20..=29 => (citizen.as_str(), propose(ch, "revokeConsent", vec![json!(third_org)], None)),
                30..=54 => {
                    let phone = format!("9{:09}", rng.gen_range(0..1_000_000_000u64));
                    (citizen.as_str(), propose(ch, "requestChange", vec![json!(aadhaar), json!({ "phone": phone })], None))
                }
                55..=74 => {
                    let admin = if rng.gen_bool(0.5) { "admin" } else { "admin-2" };
                    (admin, propose(ch, "updateVoteEligibility", vec![json!(aadhaar)], None))
                }
                75..=84 => (citizen.as_str(), propose(ch, "updateVoteEligibility", vec![json!(aadhaar)], None)),
                85..=89 => (third, propose(ch, "updateVoteEligibility", vec![json!(aadhaar)], None)),
                _ => ("admin", propose(ch, "registerCitizen", vec![record(&aadhaar, "01/01/2000", "5000")], None)),
            };
            let actor = actor.to_owned();
            s.push(tick, Some(&actor), action);
            count += 1;
            if rng.gen_bool(0.3) {
                let reader = if rng.gen_bool(0.5) { third } else { "admin" };
                s.push(tick, Some(reader), propose(ch, "viewaadhar", vec![json!(aadhaar)], None));
            }
        }
        // Let time pass so eligibility can change across the run.
        if rng.gen_bool(0.2) {
            s.push(tick, None, Action::AdvanceTicks { ticks: rng.gen_range(30..400) });
        }
    }
    s
}

/// Attempts by citizens and third parties to write citizen assets directly,
/// mixed with legitimate traffic.
pub fn write_authority_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ch = "identity-main";
    let mut s = Scenario { name: Some(format!("write-authority-{seed}")), steps: vec![] };
    let targets = ["12345678911", "98765432101"];
    for (i, a) in targets.iter().enumerate() {
        s.push(0, Some("admin"), propose(ch, "registerCitizen", vec![record(a, "15/08/2003", "522309")], Some(format!("reg-{i}"))));
    }
    let attackers = ["citizen-1", "citizen-2", "bankx", "banky"];
    for tick in 2..12u64 {
        for n in 0..rng.gen_range(2..5) {
            let actor = attackers[rng.gen_range(0..attackers.len())];
            // Never the attacker's own record: owners may legitimately ask
            // for an eligibility update.
            let target = match actor {
                "citizen-1" => targets[1],
                "citizen-2" => targets[0],
                _ => targets[rng.gen_range(0..targets.len())],
            };
            let mut forged = record(target, "01/01/1990", "000000");
            forged["vote"] = json!("Eligible");
            forged["voter_id"] = json!("V-forged");
            let label = Some(format!("t{tick}-{n}"));
            let action = match rng.gen_range(0..7) {
                // The contract itself refuses these at endorsement.
                0 => propose(ch, "registerCitizen", vec![forged], label),
                1 => propose(ch, "updateVoteEligibility", vec![json!(target)], label),
                // Hand-built writes endorsed by the attacker's own org.
                2 | 3 => {
                    let peer = if actor.starts_with("citizen") { "citizens-p0" } else { "bankx-p0" };
                    Action::Forge(Forge {
                        channel: ch.into(),
                        chaincode: "citizennet".into(),
                        function: "registerCitizen".into(),
                        args: Args(vec![]),
                        writes: vec![ForgedWrite { key: None, aadhaar: Some(target.into()), value: forged }],
                        endorsers: vec![peer.into()],
                        corrupt_signature: false,
                        label,
                    })
                }
                // Writes smuggled under a read-only function name.
                4 => Action::Forge(Forge {
                    channel: ch.into(),
                    chaincode: "citizennet".into(),
                    function: "viewaadhar".into(),
                    args: Args(vec![json!(target)]),
                    writes: vec![ForgedWrite { key: None, aadhaar: Some(target.into()), value: forged }],
                    endorsers: vec!["bankx-p0".into(), "citizens-p0".into()],
                    corrupt_signature: false,
                    label,
                }),
                // A UIDAI endorsement that does not verify.
                5 => Action::Forge(Forge {
                    channel: ch.into(),
                    chaincode: "citizennet".into(),
                    function: "registerCitizen".into(),
                    args: Args(vec![]),
                    writes: vec![ForgedWrite { key: None, aadhaar: Some(target.into()), value: forged }],
                    endorsers: vec!["uidai-p0".into()],
                    corrupt_signature: true,
                    label,
                }),
                // Legitimate citizen traffic.
                _ => {
                    let (citizen, own) = if rng.gen_bool(0.5) { ("citizen-1", targets[0]) } else { ("citizen-2", targets[1]) };
                    s.push(tick, Some(citizen), propose(ch, "grantConsent", vec![json!("BankX"), json!(["name"])], None));
                    s.push(tick, Some(citizen), propose(ch, "requestChange", vec![json!(own), json!({"phone": "9000000000"})], None));
                    continue;
                }
            };
            s.push(tick, Some(actor), action);
        }
    }
    s
}

// ---- calendar oracle ------------------------------------------------------

pub fn is_leap(y: i64) -> bool {
    (y % 4 == 0 && y % 100 != 0) || y % 400 == 0
}

pub fn days_in_month(y: i64, m: u32) -> u32 {
    match m {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap(y) => 29,
        2 => 28,
        _ => unreachable!(),
    }
}

/// Add `days` to a civil date by walking month lengths.
pub fn add_days(mut y: i64, mut m: u32, mut d: u32, mut days: u64) -> (i64, u32, u32) {
    while days > 0 {
        let left_in_month = (days_in_month(y, m) - d) as u64;
        if days <= left_in_month {
            d += days as u32;
            break;
        }
        days -= left_in_month + 1;
        d = 1;
        m += 1;
        if m > 12 {
            m = 1;
            y += 1;
        }
    }
    (y, m, d)
}

/// Days from (y1,m1,d1) forward to (y2,m2,d2), counting one at a time.
pub fn days_between(from: (i64, u32, u32), to: (i64, u32, u32)) -> u64 {
    let mut n = 0;
    let mut cur = from;
    while cur < to {
        cur = add_days(cur.0, cur.1, cur.2, 1);
        n += 1;
    }
    n
}

/// Date on which someone born on (y, m, d) may first vote. A 29 February
/// birthday falls on 1 March in non-leap years.
pub fn eighteenth_birthday(y: i64, m: u32, d: u32) -> (i64, u32, u32) {
    let ty = y + 18;
    if m == 2 && d == 29 && !is_leap(ty) {
        (ty, 3, 1)
    } else {
        (ty, m, d)
    }
}

/// Walk a committed chain in order, tracking key versions naively. A VALID
/// transaction must have read exactly the current versions; an
/// MVCC_CONFLICT must have read at least one stale one.
pub fn serial_order_violations(blocks: &[Block]) -> Vec<String> {
    let mut versions: BTreeMap<String, Version> = BTreeMap::new();
    let mut out = Vec::new();
    for b in blocks {
        let flags = b.validity_flags.as_ref().unwrap();
        for (i, raw) in b.envelopes.iter().enumerate() {
            let Ok(Envelope::Transaction(tx)) = Envelope::decode(raw) else {
                continue;
            };
            let fresh = tx.rwset.reads.iter().all(|r| versions.get(&r.key).copied() == r.version);
            let at = || format!("block {} tx {i} {}", b.header.number, flags[i]);
            match flags[i] {
                ValidationCode::Valid if !fresh => out.push(at() + " read stale versions"),
                ValidationCode::MvccConflict if fresh => out.push(at() + " read only current versions"),
                _ => {}
            }
            if flags[i] == ValidationCode::Valid {
                let version = Version { block_num: b.header.number, tx_num: i as u64 };
                for w in &tx.rwset.writes {
                    match w.value {
                        Some(_) => versions.insert(w.key.clone(), version),
                        None => versions.remove(&w.key),
                    };
                }
            }
        }
    }
    out
}
