use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde_json::Value;

use super::config::SimConfig;
use super::diff::{diff_chains, ChainView, DivergenceReport};
use super::query::{render_block, render_history, render_state, QueryKind};
use super::report::{
    AssertionResult, ChannelSummary, SimReport, SyncFailure, TamperRecord, TxError, TxKind,
    TxRecord,
};
use super::scenario::{Action, Expectation, Forge, Propose, Scenario, ScenarioStep};
use super::tamper::{apply_mutation, Mutation};
use super::SimError;
use crate::citizen::{self, CitizenAsset, CitizenContract};
use crate::consensus::{collect_endorsements, ConsensusError, EndorsementEnv, Orderer};
use crate::crypto::{self, seed_from_label, IdentityKeys, Signature};
use crate::encoding::{canonical_decode, from_canonical, to_canonical};
use crate::ledger::{
    endorsement_payload, verify_chain, Block, ChainCheck, Endorsement, EndorsedTransaction,
    Envelope, KVWrite, Ledger, ReadWriteSet, StateEntry, TransactionProposal,
};
use crate::membership::{ClientIdentity, Network, PeerNode};
use crate::runtime::{ContractCatalog, FunctionClass};

#[derive(Clone, Debug)]
struct Client {
    identity: ClientIdentity,
    keys: IdentityKeys,
    nonce: u64,
}

#[derive(Clone, Debug)]
struct InFlight {
    deliver_at: u64,
    channel: String,
    block: Block,
}

/// Outcome of an isolation probe over every (peer, channel, key) triple.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IsolationReport {
    pub attempts: usize,
    pub member_reads: usize,
    pub refused: usize,
    /// Reads that succeeded through a peer that is not on the channel.
    pub leaks: Vec<(String, String, String)>,
}

/// The whole simulated network: membership, peers with their replicas, the
/// orderer, and the clients scenarios act through.
#[derive(Clone)]
pub struct Simulation {
    config: SimConfig,
    network: Network,
    orderer: Orderer,
    clients: BTreeMap<String, Client>,
    now: u64,
    in_flight: Vec<InFlight>,
    records: Vec<TxRecord>,
    tx_index: HashMap<String, usize>,
    labels: HashMap<String, usize>,
    assertions: Vec<AssertionResult>,
    sync_failures: Vec<SyncFailure>,
    tampering: Vec<TamperRecord>,
    dishonest: BTreeSet<String>,
    scenario_name: Option<String>,
}

fn consensus_code(e: &ConsensusError) -> String {
    match e {
        ConsensusError::Contract(c) => c.code().to_owned(),
        ConsensusError::InvalidPolicy { .. } => "InvalidPolicy".into(),
        ConsensusError::InvalidOrdererConfig => "InvalidOrdererConfig".into(),
        ConsensusError::NotAnEndorser { .. } => "NotAnEndorser".into(),
        ConsensusError::NotInChannel { .. } => "NotInChannel".into(),
        ConsensusError::BadClientSignature(_) => "BadClientSignature".into(),
        ConsensusError::CreatorNotMember { .. } => "CreatorNotMember".into(),
        ConsensusError::EndorsementMismatch(_) => "EndorsementMismatch".into(),
        ConsensusError::UnknownChannel(_) => "UnknownChannel".into(),
        ConsensusError::MalformedTransaction(_) => "MalformedTransaction".into(),
    }
}

fn decode_response(bytes: &[u8]) -> Value {
    match canonical_decode(bytes) {
        Ok(v) => v,
        Err(_) => serde_json::json!({ "hex": hex::encode(bytes) }),
    }
}

pub fn default_catalog() -> ContractCatalog {
    let mut catalog = ContractCatalog::default();
    catalog.register(CitizenContract);
    catalog
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self, SimError> {
        let catalog = default_catalog();
        config.validate(&catalog)?;
        let domain = format!("citizennet-sim/{}", config.seed);
        let seed = |label: String| seed_from_label(domain.as_bytes(), &label);

        let mut network = Network::new(catalog);
        for o in &config.orgs {
            network
                .membership
                .register_org(&o.id, o.kind, &seed(format!("org/{}", o.id)))?;
        }
        let mut orderer = Orderer::new(config.orderer);
        for c in &config.channels {
            let policies = config.channel_policies(c, &network.catalog)?;
            let cfg = network
                .membership
                .create_channel(&c.id, c.members.clone(), policies)?;
            orderer.register_channel(&c.id, &Block::genesis(cfg).header);
        }
        for p in &config.peers {
            network.add_peer(&p.id, &p.org, &seed(format!("peer/{}", p.id)))?;
            for cc in &p.chaincodes {
                network.install_chaincode(&p.id, cc)?;
            }
            for ch in &p.channels {
                network.join_channel(&p.id, ch)?;
            }
        }
        let mut clients = BTreeMap::new();
        for c in &config.clients {
            let (identity, keys) = network
                .membership
                .register_client(
                    &c.org,
                    c.role,
                    c.aadhaar.as_deref(),
                    &seed(format!("client/{}", c.id)),
                )
                .map_err(|e| SimError::Config(format!("client {}: {e}", c.id)))?;
            clients.insert(c.id.clone(), Client { identity, keys, nonce: 0 });
        }
        Ok(Simulation {
            config,
            network,
            orderer,
            clients,
            now: 0,
            in_flight: Vec::new(),
            records: Vec::new(),
            tx_index: HashMap::new(),
            labels: HashMap::new(),
            assertions: Vec::new(),
            sync_failures: Vec::new(),
            tampering: Vec::new(),
            dishonest: BTreeSet::new(),
            scenario_name: None,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn records(&self) -> &[TxRecord] {
        &self.records
    }

    pub fn record(&self, label: &str) -> Option<&TxRecord> {
        self.labels.get(label).map(|i| &self.records[*i])
    }

    pub fn client_identity(&self, actor: &str) -> Option<&ClientIdentity> {
        self.clients.get(actor).map(|c| &c.identity)
    }

    pub fn channel_ids(&self) -> Vec<String> {
        self.config.channels.iter().map(|c| c.id.clone()).collect()
    }

    fn peer(&self, peer_id: &str) -> Result<&PeerNode, SimError> {
        self.network
            .peer(peer_id)
            .ok_or_else(|| SimError::NoSuchPeer(peer_id.to_owned()))
    }

    pub fn ledger(&self, peer_id: &str, channel_id: &str) -> Result<&Ledger, SimError> {
        self.peer(peer_id)?
            .ledger(channel_id)
            .ok_or_else(|| SimError::NotJoined {
                peer: peer_id.to_owned(),
                channel: channel_id.to_owned(),
            })
    }

    /// Peers holding a replica of `channel_id`, in id order.
    pub fn channel_peers(&self, channel_id: &str) -> Vec<&PeerNode> {
        self.network
            .peers()
            .filter(|p| p.has_joined(channel_id))
            .collect()
    }

    fn is_idle(&self) -> bool {
        self.in_flight.is_empty() && !self.orderer.has_pending()
    }

    // ---- event loop -------------------------------------------------

    /// Execute `scenario` to completion, then keep ticking until every
    /// submitted transaction has been committed.
    pub fn run(&mut self, scenario: &Scenario) -> Result<(), SimError> {
        scenario.check_order()?;
        if scenario.name.is_some() {
            self.scenario_name = scenario.name.clone();
        }
        let steps = &scenario.steps;
        let mut offset = 0u64;
        let mut next = 0usize;
        loop {
            self.deliver_due();
            while next < steps.len() && steps[next].at_tick + offset <= self.now {
                if let Action::AdvanceTicks { ticks } = steps[next].action {
                    offset += ticks;
                } else {
                    self.execute(next, &steps[next])
                        .map_err(|e| SimError::Step { step: next, source: Box::new(e) })?;
                }
                next += 1;
            }
            self.cut_blocks();
            let done = next >= steps.len();
            if done && self.is_idle() {
                return Ok(());
            }
            let mut t = self.now + 1;
            if self.is_idle() {
                // Nothing can happen before the next step is due.
                t = t.max(steps[next].at_tick + offset);
            }
            self.now = t;
        }
    }

    /// Advance one tick without executing any step.
    pub fn tick(&mut self) {
        self.cut_blocks();
        self.now += 1;
        self.deliver_due();
    }

    /// Tick until nothing is pending or in flight.
    pub fn settle(&mut self) {
        self.cut_blocks();
        while !self.is_idle() {
            self.tick();
            self.cut_blocks();
        }
    }

    fn cut_blocks(&mut self) {
        for (channel, block) in self.orderer.tick(self.now) {
            self.in_flight.push(InFlight {
                deliver_at: self.now + 1,
                channel,
                block,
            });
        }
    }

    fn deliver_due(&mut self) {
        let now = self.now;
        let (due, later): (Vec<_>, Vec<_>) =
            self.in_flight.drain(..).partition(|f| f.deliver_at <= now);
        self.in_flight = later;
        for f in due {
            self.deliver(&f.channel, f.block);
        }
    }

    fn deliver(&mut self, channel: &str, block: Block) {
        let number = block.header.number;
        let tx_ids: Vec<Option<String>> = block
            .envelopes
            .iter()
            .map(|raw| match Envelope::decode(raw) {
                Ok(Envelope::Transaction(tx)) => Some(tx.proposal.tx_id),
                _ => None,
            })
            .collect();
        let peer_ids: Vec<String> = self
            .channel_peers(channel)
            .iter()
            .map(|p| p.peer_id.clone())
            .collect();
        for peer_id in peer_ids {
            match self.network.deliver_block(&peer_id, channel, block.clone()) {
                Ok(flags) => {
                    for (tx_id, flag) in tx_ids.iter().zip(flags) {
                        let Some(idx) = tx_id.as_ref().and_then(|t| self.tx_index.get(t)) else {
                            continue;
                        };
                        let rec = &mut self.records[*idx];
                        // A replayed tx_id keeps the code of its first block.
                        if rec.block.is_some_and(|b| b != number) {
                            continue;
                        }
                        rec.block = Some(number);
                        rec.codes.insert(peer_id.clone(), flag);
                    }
                }
                Err(e) => self.sync_failures.push(SyncFailure {
                    tick: self.now,
                    peer: peer_id,
                    channel: channel.to_owned(),
                    block: number,
                    error: e.to_string(),
                }),
            }
        }
    }

    fn execute(&mut self, index: usize, step: &ScenarioStep) -> Result<(), SimError> {
        let actor = || {
            step.actor
                .as_deref()
                .ok_or_else(|| SimError::ScenarioParse("step needs an actor".into()))
        };
        match &step.action {
            Action::Propose(p) => {
                self.propose(Some(index), actor()?, p)?;
            }
            Action::Forge(f) => {
                self.forge(Some(index), actor()?, f)?;
            }
            Action::AdvanceTicks { .. } => {}
            Action::Tamper { peer, channel, block, offset, mask, forge } => {
                let m = if *forge {
                    Mutation::Forge { offset: *offset }
                } else {
                    Mutation::FlipByte { offset: *offset, mask: *mask }
                };
                self.tamper(peer, channel, *block, m)?;
            }
            Action::Join { peer, channel } => {
                self.network.join_channel(peer, channel)?;
            }
            Action::RevokeClient => {
                let actor = actor()?;
                let c = self
                    .clients
                    .get(actor)
                    .ok_or_else(|| SimError::UnknownActor(actor.to_owned()))?;
                self.network.membership.remove_identity(&c.identity.identity_id);
            }
            Action::Expect(e) => {
                let result = self.evaluate(e);
                self.assertions.push(AssertionResult {
                    step: index,
                    tick: self.now,
                    expectation: e.clone(),
                    passed: result.is_ok(),
                    detail: result.err().unwrap_or_default(),
                });
            }
        }
        Ok(())
    }

    // ---- clients ----------------------------------------------------

    fn client_mut(&mut self, actor: &str) -> Result<&mut Client, SimError> {
        self.clients
            .get_mut(actor)
            .ok_or_else(|| SimError::UnknownActor(actor.to_owned()))
    }

    fn next_proposal(
        &mut self,
        actor: &str,
        channel: &str,
        chaincode: &str,
        function: &str,
        args: Vec<String>,
    ) -> Result<TransactionProposal, SimError> {
        let now = self.now;
        let c = self.client_mut(actor)?;
        c.nonce += 1;
        Ok(TransactionProposal::signed(
            &c.keys, channel, chaincode, function, args, c.nonce, now,
        ))
    }

    /// One endorsing peer per policy org, in org then peer id order, until
    /// the policy threshold is met.
    fn default_endorsers(&self, channel: &str, chaincode: &str, class: FunctionClass) -> Vec<String> {
        let Some(policy) = self
            .network
            .membership
            .channel(channel)
            .and_then(|c| c.policy_for(chaincode, class))
        else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for org in policy.orgs() {
            if out.len() == policy.threshold() {
                break;
            }
            if let Some(p) = self
                .network
                .peers()
                .find(|p| p.org_id == *org && p.is_endorser(channel, chaincode))
            {
                out.push(p.peer_id.clone());
            }
        }
        out
    }

    /// Replace every argument of the form `${label.path.to.field}` with
    /// that field of the labelled transaction's response.
    fn resolve_args(&self, args: Vec<String>) -> Result<Vec<String>, SimError> {
        args.into_iter()
            .map(|a| {
                let Some(reference) = a.strip_prefix("${").and_then(|r| r.strip_suffix('}')) else {
                    return Ok(a);
                };
                let mut parts = reference.split('.');
                let label = parts.next().unwrap_or_default();
                let rec = self
                    .record(label)
                    .ok_or_else(|| SimError::ScenarioParse(format!("no transaction labelled {label:?}")))?;
                let mut v = rec.response.as_ref();
                for part in parts {
                    v = v.and_then(|v| v.get(part));
                }
                match v {
                    Some(Value::String(s)) => Ok(s.clone()),
                    Some(other) => Ok(other.to_string()),
                    None => Err(SimError::ScenarioParse(format!("{reference} has no value"))),
                }
            })
            .collect()
    }

    fn push_record(&mut self, rec: TxRecord) -> usize {
        let idx = self.records.len();
        if let Some(l) = &rec.label {
            self.labels.insert(l.clone(), idx);
        }
        if rec.submitted {
            self.tx_index.entry(rec.tx_id.clone()).or_insert(idx);
        }
        self.records.push(rec);
        idx
    }

    /// Endorse a proposal and, if requested, submit it for ordering.
    /// Endorsement failures are recorded, not returned.
    pub fn propose(&mut self, step: Option<usize>, actor: &str, p: &Propose) -> Result<usize, SimError> {
        let class = self.network.catalog.function_class(&p.chaincode, &p.function);
        let mutating = class != Some(FunctionClass::ReadOnly);
        let endorsers = match &p.endorsers {
            Some(list) => list.clone(),
            None => self.default_endorsers(
                &p.channel,
                &p.chaincode,
                class.unwrap_or(FunctionClass::Mutating),
            ),
        };
        for e in &endorsers {
            self.peer(e)?;
        }
        let args = self.resolve_args(p.args.to_strings())?;
        let proposal = self.next_proposal(actor, &p.channel, &p.chaincode, &p.function, args)?;
        let mut rec = TxRecord {
            step,
            tick: self.now,
            kind: TxKind::Propose,
            label: p.label.clone(),
            actor: actor.to_owned(),
            channel: p.channel.clone(),
            chaincode: p.chaincode.clone(),
            function: p.function.clone(),
            tx_id: proposal.tx_id.clone(),
            endorsers: endorsers.clone(),
            endorsing_orgs: Vec::new(),
            mutating,
            submitted: false,
            response: None,
            error: None,
            block: None,
            codes: BTreeMap::new(),
        };
        let peers: Vec<&PeerNode> = endorsers
            .iter()
            .map(|e| self.network.peer(e).expect("checked above"))
            .collect();
        let env = EndorsementEnv {
            membership: &self.network.membership,
            catalog: &self.network.catalog,
            epoch: self.config.epoch_date,
        };
        let outcome = if peers.is_empty() {
            Err(TxError {
                code: "NoEndorsers".into(),
                message: format!("no endorsing peer for {} on {}", p.chaincode, p.channel),
            })
        } else {
            collect_endorsements(env, &proposal, &peers).map_err(|e| TxError {
                code: consensus_code(&e),
                message: e.to_string(),
            })
        };
        match outcome {
            Ok(tx) => {
                rec.response = Some(decode_response(&tx.response));
                rec.endorsing_orgs = tx.endorsements.iter().map(|e| e.org_id.clone()).collect();
                if p.submit.unwrap_or(mutating) {
                    match self.orderer.submit(tx) {
                        Ok(()) => rec.submitted = true,
                        Err(e) => {
                            rec.error = Some(TxError {
                                code: consensus_code(&e),
                                message: e.to_string(),
                            })
                        }
                    }
                }
            }
            Err(e) => rec.error = Some(e),
        }
        Ok(self.push_record(rec))
    }

    /// Submit a transaction with a hand-built read/write set signed by the
    /// given peers, bypassing simulation.
    pub fn forge(&mut self, step: Option<usize>, actor: &str, f: &Forge) -> Result<usize, SimError> {
        let mut writes = Vec::new();
        for w in &f.writes {
            let key = match (&w.key, &w.aadhaar) {
                (Some(k), None) => k.clone(),
                (None, Some(a)) => citizen::asset_key(a).map_err(|e| SimError::ScenarioParse(e.to_string()))?,
                _ => return Err(SimError::ScenarioParse("forged write needs exactly one of key/aadhaar".into())),
            };
            let value = match &w.value {
                Value::Null => None,
                v => Some(to_canonical(v).map_err(|e| SimError::ScenarioParse(e.to_string()))?),
            };
            writes.push(KVWrite { key, value });
        }
        writes.sort_by(|a, b| a.key.cmp(&b.key));
        writes.dedup_by(|a, b| a.key == b.key);
        let rwset = ReadWriteSet { reads: Vec::new(), writes };
        let args = self.resolve_args(f.args.to_strings())?;
        let proposal = self.next_proposal(actor, &f.channel, &f.chaincode, &f.function, args)?;
        let response = Vec::new();
        let payload = endorsement_payload(&proposal, &rwset, &response);
        let mut endorsements = Vec::new();
        for id in &f.endorsers {
            let peer = self.peer(id)?;
            endorsements.push(Endorsement {
                endorser_id: peer.keys.identity_id.clone(),
                org_id: peer.org_id.clone(),
                signature: crypto::sign(&peer.keys.signing_key, &payload),
            });
        }
        if f.corrupt_signature {
            if let Some(e) = endorsements.first_mut() {
                let mut bytes = e.signature.as_bytes().to_vec();
                bytes[0] ^= 0x01;
                e.signature = Signature::from_bytes(bytes);
            }
        }
        let tx = EndorsedTransaction {
            proposal,
            rwset,
            response,
            endorsements,
        };
        let mut rec = TxRecord {
            step,
            tick: self.now,
            kind: TxKind::Forge,
            label: f.label.clone(),
            actor: actor.to_owned(),
            channel: f.channel.clone(),
            chaincode: f.chaincode.clone(),
            function: f.function.clone(),
            tx_id: tx.proposal.tx_id.clone(),
            endorsers: f.endorsers.clone(),
            endorsing_orgs: tx.endorsements.iter().map(|e| e.org_id.clone()).collect(),
            mutating: true,
            submitted: false,
            response: None,
            error: None,
            block: None,
            codes: BTreeMap::new(),
        };
        match self.orderer.submit(tx) {
            Ok(()) => rec.submitted = true,
            Err(e) => {
                rec.error = Some(TxError {
                    code: consensus_code(&e),
                    message: e.to_string(),
                })
            }
        }
        Ok(self.push_record(rec))
    }

    // ---- operator tools --------------------------------------------

    /// Mutate `peer_id`'s local copy of a block behind the ledger's back
    /// and mark the peer dishonest.
    pub fn tamper(&mut self, peer_id: &str, channel: &str, block: u64, m: Mutation) -> Result<(), SimError> {
        self.peer(peer_id)?;
        let no_block = || SimError::NoSuchBlock {
            peer: peer_id.to_owned(),
            channel: channel.to_owned(),
            block,
        };
        let ledger = self
            .network
            .peer_mut(peer_id)
            .expect("checked")
            .ledger_mut(channel)
            .ok_or_else(no_block)?;
        let b = ledger.blocks_mut().block_mut(block).ok_or_else(no_block)?;
        let len = b.image_len();
        if !apply_mutation(b, m) {
            return Err(SimError::OffsetOutOfRange { offset: mutation_offset(m), len });
        }
        self.dishonest.insert(peer_id.to_owned());
        self.tampering.push(TamperRecord {
            tick: self.now,
            peer: peer_id.to_owned(),
            channel: channel.to_owned(),
            block,
            mutation: m,
        });
        Ok(())
    }

    pub fn verify(&self, peer_id: &str, channel: &str) -> Result<ChainCheck, SimError> {
        Ok(verify_chain(self.ledger(peer_id, channel)?.blocks().as_slice()))
    }

    pub fn diff_peers(&self, channel: &str) -> Result<DivergenceReport, SimError> {
        if self.network.membership.channel(channel).is_none() {
            return Err(SimError::NoSuchChannel(channel.to_owned()));
        }
        let views: BTreeMap<String, ChainView<'_>> = self
            .channel_peers(channel)
            .into_iter()
            .map(|p| {
                let l = p.ledger(channel).expect("joined");
                (
                    p.peer_id.clone(),
                    ChainView {
                        blocks: l.blocks().as_slice(),
                        state_hash: Some(l.state_hash()),
                    },
                )
            })
            .collect();
        Ok(diff_chains(channel, &views))
    }

    pub fn query(&self, peer_id: &str, channel: &str, kind: QueryKind, key: &str) -> Result<Value, SimError> {
        let ledger = self.ledger(peer_id, channel)?;
        match kind {
            QueryKind::State => render_state(ledger, &super::query::resolve_key(key)),
            QueryKind::History => render_history(ledger, &super::query::resolve_key(key)),
            QueryKind::Block => {
                let n: u64 = key
                    .parse()
                    .map_err(|_| SimError::Usage(format!("block height {key:?} is not a number")))?;
                ledger
                    .blocks()
                    .get(n)
                    .map(render_block)
                    .ok_or_else(|| SimError::NotFound(format!("block {n}")))
            }
        }
    }

    /// Committed state entry through one peer; refused unless the peer
    /// holds a replica of the channel.
    pub fn probe_read(&self, peer_id: &str, channel: &str, key: &str) -> Result<Option<&StateEntry>, SimError> {
        let peer = self.peer(peer_id)?;
        let member = self
            .network
            .membership
            .channel(channel)
            .is_some_and(|c| c.member_orgs.contains(&peer.org_id));
        if !member {
            return Err(SimError::NotJoined {
                peer: peer_id.to_owned(),
                channel: channel.to_owned(),
            });
        }
        Ok(self.ledger(peer_id, channel)?.ws_get(key))
    }

    /// Try every key of every channel through every peer.
    pub fn isolation_probe(&self) -> IsolationReport {
        let mut keys: BTreeSet<String> = BTreeSet::new();
        for p in self.network.peers() {
            for ch in p.joined_channels() {
                let l = p.ledger(ch).expect("joined");
                keys.extend(l.world_state().iter().map(|e| e.key.clone()));
            }
        }
        let mut out = IsolationReport::default();
        for p in self.network.peers() {
            for ch in self.channel_ids() {
                for key in &keys {
                    out.attempts += 1;
                    match self.probe_read(&p.peer_id, &ch, key) {
                        Ok(_) if !p.has_joined(&ch) => {
                            out.leaks.push((p.peer_id.clone(), ch.clone(), key.clone()))
                        }
                        Ok(_) => out.member_reads += 1,
                        Err(_) => out.refused += 1,
                    }
                }
            }
        }
        out
    }

    // ---- expectations ----------------------------------------------

    fn labelled(&self, label: &str) -> Result<&TxRecord, String> {
        self.record(label).ok_or_else(|| format!("no transaction labelled {label:?}"))
    }

    fn target_peers(&self, channel: &str, peer: &Option<String>) -> Result<Vec<String>, String> {
        let peers: Vec<String> = match peer {
            Some(p) => vec![p.clone()],
            None => self.channel_peers(channel).iter().map(|p| p.peer_id.clone()).collect(),
        };
        if peers.is_empty() {
            return Err(format!("no peer holds channel {channel}"));
        }
        Ok(peers)
    }

    fn evaluate(&self, e: &Expectation) -> Result<(), String> {
        match e {
            Expectation::TxCode { label, code } => {
                let rec = self.labelled(label)?;
                if rec.codes.is_empty() {
                    return Err(format!("{label} not committed (error: {:?})", rec.error));
                }
                match rec.codes.iter().find(|(_, c)| *c != code) {
                    None => Ok(()),
                    Some((peer, c)) => Err(format!("{label}: {peer} assigned {c}, expected {code}")),
                }
            }
            Expectation::ResponseOk { label } => match &self.labelled(label)?.error {
                None => Ok(()),
                Some(err) => Err(format!("{label} failed: {}", err.message)),
            },
            Expectation::ResponseError { label, code } => match &self.labelled(label)?.error {
                Some(err) if err.code == *code => Ok(()),
                Some(err) => Err(format!("{label} failed with {}, expected {code}", err.code)),
                None => Err(format!("{label} succeeded, expected {code}")),
            },
            Expectation::ResponseEquals { label, value } => {
                let rec = self.labelled(label)?;
                if rec.response.as_ref() == Some(value) {
                    Ok(())
                } else {
                    Err(format!("{label} response {:?}", rec.response))
                }
            }
            Expectation::ResponseFields { label, fields } => {
                let rec = self.labelled(label)?;
                let got: Option<BTreeSet<&str>> = rec
                    .response
                    .as_ref()
                    .and_then(Value::as_object)
                    .map(|m| m.keys().map(String::as_str).collect());
                let want: BTreeSet<&str> = fields.iter().map(String::as_str).collect();
                if got.as_ref() == Some(&want) {
                    Ok(())
                } else {
                    Err(format!("{label} response fields {got:?}, expected {want:?}"))
                }
            }
            Expectation::ResponseLen { label, len } => {
                let rec = self.labelled(label)?;
                match rec.response.as_ref().and_then(Value::as_array) {
                    Some(a) if a.len() == *len => Ok(()),
                    other => Err(format!("{label} response length {:?}, expected {len}", other.map(Vec::len))),
                }
            }
            Expectation::StateField { channel, aadhaar, field, peer, value, contains } => {
                let key = citizen::asset_key(aadhaar).map_err(|e| e.to_string())?;
                for p in self.target_peers(channel, peer)? {
                    let ledger = self.ledger(&p, channel).map_err(|e| e.to_string())?;
                    let got = match ledger.ws_get(&key) {
                        None => None,
                        Some(entry) => {
                            let asset: CitizenAsset = from_canonical(&entry.value)
                                .map_err(|e| format!("{p}: record does not decode: {e}"))?;
                            asset.to_fields().get(field).cloned()
                        }
                    };
                    if let Some(want) = value {
                        let ok = match (want, &got) {
                            (Value::Null, None) => true,
                            (w, Some(g)) => w == g,
                            _ => false,
                        };
                        if !ok {
                            return Err(format!("{p}: {field} = {got:?}, expected {want}"));
                        }
                    }
                    if let Some(needle) = contains {
                        let hit = got.as_ref().and_then(Value::as_str).is_some_and(|s| s.contains(needle.as_str()));
                        if !hit {
                            return Err(format!("{p}: {field} = {got:?} does not contain {needle:?}"));
                        }
                    }
                }
                Ok(())
            }
            Expectation::HistoryLen { channel, aadhaar, len, peer } => {
                let key = citizen::asset_key(aadhaar).map_err(|e| e.to_string())?;
                for p in self.target_peers(channel, peer)? {
                    let ledger = self.ledger(&p, channel).map_err(|e| e.to_string())?;
                    let got = ledger.get_history_for_key(&key).len();
                    if got != *len {
                        return Err(format!("{p}: history has {got} versions, expected {len}"));
                    }
                }
                Ok(())
            }
            Expectation::ChainHeight { channel, height, peer } => {
                for p in self.target_peers(channel, peer)? {
                    let got = self.ledger(&p, channel).map_err(|e| e.to_string())?.height();
                    if got != *height {
                        return Err(format!("{p}: height {got}, expected {height}"));
                    }
                }
                Ok(())
            }
            Expectation::Converged { channel } => {
                let peers = self.channel_peers(channel);
                let mut seen = BTreeSet::new();
                for p in &peers {
                    let l = p.ledger(channel).expect("joined");
                    let tip = l.blocks().tip().map(|b| b.header.hash());
                    seen.insert((tip, l.state_hash()));
                }
                if seen.len() <= 1 {
                    Ok(())
                } else {
                    Err(format!("{} distinct (tip, state) pairs on {channel}", seen.len()))
                }
            }
            Expectation::Verify { peer, channel, first_bad } => {
                let got = match self.verify(peer, channel).map_err(|e| e.to_string())? {
                    ChainCheck::Ok => None,
                    ChainCheck::FirstBadHeight(h) => Some(h),
                };
                if got == *first_bad {
                    Ok(())
                } else {
                    Err(format!("{peer}: first bad height {got:?}, expected {first_bad:?}"))
                }
            }
            Expectation::Divergent { channel, peers } => {
                let report = self.diff_peers(channel).map_err(|e| e.to_string())?;
                let got: BTreeSet<&str> = report.divergent_peers().into_iter().collect();
                let want: BTreeSet<&str> = peers.iter().map(String::as_str).collect();
                if got == want {
                    Ok(())
                } else {
                    Err(format!("divergent peers {got:?}, expected {want:?}"))
                }
            }
        }
    }

    // ---- report ----------------------------------------------------

    pub fn report(&self) -> SimReport {
        let mut channels = BTreeMap::new();
        let mut divergence = BTreeMap::new();
        for ch in self.channel_ids() {
            let mut s = ChannelSummary::default();
            for p in self.channel_peers(&ch) {
                let l = p.ledger(&ch).expect("joined");
                s.heights.insert(p.peer_id.clone(), l.height());
                if let Some(tip) = l.blocks().tip() {
                    s.tip_hashes.insert(p.peer_id.clone(), tip.header.hash());
                }
                s.state_hashes.insert(p.peer_id.clone(), l.state_hash());
            }
            channels.insert(ch.clone(), s);
            divergence.insert(ch.clone(), self.diff_peers(&ch).expect("known channel"));
        }
        SimReport {
            scenario: self.scenario_name.clone(),
            seed: self.config.seed,
            final_tick: self.now,
            channels,
            transactions: self.records.clone(),
            assertions: self.assertions.clone(),
            sync_failures: self.sync_failures.clone(),
            tampering: self.tampering.clone(),
            dishonest_peers: self.dishonest.clone(),
            divergence,
        }
    }
}

fn mutation_offset(m: Mutation) -> usize {
    match m {
        Mutation::FlipByte { offset, .. } | Mutation::Forge { offset } => offset,
    }
}
