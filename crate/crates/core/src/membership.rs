//! Organizations, peers, client identities, channels and chaincode
//! installation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::{validate_block, EndorsementPolicy};
use crate::crypto::{self, IdentityKeys, VerifyKey};
use crate::ledger::{Block, Ledger, LedgerError, ValidationCode};
use crate::runtime::{ContractCatalog, FunctionClass};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MembershipError {
    #[error("channel {0} already exists")]
    DuplicateChannel(String),
    #[error("unknown channel {0}")]
    UnknownChannel(String),
    #[error("organization {0} already registered")]
    DuplicateOrg(String),
    #[error("unknown organization {0}")]
    UnknownOrg(String),
    #[error("peer {0} already exists")]
    DuplicatePeer(String),
    #[error("unknown peer {0}")]
    UnknownPeer(String),
    #[error("org {org} of peer {peer} is not a member of channel {channel}")]
    NotAMemberOrg {
        peer: String,
        org: String,
        channel: String,
    },
    #[error("unknown chaincode {0}")]
    UnknownChaincode(String),
    #[error("role {role:?} is not allowed for org {org} ({kind:?})")]
    RoleOrgMismatch { role: Role, org: String, kind: OrgKind },
    #[error("citizen identities must be bound to an Aadhaar number")]
    MissingAadhaarBinding,
    #[error("only citizen identities carry an Aadhaar binding")]
    UnexpectedAadhaarBinding,
    #[error("identity {0} already registered")]
    DuplicateIdentity(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrgKind {
    GovernmentBody,
    PrivateOrg,
    CitizenRegistry,
}

#[derive(Clone, Debug)]
pub struct Organization {
    pub org_id: String,
    pub root_identity: IdentityKeys,
    pub kind: OrgKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Citizen,
    UidaiAdmin,
    ThirdParty,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientIdentity {
    pub identity_id: String,
    pub org_id: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_aadhaar: Option<String>,
}

/// Channel definition; also the payload of the channel's genesis block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub channel_id: String,
    pub member_orgs: BTreeSet<String>,
    /// Keyed by [`policy_key`].
    pub policies: BTreeMap<String, EndorsementPolicy>,
}

pub fn policy_key(chaincode: &str, class: FunctionClass) -> String {
    format!("{chaincode}/{}", class.as_str())
}

impl ChannelConfig {
    pub fn policy_for(&self, chaincode: &str, class: FunctionClass) -> Option<&EndorsementPolicy> {
        self.policies.get(&policy_key(chaincode, class))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IdentityKind {
    Client(ClientIdentity),
    Peer { peer_id: String, org_id: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisteredIdentity {
    pub verify_key: VerifyKey,
    pub kind: IdentityKind,
}

/// The registry every signature check goes through.
#[derive(Clone, Debug, Default)]
pub struct Membership {
    orgs: BTreeMap<String, Organization>,
    identities: BTreeMap<String, RegisteredIdentity>,
    channels: BTreeMap<String, ChannelConfig>,
}

impl Membership {
    pub fn register_org(
        &mut self,
        org_id: &str,
        kind: OrgKind,
        seed: &[u8; 32],
    ) -> Result<&Organization, MembershipError> {
        if self.orgs.contains_key(org_id) {
            return Err(MembershipError::DuplicateOrg(org_id.to_owned()));
        }
        let root_identity = crypto::generate_identity(seed).expect("32-byte seed");
        self.orgs.insert(
            org_id.to_owned(),
            Organization {
                org_id: org_id.to_owned(),
                root_identity,
                kind,
            },
        );
        Ok(&self.orgs[org_id])
    }

    pub fn org(&self, org_id: &str) -> Option<&Organization> {
        self.orgs.get(org_id)
    }

    pub fn orgs(&self) -> impl Iterator<Item = &Organization> {
        self.orgs.values()
    }

    pub fn channel(&self, channel_id: &str) -> Option<&ChannelConfig> {
        self.channels.get(channel_id)
    }

    pub fn channels(&self) -> impl Iterator<Item = &ChannelConfig> {
        self.channels.values()
    }

    pub fn identity(&self, identity_id: &str) -> Option<&RegisteredIdentity> {
        self.identities.get(identity_id)
    }

    pub fn client(&self, identity_id: &str) -> Option<&ClientIdentity> {
        match &self.identities.get(identity_id)?.kind {
            IdentityKind::Client(c) => Some(c),
            IdentityKind::Peer { .. } => None,
        }
    }

    pub fn create_channel(
        &mut self,
        channel_id: &str,
        member_orgs: BTreeSet<String>,
        policies: BTreeMap<String, EndorsementPolicy>,
    ) -> Result<&ChannelConfig, MembershipError> {
        if self.channels.contains_key(channel_id) {
            return Err(MembershipError::DuplicateChannel(channel_id.to_owned()));
        }
        let referenced = member_orgs
            .iter()
            .chain(policies.values().flat_map(|p| p.orgs().iter()));
        for org in referenced {
            if !self.orgs.contains_key(org) {
                return Err(MembershipError::UnknownOrg(org.clone()));
            }
        }
        self.channels.insert(
            channel_id.to_owned(),
            ChannelConfig {
                channel_id: channel_id.to_owned(),
                member_orgs,
                policies,
            },
        );
        Ok(&self.channels[channel_id])
    }

    /// Generate keys for a client and record it. Returns the public identity
    /// and the key pair the client signs with.
    pub fn register_client(
        &mut self,
        org_id: &str,
        role: Role,
        bound_aadhaar: Option<&str>,
        seed: &[u8; 32],
    ) -> Result<(ClientIdentity, IdentityKeys), MembershipError> {
        let org = self
            .orgs
            .get(org_id)
            .ok_or_else(|| MembershipError::UnknownOrg(org_id.to_owned()))?;
        match (role, bound_aadhaar) {
            (Role::Citizen, None) => return Err(MembershipError::MissingAadhaarBinding),
            (Role::UidaiAdmin | Role::ThirdParty, Some(_)) => {
                return Err(MembershipError::UnexpectedAadhaarBinding)
            }
            _ => {}
        }
        if role == Role::UidaiAdmin && org.kind != OrgKind::GovernmentBody {
            return Err(MembershipError::RoleOrgMismatch {
                role,
                org: org_id.to_owned(),
                kind: org.kind,
            });
        }
        let keys = crypto::generate_identity(seed).expect("32-byte seed");
        if self.identities.contains_key(&keys.identity_id) {
            return Err(MembershipError::DuplicateIdentity(keys.identity_id));
        }
        let client = ClientIdentity {
            identity_id: keys.identity_id.clone(),
            org_id: org_id.to_owned(),
            role,
            bound_aadhaar: bound_aadhaar.map(str::to_owned),
        };
        self.identities.insert(
            keys.identity_id.clone(),
            RegisteredIdentity {
                verify_key: keys.verify_key,
                kind: IdentityKind::Client(client.clone()),
            },
        );
        Ok((client, keys))
    }

    fn register_peer_identity(&mut self, peer_id: &str, org_id: &str, keys: &IdentityKeys) {
        self.identities.insert(
            keys.identity_id.clone(),
            RegisteredIdentity {
                verify_key: keys.verify_key,
                kind: IdentityKind::Peer {
                    peer_id: peer_id.to_owned(),
                    org_id: org_id.to_owned(),
                },
            },
        );
    }

    /// Drop an identity; its later signatures no longer verify.
    pub fn remove_identity(&mut self, identity_id: &str) -> Option<RegisteredIdentity> {
        self.identities.remove(identity_id)
    }
}

#[derive(Clone, Debug)]
pub struct PeerNode {
    pub peer_id: String,
    pub org_id: String,
    pub keys: IdentityKeys,
    ledgers: BTreeMap<String, Ledger>,
    installed: BTreeSet<String>,
}

impl PeerNode {
    pub fn joined_channels(&self) -> impl Iterator<Item = &String> {
        self.ledgers.keys()
    }

    pub fn has_joined(&self, channel_id: &str) -> bool {
        self.ledgers.contains_key(channel_id)
    }

    pub fn installed_chaincodes(&self) -> &BTreeSet<String> {
        &self.installed
    }

    pub fn has_installed(&self, chaincode: &str) -> bool {
        self.installed.contains(chaincode)
    }

    /// Endorser for `chaincode` on `channel_id` iff joined and installed.
    pub fn is_endorser(&self, channel_id: &str, chaincode: &str) -> bool {
        self.has_joined(channel_id) && self.has_installed(chaincode)
    }

    pub fn ledger(&self, channel_id: &str) -> Option<&Ledger> {
        self.ledgers.get(channel_id)
    }

    pub(crate) fn ledger_mut(&mut self, channel_id: &str) -> Option<&mut Ledger> {
        self.ledgers.get_mut(channel_id)
    }

    /// Join `channel`, starting a fresh replica at genesis. Re-joining is a
    /// no-op.
    pub fn join_channel(&mut self, channel: &ChannelConfig) -> Result<(), MembershipError> {
        if !channel.member_orgs.contains(&self.org_id) {
            return Err(MembershipError::NotAMemberOrg {
                peer: self.peer_id.clone(),
                org: self.org_id.clone(),
                channel: channel.channel_id.clone(),
            });
        }
        if !self.ledgers.contains_key(&channel.channel_id) {
            let ledger = Ledger::new(channel.channel_id.clone(), Block::genesis(channel))?;
            self.ledgers.insert(channel.channel_id.clone(), ledger);
        }
        Ok(())
    }

    pub fn install_chaincode(
        &mut self,
        catalog: &ContractCatalog,
        name: &str,
    ) -> Result<(), MembershipError> {
        if !catalog.contains(name) {
            return Err(MembershipError::UnknownChaincode(name.to_owned()));
        }
        self.installed.insert(name.to_owned());
        Ok(())
    }
}

/// Registry, peers and chaincode catalog of one simulated network.
#[derive(Clone)]
pub struct Network {
    pub membership: Membership,
    pub catalog: ContractCatalog,
    peers: BTreeMap<String, PeerNode>,
}

impl Network {
    pub fn new(catalog: ContractCatalog) -> Self {
        Network {
            membership: Membership::default(),
            catalog,
            peers: BTreeMap::new(),
        }
    }

    pub fn add_peer(
        &mut self,
        peer_id: &str,
        org_id: &str,
        seed: &[u8; 32],
    ) -> Result<&PeerNode, MembershipError> {
        if self.peers.contains_key(peer_id) {
            return Err(MembershipError::DuplicatePeer(peer_id.to_owned()));
        }
        if self.membership.org(org_id).is_none() {
            return Err(MembershipError::UnknownOrg(org_id.to_owned()));
        }
        let keys = crypto::generate_identity(seed).expect("32-byte seed");
        self.membership.register_peer_identity(peer_id, org_id, &keys);
        self.peers.insert(
            peer_id.to_owned(),
            PeerNode {
                peer_id: peer_id.to_owned(),
                org_id: org_id.to_owned(),
                keys,
                ledgers: BTreeMap::new(),
                installed: BTreeSet::new(),
            },
        );
        Ok(&self.peers[peer_id])
    }

    pub fn peer(&self, peer_id: &str) -> Option<&PeerNode> {
        self.peers.get(peer_id)
    }

    pub(crate) fn peer_mut(&mut self, peer_id: &str) -> Option<&mut PeerNode> {
        self.peers.get_mut(peer_id)
    }

    pub fn peers(&self) -> impl Iterator<Item = &PeerNode> {
        self.peers.values()
    }

    pub fn join_channel(&mut self, peer_id: &str, channel_id: &str) -> Result<(), MembershipError> {
        let channel = self
            .membership
            .channel(channel_id)
            .ok_or_else(|| MembershipError::UnknownChannel(channel_id.to_owned()))?;
        let peer = self
            .peers
            .get_mut(peer_id)
            .ok_or_else(|| MembershipError::UnknownPeer(peer_id.to_owned()))?;
        peer.join_channel(channel)
    }

    pub fn install_chaincode(&mut self, peer_id: &str, name: &str) -> Result<(), MembershipError> {
        let peer = self
            .peers
            .get_mut(peer_id)
            .ok_or_else(|| MembershipError::UnknownPeer(peer_id.to_owned()))?;
        peer.install_chaincode(&self.catalog, name)
    }

    /// Validate `block` against `peer_id`'s replica of `channel_id` and
    /// commit it. Returns the assigned validity flags.
    pub fn deliver_block(
        &mut self,
        peer_id: &str,
        channel_id: &str,
        block: Block,
    ) -> Result<Vec<ValidationCode>, MembershipError> {
        let peer = self
            .peers
            .get_mut(peer_id)
            .ok_or_else(|| MembershipError::UnknownPeer(peer_id.to_owned()))?;
        let ledger = peer
            .ledgers
            .get_mut(channel_id)
            .ok_or_else(|| MembershipError::UnknownChannel(channel_id.to_owned()))?;
        let validated = validate_block(ledger, &self.membership, &self.catalog, block);
        let flags = validated.validity_flags.clone().unwrap_or_default();
        ledger.commit_block(validated)?;
        Ok(flags)
    }
}
