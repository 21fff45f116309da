use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::consensus::{EndorsementPolicy, OrdererConfig};
use crate::membership::{policy_key, OrgKind, Role};
use crate::runtime::{ContractCatalog, FunctionClass};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrgSpec {
    pub id: String,
    pub kind: OrgKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub threshold: usize,
    pub orgs: BTreeSet<String>,
}

impl PolicySpec {
    fn build(&self) -> Result<EndorsementPolicy, SimError> {
        EndorsementPolicy::new(self.threshold, self.orgs.iter().cloned())
            .map_err(|e| SimError::Config(e.to_string()))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaincodePolicies {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutating: Option<PolicySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub read_only: Option<PolicySpec>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub id: String,
    pub members: BTreeSet<String>,
    /// Per chaincode. Missing entries default to "1 of the government
    /// bodies among the members" for mutating functions and "1 of any
    /// member" for read-only ones.
    #[serde(default)]
    pub policies: BTreeMap<String, ChaincodePolicies>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeerSpec {
    pub id: String,
    pub org: String,
    #[serde(default)]
    pub channels: Vec<String>,
    #[serde(default)]
    pub chaincodes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientSpec {
    pub id: String,
    pub org: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aadhaar: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub epoch_date: NaiveDate,
    #[serde(default = "default_orderer")]
    pub orderer: OrdererConfig,
    pub orgs: Vec<OrgSpec>,
    pub channels: Vec<ChannelSpec>,
    pub peers: Vec<PeerSpec>,
    #[serde(default)]
    pub clients: Vec<ClientSpec>,
}

fn default_orderer() -> OrdererConfig {
    OrdererConfig::default()
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn org_kind(&self, org: &str) -> Option<OrgKind> {
        self.orgs.iter().find(|o| o.id == org).map(|o| o.kind)
    }

    /// Check that every reference resolves; the first problem found is
    /// reported.
    pub fn validate(&self, catalog: &ContractCatalog) -> Result<(), SimError> {
        let err = |m: String| Err(SimError::Config(m));
        OrdererConfig::new(self.orderer.max_block_txs, self.orderer.batch_timeout_ticks)
            .map_err(|e| SimError::Config(e.to_string()))?;

        let mut orgs = BTreeSet::new();
        for o in &self.orgs {
            if !orgs.insert(o.id.as_str()) {
                return err(format!("duplicate org {}", o.id));
            }
        }
        let mut channels = BTreeMap::new();
        for c in &self.channels {
            if channels.insert(c.id.as_str(), c).is_some() {
                return err(format!("duplicate channel {}", c.id));
            }
            if c.members.is_empty() {
                return err(format!("channel {} has no members", c.id));
            }
            for m in &c.members {
                if !orgs.contains(m.as_str()) {
                    return err(format!("channel {}: unknown member org {m}", c.id));
                }
            }
            for cc in c.policies.keys() {
                if !catalog.contains(cc) {
                    return err(format!("channel {}: policy for unknown chaincode {cc}", c.id));
                }
            }
            self.channel_policies(c, catalog)?;
        }
        let mut peers = BTreeSet::new();
        for p in &self.peers {
            if !peers.insert(p.id.as_str()) {
                return err(format!("duplicate peer {}", p.id));
            }
            if !orgs.contains(p.org.as_str()) {
                return err(format!("peer {}: unknown org {}", p.id, p.org));
            }
            for ch in &p.channels {
                match channels.get(ch.as_str()) {
                    None => return err(format!("peer {}: unknown channel {ch}", p.id)),
                    Some(c) if !c.members.contains(&p.org) => {
                        return err(format!("peer {}: org {} is not a member of {ch}", p.id, p.org))
                    }
                    _ => {}
                }
            }
            for cc in &p.chaincodes {
                if !catalog.contains(cc) {
                    return err(format!("peer {}: unknown chaincode {cc}", p.id));
                }
            }
        }
        let mut clients = BTreeSet::new();
        for c in &self.clients {
            if !clients.insert(c.id.as_str()) {
                return err(format!("duplicate client {}", c.id));
            }
            if !orgs.contains(c.org.as_str()) {
                return err(format!("client {}: unknown org {}", c.id, c.org));
            }
        }
        Ok(())
    }

    /// Effective endorsement policies of `channel`, keyed by
    /// [`policy_key`].
    pub fn channel_policies(
        &self,
        channel: &ChannelSpec,
        catalog: &ContractCatalog,
    ) -> Result<BTreeMap<String, EndorsementPolicy>, SimError> {
        let government: BTreeSet<String> = channel
            .members
            .iter()
            .filter(|m| self.org_kind(m) == Some(OrgKind::GovernmentBody))
            .cloned()
            .collect();
        let mut out = BTreeMap::new();
        for cc in catalog.names() {
            let given = channel.policies.get(cc).cloned().unwrap_or_default();
            let mutating = match &given.mutating {
                Some(p) => p.build()?,
                None if !government.is_empty() => EndorsementPolicy::new(1, government.iter().cloned())
                    .expect("non-empty"),
                None => {
                    return Err(SimError::Config(format!(
                        "channel {} has no government body; give an explicit mutating policy for {cc}",
                        channel.id
                    )))
                }
            };
            let read_only = match &given.read_only {
                Some(p) => p.build()?,
                None => EndorsementPolicy::new(1, channel.members.iter().cloned()).expect("non-empty"),
            };
            for p in [&mutating, &read_only] {
                if let Some(o) = p.orgs().iter().find(|o| !channel.members.contains(*o)) {
                    return Err(SimError::Config(format!(
                        "channel {}: policy names non-member org {o}",
                        channel.id
                    )));
                }
            }
            out.insert(policy_key(cc, FunctionClass::Mutating), mutating);
            out.insert(policy_key(cc, FunctionClass::ReadOnly), read_only);
        }
        Ok(out)
    }
}
