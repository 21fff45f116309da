//! Deterministic discrete-event simulation of a whole network, driven by
//! declarative scenarios, plus the operator tools built on it (query,
//! verify, diff, tamper).
//!
//! Time is a tick counter; one tick is one calendar day after the
//! configured epoch. Blocks cut at tick t reach committers at t + 1.

mod config;
mod diff;
mod engine;
mod query;
mod report;
mod scenario;
mod tamper;

use thiserror::Error;

pub use config::{ChaincodePolicies, ChannelSpec, ClientSpec, OrgSpec, PeerSpec, PolicySpec, SimConfig};
pub use diff::{diff_chains, ChainView, DivergenceReport, PairDivergence, PeerDivergence, PeerStatus};
pub use engine::{default_catalog, IsolationReport, Simulation};
pub use query::{display_key, render_block, render_history, render_state, render_value, resolve_key, QueryKind};
pub use report::{
    AssertionResult, ChannelSummary, SimReport, SyncFailure, TamperRecord, TxError, TxKind, TxRecord,
};
pub use scenario::{Action, Args, Expectation, Forge, ForgedWrite, Propose, Scenario, ScenarioStep};
pub use tamper::{apply_mutation, Mutation};

use crate::ledger::LedgerError;
use crate::membership::MembershipError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config error: {0}")]
    Config(String),
    #[error("scenario parse error: {0}")]
    ScenarioParse(String),
    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<SimError>,
    },
    #[error("unknown actor {0}")]
    UnknownActor(String),
    #[error("no such peer {0}")]
    NoSuchPeer(String),
    #[error("no such channel {0}")]
    NoSuchChannel(String),
    #[error("peer {peer} has no block {block} on {channel}")]
    NoSuchBlock {
        peer: String,
        channel: String,
        block: u64,
    },
    #[error("offset {offset} is outside the block image ({len} bytes)")]
    OffsetOutOfRange { offset: usize, len: usize },
    #[error("peer {peer} has not joined {channel}")]
    NotJoined { peer: String, channel: String },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("assertion at step {step} failed: {detail}")]
    AssertionFailed { step: usize, detail: String },
    #[error("{0}")]
    Usage(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Membership(#[from] MembershipError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// Build a network from `config`, run `scenario` and report.
pub fn run_scenario(config: &SimConfig, scenario: &Scenario) -> Result<SimReport, SimError> {
    let mut sim = Simulation::new(config.clone())?;
    sim.run(scenario)?;
    Ok(sim.report())
}
