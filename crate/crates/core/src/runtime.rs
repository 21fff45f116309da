//! Deterministic contract execution with read/write-set capture.
//!
//! A [`ContractContext`] exposes the stub operations contracts use
//! (`get_state`, `put_state`, `del_state`, `get_history`) over an immutable
//! committed snapshot plus the invocation's own pending writes. Nothing is
//! committed here; the captured [`ReadWriteSet`] is the whole effect.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::{Days, NaiveDate};
use thiserror::Error;

use crate::ledger::{
    HistoryEntry, HistoryIndex, KVRead, KVWrite, ReadWriteSet, StateEntry, StateView, Version,
    WorldState,
};
use crate::membership::ClientIdentity;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FunctionClass {
    ReadOnly,
    Mutating,
}

impl FunctionClass {
    pub fn as_str(self) -> &'static str {
        match self {
            FunctionClass::ReadOnly => "read_only",
            FunctionClass::Mutating => "mutating",
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ContractError {
    #[error("unknown chaincode {0}")]
    UnknownChaincode(String),
    #[error("unknown function {chaincode}.{function}")]
    UnknownFunction { chaincode: String, function: String },
    #[error("write to {0:?} from a read-only function")]
    ReadOnlyViolation(String),
    #[error("bad arguments: {0}")]
    BadArguments(String),
    /// The contract refused the request; `code` names the reason.
    #[error("{code}: {message}")]
    Rejected { code: String, message: String },
}

impl ContractError {
    /// Short machine-readable name for logs and assertions.
    pub fn code(&self) -> &str {
        match self {
            ContractError::UnknownChaincode(_) => "UnknownChaincode",
            ContractError::UnknownFunction { .. } => "UnknownFunction",
            ContractError::ReadOnlyViolation(_) => "ReadOnlyViolation",
            ContractError::BadArguments(_) => "BadArguments",
            ContractError::Rejected { code, .. } => code,
        }
    }
}

/// A chaincode: a named set of classified functions.
pub trait Chaincode: Send + Sync {
    fn name(&self) -> &str;

    fn functions(&self) -> &[(&'static str, FunctionClass)];

    fn invoke(
        &self,
        ctx: &mut ContractContext<'_>,
        function: &str,
        args: &[String],
    ) -> Result<Vec<u8>, ContractError>;
}

#[derive(Clone, Default)]
pub struct ContractCatalog {
    chaincodes: BTreeMap<String, Arc<dyn Chaincode>>,
}

impl ContractCatalog {
    pub fn register<C: Chaincode + 'static>(&mut self, chaincode: C) {
        self.chaincodes
            .insert(chaincode.name().to_owned(), Arc::new(chaincode));
    }

    pub fn contains(&self, name: &str) -> bool {
        self.chaincodes.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.chaincodes.keys()
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn Chaincode>> {
        self.chaincodes.get(name)
    }

    pub fn function_class(&self, chaincode: &str, function: &str) -> Option<FunctionClass> {
        self.chaincodes
            .get(chaincode)?
            .functions()
            .iter()
            .find(|(name, _)| *name == function)
            .map(|(_, class)| *class)
    }
}

impl std::fmt::Debug for ContractCatalog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.chaincodes.keys()).finish()
    }
}

/// Everything about an invocation other than the state it runs over.
#[derive(Clone, Debug)]
pub struct InvocationEnv {
    pub invoker: ClientIdentity,
    pub channel_id: String,
    pub tx_id: String,
    pub timestamp: u64,
    /// Calendar date of tick 0; one tick is one day.
    pub epoch: NaiveDate,
}

impl InvocationEnv {
    pub fn tx_date(&self) -> NaiveDate {
        self.epoch
            .checked_add_days(Days::new(self.timestamp))
            .expect("tick within calendar range")
    }
}

pub struct ContractContext<'a> {
    env: &'a InvocationEnv,
    view: &'a dyn StateView,
    class: FunctionClass,
    pending: BTreeMap<String, Option<Vec<u8>>>,
    reads: Vec<KVRead>,
    read_keys: BTreeSet<String>,
}

impl<'a> ContractContext<'a> {
    pub fn new(env: &'a InvocationEnv, view: &'a dyn StateView, class: FunctionClass) -> Self {
        ContractContext {
            env,
            view,
            class,
            pending: BTreeMap::new(),
            reads: Vec::new(),
            read_keys: BTreeSet::new(),
        }
    }

    pub fn invoker(&self) -> &ClientIdentity {
        &self.env.invoker
    }

    pub fn tx_id(&self) -> &str {
        &self.env.tx_id
    }

    pub fn tx_timestamp(&self) -> u64 {
        self.env.timestamp
    }

    pub fn tx_date(&self) -> NaiveDate {
        self.env.tx_date()
    }

    pub fn channel_id(&self) -> &str {
        &self.env.channel_id
    }

    /// Own pending write if any, else the committed value. The first read
    /// of each key records the committed version.
    pub fn get_state(&mut self, key: &str) -> Option<Vec<u8>> {
        let committed = self.view.state_entry(key);
        if self.read_keys.insert(key.to_owned()) {
            self.reads.push(KVRead {
                key: key.to_owned(),
                version: committed.map(|e| e.version),
            });
        }
        match self.pending.get(key) {
            Some(pending) => pending.clone(),
            None => committed.map(|e| e.value.clone()),
        }
    }

    pub fn put_state(&mut self, key: &str, value: Vec<u8>) -> Result<(), ContractError> {
        self.buffer(key, Some(value))
    }

    pub fn del_state(&mut self, key: &str) -> Result<(), ContractError> {
        self.buffer(key, None)
    }

    fn buffer(&mut self, key: &str, value: Option<Vec<u8>>) -> Result<(), ContractError> {
        if self.class == FunctionClass::ReadOnly {
            return Err(ContractError::ReadOnlyViolation(key.to_owned()));
        }
        self.pending.insert(key.to_owned(), value);
        Ok(())
    }

    /// Committed history only; not MVCC-protected, so no read is recorded.
    pub fn get_history(&self, key: &str) -> Vec<HistoryEntry> {
        self.view.history(key).to_vec()
    }

    pub fn into_rwset(self) -> ReadWriteSet {
        ReadWriteSet {
            reads: self.reads,
            writes: self
                .pending
                .into_iter()
                .map(|(key, value)| KVWrite { key, value })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvocationOutcome {
    pub response: Vec<u8>,
    pub rwset: ReadWriteSet,
}

/// Run `chaincode.function(args)` over `view` without committing anything.
pub fn invoke_contract(
    catalog: &ContractCatalog,
    view: &dyn StateView,
    env: &InvocationEnv,
    chaincode: &str,
    function: &str,
    args: &[String],
) -> Result<InvocationOutcome, ContractError> {
    let cc = catalog
        .get(chaincode)
        .ok_or_else(|| ContractError::UnknownChaincode(chaincode.to_owned()))?;
    let class = catalog
        .function_class(chaincode, function)
        .ok_or_else(|| ContractError::UnknownFunction {
            chaincode: chaincode.to_owned(),
            function: function.to_owned(),
        })?;
    let mut ctx = ContractContext::new(env, view, class);
    let response = cc.invoke(&mut ctx, function, args)?;
    let rwset = ctx.into_rwset();
    debug_assert!(class == FunctionClass::Mutating || rwset.writes.is_empty());
    Ok(InvocationOutcome { response, rwset })
}

/// In-memory committed state, for tests and sequential re-execution.
#[derive(Clone, Debug, Default)]
pub struct MemorySnapshot {
    state: WorldState,
    history: HistoryIndex,
}

impl MemorySnapshot {
    pub fn apply(&mut self, rwset: &ReadWriteSet, version: Version, tx_id: &str) {
        for w in &rwset.writes {
            self.state.apply(w, version);
            self.history.record(w, version, tx_id);
        }
    }

    pub fn world_state(&self) -> &WorldState {
        &self.state
    }
}

impl StateView for MemorySnapshot {
    fn state_entry(&self, key: &str) -> Option<&StateEntry> {
        self.state.get(key)
    }

    fn history(&self, key: &str) -> &[HistoryEntry] {
        self.history.get(key)
    }
}
