//! `citizenctl`: run scenarios against a simulated network and inspect,
//! verify, diff and tamper with the block files it leaves behind.

mod store;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use citizennet::ledger::{verify_chain, ChainCheck};
use citizennet::sim::{apply_mutation, render_block, Mutation, QueryKind, Scenario, SimConfig, Simulation};

use store::DataDir;

#[derive(Parser)]
#[command(name = "citizenctl", version, about = "Citizen identity network simulator")]
struct Cli {
    /// Where peer block files, the config and the last report live.
    #[arg(long, global = true, default_value = "citizennet-data")]
    data_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the network from a config and write genesis-only chains.
    Init { config: PathBuf },
    /// Run a scenario from scratch and write chains and report.
    Run {
        config: PathBuf,
        scenario: PathBuf,
        /// Also write the report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print a state entry, key history or block from one peer's files.
    Query {
        peer: String,
        channel: String,
        kind: QueryKind,
        /// Aadhaar number or raw key for state/history; height for block.
        key: String,
    },
    /// Recompute hashes and links of one peer's chain.
    Verify { peer: String, channel: String },
    /// Compare every peer's copy of a channel.
    Diff { channel: String },
    /// Flip one byte of a stored block image (XOR 0xFF).
    Tamper {
        peer: String,
        channel: String,
        height: u64,
        offset: usize,
    },
}

/// Exit 1: a check failed. Exit 2: bad input.
enum Failure {
    Check(String),
    Usage(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_config(path: &Path) -> anyhow::Result<SimConfig> {
    Ok(SimConfig::from_json(&read_text(path)?)?)
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json"));
}

fn init(data: &DataDir, config: &Path) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let sim = Simulation::new(cfg.clone()).map_err(anyhow::Error::from)?;
    data.save(&cfg, &sim)?;
    for ch in sim.channel_ids() {
        println!("{ch}: {} peers at genesis", sim.channel_peers(&ch).len());
    }
    Ok(())
}

fn run(data: &DataDir, config: &Path, scenario: &Path, report_out: Option<&Path>) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let scenario = Scenario::from_json(&read_text(scenario)?).map_err(anyhow::Error::from)?;
    let mut sim = Simulation::new(cfg.clone()).map_err(anyhow::Error::from)?;
    sim.run(&scenario).map_err(anyhow::Error::from)?;
    let report = sim.report();
    data.save(&cfg, &sim)?;
    data.save_report(&report)?;
    if let Some(out) = report_out {
        std::fs::write(out, report.to_json()).with_context(|| format!("writing {}", out.display()))?;
    }

    println!("final tick {}", report.final_tick);
    for (ch, s) in &report.channels {
        let heights: Vec<String> = s.heights.iter().map(|(p, h)| format!("{p}={h}")).collect();
        println!("{ch}: {}", heights.join(" "));
    }
    let committed = report.transactions.iter().filter(|t| t.block.is_some()).count();
    println!("{} requests, {committed} committed", report.transactions.len());
    for d in report.divergence.values() {
        println!("{}", d.summary());
    }
    for a in &report.assertions {
        let verdict = if a.passed { "PASS" } else { "FAIL" };
        let detail = if a.detail.is_empty() { String::new() } else { format!(": {}", a.detail) };
        println!("[{verdict}] step {}{detail}", a.step);
    }
    match report.failed_assertions().count() {
        0 => Ok(()),
        n => Err(Failure::Check(format!("{n} assertion(s) failed"))),
    }
}

fn query(data: &DataDir, peer: &str, channel: &str, kind: QueryKind, key: &str) -> Result<(), Failure> {
    let blocks = data.load_chain(peer, channel)?;
    let value = match kind {
        QueryKind::Block => {
            let h: u64 = key.parse().map_err(|_| anyhow!("block height {key:?} is not a number"))?;
            let b = blocks
                .get(h as usize)
                .ok_or_else(|| anyhow!("{peer} has no block {h} on {channel}"))?;
            render_block(b)
        }
        QueryKind::State | QueryKind::History => {
            let ledger = store::replay(channel, blocks).map_err(Failure::Check)?;
            let k = citizennet::sim::resolve_key(key);
            let rendered = if kind == QueryKind::State {
                citizennet::sim::render_state(&ledger, &k)
            } else {
                citizennet::sim::render_history(&ledger, &k)
            };
            rendered.map_err(|e| Failure::Check(e.to_string()))?
        }
    };
    print_json(&value);
    Ok(())
}

fn verify(data: &DataDir, peer: &str, channel: &str) -> Result<(), Failure> {
    let blocks = data.load_chain(peer, channel)?;
    match verify_chain(&blocks) {
        ChainCheck::Ok => {
            println!("{peer}/{channel}: ok ({} blocks)", blocks.len());
            Ok(())
        }
        ChainCheck::FirstBadHeight(h) => {
            println!("{peer}/{channel}: first bad height {h}");
            Err(Failure::Check(format!("chain of {peer} on {channel} does not verify")))
        }
    }
}

fn diff(data: &DataDir, channel: &str) -> Result<(), Failure> {
    let report = data.diff(channel)?;
    println!("{}", report.summary());
    print_json(&serde_json::to_value(&report).expect("json"));
    if report.divergent_peers().is_empty() {
        Ok(())
    } else {
        Err(Failure::Check("divergence found".into()))
    }
}

fn tamper(data: &DataDir, peer: &str, channel: &str, height: u64, offset: usize) -> Result<(), Failure> {
    let path = data.block_path(peer, channel, height);
    let mut block = citizennet::ledger::read_block_file(&path)
        .map_err(|e| anyhow!("{peer} has no block {height} on {channel}: {e}"))?;
    let len = block.image_len();
    if !apply_mutation(&mut block, Mutation::flip(offset)) {
        return Err(anyhow!("offset {offset} is outside the block image ({len} bytes)").into());
    }
    citizennet::ledger::write_block_file(&block, &path).map_err(anyhow::Error::from)?;
    println!("flipped byte {offset} of {peer}/{channel} block {height}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let data = DataDir::new(&cli.data_dir);
    let result = match &cli.command {
        Command::Init { config } => init(&data, config),
        Command::Run { config, scenario, report } => run(&data, config, scenario, report.as_deref()),
        Command::Query { peer, channel, kind, key } => query(&data, peer, channel, *kind, key),
        Command::Verify { peer, channel } => verify(&data, peer, channel),
        Command::Diff { channel } => diff(&data, channel),
        Command::Tamper { peer, channel, height, offset } => tamper(&data, peer, channel, *height, *offset),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("citizenctl: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("citizenctl: {e:#}");
            ExitCode::from(2)
        }
    }
}
