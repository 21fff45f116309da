use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

use citizennet::ledger::{block_file_name, export_blocks, import_blocks, Block, Ledger};
use citizennet::sim::{diff_chains, ChainView, DivergenceReport, SimConfig, SimReport, Simulation};

/// On-disk layout: `config.json`, `report.json` and
/// `peers/<peer>/<channel>/block_NNNNNN.json`.
pub struct DataDir {
    root: PathBuf,
}

/// Rebuild a replica from its block files; failures are check failures.
pub fn replay(channel: &str, blocks: Vec<Block>) -> Result<Ledger, String> {
    Ledger::replay(channel, blocks).map_err(|e| format!("replica does not replay: {e}"))
}

impl DataDir {
    pub fn new(root: &Path) -> Self {
        DataDir { root: root.to_owned() }
    }

    fn peers_dir(&self) -> PathBuf {
        self.root.join("peers")
    }

    pub fn chain_dir(&self, peer: &str, channel: &str) -> PathBuf {
        self.peers_dir().join(peer).join(channel)
    }

    pub fn block_path(&self, peer: &str, channel: &str, height: u64) -> PathBuf {
        self.chain_dir(peer, channel).join(block_file_name(height))
    }

    /// Replace everything under the data dir with the state of `sim`.
    pub fn save(&self, config: &SimConfig, sim: &Simulation) -> anyhow::Result<()> {
        let peers = self.peers_dir();
        if peers.exists() {
            fs::remove_dir_all(&peers).with_context(|| format!("clearing {}", peers.display()))?;
        }
        fs::create_dir_all(&self.root).with_context(|| format!("creating {}", self.root.display()))?;
        fs::write(self.root.join("config.json"), config.to_json() + "\n")?;
        for peer in sim.network().peers() {
            for ch in peer.joined_channels() {
                let ledger = peer.ledger(ch).expect("joined");
                export_blocks(ledger.blocks().as_slice(), &self.chain_dir(&peer.peer_id, ch))?;
            }
        }
        Ok(())
    }

    pub fn save_report(&self, report: &SimReport) -> anyhow::Result<()> {
        fs::write(self.root.join("report.json"), report.to_json())?;
        Ok(())
    }

    pub fn load_chain(&self, peer: &str, channel: &str) -> anyhow::Result<Vec<Block>> {
        let peer_dir = self.peers_dir().join(peer);
        if !peer_dir.is_dir() {
            bail!("no such peer {peer} under {}", self.root.display());
        }
        let dir = self.chain_dir(peer, channel);
        if !dir.is_dir() {
            bail!("peer {peer} has not joined {channel}");
        }
        Ok(import_blocks(&dir)?)
    }

    /// Every peer directory holding `channel`, in name order.
    fn channel_peers(&self, channel: &str) -> anyhow::Result<Vec<String>> {
        let dir = self.peers_dir();
        let entries = fs::read_dir(&dir).with_context(|| format!("reading {}", dir.display()))?;
        let mut out = Vec::new();
        for e in entries {
            let e = e?;
            if e.path().join(channel).is_dir() {
                out.push(e.file_name().to_string_lossy().into_owned());
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn diff(&self, channel: &str) -> anyhow::Result<DivergenceReport> {
        let peers = self.channel_peers(channel)?;
        if peers.is_empty() {
            bail!("no peer holds channel {channel}");
        }
        let mut chains = BTreeMap::new();
        for p in peers {
            let blocks = self.load_chain(&p, channel)?;
            let state = replay(channel, blocks.clone()).ok().map(|l| l.state_hash());
            chains.insert(p, (blocks, state));
        }
        let views = chains
            .iter()
            .map(|(p, (blocks, state))| {
                (
                    p.clone(),
                    ChainView {
                        blocks: blocks.as_slice(),
                        state_hash: *state,
                    },
                )
            })
            .collect();
        Ok(diff_chains(channel, &views))
    }
}
