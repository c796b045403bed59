//! Self-describing run directories: frozen config snapshot, git-style
//! content hash of the inputs, seeds, and artifact writers.

use anyhow::{Context, Result};
use std::path::{Path, PathBuf};

use imdm_core::training::TracePoint;
use imdm_core::Sequence;

use crate::config::RunConfig;
use crate::sha1::git_blob_hex;

pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    /// Create (or reuse) the directory and freeze the config into it along
    /// with the content hash of the snapshot and the effective seed.
    pub fn create(base: &Path, cfg: &RunConfig) -> Result<Self> {
        let path = base.to_path_buf();
        std::fs::create_dir_all(&path)
            .with_context(|| format!("creating run dir {}", path.display()))?;
        let snapshot = cfg.to_toml();
        std::fs::write(path.join("config_snapshot.toml"), &snapshot)?;
        let manifest = serde_json::json!({
            "config_hash": git_blob_hex(snapshot.as_bytes()),
            "seed": cfg.seed,
            "run_name": cfg.run_name,
        });
        std::fs::write(
            path.join("inputs.json"),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        Ok(RunDir { path })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write_loss_trace(&self, name: &str, trace: &[TracePoint]) -> Result<()> {
        let mut csv = String::from("iteration,loss\n");
        for p in trace {
            csv.push_str(&format!("{},{}\n", p.iteration, p.loss));
        }
        std::fs::write(self.file(name), csv)?;
        Ok(())
    }

    /// samples.jsonl: one object per sequence.
    pub fn write_samples(
        &self,
        name: &str,
        samples: &[Sequence],
        steps: usize,
        seed: u64,
    ) -> Result<()> {
        let mut out = String::new();
        for (i, s) in samples.iter().enumerate() {
            let line = serde_json::json!({
                "tokens": s.tokens,
                "steps": steps,
                "seed": seed,
                "stream": i as u64,
            });
            out.push_str(&serde_json::to_string(&line)?);
            out.push('\n');
        }
        std::fs::write(self.file(name), out)?;
        Ok(())
    }

    pub fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<()> {
        std::fs::write(self.file(name), serde_json::to_string_pretty(value)?)?;
        Ok(())
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<()> {
        std::fs::write(self.file(name), text)?;
        Ok(())
    }
}
