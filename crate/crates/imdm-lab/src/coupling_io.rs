//! Rectified-coupling persistence: one JSON object per pair, carrying the
//! stored per-position noise and the generated tokens.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

use imdm_core::denoiser::ModelKind;
use imdm_core::distill::{CouplingPair, CouplingProvenance, CouplingSet};
use imdm_core::{NoiseAssignment, Sequence};

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    teacher_kind: String,
    steps: usize,
    seed: u64,
    pairs: usize,
}

#[derive(Serialize, Deserialize)]
struct PairLine {
    eps: Vec<Option<Vec<f64>>>,
    tokens: Vec<u32>,
}

pub fn save(coupling: &CouplingSet, path: &Path) -> Result<()> {
    let mut out = String::new();
    let header = HeaderLine {
        teacher_kind: match coupling.provenance.teacher_kind {
            ModelKind::Mdm => "mdm".into(),
            ModelKind::Imdm => "imdm".into(),
        },
        steps: coupling.provenance.steps,
        seed: coupling.provenance.seed,
        pairs: coupling.len(),
    };
    out.push_str(&serde_json::to_string(&header)?);
    out.push('\n');
    for pair in &coupling.pairs {
        let line = PairLine {
            eps: pair.eps.clone(),
            tokens: pair.tokens.tokens.clone(),
        };
        out.push_str(&serde_json::to_string(&line)?);
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing coupling {}", path.display()))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<CouplingSet> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading coupling {}", path.display()))?;
    let mut lines = text.lines();
    let header: HeaderLine = serde_json::from_str(
        lines.next().ok_or_else(|| anyhow::anyhow!("empty coupling file"))?,
    )
    .context("coupling header")?;
    let teacher_kind = match header.teacher_kind.as_str() {
        "mdm" => ModelKind::Mdm,
        "imdm" => ModelKind::Imdm,
        other => bail!("unknown teacher kind {other:?}"),
    };
    let mut pairs = Vec::with_capacity(header.pairs);
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let p: PairLine = serde_json::from_str(line).context("coupling pair")?;
        pairs.push(CouplingPair {
            eps: p.eps,
            tokens: Sequence { tokens: p.tokens },
        });
    }
    if pairs.len() != header.pairs {
        bail!("coupling header says {} pairs, file has {}", header.pairs, pairs.len());
    }
    Ok(CouplingSet {
        pairs,
        provenance: CouplingProvenance {
            teacher_kind,
            steps: header.steps,
            seed: header.seed,
        },
    })
}

/// Turn stored pairs into full-mask noise assignments for sensitivity
/// analysis; every position must carry noise.
pub fn to_noise_draws(coupling: &CouplingSet) -> Result<Vec<NoiseAssignment>> {
    let mut draws = Vec::with_capacity(coupling.len());
    for (i, pair) in coupling.pairs.iter().enumerate() {
        if pair.eps.iter().any(|e| e.is_none()) {
            bail!("pair {i} has positions without stored noise");
        }
        draws.push(NoiseAssignment {
            eps: pair.eps.clone(),
        });
    }
    Ok(draws)
}
