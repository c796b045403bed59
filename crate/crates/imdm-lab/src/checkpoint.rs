//! Binary checkpoint format.
//!
//! Layout: magic `IMDM`, format version u32, model kind tag, noise
//! distribution tag, six u64 shape fields, a manifest of named tensors
//! (name, rank, dims), the weight block as little-endian f64 in manifest
//! order, and a trailing CRC32 of the weight block. The noise scale rides
//! in the weight block as a one-element `noise_scale` tensor so it is
//! covered by the CRC. Every structural field is strictly validated on
//! load, so any single flipped byte fails the load.

use anyhow::{bail, Context, Result};
use std::io::{Read, Write};
use std::path::Path;

use imdm_core::denoiser::{Denoiser, DenoiserParams, ModelDims, ModelKind, NoiseDistribution, NoiseSpec};

pub const MAGIC: &[u8; 4] = b"IMDM";
pub const VERSION: u32 = 1;

fn kind_tag(kind: ModelKind) -> u8 {
    match kind {
        ModelKind::Mdm => 0,
        ModelKind::Imdm => 1,
    }
}

fn dist_tag(d: NoiseDistribution) -> u8 {
    match d {
        NoiseDistribution::Uniform => 0,
        NoiseDistribution::Gaussian => 1,
    }
}

/// Manifest entries in canonical order, including the trailing scale slot.
fn manifest_for(params: &DenoiserParams) -> Vec<(String, Vec<usize>)> {
    let mut entries: Vec<(String, Vec<usize>)> = params
        .tensors()
        .iter()
        .map(|(name, _, dims)| (name.to_string(), dims.clone()))
        .collect();
    entries.push(("noise_scale".to_string(), vec![1]));
    entries
}

pub fn save(model: &Denoiser, path: &Path) -> Result<()> {
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(kind_tag(model.kind));
    out.push(dist_tag(model.noise.distribution));
    for v in [
        model.dims.n_tokens,
        model.dims.seq_len,
        model.dims.embed_dim,
        model.dims.noise_dim,
        model.dims.time_dim,
        model.dims.hidden_width,
    ] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }

    let manifest = manifest_for(&model.params);
    out.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
    for (name, dims) in &manifest {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for &d in dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
    }

    let mut weights: Vec<u8> = Vec::new();
    for (_, tensor, _) in model.params.tensors() {
        for &v in tensor {
            weights.extend_from_slice(&v.to_le_bytes());
        }
    }
    weights.extend_from_slice(&model.noise.scale.to_le_bytes());

    let crc = crc32fast::hash(&weights);
    out.extend_from_slice(&weights);
    out.extend_from_slice(&crc.to_le_bytes());

    let mut file = std::fs::File::create(path)
        .with_context(|| format!("creating checkpoint {}", path.display()))?;
    file.write_all(&out)?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            bail!("checkpoint truncated at offset {}", self.pos);
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

pub fn load(path: &Path) -> Result<Denoiser> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .with_context(|| format!("opening checkpoint {}", path.display()))?
        .read_to_end(&mut buf)?;
    load_bytes(&buf)
}

pub fn load_bytes(buf: &[u8]) -> Result<Denoiser> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != MAGIC {
        bail!("bad magic bytes");
    }
    let version = r.u32()?;
    if version != VERSION {
        bail!("unsupported checkpoint version {version}");
    }
    let kind = match r.u8()? {
        0 => ModelKind::Mdm,
        1 => ModelKind::Imdm,
        t => bail!("invalid model kind tag {t}"),
    };
    let distribution = match r.u8()? {
        0 => NoiseDistribution::Uniform,
        1 => NoiseDistribution::Gaussian,
        t => bail!("invalid noise distribution tag {t}"),
    };
    let dims = ModelDims {
        n_tokens: r.u64()? as usize,
        seq_len: r.u64()? as usize,
        embed_dim: r.u64()? as usize,
        noise_dim: r.u64()? as usize,
        time_dim: r.u64()? as usize,
        hidden_width: r.u64()? as usize,
    };
    dims.validate().map_err(anyhow::Error::new)?;

    // Manifest must match the canonical one for these dims exactly.
    let template = DenoiserParams::zeros(&dims);
    let expected = manifest_for(&template);
    let count = r.u32()? as usize;
    if count != expected.len() {
        bail!("manifest has {count} tensors, expected {}", expected.len());
    }
    for (name, dims_exp) in &expected {
        let name_len = r.u32()? as usize;
        let name_read = std::str::from_utf8(r.take(name_len)?).context("manifest name")?;
        if name_read != name {
            bail!("manifest tensor {name_read:?}, expected {name:?}");
        }
        let rank = r.u32()? as usize;
        if rank != dims_exp.len() {
            bail!("tensor {name}: rank {rank}, expected {}", dims_exp.len());
        }
        for &d in dims_exp {
            let got = r.u64()? as usize;
            if got != d {
                bail!("tensor {name}: dim {got}, expected {d}");
            }
        }
    }

    let n_weights: usize = expected.iter().map(|(_, d)| d.iter().product::<usize>()).sum();
    let weight_bytes = r.take(n_weights * 8)?;
    let crc_stored = r.u32()?;
    if r.pos != buf.len() {
        bail!("{} trailing bytes after checkpoint", buf.len() - r.pos);
    }
    let crc = crc32fast::hash(weight_bytes);
    if crc != crc_stored {
        bail!("weight block CRC mismatch: stored {crc_stored:08x}, computed {crc:08x}");
    }

    let mut values = Vec::with_capacity(n_weights);
    for chunk in weight_bytes.chunks_exact(8) {
        values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    let scale = values.pop().expect("noise_scale slot");
    if !(scale > 0.0) || !scale.is_finite() {
        bail!("invalid noise scale {scale}");
    }

    let mut params = template;
    params.from_flat(&values);
    Ok(Denoiser {
        kind,
        dims,
        noise: NoiseSpec {
            distribution,
            dim: dims.noise_dim,
            scale,
        },
        params,
    })
}
