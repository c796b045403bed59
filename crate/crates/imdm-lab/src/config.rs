//! Run configuration: human-edited TOML, schema-validated (unknown keys
//! rejected), with a frozen snapshot written into every run directory.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

use imdm_core::denoiser::{ModelDims, ModelKind, NoiseDistribution, NoiseSpec};
use imdm_core::distill::{DistillConfig, KlDirection};
use imdm_core::sampler::DecodeConfig;
use imdm_core::schedule::{Schedule, ScheduleKind};
use imdm_core::training::{DatasetSpec, TrainConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    pub kind: String,
    pub clip_eps: f64,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        ScheduleSection {
            kind: "linear".into(),
            clip_eps: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub distribution: String,
    pub dim: usize,
    pub scale: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            distribution: "uniform".into(),
            dim: 16,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub kind: String,
    pub embed_dim: usize,
    pub time_dim: usize,
    pub hidden_width: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kind: "mdm".into(),
            embed_dim: 32,
            time_dim: 4,
            hidden_width: 192,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub kind: String,
    pub n_tokens: usize,
    pub seq_len: usize,
    pub sequences: Vec<Vec<u32>>,
    pub weights: Vec<f64>,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            kind: "synthetic_pair".into(),
            n_tokens: 2,
            seq_len: 2,
            sequences: Vec::new(),
            weights: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub eval_every: usize,
    pub log_prob_floor: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            iterations: d.iterations,
            batch_size: d.batch_size,
            learning_rate: d.learning_rate,
            adam_beta1: d.adam_beta1,
            adam_beta2: d.adam_beta2,
            adam_eps: d.adam_eps,
            seed: d.seed,
            eval_every: d.eval_every,
            log_prob_floor: d.log_prob_floor,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistillSection {
    pub rounds: usize,
    pub iterations_per_round: usize,
    pub inner_steps: usize,
    pub teacher_steps: usize,
    pub kl_direction: String,
    pub coupling_size: usize,
    pub coupling_steps: usize,
    pub mc_rollouts: usize,
    pub n_eps_quad: usize,
}

impl Default for DistillSection {
    fn default() -> Self {
        let d = DistillConfig::default();
        DistillSection {
            rounds: d.rounds,
            iterations_per_round: d.iterations_per_round,
            inner_steps: d.inner_steps,
            teacher_steps: d.teacher_steps,
            kl_direction: "teacher_to_student".into(),
            coupling_size: d.coupling_size,
            coupling_steps: d.coupling_steps,
            mc_rollouts: d.mc_rollouts,
            n_eps_quad: d.n_eps_quad,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodeSection {
    pub steps: usize,
    pub n_samples: usize,
    /// `position = token` pairs that stay fixed during decoding.
    pub conditioning: Vec<(usize, u32)>,
}

impl Default for DecodeSection {
    fn default() -> Self {
        DecodeSection {
            steps: 1,
            n_samples: 5000,
            conditioning: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    /// Noise draws when marginalizing the one-step model joint.
    pub n_eps: usize,
    /// Probe rows for the per-token table.
    pub probe_draws: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            n_eps: 10_000,
            probe_draws: 16,
        }
    }
}

/// Complete run configuration; every module's knobs in one file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub run_name: String,
    pub seed: u64,
    pub schedule: ScheduleSection,
    pub noise: NoiseSection,
    pub model: ModelSection,
    pub dataset: DatasetSection,
    pub train: TrainSection,
    pub sdtt: DistillSection,
    pub redi: DistillSection,
    pub decode: DecodeSection,
    pub analysis: AnalysisSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text).context("parsing config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).context("parsing config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule()?;
        self.noise_spec()?.validate().map_err(anyhow::Error::new)?;
        self.dataset()?.validate().map_err(anyhow::Error::new)?;
        self.train_config().validate().map_err(anyhow::Error::new)?;
        self.model_kind()?;
        if self.decode.steps == 0 || self.decode.n_samples == 0 {
            bail!("decode steps and n_samples must be positive");
        }
        if self.analysis.n_eps == 0 {
            bail!("analysis.n_eps must be positive");
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<Schedule> {
        match self.schedule.kind.as_str() {
            "linear" => Schedule::linear(self.schedule.clip_eps).map_err(anyhow::Error::new),
            other => bail!("unknown schedule kind {other:?} (expected \"linear\")"),
        }
    }

    pub fn noise_spec(&self) -> Result<NoiseSpec> {
        let distribution = match self.noise.distribution.as_str() {
            "uniform" => NoiseDistribution::Uniform,
            "gaussian" => NoiseDistribution::Gaussian,
            other => bail!("unknown noise distribution {other:?}"),
        };
        Ok(NoiseSpec {
            distribution,
            dim: self.noise.dim,
            scale: self.noise.scale,
        })
    }

    pub fn model_kind(&self) -> Result<ModelKind> {
        match self.model.kind.as_str() {
            "mdm" => Ok(ModelKind::Mdm),
            "imdm" => Ok(ModelKind::Imdm),
            other => bail!("unknown model kind {other:?}"),
        }
    }

    pub fn model_dims(&self) -> Result<ModelDims> {
        let dataset = self.dataset()?;
        Ok(ModelDims {
            n_tokens: dataset.n_tokens(),
            seq_len: dataset.seq_len(),
            embed_dim: self.model.embed_dim,
            noise_dim: self.noise.dim,
            time_dim: self.model.time_dim,
            hidden_width: self.model.hidden_width,
        })
    }

    pub fn dataset(&self) -> Result<DatasetSpec> {
        match self.dataset.kind.as_str() {
            "synthetic_pair" => Ok(DatasetSpec::SyntheticPair),
            "explicit_list" => Ok(DatasetSpec::ExplicitList {
                n_tokens: self.dataset.n_tokens,
                seq_len: self.dataset.seq_len,
                sequences: self.dataset.sequences.clone(),
                weights: self.dataset.weights.clone(),
            }),
            other => bail!("unknown dataset kind {other:?}"),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            iterations: self.train.iterations,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            adam_beta1: self.train.adam_beta1,
            adam_beta2: self.train.adam_beta2,
            adam_eps: self.train.adam_eps,
            seed: self.train.seed,
            eval_every: self.train.eval_every,
            log_prob_floor: self.train.log_prob_floor,
        }
    }

    fn distill_config(&self, section: &DistillSection) -> Result<DistillConfig> {
        match section.kl_direction.as_str() {
            "teacher_to_student" => {}
            other => bail!("unknown kl_direction {other:?}"),
        }
        Ok(DistillConfig {
            rounds: section.rounds,
            iterations_per_round: section.iterations_per_round,
            inner_steps: section.inner_steps,
            teacher_steps: section.teacher_steps,
            kl_direction: KlDirection::TeacherToStudent,
            coupling_size: section.coupling_size,
            coupling_steps: section.coupling_steps,
            mc_rollouts: section.mc_rollouts,
            n_eps_quad: section.n_eps_quad,
            train: self.train_config(),
        })
    }

    pub fn sdtt_config(&self) -> Result<DistillConfig> {
        self.distill_config(&self.sdtt)
    }

    pub fn redi_config(&self) -> Result<DistillConfig> {
        self.distill_config(&self.redi)
    }

    pub fn decode_config(&self, mode: ModelKind, seq_len: usize) -> DecodeConfig {
        DecodeConfig {
            steps: self.decode.steps,
            mode,
            length: seq_len,
            conditioning: self.decode.conditioning.clone(),
            seed: self.seed,
            log_trajectory: false,
        }
    }

    /// Apply the environment seed override used by CI matrix runs.
    pub fn apply_env_seed(&mut self) {
        if let Ok(v) = std::env::var("IMDM_SEED") {
            if let Ok(seed) = v.parse::<u64>() {
                self.seed = seed;
                self.train.seed = seed;
            }
        }
    }
}

// Keep the ScheduleKind import honest: configs only name "linear".
#[allow(dead_code)]
fn _schedule_kind_is_linear(k: ScheduleKind) -> bool {
    matches!(k, ScheduleKind::Linear)
}
