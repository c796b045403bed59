//! `imdm` command-line harness.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use imdm_core::analysis::{
    all_tokens_equal, factorization_error, per_token_probe, probe_draws, thm1_lower_bound,
    token_entropy, validity, JointDist,
};
use imdm_core::denoiser::{Denoiser, ModelKind};
use imdm_core::distill::{combined_pipeline, redi_pipeline, sdtt_rounds};
use imdm_core::sampler::decode_batch;
use imdm_core::training::train;
use imdm_core::Rng;

use imdm_lab::config::RunConfig;
use imdm_lab::metrics::Metrics;
use imdm_lab::rundir::RunDir;
use imdm_lab::{checkpoint, exit_code_for, exit_codes, oracle, plot, repro};

#[derive(Parser)]
#[command(name = "imdm", about = "Discrete-diffusion lab: train, distill, sample, analyze", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output run directory.
    #[arg(long, short, default_value = "runs/run")]
    out: PathBuf,
    /// Emit SVG plots alongside the run artifacts.
    #[arg(long)]
    plots: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain a model on the configured dataset.
    Pretrain(ConfigArgs),
    /// Distill a pretrained teacher checkpoint.
    Distill {
        #[command(flatten)]
        common: ConfigArgs,
        /// Distillation recipe.
        #[arg(value_parser = ["sdtt", "redi", "combined"])]
        recipe: String,
        /// Teacher checkpoint path.
        #[arg(long)]
        teacher: PathBuf,
        /// Reinterpret the teacher's weights as this kind before distilling.
        #[arg(long, value_parser = ["mdm", "imdm"])]
        as_kind: Option<String>,
    },
    /// Decode samples from a checkpoint.
    Sample {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Evaluate samples from a checkpoint (validity, entropy).
    Eval {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Evaluate the i.i.d. uniform random-sequence baseline instead.
        #[arg(long)]
        random_baseline: bool,
    },
    /// Full analysis of a checkpoint: metrics.json with factorization error.
    Analyze {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Reuse the stored noise of this coupling for the error
        /// marginalization instead of fresh draws (sensitivity analysis).
        #[arg(long)]
        coupling: Option<PathBuf>,
    },
    /// Reproduce the synthetic tables end to end.
    ReproSynthetic {
        #[command(flatten)]
        common: ConfigArgs,
        /// Reduced budgets terminating in under two minutes.
        #[arg(long)]
        quick: bool,
    },
    /// Run the theorem/property oracle suites.
    Oracle {
        /// Report path (JSON).
        #[arg(long, short, default_value = "oracle_report.json")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_env_seed();
    Ok(cfg)
}

fn build_model(cfg: &RunConfig) -> Result<Denoiser> {
    let mut rng = Rng::new(cfg.seed, 100);
    Denoiser::init(cfg.model_kind()?, cfg.model_dims()?, cfg.noise_spec()?, &mut rng)
        .map_err(anyhow::Error::new)
}

fn run() -> Result<i32> {
    let cli = Cli::parse();
    match cli.command {
        Command::Pretrain(args) => {
            let cfg = load_config(&args)?;
            let dir = RunDir::create(&args.out, &cfg)?;
            let mut model = build_model(&cfg)?;
            let trace = train(
                &mut model,
                &cfg.train_config(),
                &cfg.dataset()?,
                &cfg.schedule()?,
            )
            .map_err(anyhow::Error::new)?;
            dir.write_loss_trace("loss_trace.csv", &trace)?;
            checkpoint::save(&model, &dir.file("checkpoint.imdm"))?;
            if args.plots {
                let pts: Vec<(f64, f64)> = trace
                    .iter()
                    .map(|p| (p.iteration as f64, p.loss))
                    .collect();
                dir.write_text(
                    "loss_trace.svg",
                    &plot::line_chart("training loss", &[("nelbo", &pts)]),
                )?;
            }
            println!("pretrained {} -> {}", cfg.run_name, dir.path.display());
            Ok(exit_codes::OK)
        }
        Command::Distill {
            common,
            recipe,
            teacher,
            as_kind,
        } => {
            let cfg = load_config(&common)?;
            let dir = RunDir::create(&common.out, &cfg)?;
            let mut base = checkpoint::load(&teacher)?;
            match as_kind.as_deref() {
                Some("imdm") => base = base.with_kind(ModelKind::Imdm),
                Some("mdm") => base = base.with_kind(ModelKind::Mdm),
                _ => {}
            }
            let schedule = cfg.schedule()?;
            let dataset = cfg.dataset()?;
            let student = match recipe.as_str() {
                "sdtt" => {
                    let (student, traces) =
                        sdtt_rounds(&base, &cfg.sdtt_config()?, &dataset, &schedule)
                            .map_err(anyhow::Error::new)?;
                    for (i, t) in traces.iter().enumerate() {
                        dir.write_loss_trace(&format!("sdtt_round{i}_loss.csv"), t)?;
                    }
                    student
                }
                "redi" => {
                    let (student, couplings) =
                        redi_pipeline(&base, &cfg.redi_config()?, &schedule)
                            .map_err(anyhow::Error::new)?;
                    if let Some(c) = couplings.last() {
                        imdm_lab::coupling_io::save(c, &dir.file("coupling.jsonl"))?;
                    }
                    student
                }
                "combined" => {
                    let out = combined_pipeline(
                        &base,
                        &cfg.sdtt_config()?,
                        &cfg.redi_config()?,
                        &dataset,
                        &schedule,
                    )
                    .map_err(anyhow::Error::new)?;
                    checkpoint::save(&out.after_sdtt, &dir.file("after_sdtt.imdm"))?;
                    if let Some(c) = out.couplings.last() {
                        imdm_lab::coupling_io::save(c, &dir.file("coupling.jsonl"))?;
                    }
                    out.student
                }
                _ => unreachable!("clap restricts the recipe"),
            };
            checkpoint::save(&student, &dir.file("student.imdm"))?;
            println!("distilled ({recipe}) -> {}", dir.path.display());
            Ok(exit_codes::OK)
        }
        Command::Sample { common, checkpoint: ckpt } => {
            let cfg = load_config(&common)?;
            let dir = RunDir::create(&common.out, &cfg)?;
            let model = checkpoint::load(&ckpt)?;
            let decode_cfg = cfg.decode_config(model.kind, model.dims.seq_len);
            let samples = decode_batch(&model, &decode_cfg, &cfg.schedule()?, cfg.decode.n_samples)
                .map_err(anyhow::Error::new)?;
            dir.write_samples("samples.jsonl", &samples, decode_cfg.steps, cfg.seed)?;
            println!("{} samples -> {}", samples.len(), dir.path.display());
            Ok(exit_codes::OK)
        }
        Command::Eval {
            common,
            checkpoint: ckpt,
            random_baseline,
        } => {
            let cfg = load_config(&common)?;
            let dir = RunDir::create(&common.out, &cfg)?;
            let schedule = cfg.schedule()?;
            let dataset = cfg.dataset()?;
            let data_joint = JointDist::new(
                dataset.n_tokens(),
                dataset.seq_len(),
                dataset.joint_probs(),
            )
            .map_err(anyhow::Error::new)?;
            let (bound, _) = thm1_lower_bound(&data_joint, 1.0, 0.0).map_err(anyhow::Error::new)?;
            let (samples, fact_error, steps) = if random_baseline {
                let mut rng = Rng::new(cfg.seed, 7);
                let n = dataset.n_tokens() as u32;
                let samples: Vec<imdm_core::Sequence> = (0..cfg.decode.n_samples)
                    .map(|_| imdm_core::Sequence {
                        tokens: (0..dataset.seq_len())
                            .map(|_| rng.below(n as usize) as u32)
                            .collect(),
                    })
                    .collect();
                (samples, None, 1)
            } else {
                let model = checkpoint::load(&ckpt)?;
                let decode_cfg = cfg.decode_config(model.kind, model.dims.seq_len);
                let samples =
                    decode_batch(&model, &decode_cfg, &schedule, cfg.decode.n_samples)
                        .map_err(anyhow::Error::new)?;
                (samples, None, decode_cfg.steps)
            };
            let metrics = Metrics {
                validity: validity(&samples, all_tokens_equal).map_err(anyhow::Error::new)?,
                token_entropy_nats: token_entropy(&samples, dataset.n_tokens())
                    .map_err(anyhow::Error::new)?,
                fact_error_nats: fact_error,
                thm1_bound_nats: bound,
                n_samples: samples.len(),
                n_eps: 1,
                steps,
                seed: cfg.seed,
            };
            dir.write_samples("samples.jsonl", &samples, steps, cfg.seed)?;
            dir.write_text("metrics.json", &metrics.to_json())?;
            println!("{}", metrics.to_json());
            Ok(exit_codes::OK)
        }
        Command::Analyze {
            common,
            checkpoint: ckpt,
            coupling,
        } => {
            let cfg = load_config(&common)?;
            let dir = RunDir::create(&common.out, &cfg)?;
            let schedule = cfg.schedule()?;
            let dataset = cfg.dataset()?;
            let model = checkpoint::load(&ckpt)?;
            let data_joint = JointDist::new(
                dataset.n_tokens(),
                dataset.seq_len(),
                dataset.joint_probs(),
            )
            .map_err(anyhow::Error::new)?;
            let decode_cfg = cfg.decode_config(model.kind, model.dims.seq_len);
            let samples = decode_batch(&model, &decode_cfg, &schedule, cfg.decode.n_samples)
                .map_err(anyhow::Error::new)?;
            let (err, n_eps) = match &coupling {
                Some(path) => {
                    let set = imdm_lab::coupling_io::load(path)?;
                    let draws = imdm_lab::coupling_io::to_noise_draws(&set)?;
                    let err = imdm_core::analysis::factorization_error_from_draws(
                        &model,
                        &data_joint,
                        &draws,
                    )
                    .map_err(anyhow::Error::new)?;
                    (err, draws.len())
                }
                None => {
                    let n_eps = if model.kind == ModelKind::Mdm {
                        1
                    } else {
                        cfg.analysis.n_eps
                    };
                    let err =
                        factorization_error(&model, &data_joint, n_eps, &Rng::new(cfg.seed, 17))
                            .map_err(anyhow::Error::new)?;
                    (err, n_eps)
                }
            };
            let (bound, _) = thm1_lower_bound(&data_joint, 1.0, 0.0).map_err(anyhow::Error::new)?;
            let metrics = Metrics {
                validity: validity(&samples, all_tokens_equal).map_err(anyhow::Error::new)?,
                token_entropy_nats: token_entropy(&samples, dataset.n_tokens())
                    .map_err(anyhow::Error::new)?,
                fact_error_nats: Some(err),
                thm1_bound_nats: bound,
                n_samples: samples.len(),
                n_eps,
                steps: decode_cfg.steps,
                seed: cfg.seed,
            };
            dir.write_text("metrics.json", &metrics.to_json())?;
            let draws = probe_draws(&model, cfg.analysis.probe_draws, &Rng::new(cfg.seed, 300));
            let probe = per_token_probe(&model, &draws).map_err(anyhow::Error::new)?;
            dir.write_json("per_token_probe.json", &json!({ "rows": probe }))?;
            dir.write_samples("samples.jsonl", &samples, decode_cfg.steps, cfg.seed)?;
            let mut report = String::from("# Analysis\n\n```\n");
            report.push_str(&metrics.to_json());
            report.push_str("\n```\n");
            dir.write_text("report.md", &report)?;
            if common.plots {
                // Metric curves over decoding step counts.
                let mut val_pts = Vec::new();
                let mut ent_pts = Vec::new();
                let mut csv = String::from("steps,validity,token_entropy_nats\n");
                for &steps in &[1usize, 2, 4, 8, 16] {
                    let mut dc = cfg.decode_config(model.kind, model.dims.seq_len);
                    dc.steps = steps;
                    let s = decode_batch(&model, &dc, &schedule, 1000)
                        .map_err(anyhow::Error::new)?;
                    let v = validity(&s, all_tokens_equal).map_err(anyhow::Error::new)?;
                    let e = token_entropy(&s, dataset.n_tokens()).map_err(anyhow::Error::new)?;
                    val_pts.push((steps as f64, v));
                    ent_pts.push((steps as f64, e));
                    csv.push_str(&format!("{steps},{v},{e}\n"));
                }
                dir.write_text("per_step_metrics.csv", &csv)?;
                dir.write_text(
                    "per_step_metrics.svg",
                    &plot::line_chart(
                        "metrics vs decoding steps",
                        &[("validity", &val_pts), ("token entropy", &ent_pts)],
                    ),
                )?;
            }
            println!("{}", metrics.to_json());
            Ok(exit_codes::OK)
        }
        Command::ReproSynthetic { common, quick } => {
            let cfg = load_config(&common)?;
            let dir = RunDir::create(&common.out, &cfg)?;
            let outcome = repro::run_bundle(&cfg, &dir, quick)?;
            println!("{}", repro::render_report(&outcome, quick));
            if common.plots {
                let v = vec![
                    (0.0, outcome.mdm_metrics.validity),
                    (1.0, outcome.imdm_metrics.validity),
                ];
                dir.write_text(
                    "validity.svg",
                    &plot::line_chart("one-step validity (0 = masked, 1 = infinite-mask)", &[("validity", &v)]),
                )?;
            }
            if outcome.all_pass() {
                Ok(exit_codes::OK)
            } else {
                Ok(exit_codes::PROPERTY)
            }
        }
        Command::Oracle { out, seed } => {
            let seed = std::env::var("IMDM_SEED")
                .ok()
                .and_then(|v| v.parse().ok())
                .unwrap_or(seed);
            let results = oracle::run_all(seed);
            let doc = json!({
                "seed": seed,
                "suites": results,
                "passed": results.iter().all(|r| r.passed),
            });
            std::fs::write(&out, serde_json::to_string_pretty(&doc)?)
                .with_context(|| format!("writing {}", out.display()))?;
            for r in &results {
                println!(
                    "{:<22} {}  worst {:.3e} (tol {:.0e})  {}",
                    r.name,
                    if r.passed { "pass" } else { "FAIL" },
                    r.worst,
                    r.tolerance,
                    r.detail
                );
            }
            if results.iter().all(|r| r.passed) {
                Ok(exit_codes::OK)
            } else {
                Ok(exit_codes::PROPERTY)
            }
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .downcast_ref::<imdm_core::Error>()
                .map(exit_code_for)
                .unwrap_or(exit_codes::CONFIG);
            ExitCode::from(code as u8)
        }
    }
}
