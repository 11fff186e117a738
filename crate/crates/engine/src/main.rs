use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use ddsp_sfx::audio::{ingest, write_wav};
use ddsp_sfx::cache::preprocess;
use ddsp_sfx::config::RunConfig;
use ddsp_sfx::eval::{evaluate_corpus, EmbeddingFiles};
use ddsp_sfx::server::{serve, AppState};
use ddsp_sfx::synth::{synthesize, Source, SynthesisRequest, ZMode};
use ddsp_sfx::training::train_from_cache;
use ddsp_sfx::load_model;
use ddsp_sfx_core::FrameConfig;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "ddsp-sfx", version, about = "Neural sound-effects synthesis with timbre control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze every WAV in a directory into a feature cache
    Preprocess {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Seed of the train/test split
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train on the cache's training split and write a checkpoint
    Train {
        /// TOML file with [model] and [train] tables
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        cache: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a guiding sound through a checkpoint
    Synth {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        /// `encoded`, a constant such as `1.5`, or a file of per-frame values
        #[arg(long, default_value = "encoded", allow_hyphen_values = true)]
        z: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sample the encoded latent with the seed instead of using its mean
        #[arg(long)]
        sample_latent: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare generated clips against references paired by file name
    Eval {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long = "gen")]
        generated: PathBuf,
        #[arg(long, requires = "emb_gen")]
        emb_ref: Option<PathBuf>,
        #[arg(long, requires = "emb_ref")]
        emb_gen: Option<PathBuf>,
        /// Write the report here instead of standard output
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API and optionally a static UI bundle
    Serve {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
}

fn parse_z(arg: &str) -> anyhow::Result<ZMode> {
    if arg == "encoded" {
        return Ok(ZMode::Encoded);
    }
    if let Ok(v) = arg.parse::<f64>() {
        return Ok(ZMode::Constant(v));
    }
    let text = std::fs::read_to_string(arg).with_context(|| format!("reading z curve {arg}"))?;
    Ok(ZMode::Curve(parse_curve(&text).with_context(|| format!("parsing z curve {arg}"))?))
}

/// A JSON array or whitespace/comma separated numbers.
fn parse_curve(text: &str) -> anyhow::Result<Vec<f64>> {
    if text.trim_start().starts_with('[') {
        return Ok(serde_json::from_str(text)?);
    }
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(anyhow::Error::from))
        .collect()
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Preprocess { input, out, seed } => {
            let summary = preprocess(&input, &out, &FrameConfig::default(), seed)?;
            println!(
                "computed={} reused={} failed={}",
                summary.computed.len(),
                summary.reused.len(),
                summary.failed.len()
            );
            for (path, err) in &summary.failed {
                eprintln!("failed {}: {err}", path.display());
            }
        }
        Command::Train { config, cache, out } => {
            let cfg = RunConfig::load(&config)?;
            let reports = train_from_cache(&cfg, &cache, &out)?;
            if let Some(last) = reports.last() {
                println!("steps={} final_loss={} final_rec={}", reports.len(), last.loss, last.rec);
            }
        }
        Command::Synth {
            ckpt,
            input,
            z,
            seed,
            sample_latent,
            out,
        } => {
            let (model, _) = load_model(&ckpt)?;
            let clip = ingest(&input, model.frame())?;
            let req = SynthesisRequest {
                source: Source::Audio(clip),
                z: parse_z(&z)?,
                seed,
                sample_latent,
            };
            write_wav(&out, &synthesize(&model, &req)?)?;
        }
        Command::Eval {
            reference,
            generated,
            emb_ref,
            emb_gen,
            out,
        } => {
            let embeddings = match (emb_ref, emb_gen) {
                (Some(reference), Some(generated)) => Some(EmbeddingFiles { reference, generated }),
                (None, None) => None,
                _ => bail!("--emb-ref and --emb-gen go together"),
            };
            let report = evaluate_corpus(&reference, &generated, embeddings.as_ref(), &FrameConfig::default())?;
            write_report(out.as_deref(), &report.to_key_value())?;
        }
        Command::Serve { ckpt, port, static_dir } => {
            let (model, step) = load_model(&ckpt)?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(serve(AppState::new(model, step), port, static_dir))?;
        }
    }
    Ok(())
}

fn write_report(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
