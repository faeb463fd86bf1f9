use std::io::{self, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nca::chat::{self, ChatOptions};
use nca::checkpoint::Checkpoint;
use nca::corpus::{load_corpus, Format};
use nca::log::{read_log, LogWriter};
use nca::report::{diversity_table, probe_table};
use nca::server::{system_clock, AppState, ServerOptions};
use nca::training::{self, TrainJob};
use nca_core::decode::Ordering;
use nca_core::eval::{diversity, interaction_sweep, lr_sweep, ProbeSets};
use nca_core::train::TwoPhaseConfig;
use nca_core::{replay_records, Session, SessionConfig};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(
    name = "nca",
    version,
    about = "Train, chat with and serve an online-learning seq2seq agent"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Supervised training on a generic corpus, then optionally a second one.
    Train(TrainArgs),
    /// Terminal conversation with online updates.
    Chat(ChatArgs),
    /// HTTP JSON API.
    Serve(ServeArgs),
    /// Re-apply an interaction log to a checkpoint.
    Replay(ReplayArgs),
    /// Learning-rate, interaction-count or diversity probes.
    Eval(EvalArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    phase1: PathBuf,
    #[arg(long)]
    phase2: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Corpus format; inferred from the file extension by default.
    #[arg(long)]
    format: Option<Format>,
    #[arg(long, default_value_t = 64)]
    embed_dim: usize,
    #[arg(long, default_value_t = 64)]
    hidden_dim: usize,
    #[arg(long, default_value_t = 20)]
    max_len: usize,
    #[arg(long, default_value_t = 1)]
    min_freq: usize,
    #[arg(long, default_value_t = 8000)]
    max_vocab: usize,
    #[arg(long, default_value_t = 30)]
    epochs_a: usize,
    #[arg(long, default_value_t = 30)]
    epochs_b: usize,
    #[arg(long, default_value_t = 0.001)]
    lr_a: f64,
    #[arg(long, default_value_t = 0.001)]
    lr_b: f64,
    #[arg(long, default_value_t = 10)]
    batch_size: usize,
    /// Skip the per-epoch checkpoints.
    #[arg(long)]
    final_only: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Clone, Copy)]
struct SessionArgs {
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Online learning rate; 0.005 is the one-shot preset.
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 100.0)]
    lambda_first: f64,
    #[arg(long, default_value_t = 2.0)]
    lambda_rest: f64,
    /// likelihood or random
    #[arg(long, default_value = "likelihood", value_parser = parse_ordering)]
    ordering: Ordering,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_ordering(s: &str) -> Result<Ordering, String> {
    match s {
        "likelihood" => Ok(Ordering::Likelihood),
        "random" => Ok(Ordering::Random),
        _ => Err(format!("expected likelihood or random, got {s:?}")),
    }
}

impl SessionArgs {
    fn config(&self) -> Result<SessionConfig> {
        let cfg = SessionConfig {
            k: self.k,
            lr: self.lr,
            lambda_first: self.lambda_first,
            lambda_rest: self.lambda_rest,
            ordering: self.ordering,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct ChatArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Append each turn to this JSONL file.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Print candidate log-probabilities.
    #[arg(long)]
    show_scores: bool,
    #[command(flatten)]
    session: SessionArgs,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long, env = "NCA_PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    /// Base path of per-session logs: `chat.jsonl` yields `chat.<session>.jsonl`.
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    session: SessionArgs,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    log: PathBuf,
    /// Use this learning rate instead of the logged ones.
    #[arg(long)]
    lr: Option<f64>,
    /// Write the replayed weights here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Accepted for uniformity; replay draws no random numbers.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Suite {
    Lr,
    Interactions,
    Diversity,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long, value_enum)]
    suite: Suite,
    /// Pairs applied as online updates (lr suite) and probed for recall.
    #[arg(long)]
    pairs: PathBuf,
    /// Pairs never trained on, for perplexity drift; defaults to --pairs.
    #[arg(long)]
    heldout: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.0001, 0.001, 0.005, 0.01, 0.05, 0.1])]
    lrs: Vec<f64>,
    /// Interaction log for the interactions suite.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    prefixes: Vec<usize>,
    /// Replay learning rate override for the interactions suite.
    #[arg(long)]
    replay_lr: Option<f64>,
    #[command(flatten)]
    session: SessionArgs,
}

fn params_digest(c: &Checkpoint) -> String {
    let mut h = Sha256::new();
    for t in c.params.tensors() {
        for x in t.data() {
            h.update(x.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

fn load_pairs(path: &PathBuf) -> Result<Vec<(String, String)>> {
    let c = load_corpus(path, Format::from_path(path))?;
    if c.malformed > 0 {
        eprintln!(
            "warning: {}: skipped {} malformed lines",
            path.display(),
            c.malformed
        );
    }
    Ok(c.pairs)
}

fn train(a: TrainArgs) -> Result<()> {
    let mut job = TrainJob::new(a.phase1, a.phase2, a.out);
    job.format = a.format;
    job.embed_dim = a.embed_dim;
    job.hidden_dim = a.hidden_dim;
    job.max_len = a.max_len;
    job.min_freq = a.min_freq;
    job.max_vocab = a.max_vocab;
    job.epoch_checkpoints = !a.final_only;
    job.schedule = TwoPhaseConfig {
        epochs_a: a.epochs_a,
        epochs_b: a.epochs_b,
        lr_a: a.lr_a,
        lr_b: a.lr_b,
        batch_size: a.batch_size,
        seed: a.seed,
    };
    let ckpt = training::run(&job, |p| {
        eprintln!(
            "phase {} epoch {:>3}  loss {:.4}  tokens {}",
            p.phase, p.epoch, p.mean_loss, p.tokens
        )
    })?;
    println!(
        "wrote {} (vocabulary {}, params {})",
        job.out.display(),
        ckpt.vocab.len(),
        params_digest(&ckpt)
    );
    Ok(())
}

fn chat(a: ChatArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&a.ckpt)?;
    let mut session = Session::new(
        "terminal",
        ckpt.params,
        Arc::new(ckpt.vocab),
        a.session.config()?,
    )
    .with_clock(Box::new(system_clock));
    let mut log = a.log.as_ref().map(LogWriter::open).transpose()?;
    let stdin = io::stdin();
    chat::run(
        &mut session,
        stdin.lock(),
        io::stdout().lock(),
        log.as_mut(),
        ChatOptions {
            show_scores: a.show_scores,
        },
    )?;
    writeln!(io::stdout())?;
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let ckpt = a.ckpt.as_ref().map(Checkpoint::load).transpose()?;
    let opts = ServerOptions {
        log: a.log,
        defaults: a.session.config()?,
        ..ServerOptions::default()
    };
    let state = AppState::new(ckpt, opts);
    let addr = SocketAddr::new(a.host, a.port);
    tokio::runtime::Runtime::new()?.block_on(nca::server::serve(state, addr))?;
    Ok(())
}

fn replay(a: ReplayArgs) -> Result<()> {
    let mut ckpt = Checkpoint::load(&a.ckpt)?;
    let records = read_log(&a.log)?;
    let adam = replay_records(&mut ckpt.params, &ckpt.vocab, &records, a.lr)
        .with_context(|| format!("replaying {}", a.log.display()))?;
    let updates = records.iter().filter(|r| r.updated()).count();
    println!(
        "replayed {} records ({updates} updates); params {}",
        records.len(),
        params_digest(&ckpt)
    );
    if let Some(out) = a.out {
        ckpt.provenance.online_updates += updates;
        ckpt.adam = Some(adam);
        ckpt.save(&out)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&a.ckpt)?;
    let pairs = load_pairs(&a.pairs)?;
    let heldout = match &a.heldout {
        Some(p) => load_pairs(p)?,
        None => pairs.clone(),
    };
    let decode = a.session.config()?.decode(ckpt.hyper().max_len);
    let sets = ProbeSets {
        probes: &pairs,
        heldout: &heldout,
        decode,
        seed: a.session.seed,
    };
    let (json, table) = match a.suite {
        Suite::Lr => {
            let r = lr_sweep(&ckpt.params, &ckpt.vocab, &pairs, &sets, &a.lrs)?;
            let mut t = probe_table(&r);
            if let Some(lr) = r.best_lr() {
                t.push_str(&format!("best lr {lr}\n"));
            }
            (serde_json::to_string_pretty(&r)?, t)
        }
        Suite::Interactions => {
            let Some(log) = &a.log else {
                bail!("--log is required for the interactions suite");
            };
            let records = read_log(log)?;
            let prefixes = if a.prefixes.is_empty() {
                (0..=records.len()).collect()
            } else {
                a.prefixes.clone()
            };
            let r = interaction_sweep(
                &ckpt.params,
                &ckpt.vocab,
                &records,
                &prefixes,
                &sets,
                a.replay_lr,
            )?;
            (serde_json::to_string_pretty(&r)?, probe_table(&r))
        }
        Suite::Diversity => {
            let r = diversity(&ckpt.params, &ckpt.vocab, &pairs, &decode)?;
            (serde_json::to_string_pretty(&r)?, diversity_table(&r))
        }
    };
    println!("{json}\n\n{table}");
    Ok(())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(io::stderr)
        .init();
    match Cli::parse().command {
        Command::Train(a) => train(a),
        Command::Chat(a) => chat(a),
        Command::Serve(a) => serve(a),
        Command::Replay(a) => replay(a),
        Command::Eval(a) => eval(a),
    }
}
