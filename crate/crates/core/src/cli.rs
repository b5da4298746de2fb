//! Command-line front end. Flags override the `--config` file, which
//! overrides the built-in defaults.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::bleu::Smoothing;
use crate::data::Task;
use crate::error::Result;
use crate::train::configure_threads;
use crate::train::rl::{Approach, ScheduleKind};
use crate::workbench::{cmd_decode, cmd_eval, cmd_gen_data, cmd_pretrain, cmd_rl, cmd_stats, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "levrl", version, about = "Edit-based sequence generation: supervised pre-training and REINFORCE fine-tuning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset into --data-dir.
    GenData,
    /// Supervised pre-training; writes pretrain.ckpt.
    Pretrain {
        /// Continue from the existing checkpoint instead of starting over.
        #[arg(long)]
        resume: bool,
    },
    /// REINFORCE fine-tuning of the pre-trained checkpoint.
    Rl,
    /// Greedy-decode a JSONL file of {"src": [...]} lines.
    Decode {
        /// Input file (default: <data-dir>/test.jsonl).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output file (default: <out-dir>/decode.jsonl).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Corpus BLEU x100 against a reference JSONL file.
    Eval {
        /// Reference pairs (default: <data-dir>/test.jsonl).
        #[arg(long)]
        refs: Option<PathBuf>,
        /// Score these {"hyp": [...]} lines instead of decoding.
        #[arg(long)]
        hyps: Option<PathBuf>,
    },
    /// Print the advantage standard-deviation table of the last RL run.
    Stats,
}

/// Overrides shared by every subcommand. `--steps`, `--batch` and `--lr`
/// apply to pre-training under `pretrain` and to fine-tuning otherwise.
#[derive(Debug, Default, Args)]
pub struct Flags {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// copy | reverse | sort | lexmap
    #[arg(long, global = true)]
    pub task: Option<Task>,
    /// Total vocabulary size, reserved ids included.
    #[arg(long, global = true)]
    pub vocab_size: Option<usize>,
    /// Root seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub steps: Option<u64>,
    #[arg(long, global = true)]
    pub batch: Option<usize>,
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    /// stepwise | episodic
    #[arg(long, global = true)]
    pub approach: Option<Approach>,
    /// Samples per source [default: 5]
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Refinement iterations per rollout [default: 3]
    #[arg(long, global = true)]
    pub iterations: Option<usize>,
    /// Placeholder cap per slot [default: 64]
    #[arg(long, global = true)]
    pub max_placeholders: Option<usize>,
    /// constant | anneal-down | anneal-up
    #[arg(long, global = true)]
    pub schedule: Option<ScheduleKind>,
    #[arg(long, global = true)]
    pub tau0: Option<f64>,
    #[arg(long = "tauT", global = true)]
    pub tau_t: Option<f64>,
    /// none | addone
    #[arg(long, global = true)]
    pub reward_smoothing: Option<Smoothing>,
    /// Pre-trained checkpoint (default: <out-dir>/pretrain.ckpt).
    #[arg(long, global = true)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    /// Run the five-setting temperature sweep.
    #[arg(long, global = true)]
    pub sweep: bool,
    #[arg(long, global = true, env = "LEVRL_THREADS")]
    pub threads: Option<usize>,
}

impl Flags {
    /// Applies the overrides; `pretraining` routes the optimisation flags.
    pub fn apply(&self, cfg: &mut RunConfig, pretraining: bool) {
        if let Some(s) = self.seed {
            cfg.set_seed(s);
        }
        if let Some(t) = self.task {
            cfg.data.task = t;
        }
        if let Some(v) = self.vocab_size {
            cfg.data.vocab_size = v;
            cfg.model.vocab_size = v;
        }
        if pretraining {
            set(&mut cfg.pretrain.steps, self.steps);
            set(&mut cfg.pretrain.batch_size, self.batch);
            set(&mut cfg.pretrain.lr, self.lr);
        } else {
            set(&mut cfg.rl.steps, self.steps);
            set(&mut cfg.rl.batch_size, self.batch);
            set(&mut cfg.rl.lr, self.lr);
        }
        set(&mut cfg.rl.approach, self.approach);
        set(&mut cfg.rl.k, self.k);
        set(&mut cfg.rl.n_iterations, self.iterations);
        set(&mut cfg.model.max_placeholders, self.max_placeholders);
        set(&mut cfg.rl.schedule, self.schedule);
        set(&mut cfg.rl.tau0, self.tau0);
        set(&mut cfg.rl.tau_t, self.tau_t);
        set(&mut cfg.rl.reward_smoothing, self.reward_smoothing);
        if self.checkpoint.is_some() {
            cfg.checkpoint = self.checkpoint.clone();
        }
        set(&mut cfg.out_dir, self.out_dir.clone());
        set(&mut cfg.data_dir, self.data_dir.clone());
        cfg.sweep |= self.sweep;
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
    }
}

fn set<V>(slot: &mut V, v: Option<V>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// Builds the run configuration for `cli`.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.flags.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cli.flags.apply(&mut cfg, matches!(cli.command, Command::Pretrain { .. }));
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = resolve(&cli)?;
    configure_threads(cfg.threads);
    match cli.command {
        Command::GenData => cmd_gen_data(&cfg, out).map(drop),
        Command::Pretrain { resume } => cmd_pretrain(&cfg, resume, out).map(drop),
        Command::Rl => cmd_rl(&cfg, out).map(drop),
        Command::Decode { input, output } => cmd_decode(&cfg, input.as_deref(), output.as_deref(), out).map(drop),
        Command::Eval { refs, hyps } => cmd_eval(&cfg, refs.as_deref(), hyps.as_deref(), out).map(drop),
        Command::Stats => cmd_stats(&cfg, out).map(drop),
    }
}

/// Entry point of the binary: parses `std::env::args`, runs, and maps
/// failures to exit status 1 with the error on stderr.
pub fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("levrl: {e}");
            std::process::ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("levrl").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_route_to_the_right_section() {
        let cli = parse(&["rl", "--approach", "stepwise", "--k", "7", "--tauT", "0.2", "--schedule", "anneal-down", "--steps", "9", "--seed", "4"]);
        let cfg = resolve(&cli).unwrap();
        assert_eq!(cfg.rl.approach, Approach::Stepwise);
        assert_eq!((cfg.rl.k, cfg.rl.tau_t, cfg.rl.steps), (7, 0.2, 9));
        assert_eq!(cfg.rl.schedule, ScheduleKind::AnnealDown);
        assert_eq!(cfg.pretrain.steps, RunConfig::default().pretrain.steps);
        assert_eq!(cfg.data.seed, 4);

        let cfg = resolve(&parse(&["pretrain", "--steps", "11", "--vocab-size", "20", "--reward-smoothing", "none"])).unwrap();
        assert_eq!(cfg.pretrain.steps, 11);
        assert_eq!((cfg.model.vocab_size, cfg.data.vocab_size), (20, 20));
        assert_eq!(cfg.rl.reward_smoothing, Smoothing::None);
    }

    #[test]
    fn bad_values_are_rejected() {
        let err = |args: &[&str]| Cli::try_parse_from(std::iter::once("levrl").chain(args.iter().copied())).is_err();
        assert!(err(&["rl", "--approach", "greedy"]));
        assert!(err(&["rl", "--schedule", "cosine"]));
        assert!(err(&["frobnicate"]));
        // parses, but fails validation
        assert!(resolve(&parse(&["rl", "--k", "1"])).is_err());
    }
}
