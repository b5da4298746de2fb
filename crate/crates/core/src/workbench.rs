//! Run configuration and the commands behind the `levrl` binary.
//!
//! Every command reads one validated [`RunConfig`] and writes its artifacts
//! under `out_dir`:
//!
//! | command  | artifacts |
//! |----------|-----------|
//! | gen-data | `data_dir/{train,valid,test}.jsonl`, `vocab.txt`, `spec.json` |
//! | pretrain | `pretrain.ckpt`, `pretrain_metrics.jsonl` |
//! | rl       | `rl.ckpt`, `rl_metrics.jsonl`, `advantage_sd.csv`, `advantage_stats.json`, `traces.jsonl` |
//! | rl sweep | `temperature_sweep.csv`, `sweep/<schedule>/rl_metrics.jsonl` |
//! | decode   | `decode.jsonl` (or `--output`) |
//!
//! `eval` and `stats` only print.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::data::{gen_dataset, read_jsonl, read_pairs, Dataset, DatasetSpec, Pair};
use crate::error::{Error, Result};
use crate::model::{LevenshteinModel, ModelConfig};
use crate::rng::substream;
use crate::train::rl::{
    rl_finetune, sample_traces, trajectory_violations, AdvantageRow, RlConfig, TemperatureSchedule,
};
use crate::train::supervised::{PretrainConfig, Pretrainer};
use crate::train::{decode_all, DECODE_ITERS};
use crate::bleu::corpus_bleu;
use crate::vocab::Token;

/// Everything a run needs. Unknown keys in a config file are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Root seed; also the seed of the parameter initialisation stream.
    pub seed: u64,
    /// Worker threads; `None` uses every core.
    pub threads: Option<usize>,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Pre-trained checkpoint; defaults to `out_dir/pretrain.ckpt`.
    pub checkpoint: Option<PathBuf>,
    pub data: DatasetSpec,
    pub model: ModelConfig,
    pub pretrain: PretrainConfig,
    pub rl: RlConfig,
    /// Run the five-setting temperature comparison instead of one RL run.
    pub sweep: bool,
    /// Sampled rollouts dumped to `traces.jsonl` after RL.
    pub trace_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            threads: None,
            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("out"),
            checkpoint: None,
            data: DatasetSpec::default(),
            model: ModelConfig {
                vocab_size: 32,
                max_seq_len: 32,
                ..ModelConfig::default()
            },
            pretrain: PretrainConfig::default(),
            rl: RlConfig::default(),
            sweep: false,
            trace_samples: 8,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Sets the root seed and every per-component seed to `seed`.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.data.seed = seed;
        self.pretrain.seed = seed;
        self.rl.seed = seed;
    }

    /// Every violated constraint across all sections, empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut v = self.data.violations();
        v.extend(self.model.violations());
        v.extend(self.pretrain.violations().into_iter().map(|m| format!("pretrain: {m}")));
        v.extend(self.rl.violations().into_iter().map(|m| format!("rl: {m}")));
        if self.model.vocab_size != self.data.vocab_size {
            v.push(format!(
                "model.vocab_size ({}) must equal data.vocab_size ({})",
                self.model.vocab_size, self.data.vocab_size
            ));
        }
        // sequences carry BOS and EOS
        if self.model.max_seq_len < self.data.max_len + 2 {
            v.push(format!(
                "model.max_seq_len ({}) must be at least data.max_len + 2 ({})",
                self.model.max_seq_len,
                self.data.max_len + 2
            ));
        }
        if self.threads == Some(0) {
            v.push("threads must be at least 1".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    pub fn pretrain_checkpoint(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.out_dir.join("pretrain.ckpt"))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Line-delimited JSON sink.
struct JsonLines {
    path: PathBuf,
    w: BufWriter<File>,
}

impl JsonLines {
    fn create(path: PathBuf) -> Result<Self> {
        Ok(JsonLines { w: create(&path)?, path })
    }

    fn append(path: PathBuf) -> Result<Self> {
        let f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(JsonLines { w: BufWriter::new(f), path })
    }

    fn write<V: Serialize>(&mut self, v: &V) -> Result<()> {
        serde_json::to_writer(&mut self.w, v).map_err(|e| Error::io(&self.path, e.into()))?;
        self.w.write_all(b"\n").map_err(|e| Error::io(&self.path, e))
    }

    fn finish(mut self) -> Result<()> {
        self.w.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn say(out: &mut dyn Write, line: std::fmt::Arguments) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))
}

/// Loads `data_dir` when it holds a dataset, otherwise generates and saves
/// one. A stored dataset built from a different spec is an error.
pub fn load_or_generate(cfg: &RunConfig) -> Result<Dataset> {
    if cfg.data_dir.join("spec.json").exists() {
        let ds = Dataset::load(&cfg.data_dir)?;
        if ds.spec != cfg.data {
            return Err(Error::Config(vec![format!(
                "{} holds a dataset generated from a different spec; rerun `levrl gen-data` or choose another --data-dir",
                cfg.data_dir.display()
            )]));
        }
        return Ok(ds);
    }
    let ds = gen_dataset(&cfg.data)?;
    ds.save(&cfg.data_dir)?;
    Ok(ds)
}

/// Loads a model checkpoint, requiring it to exist and to match `cfg.model`.
pub fn load_model(cfg: &RunConfig, path: &Path) -> Result<Checkpoint<f32>> {
    if !path.exists() {
        return Err(Error::Config(vec![format!(
            "no checkpoint at {}; run `levrl pretrain` first or pass --checkpoint",
            path.display()
        )]));
    }
    let ck = Checkpoint::<f32>::load(path)?;
    if ck.model.config() != &cfg.model {
        return Err(Error::Config(vec![format!(
            "checkpoint {} was trained with model config {:?}, but the run config asks for {:?}",
            path.display(),
            ck.model.config(),
            cfg.model
        )]));
    }
    Ok(ck)
}

pub fn cmd_gen_data(cfg: &RunConfig, out: &mut dyn Write) -> Result<Dataset> {
    cfg.validate()?;
    let ds = gen_dataset(&cfg.data)?;
    ds.save(&cfg.data_dir)?;
    say(
        out,
        format_args!(
            "{} data: {} train / {} valid / {} test pairs in {}",
            cfg.data.task,
            ds.train.len(),
            ds.valid.len(),
            ds.test.len(),
            cfg.data_dir.display()
        ),
    )?;
    Ok(ds)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PretrainSummary {
    pub checkpoint: PathBuf,
    pub steps: u64,
    /// Last held-out corpus BLEU (0..1), if any evaluation ran.
    pub heldout_bleu: Option<f64>,
}

/// Pre-trains from scratch, or continues the checkpoint at
/// [`RunConfig::pretrain_checkpoint`] when `resume` is set.
pub fn cmd_pretrain(cfg: &RunConfig, resume: bool, out: &mut dyn Write) -> Result<PretrainSummary> {
    cfg.validate()?;
    let ds = load_or_generate(cfg)?;
    let path = cfg.pretrain_checkpoint();
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let metrics = cfg.out_dir.join("pretrain_metrics.jsonl");
    let (mut trainer, mut log) = if resume {
        let ck = load_model(cfg, &path)?;
        (Pretrainer::resume(ck, cfg.pretrain.clone())?, JsonLines::append(metrics)?)
    } else {
        let model = LevenshteinModel::<f32>::new(cfg.model.clone(), &mut substream(cfg.seed, "init", &[]))?;
        (Pretrainer::new(model, cfg.pretrain.clone())?, JsonLines::create(metrics)?)
    };
    let start = trainer.step();
    let bleu = trainer.run(&ds.train, &ds.valid, &mut |r| {
        if let Some(b) = r.heldout_bleu {
            say(
                out,
                format_args!(
                    "step {:>6}  ce del {:.3} ins {:.3} tok {:.3}  held-out BLEU {:.2}",
                    r.step,
                    r.delete_ce,
                    r.insert_ce,
                    r.token_ce,
                    100.0 * b
                ),
            )?;
        }
        log.write(r)
    })?;
    log.finish()?;
    trainer.checkpoint().save(&path)?;
    say(
        out,
        format_args!("pretrained steps {start}..{} -> {}", trainer.step(), path.display()),
    )?;
    Ok(PretrainSummary {
        checkpoint: path,
        steps: trainer.step(),
        heldout_bleu: bleu,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RlSummary {
    pub schedule: String,
    pub initial_bleu: f64,
    pub final_bleu: f64,
    pub advantage_rows: Vec<AdvantageRow>,
}

/// One row of the temperature comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub schedule: String,
    pub initial_bleu: f64,
    pub final_bleu: f64,
    pub tau_first: f64,
    pub tau_last: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RlReport {
    Single(RlSummary),
    Sweep(Vec<SweepRow>),
}

/// The five compared settings: constant 1, 0.5 and 0.1, annealing 1 -> 0.1
/// and 0.1 -> 1, each over `steps` updates.
pub fn sweep_schedules(steps: u64) -> Vec<TemperatureSchedule> {
    vec![
        TemperatureSchedule::constant(1.0),
        TemperatureSchedule::constant(0.5),
        TemperatureSchedule::constant(0.1),
        TemperatureSchedule::anneal_down(1.0, 0.1, steps),
        TemperatureSchedule::anneal_up(0.1, 1.0, steps),
    ]
}

fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '-' })
        .collect::<String>()
        .split('-')
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("-")
}

/// REINFORCE fine-tuning from the pre-trained checkpoint, or the temperature
/// sweep when `cfg.sweep` is set.
pub fn cmd_rl(cfg: &RunConfig, out: &mut dyn Write) -> Result<RlReport> {
    cfg.validate()?;
    let ck = load_model(cfg, &cfg.pretrain_checkpoint())?;
    let ds = load_or_generate(cfg)?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    if cfg.sweep {
        return run_sweep(cfg, &ck.model, &ds, out).map(RlReport::Sweep);
    }
    let schedule = cfg.rl.schedule();
    let mut log = JsonLines::create(cfg.out_dir.join("rl_metrics.jsonl"))?;
    let outcome = rl_finetune(ck.model, &ds.train, &ds.valid, &cfg.rl, &mut |r| {
        if let Some(b) = r.heldout_bleu {
            say(
                out,
                format_args!(
                    "step {:>6}  tau {:.4}  reward {:.4}  held-out BLEU {:.2}",
                    r.update.step + 1,
                    r.update.tau,
                    r.update.mean_reward,
                    100.0 * b
                ),
            )?;
        }
        log.write(r)
    })?;
    log.finish()?;
    let bad = trajectory_violations(&schedule, &outcome.taus);
    if !bad.is_empty() {
        return Err(Error::State(bad.join("; ")));
    }

    let mut saved = Checkpoint::new(outcome.model);
    saved.step = cfg.rl.steps;
    saved.meta = serde_json::json!({"phase": "rl", "approach": cfg.rl.approach, "schedule": schedule.label(), "seed": cfg.rl.seed});
    saved.save(cfg.out_dir.join("rl.ckpt"))?;
    write_text(&cfg.out_dir.join("advantage_sd.csv"), &outcome.stats.to_csv(100.0))?;
    let rows = outcome.stats.rows();
    write_text(
        &cfg.out_dir.join("advantage_stats.json"),
        &(serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n"),
    )?;
    let n = cfg.trace_samples.min(ds.valid.len());
    let tau = outcome.taus.last().copied().unwrap_or(cfg.rl.tau0);
    let traces = sample_traces(
        &saved.model,
        &ds.valid[..n],
        cfg.rl.n_iterations,
        tau,
        cfg.rl.reward_smoothing,
        cfg.rl.seed,
    )?;
    let mut tlog = JsonLines::create(cfg.out_dir.join("traces.jsonl"))?;
    for t in &traces {
        tlog.write(t)?;
    }
    tlog.finish()?;
    say(
        out,
        format_args!(
            "{} rl ({}): held-out BLEU {:.2} -> {:.2}",
            cfg.rl.approach,
            schedule.label(),
            100.0 * outcome.initial_bleu,
            100.0 * outcome.final_bleu
        ),
    )?;
    Ok(RlReport::Single(RlSummary {
        schedule: schedule.label(),
        initial_bleu: outcome.initial_bleu,
        final_bleu: outcome.final_bleu,
        advantage_rows: rows,
    }))
}

fn run_sweep(cfg: &RunConfig, model: &LevenshteinModel<f32>, ds: &Dataset, out: &mut dyn Write) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for schedule in sweep_schedules(cfg.rl.steps) {
        let label = schedule.label();
        let rl = RlConfig {
            schedule: schedule.kind,
            tau0: schedule.tau0,
            tau_t: schedule.tau_t,
            ..cfg.rl.clone()
        };
        let dir = cfg.out_dir.join("sweep").join(slug(&label));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut log = JsonLines::create(dir.join("rl_metrics.jsonl"))?;
        let outcome = rl_finetune(model.clone(), &ds.train, &ds.valid, &rl, &mut |r| log.write(r))?;
        log.finish()?;
        let bad = trajectory_violations(&schedule, &outcome.taus);
        if !bad.is_empty() {
            return Err(Error::State(format!("{label}: {}", bad.join("; "))));
        }
        say(
            out,
            format_args!(
                "{label:<18} BLEU {:.2} -> {:.2}",
                100.0 * outcome.initial_bleu,
                100.0 * outcome.final_bleu
            ),
        )?;
        rows.push(SweepRow {
            schedule: label,
            initial_bleu: outcome.initial_bleu,
            final_bleu: outcome.final_bleu,
            tau_first: outcome.taus.first().copied().unwrap_or(schedule.tau0),
            tau_last: outcome.taus.last().copied().unwrap_or(schedule.tau0),
        });
    }
    write_text(&cfg.out_dir.join("temperature_sweep.csv"), &sweep_csv(&rows))?;
    Ok(rows)
}

/// `schedule,bleu` with BLEU on the 0..100 scale.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("schedule,bleu\n");
    for r in rows {
        s.push_str(&format!("{},{:.2}\n", r.schedule, 100.0 * r.final_bleu));
    }
    s
}

/// One line of a decode output file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decoded {
    #[serde(default)]
    pub src: Vec<Token>,
    pub hyp: Vec<Token>,
}

#[derive(Deserialize)]
struct SourceLine {
    src: Vec<Token>,
}

/// Greedy-decodes every `src` of `input` (default: the test split) with the
/// model at [`RunConfig::pretrain_checkpoint`].
pub fn cmd_decode(cfg: &RunConfig, input: Option<&Path>, output: Option<&Path>, out: &mut dyn Write) -> Result<Vec<Decoded>> {
    cfg.validate()?;
    let input = input.map_or_else(|| cfg.data_dir.join("test.jsonl"), Path::to_path_buf);
    let sources: Vec<Vec<Token>> = read_jsonl::<SourceLine>(&input)?.into_iter().map(|l| l.src).collect();
    if sources.is_empty() {
        return Err(Error::InvalidArgument(format!("{}: no sources to decode", input.display())));
    }
    let ck = load_model(cfg, &cfg.pretrain_checkpoint())?;
    let hyps = decode_all(&ck.model, &sources, DECODE_ITERS)?;
    let decoded: Vec<Decoded> = sources
        .into_iter()
        .zip(hyps)
        .map(|(src, hyp)| Decoded { src, hyp })
        .collect();
    let output = output.map_or_else(|| cfg.out_dir.join("decode.jsonl"), Path::to_path_buf);
    let mut w = JsonLines::create(output.clone())?;
    for d in &decoded {
        w.write(d)?;
    }
    w.finish()?;
    say(out, format_args!("decoded {} sources -> {}", decoded.len(), output.display()))?;
    Ok(decoded)
}

/// Corpus BLEU (0..100) against the `tgt`s of `refs` (default: the test
/// split). Hypotheses come from `hyps` when given, otherwise from decoding
/// with the checkpoint. Prints the score with two decimals.
pub fn cmd_eval(cfg: &RunConfig, refs: Option<&Path>, hyps: Option<&Path>, out: &mut dyn Write) -> Result<f64> {
    cfg.validate()?;
    let refs_path = refs.map_or_else(|| cfg.data_dir.join("test.jsonl"), Path::to_path_buf);
    let pairs: Vec<Pair> = read_pairs(&refs_path)?;
    if pairs.is_empty() {
        return Err(Error::InvalidArgument(format!("{}: no reference pairs", refs_path.display())));
    }
    let hyp_tokens: Vec<Vec<Token>> = match hyps {
        Some(p) => {
            let h: Vec<Decoded> = read_jsonl(p)?;
            if h.len() != pairs.len() {
                return Err(Error::Length(format!(
                    "{} has {} hypotheses but {} has {} references",
                    p.display(),
                    h.len(),
                    refs_path.display(),
                    pairs.len()
                )));
            }
            h.into_iter().map(|d| d.hyp).collect()
        }
        None => {
            let ck = load_model(cfg, &cfg.pretrain_checkpoint())?;
            let sources: Vec<Vec<Token>> = pairs.iter().map(|p| p.src.clone()).collect();
            decode_all(&ck.model, &sources, DECODE_ITERS)?
        }
    };
    let scored: Vec<(&[Token], &[Token])> = hyp_tokens
        .iter()
        .zip(&pairs)
        .map(|(h, p)| (h.as_slice(), p.tgt.as_slice()))
        .collect();
    let bleu = 100.0 * corpus_bleu(&scored)?;
    say(out, format_args!("BLEU {bleu:.2}"))?;
    Ok(bleu)
}

/// Renders `out_dir/advantage_stats.json` as a table, SDs scaled by 100.
pub fn cmd_stats(cfg: &RunConfig, out: &mut dyn Write) -> Result<String> {
    let path = cfg.out_dir.join("advantage_stats.json");
    if !path.exists() {
        return Err(Error::Config(vec![format!(
            "no advantage statistics at {}; run `levrl rl` first",
            path.display()
        )]));
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let rows: Vec<AdvantageRow> = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let table = render_stats(&rows);
    out.write_all(table.as_bytes()).map_err(|e| Error::io("<stdout>", e))?;
    Ok(table)
}

pub fn render_stats(rows: &[AdvantageRow]) -> String {
    let mut s = format!("{:<10} {:<15} {:>8} {:>10}\n", "iteration", "operation", "count", "sd x100");
    for r in rows {
        let sd = r.sd.map_or_else(|| "-".to_string(), |v| format!("{:.2}", 100.0 * v));
        s.push_str(&format!(
            "{:<10} {:<15} {:>8} {:>10}\n",
            r.iteration,
            r.operation.to_string(),
            r.count,
            sd
        ));
    }
    s
}

/// Labels of the sweep in report order.
pub fn sweep_labels() -> Vec<String> {
    sweep_schedules(1).iter().map(TemperatureSchedule::label).collect()
}
