//! Acceptance runner: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Criteria 6-9 share one pre-trained lexmap checkpoint.
//!
//! `LEVRL_ACCEPT_ONLY=1,10` restricts the run to the listed criteria (6-9 are
//! always run together when any of them is selected).

mod common;

use std::fmt::Write as _;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use common::{all_strings, brute_levenshtein, check_op, iterated_schedule, loo_oracle, ALL_OPS};
use levrl::data::Task;
use levrl::edit::{apply_delete, apply_insert, apply_replace, greedy_decode, Hypothesis};
use levrl::model::{LevenshteinModel, ModelConfig};
use levrl::oracle::{align, expert_actions, levenshtein_distance, AlignOp};
use levrl::rng::substream;
use levrl::tensor::{ParamStore, Sgd};
use levrl::train::rl::{
    advantages, loo_baseline, reinforce_update, temperature_at, Approach, Bandit, RlRecord, ScheduleKind, SlotKind,
    TemperatureSchedule, UpdateArgs,
};
use levrl::train::{configure_threads, rayon_threads};
use levrl::vocab::{Token, BOS, EOS, NON_OUTPUT};
use levrl::workbench::{cmd_eval, cmd_pretrain, cmd_rl, sweep_labels, RlReport, RunConfig};
use rand::Rng;

/// Pre-training budget for the shared lexmap checkpoint. Held-out BLEU
/// crosses 0.6 shortly before this and saturates near 1.0 a few hundred steps
/// later; stopping here leaves room for fine-tuning to show a gain.
const PRETRAIN_STEPS: u64 = 2750;
const RL_STEPS: u64 = 100;
const RL_LR: f64 = 1e-5;
const SWEEP_STEPS: u64 = 20;
const SEEDS: [u64; 3] = [1, 2, 3];

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn c1_autodiff() -> Outcome {
    let start = Instant::now();
    let mut rng = substream(101, "gradcheck", &[]);
    let mut worst = (0.0f64, 0.0f64, ALL_OPS[0], ALL_OPS[0]);
    let mut bad = Vec::new();
    for op in ALL_OPS {
        let (e32, e64) = check_op(op, 20, &mut rng).map_err(err)?;
        if e32 >= 1e-3 || e64 >= 1e-6 {
            bad.push(format!("{op:?} (f32 {e32:.1e}, f64 {e64:.1e})"));
        }
        if e32 > worst.0 {
            worst.0 = e32;
            worst.2 = op;
        }
        if e64 > worst.1 {
            worst.1 = e64;
            worst.3 = op;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(
        bad.is_empty() && secs < 120.0,
        format!(
            "{} ops x 20 shapes; worst rel. error f32 {:.1e} ({:?}), f64 {:.1e} ({:?}); {secs:.1}s{}",
            ALL_OPS.len(),
            worst.0,
            worst.2,
            worst.1,
            worst.3,
            if bad.is_empty() { String::new() } else { format!("; failing: {}", bad.join(", ")) }
        ),
    )
}

fn c2_leave_one_out() -> Outcome {
    let mut rng = substream(102, "loo", &[]);
    let (mut sum_err, mut base_err) = (0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let k = rng.gen_range(2..=10);
        let r: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let adv = advantages(&r).map_err(err)?;
        sum_err = sum_err.max(adv.iter().sum::<f64>().abs());
        for i in 0..k {
            let b = loo_oracle(&r, i);
            base_err = base_err
                .max((loo_baseline(&r, i).map_err(err)? - b).abs())
                .max((adv[i] - (r[i] - b)).abs());
        }
    }
    ensure(
        sum_err < 1e-9 && base_err < 1e-9,
        format!("10000 vectors, k in 2..=10; max |sum of advantages| {sum_err:.1e}, max baseline deviation {base_err:.1e}"),
    )
}

fn c3_schedule() -> Outcome {
    let t = 50_000u64;
    let down = TemperatureSchedule::anneal_down(1.0, 0.1, t);
    let up = TemperatureSchedule::anneal_up(0.1, 1.0, t);
    let d: Vec<f64> = (0..=t).map(|i| temperature_at(&down, i)).collect::<Result<_, _>>().map_err(err)?;
    let u: Vec<f64> = (0..=t).map(|i| temperature_at(&up, i)).collect::<Result<_, _>>().map_err(err)?;
    let oracle = iterated_schedule(1.0, 0.1, t);
    let monotone = d.windows(2).all(|w| w[1] <= w[0]) && u.windows(2).all(|w| w[1] >= w[0]);
    let end = (d[t as usize] - 0.1).abs();
    let mid = (d[t as usize / 2] - 10f64.powf(-0.5)).abs();
    let rec = d.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mirror = (0..=t as usize).map(|i| (u[i] - d[t as usize - i]).abs()).fold(0.0, f64::max);
    let up_ends = u[0] == 0.1 && (u[t as usize] - 1.0).abs() <= 1e-6;
    ensure(
        monotone && end <= 1e-6 && mid <= 1e-9 && rec <= 1e-9 && mirror <= 1e-9 && up_ends,
        format!(
            "T=50000: monotone {monotone}; |tau_T-0.1| {end:.1e}; |tau_T/2-10^-0.5| {mid:.1e}; max gap to iterated recurrence {rec:.1e}; max mirror gap {mirror:.1e}"
        ),
    )
}

fn replay(current: &[Token], reference: &[Token]) -> Result<Vec<Token>, String> {
    let hyp = Hypothesis::from_content(current).map_err(err)?;
    let ex = expert_actions(&hyp, reference, 64).map_err(err)?;
    let h = apply_delete(&hyp, &ex.delete_mask).map_err(err)?;
    let h = apply_insert(&h, &ex.insert_counts, 64).map_err(err)?;
    Ok(apply_replace(&h, &ex.fill_tokens).map_err(err)?.content().to_vec())
}

fn c4_levenshtein() -> Outcome {
    let strings = all_strings(&[5, 6, 7], 6);
    let mut pairs = 0u64;
    let mut mismatches = 0u64;
    for a in &strings {
        for b in &strings {
            pairs += 1;
            let d = brute_levenshtein(a, b);
            let al = align(a, b);
            let ok = levenshtein_distance(a, b) == d
                && al.distance == d
                && al.ops.iter().filter(|&&o| o != AlignOp::Match).count() == d
                && &al.replay(a, b) == b;
            mismatches += u64::from(!ok);
        }
    }
    let mut rng = substream(104, "expert", &[]);
    let mut replay_fail = 0;
    for _ in 0..10_000 {
        let mut draw = || -> Vec<Token> {
            let n = rng.gen_range(0..=20);
            (0..n).map(|_| rng.gen_range(5..12)).collect()
        };
        let (cur, reference) = (draw(), draw());
        replay_fail += usize::from(replay(&cur, &reference)? != reference);
    }
    ensure(
        mismatches == 0 && replay_fail == 0,
        format!("{pairs} exhaustive pairs, {mismatches} disagreements; 10000 expert replays, {replay_fail} wrong"),
    )
}

fn c5_termination() -> Outcome {
    let config = ModelConfig {
        vocab_size: 12,
        d_model: 8,
        n_heads: 2,
        n_encoder_layers: 1,
        n_decoder_layers: 1,
        ffn_dim: 16,
        max_placeholders: 8,
        max_seq_len: 24,
    };
    let (mut ok, mut total, mut max_iters) = (0, 0, 0);
    for m in 0..100u64 {
        let mut rng = substream(105, "fuzz", &[m]);
        let mut model = LevenshteinModel::<f32>::new(config.clone(), &mut rng).map_err(err)?;
        let gain = rng.gen_range(0.5f32..8.0);
        for p in model.params.iter_mut() {
            p.tensor = p.tensor.map(|v| v * gain);
        }
        for _ in 0..100 {
            total += 1;
            let n = rng.gen_range(1..=16);
            let src: Vec<Token> = (0..n).map(|_| rng.gen_range(5..12)).collect();
            let Ok(r) = greedy_decode(&model, &src, 10) else { continue };
            let t = r.hypothesis.tokens();
            max_iters = max_iters.max(r.iterations);
            let valid = r.iterations <= 10
                && t.len() <= config.max_seq_len
                && t[0] == BOS
                && t[t.len() - 1] == EOS
                && r.hypothesis.content().iter().all(|x| !NON_OUTPUT.contains(x) && (*x as usize) < config.vocab_size);
            ok += usize::from(valid);
        }
    }
    ensure(
        ok == total,
        format!("{ok}/{total} decodes terminated with valid hypotheses; most iterations used {max_iters}"),
    )
}

fn c10_bandit() -> Outcome {
    let mut line = String::new();
    let mut pass = true;
    for approach in [Approach::Episodic, Approach::Stepwise] {
        let mut reached = 0;
        let mut worst = 0;
        for trial in 0..100u64 {
            let mut params = ParamStore::<f64>::new();
            let bandit = Bandit::new(&mut params, [1.0, 0.0]).map_err(err)?;
            let mut hit = None;
            for step in 0..300u64 {
                let args = UpdateArgs {
                    k: 5,
                    tau: 1.0,
                    lr: 0.5,
                    clip_norm: 0.0,
                    seed: 1000 + trial,
                    step,
                };
                reinforce_update(&mut params, &mut Sgd, approach, 1, &args, |_, _| Ok(bandit.clone())).map_err(err)?;
                if bandit.prob(&params, 0) > 0.9 {
                    hit = Some(step + 1);
                    break;
                }
            }
            if let Some(s) = hit {
                reached += 1;
                worst = worst.max(s);
            }
        }
        pass &= reached >= 95;
        let _ = write!(line, "{approach}: {reached}/100 trials above 0.9 (slowest after {worst} updates); ");
    }
    ensure(pass, line.trim_end_matches("; ").to_string())
}

/// Criteria 6-9 from one pre-trained checkpoint.
fn end_to_end(root: &Path, report: &mut dyn FnMut(u32, &str, Outcome)) {
    let mut base = RunConfig {
        data_dir: root.join("data"),
        out_dir: root.join("pretrain"),
        ..RunConfig::default()
    };
    base.data.task = Task::Lexmap;
    base.pretrain.steps = PRETRAIN_STEPS;
    base.pretrain.eval_every = 250;
    let threads = rayon_threads();

    let start = Instant::now();
    let pre = cmd_pretrain(&base, false, &mut std::io::sink());
    let minutes = start.elapsed().as_secs_f64() * threads as f64 / 60.0;
    let checkpoint = base.pretrain_checkpoint();
    let c6 = pre.map_err(err).and_then(|s| {
        let test = cmd_eval(&base, None, None, &mut std::io::sink()).map_err(err)? / 100.0;
        let valid = s.heldout_bleu.unwrap_or(0.0);
        ensure(
            valid >= 0.60 && test >= 0.60 && minutes <= 30.0,
            format!(
                "lexmap, {} steps: held-out BLEU valid {valid:.4}, test {test:.4}; {minutes:.1} CPU-min ({threads} thread(s))",
                s.steps
            ),
        )
    });
    let pretrained = c6.is_ok() || checkpoint.exists();
    report(6, "supervised lexmap", c6);
    if !pretrained {
        for (id, name) in [(7, "RL direction"), (8, "advantage SD"), (9, "temperature sweep")] {
            report(id, name, Err("no pre-trained checkpoint".into()));
        }
        return;
    }

    let rl_cfg = |approach: Approach, seed: u64| {
        let mut c = RunConfig {
            checkpoint: Some(checkpoint.clone()),
            out_dir: root.join(format!("{approach}-{seed}")),
            ..base.clone()
        };
        c.rl.approach = approach;
        c.rl.steps = RL_STEPS;
        c.rl.lr = RL_LR;
        c.rl.seed = seed;
        c.rl.eval_every = 0;
        c
    };
    let mut deltas = [Vec::new(), Vec::new()];
    let mut sd_wins = 0;
    let mut sd_detail = Vec::new();
    let mut slowest = 0.0f64;
    let mut failure = None;
    for (a, approach) in [Approach::Episodic, Approach::Stepwise].into_iter().enumerate() {
        for seed in SEEDS {
            let start = Instant::now();
            match cmd_rl(&rl_cfg(approach, seed), &mut std::io::sink()) {
                Ok(RlReport::Single(s)) => {
                    slowest = slowest.max(start.elapsed().as_secs_f64() * threads as f64 / 60.0);
                    deltas[a].push(100.0 * (s.final_bleu - s.initial_bleu));
                    if approach == Approach::Stepwise {
                        let sd = |it: usize| {
                            s.advantage_rows
                                .iter()
                                .find(|r| r.iteration == it && r.operation == SlotKind::InsertReplace)
                                .and_then(|r| r.sd)
                        };
                        let (first, third) = (sd(1), sd(3));
                        sd_wins += usize::from(matches!((first, third), (Some(f), Some(t)) if f > t));
                        sd_detail.push(format!(
                            "seed {seed}: {:.2} vs {:.2}",
                            100.0 * first.unwrap_or(f64::NAN),
                            100.0 * third.unwrap_or(f64::NAN)
                        ));
                    }
                }
                Ok(_) => failure = Some("unexpected sweep report".to_string()),
                Err(e) => failure = Some(format!("{approach} seed {seed}: {e}")),
            }
        }
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v.get(v.len() / 2).copied().unwrap_or(f64::NAN)
    };
    let show = |v: &[f64]| v.iter().map(|d| format!("{d:+.2}")).collect::<Vec<_>>().join(" ");
    let (ep_all, st_all) = (show(&deltas[0]), show(&deltas[1]));
    let (ep, st) = (median(&mut deltas[0]), median(&mut deltas[1]));
    let c7 = match &failure {
        Some(f) => Err(f.clone()),
        None => ensure(
            ep >= 0.5 && st >= -0.1 && slowest <= 60.0,
            format!(
                "median BLEU x100 change over seeds {SEEDS:?}: episodic {ep:+.2} [{ep_all}], stepwise {st:+.2} [{st_all}]; episodic ahead of stepwise: {}; {RL_STEPS} updates, slowest run {slowest:.1} CPU-min",
                if ep > st { "yes" } else { "no" }
            ),
        ),
    };
    report(7, "RL direction", c7);
    let c8 = match &failure {
        Some(f) => Err(f.clone()),
        None => ensure(
            sd_wins >= 2,
            format!(
                "stepwise SD x100 of (1, insert+replace) vs (3, insert+replace): {}; {sd_wins}/3 seeds ordered",
                sd_detail.join(", ")
            ),
        ),
    };
    report(8, "advantage SD", c8);

    let mut sweep = rl_cfg(Approach::Episodic, 1);
    sweep.out_dir = root.join("sweep");
    sweep.sweep = true;
    sweep.rl.steps = SWEEP_STEPS;
    report(9, "temperature sweep", c9_sweep(&sweep));
}

fn c9_sweep(cfg: &RunConfig) -> Outcome {
    let RlReport::Sweep(rows) = cmd_rl(cfg, &mut std::io::sink()).map_err(err)? else {
        return Err("expected a sweep report".into());
    };
    let csv = std::fs::read_to_string(cfg.out_dir.join("temperature_sweep.csv")).map_err(err)?;
    let lines: Vec<&str> = csv.lines().collect();
    let labels = sweep_labels();
    let mut problems = Vec::new();
    if lines.len() != 6 || lines[0] != "schedule,bleu" || rows.len() != 5 {
        problems.push(format!("table has {} data rows", lines.len().saturating_sub(1)));
    }
    // re-check every logged trajectory from the metrics files
    for (label, kind) in labels.iter().zip([
        ScheduleKind::Constant,
        ScheduleKind::Constant,
        ScheduleKind::Constant,
        ScheduleKind::AnnealDown,
        ScheduleKind::AnnealUp,
    ]) {
        let slug = label.replace(' ', "-").replace("->", "-");
        let path = cfg.out_dir.join("sweep").join(&slug).join("rl_metrics.jsonl");
        let recs: Vec<RlRecord> = levrl::data::read_jsonl(&path).map_err(err)?;
        let taus: Vec<f64> = recs.iter().map(|r| r.update.tau).collect();
        let ok = taus.len() == SWEEP_STEPS as usize
            && taus.iter().all(|t| t.is_finite() && *t > 0.0)
            && taus.windows(2).all(|w| match kind {
                ScheduleKind::Constant => w[0] == w[1],
                ScheduleKind::AnnealDown => w[1] <= w[0],
                ScheduleKind::AnnealUp => w[1] >= w[0],
            });
        if !ok {
            problems.push(format!("{label}: bad trajectory {taus:?}"));
        }
    }
    let table = rows
        .iter()
        .map(|r| format!("{} {:.2}", r.schedule, 100.0 * r.final_bleu))
        .collect::<Vec<_>>()
        .join(", ");
    ensure(
        problems.is_empty(),
        format!("5 runs x {SWEEP_STEPS} updates; {table}{}", if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }),
    )
}

fn main() -> ExitCode {
    configure_threads(std::env::var("LEVRL_THREADS").ok().and_then(|s| s.parse().ok()));
    let only: Option<Vec<u32>> = std::env::var("LEVRL_ACCEPT_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |id: u32| only.as_ref().is_none_or(|o| o.contains(&id));
    let mut failed = 0;
    let mut report = |id: u32, name: &str, outcome: Outcome| {
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {id:>2} ({name}): {detail}");
    };
    let cheap: [(u32, &str, fn() -> Outcome); 6] = [
        (1, "autodiff oracle", c1_autodiff),
        (2, "leave-one-out identity", c2_leave_one_out),
        (3, "schedule endpoints", c3_schedule),
        (4, "Levenshtein oracle", c4_levenshtein),
        (5, "decoding termination", c5_termination),
        (10, "policy-gradient sanity", c10_bandit),
    ];
    for (id, name, f) in cheap {
        if wanted(id) {
            let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
            report(id, name, outcome);
        }
    }
    if (6..=9).any(wanted) {
        let dir = tempfile::tempdir().expect("temporary directory");
        end_to_end(dir.path(), &mut report);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
