//! The whole command flow (data, pre-training, fine-tuning, temperature
//! sweep, evaluation, statistics) on a small copy task in a temporary
//! directory. The `levrl` binary drives the same functions.
//!
//!     cargo run --release --example workbench_pipeline

use levrl::data::Task;
use levrl::model::ModelConfig;
use levrl::train::rl::Approach;
use levrl::workbench::{cmd_eval, cmd_gen_data, cmd_pretrain, cmd_rl, cmd_stats, RunConfig};

fn main() -> levrl::Result<()> {
    let dir = std::env::temp_dir().join(format!("levrl-pipeline-{}", std::process::id()));
    let mut cfg = RunConfig {
        data_dir: dir.join("data"),
        out_dir: dir.join("run"),
        model: ModelConfig {
            vocab_size: 16,
            d_model: 32,
            n_heads: 2,
            n_encoder_layers: 1,
            n_decoder_layers: 1,
            ffn_dim: 64,
            max_placeholders: 8,
            max_seq_len: 12,
        },
        ..RunConfig::default()
    };
    cfg.data.task = Task::Copy;
    cfg.data.vocab_size = 16;
    cfg.data.min_len = 2;
    cfg.data.max_len = 6;
    cfg.data.n_train = 2000;
    cfg.pretrain.steps = 400;
    cfg.pretrain.lr = 1e-3;
    cfg.pretrain.warmup_steps = 50;
    cfg.pretrain.eval_every = 100;
    cfg.rl.approach = Approach::Stepwise;
    cfg.rl.steps = 20;
    cfg.rl.eval_every = 10;

    let out = &mut std::io::stdout();
    cmd_gen_data(&cfg, out)?;
    cmd_pretrain(&cfg, false, out)?;
    cmd_rl(&cfg, out)?;
    cmd_stats(&cfg, out)?;
    cfg.sweep = true;
    cfg.out_dir = dir.join("sweep");
    cfg.checkpoint = Some(dir.join("run/pretrain.ckpt"));
    cmd_rl(&cfg, out)?;
    print!("{}", std::fs::read_to_string(cfg.out_dir.join("temperature_sweep.csv")).unwrap_or_default());
    let tuned = RunConfig {
        checkpoint: Some(dir.join("run/rl.ckpt")),
        ..cfg.clone()
    };
    print!("test set, fine-tuned model: ");
    cmd_eval(&tuned, None, None, out)?;
    println!("artifacts in {}", dir.display());
    Ok(())
}
