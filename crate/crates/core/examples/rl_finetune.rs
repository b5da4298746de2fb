//! Episodic and stepwise REINFORCE fine-tuning from a pre-trained lexmap
//! checkpoint, with the per-slot advantage spread of the stepwise run.
//!
//!     cargo run --release --example pretrain_lexmap -- 2750 lexmap.ckpt
//!     cargo run --release --example rl_finetune -- lexmap.ckpt [updates]

use levrl::checkpoint::Checkpoint;
use levrl::data::{gen_dataset, DatasetSpec};
use levrl::train::rl::{rl_finetune, Approach, RlConfig};

fn main() -> levrl::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().expect("usage: rl_finetune <checkpoint> [updates]");
    let steps = args.next().map_or(100, |s| s.parse().expect("updates"));
    let data = gen_dataset(&DatasetSpec::default())?;
    for approach in [Approach::Episodic, Approach::Stepwise] {
        let model = Checkpoint::<f32>::load(&path)?.model;
        let config = RlConfig {
            approach,
            steps,
            lr: 1e-5,
            eval_every: 0,
            ..RlConfig::default()
        };
        let out = rl_finetune(model, &data.train, &data.valid, &config, &mut |_| Ok(()))?;
        println!(
            "{approach:>9}: held-out BLEU {:.2} -> {:.2}",
            100.0 * out.initial_bleu,
            100.0 * out.final_bleu
        );
        if approach == Approach::Stepwise {
            print!("{}", levrl::workbench::render_stats(&out.stats.rows()));
        }
    }
    Ok(())
}
