//! Both REINFORCE rules on a two-action task where only action 0 pays.
//!
//!     cargo run --release --example bandit

use levrl::tensor::{ParamStore, Sgd};
use levrl::train::rl::{reinforce_update, Approach, Bandit, UpdateArgs};

fn main() -> levrl::Result<()> {
    for approach in [Approach::Episodic, Approach::Stepwise] {
        let mut params = ParamStore::<f64>::new();
        let bandit = Bandit::new(&mut params, [1.0, 0.0])?;
        print!("{approach:>9}:");
        for step in 0..60 {
            let args = UpdateArgs {
                k: 5,
                tau: 1.0,
                lr: 0.5,
                clip_norm: 0.0,
                seed: 7,
                step,
            };
            reinforce_update(&mut params, &mut Sgd, approach, 1, &args, |_, _| Ok(bandit.clone()))?;
            if step % 10 == 9 {
                print!("  p(a0) after {:>2}: {:.3}", step + 1, bandit.prob(&params, 0));
            }
        }
        println!();
    }
    Ok(())
}
