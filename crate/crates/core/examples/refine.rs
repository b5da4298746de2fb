//! Iterative refinement of one source: greedy decoding, then a sampled
//! rollout with the BLEU recorded after every merged edit.
//!
//!     cargo run --release --example refine -- [checkpoint]
//!
//! Without a checkpoint a freshly initialised model is used.

use levrl::bleu::Smoothing;
use levrl::checkpoint::Checkpoint;
use levrl::data::LexMap;
use levrl::edit::{greedy_decode, rollout};
use levrl::model::{LevenshteinModel, ModelConfig};
use levrl::rng::substream;
use levrl::vocab::surface;

fn show(tokens: &[u32]) -> String {
    tokens.iter().map(|&t| surface(t)).collect::<Vec<_>>().join(" ")
}

fn main() -> levrl::Result<()> {
    let model = match std::env::args().nth(1) {
        Some(path) => Checkpoint::<f32>::load(path)?.model,
        None => {
            let config = ModelConfig {
                vocab_size: 32,
                max_seq_len: 32,
                ..ModelConfig::default()
            };
            LevenshteinModel::new(config, &mut substream(1, "init", &[]))?
        }
    };
    let source = vec![7, 12, 9, 20, 15, 8];
    let reference = LexMap::random(32, 1).apply(&source);
    println!("source    {}", show(&source));
    println!("reference {}", show(&reference));

    let greedy = greedy_decode(&model, &source, 10)?;
    println!("greedy    {}  ({} iterations)", show(greedy.hypothesis.content()), greedy.iterations);

    let mut rng = substream(3, "refine", &[]);
    let trace = rollout(&model, &source, 3, 1.0, &mut rng, true, Some(&reference), Smoothing::AddOne)?;
    for s in &trace.steps {
        let bleu = s.bleu.map_or(String::new(), |b| format!("  BLEU {:.3}", b));
        println!(
            "it {} {:<8} logp {:>8.3}  {}{bleu}",
            s.iteration,
            format!("{:?}", s.action.phase()),
            s.log_prob,
            show(s.after.tokens())
        );
    }
    Ok(())
}
