//! Sentence BLEU (with and without add-one smoothing) and corpus BLEU.
//!
//!     cargo run --release --example bleu

use levrl::bleu::{corpus_bleu, sentence_bleu, BleuStats, Smoothing};

fn main() -> levrl::Result<()> {
    let reference = [5, 6, 7, 8];
    for hyp in [&[5, 6, 7, 9][..], &[5, 6, 7, 8], &[5, 6], &[8, 7, 6, 5], &[]] {
        let stats = BleuStats::new(hyp, &reference);
        println!(
            "hyp {hyp:?}: matches {:?} of {:?}; smoothed {:.4}, unsmoothed {:.4}",
            stats.matches,
            stats.totals,
            sentence_bleu(hyp, &reference, Smoothing::AddOne)?,
            sentence_bleu(hyp, &reference, Smoothing::None)?,
        );
    }
    // corpus BLEU pools counts before taking the geometric mean
    let corpus = [(vec![5, 6, 7, 9], vec![5, 6, 7, 8]), (vec![9, 10, 11, 12, 13], vec![9, 10, 11, 12, 13])];
    println!("corpus BLEU x100: {:.2}", 100.0 * corpus_bleu(&corpus)?);
    Ok(())
}
