//! Optimal alignment and the expert delete / insert / fill actions that turn
//! a partial hypothesis into its reference.
//!
//!     cargo run --release --example edit_oracle

use levrl::edit::{apply_delete, apply_insert, apply_replace, Hypothesis};
use levrl::oracle::{align, expert_actions, levenshtein_distance};
use levrl::vocab::surface;

fn show(tokens: &[u32]) -> String {
    tokens.iter().map(|&t| surface(t)).collect::<Vec<_>>().join(" ")
}

fn main() -> levrl::Result<()> {
    let current = [5, 9, 6, 7, 11];
    let reference = [5, 6, 8, 7, 10, 11];
    println!("current   {}", show(&current));
    println!("reference {}", show(&reference));
    println!("distance  {}", levenshtein_distance(&current, &reference));
    println!("alignment {:?}", align(&current, &reference).ops);

    let hyp = Hypothesis::from_content(&current)?;
    let ex = expert_actions(&hyp, &reference, 32)?;
    println!("delete mask   {:?}", ex.delete_mask);
    let h = apply_delete(&hyp, &ex.delete_mask)?;
    println!("  -> {}", show(h.tokens()));
    println!("insert counts {:?}", ex.insert_counts);
    let h = apply_insert(&h, &ex.insert_counts, 32)?;
    println!("  -> {}", show(h.tokens()));
    println!("fill tokens   {}", show(&ex.fill_tokens));
    let h = apply_replace(&h, &ex.fill_tokens)?;
    println!("  -> {}", show(h.tokens()));
    assert_eq!(h.content(), reference);
    Ok(())
}
