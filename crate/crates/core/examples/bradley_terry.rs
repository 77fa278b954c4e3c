//! Ranks three refactorings from pairwise preferences after dropping
//! minority votes on questions with a clear majority.
//!
//! cargo run --example bradley_terry

use libsmith::stats::bradley_terry::{bradley_terry_fit, consensus_filter, Response};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let votes = [
        ("q1", "refactored", "original", 4),
        ("q1", "original", "refactored", 1),
        ("q2", "refactored", "baseline", 3),
        ("q2", "baseline", "refactored", 2),
        ("q3", "baseline", "original", 5),
        ("q4", "original", "baseline", 2),
        ("q4", "baseline", "original", 2),
    ];
    let responses: Vec<Response> = votes
        .iter()
        .flat_map(|&(q, w, l, n)| {
            std::iter::repeat_with(move || Response {
                question: q.into(),
                winner: w.into(),
                loser: l.into(),
            })
            .take(n)
        })
        .collect();
    let kept = consensus_filter(&responses, 0.75);
    println!("{} of {} responses kept", kept.len(), responses.len());

    let fit = bradley_terry_fit(&kept, "original")?;
    for (item, s) in &fit.strengths {
        println!("{item:>10}  {s:.3}");
    }
    println!(
        "P(refactored over original) = {:.3}",
        fit.win_probability("refactored", "original").unwrap()
    );
    Ok(())
}
