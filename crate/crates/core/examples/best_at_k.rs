//! Expected value of the best-of-k sample, estimated from one pool of n
//! samples, for every k.
//!
//! cargo run --example best_at_k

use libsmith::stats::best_at_k::{scaling_curve, SamplePoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // Score is what the reranker sees; value is what gets reported.
    let samples: Vec<SamplePoint> = (0..16)
        .map(|_| {
            let value: f64 = rng.gen_range(0.4..1.2);
            let mut p = SamplePoint::new(value + rng.gen_range(-0.1..0.1), value);
            p.feasible = rng.gen_bool(0.8);
            p
        })
        .collect();
    for (k, theta) in scaling_curve(&samples) {
        println!("k={k:>2}  {theta:.4}  {}", "#".repeat((theta * 50.0) as usize));
    }
}
