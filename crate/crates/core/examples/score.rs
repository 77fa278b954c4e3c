//! Scores a readable program against an obfuscated rewrite of it. The
//! rewrite has fewer tokens but is less likely under the scoring model.
//!
//! cargo run --example score

use std::collections::BTreeMap;
use std::path::PathBuf;

use libsmith::code::default_grammar;
use libsmith::gateway::{Gateway, GatewayConfig};
use libsmith::scoring::{ratio, Scorer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let readable = std::fs::read_to_string(root.join("tasks/obfuscation/src/inventory.py"))?;
    let obfuscated = std::fs::read_to_string(root.join("candidates/obfuscated/rewritten/inventory.py"))?;

    let config = GatewayConfig {
        scorer_endpoint: "stub:vocab-aware".into(),
        ..GatewayConfig::default()
    };
    let gateway = Gateway::offline(config)?;
    let scorer = Scorer::new(&gateway, default_grammar());

    let program = |code: &str| BTreeMap::from([("inventory.py".to_string(), code.to_string())]);
    let before = scorer.metrics("", &program(&readable))?;
    let after = scorer.metrics("", &program(&obfuscated))?;

    println!("{:>8} {:>12} {:>12} {:>8}", "metric", "readable", "obfuscated", "ratio");
    println!("{:>8} {:>12} {:>12} {:>8.3}", "tokens", before.tokens, after.tokens, ratio(after.tokens as f64, before.tokens as f64));
    println!("{:>8} {:>12.2} {:>12.2} {:>8.3}", "mdl", before.mdl_nats, after.mdl_nats, ratio(after.mdl_nats, before.mdl_nats));
    println!("{:>8} {:>12} {:>12} {:>8.3}", "cc", before.cc, after.cc, ratio(after.cc as f64, before.cc as f64));
    Ok(())
}
