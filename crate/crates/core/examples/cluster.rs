//! Groups the fixture programs into clusters of three by their
//! descriptions and reports how coherent each cluster's tags are.
//!
//! cargo run --example cluster

use std::path::PathBuf;

use libsmith::cluster::{coherence_table, plan_clusters};
use libsmith::gateway::{Gateway, GatewayConfig};
use libsmith::model::Task;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/tasks/six_unit");
    let task = Task::load(&dir)?;
    let config = GatewayConfig {
        embedder_endpoint: "stub:hash".into(),
        ..GatewayConfig::default()
    };
    let gateway = Gateway::offline(config)?;

    let units: Vec<_> = task.units.iter().collect();
    let plan = plan_clusters(&units, &gateway, 3)?;
    for row in coherence_table(&task, &plan.clusters)? {
        println!("{:?}  H_N={:.3}  HHI={:.3}", row.units, row.tag_entropy, row.hhi);
    }
    for m in &plan.linkage_trace {
        println!("merge {} + {} at {:.4} (size {})", m.left, m.right, m.height, m.size);
    }
    Ok(())
}
