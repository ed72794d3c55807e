//! Seeded workload generation and its empirical statistics.

use settlesim::partition::{build_dependency_graph, validate_system};
use settlesim::workload::{gen_elements, gen_event_stream, next_random, RngState, WorkloadParams};
use settlesim::TimeTag;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (_, first) = next_random(RngState::new(42));
    println!("first draw for seed 42: {first:#018x}");

    let params = WorkloadParams {
        seed: 42,
        event_frequency: 0.25,
        element_count: 1000,
        ref_density: 1.5,
        queue_count: 8,
        ..Default::default()
    };

    let events = gen_event_stream(&params, TimeTag(99_999))?;
    println!(
        "event rate over {} ticks: {:.4} (target {})",
        events.len(),
        events.count_payloads() as f64 / events.len() as f64,
        params.event_frequency
    );

    let inst = gen_elements(&params)?;
    assert!(validate_system(&inst).is_empty());
    let refs: usize = inst.elements.iter().map(|e| e.refs.len()).sum();
    println!(
        "{} elements in {} queues, {:.3} refs per element (target {})",
        inst.elements.len(),
        inst.system.queues.len(),
        refs as f64 / inst.elements.len() as f64,
        params.ref_density
    );
    let g = build_dependency_graph(&inst.elements, &inst.constraints)?;
    println!("dependency graph: {} nodes, {} edges", g.len(), g.edge_count());
    Ok(())
}
