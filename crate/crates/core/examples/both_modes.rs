//! Runs a bundled scenario end to end (real-time, drain, batch) and lists the
//! files it wrote.

use std::path::Path;

use settlesim::scenario::{load_scenario, run_scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/generated_both.json");
    let sc = load_scenario(&path)?;
    let out_root = std::env::temp_dir().join(format!("settlesim-example-{}", std::process::id()));
    let out = run_scenario(&sc, &out_root)?;

    println!("wrote {}", out.dir.display());
    let mut names: Vec<_> = std::fs::read_dir(&out.dir)?
        .map(|e| e.map(|e| e.file_name()))
        .collect::<Result<_, _>>()?;
    names.sort();
    for n in names {
        println!("  {}", n.to_string_lossy());
    }
    if let Some(s) = &out.summary {
        println!("{} ticks, payload ratio {:.3}", s.ticks, s.payload_ratio());
    }
    if let Some(p) = &out.partition {
        println!(
            "{} accepted, {} rejected, aggregate {}",
            p.accepted.len(),
            p.rejected.len(),
            p.aggregate
        );
    }
    std::fs::remove_dir_all(&out_root)?;
    Ok(())
}
