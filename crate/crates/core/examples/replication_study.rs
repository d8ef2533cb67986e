//! Replication study on a preset scenario.
//!
//! `cargo run --release --example replication_study -- gp-large 200`

use multidiscrete::harness::{preset, run_replication};

fn main() -> multidiscrete::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "mixed-small".into());
    let r: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(50);
    let Some(sc) = preset(&name) else {
        eprintln!("unknown preset {name}; try gp-small, nb-large, binomial-small, mixed-large, ...");
        std::process::exit(2);
    };
    let table = run_replication(&sc.with_replications(r), 2345)?;
    print!("{table}");
    Ok(())
}
