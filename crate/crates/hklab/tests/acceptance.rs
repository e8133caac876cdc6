//! Runs every acceptance criterion and prints one line each. Exits nonzero
//! when any criterion fails.

use hklab::acceptance::{run, DEFAULT_SEED};

fn main() {
    let seed = std::env::var("HKLAB_SEED").ok().and_then(|s| s.trim().parse().ok()).unwrap_or(DEFAULT_SEED);
    println!("acceptance suite, seed {seed}");
    let results = run(None, seed, |r| println!("{r}"));
    let failed: Vec<u8> = results.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    println!("{}/{} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        eprintln!("failing criteria: {failed:?}");
        std::process::exit(1);
    }
}
