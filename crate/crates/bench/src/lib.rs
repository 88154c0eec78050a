//! Shared inputs for the benchmarks.

use std::path::PathBuf;

use gridopf_core::feeder::{parse_feeder, Feeder};
use gridopf_core::partition::{partition_by_roots, AreaPartition};

pub fn fixture(name: &str) -> Feeder {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name);
    let text = std::fs::read_to_string(&path).expect("fixture readable");
    parse_feeder(&text).expect("fixture parses")
}

/// Feeder plus the four-area split used by the example scenarios.
pub fn split(name: &str) -> (Feeder, AreaPartition) {
    let f = fixture(name);
    let roots: &[&str] = match name {
        "feeder15.toml" => &["0", "5", "9", "12"],
        _ => &["0", "3", "10", "13"],
    };
    let roots: Vec<String> = roots.iter().map(|r| r.to_string()).collect();
    let part = partition_by_roots(&f, &roots).expect("roots valid");
    (f, part)
}
