#![allow(dead_code)]

use std::path::PathBuf;

use gridopf_core::der::{DerMode, DerSpec, DroopCurve};
use gridopf_core::feeder::{parse_feeder, Feeder};
use gridopf_core::partition::{partition_by_roots, AreaPartition};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn fixture(name: &str) -> Feeder {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture readable");
    parse_feeder(&text).expect("fixture parses")
}

pub fn feeder15() -> Feeder {
    fixture("feeder15.toml")
}

pub fn four_areas(f: &Feeder) -> AreaPartition {
    partition_by_roots(f, &["0".into(), "5".into(), "9".into(), "12".into()]).unwrap()
}

fn droop(d: &DerSpec) -> DerSpec {
    let p = d.mode.fixed_p().unwrap_or(0.0);
    DerSpec::new(
        d.bus.clone(),
        d.s_rating,
        DerMode::GridSupporting {
            p_measured: p,
            curve: DroopCurve {
                q_ref: 0.0,
                v_ref: 1.0,
                k_q: 10.0 * d.s_rating,
            },
        },
    )
}

/// Every DER on its droop curve.
pub fn all_gsi(f: &Feeder) -> Feeder {
    f.with_ders(f.ders.iter().map(droop).collect()).unwrap()
}

/// Grid-forming unit at bus 3 (10x rating, 1.00 pu), PV-type bus at 8,
/// droop at 1, 7 and 10, grid-following elsewhere.
pub fn mixed(f: &Feeder) -> Feeder {
    let ders = f
        .ders
        .iter()
        .map(|d| match d.bus.as_str() {
            "3" => DerSpec::new("3", 10.0 * d.s_rating, DerMode::GridForming { v_set2: 1.0 }),
            "8" => DerSpec::new(
                "8",
                d.s_rating,
                DerMode::PvTypeBus {
                    v_set2: 1.0,
                    p_set: d.mode.fixed_p().unwrap(),
                    penalty_m: 100.0,
                },
            ),
            "1" | "7" | "10" => droop(d),
            _ => d.clone(),
        })
        .collect();
    f.with_ders(ders).unwrap()
}
