mod common;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{all_gsi, feeder15, four_areas, mixed};
use gridopf_core::der::{droop_q, DerMode, DerSpec};
use gridopf_core::dopf::{build_subproblem, init_boundary};
use gridopf_core::feeder::{Bus, Feeder, LineSpec};
use gridopf_core::nlp::{check_gradients, check_hessian, solve_nlp, NlpProblem, NlpStatus};
use gridopf_core::opf::{
    build_area, build_copf, solve_copf, AreaInputs, EdgeLoad, OpfOptions, OpfSolution, RootSpec,
};
use gridopf_core::powerflow::{solve_powerflow, validate_dispatch, Injection};

fn two_bus(ders: Vec<DerSpec>) -> Feeder {
    Feeder::new(
        "two-bus",
        vec![Bus::new("0", 0.0, 0.0), Bus::new("1", 0.1, 0.05)],
        vec![LineSpec::new("0", "1", 0.01, 0.01)],
        ders,
        "0",
        1.0,
        1e6,
        4160.0,
    )
    .unwrap()
}

/// Loss-minimizing reactive output found by scanning `q` on a grid and
/// solving the power flow at every point.
fn grid_search_q(f: &Feeder, p: f64, q_max: f64, step: f64) -> f64 {
    let bus = &f.buses[1];
    let mut best = (f64::INFINITY, 0.0);
    let n = (2.0 * q_max / step).floor() as i64;
    for k in 0..=n {
        let q = -q_max + k as f64 * step;
        let s = solve_powerflow(f, &[Injection::Fixed { p, q }], f.v_sub2).unwrap();
        if s.v2[1] < bus.v_min2 || s.v2[1] > bus.v_max2 {
            continue;
        }
        if s.losses < best.0 {
            best = (s.losses, q);
        }
    }
    best.1
}

#[test]
fn two_bus_matches_grid_search() {
    let f = two_bus(vec![DerSpec::new(
        "1",
        0.15,
        DerMode::GridFollowingQ { p_measured: 0.1 },
    )]);
    let q_max = (0.15f64.powi(2) - 0.1f64.powi(2)).sqrt();
    let q_grid = grid_search_q(&f, 0.1, q_max, 1e-4);
    let sol = solve_copf(&f, &OpfOptions::default()).unwrap();
    assert_eq!(sol.status, NlpStatus::Optimal);
    assert!(
        (sol.der_q[0] - q_grid).abs() <= 1e-4,
        "{} vs {q_grid}",
        sol.der_q[0]
    );
}

#[test]
fn relabeling_buses_keeps_the_objective() {
    let f = mixed(&feeder15());
    let g = f.relabeled(|id| format!("n{:02}", 20 - id.parse::<i32>().unwrap())).unwrap();
    let a = solve_copf(&f, &OpfOptions::default()).unwrap();
    let b = solve_copf(&g, &OpfOptions::default()).unwrap();
    assert!((a.objective - b.objective).abs() < 1e-8, "{} vs {}", a.objective, b.objective);
}

#[test]
fn reordering_variables_keeps_the_objective() {
    let f = mixed(&feeder15());
    let am = build_copf(&f, &OpfOptions::default()).unwrap();
    let n = am.model.n_vars();
    // Reverse, then interleave.
    let perm: Vec<usize> = (0..n).map(|i| if i % 2 == 0 { n - 1 - i / 2 } else { i / 2 }).collect();
    let mut seen = perm.clone();
    seen.sort_unstable();
    assert_eq!(seen, (0..n).collect::<Vec<_>>());
    let pm = am.model.permuted(&perm);
    let mut x0 = vec![0.0; n];
    for i in 0..n {
        x0[perm[i]] = am.x0[i];
    }
    let opts = OpfOptions::default().nlp;
    let a = solve_nlp(&am.model, &am.x0, &opts).unwrap();
    let b = solve_nlp(&pm, &x0, &opts).unwrap();
    assert_eq!(a.status, NlpStatus::Optimal);
    assert_eq!(b.status, NlpStatus::Optimal);
    assert!((a.objective - b.objective).abs() < 1e-8);
}

#[test]
fn zero_ratings_give_plain_powerflow_losses() {
    let base = feeder15();
    let mut f = base.clone();
    for (i, d) in f.ders.iter_mut().enumerate() {
        d.s_rating = 0.0;
        d.mode = if i % 2 == 0 {
            DerMode::GridFollowingQ { p_measured: 0.0 }
        } else {
            DerMode::GridFollowingP
        };
    }
    let sol = solve_copf(&f, &OpfOptions::default()).unwrap();
    let bare = base.with_ders(Vec::new()).unwrap();
    let pf = solve_powerflow(&bare, &[], bare.v_sub2).unwrap();
    assert!((sol.objective - pf.losses).abs() < 1e-6);
}

#[test]
fn droop_fleet_loses_more_than_dispatchable_fleet() {
    let f = feeder15();
    let gfl = solve_copf(&f, &OpfOptions::default()).unwrap();
    let gsi = solve_copf(&all_gsi(&f), &OpfOptions::default()).unwrap();
    assert!(gsi.objective > gfl.objective);
}

fn check_modes(f: &Feeder, sol: &OpfSolution) {
    for (d, der) in f.ders.iter().enumerate() {
        let b = f.bus_index(&der.bus).unwrap();
        match der.mode {
            DerMode::GridSupporting { curve, .. } => {
                assert!((sol.der_q[d] - droop_q(sol.v2[b], &curve)).abs() <= 1e-6);
            }
            DerMode::GridForming { v_set2 } => {
                assert!((sol.v2[b] - v_set2).abs() <= 1e-6);
                assert!(sol.der_p[d].hypot(sol.der_q[d]) <= der.s_rating + 1e-8);
            }
            _ => {}
        }
    }
}

#[test]
fn fixture_solutions_validate_and_respect_modes() {
    let base = feeder15();
    for f in [base.clone(), all_gsi(&base), mixed(&base)] {
        let sol = solve_copf(&f, &OpfOptions::default()).unwrap();
        assert_eq!(sol.status, NlpStatus::Optimal);
        let rep = validate_dispatch(&f, &sol, 1e-4);
        assert!(rep.passed, "{rep:?}");
        check_modes(&f, &sol);
    }
}

#[test]
fn corrupted_droop_output_is_flagged() {
    let f = all_gsi(&feeder15());
    let mut sol = solve_copf(&f, &OpfOptions::default()).unwrap();
    sol.der_q[2] += 0.1;
    let rep = validate_dispatch(&f, &sol, 1e-4);
    assert!(!rep.passed);
    assert_eq!(rep.droop_flags, vec![f.ders[2].bus.clone()]);
}

#[test]
fn feeder_without_ders_validates() {
    let f = feeder15().with_ders(Vec::new()).unwrap();
    let sol = solve_copf(&f, &OpfOptions::default()).unwrap();
    let pf = solve_powerflow(&f, &[], f.v_sub2).unwrap();
    assert!((sol.objective - pf.losses).abs() < 1e-8);
    assert!(validate_dispatch(&f, &sol, 1e-4).passed);
}

/// Point strictly inside the variable box; unbounded variables are jittered
/// around the default start.
fn interior_point<P: NlpProblem>(p: &P, x0: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (lb, ub) = (p.lower_bounds(), p.upper_bounds());
    (0..p.n_vars())
        .map(|i| {
            let u: f64 = rng.random();
            if lb[i] == ub[i] {
                lb[i]
            } else if lb[i].is_finite() && ub[i].is_finite() {
                let w = (ub[i] - lb[i]).min(1.0);
                let lo = lb[i].max(x0[i] - 0.5 * w);
                let hi = (lo + w).min(ub[i]);
                lo + (0.05 + 0.9 * u) * (hi - lo)
            } else {
                x0[i] + 0.1 * (u - 0.5)
            }
        })
        .collect()
}

#[test]
fn derivatives_match_finite_differences() {
    let base = feeder15();
    let f = mixed(&base);
    let opts = OpfOptions::default();
    let part = four_areas(&f);
    let bs = init_boundary(&f, &part);

    let mut models = vec![build_copf(&f, &opts).unwrap(), build_copf(&all_gsi(&base), &opts).unwrap()];
    for a in 0..part.len() {
        models.push(build_subproblem(&f, &part, a, &bs, &opts).unwrap());
    }
    // Proximal forms used by ADMM.
    for (a, area) in part.areas.iter().enumerate() {
        let root = match area.upstream_edge {
            Some(_) => RootSpec::Proximal { v: 1.05, p: 0.1, q: 0.05, rho: 1.0 },
            None => RootSpec::Fixed(f.v_sub2),
        };
        let edge_loads: BTreeMap<usize, EdgeLoad> = area
            .downstream_edges
            .iter()
            .map(|&e| (e, EdgeLoad::Proximal { v: 1.05, p: 0.1, q: 0.05, rho: 1.0 }))
            .collect();
        models.push(build_area(&f, &part, a, &AreaInputs { root, edge_loads }, &opts).unwrap());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for am in &models {
        for _ in 0..20 {
            let x = interior_point(&am.model, &am.x0, &mut rng);
            let err = check_gradients(&am.model, &x, 1e-6);
            assert!(err < 1e-5, "gradient error {err}");
            let eq: Vec<f64> = (0..am.model.n_eq()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let ineq: Vec<f64> = (0..am.model.n_ineq()).map(|_| rng.random_range(0.0..1.0)).collect();
            let err = check_hessian(&am.model, &x, &eq, &ineq, 1e-6);
            assert!(err < 1e-5, "Hessian error {err}");
        }
    }
}
