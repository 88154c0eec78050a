//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, ensure, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gridopf_cli::run::admm_options;
use gridopf_cli::{run_method, run_scenario, run_sweep, Method, MethodRun, Scenario};
use gridopf_core::admm::AdmmState;
use gridopf_core::der::{droop_q, droop_q_exact, DerMode, DerSpec, DroopCurve};
use gridopf_core::dopf::{build_subproblem, init_boundary};
use gridopf_core::feeder::{Bus, Feeder, LineSpec};
use gridopf_core::nlp::{check_gradients, check_hessian, NlpProblem};
use gridopf_core::opf::{
    build_area, build_copf, solve_copf, AreaInputs, AreaModel, EdgeLoad, OpfOptions, OpfSolution,
    RootSpec,
};
use gridopf_core::partition::{single_area, AreaPartition};
use gridopf_core::powerflow::{solve_powerflow, Injection};

const CASES: [&str; 3] = ["case1-gfl.toml", "case2-gsi.toml", "case3-mixed.toml"];

fn scenario(name: &str) -> Result<Scenario> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name);
    Scenario::load(&path)
}

struct Case {
    name: String,
    scenario: Scenario,
    feeder: Feeder,
    partition: AreaPartition,
    runs: BTreeMap<Method, (MethodRun, Duration)>,
}

impl Case {
    fn load(file: &str) -> Result<Self> {
        let scenario = scenario(file)?;
        let feeder = scenario.build_feeder()?;
        let partition = scenario.build_partition(&feeder)?;
        let mut runs = BTreeMap::new();
        for m in Method::ALL {
            let t = Instant::now();
            let run = run_method(&feeder, &partition, &scenario, m);
            runs.insert(m, (run, t.elapsed()));
        }
        Ok(Self {
            name: scenario.name.clone(),
            scenario,
            feeder,
            partition,
            runs,
        })
    }

    fn run(&self, m: Method) -> &MethodRun {
        &self.runs[&m].0
    }

    fn time(&self, m: Method) -> Duration {
        self.runs[&m].1
    }

    fn objective(&self, m: Method) -> Result<f64> {
        let r = self.run(m);
        r.objective_pu
            .with_context(|| format!("{} {m}: {}", self.name, r.error.as_deref().unwrap_or("no objective")))
    }
}

/// Every solved feeder/solution pair the suite has produced.
type Solved<'a> = Vec<(&'a Feeder, &'a OpfSolution, String)>;

fn c1_degenerate_partition(extra: &[Feeder]) -> Result<String> {
    let mut worst = 0.0f64;
    for f in extra {
        let c = solve_copf(f, &OpfOptions::default())?;
        let part = single_area(f)?;
        let d = gridopf_core::dopf::macro_iterate(f, &part, &Default::default())?;
        ensure!(d.converged, "{}: single-area run did not converge", f.name);
        let gap = (d.solution.objective - c.objective).abs();
        ensure!(gap <= 1e-8, "{}: |D-OPF - C-OPF| = {gap:.2e}", f.name);
        worst = worst.max(gap);
    }
    Ok(format!("{} feeders, worst gap {worst:.1e} pu", extra.len()))
}

fn c2_dopf_vs_copf(cases: &[Case]) -> Result<String> {
    let mut parts = Vec::new();
    for c in cases {
        let copf = c.objective(Method::Copf)?;
        let dopf = c.objective(Method::Dopf)?;
        let run = c.run(Method::Dopf);
        let gap = (dopf - copf).abs() / copf;
        let resid = run.final_residual.context("no residual")?;
        let secs = (c.time(Method::Copf) + c.time(Method::Dopf)).as_secs_f64();
        ensure!(run.converged, "{}: D-OPF did not converge", c.name);
        ensure!(gap < 0.01, "{}: gap {:.3}%", c.name, 100.0 * gap);
        ensure!(resid < 1e-4, "{}: residual {resid:.2e}", c.name);
        ensure!(run.iterations <= 40, "{}: {} macro-iterations", c.name, run.iterations);
        ensure!(secs < 60.0, "{}: {secs:.1} s", c.name);
        parts.push(format!("{} {:.2}%/{}it", c.name, 100.0 * gap, run.iterations));
    }
    Ok(parts.join(", "))
}

fn c3_iteration_ratio(cases: &[Case]) -> Result<String> {
    let mut parts = Vec::new();
    let mut total = Duration::ZERO;
    for c in cases {
        let admm = c.run(Method::Admm);
        let dopf = c.run(Method::Dopf);
        total += c.time(Method::Admm) + c.time(Method::Dopf);
        ensure!(admm.converged, "{}: ADMM did not converge ({:?})", c.name, admm.error);
        let copf = c.objective(Method::Copf)?;
        let gap = (c.objective(Method::Admm)? - copf).abs() / copf;
        ensure!(gap < 0.01, "{}: ADMM objective off by {:.3}%", c.name, 100.0 * gap);
        let ratio = admm.iterations as f64 / dopf.iterations as f64;
        ensure!(
            5 * dopf.iterations <= admm.iterations,
            "{}: D-OPF {} vs ADMM {} iterations",
            c.name,
            dopf.iterations,
            admm.iterations
        );
        parts.push(format!("{} {}/{} = {ratio:.1}x", c.name, admm.iterations, dopf.iterations));
    }
    ensure!(total.as_secs_f64() < 300.0, "{:.1} s", total.as_secs_f64());
    Ok(parts.join(", "))
}

fn c4_gsi_trend(sweep: &[(f64, gridopf_cli::RunReport)]) -> Result<String> {
    let mut parts = Vec::new();
    for m in [Method::Copf, Method::Dopf] {
        let mut prev = f64::NEG_INFINITY;
        let mut seq = Vec::new();
        for (pct, rep) in sweep {
            let kw = rep
                .run(m)
                .and_then(|r| r.objective_kw)
                .with_context(|| format!("{m} at {pct}% GSI has no objective"))?;
            ensure!(kw >= prev, "{m}: {kw:.3} kW at {pct}% GSI is below {prev:.3} kW");
            prev = kw;
            seq.push(format!("{kw:.2}"));
        }
        parts.push(format!("{m} {}", seq.join(" -> ")));
    }
    Ok(format!("{} kW", parts.join("; ")))
}

fn c5_validation(runs: &[(&MethodRun, String)]) -> Result<String> {
    let mut worst = 0.0f64;
    for (r, label) in runs {
        let v = r.validation.as_ref().with_context(|| format!("{label}: not validated"))?;
        ensure!(v.passed && r.passed(), "{label}: {:?}", r.outcome);
        ensure!(v.voltage_mismatch <= 1e-4, "{label}: mismatch {:.2e}", v.voltage_mismatch);
        worst = worst.max(v.voltage_mismatch);
    }
    Ok(format!("{} solutions, worst mismatch {worst:.1e} pu", runs.len()))
}

fn c6_droop(solved: &Solved) -> Result<String> {
    let mut worst = 0.0f64;
    let mut n = 0;
    for (f, sol, label) in solved {
        for (d, der) in f.ders.iter().enumerate() {
            if let DerMode::GridSupporting { curve, .. } = der.mode {
                let b = f.bus_index(&der.bus).context("DER bus")?;
                let err = (sol.der_q[d] - droop_q(sol.v2[b], &curve)).abs();
                ensure!(err <= 1e-6, "{label} bus {}: droop residual {err:.2e}", der.bus);
                worst = worst.max(err);
                n += 1;
            }
        }
    }
    ensure!(n > 0, "no GSI buses solved");

    let curves = [
        DroopCurve { q_ref: 0.0, v_ref: 1.0, k_q: 0.5 },
        DroopCurve { q_ref: 0.01, v_ref: 1.02, k_q: 2.0 },
    ];
    let mut taylor = 0.0f64;
    for c in &curves {
        for i in 0..1000 {
            let v = 0.9 + 0.2 * i as f64 / 999.0;
            let gap = (droop_q(v * v, c) - droop_q_exact(v, c)).abs();
            let expected = c.k_q * (v - c.v_ref).powi(2) / (2.0 * c.v_ref);
            let err = (gap - expected).abs();
            ensure!(err <= 1e-12, "Taylor gap off by {err:.2e} at V = {v}");
            taylor = taylor.max(err);
        }
    }
    Ok(format!("{n} GSI dispatches, worst {worst:.1e}; Taylor gap within {taylor:.0e}"))
}

fn c7_gfi(solved: &Solved) -> Result<String> {
    let (mut wv, mut wd, mut n) = (0.0f64, f64::NEG_INFINITY, 0);
    for (f, sol, label) in solved {
        for (d, der) in f.ders.iter().enumerate() {
            if let DerMode::GridForming { v_set2 } = der.mode {
                let b = f.bus_index(&der.bus).context("DER bus")?;
                let dv = (sol.v2[b] - v_set2).abs();
                let disk = sol.der_p[d].hypot(sol.der_q[d]) - der.s_rating;
                ensure!(dv <= 1e-6, "{label} bus {}: |v - v_set| = {dv:.2e}", der.bus);
                ensure!(disk <= 1e-8, "{label} bus {}: outside rating by {disk:.2e}", der.bus);
                wv = wv.max(dv);
                wd = wd.max(disk);
                n += 1;
            }
        }
    }
    ensure!(n > 0, "no GFI solved");
    Ok(format!("{n} GFI dispatches, worst |dv| {wv:.1e}, disk margin {:.1e}", -wd))
}

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

fn two_bus_grid_gap() -> Result<f64> {
    let f = Feeder::new(
        "two-bus",
        vec![Bus::new("0", 0.0, 0.0), Bus::new("1", 0.1, 0.05)],
        vec![LineSpec::new("0", "1", 0.01, 0.01)],
        vec![DerSpec::new("1", 0.15, DerMode::GridFollowingQ { p_measured: 0.1 })],
        "0",
        1.0,
        1e6,
        4160.0,
    )?;
    let q_max = (0.15f64 * 0.15 - 0.1 * 0.1).sqrt();
    let (mut best, mut q_best) = (f64::INFINITY, 0.0);
    let steps = (2.0 * q_max / 1e-4).floor() as usize;
    for k in 0..=steps {
        let q = -q_max + k as f64 * 1e-4;
        let s = solve_powerflow(&f, &[Injection::Fixed { p: 0.1, q }], f.v_sub2)?;
        let v = s.v2[1];
        if v >= f.buses[1].v_min2 && v <= f.buses[1].v_max2 && s.losses < best {
            best = s.losses;
            q_best = q;
        }
    }
    let sol = solve_copf(&f, &OpfOptions::default())?;
    Ok((sol.der_q[0] - q_best).abs())
}

fn c8_hygiene(case: &Case) -> Result<String> {
    let (f, part) = (&case.feeder, &case.partition);
    let opts = OpfOptions::default();
    let bs = init_boundary(f, part);
    let mut models: Vec<AreaModel> = vec![build_copf(f, &opts)?];
    for a in 0..part.len() {
        models.push(build_subproblem(f, part, a, &bs, &opts)?);
    }
    let st = AdmmState::new(f, part, admm_options(&case.scenario).rho);
    for (a, area) in part.areas.iter().enumerate() {
        let root = match area.upstream_edge {
            Some(e) => {
                let z = st.z[e];
                RootSpec::Proximal { v: z[0], p: z[1], q: z[2], rho: st.rho }
            }
            None => RootSpec::Fixed(f.v_sub2),
        };
        let edge_loads = area
            .downstream_edges
            .iter()
            .map(|&e| {
                let z = st.z[e];
                (e, EdgeLoad::Proximal { v: z[0], p: z[1], q: z[2], rho: st.rho })
            })
            .collect();
        models.push(build_area(f, part, a, &AreaInputs { root, edge_loads }, &opts)?);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut wg, mut wh) = (0.0f64, 0.0f64);
    for am in &models {
        for _ in 0..20 {
            let x = interior_point(&am.model, &am.x0, &mut rng);
            let g = check_gradients(&am.model, &x, 1e-6);
            let eq: Vec<f64> = (0..am.model.n_eq()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let ineq: Vec<f64> = (0..am.model.n_ineq()).map(|_| rng.random_range(0.0..1.0)).collect();
            let h = check_hessian(&am.model, &x, &eq, &ineq, 1e-6);
            ensure!(g < 1e-5, "Jacobian error {g:.2e}");
            ensure!(h < 1e-5, "Hessian error {h:.2e}");
            wg = wg.max(g);
            wh = wh.max(h);
        }
    }
    let grid = two_bus_grid_gap()?;
    ensure!(grid <= 1e-3, "2-bus argmin off by {grid:.2e}");
    Ok(format!(
        "{} models x 20 points, Jacobian {wg:.1e}, Hessian {wh:.1e}; 2-bus argmin within {grid:.1e}",
        models.len()
    ))
}

fn c9_determinism() -> Result<String> {
    let dir = tempfile::tempdir()?;
    let mut sizes = Vec::new();
    for file in CASES {
        let s = scenario(file)?;
        let mut bytes = Vec::new();
        for k in 0..2 {
            let path = dir.path().join(format!("{}-{k}.json", s.name));
            run_scenario(&s)?.write(&path)?;
            bytes.push(std::fs::read(&path)?);
        }
        if bytes[0] != bytes[1] {
            bail!("{}: reports differ between runs", s.name);
        }
        let mut par = s.clone();
        par.solver.parallel_areas = true;
        let mut rep = run_scenario(&par)?;
        // The flag itself is echoed in the report; everything else must match.
        rep.scenario.solver.parallel_areas = false;
        ensure!(
            rep.to_json().as_bytes() == bytes[0].as_slice(),
            "{}: parallel area solves changed the report",
            s.name
        );
        sizes.push(format!("{} {} B", s.name, bytes[0].len()));
    }
    Ok(format!("serial x2 and parallel identical: {}", sizes.join(", ")))
}

fn report(n: usize, name: &str, t: Instant, res: Result<String>, ok: &mut bool) {
    let secs = t.elapsed().as_secs_f64();
    match res {
        Ok(detail) => println!("PASS {n} {name}: {detail} [{secs:.1} s]"),
        Err(e) => {
            *ok = false;
            println!("FAIL {n} {name}: {e:#} [{secs:.1} s]");
        }
    }
}

fn main() -> ExitCode {
    let mut ok = true;

    let t = Instant::now();
    let cases: Vec<Case> = match CASES.iter().map(|c| Case::load(c)).collect() {
        Ok(c) => c,
        Err(e) => {
            println!("FAIL setup: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    println!("setup: solved {} cases with every method [{:.1} s]", cases.len(), t.elapsed().as_secs_f64());

    let t = Instant::now();
    let res = (|| {
        let mut feeders: Vec<Feeder> = cases.iter().map(|c| c.feeder.clone()).collect();
        feeders.push(scenario("feeder123-gfl.toml")?.build_feeder()?);
        let detail = c1_degenerate_partition(&feeders)?;
        ensure!(t.elapsed().as_secs_f64() < 10.0, "took {:.1} s", t.elapsed().as_secs_f64());
        Ok(detail)
    })();
    report(1, "degenerate partition", t, res, &mut ok);

    let t = Instant::now();
    report(2, "D-OPF vs C-OPF", t, c2_dopf_vs_copf(&cases), &mut ok);

    let t = Instant::now();
    report(3, "iteration ratio", t, c3_iteration_ratio(&cases), &mut ok);

    let t = Instant::now();
    let sweep = (|| {
        let mut s = scenario("case2-gsi.toml")?;
        s.methods = vec![Method::Copf, Method::Dopf];
        run_sweep(&s)
    })();
    let sweep = match sweep {
        Ok(s) => s,
        Err(e) => {
            println!("FAIL 4 GSI trend: {e:#}");
            ok = false;
            Vec::new()
        }
    };
    if !sweep.is_empty() {
        report(4, "GSI trend", t, c4_gsi_trend(&sweep), &mut ok);
    }

    let mut runs: Vec<(&MethodRun, String)> = Vec::new();
    let mut solved: Solved = Vec::new();
    let sweep_feeders: Vec<(Feeder, &gridopf_cli::RunReport, f64)> = sweep
        .iter()
        .filter_map(|(pct, rep)| Some((rep.scenario.build_feeder().ok()?, rep, *pct)))
        .collect();
    for c in &cases {
        for (m, (r, _)) in &c.runs {
            runs.push((r, format!("{} {m}", c.name)));
            if let Some(sol) = &r.solution {
                solved.push((&c.feeder, sol, format!("{} {m}", c.name)));
            }
        }
    }
    for (f, rep, pct) in &sweep_feeders {
        for r in &rep.runs {
            runs.push((r, format!("gsi{pct} {}", r.method)));
            if let Some(sol) = &r.solution {
                solved.push((f, sol, format!("gsi{pct} {}", r.method)));
            }
        }
    }

    let t = Instant::now();
    report(5, "validation loop", t, c5_validation(&runs), &mut ok);
    let t = Instant::now();
    report(6, "droop fidelity", t, c6_droop(&solved), &mut ok);
    let t = Instant::now();
    report(7, "GFI contract", t, c7_gfi(&solved), &mut ok);
    let t = Instant::now();
    report(8, "numerical hygiene", t, c8_hygiene(&cases[2]), &mut ok);
    let t = Instant::now();
    report(9, "determinism", t, c9_determinism(), &mut ok);

    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
