use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use gridopf_cli::compare::{compare_methods, comparison_table};
use gridopf_cli::plot::emit_plotdata;
use gridopf_cli::report::RunReport;
use gridopf_cli::run::{run_scenario, run_sweep, sweep_rows};
use gridopf_cli::scenario::{Method, Scenario};
use gridopf_core::feeder::validate_radial;

#[derive(Parser)]
#[command(name = "gridopf", version, about = "Centralized and distributed OPF scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario, its feeder and its partition without solving.
    Validate(Common),
    /// Centralized OPF.
    Copf(Common),
    /// Distributed OPF by fixed-point boundary exchange.
    Dopf(Common),
    /// Distributed OPF by consensus ADMM.
    Admm(Common),
    /// Run several methods (or load saved reports) and tabulate them.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Methods to run; defaults to the scenario's list.
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Saved reports to compare instead of running the scenario.
        #[arg(long, num_args = 1..)]
        reports: Vec<PathBuf>,
    },
    /// Repeat the scenario over the GSI shares listed in its sweep section.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Methods to run; defaults to the scenario's list.
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory; defaults to the scenario's out_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Consensus tolerance (pu).
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    max_macro: Option<usize>,
    /// Solve the areas of each iteration in parallel.
    #[arg(long)]
    parallel_areas: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Copf,
    Dopf,
    Admm,
    All,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Copf => vec![Method::Copf],
            MethodArg::Dopf => vec![Method::Dopf],
            MethodArg::Admm => vec![Method::Admm],
            MethodArg::All => Method::ALL.to_vec(),
        }
    }
}

impl Common {
    fn scenario(&self) -> Result<Scenario> {
        let path = self
            .scenario
            .as_deref()
            .context("--scenario <path> is required")?;
        let mut s = Scenario::load(path)?;
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(eps) = self.eps {
            s.solver.eps = eps;
        }
        if let Some(n) = self.max_macro {
            s.solver.max_macro = n;
        }
        if self.parallel_areas {
            s.solver.parallel_areas = true;
        }
        s.check()?;
        Ok(s)
    }

    fn out_dir(&self, s: &Scenario) -> PathBuf {
        match (&self.out, &s.out_dir) {
            (Some(out), _) => out.clone(),
            (None, Some(dir)) => s.base_dir.join(dir),
            (None, None) => PathBuf::from("out").join(&s.name),
        }
    }
}

fn write_report(report: &RunReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    report.write(&dir.join("report.json"))?;
    emit_plotdata(report, dir)?;
    Ok(())
}

fn summarize(report: &RunReport) {
    for run in &report.runs {
        match (run.objective_kw, &run.error) {
            (_, Some(e)) => println!("{:<5} error: {e}", run.method),
            (Some(kw), None) => println!(
                "{:<5} {:?} objective {kw:.4} kW, {} iterations",
                run.method, run.outcome, run.iterations
            ),
            (None, None) => println!("{:<5} {:?}", run.method, run.outcome),
        }
    }
}

fn single(common: &Common, method: Method) -> Result<bool> {
    let mut s = common.scenario()?;
    s.methods = vec![method];
    let report = run_scenario(&s)?;
    let dir = common.out_dir(&s);
    write_report(&report, &dir)?;
    summarize(&report);
    println!("report written to {}", dir.display());
    Ok(report.passed)
}

fn validate(common: &Common) -> Result<bool> {
    let s = common.scenario()?;
    let f = s.build_feeder()?;
    let topo = validate_radial(&f);
    if !topo.is_ok() {
        println!("feeder {}: {topo}", f.name);
        return Ok(false);
    }
    let part = s.build_partition(&f)?;
    println!(
        "feeder {}: {} buses, {} lines, {} DERs, {} areas",
        f.name,
        f.n_buses(),
        f.n_lines(),
        f.ders.len(),
        part.len()
    );
    Ok(true)
}

fn compare(common: &Common, method: Option<MethodArg>, paths: &[PathBuf]) -> Result<bool> {
    let (reports, dir) = if paths.is_empty() {
        let mut s = common.scenario()?;
        if let Some(m) = method {
            s.methods = m.methods();
        }
        let report = run_scenario(&s)?;
        let dir = common.out_dir(&s);
        write_report(&report, &dir)?;
        summarize(&report);
        (vec![report], dir)
    } else {
        let reports = paths
            .iter()
            .map(|p| RunReport::load(p))
            .collect::<Result<Vec<_>>>()?;
        let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
        (reports, dir)
    };
    let rows = compare_methods(&reports)?;
    let table = comparison_table(&rows)?;
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("comparison.csv"), &table)?;
    print!("{table}");
    Ok(reports.iter().all(|r| r.passed))
}

fn sweep(common: &Common, method: Option<MethodArg>) -> Result<bool> {
    let mut s = common.scenario()?;
    if let Some(m) = method {
        s.methods = m.methods();
    }
    let results = run_sweep(&s)?;
    let dir = common.out_dir(&s);
    for (pct, report) in &results {
        write_report(report, &dir.join(format!("gsi{pct}")))?;
    }
    let rows = sweep_rows(&results);
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        w.serialize(row)?;
    }
    let table = String::from_utf8(w.into_inner()?)?;
    std::fs::write(dir.join("sweep.csv"), &table)?;
    print!("{table}");
    Ok(results.iter().all(|(_, r)| r.passed))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate(c) => validate(c),
        Command::Copf(c) => single(c, Method::Copf),
        Command::Dopf(c) => single(c, Method::Dopf),
        Command::Admm(c) => single(c, Method::Admm),
        Command::Compare {
            common,
            method,
            reports,
        } => compare(common, *method, reports),
        Command::Sweep { common, method } => sweep(common, *method),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
