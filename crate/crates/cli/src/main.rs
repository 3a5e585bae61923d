//! Command-line driver for the spectral laboratory: kernel tables, stability
//! scans, decay studies, lemma verification, nonlinear runs, lifespan sweeps
//! and functional checks, with results persisted as CSV/JSONL/JSON.
//!
//! Exit codes: 0 all checks pass, 1 check failures, 2 usage/config errors.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use tevo_core::lab::{self, report, ExperimentKind, ExperimentPlan, PlanParams};

#[derive(Parser)]
#[command(
    name = "tevo",
    about = "Spectral laboratory for a third-order-in-time evolution equation with fractional dissipation",
    version
)]
struct Cli {
    /// JSON plan file; command-line parameters override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports and tables.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for parameter sweeps (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Seed for randomized verification sweeps.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ParamArgs {
    #[arg(long, default_value_t = 1.0)]
    n: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 2.0)]
    eta: f64,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
}

impl ParamArgs {
    fn plan_params(&self) -> PlanParams {
        PlanParams { n: self.n, sigma: self.sigma, eta: self.eta, p: self.p, epsilon: self.epsilon }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the three Fourier-space kernels and their equation residual.
    KernelTable(ParamArgs),
    /// Measure growth/decay exponents and Gevrey slopes across eta.
    StabilityScan(ParamArgs),
    /// Fit the sharp linear decay rates by radial quadrature.
    DecayStudy(ParamArgs),
    /// Run the full lemma/identity verification suite.
    VerifyLemmas(ParamArgs),
    /// Integrate one semilinear run and record the trajectory.
    NonlinearRun(ParamArgs),
    /// Sweep epsilon, detect blow-up and fit the lifespan scaling.
    LifespanSweep(ParamArgs),
    /// Evaluate the blow-up test-function functionals on a smooth run.
    FunctionalCheck(ParamArgs),
}

fn load_plan(cli: &Cli, kind: ExperimentKind, args: &ParamArgs) -> Result<ExperimentPlan, String> {
    let mut plan = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            let mut p = ExperimentPlan::from_json(&text).map_err(|e| e.to_string())?;
            p.kind = kind;
            p
        }
        None => ExperimentPlan::new(kind, args.plan_params()),
    };
    if cli.config.is_none() {
        plan.params = args.plan_params();
    }
    if let Some(seed) = cli.seed {
        plan.seed = seed;
    }
    Ok(plan)
}

fn write(out: &PathBuf, name: &str, text: &str) -> Result<(), String> {
    let path = out.join(name);
    report::write_text(&path, text).map_err(|e| e.to_string())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<bool, String> {
    let (kind, args) = match &cli.command {
        Command::KernelTable(a) => (ExperimentKind::KernelTable, a),
        Command::StabilityScan(a) => (ExperimentKind::StabilityScan, a),
        Command::DecayStudy(a) => (ExperimentKind::DecayStudy, a),
        Command::VerifyLemmas(a) => (ExperimentKind::LemmaVerify, a),
        Command::NonlinearRun(a) => (ExperimentKind::NonlinearRun, a),
        Command::LifespanSweep(a) => (ExperimentKind::LifespanSweep, a),
        Command::FunctionalCheck(a) => (ExperimentKind::FunctionalCheck, a),
    };
    let plan = load_plan(cli, kind, args)?;
    write(&cli.out, "run-meta.json", &lab::run_meta_json(&plan).render())?;

    let all_pass = match kind {
        ExperimentKind::KernelTable => {
            let csv = lab::run_kernel_table(&plan).map_err(|e| e.to_string())?;
            write(&cli.out, "kernel-table.csv", &csv)?;
            true
        }
        ExperimentKind::StabilityScan => {
            let rep = lab::run_stability_scan(&plan).map_err(|e| e.to_string())?;
            write(&cli.out, "stability-scan.json", &lab::stability_json(&rep).render())?;
            for row in &rep.rows {
                println!(
                    "eta = {:5.2}: exponent {:+.5} (predicted {:+.5})",
                    row.eta, row.measured_exponent, row.predicted_exponent
                );
            }
            println!("stability scan: {}", verdict(rep.pass));
            rep.pass
        }
        ExperimentKind::DecayStudy => {
            let (rep, csv) = lab::run_decay_study(&plan).map_err(|e| e.to_string())?;
            write(&cli.out, "decay-table.csv", &csv)?;
            write(&cli.out, "decay-report.json", &lab::decay_json(&rep).render())?;
            println!(
                "L2 slope {:+.4} (expected {:+.4}); Hs slope {:+.4} (expected {:+.4})",
                rep.l2_fit.slope, rep.expected_l2_slope, rep.hs_fit.slope, rep.expected_hs_slope
            );
            println!("decay study: {}", verdict(rep.pass));
            rep.pass
        }
        ExperimentKind::LemmaVerify => {
            let rep = lab::run_verify(&plan).map_err(|e| e.to_string())?;
            write(&cli.out, "verify-lemmas.json", &lab::verify_json(&rep).render())?;
            for c in &rep.checks {
                println!("{:38} {}", c.lemma, verdict(c.pass));
            }
            println!("verify-lemmas: {}", verdict(rep.pass));
            rep.pass
        }
        ExperimentKind::NonlinearRun => {
            let (_, rep, jsonl) = lab::run_nonlinear(&plan).map_err(|e| e.to_string())?;
            write(&cli.out, "trajectory.jsonl", &jsonl)?;
            write(&cli.out, "blowup.json", &lab::blowup_json(&rep).render())?;
            match rep.lifespan_estimate {
                Some(t) => println!("blow-up detected, lifespan estimate {t:.6}"),
                None => println!("no blow-up within the horizon"),
            }
            true
        }
        ExperimentKind::LifespanSweep => {
            let rep = lab::run_lifespan_sweep(&plan).map_err(|e| e.to_string())?;
            write(&cli.out, "lifespan-sweep.json", &lab::sweep_json(&rep).render())?;
            for w in &rep.warnings {
                eprintln!("warning: {w}");
            }
            let ok = match (rep.fitted_exponent, rep.relative_error) {
                (Some(f), Some(e)) => {
                    println!(
                        "fitted exponent {f:+.5} vs theoretical {:+.5} (relative error {:.2}%)",
                        rep.theoretical_exponent,
                        100.0 * e
                    );
                    e < 0.15
                }
                _ => false,
            };
            println!("lifespan sweep: {}", verdict(ok));
            ok
        }
        ExperimentKind::FunctionalCheck => {
            let rep = lab::run_functional_check(&plan).map_err(|e| e.to_string())?;
            write(&cli.out, "functionals.json", &lab::functional_json(&rep).render())?;
            println!(
                "I_R = {:.6e}, Y_p = {:.6e}, weak residual = {:.3e}",
                rep.i_r, rep.y_p, rep.weak_residual
            );
            let ok = rep.weak_residual < 1e-2;
            println!("functional check: {}", verdict(ok));
            ok
        }
    };
    Ok(all_pass)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global() {
            eprintln!("config error: cannot size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
    }
}
