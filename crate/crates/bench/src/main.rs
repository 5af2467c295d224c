use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sesop_bench::config::ExperimentConfig;
use sesop_bench::output;
use sesop_bench::presets::{run_preset, Overrides};
use sesop_bench::runner::{run_experiment, workers_from_env, WORKERS_ENV};
use sesop_bench::studies::analyze;
use sesop_bench::BenchError;

const EXIT_CONFIG: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "sesop-bench", version, about = "SESOP-MG convergence experiments")]
#[command(after_help = format!("Worker threads: set {WORKERS_ENV} (default: all cores)."))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct PresetArgs {
    /// Grid scale factor (a power of two).
    #[arg(long)]
    scale: Option<f64>,
    /// Seed for every random initial guess.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config.
    Solve {
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Fourier analysis and fixed stepsizes of a linear config.
    Analyze {
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    Table1(PresetArgs),
    Table2(PresetArgs),
    Fig1(PresetArgs),
    Fig2(PresetArgs),
    Fig3(PresetArgs),
    Fig4(PresetArgs),
    Fig5(PresetArgs),
    Fig6(PresetArgs),
    Fig7(PresetArgs),
    Fig8(PresetArgs),
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

fn solve(path: &Path, out: &Path) -> Result<bool, BenchError> {
    let cfg = ExperimentConfig::load(path)?;
    let report = run_experiment(&cfg)?;
    output::write_report(out, &report)?;
    println!(
        "{}: {} iterations, converged {}, final metric {:.3e}, factor {}, predicted {}",
        cfg.name,
        report.iterations,
        report.converged,
        report.final_metric(),
        fmt(report.measured_factor),
        fmt(report.predicted_factor)
    );
    if let Some(f) = &report.failure {
        println!("stopped early: {f}");
    }
    Ok(report.converged)
}

fn run_analysis(path: &Path, out: &Path) -> Result<(), BenchError> {
    let cfg = ExperimentConfig::load(path)?;
    let a = analyze(&cfg)?;
    println!("sampling m = {}", a.m);
    println!("h-ellipticity {:.6}", a.h_ellipticity);
    println!("ideal factors {:.4} / {:.4}", a.ideal_without_history, a.ideal_with_history);
    for (label, c) in [("ordinary", a.ordinary), ("optimized", a.optimized)] {
        println!(
            "{label}: c1 {:.6e} c2 {:.6e} c3 {:.6e} alpha {:.6} predicted {:.4}",
            c.c1,
            c.c2(),
            c.c3(),
            c.alpha,
            c.predicted_factor
        );
    }
    output::write_json(&out.join(format!("{}-analysis.json", cfg.name)), &a)
}

fn preset(name: &str, args: &PresetArgs) -> Result<(), BenchError> {
    let o = Overrides {
        scale: args.scale,
        seed: args.seed,
    };
    let res = run_preset(name, o, &args.out, workers_from_env())?;
    for r in &res.reports {
        println!(
            "{:<36} iters {:>4} conv {:<5} factor {:>6} predicted {:>6}",
            r.config.name,
            r.iterations,
            r.converged,
            fmt(r.measured_factor),
            fmt(r.predicted_factor)
        );
    }
    for r in &res.table2 {
        println!(
            "phi {:.4} eps {:.0e} {:?}: ord {:.3} sesop {:.3} opt {:.3} ideal {:.3}",
            r.phi, r.epsilon, r.prolongation, r.ordinary, r.sesop, r.optimized, r.ideal
        );
    }
    for p in &res.rratio {
        println!(
            "eps {:.0e} phi {:.4} num {:>4}: factor {:.4} r_ratio {:.4}",
            p.epsilon, p.phi, p.num, p.factor, p.r_ratio
        );
    }
    println!("wrote {} files under {}", res.files.len(), args.out.join(name).display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve { config, out } => solve(config, out).map(|ok| ok.then_some(())),
        Command::Analyze { config, out } => run_analysis(config, out).map(Some),
        Command::Table1(a) => preset("table1", a).map(Some),
        Command::Table2(a) => preset("table2", a).map(Some),
        Command::Fig1(a) => preset("fig1", a).map(Some),
        Command::Fig2(a) => preset("fig2", a).map(Some),
        Command::Fig3(a) => preset("fig3", a).map(Some),
        Command::Fig4(a) => preset("fig4", a).map(Some),
        Command::Fig5(a) => preset("fig5", a).map(Some),
        Command::Fig6(a) => preset("fig6", a).map(Some),
        Command::Fig7(a) => preset("fig7", a).map(Some),
        Command::Fig8(a) => preset("fig8", a).map(Some),
    };
    match result {
        Ok(Some(())) => ExitCode::SUCCESS,
        Ok(None) => ExitCode::from(EXIT_NOT_CONVERGED),
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
