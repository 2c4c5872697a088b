use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use tsaga_core::harness::{emit_outputs, run_experiment, ExperimentConfig};
use tsaga_core::se::{
    check_theorem1, check_theorem2, se_population, verify_bound_empirically, write_se_csv, BoundProblem, MmseOracle,
    SeConfig, SeRow,
};
use tsaga_core::tsaga::Variant;
use tsaga_core::ChainParams;

/// Nominal dimension used for state-evolution predictions.
const SE_DIM: usize = 10_000;

#[derive(Parser)]
#[command(name = "tsaga", version, about = "Over-the-air federated learning with turbo gradient recovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Flat TOML experiment file
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed
    #[arg(long)]
    seed: Option<u64>,
    /// error-free, tsa-ga, no-support, no-amplitude or memoryless
    #[arg(long)]
    variant: Option<Variant>,
    /// Overrides both the learning and state-evolution round counts
    #[arg(long)]
    rounds: Option<usize>,
    /// Output directory, overriding out_dir
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train with over-the-air aggregation and write per-round logs.
    Run(Common),
    /// State-evolution predictions across rounds.
    Se(Common),
    /// Empirical check of the learning-loss bound on a quadratic problem.
    Bound(Common),
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config).with_context(|| format!("loading {}", self.config.display()))?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(v) = self.variant {
            cfg.variant = v;
        }
        if let Some(r) = self.rounds {
            cfg.rounds = r;
            cfg.se_rounds = r;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cfg: &ExperimentConfig) -> Result<bool> {
    let out = run_experiment(cfg)?;
    emit_outputs(&out, &cfg.out_dir)?;
    if let Some(acc) = out.final_accuracy() {
        println!("final accuracy {acc:.4} after {} rounds", out.logs.len());
    }
    if let Some(reason) = &out.aborted {
        eprintln!("aborted: {reason}");
    }
    let flagged: Vec<usize> = out.logs.iter().filter(|l| l.diverged).map(|l| l.round).collect();
    if !flagged.is_empty() {
        eprintln!("recovery diverged in rounds {flagged:?}");
    }
    Ok(!out.has_divergence())
}

fn se(cfg: &ExperimentConfig) -> Result<bool> {
    let params = ChainParams::stationary(cfg.se_lambda, 1.0, cfg.se_p01, cfg.se_beta, cfg.epsilon)?;
    let s = ((cfg.channel_ratio * SE_DIM as f64).round() as usize).clamp(1, SE_DIM);
    let sigma_eff = SE_DIM as f64 / s as f64 * cfg.se_noise;
    let se_cfg = SeConfig {
        oracle: MmseOracle::MonteCarlo {
            samples: cfg.se_samples,
            seed: cfg.seed,
        },
        tol: cfg.tol,
        ..SeConfig::default()
    };
    let traces = se_population(&params, cfg.se_population, cfg.se_rounds, SE_DIM, s, sigma_eff, &se_cfg, cfg.seed)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    write_se_csv(&cfg.out_dir.join("se.csv"), &SeRow::from_traces(&traces))?;
    let mut ok = true;
    for (t, tr) in traces.iter().enumerate() {
        let r = check_theorem1(tr);
        println!(
            "round {}: tau* {:.6e} v* {:.6e} in {} iterations{}",
            t + 1,
            tr.tau_star,
            tr.v_star,
            tr.iterations,
            if tr.flagged { " (flagged)" } else { "" }
        );
        for h in &r.hard {
            eprintln!("round {}: {h}", t + 1);
        }
        ok &= r.passed() && !tr.flagged;
    }
    let r2 = check_theorem2(&traces);
    for h in &r2.hard {
        eprintln!("{h}");
    }
    Ok(ok && r2.passed())
}

fn bound(cfg: &ExperimentConfig) -> Result<bool> {
    let problem = BoundProblem::random(
        cfg.bound_dim,
        cfg.bound_devices,
        cfg.samples_per_device,
        cfg.bound_c,
        cfg.bound_l,
        cfg.seed,
    );
    let (s, k) = cfg.channel_dims(cfg.bound_dim);
    let seeds: Vec<u64> = (0..cfg.bound_seeds as u64).map(|i| cfg.seed + i).collect();
    let checkpoints: Vec<usize> = (1..=cfg.rounds).collect();
    let report = verify_bound_empirically(&problem, s, k, cfg.sigma_e, cfg.p_bar, cfg.variant, &seeds, &checkpoints)?;
    let rows: Vec<SeRow> = report
        .checks
        .iter()
        .map(|c| SeRow {
            round: c.t,
            kappa: Some(report.kappas[c.t - 1]),
            bound: Some(c.bound),
            empirical_gap: Some(c.empirical_gap),
            ..SeRow::default()
        })
        .collect();
    std::fs::create_dir_all(&cfg.out_dir)?;
    write_se_csv(&cfg.out_dir.join("bound.csv"), &rows)?;
    let last = report.checks.last().expect("at least one checkpoint");
    println!(
        "round {}: gap {:.6e} bound {:.6e} (G = {:.4e}, rho = {:.4})",
        last.t, last.empirical_gap, last.bound, report.constants.g_bound, report.constants.rho
    );
    if !report.bound_holds() {
        eprintln!("empirical gap exceeds the bound");
    }
    Ok(true)
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(c) => run(&c.resolve()?),
        Command::Se(c) => se(&c.resolve()?),
        Command::Bound(c) => bound(&c.resolve()?),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
