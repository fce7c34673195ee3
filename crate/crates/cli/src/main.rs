use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qswitch_cli::{commands, CliError, Model, RunConfig};
use qswitch_core::tomo::Method;

#[derive(Parser, Debug)]
#[command(name = "expcli", version, about = "Photonic quantum switch simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    model: Option<Model>,
    #[arg(long, global = true)]
    distinguishability: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Circuit file for the Fock model.
    #[arg(long, global = true)]
    circuit: Option<PathBuf>,
    #[arg(long, global = true)]
    no_plots: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-setting outcome probabilities to probabilities.csv.
    Simulate,
    /// Optimal causal witness to witness.json.
    Witness,
    /// Witness value over a distinguishability grid to sweep.csv.
    Sweep {
        #[arg(long)]
        points: Option<usize>,
    },
    /// Two-photon tomography and fringe scans.
    Tomo {
        #[arg(long)]
        pairs: Option<u64>,
        #[arg(long)]
        method: Option<Method>,
        /// Reconstruct imported counts instead of simulating.
        #[arg(long)]
        counts: Option<PathBuf>,
    },
    /// Oracle-equivalence suite across the three models.
    Check,
    /// simulate, witness, sweep and tomo in sequence.
    Run,
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(m) = c.model {
        cfg.model = m;
    }
    if let Some(d) = c.distinguishability {
        cfg.distinguishability = d;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    if let Some(p) = &c.circuit {
        cfg.circuit = Some(p.clone());
    }
    if c.no_plots {
        cfg.plots = false;
    }
    match &cli.command {
        Command::Sweep { points: Some(n) } => cfg.sweep_points = *n,
        Command::Tomo { pairs, method, counts } => {
            if let Some(p) = pairs {
                cfg.tomo_pairs = *p;
            }
            if let Some(m) = method {
                cfg.tomo_method = *m;
            }
            if let Some(path) = counts {
                cfg.tomo_counts = Some(path.clone());
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let r = commands::simulate(cfg)?;
    println!("{} model, D = {}: {} settings, max |sum p - 1| = {:.3e}", r.model, r.distinguishability, r.settings, r.max_normalization_error);
    Ok(())
}

fn witness(cfg: &RunConfig) -> Result<(), CliError> {
    let r = commands::witness(cfg)?;
    println!("C_W = {:.6} ({} model, D = {}, gap {:.1e}, {} iterations)", r.value, r.model, r.distinguishability, r.gap, r.iterations);
    Ok(())
}

fn sweep(cfg: &RunConfig) -> Result<(), CliError> {
    let r = commands::sweep(cfg)?;
    for row in &r.rows {
        println!("D = {:.2}  V = {:.4}  C_W = {:+.6}  fixed = {:+.6}", row.distinguishability, row.visibility, row.witness_opt, row.witness_fixed);
    }
    if let Some(p) = &r.probe {
        println!("D = {:.2} (V = {:.3}): C_W = {:.4}", p.distinguishability, p.visibility, p.witness_opt);
    }
    match r.sign_change {
        Some(d) => println!("sign change near D = {d:.3}; monotone: {}", r.monotone),
        None => println!("no sign change on the grid; monotone: {}", r.monotone),
    }
    Ok(())
}

fn tomo(cfg: &RunConfig) -> Result<(), CliError> {
    let r = commands::tomography(cfg)?;
    for row in &r.rows {
        println!("input {} {:?}: fidelity {:.4}, purity {:.4}{}", row.input, row.method, row.fidelity, row.purity, if row.physical { "" } else { " (not PSD)" });
    }
    for f in &r.fringes {
        println!("input {} fringe visibility {:.4}{}", f.input, f.visibility, if f.degenerate { " (flat)" } else { "" });
    }
    Ok(())
}

fn check(cfg: &RunConfig) -> Result<(), CliError> {
    let outcome = commands::check(cfg);
    let path = cfg.out.join("report_check.json");
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(doc) = serde_json::from_str::<serde_json::Value>(&text) {
            for l in doc["summary"]["lines"].as_array().into_iter().flatten() {
                let status = if l["pass"].as_bool() == Some(true) { "PASS" } else { "FAIL" };
                println!("{status} {} = {:.3e} (tol {:.0e})", l["name"].as_str().unwrap_or("?"), l["value"].as_f64().unwrap_or(f64::NAN), l["tolerance"].as_f64().unwrap_or(f64::NAN));
            }
        }
    }
    outcome.map(|_| ())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = resolve(&cli).and_then(|cfg| match cli.command {
        Command::Simulate => simulate(&cfg),
        Command::Witness => witness(&cfg),
        Command::Sweep { .. } => sweep(&cfg),
        Command::Tomo { .. } => tomo(&cfg),
        Command::Check => check(&cfg),
        Command::Run => simulate(&cfg).and_then(|_| witness(&cfg)).and_then(|_| sweep(&cfg)).and_then(|_| tomo(&cfg)),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("expcli: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
