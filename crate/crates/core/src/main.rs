use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use vortex_core::harness::{self, evaluate_gate, exit_code, sweep, write_diagnostics, write_gate, RunConfig, SweepAxis};
use vortex_core::roughpath::store::{read_store, write_store};
use vortex_core::solver::{picard_solve, store::read_trajectory, store::write_trajectory, PathGamma, SolveOptions};
use vortex_core::verifier::run_verification;
use vortex_core::{Error, Result};

#[derive(Parser)]
#[command(name = "vortex", version, about = "Rough-path pipeline for the stochastic vorticity equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the driving path from the config seed and write a rough-path store.
    Enhance {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the smallness gate; exits 3 when it fails.
    Gate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        rough_path: PathBuf,
        /// Directory for gate.json and eta.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the transformed equation and write the trajectory store.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        rough_path: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run even if the smallness gate fails.
        #[arg(long)]
        force: bool,
    },
    /// Check a stored trajectory; exits 5 when a check fails.
    Verify {
        /// Supplies the noise model and verifier settings.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        rough_path: PathBuf,
        #[arg(long)]
        phis: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Refinement sweep along one axis, written as CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// partition, solver-mesh or grid.
        #[arg(long)]
        axis: String,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the stages listed in the config and write a run manifest.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
    },
}

fn threads() -> Result<Option<usize>> {
    match std::env::var("VORTEX_THREADS") {
        Ok(v) => match v.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(vec![format!("VORTEX_THREADS = `{v}` must be a positive integer")])),
        },
        Err(_) => Ok(None),
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Enhance { config, out } => {
            let cfg = RunConfig::load(&config)?;
            write_store(&cfg.sample_rough_path()?, &out)?;
            println!("rough path written to {}", out.display());
        }
        Command::Gate { config, rough_path, out } => {
            let cfg = RunConfig::load(&config)?;
            let (eta, gate) = evaluate_gate(&cfg, &cfg.noise_model()?, &cfg.initial_datum()?, &read_store(&rough_path)?)?;
            write_gate(&out, &eta, &gate)?;
            println!("eta_sup = {:e}, |U0|_3/2 = {:e}, product = {:e}, C* = {:e}", gate.eta_sup, gate.u0_norm, gate.product, gate.c_star);
            if !gate.pass {
                return Err(Error::GateFailed { product: gate.product, c_star: gate.c_star });
            }
        }
        Command::Simulate { config, rough_path, out, force } => {
            let cfg = RunConfig::load(&config)?;
            let (noise, u0, rp) = (cfg.noise_model()?, cfg.initial_datum()?, read_store(&rough_path)?);
            let (eta, gate) = evaluate_gate(&cfg, &noise, &u0, &rp)?;
            write_gate(&out, &eta, &gate)?;
            let gamma = PathGamma::new(noise, rp.path().clone())?;
            let opts = SolveOptions { force: force || cfg.force, nonlinearity: cfg.nonlinearity };
            let traj = picard_solve(&cfg.solver, &u0, &gamma, Some(&gate), opts)?;
            write_trajectory(&traj, &out.join("trajectory"))?;
            write_diagnostics(&out, &traj)?;
            println!("converged in {} iterations, |y|_Zp = {:e}, forced = {}", traj.iterations, traj.zp_norm, traj.forced);
        }
        Command::Verify { config, traj, rough_path, phis, out } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(n) = phis {
                cfg.verifier.phis = n;
            }
            let report = run_verification(&read_trajectory(&traj)?, &cfg.noise_model()?, &read_store(&rough_path)?, &cfg.verifier)?;
            report.write(&out)?;
            for c in &report.checks {
                println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
            }
            if !report.pass {
                return Err(Error::VerificationFailed(report.failures()));
            }
        }
        Command::Sweep { config, axis, levels, out } => {
            let cfg = RunConfig::load(&config)?;
            let axis: SweepAxis = axis.parse()?;
            let table = sweep(&cfg, axis, levels.unwrap_or(cfg.sweep.levels))?;
            table.write_csv(&out)?;
            for (c, f) in table.columns.iter().zip(&table.fits) {
                match f {
                    Some(f) => println!("{c}: slope {:.3}, fit residual {:.3}", f.slope, f.residual),
                    None => println!("{c}: no rate"),
                }
            }
        }
        Command::Pipeline { config } => {
            let cfg = RunConfig::load(&config)?;
            let m = harness::run_pipeline(&cfg)?;
            for s in &m.stages {
                println!("{} {:.2}s {} artifacts", s.stage, s.seconds, s.artifacts.len());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = threads().and_then(|t| match t {
        Some(n) => harness::with_threads(n, || run(cli.command))?,
        None => run(cli.command),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
