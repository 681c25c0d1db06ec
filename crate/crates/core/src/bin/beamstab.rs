use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use beamstab::harness::{self, HarnessError, Scenario, SweepAxis};

#[derive(Parser)]
#[command(name = "beamstab", version, about = "Boundary feedback stabilisation lab for geometrically exact beams")]
struct Cli {
    /// Scenario file, or one of the presets straight-toy, straight-steel, helical.
    #[arg(long, global = true, default_value = "straight-toy")]
    scenario: String,
    /// Output directory.
    #[arg(long, global = true, env = "BEAMSTAB_OUT", default_value = "beamstab-out")]
    out: PathBuf,
    /// Dot-path override applied after loading, e.g. `sim.cells=256`. Repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads for sweeps and pose reconstruction.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and verify the Lyapunov certificate.
    Certify,
    /// Run the closed-loop simulation.
    Simulate,
    /// Simulate, then reconstruct positions and rotations.
    Reconstruct,
    /// Repeat certify (and simulate) over one parameter.
    Sweep {
        /// mu1, mu2, amplitude or cells; defaults to the scenario's [sweep].
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Write all derived matrices and the reference table.
    DumpMatrices,
    /// Print the resolved scenario as TOML.
    Show,
}

fn load(cli: &Cli) -> Result<Scenario, HarnessError> {
    let mut assignments = cli.overrides.clone();
    if let Command::Sweep { axis, values } = &cli.command {
        if let Some(a) = axis {
            let axis: SweepAxis = a.parse()?;
            assignments.push(format!("sweep.axis={}", toml::Value::try_from(axis).expect("axis serialises")));
        }
        if let Some(v) = values {
            let list: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
            assignments.push(format!("sweep.values=[{}]", list.join(",")));
        }
    }
    Scenario::load(&cli.scenario)?.with_overrides(&assignments)
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    let scn = load(cli)?;
    let workers = cli.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    match &cli.command {
        Command::Show => print!("{}", scn.to_toml()),
        Command::Certify => {
            let out = harness::run_certify(&scn, &cli.out);
            if let Ok(o) = &out {
                let c = &o.certificate;
                println!("C_kappa = {:.6e}, C_q{} = {:.6e}, phi(l) = {:.6}", c.c_kappa, c.bound.index(), c.c, c.phi.phi_l);
                println!("certificate valid, heuristic decay rate {:.6e}", o.decay.alpha);
            }
            out?;
        }
        Command::Simulate => {
            let o = harness::run_simulate(&scn, &cli.out)?;
            println!("{} steps, dt = {:.6e}", o.trajectory.steps, o.trajectory.dt);
            print_fits(&o.fits);
        }
        Command::Reconstruct => {
            let o = harness::run_reconstruct(&scn, &cli.out)?;
            print_fits(&o.simulation.fits);
            println!("quaternion norm defect {:.3e}, round-trip error {:.3e}", o.pose.norm_defect, o.transform_error);
            if let Some(f) = o.observable_fit {
                println!("observable ~ {:.6e} exp(-{:.6e} t)", f.eta, f.alpha);
            }
        }
        Command::Sweep { .. } => {
            let rows = harness::run_sweep(&scn, &cli.out, workers)?;
            for r in &rows {
                match &r.error {
                    None => println!(
                        "{:<12.6e} C_kappa {:.6e}  valid {}  alpha {:.6e}",
                        r.value, r.c_kappa, r.certificate_valid, r.alpha
                    ),
                    Some(e) => println!("{:<12.6e} failed: {e}", r.value),
                }
            }
            if scn.sweep.as_ref().is_some_and(|s| s.axis == SweepAxis::Amplitude) {
                match rows.iter().find(|r| r.failed()) {
                    Some(r) => println!("first failing amplitude {:.6e}", r.value),
                    None => println!("no failing amplitude in range"),
                }
            }
        }
        Command::DumpMatrices => harness::run_dump_matrices(&scn, &cli.out)?,
    }
    Ok(())
}

fn print_fits(fits: &[(&str, Option<beamstab::solver::fit::DecayFit>)]) {
    for (name, fit) in fits {
        match fit {
            Some(f) => println!("{name}: alpha = {:.6e}, R^2 = {:.6}", f.alpha, f.r_squared),
            None => println!("{name}: no fit"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
