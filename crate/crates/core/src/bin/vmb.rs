use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vmb_core::harness::config::parse_eps_list;
use vmb_core::harness::{parse_with_overrides, run, Mode, Overrides};

#[derive(Parser)]
#[command(name = "vmb", version, about = "Two-species VMB / NSFM+Ohm solver harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Transport coefficients with refinement and isotropy checks
    Coeffs(Common),
    /// Kinetic runs for each ε in the config
    SimulateKinetic(Common),
    /// Single fluid run
    SimulateFluid(Common),
    /// ε sweep against the fluid limit
    Converge(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// comma-separated list, e.g. 0.5,0.25
    #[arg(long, value_parser = eps_arg)]
    eps: Option<EpsList>,
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
}

#[derive(Clone)]
struct EpsList(Vec<f64>);

fn eps_arg(s: &str) -> Result<EpsList, String> {
    parse_eps_list(s).map(EpsList)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, c) = match cli.cmd {
        Cmd::Coeffs(c) => (Mode::Coeffs, c),
        Cmd::SimulateKinetic(c) => (Mode::SimulateKinetic, c),
        Cmd::SimulateFluid(c) => (Mode::SimulateFluid, c),
        Cmd::Converge(c) => (Mode::Converge, c),
    };
    let text = match &c.config {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", p.display());
                return ExitCode::from(2);
            }
        },
        None => String::new(),
    };
    let ov = Overrides {
        mode: Some(mode),
        out: c.out,
        eps: c.eps.map(|e| e.0),
        modes: c.modes,
        order: c.order,
        dt: c.dt,
        t_end: c.t_end,
    };
    let resolved = match parse_with_overrides(&text, &ov) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for f in &resolved.defaulted {
        eprintln!("note: {f} not set, using default");
    }
    match run(&resolved) {
        Ok(o) => {
            println!("{}", serde_json::to_string_pretty(&o.summary).unwrap_or_default());
            if o.passed {
                println!("PASS");
                ExitCode::SUCCESS
            } else {
                println!("FAIL (see {}/summary.json)", resolved.config.out.display());
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
