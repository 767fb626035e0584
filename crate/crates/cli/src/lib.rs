//! Command-line front end: runs presets and scenario files, the oracle
//! suite, and the static balance solve.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use nalgebra::DVector;
use pendusim_core::control::solve_equilibrium_qm;
use pendusim_core::sim::{self, Preset, Scenario};
use pendusim_core::Error;

pub mod svg;
pub mod verify;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_MISMATCH: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "pendusim",
    version,
    about = "Suspended platform with moving masses: simulation and control"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a preset or scenario file and write trajectory.csv and report.json.
    Run(RunArgs),
    /// Check the dynamics and control invariants at random states.
    Verify(Common),
    /// Solve the mover position that balances the arm.
    Equilibrium(EquilibriumArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Built-in experiment, e.g. fig6_proposed.
    #[arg(long, conflicts_with = "scenario")]
    pub preset: Option<String>,
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Also write one SVG per signal group.
    #[arg(long)]
    pub svg: bool,
    /// Seed for the random verification states.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Step size override in seconds.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Duration override in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
    /// Run every preset, each into its own subdirectory of --out.
    #[arg(long, conflicts_with_all = ["preset", "scenario"])]
    pub all_presets: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EquilibriumArgs {
    #[command(flatten)]
    pub common: Common,
    /// Store the solved q_m_star back into the --scenario file.
    #[arg(long, requires = "scenario")]
    pub write: bool,
}

/// A failed command with the exit code it maps to.
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidScenario(_)
            | Error::InvalidModel(_)
            | Error::InvalidBody(_)
            | Error::UnsupportedPreset(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => EXIT_CONFIG,
            _ => EXIT_FAILURE,
        };
        Self::new(code, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::new(EXIT_CONFIG, e.to_string())
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with<I, S>(args: I) -> u8
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn execute(command: &Command) -> Result<u8, Failure> {
    match command {
        Command::Run(args) if args.all_presets => {
            let mut worst = EXIT_OK;
            for p in Preset::ALL {
                let mut common = args.common.clone();
                common.out = args.common.out.join(p.name());
                common.preset = Some(p.name().to_string());
                worst = worst.max(cmd_run(&common)?);
            }
            Ok(worst)
        }
        Command::Run(args) => cmd_run(&args.common),
        Command::Verify(common) => cmd_verify(common),
        Command::Equilibrium(args) => cmd_equilibrium(args),
    }
}

/// The scenario named on the command line with step and duration overrides applied.
pub fn load_scenario(common: &Common) -> Result<(Scenario, Option<Preset>), Failure> {
    let (mut sc, preset) = match (&common.preset, &common.scenario) {
        (Some(name), None) => {
            let p: Preset = name.parse()?;
            (p.scenario(), Some(p))
        }
        (None, Some(path)) => {
            let sc = Scenario::load(path).map_err(|e| Failure::new(EXIT_CONFIG, format!("{}: {e}", path.display())))?;
            (sc, None)
        }
        (None, None) => (Preset::Fig6Proposed.scenario(), Some(Preset::Fig6Proposed)),
        (Some(_), Some(_)) => return Err(Failure::new(EXIT_CONFIG, "--preset and --scenario are exclusive")),
    };
    if let Some(dt) = common.dt {
        sc.dt = dt;
    }
    if let Some(d) = common.duration {
        sc.duration = d;
    }
    Ok((sc, preset))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::new(EXIT_CONFIG, format!("{}: {e}", path.display())))
}

pub fn cmd_run(common: &Common) -> Result<u8, Failure> {
    let (sc, preset) = load_scenario(common)?;
    let resolved = sc.resolve()?;
    fs::create_dir_all(&common.out).map_err(|e| Failure::new(EXIT_CONFIG, format!("{}: {e}", common.out.display())))?;
    info!("running {} for {} s at dt = {}", sc.name, sc.duration, sc.dt);
    let out = sim::run_resolved(&resolved)?;

    let mut csv = Vec::new();
    out.trajectory.write_csv(&mut csv)?;
    write_file(&common.out.join("trajectory.csv"), &csv)?;
    write_file(&common.out.join("report.json"), out.report.to_json()?.as_bytes())?;
    write_file(&common.out.join("scenario.json"), sc.to_json()?.as_bytes())?;
    if common.svg {
        for (file, doc) in svg::figure(&out.trajectory, &resolved.controller.setpoint) {
            write_file(&common.out.join(file), doc.as_bytes())?;
        }
    }

    println!("{}: {}", sc.name, common.out.display());
    for (name, s) in &out.report.signals {
        println!(
            "  {name:<6} {:<13} amplitude {:.3e}",
            s.classification.to_string(),
            s.amplitude
        );
    }
    if let Some(e) = &out.report.escape {
        println!("  escape: {e}");
    }
    let Some(p) = preset else {
        return Ok(EXIT_OK);
    };
    let expect = p.expectation(&out.report);
    for (what, ok) in &expect.checks {
        println!("  [{}] {what}", if *ok { "ok" } else { "MISMATCH" });
    }
    Ok(if expect.met() { EXIT_OK } else { EXIT_MISMATCH })
}

pub fn cmd_verify(common: &Common) -> Result<u8, Failure> {
    let (sc, _) = load_scenario(common)?;
    let resolved = sc.resolve()?;
    let rows = verify::suite(&resolved.model, &resolved.controller.setpoint.q_r_des, common.seed)?;
    print!("{}", verify::table(&rows));
    match rows.iter().find(|r| !r.pass) {
        None => Ok(EXIT_OK),
        Some(r) => Err(Failure::new(EXIT_FAILURE, format!("property {} failed", r.name))),
    }
}

pub fn cmd_equilibrium(args: &EquilibriumArgs) -> Result<u8, Failure> {
    let (mut sc, _) = load_scenario(&args.common)?;
    let model = sc.model.build()?;
    let q_r = match &sc.setpoint.q_r_des {
        Some(v) if v.len() == model.link_count() => DVector::from_column_slice(v),
        Some(v) => {
            return Err(Failure::new(
                EXIT_CONFIG,
                format!("q_r_des has {} entries for {} links", v.len(), model.link_count()),
            ))
        }
        None => DVector::zeros(model.link_count()),
    };
    match solve_equilibrium_qm(&model, &q_r) {
        Ok(eq) => {
            println!("q_m_star = [{:.12}, {:.12}]", eq.q_m.x, eq.q_m.y);
            println!("residual = {:.3e} after {} iterations", eq.residual, eq.iterations);
            if args.write {
                if let Some(path) = &args.common.scenario {
                    sc.setpoint.q_m_star = Some([eq.q_m.x, eq.q_m.y]);
                    write_file(path, sc.to_json()?.as_bytes())?;
                    println!("wrote q_m_star to {}", path.display());
                }
            }
            Ok(EXIT_OK)
        }
        Err(Error::NoConvergence { iterations, residual }) => Err(Failure::new(
            EXIT_FAILURE,
            format!(
                "no balancing mover position within +-{} m: residual {residual:.3e} after {iterations} iterations",
                model.movers.travel_limit
            ),
        )),
        Err(e) => Err(e.into()),
    }
}
