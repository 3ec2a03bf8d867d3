use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dlr_core::fem::estimate_constants;
use dlr_experiments::{
    compare_projection_modes, compare_schemes, run_decay, stability_sweep, DtGrid, ExperimentConfig, ExperimentError,
    Result, Setup,
};
use serde_json::json;

#[derive(Parser)]
#[command(name = "dlr-heat", about = "Dynamical low-rank experiments on the random heat equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run until the energy norm decays, blows up, or the step budget ends.
    Decay(Common),
    /// Stability map over meshes and time steps.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Cells per side of each mesh.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        /// Absolute time steps.
        #[arg(long, value_delimiter = ',', conflicts_with = "ratio")]
        dt: Vec<f64>,
        /// Time steps as multiples of h².
        #[arg(long, value_delimiter = ',')]
        ratio: Vec<f64>,
    },
    /// Staggered scheme against projector splitting, step by step.
    CompareSchemes {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 50)]
        steps: usize,
    },
    /// Gauss–Seidel against fully explicit projection.
    CompareProjection {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [5.0, 100.0, 200.0])]
        dt: Vec<f64>,
    },
    /// Inverse-inequality, continuity and coercivity constants.
    Constants(Common),
}

fn prepare(common: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let cfg = ExperimentConfig::load(&common.config)?;
    let dir = common.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    fs::create_dir_all(&dir)?;
    Ok((cfg, dir))
}

fn write_json(dir: &Path, value: &serde_json::Value) -> Result<()> {
    let f = BufWriter::new(File::create(dir.join("report.json"))?);
    serde_json::to_writer_pretty(f, value)?;
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Decay(common) => {
            let (cfg, dir) = prepare(&common)?;
            let run = run_decay(&cfg)?;
            run.trace.write_csv(BufWriter::new(File::create(dir.join("trace.csv"))?))?;
            let last = run.trace.last().map(|r| r.energy);
            write_json(
                &dir,
                &json!({
                    "classification": run.outcome,
                    "steps": run.steps,
                    "final_energy": last,
                    "energy_monotone": run.energy_monotone(),
                    "energy_increases": run.trace.energy_increases(),
                    "worst": run.worst,
                    "fixed_point_history": run.fixed_point_history,
                    "config": cfg,
                }),
            )?;
            println!("{} after {} steps (energy {:e})", run.outcome.label(), run.steps, last.unwrap_or(f64::NAN));
        }
        Command::Sweep { common, n, dt, ratio } => {
            let (cfg, dir) = prepare(&common)?;
            let grid = match (dt.is_empty(), ratio.is_empty()) {
                (false, true) => DtGrid::Absolute(dt),
                (true, false) => DtGrid::Scaled(ratio),
                _ => return Err(ExperimentError::config("sweep", "give exactly one of --dt or --ratio")),
            };
            let report = stability_sweep(&cfg, &n, &grid)?;
            let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("sweep.csv"))?));
            w.write_record(["n_per_side", "h", "dt", "ratio", "label", "steps"])?;
            for c in &report.cells {
                let (label, steps) = match &c.result {
                    dlr_experiments::sweep::CellResult::Finished { outcome, steps } => (outcome.label(), steps.to_string()),
                    dlr_experiments::sweep::CellResult::Failed { .. } => ("failed", String::new()),
                };
                w.write_record([
                    c.n_per_side.to_string(),
                    format!("{:.16e}", c.h),
                    format!("{:.16e}", c.dt),
                    format!("{:.16e}", c.ratio),
                    label.to_string(),
                    steps,
                ])?;
            }
            w.flush()?;
            write_json(&dir, &json!({ "sweep": report, "config": cfg }))?;
            match report.k_fit {
                Some(k) => println!("K_fit = {:?}", k),
                None => println!("K_fit undefined: the smallest ratio did not decay"),
            }
        }
        Command::CompareSchemes { common, steps } => {
            let (cfg, dir) = prepare(&common)?;
            let cmp = compare_schemes(&cfg, steps)?;
            let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("comparison.csv"))?));
            w.write_record(["step", "time", "relative_difference", "energy_staggered", "energy_splitting"])?;
            for r in &cmp.rows {
                w.write_record([
                    r.step.to_string(),
                    format!("{:.16e}", r.time),
                    format!("{:.16e}", r.relative_difference),
                    format!("{:.16e}", r.energy_staggered),
                    format!("{:.16e}", r.energy_splitting),
                ])?;
            }
            w.flush()?;
            write_json(
                &dir,
                &json!({
                    "max_relative_difference": cmp.max_relative_difference(),
                    "staggered_monotone": cmp.staggered_monotone(),
                    "splitting_monotone": cmp.splitting_monotone(),
                    "max_kernel_orthogonality": cmp.max_kernel_orthogonality,
                    "config": cfg,
                }),
            )?;
            println!("max relative difference {:e}", cmp.max_relative_difference());
        }
        Command::CompareProjection { common, dt } => {
            let (cfg, dir) = prepare(&common)?;
            let runs = compare_projection_modes(&cfg, &dt)?;
            let mut summary = Vec::new();
            for r in &runs {
                let mode = serde_json::to_value(r.mode)?;
                let name = format!("trace_{}_dt{}.csv", mode.as_str().unwrap_or("mode"), r.dt);
                r.trace.write_csv(BufWriter::new(File::create(dir.join(&name))?))?;
                summary.push(json!({
                    "dt": r.dt,
                    "mode": r.mode,
                    "classification": r.outcome,
                    "steps": r.steps,
                    "monotone": r.monotone,
                    "energy_increases": r.energy_increases,
                    "trace": name,
                }));
                println!("dt={} {:?}: {} in {} steps, {} increases", r.dt, r.mode, r.outcome.label(), r.steps, r.energy_increases);
            }
            write_json(&dir, &json!({ "runs": summary, "config": cfg }))?;
        }
        Command::Constants(common) => {
            let (cfg, dir) = prepare(&common)?;
            let setup = Setup::build(&cfg)?;
            let m = &setup.model;
            let c = estimate_constants(m.space(), m.measure(), m.diffusion(), m.ops())?;
            let value = json!({ "constants": c, "config": cfg });
            println!("{}", serde_json::to_string_pretty(&value["constants"])?);
            write_json(&dir, &value)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dlr-heat: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
