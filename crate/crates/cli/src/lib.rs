//! Command-line orchestration: field generation, verification suites, flow
//! runs, energy audits, and ensemble reports.
//!
//! One declarative TOML config drives everything; flags only pick inputs
//! and outputs.  JSON reports are deterministic for a fixed config and
//! seed set, except for the top-level `generated_at_unix` stamp.

pub mod config;
pub mod error;

use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use error::CliError;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use tlab_core::director::{
    gen_equator, gen_modulated_equator, gen_pole_free, gen_random_bandlimited, DirectorField,
};
use tlab_core::energy::{dissipation_terms, energy as el_energy, VelocityField};
use tlab_core::flow::{evolve, FlowRecord, Trajectory};
use tlab_core::snapshot::{load_snapshot, save_snapshot};
use tlab_core::suite::{
    ensemble_refinement, refinement_report, run_ensemble, verify_director,
};
use tlab_core::{EstimateReport, GridMeta};

#[derive(Parser, Debug)]
#[command(
    name = "tlab",
    about = "Director fields on twisted tori: generation, verification, heat flow, energy audits",
    version
)]
pub struct Cli {
    /// Path to the TOML run configuration.
    #[arg(long, global = true, default_value = "tlab.toml")]
    pub config: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write director-field snapshots from the named generators.
    Gen(GenArgs),
    /// Run the identity/inequality suite on a snapshot.
    Verify(VerifyArgs),
    /// Integrate the heat flow from a snapshot.
    Flow(FlowArgs),
    /// Evaluate the energy-law budget for a velocity/director pair.
    Energy(EnergyArgs),
    /// Run the seeded ensemble suite (optionally with one refinement).
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[command(subcommand)]
    pub kind: GenKind,
}

#[derive(Subcommand, Debug)]
pub enum GenKind {
    /// Equator map with a half-integer winding along axis 0.
    Equator {
        #[arg(long, default_value_t = 0.5)]
        winding: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Equator map with a sinusoidal polar modulation along axis 1.
    Modulated {
        #[arg(long, default_value_t = 1.0)]
        winding: f64,
        #[arg(long, default_value_t = 0.3)]
        theta_amp: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Normalized random band-limited field for one seed.
    Random {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pole-free random ansatz field for one seed.
    Polefree {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// A batch of seeded fields, one file per seed, named
    /// `<generator>_s<seed>.tlab` under --out-dir.
    Seeds {
        /// Inclusive seed range, e.g. 1..5.
        #[arg(long)]
        range: String,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Director snapshot to verify.
    #[arg(long)]
    pub snapshot: PathBuf,
    /// Same field sampled on a refined grid; adds convergence entries.
    #[arg(long)]
    pub refined_snapshot: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FlowArgs {
    #[arg(long)]
    pub snapshot: PathBuf,
    /// Trajectory CSV output.
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for TLAB1 checkpoints (initial/periodic/final states).
    #[arg(long)]
    pub checkpoint_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EnergyArgs {
    #[arg(long)]
    pub velocity: PathBuf,
    #[arg(long)]
    pub director: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::load(&cli.config)?;
    match cli.command {
        Command::Gen(args) => cmd_gen(&cfg, args),
        Command::Verify(args) => cmd_verify(&cfg, args),
        Command::Flow(args) => cmd_flow(&cfg, args),
        Command::Energy(args) => cmd_energy(&cfg, args),
        Command::Report(args) => cmd_report(&cfg, args),
    }
}

fn load_director(path: &Path) -> Result<DirectorField, CliError> {
    let field = load_snapshot(path)?;
    DirectorField::from_base(field).map_err(CliError::from)
}

fn write_wrapped_report(
    report: &EstimateReport,
    out: Option<&Path>,
    csv: Option<&Path>,
) -> Result<(), CliError> {
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let body = serde_json::json!({
        "generated_at_unix": stamp,
        "report": report,
    });
    let text = serde_json::to_string_pretty(&body).expect("report serialization cannot fail");
    match out {
        Some(path) => fs::write(path, text)?,
        None => println!("{text}"),
    }
    if let Some(path) = csv {
        let mut f = fs::File::create(path)?;
        report.write_csv(&mut f)?;
    }
    Ok(())
}

fn cmd_gen(cfg: &RunConfig, args: GenArgs) -> Result<(), CliError> {
    let grid = cfg.grid()?;
    let ens = &cfg.ensemble;
    match args.kind {
        GenKind::Equator { winding, out } => {
            let d = gen_equator(&grid, winding)?;
            save_snapshot(&out, d.base())?;
            eprintln!("wrote {}", out.display());
        }
        GenKind::Modulated { winding, theta_amp, out } => {
            let d = gen_modulated_equator(&grid, winding, theta_amp)?;
            save_snapshot(&out, d.base())?;
            eprintln!("wrote {}", out.display());
        }
        GenKind::Random { seed, out } => {
            let d = gen_random_bandlimited(&grid, seed, ens.band, ens.amplitude)?;
            save_snapshot(&out, d.base())?;
            eprintln!("wrote {}", out.display());
        }
        GenKind::Polefree { seed, out } => {
            let d = gen_pole_free(&grid, seed, ens.band, ens.theta_amp, ens.chi_amp)?;
            save_snapshot(&out, d.base())?;
            eprintln!("wrote {}", out.display());
        }
        GenKind::Seeds { range, out_dir } => {
            let (start, end) = parse_seed_range(&range)?;
            fs::create_dir_all(&out_dir)?;
            let kind = ens.generator_kind()?;
            for seed in start..=end {
                let d = tlab_core::suite::generate(&grid, &kind, seed)?;
                let path = out_dir.join(format!("{}_s{seed}.tlab", ens.generator));
                save_snapshot(&path, d.base())?;
                eprintln!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn parse_seed_range(s: &str) -> Result<(u64, u64), CliError> {
    let parts: Vec<&str> = s.split("..").collect();
    let err = || CliError::Usage(format!("bad seed range {s:?}; expected A..B inclusive"));
    if parts.len() != 2 {
        return Err(err());
    }
    let a: u64 = parts[0].parse().map_err(|_| err())?;
    let b: u64 = parts[1].parse().map_err(|_| err())?;
    if b < a {
        return Err(err());
    }
    Ok((a, b))
}

fn cmd_verify(cfg: &RunConfig, args: VerifyArgs) -> Result<(), CliError> {
    let opts = cfg.verify_options();
    let d = load_director(&args.snapshot)?;
    let label = args
        .snapshot
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "snapshot".into());
    let mut report = verify_director(&d, &label, &opts)?;

    if let Some(refined) = &args.refined_snapshot {
        let df = load_director(refined)?;
        let fine = verify_director(&df, "refined", &opts)?;
        let conv = refinement_report(&report, &fine);
        report.absorb("refine", &conv);
    }

    write_wrapped_report(&report, args.out.as_deref(), args.csv.as_deref())?;
    if report.pass {
        Ok(())
    } else {
        let failing: Vec<&str> = report
            .entries
            .iter()
            .filter(|(_, e)| e.pass == Some(false))
            .map(|(k, _)| k.as_str())
            .collect();
        Err(CliError::Assertion(format!(
            "verification failed: {}",
            failing.join(", ")
        )))
    }
}

fn cmd_flow(cfg: &RunConfig, args: FlowArgs) -> Result<(), CliError> {
    let d0 = load_director(&args.snapshot)?;
    let grid = *d0.grid();
    let flow_cfg = cfg.flow_config(&grid);
    flow_cfg.validate(&grid)?;

    let checkpoint_every = cfg.flow.checkpoint_every;
    let mut records: Vec<FlowRecord> = Vec::new();
    let mut state = d0.clone();
    let mut failure;

    if let Some(dir) = &args.checkpoint_dir {
        fs::create_dir_all(dir)?;
        save_snapshot(dir.join("checkpoint_step0.tlab"), state.base())?;
    }

    let chunk = if checkpoint_every == 0 { flow_cfg.steps } else { checkpoint_every };
    let mut done = 0usize;
    loop {
        let remaining = flow_cfg.steps - done;
        let this = chunk.min(remaining);
        let mut sub_cfg = flow_cfg;
        sub_cfg.steps = this;
        let traj = evolve(&state, &sub_cfg)?;
        for mut r in traj.records {
            r.step += done;
            r.time = r.step as f64 * flow_cfg.dt;
            if records.last().map(|p: &FlowRecord| p.step) == Some(r.step) {
                continue;
            }
            records.push(r);
        }
        state = traj.final_state;
        failure = traj.failure;
        done += this;
        if failure.is_some() || done >= flow_cfg.steps {
            break;
        }
        if let Some(dir) = &args.checkpoint_dir {
            save_snapshot(dir.join(format!("checkpoint_step{done}.tlab")), state.base())?;
        }
    }

    if let Some(dir) = &args.checkpoint_dir {
        save_snapshot(dir.join("checkpoint_final.tlab"), state.base())?;
    }

    let traj = Trajectory {
        grid: GridMeta::from(&grid),
        dt: flow_cfg.dt,
        record_every: flow_cfg.record_every,
        records,
        initial: d0,
        final_state: state,
        failure: failure.clone(),
    };
    let mut f = fs::File::create(&args.out)?;
    traj.write_csv(&mut f)?;
    f.flush()?;

    match failure {
        None => Ok(()),
        Some(msg) => Err(CliError::Assertion(format!("flow aborted: {msg}"))),
    }
}

fn cmd_energy(cfg: &RunConfig, args: EnergyArgs) -> Result<(), CliError> {
    let v = VelocityField::from_base(load_snapshot(&args.velocity)?)?;
    let d = load_director(&args.director)?;
    let coeffs = cfg.coefficients.coefficients();
    let variant = cfg.coefficients.molecular_field()?;
    let budget = dissipation_terms(&v, &d, &coeffs, variant)?;
    let e = el_energy(&v, &d, &coeffs, cfg.charts.eps_pole)?;

    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|t| t.as_secs())
        .unwrap_or(0);
    let body = serde_json::json!({
        "generated_at_unix": stamp,
        "energy": e,
        "dissipation": budget,
    });
    let text = serde_json::to_string_pretty(&body).expect("budget serialization cannot fail");
    match &args.out {
        Some(path) => fs::write(path, text)?,
        None => println!("{text}"),
    }
    if budget.pass {
        Ok(())
    } else {
        Err(CliError::Assertion("dissipation budget failed its sign assertions".into()))
    }
}

fn cmd_report(cfg: &RunConfig, args: ReportArgs) -> Result<(), CliError> {
    let grid = cfg.grid()?;
    let kind = cfg.ensemble.generator_kind()?;
    let opts = cfg.verify_options();
    let report = if cfg.report.refine {
        let refined = grid.refined(cfg.report.refine_factor)?;
        ensemble_refinement(
            &grid,
            &refined,
            &kind,
            cfg.ensemble.seed_start,
            cfg.ensemble.seed_count,
            &opts,
        )?
    } else {
        run_ensemble(&grid, &kind, cfg.ensemble.seed_start, cfg.ensemble.seed_count, &opts)?
    };
    write_wrapped_report(&report, args.out.as_deref(), args.csv.as_deref())?;
    if report.pass {
        Ok(())
    } else {
        Err(CliError::Assertion("ensemble report failed its armed assertions".into()))
    }
}
