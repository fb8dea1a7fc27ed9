//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::engine::RecordMode;
use crate::ensemble::{simulate, EnsembleConfig, EnsembleRun};
use crate::error::{Error, Result};
use crate::feedback::{bloch_vector, FeedbackPolicy};
use crate::obr::{read_obr_file, replay_filter, write_obr_file};
use crate::output::{fmt_float, write_stats_csv, write_sweep_csv};
use crate::presets::{angle_grid, preset, sweep_angles, Preset, PresetName};
use crate::validate;

#[derive(Debug, Parser)]
#[command(name = "qfilter", version, about = "Quantum filtering from full and one-bit measurement records")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a preset ensemble and write its statistics as CSV.
    Run(RunArgs),
    /// Final fidelity as a function of the rotate-to-axis offset angle.
    SweepAngle(SweepArgs),
    /// Re-run the filter offline from a stored one-bit record.
    Replay(ReplayArgs),
    /// Run the built-in invariant checks.
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RecordArg {
    Full,
    #[value(name = "one-bit")]
    OneBit,
}

impl From<RecordArg> for RecordMode {
    fn from(r: RecordArg) -> Self {
        match r {
            RecordArg::Full => RecordMode::Full,
            RecordArg::OneBit => RecordMode::OneBit,
        }
    }
}

#[derive(Debug, Args)]
struct Overrides {
    /// Number of trajectories [default: 500]
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    trajectories: Option<u64>,
    /// Integration steps per free-precession cycle
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    steps_per_cycle: Option<u64>,
    /// Simulated duration in cycles
    #[arg(long)]
    cycles: Option<f64>,
    /// Base seed of the per-trajectory random streams
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run only this record mode
    #[arg(long)]
    record: Option<RecordArg>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, value_parser = parse_preset)]
    preset: PresetName,
    #[command(flatten)]
    overrides: Overrides,
    /// Output CSV; with several record modes `_full` / `_one-bit` is appended to the stem
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write each trajectory's one-bit record to this directory
    #[arg(long)]
    dump_records: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Preset supplying the model and run length
    #[arg(long, value_parser = parse_preset, default_value = "fig2-inset")]
    preset: PresetName,
    #[arg(long, default_value_t = 0.0)]
    from: f64,
    #[arg(long, default_value_t = 90.0)]
    to: f64,
    #[arg(long, default_value_t = 5.0)]
    step: f64,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    /// OBR1 record file
    input: PathBuf,
    /// Preset supplying the model and feedback policy
    #[arg(long, value_parser = parse_preset)]
    preset: PresetName,
    /// Offset angle (degrees) for rotate-to-axis presets
    #[arg(long)]
    angle: Option<f64>,
    /// Write `step,time,purity_filter` rows to this CSV
    #[arg(long)]
    out: Option<PathBuf>,
    /// Steps between CSV rows
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    stride: u64,
}

fn parse_preset(s: &str) -> std::result::Result<PresetName, String> {
    s.parse().map_err(|e: Error| {
        let names: Vec<_> = PresetName::ALL.iter().map(|p| p.as_str()).collect();
        format!("{e}; expected one of {}", names.join(", "))
    })
}

fn apply_overrides(cfg: &mut EnsembleConfig, o: &Overrides) {
    if let Some(n) = o.trajectories {
        cfg.n_trajectories = n as usize;
    }
    if let Some(spc) = o.steps_per_cycle {
        cfg.steps_per_cycle = spc;
        let (out, corr) = crate::ensemble::default_strides(spc);
        cfg.output_stride = out;
        cfg.corr_stride = corr;
    }
    if let Some(c) = o.cycles {
        cfg.cycles = c;
    }
    cfg.base_seed = o.seed;
}

fn configured(name: PresetName, o: &Overrides) -> Preset {
    let mut p = preset(name);
    apply_overrides(&mut p.config, o);
    if let Some(r) = o.record {
        p.modes = vec![r.into()];
    }
    p
}

/// `dir/stem_suffix.ext`
fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_{suffix}.{ext}"),
        None => format!("{stem}_{suffix}"),
    };
    path.with_file_name(name)
}

fn summary(run: &EnsembleRun) -> String {
    let s = &run.stats;
    let (f, e) = s.final_fidelity();
    format!(
        "{} trajectories, n_unstable {}, final fidelity {:.4} ± {:.4}",
        s.n_trajectories, s.n_unstable, f, e
    )
}

fn dump_records(run: &EnsembleRun, dir: &Path) -> Result<usize> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut n = 0;
    for t in &run.traces {
        if let Some(r) = &t.record {
            write_obr_file(r, dir.join(format!("traj_{:05}.obr", t.index)))?;
            n += 1;
        }
    }
    Ok(n)
}

fn run_sweep(p: &Preset, angles: &[f64], out: &Path) -> Result<()> {
    let mode = p.modes[0];
    let rows = sweep_angles(&p.config_for(mode), angles)?;
    write_sweep_csv(&rows, out)?;
    for r in &rows {
        println!(
            "angle {:>6.2}: final fidelity {} ± {} (n_unstable {})",
            r.angle_deg,
            fmt_float(r.mean_final_fidelity),
            fmt_float(r.sem_final_fidelity),
            r.n_unstable
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let p = configured(args.preset, &args.overrides);
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}.csv", p.name)));
    if let Some(angles) = &p.angles {
        return run_sweep(&p, angles, &out);
    }
    let several = p.modes.len() > 1;
    for &mode in &p.modes {
        let mut cfg = p.config_for(mode);
        cfg.capture_records = args.dump_records.is_some();
        let run = simulate(&cfg)?;
        let path = if several { with_suffix(&out, mode.name()) } else { out.clone() };
        write_stats_csv(&run.stats, &path)?;
        println!("{} [{}]: {} -> {}", p.name, mode.name(), summary(&run), path.display());
        if let Some(dir) = &args.dump_records {
            let dir = if several { dir.join(mode.name()) } else { dir.clone() };
            let n = dump_records(&run, &dir)?;
            println!("  {n} records -> {}", dir.display());
        }
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let mut p = configured(args.preset, &args.overrides);
    if args.overrides.record.is_none() {
        p.modes = vec![RecordMode::OneBit];
    }
    if p.config.model.dim() != 2 {
        return Err(Error::Config(format!("preset {} is not a single-qubit preset", p.name)));
    }
    let angles = angle_grid(args.from, args.to, args.step)?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("sweep-angle.csv"));
    run_sweep(&p, &angles, &out)
}

fn cmd_replay(args: &ReplayArgs) -> Result<()> {
    let p = preset(args.preset);
    let mut policy = p.config.policy;
    if let Some(a) = args.angle {
        if !matches!(policy, FeedbackPolicy::RotateToAxis { .. }) {
            return Err(Error::Config(format!("preset {} has no offset angle", p.name)));
        }
        policy = FeedbackPolicy::rotate_to_axis(a)?;
    }
    let record = read_obr_file(&args.input)?;
    let dt = record.dt();
    let mut rows: Vec<(u64, f64)> = Vec::new();
    let filter = replay_filter(&p.config.model, &policy, &record, |step, rho| {
        if step % args.stride == 0 || step == record.n_steps() {
            rows.push((step, rho.purity()));
        }
    })?;
    if let Some(out) = &args.out {
        let file = fs::File::create(out).map_err(|e| Error::io(out, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(out, e);
        writeln!(w, "step,time,purity_filter").map_err(io)?;
        for (step, purity) in &rows {
            writeln!(w, "{step},{},{}", fmt_float(*step as f64 * dt), fmt_float(*purity)).map_err(io)?;
        }
        w.flush().map_err(io)?;
    }
    let rho = filter.state();
    print!(
        "replayed {} steps ({} channels): final filter purity {:.9}",
        record.n_steps(),
        record.n_channels(),
        rho.purity()
    );
    if rho.dim() == 2 {
        let r = bloch_vector(rho);
        print!(", Bloch ({:.6}, {:.6}, {:.6})", r[0], r[1], r[2]);
    }
    println!();
    Ok(())
}

fn cmd_validate() -> Result<bool> {
    let results = validate::run_all();
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    Ok(results.iter().all(|r| r.passed))
}

fn describe(e: &Error) -> String {
    match e {
        Error::EnsembleFailure { n_trajectories } => {
            format!("ensemble failure: n_unstable {n_trajectories} of {n_trajectories}, every trajectory diverged")
        }
        other => other.to_string(),
    }
}

/// Parses `argv` (including the program name) and runs the command.
/// Returns the process exit code: 0 on success, 2 on usage errors and 1 on
/// run failures.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match &cli.command {
        Command::Run(a) => cmd_run(a).map(|_| true),
        Command::SweepAngle(a) => cmd_sweep(a).map(|_| true),
        Command::Replay(a) => cmd_replay(a).map(|_| true),
        Command::Validate => cmd_validate(),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {}", describe(&e));
            2
        }
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            1
        }
    }
}
