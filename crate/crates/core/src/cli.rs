//! The `larc` command line: `run`, `verify`, `export`.
//!
//! Exit codes: 0 success, 1 runtime or criterion failure, 2 usage or
//! configuration error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::dsl::{self, ScenarioConfig};
use crate::stats::{self, EnsembleStats, SCHEMA_VERSION};
use crate::verify::{self, VerifyOptions, CRITERIA};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "larc", version, about = "Monte Carlo simulation of larc-triggered state reduction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an ensemble from a .larc file.
    Run(RunArgs),
    /// Run the built-in acceptance checks.
    Verify(VerifyArgs),
    /// Turn run results into a long-format CSV for plotting.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario file.
    pub file: PathBuf,
    /// Base seed; overrides the file's `seed`.
    #[arg(long, env = "LARC_SEED")]
    pub seed: Option<u64>,
    /// Trajectory count; overrides the file's `N`.
    #[arg(short = 'N', long = "trajectories")]
    pub trajectories: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    /// Replace a file value, e.g. `--override P_t=0.02`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Run one point per listed value, e.g. `--sweep m1=5,25,100`.
    /// Repeated sweeps are zipped and must have equal lengths.
    #[arg(long = "sweep", value_name = "KEY=V1,V2,...")]
    pub sweeps: Vec<String>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Smaller ensembles with widened tolerances.
    #[arg(long)]
    pub quick: bool,
    /// List criteria without running them.
    #[arg(long)]
    pub list: bool,
    /// Run only the named criteria. Repeatable.
    #[arg(long = "only", value_name = "ID")]
    pub only: Vec<String>,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Directory written by `larc run`.
    pub dir: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub config_path: String,
    /// Canonical text of the scenario actually run.
    pub config: String,
    pub overrides: Vec<String>,
    pub seed: u64,
    #[serde(rename = "N")]
    pub trajectories: u64,
    pub jobs: usize,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

/// Parses arguments and runs the command, returning the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Verify(args) => cmd_verify(&args),
        Command::Export(args) => cmd_export(&args),
    }
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn report(self) -> i32 {
        match self {
            Failure::Usage(m) => {
                eprintln!("error: {m}");
                EXIT_USAGE
            }
            Failure::Runtime(m) => {
                eprintln!("error: {m}");
                EXIT_FAILURE
            }
        }
    }
}

/// Writes `bytes` to `path` through a temporary file and a rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let tmp = path.with_extension("tmp");
    let io = |e: std::io::Error| Failure::Runtime(format!("{}: {e}", path.display()));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

/// Override lists for every sweep point; one empty list without sweeps.
fn sweep_points(sweeps: &[String]) -> Result<Vec<Vec<(String, String)>>, Failure> {
    if sweeps.is_empty() {
        return Ok(vec![Vec::new()]);
    }
    let mut columns = Vec::new();
    for s in sweeps {
        let (key, values) = dsl::parse_override(s).map_err(|e| Failure::Usage(format!("--sweep: {e}")))?;
        let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
        if values.iter().any(String::is_empty) {
            return Err(Failure::Usage(format!("--sweep {key}: empty value")));
        }
        columns.push((key, values));
    }
    let len = columns[0].1.len();
    if columns.iter().any(|(_, v)| v.len() != len) {
        return Err(Failure::Usage("--sweep lists must have equal lengths".into()));
    }
    Ok((0..len).map(|i| columns.iter().map(|(k, v)| (k.clone(), v[i].clone())).collect()).collect())
}

fn cmd_run(args: &RunArgs) -> i32 {
    match run(args) {
        Ok(()) => EXIT_OK,
        Err(f) => f.report(),
    }
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let bytes = fs::read(&args.file).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", args.file.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|_| {
        let e = dsl::parse_bytes(&bytes).expect_err("invalid UTF-8");
        Failure::Usage(format!("{}: {e}", args.file.display()))
    })?;
    let mut overrides = Vec::new();
    for o in &args.overrides {
        overrides.push(dsl::parse_override(o).map_err(|e| Failure::Usage(format!("--override: {e}")))?);
    }
    let points = sweep_points(&args.sweeps)?;
    let jobs = args.jobs.unwrap_or_else(default_jobs);
    if jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }

    let mut configs = Vec::new();
    for point in &points {
        let mut all = overrides.clone();
        all.extend(point.iter().cloned());
        let config = dsl::parse_with_overrides(text, &all).map_err(|e| Failure::Usage(format!("{}: {e}", args.file.display())))?;
        configs.push((all, config));
    }

    for (index, (applied, config)) in configs.iter().enumerate() {
        let dir = if args.sweeps.is_empty() {
            args.out.clone()
        } else {
            args.out.join(format!("point-{index:03}"))
        };
        run_point(args, &dir, applied, config, jobs)?;
    }
    Ok(())
}

fn run_point(args: &RunArgs, dir: &Path, applied: &[(String, String)], config: &ScenarioConfig, jobs: usize) -> Result<(), Failure> {
    let start = Instant::now();
    let seed = args.seed.unwrap_or(config.seed);
    let trajectories = args.trajectories.unwrap_or(config.trajectories);
    if trajectories == 0 {
        return Err(Failure::Usage("-N must be at least 1".into()));
    }
    let scenario = config.scenario().map_err(|e| Failure::Usage(e.to_string()))?;
    let (records, summary) = stats::run_ensemble(&scenario, seed, trajectories, jobs).map_err(|e| Failure::Runtime(e.to_string()))?;

    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    let stats_path = dir.join("stats.json");
    let csv_path = dir.join("trajectories.csv");
    let manifest_path = dir.join("manifest.json");
    write_atomic(&stats_path, stats::to_json(&summary).as_bytes())?;
    let mut csv = Vec::new();
    stats::write_trajectories_csv(&records, &mut csv).map_err(|e| Failure::Runtime(e.to_string()))?;
    write_atomic(&csv_path, &csv)?;

    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        config_path: args.file.display().to_string(),
        config: dsl::serialize(config),
        overrides: applied.iter().map(|(k, v)| format!("{k}={v}")).collect(),
        seed,
        trajectories,
        jobs,
        outputs: [&stats_path, &csv_path].iter().map(|p| p.display().to_string()).collect(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Runtime(e.to_string()))?;
    text.push('\n');
    write_atomic(&manifest_path, text.as_bytes())?;
    println!(
        "{}: N={} x1={} x2={} unresolved={}",
        dir.display(),
        trajectories,
        summary.counts.x1,
        summary.counts.x2,
        summary.counts.unresolved
    );
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> i32 {
    if args.list {
        for c in CRITERIA {
            println!("{:<24} {}", c.id, c.description);
        }
        return EXIT_OK;
    }
    for id in &args.only {
        if !CRITERIA.iter().any(|c| c.id == id) {
            eprintln!("error: unknown criterion `{id}`; see `larc verify --list`");
            return EXIT_USAGE;
        }
    }
    let options = VerifyOptions {
        quick: args.quick,
        jobs: args.jobs.unwrap_or_else(default_jobs).max(1),
    };
    let mut failed = Vec::new();
    println!("{:<24} {:<6} {:>10}  detail", "criterion", "result", "seconds");
    for c in CRITERIA {
        if !args.only.is_empty() && !args.only.iter().any(|id| id == c.id) {
            continue;
        }
        let r = verify::run_criterion(c.id, &options).expect("listed criterion");
        println!("{:<24} {:<6} {:>10.3}  {}", r.id, if r.pass { "PASS" } else { "FAIL" }, r.elapsed.as_secs_f64(), r.detail);
        if !r.pass {
            failed.push(r.id);
        }
    }
    if failed.is_empty() {
        EXIT_OK
    } else {
        eprintln!("failed: {}", failed.join(", "));
        EXIT_FAILURE
    }
}

/// `stats.json` files under `dir`: its own, then `point-*` in name order.
fn stats_files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let own = dir.join("stats.json");
    if own.is_file() {
        out.push(own);
    }
    if let Ok(entries) = fs::read_dir(dir) {
        let mut points: Vec<PathBuf> = entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("point-")))
            .map(|p| p.join("stats.json"))
            .filter(|p| p.is_file())
            .collect();
        points.sort();
        out.extend(points);
    }
    out
}

fn export_rows(stats: &EnsembleStats, out: &mut csv::Writer<Vec<u8>>) -> csv::Result<()> {
    let f = |x: f64| format!("{x:?}");
    let r = &stats.resolved_x1;
    out.write_record(["born_x1".into(), f(stats.born_weight_x1), f(r.estimate), f(r.ci_lo), f(r.ci_hi)])?;
    let u = &stats.freq_unresolved;
    out.write_record(["unresolved".into(), f(stats.prediction.p_unresolved), f(u.estimate), f(u.ci_lo), f(u.ci_hi)])?;
    if let Some(w) = &stats.first_reduction {
        let hi = w.rate_ci_hi.map_or_else(String::new, f);
        out.write_record(["abc_rate".into(), stats.larcs.to_string(), f(w.rate_estimate), f(w.rate_ci_lo), hi])?;
    }
    Ok(())
}

fn cmd_export(args: &ExportArgs) -> i32 {
    let files = stats_files(&args.dir);
    if files.is_empty() {
        eprintln!("error: no stats.json under {}", args.dir.display());
        return EXIT_USAGE;
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = w.write_record(["criterion", "x", "y", "ci_lo", "ci_hi"]);
    if let Err(e) = header {
        return Failure::Runtime(e.to_string()).report();
    }
    for path in files {
        let parsed = fs::read_to_string(&path)
            .map_err(|e| e.to_string())
            .and_then(|t| serde_json::from_str::<EnsembleStats>(&t).map_err(|e| e.to_string()));
        let stats = match parsed {
            Ok(s) => s,
            Err(e) => return Failure::Runtime(format!("{}: {e}", path.display())).report(),
        };
        if let Err(e) = export_rows(&stats, &mut w) {
            return Failure::Runtime(e.to_string()).report();
        }
    }
    let bytes = match w.into_inner() {
        Ok(b) => b,
        Err(e) => return Failure::Runtime(e.to_string()).report(),
    };
    match &args.out {
        Some(path) => match write_atomic(path, &bytes) {
            Ok(()) => EXIT_OK,
            Err(f) => f.report(),
        },
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(&bytes) {
                Ok(()) => EXIT_OK,
                Err(e) => Failure::Runtime(e.to_string()).report(),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweeps_zip_into_points() {
        let points = sweep_points(&["m1=1,2".into(), "m2=3,4".into()]).ok().unwrap();
        assert_eq!(points.len(), 2);
        assert_eq!(points[1], vec![("m1".into(), "2".into()), ("m2".into(), "4".into())]);
        assert!(sweep_points(&["m1=1,2".into(), "m2=3".into()]).is_err());
        assert!(sweep_points(&["m1=1,,2".into()]).is_err());
        assert!(sweep_points(&["nope=1".into()]).is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(main_with_args(["larc", "frobnicate"]), EXIT_USAGE);
        assert_eq!(main_with_args(["larc", "run", "/definitely/not/here.larc"]), EXIT_USAGE);
        assert_eq!(main_with_args(["larc", "verify", "--only", "nope"]), EXIT_USAGE);
        assert_eq!(main_with_args(["larc", "verify", "--list"]), EXIT_OK);
    }
}
