use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde::Serialize;

use hj_envelope::commands::{self, selftest_config, Check, Command, Context};
use hj_envelope::{CliError, CliResult, RunConfig};

/// Finite-dimensional Hamilton-Jacobi solves, adjoint envelope measures and
/// their diagnostics.
#[derive(Debug, Parser)]
#[command(name = "hj-envelope", version)]
struct Args {
    command: Command,
    /// TOML run configuration; `selftest` uses a built-in one when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; overrides the configuration.
    #[arg(long)]
    jobs: Option<usize>,
    /// Seed of sampled probes; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Serialize)]
struct Summary<'a> {
    command: &'a str,
    config: String,
    seed: u64,
    commit: &'a str,
    files: Vec<&'a str>,
    checks: &'a [Check],
    pass: bool,
}

fn load(args: &Args) -> CliResult<RunConfig> {
    let mut cfg = match (&args.config, args.command) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Command::Selftest) => selftest_config(args.seed.unwrap_or(0))?,
        (None, _) => {
            return Err(CliError::Config(hj_envelope::ConfigError {
                file: PathBuf::from("<command line>"),
                line: None,
                key: "--config".into(),
                message: format!("`{}` needs a configuration file", args.command.name()),
            }))
        }
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
        cfg.hopf.seed = s;
    }
    if let Some(j) = args.jobs {
        if j == 0 {
            return Err(CliError::Config(hj_envelope::ConfigError {
                file: PathBuf::from("<command line>"),
                line: None,
                key: "--jobs".into(),
                message: "must be at least 1".into(),
            }));
        }
        cfg.jobs = Some(j);
    }
    Ok(cfg)
}

fn write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn execute(args: &Args) -> CliResult<bool> {
    let cfg = load(args)?;
    if let Some(j) = cfg.jobs {
        // Only fails if a pool already exists, which keeps its size.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global();
    }
    let ctx = Context::default();
    let start = Instant::now();
    let report = commands::run(args.command, &cfg, &ctx)?;
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    for a in &report.artifacts {
        write(&args.out.join(&a.name), &a.bytes)?;
    }
    let summary = Summary {
        command: args.command.name(),
        config: cfg
            .file
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        seed: cfg.seed,
        commit: &ctx.commit,
        files: report.artifacts.iter().map(|a| a.name.as_str()).collect(),
        checks: &report.checks,
        pass: report.pass(),
    };
    let mut json = serde_json::to_vec_pretty(&summary)?;
    json.push(b'\n');
    write(&args.out.join("summary.json"), &json)?;
    for c in report.checks.iter().filter(|c| !c.pass) {
        eprintln!("FAIL {}: {:e} > {:e}", c.name, c.value, c.tolerance);
    }
    eprintln!(
        "{}: {} checks, {} failed, {:.1?}",
        args.command.name(),
        report.checks.len(),
        report.checks.iter().filter(|c| !c.pass).count(),
        start.elapsed()
    );
    Ok(report.pass())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("hj-envelope: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
