//! Command-line driver: loads a scenario, runs a suite, writes CSV and JSON.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use solchart::error::Error;
use solchart::harness::{
    chart_experiment, demo_conditions, flow_run, run_suite, ChartRow, Report, Scenario, MAX_SEED,
};

#[derive(Parser, Debug)]
#[command(
    name = "solchart",
    version,
    about = "Verification suites for solution-manifold charts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (.toml or .json); the built-in s5 scenario when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    scenario: Option<PathBuf>,
    /// Output directory; falls back to `output.dir`, then `out`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Dotted scenario override such as `region.eps=0.4`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print only errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// The full verification suite.
    Check,
    /// Chart round trips on the probe set.
    Chart,
    /// Integrate the system and export the trajectory.
    Flow,
    /// Demonstrations for the s5 system.
    Demo5,
    /// Everything above.
    All,
}

/// Failures that map to exit code 2.
#[derive(Debug)]
struct ConfigError(String);

fn config(e: impl std::fmt::Display) -> ConfigError {
    ConfigError(e.to_string())
}

/// Errors that come from the scenario rather than from the checks.
fn is_config(e: &Error) -> bool {
    matches!(
        e,
        Error::Scenario(_)
            | Error::InvalidGrid(_)
            | Error::InvalidParameter(_)
            | Error::Transversal(_)
            | Error::Io(_)
    )
}

fn load(cli: &Cli) -> Result<Scenario, ConfigError> {
    let mut overrides = cli.set.clone();
    if let Some(seed) = cli.seed {
        if seed > MAX_SEED {
            return Err(ConfigError(format!("--seed must be at most {MAX_SEED}")));
        }
        overrides.push(format!("seed={seed}"));
    }
    match &cli.scenario {
        Some(path) => {
            if !path.is_file() {
                return Err(ConfigError(format!(
                    "scenario file {} not found",
                    path.display()
                )));
            }
            Scenario::load(path, &overrides).map_err(config)
        }
        None => Scenario::parse(&Scenario::s5().to_toml(), false, &overrides).map_err(config),
    }
}

/// Files to write and reports to summarize, gathered before anything touches the disk.
struct Outputs {
    files: Vec<(String, String)>,
    reports: Vec<Report>,
    notes: Vec<String>,
}

fn run(cmd: Command, sc: &Scenario) -> Result<Outputs, (ConfigError, bool)> {
    let mut out = Outputs {
        files: vec![("scenario.toml".into(), sc.to_toml())],
        reports: Vec::new(),
        notes: Vec::new(),
    };
    let fail = |e: Error| (config(&e), is_config(&e));
    let all = cmd == Command::All;
    if cmd == Command::Check || all {
        let r = run_suite(sc).map_err(fail)?;
        out.files.push(("report.json".into(), r.to_json()));
        out.files.push(("report.csv".into(), r.to_csv()));
        out.reports.push(r);
    }
    if cmd == Command::Chart || all {
        let (rows, r) = chart_experiment(sc).map_err(fail)?;
        out.files.push(("chart.csv".into(), ChartRow::csv(&rows)));
        out.files.push(("chart_report.json".into(), r.to_json()));
        out.reports.push(r);
    }
    if cmd == Command::Flow || all {
        let (tr, rfde, r) = flow_run(sc).map_err(fail)?;
        out.files
            .push(("flow.csv".into(), tr.to_csv(&rfde).map_err(fail)?));
        out.files.push(("flow_report.json".into(), r.to_json()));
        out.reports.push(r);
    }
    if cmd == Command::Demo5 || (all && sc.is_s5() && !sc.system.zero_feedback) {
        let d = demo_conditions(sc).map_err(fail)?;
        out.files.push(("demo5.csv".into(), d.growth_csv()));
        out.files
            .push(("demo5_report.json".into(), d.report.to_json()));
        out.reports.push(d.report);
    } else if all {
        out.notes
            .push("demo5 skipped: it needs the s5 system".into());
    }
    Ok(out)
}

fn write(dir: &Path, files: &[(String, String)]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, body) in files {
        fs::write(dir.join(name), body)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let sc = match load(&cli) {
        Ok(sc) => sc,
        Err(ConfigError(m)) => {
            eprintln!("error: {m}");
            return ExitCode::from(2);
        }
    };
    let outputs = match run(cli.command, &sc) {
        Ok(o) => o,
        Err((ConfigError(m), cfg)) => {
            eprintln!("error: {m}");
            return ExitCode::from(if cfg { 2 } else { 1 });
        }
    };
    let dir = cli.out.clone().unwrap_or_else(|| {
        if sc.output.dir.is_empty() {
            PathBuf::from("out")
        } else {
            PathBuf::from(&sc.output.dir)
        }
    });
    if let Err(e) = write(&dir, &outputs.files) {
        eprintln!("error: cannot write to {}: {e}", dir.display());
        return ExitCode::from(2);
    }
    let mut ok = true;
    for r in &outputs.reports {
        ok &= r.ok();
        let s = r.summary();
        if !cli.quiet {
            for l in r.lines() {
                println!("{l}");
            }
            for n in &r.notes {
                println!("note     {n}");
            }
            println!(
                "{}: {}/{} checks passed, {}/{} negative controls detected",
                r.suite, s.passed, s.checks, s.controls_detected, s.negative_controls
            );
        }
        for u in r.unexpected() {
            let what = if u.negative_control {
                "negative control not detected"
            } else {
                "check failed"
            };
            eprintln!(
                "{what}: {}/{} measured {:e} bound {:e}",
                u.family, u.name, u.measured, u.bound
            );
        }
    }
    if !cli.quiet {
        for n in &outputs.notes {
            println!("note     {n}");
        }
        println!("outputs in {}", dir.display());
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
