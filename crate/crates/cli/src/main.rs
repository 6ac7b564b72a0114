use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use chrono::{DateTime, TimeDelta, Utc};
use clap::{Parser, Subcommand};
use consent_core::bench::{run_scenario, Scenario};
use consent_core::monitor::{self, Clock};
use consent_core::script::{parse_script, Interpreter, RunReport};
use consent_core::{authorized_region, ConsentRecord, TimeStep};

#[derive(Parser)]
#[command(
    name = "consent",
    version,
    about = "Check data collection and access against a consent history"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a consent script and report every assume.
    Run {
        script: PathBuf,
        /// Also write the full report as JSON.
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
    },
    /// Scan consent and access logs for unauthorized events.
    Monitor {
        manifest: PathBuf,
        consent_log: PathBuf,
        access_log: PathBuf,
        /// Instant at which step T1 begins (RFC 3339). Defaults to midnight UTC
        /// of the earliest record.
        #[arg(long)]
        epoch: Option<DateTime<Utc>>,
        #[arg(long, env = "CONSENT_STEP_DURATION", default_value = "1d")]
        step_duration: String,
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
    },
    /// Time one of the simulation scenarios and write a CSV series.
    Simulate {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 365)]
        steps: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw the region of (collection, access) steps a consent authorizes.
    Explain {
        script: PathBuf,
        #[arg(long)]
        consent: String,
        #[arg(long, default_value_t = 8)]
        horizon: u32,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn run_script(path: &Path) -> Result<Interpreter> {
    let text = read(path)?;
    let program = parse_script(&text).map_err(|e| anyhow!("{}:{e}", path.display()))?;
    let mut interp = Interpreter::new();
    interp
        .run(&program)
        .map_err(|e| anyhow!("{}:{e}", path.display()))?;
    Ok(interp)
}

fn render_run(report: &RunReport) -> String {
    let mut out = String::new();
    for a in &report.assumes {
        let status = if a.passed { "PASS" } else { "FAIL" };
        let _ = write!(out, "{status} line {}: {}", a.line, a.statement);
        if !a.passed {
            let _ = write!(out, " (got {}, {})", a.actual, a.reason);
        }
        out.push('\n');
    }
    let _ = writeln!(
        out,
        "{}/{} assumes passed, {} events ({} denied), final step {}",
        report.summary.assumes_passed,
        report.summary.assumes,
        report.summary.events,
        report.summary.events_denied,
        report.final_step
    );
    out
}

fn cmd_run(script: &Path, json: Option<&Path>) -> Result<ExitCode> {
    let report = run_script(script)?.report();
    print!("{}", render_run(&report));
    if let Some(path) = json {
        write(path, &serde_json::to_string_pretty(&report)?)?;
    }
    Ok(if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_monitor(
    manifest: &Path,
    consent_log: &Path,
    access_log: &Path,
    epoch: Option<DateTime<Utc>>,
    step_duration: &str,
    json: Option<&Path>,
) -> Result<ExitCode> {
    let step = humantime::parse_duration(step_duration)
        .map_err(|e| anyhow!("invalid --step-duration `{step_duration}`: {e}"))?;
    let step = TimeDelta::from_std(step).context("--step-duration is too large")?;
    let manifest = monitor::parse_manifest(&read(manifest)?)?;
    let consents = monitor::parse_consent_log(&read(consent_log)?)?;
    let accesses = monitor::parse_access_log(&read(access_log)?)?;
    let epoch = epoch
        .or_else(|| monitor::default_epoch(&consents, &accesses))
        .unwrap_or(DateTime::UNIX_EPOCH);
    let clock = Clock::new(epoch, step)?;
    let report = monitor::scan(&manifest, &consents, &accesses, &clock)?;
    print!("{}", report.render_text());
    if let Some(path) = json {
        write(path, &serde_json::to_string_pretty(&report)?)?;
    }
    Ok(if report.clean {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_simulate(scenario: &str, steps: u32, seed: u64, out: Option<&Path>) -> Result<ExitCode> {
    let scenario: Scenario = scenario.parse()?;
    let series = run_scenario(scenario, steps, seed)?;
    let csv = series.to_csv();
    match out {
        Some(path) => {
            write(path, &csv)?;
            eprintln!(
                "{scenario}: {steps} steps x {} reps, median {:.3} us, max {:.3} us",
                series.repetitions(),
                series.median(1, steps).as_nanos() as f64 / 1000.0,
                series.max().as_nanos() as f64 / 1000.0
            );
        }
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn render_region(consent: &ConsentRecord, horizon: TimeStep, names: (&str, &str, &str)) -> String {
    let w = consent.window;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "consent {} on {} {} {}",
        consent.label, names.0, names.1, names.2
    );
    let flag = |retro: bool| {
        if retro {
            "retroactive"
        } else {
            "non-retroactive"
        }
    };
    let _ = write!(
        out,
        "granted {} ({})",
        w.granted_at,
        flag(w.grant_retroactive)
    );
    match w.withdrawal {
        Some(wd) => {
            let _ = writeln!(out, ", withdrawn {} ({})", wd.at, flag(wd.retroactive));
        }
        None => out.push_str(", not withdrawn\n"),
    }
    let region = authorized_region(&w, horizon);
    let n = horizon.index();
    let width = n.to_string().len() + 1;
    let _ = writeln!(
        out,
        "rows: access step, columns: collection step; # authorized, . denied, - not applicable"
    );
    let _ = write!(out, "{:>w$} ", "", w = width + 1);
    for t_c in 1..=n {
        let _ = write!(out, "{t_c:>width$}");
    }
    out.push('\n');
    for t_a in TimeStep::FIRST.through(horizon) {
        let _ = write!(out, "{:>w$} ", t_a.to_string(), w = width + 1);
        for t_c in TimeStep::FIRST.through(horizon) {
            let cell = if t_c > t_a {
                '-'
            } else if region.contains(&(t_c, t_a)) {
                '#'
            } else {
                '.'
            };
            let _ = write!(out, "{cell:>width$}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "{} authorized cells", region.len());
    out
}

fn cmd_explain(script: &Path, consent: &str, horizon: u32) -> Result<ExitCode> {
    let horizon = TimeStep::new(horizon).map_err(|_| anyhow!("--horizon must be at least 1"))?;
    let interp = run_script(script)?;
    let label = if consent.starts_with(':') {
        consent.to_owned()
    } else {
        format!(":{consent}")
    };
    let ledger = interp.ledger();
    let Some(record) = ledger.consent_by_label(&label) else {
        bail!("{}: no consent labelled `{label}`", script.display());
    };
    let g = ledger.ontology();
    let names = (
        g.name(record.data),
        record.subject.as_str(),
        g.name(record.recipient),
    );
    print!("{}", render_region(record, horizon, names));
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { script, json } => cmd_run(script, json.as_deref()),
        Command::Monitor {
            manifest,
            consent_log,
            access_log,
            epoch,
            step_duration,
            json,
        } => cmd_monitor(
            manifest,
            consent_log,
            access_log,
            *epoch,
            step_duration,
            json.as_deref(),
        ),
        Command::Simulate {
            scenario,
            steps,
            seed,
            out,
        } => cmd_simulate(scenario, *steps, *seed, out.as_deref()),
        Command::Explain {
            script,
            consent,
            horizon,
        } => cmd_explain(script, consent, *horizon),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
