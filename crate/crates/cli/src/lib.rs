//! The `powerctl` command-line workbench: argument parsing, commands and run reports.

pub mod args;
pub mod commands;
pub mod error;
pub mod plot;
pub mod report;

use std::time::Instant;

use args::Cli;
use commands::{argument_digest, write_artifacts, Context};
use error::{CliError, CliResult};
use report::RunReport;
use serde_json::Value;

/// Runs one invocation and returns its report. Errors after the scenario has been
/// read still produce a report; the exit code is `report.exit_code`.
pub fn execute(cli: &Cli, argv: Vec<String>) -> RunReport {
    let start = Instant::now();
    let ctx = Context::load(&cli.common);
    let (digest, seed) = match &ctx {
        Ok(c) => (c.input_digest.clone().or_else(|| argument_digest(&cli.command)), c.seed()),
        Err(_) => (None, cli.common.seed.unwrap_or(0)),
    };
    let outcome = ctx.and_then(|c| commands::run(&cli.command, &c));
    let mut report = RunReport {
        schema_version: report::REPORT_SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name().to_string(),
        argv,
        input_digest: digest,
        seed,
        status: String::new(),
        exit_code: 0,
        error: None,
        results: Value::Null,
        artifacts: Vec::new(),
        wall_time_s: 0.0,
    };
    let written = outcome.and_then(|o| {
        if let Some(dir) = &cli.common.out {
            write_artifacts(dir, &o.artifacts)?;
            report.artifacts = o.artifacts.iter().map(|a| a.name.clone()).collect();
        }
        Ok(o)
    });
    match written {
        Ok(o) => {
            report.status = serde_json::to_value(o.status)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            report.exit_code = o.status.exit_code();
            report.results = o.results;
        }
        Err(e) => {
            report.status = e.status().to_string();
            report.exit_code = e.exit_code();
            report.error = Some(e.to_string());
        }
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    report
}

/// Writes `report.json` into `--out` if given, otherwise prints it to stdout.
pub fn emit(cli: &Cli, report: &RunReport) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(report).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    match &cli.common.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.clone(), source })?;
            let path = dir.join("report.json");
            std::fs::write(&path, text).map_err(|source| CliError::Write { path, source })
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
