//! Experiment configuration, the verification experiments and their reports.

mod commands;
mod config;
mod report;

use std::fs;
use std::path::Path;

use serde::Serialize;

pub use commands::{
    build_field, cmd_constants, cmd_cylinder, cmd_field_check, cmd_grad_scan, cmd_holder, cmd_split, cylinder_t2,
    holder_cloud, scan_options, split_grids, ConstantEntry, ConstantsReport, CylinderReport, FieldReport,
    GradScanReport, HolderReport, HolderSide, HolderStats, PointCloud, ScanSummary, SplitReport,
};
pub use config::{
    odd_kernel, ConstantsConfig, CylinderConfig, ExperimentConfig, HolderConfig, ScanConfig, SplitConfig, SCHEMA,
};
pub use report::{Cell, Check, CommandOutput, Csv, Outcome, OutputFile};

use crate::error::{Error, Result};

/// Exit code for an error raised before any check could run.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Convergence { .. } => 3,
        _ => 2,
    }
}

#[derive(Serialize)]
struct CommandSummary<'a> {
    command: &'a str,
    outcome: Outcome,
    nonconverged: usize,
    failed: Vec<&'a str>,
}

/// Every experiment in sequence, plus `summary.json` over all of them.
pub fn run_all(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let parts = vec![
        cmd_field_check(cfg)?,
        cmd_grad_scan(cfg)?,
        cmd_holder(cfg, HolderSide::Interior)?,
        cmd_holder(cfg, HolderSide::Exterior)?,
        cmd_split(cfg)?,
        cmd_constants(cfg)?,
        cmd_cylinder(cfg)?,
    ];
    let summaries: Vec<CommandSummary> = parts
        .iter()
        .map(|p| CommandSummary {
            command: &p.command,
            outcome: p.outcome(),
            nonconverged: p.nonconverged,
            failed: p.failed().map(|c| c.id.as_str()).collect(),
        })
        .collect();
    let mut out = CommandOutput::new("summary");
    #[derive(Serialize)]
    struct Body<'a> {
        config: &'a ExperimentConfig,
        commands: Vec<CommandSummary<'a>>,
    }
    let body = Body {
        config: cfg,
        commands: summaries,
    };
    let mut all = CommandOutput::new("all");
    for p in &parts {
        all.checks.extend(p.checks.iter().cloned());
        all.nonconverged += p.nonconverged;
    }
    out.checks = all.checks.clone();
    out.nonconverged = all.nonconverged;
    out.push_report(&body);
    drop(body);
    for p in parts {
        all.files.extend(p.files);
    }
    all.files.extend(out.files);
    Ok(all)
}

/// Writes every produced file into `dir`, creating it if needed.
pub fn write_outputs(out: &CommandOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for f in &out.files {
        fs::write(dir.join(&f.name), &f.contents)?;
    }
    Ok(())
}
