//! Experiment runner: configuration, verification suites and reports.

pub mod config;
pub mod error;
pub mod report;
pub mod suites;

use std::path::Path;

use rayon::prelude::*;

pub use config::{ExperimentConfig, Suite};
pub use error::CliError;
pub use report::{emit_report, Report};
pub use suites::{run_suite, SuiteRun, Verdict};

use suites::Artifact;

pub struct ExperimentOutcome {
    pub runs: Vec<SuiteRun>,
    pub report: Report,
    /// Hash of the written `report.json`.
    pub report_sha256: String,
}

impl ExperimentOutcome {
    /// 0 when every suite passed, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        if self.report.all_passed {
            0
        } else {
            1
        }
    }
}

/// Runs `suites` (the configured list when empty) on a pool of `workers`
/// threads and writes CSVs, `config.json` and `report.json` under `out`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    suites: &[Suite],
    out: &Path,
    workers: usize,
) -> Result<ExperimentOutcome, CliError> {
    let mut cfg = cfg.clone();
    if !suites.is_empty() {
        cfg.suites = suites.to_vec();
    }
    cfg.validate()?;
    let cfg = &cfg;
    let selected = cfg.suites.clone();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Precondition(format!("cannot start worker pool: {e}")))?;
    let runs: Vec<SuiteRun> = pool.install(|| selected.par_iter().map(|s| run_suite(cfg, *s)).collect());

    let config = Artifact { path: "config.json".into(), contents: serde_json::to_string_pretty(cfg)? + "\n" };
    let report = emit_report(&cfg.name, cfg.seed, &runs, std::slice::from_ref(&config))?;
    for a in runs.iter().flat_map(|r| r.artifacts.iter()).chain(std::iter::once(&config)) {
        report::write_file(out, &a.path, &a.contents)?;
    }
    let json = report.to_json()?;
    report::write_file(out, "report.json", &json)?;
    Ok(ExperimentOutcome { runs, report_sha256: report::sha256_hex(json.as_bytes()), report })
}
