//! Experiment runner: JSON configs in, traces and verification reports out.
//!
//! Exit codes: `0` every check passed, `1` configuration or solve error, `2` check violations.

pub mod catalog;
pub mod config;
pub mod experiment;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use config::ExperimentConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

/// Environment variable naming the output root; defaults to the working directory.
pub const OUTPUT_DIR_ENV: &str = "RESOLVENT_OUTPUT_DIR";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from)
}

/// Outcome of one config: exit code and a one-line summary.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub config: PathBuf,
    pub code: i32,
    pub summary: String,
}

fn run_one(path: &Path, config: &ExperimentConfig, root: &Path, negative_control: bool) -> Outcome {
    let (code, summary) = match experiment::run_experiment(config, root, negative_control) {
        Ok((report, outputs)) => {
            let failed: Vec<&str> =
                report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            if failed.is_empty() {
                (EXIT_OK, format!("ok ({} checks) -> {}", report.checks.len(), outputs.report.display()))
            } else {
                (
                    EXIT_VIOLATION,
                    format!("violations in {} -> {}", failed.join(", "), outputs.report.display()),
                )
            }
        }
        Err(e) => (EXIT_ERROR, format!("error: {e}")),
    };
    Outcome {
        config: path.to_path_buf(),
        code,
        summary: format!("{}: {summary}", config.name),
    }
}

/// Combined exit code: any error gives `1`, otherwise any violation gives `2`.
pub fn combined_code(outcomes: &[Outcome]) -> i32 {
    if outcomes.iter().any(|o| o.code == EXIT_ERROR) {
        EXIT_ERROR
    } else if outcomes.iter().any(|o| o.code == EXIT_VIOLATION) {
        EXIT_VIOLATION
    } else {
        EXIT_OK
    }
}

/// Run every config, `jobs` at a time. Configs sharing a name are rejected before any run so
/// outputs never collide.
pub fn run_batch(paths: &[PathBuf], jobs: usize, root: &Path, negative_control: bool) -> Vec<Outcome> {
    let mut loaded = Vec::with_capacity(paths.len());
    let mut outcomes = Vec::new();
    for path in paths {
        match ExperimentConfig::load(path) {
            Ok(cfg) => loaded.push((path.clone(), cfg)),
            Err(e) => outcomes.push(Outcome {
                config: path.clone(),
                code: EXIT_ERROR,
                summary: format!("error: {e}"),
            }),
        }
    }
    let mut names = std::collections::HashMap::new();
    for (path, cfg) in &loaded {
        if let Some(prev) = names.insert(cfg.name.clone(), path.clone()) {
            outcomes.push(Outcome {
                config: path.clone(),
                code: EXIT_ERROR,
                summary: format!("error: name `{}` also used by {}", cfg.name, prev.display()),
            });
        }
    }
    if !outcomes.is_empty() {
        return outcomes;
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build();
    let work = || -> Vec<Outcome> {
        loaded
            .par_iter()
            .map(|(path, cfg)| run_one(path, cfg, root, negative_control))
            .collect()
    };
    match pool {
        Ok(pool) => pool.install(work),
        Err(_) => loaded.iter().map(|(p, c)| run_one(p, c, root, negative_control)).collect(),
    }
}

/// Parse and build every config without running it.
pub fn validate(path: &Path) -> Result<String, String> {
    let cfg = ExperimentConfig::load(path).map_err(|e| e.to_string())?;
    let prepared = experiment::prepare(&cfg).map_err(|e| e.to_string())?;
    Ok(format!(
        "{}: valid (dim {}, strategy {}, {} checks)",
        cfg.name,
        prepared.scheme.dim(),
        prepared.scheme.strategy().name(),
        cfg.checks.len()
    ))
}
