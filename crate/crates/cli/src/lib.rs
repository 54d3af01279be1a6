//! Config-driven runner for the reduction pipelines.
//!
//! Every run reads a TOML config (or the manifest of an earlier run), writes
//! its CSV/JSON outputs into the output directory and finishes with an
//! atomically written `manifest.json` echoing the resolved config.

pub mod config;
pub mod error;
pub mod output;
pub mod pipelines;
pub mod report;

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub use config::{RunConfig, Subcommand};
pub use error::CliError;
use output::{now_unix, write_json, RunManifest, MANIFEST};

pub const DEFAULT_OUT: &str = "out";

#[derive(Clone, Debug)]
pub struct Invocation {
    pub subcommand: Subcommand,
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Fill in everything a re-run needs to reproduce this one.
pub fn resolve(mut cfg: RunConfig, inv: &Invocation, path: &Path) -> Result<RunConfig, CliError> {
    if let Some(s) = cfg.subcommand {
        if s != inv.subcommand {
            return Err(CliError::ConfigInvalid {
                path: path.to_owned(),
                key: format!("`subcommand` is {s}, invoked as {}", inv.subcommand),
            });
        }
    }
    cfg.subcommand = Some(inv.subcommand);
    if let Some(seed) = inv.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &inv.out {
        cfg.output_dir = Some(out.clone());
    }
    cfg.output_dir.get_or_insert_with(|| PathBuf::from(DEFAULT_OUT));
    if let Some(lc) = cfg.lattice.as_mut() {
        let default = lc.side == 2 && lc.field != config::FieldInit::Zero;
        lc.cross_check.get_or_insert(default);
    }
    Ok(cfg)
}

pub fn config_hash(cfg: &RunConfig) -> String {
    Sha256::digest(cfg.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Run one invocation and return the process exit code.
pub fn execute(inv: &Invocation) -> Result<i32, CliError> {
    if inv.subcommand == Subcommand::Report {
        return run_report(inv);
    }
    let path = inv.config.clone().ok_or_else(|| CliError::ConfigInvalid {
        path: PathBuf::new(),
        key: "--config is required".into(),
    })?;
    let cfg = resolve(RunConfig::load(&path)?, inv, &path)?;
    let out = cfg.output_dir.clone().expect("resolved");
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let started = now_unix();
    let result = pipelines::run(inv.subcommand, &cfg, &path, &out);
    let mut manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: config_hash(&cfg),
        config: cfg,
        started_unix: started,
        finished_unix: 0.0,
        checks: Vec::new(),
        outputs: Vec::new(),
        index_map: None,
        exit_status: 0,
        message: None,
    };
    let code = match &result {
        Ok(o) => {
            manifest.checks = o.checks.clone();
            manifest.outputs = o.outputs.clone();
            manifest.index_map = o.index_map.clone();
            if o.converged {
                0
            } else {
                manifest.message = Some("solver did not converge".into());
                2
            }
        }
        Err(e) => {
            manifest.message = Some(e.to_string());
            e.exit_code()
        }
    };
    manifest.exit_status = code;
    manifest.finished_unix = now_unix();
    write_json(&out, MANIFEST, &manifest)?;
    result?;
    Ok(code)
}

fn run_report(inv: &Invocation) -> Result<i32, CliError> {
    let overrides = match &inv.config {
        Some(p) => Some(RunConfig::load(p)?),
        None => None,
    };
    let dir = inv
        .out
        .clone()
        .or_else(|| overrides.as_ref().and_then(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let rep = report::report_invariants(&dir, overrides.as_ref().map(|c| &c.tolerances))?;
    print!("{}", rep.table());
    Ok(0)
}
