use std::path::Path;

use serde::Serialize;

use crate::config::Tolerances;
use crate::error::CliError;
use crate::output::{write_json, Check, RunManifest};

#[derive(Clone, Debug, Serialize)]
pub struct InvariantReport {
    pub subcommand: String,
    pub exit_status: i32,
    pub rows: Vec<Check>,
    pub flagged: usize,
}

impl InvariantReport {
    pub fn all_green(&self) -> bool {
        self.flagged == 0
    }

    pub fn table(&self) -> String {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(4).max(4);
        let mut s = format!("{:<width$}  {:>12}  {:>10}  status\n", "check", "value", "tolerance");
        for r in &self.rows {
            let status = if r.passed { "ok" } else { "FLAGGED" };
            s += &format!("{:<width$}  {:>12.3e}  {:>10.1e}  {status}\n", r.name, r.value, r.tolerance);
        }
        s += &format!("{} of {} checks flagged\n", self.flagged, self.rows.len());
        s
    }
}

/// Re-evaluate the checks of a finished run, optionally against new tolerances.
pub fn report_invariants(dir: &Path, tolerances: Option<&Tolerances>) -> Result<InvariantReport, CliError> {
    let manifest = RunManifest::read(dir)?;
    let tol = tolerances.unwrap_or(&manifest.config.tolerances);
    let rows: Vec<Check> = manifest
        .checks
        .iter()
        .map(|c| {
            let t = tol.get(&c.class).unwrap_or(c.tolerance);
            Check::below(&c.name, &c.class, c.value, t)
        })
        .collect();
    let flagged = rows.iter().filter(|r| !r.passed).count();
    let report = InvariantReport {
        subcommand: manifest.config.subcommand.map_or_else(String::new, |s| s.to_string()),
        exit_status: manifest.exit_status,
        rows,
        flagged,
    };
    write_json(dir, "report.json", &report)?;
    Ok(report)
}
