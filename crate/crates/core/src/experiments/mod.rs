//! Quantitative reproductions: the `O(ε)` rate, the dilute sandwich, the
//! defect gaps, effective tables and plain solves, plus report emission.
//!
//! Every experiment returns a [`Report`]: CSV tables, a JSON summary and a
//! list of named inequality checks. An experiment fails only through those
//! checks; fitted constants are reported, never judged.

mod defect;
mod dilute;
mod effective;
mod rate;
mod solve;

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::config::{ExperimentKind, RunConfig};
use crate::effective::{effective_hamiltonian_cell, CellSettings};
use crate::error::{HjError, Result};
use crate::geometry::{Extent, PerforatedDomain, SpaceTimeLattice};
use crate::hamiltonians::HamiltonianModel;

pub use defect::{defect_experiment, delta_quadrature, theta_quadrature};
pub use dilute::dilute_experiment;
pub use effective::effective_experiment;
pub use rate::{rate_experiment, RateRow, RateTable};
pub use solve::solve_experiment;

/// A named pass/fail inequality.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, detail: detail.into() }
    }
}

/// A CSV table with a fixed header.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    /// File stem, e.g. `rate` for `rate.csv`.
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let op = "experiments::emit_report";
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(|e| HjError::Csv { op, source: e })?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| HjError::Csv { op, source: e })?;
        }
        w.into_inner().map_err(|e| HjError::Io { op, source: e.into_error() })
    }
}

/// Tables, summary values and checks of one run.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub kind: String,
    pub tables: Vec<Table>,
    pub summary: Map<String, Value>,
    pub checks: Vec<Check>,
    /// Extra files (name, bytes), e.g. value-field exports.
    pub files: Vec<(String, Vec<u8>)>,
}

impl Report {
    pub fn new(kind: &str) -> Self {
        Self { kind: kind.into(), ..Default::default() }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// The JSON summary as written to `summary.json`.
    pub fn summary_json(&self) -> Value {
        let mut s = self.summary.clone();
        s.insert("kind".into(), json!(self.kind));
        let checks: Map<String, Value> =
            self.checks.iter().map(|c| (c.name.clone(), json!({"pass": c.pass, "detail": c.detail}))).collect();
        s.insert("checks".into(), Value::Object(checks));
        let no_data: Vec<&str> = self.tables.iter().filter(|t| t.rows.is_empty()).map(|t| t.name.as_str()).collect();
        s.insert("no_data".into(), json!(no_data));
        s.insert("pass".into(), json!(self.passed()));
        Value::Object(s)
    }
}

/// Writes one CSV per table, the extra files and `summary.json` into `out_dir`.
pub fn emit_report(report: &Report, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let op = "experiments::emit_report";
    fs::create_dir_all(out_dir).map_err(|e| HjError::Io { op, source: e })?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: &[u8]| -> Result<()> {
        let path = out_dir.join(name);
        fs::write(&path, bytes).map_err(|e| HjError::Io { op, source: e })?;
        written.push(path);
        Ok(())
    };
    for t in &report.tables {
        put(&format!("{}.csv", t.name), &t.to_csv()?)?;
    }
    for (name, bytes) in &report.files {
        put(name, bytes)?;
    }
    let mut json = serde_json::to_vec_pretty(&report.summary_json()).map_err(|e| HjError::Json { op, source: e })?;
    json.push(b'\n');
    put("summary.json", &json)?;
    Ok(written)
}

/// Runs the experiment named in `cfg`.
pub fn run_experiment(cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    match cfg.experiment.kind {
        ExperimentKind::Effective => effective_experiment(cfg),
        ExperimentKind::Solve => solve_experiment(cfg),
        ExperimentKind::Rate => Ok(rate_experiment(cfg)?.into_report()),
        ExperimentKind::Dilute => dilute_experiment(cfg),
        ExperimentKind::Defect => defect_experiment(cfg),
        ExperimentKind::Validate => crate::validation::validation_report(cfg.output.seed),
    }
}

/// Shortest decimal form, shared by every CSV column.
pub(crate) fn num(x: f64) -> String {
    x.to_string()
}

/// `H̄(p)` by the cell route with the grid settings of `cfg`.
pub(crate) fn cell_hbar(cfg: &RunConfig, dom: &PerforatedDomain, model: &HamiltonianModel, p: [f64; 2]) -> Result<f64> {
    let mut s = CellSettings::new(cfg.grid.cell_h, cfg.experiment.lambda_list.clone());
    s.dt = cfg.grid.cell_dt();
    Ok(effective_hamiltonian_cell(dom, model, p, &s)?.hbar)
}

/// Periodic fast-coordinate cell for the oscillating solvers.
pub(crate) fn fast_torus(
    cfg: &RunConfig,
    dom: &PerforatedDomain,
    model: &HamiltonianModel,
) -> Result<SpaceTimeLattice> {
    SpaceTimeLattice::build(dom, cfg.grid.h, Extent::Torus, cfg.grid.dt(), model.m0())
}

/// Wall-clock seconds when timing is on, 0 otherwise (keeps files reproducible).
pub(crate) fn runtime(cfg: &RunConfig, start: std::time::Instant) -> f64 {
    if cfg.output.timing {
        start.elapsed().as_secs_f64()
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_has_header_and_no_data_flag() {
        let mut r = Report::new("rate");
        r.tables.push(Table::new("rate", &["epsilon", "sup_error", "runtime_s"]));
        assert_eq!(r.tables[0].to_csv().unwrap(), b"epsilon,sup_error,runtime_s\n");
        assert_eq!(r.summary_json()["no_data"], json!(["rate"]));
        assert_eq!(r.summary_json()["pass"], json!(true));
    }

    #[test]
    fn emit_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = Report::new("x");
        let mut t = Table::new("t", &["a"]);
        t.push(vec![num(0.5)]);
        r.tables.push(t);
        r.checks.push(Check::new("c", false, "broken"));
        let files = emit_report(&r, dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        let s: Value = serde_json::from_slice(&fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(s["pass"], json!(false));
        assert_eq!(fs::read_to_string(dir.path().join("t.csv")).unwrap(), "a\n0.5\n");
    }
}
