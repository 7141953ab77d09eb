//! `‖u^ε − u‖ ≤ Cε`: sup error over a probe set against the homogenized
//! solution built from the metric-route `L̄`.

use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use super::{fast_torus, num, runtime, Check, Report, Table};
use crate::config::RunConfig;
use crate::effective::{LbarTable, Resolution};
use crate::error::{HjError, Result};
use crate::geometry::PerforatedDomain;
use crate::solvers::{hopf_lax, solve_ueps, EffectiveSource, SolveSpec, YGrid};
use crate::stats::loglog_slope;

#[derive(Clone, Debug, PartialEq)]
pub struct RateRow {
    pub epsilon: f64,
    pub sup_error: f64,
    /// Same error for the hole-free control solve (0 when not run).
    pub floor: f64,
    pub runtime: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    /// Least-squares slope/intercept of `log(sup_error − floor)` against `log ε`.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub probes: Vec<[f64; 2]>,
    pub times: Vec<f64>,
    /// `H̄(Dg)` of the homogenized problem (from the table).
    pub hbar: f64,
}

impl RateTable {
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].sup_error < w[0].sup_error)
    }

    pub fn into_report(self) -> Report {
        let mut rep = Report::new("rate");
        let mut t = Table::new("rate", &["epsilon", "sup_error", "runtime_s"]);
        for r in &self.rows {
            t.push(vec![num(r.epsilon), num(r.sup_error), num(r.runtime)]);
        }
        rep.tables.push(t);
        rep.summary.insert("slope".into(), json!(self.slope));
        rep.summary.insert("intercept".into(), json!(self.intercept));
        rep.summary.insert("floor".into(), json!(self.rows.iter().map(|r| r.floor).collect::<Vec<_>>()));
        rep.summary.insert("hbar".into(), json!(self.hbar));
        rep.summary.insert("probe_count".into(), json!(self.probes.len()));
        rep.summary.insert("times".into(), json!(self.times));
        let min_slope = 0.8;
        rep.checks.push(Check::new(
            "sup_error_decreasing",
            self.strictly_decreasing(),
            format!("{:?}", self.rows.iter().map(|r| r.sup_error).collect::<Vec<_>>()),
        ));
        rep.checks.push(Check::new(
            "slope_above_floor",
            self.slope.is_some_and(|s| s >= min_slope),
            format!("slope {:?} (need >= {min_slope})", self.slope),
        ));
        rep
    }
}

/// Sup over probes × times of `|u^ε − u|` on `dom` for each `ε`, in parallel.
fn sweep(
    cfg: &RunConfig,
    dom_at: &(dyn Fn(f64) -> Result<PerforatedDomain> + Sync),
    table: &LbarTable,
) -> Result<Vec<(f64, f64)>> {
    let e = &cfg.experiment;
    let g = cfg.initial_data();
    let step = 2.0 * table.radius / (table.n - 1) as f64;
    cfg.experiment
        .epsilons
        .par_iter()
        .map(|&eps| {
            let start = Instant::now();
            let dom = dom_at(eps)?;
            let model = cfg.build_model(&dom)?;
            let lat = fast_torus(cfg, &dom, &model)?;
            let u = solve_ueps(&lat, &model, &g, &SolveSpec::new(eps, e.horizon).with_snapshots(&e.times))?;
            let mut err = 0.0f64;
            for &t in &e.times {
                // y-grid aligned with the v-samples so Hopf–Lax reads the table at its nodes
                let grid = YGrid::new(step * t, table.radius * t)?;
                for &x in &e.probe_points() {
                    let (z, xn) = u.snap(x).ok_or_else(|| HjError::Unreachable {
                        op: "experiments::rate_experiment",
                        detail: format!("no admissible node near probe {x:?}"),
                    })?;
                    let ue = u.value_at_node(z, xn, t).expect("kept slice");
                    let hom = hopf_lax(&EffectiveSource::Table(table), &g, xn, t, &grid);
                    err = err.max((ue - hom).abs());
                }
            }
            Ok((err, runtime(cfg, start)))
        })
        .collect()
}

/// Rate sweep over `cfg.experiment.epsilons` with the hole-free control run.
pub fn rate_experiment(cfg: &RunConfig) -> Result<RateTable> {
    const OP: &str = "experiments::rate_experiment";
    let e = &cfg.experiment;
    if e.epsilons.is_empty() {
        return Err(HjError::invalid(OP, "empty epsilon list"));
    }
    if !cfg.domain.at(1.0)?.defects.is_none() {
        return Err(HjError::invalid(OP, "the rate experiment runs on the defect-free domain"));
    }
    let res = Resolution::new(cfg.grid.metric_h);
    let dom0 = cfg.domain.at(e.epsilons[0])?;
    let model0 = cfg.build_model(&dom0)?;
    let table = LbarTable::compute(&dom0, &model0, res, e.v_radius, e.v_grid, &e.k_list)?;
    let errors = sweep(cfg, &|eps| cfg.domain.at(eps), &table)?;
    let floors = if e.floor_run {
        let free = PerforatedDomain::hole_free();
        let model_f = cfg.build_model(&free)?;
        let table_f = LbarTable::compute(&free, &model_f, res, e.v_radius, e.v_grid, &e.k_list)?;
        sweep(cfg, &|_| Ok(PerforatedDomain::hole_free()), &table_f)?.into_iter().map(|(f, _)| f).collect()
    } else {
        vec![0.0; e.epsilons.len()]
    };
    let rows: Vec<RateRow> = e
        .epsilons
        .iter()
        .zip(errors)
        .zip(floors)
        .map(|((&epsilon, (sup_error, runtime)), floor)| RateRow { epsilon, sup_error, floor, runtime })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.sup_error - r.floor).collect();
    let fit = if rows.len() >= 2 { loglog_slope(&xs, &ys) } else { None };
    let hbar = table.legendre(cfg.initial_data().slope()).0;
    Ok(RateTable {
        rows,
        slope: fit.map(|f| f.slope),
        intercept: fit.map(|f| f.intercept),
        probes: e.probe_points(),
        times: e.times.clone(),
        hbar,
    })
}
