//! Plain solves: one value field per `ε`, exported as CSV, with the cheap
//! invariants (exact initial slice, comparison band) checked on the way.

use rayon::prelude::*;
use serde_json::json;

use super::{fast_torus, num, Check, Report, Table};
use crate::config::{RunConfig, SolverName};
use crate::error::Result;
use crate::geometry::{Extent, PerforatedDomain, Rect, SpaceTimeLattice};
use crate::solvers::{comparison_band, solve_tilde_ueps, solve_ueps, solve_weps, SolveSpec, ValueField};

struct Solved {
    eps: f64,
    csv: Vec<u8>,
    /// `max |u(·,0) − g|`.
    initial: f64,
    /// Largest excursion outside `[g − ct, g + c₁t]`.
    band: f64,
    admissible: usize,
}

pub fn solve_experiment(cfg: &RunConfig) -> Result<Report> {
    let e = &cfg.experiment;
    let g = cfg.initial_data();
    let mut times = vec![0.0];
    times.extend(e.times.iter().copied());
    let solved: Vec<Solved> = e
        .epsilons
        .par_iter()
        .map(|&eps| -> Result<Solved> {
            let dom = cfg.domain.at(eps)?;
            let dom = match e.solver {
                SolverName::TildeUeps => PerforatedDomain::hole_free(),
                SolverName::Ueps => dom.with_defects(crate::geometry::DefectSpec::None),
                SolverName::Weps => dom,
            };
            let model = cfg.build_model(&dom)?;
            let lat = if dom.defects.is_none() && cfg.grid.bbox.is_none() {
                fast_torus(cfg, &dom, &model)?
            } else {
                let bbox = cfg.grid.bbox_rect().unwrap_or(Rect::cells([-2, -2], [2, 2]));
                SpaceTimeLattice::build(&dom, cfg.grid.h, Extent::Box(bbox), cfg.grid.dt(), model.m0())?
            };
            let spec = SolveSpec::new(eps, e.horizon).with_snapshots(&times);
            let u = match e.solver {
                SolverName::Ueps => solve_ueps(&lat, &model, &g, &spec)?,
                SolverName::TildeUeps => solve_tilde_ueps(&lat, &model, &g, &spec)?,
                SolverName::Weps => solve_weps(&lat, &model, &g, &spec)?,
            };
            let (c, c1) = comparison_band(&model, &lat, &g);
            let (initial, band) = invariants(&u, &times, c, c1);
            let mut csv = Vec::new();
            u.write_csv(&mut csv)?;
            Ok(Solved { eps, csv, initial, band, admissible: lat.admissible_count() })
        })
        .collect::<Result<_>>()?;

    let mut rep = Report::new("solve");
    let mut t = Table::new("solve", &["epsilon", "file", "admissible_nodes", "initial_error", "band_excess"]);
    let (mut initial, mut band) = (0.0f64, 0.0f64);
    for (i, s) in solved.into_iter().enumerate() {
        let file = format!("values_eps{i}.csv");
        t.push(vec![num(s.eps), file.clone(), s.admissible.to_string(), num(s.initial), num(s.band)]);
        initial = initial.max(s.initial);
        band = band.max(s.band);
        rep.files.push((file, s.csv));
    }
    rep.tables.push(t);
    rep.summary.insert("solver".into(), json!(format!("{:?}", e.solver)));
    rep.summary.insert("times".into(), json!(times));
    rep.checks.push(Check::new("initial_exact", initial == 0.0, format!("max |u(.,0) - g| = {initial:e}")));
    rep.checks.push(Check::new("comparison_band", band <= 1e-12, format!("largest excursion {band:e}")));
    Ok(rep)
}

fn invariants(u: &ValueField, times: &[f64], c: f64, c1: f64) -> (f64, f64) {
    let g = *u.initial_data();
    let lat = u.lattice();
    let (mut initial, mut band) = (0.0f64, 0.0f64);
    for &t in times {
        let s = u.slice(t).expect("kept");
        for z in (0..lat.len()).filter(|&z| lat.is_admissible(z)) {
            let gz = g.eval(u.position(z));
            if t == 0.0 {
                initial = initial.max((s[z] - gz).abs());
            }
            band = band.max(gz - c * t - s[z]).max(s[z] - gz - c1 * t);
        }
    }
    (initial, band)
}
