//! The `effective` run: `L̄` samples and `H̄` by every route at each `p`.

use serde_json::json;

use super::{num, Check, Report, Table};
use crate::config::RunConfig;
use crate::effective::{
    effective_hamiltonian_cell, infsup_upper_bound, CellSettings, EffectiveTable, LbarTable, Resolution,
};
use crate::error::Result;
use crate::geometry::PerforatedDomain;

pub fn effective_experiment(cfg: &RunConfig) -> Result<Report> {
    let e = &cfg.experiment;
    let dom = cfg.domain.at(e.epsilons.first().copied().unwrap_or(1.0))?;
    let model = cfg.build_model(&dom)?;
    let lbar = LbarTable::compute(&dom, &model, Resolution::new(cfg.grid.metric_h), e.v_radius, e.v_grid, &e.k_list)?;
    let mut settings = CellSettings::new(cfg.grid.cell_h, e.lambda_list.clone());
    settings.dt = cfg.grid.cell_dt();
    let free = PerforatedDomain::hole_free();
    let model_free = cfg.build_model(&free)?;

    let mut out = EffectiveTable { k_list: e.k_list.clone(), lambda_list: e.lambda_list.clone(), rows: Vec::new() };
    for (v, l, r) in lbar.samples() {
        out.push("Lbar", v, l, r);
    }
    let tol = e.tol;
    let k0 = model.k0();
    let (mut agree, mut envelope, mut monotone, mut cert) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut per_p = Vec::new();
    for &p in &e.p_list {
        let (metric, v_star) = lbar.legendre(p);
        let idx = lbar.samples().position(|s| s.0 == v_star);
        let metric_res = idx.map_or(f64::NAN, |i| lbar.residuals[i]);
        let cell = effective_hamiltonian_cell(&dom, &model, p, &settings)?;
        let upper = infsup_upper_bound(&model, &cell.lattice, p, &cell.corrector)?;
        let hbar0 = effective_hamiltonian_cell(&free, &model_free, p, &settings)?.hbar;
        let (l1, f1) = cell.per_lambda[cell.per_lambda.len() - 1];
        out.push("Hbar_metric", p, metric, metric_res);
        out.push("Hbar_cell", p, cell.hbar, (cell.hbar - f1).abs());
        out.push("Hbar_infsup", p, upper, (upper - cell.hbar).max(0.0));
        let q = (p[0] * p[0] + p[1] * p[1]) / 2.0;
        agree = agree.max((metric - cell.hbar).abs());
        envelope =
            envelope.max((q - k0 - metric).max(metric - q - k0)).max((q - k0 - cell.hbar).max(cell.hbar - q - k0));
        monotone = monotone.max(metric.max(cell.hbar) - hbar0);
        cert = cert.max(cell.hbar - upper);
        per_p.push(json!({"p": p, "metric": metric, "cell": cell.hbar, "infsup": upper, "hole_free": hbar0, "smallest_lambda": l1}));
    }

    let mut t = Table::new("effective", &["kind", "component1", "component2", "value", "residual"]);
    for r in &out.rows {
        t.push(vec![r.kind.to_string(), num(r.component1), num(r.component2), num(r.value), num(r.residual)]);
    }
    let mut rep = Report::new("effective");
    rep.tables.push(t);
    rep.summary.insert("hbar".into(), json!(per_p));
    rep.summary.insert("k0".into(), json!(k0));
    rep.summary.insert("tolerance".into(), json!(tol));
    if !e.p_list.is_empty() {
        rep.checks.push(Check::new("route_agreement", agree <= tol, format!("max |metric - cell| = {agree}")));
        rep.checks.push(Check::new("envelope", envelope <= tol, format!("largest envelope excess {envelope}")));
        rep.checks.push(Check::new(
            "below_hole_free",
            monotone <= tol,
            format!("largest excess over hole-free {monotone}"),
        ));
        rep.checks.push(Check::new("certificate_above", cert <= tol, format!("largest cell - certificate {cert}")));
    }
    Ok(rep)
}
