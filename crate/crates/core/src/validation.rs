//! Invariant suites run by the `validate` experiment.
//!
//! Each suite builds a small fixture, measures one quantity and compares
//! it with a bound: either an identity (tolerance at rounding level), an
//! ordering, or a constant frozen from the default fixture. Everything but
//! the Legendre sampling is deterministic; the sampling is seeded.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::effective::{mbar_star, LbarTable, Resolution};
use crate::error::Result;
use crate::experiments::{num, Check, Report, Table};
use crate::geometry::{DefectSpec, Extent, HoleShape, PerforatedDomain, Rect, SpaceTimeLattice};
use crate::hamiltonians::HamiltonianModel;
use crate::kernel::{propagate, Propagation};
use crate::metric::{snap, MetricSolver};
use crate::solvers::{
    comparison_band, hopf_lax, solve_tilde_ueps, solve_ueps, solve_weps, ubar_from_mbar, EffectiveSource, InitialData,
    SolveSpec, YGrid,
};

/// Fixture spacing: the coarsest that resolves a disc of radius ¼.
pub const FIXTURE_H: f64 = 0.125;
/// Rounding-level tolerance for identities.
pub const IDENTITY_TOL: f64 = 1e-12;
/// Frozen bound on the sub- and superadditivity defects of `t ↦ m*(t, 0, tv)`.
pub const ADDITIVITY_BOUND: f64 = 0.5;
/// Frozen bound on `|m − m*|` over the probe pairs.
pub const ANCHOR_BOUND: f64 = 1.0;
/// Discretization allowance on top of the fit residuals for `ū` vs Hopf–Lax.
pub const UBAR_TOL: f64 = 0.05;
/// Number of seeded Legendre samples.
pub const LEGENDRE_SAMPLES: usize = 1000;

/// Outcome of one suite.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    /// Measured quantity, compared as `value ≤ bound`.
    pub value: f64,
    pub bound: f64,
    pub detail: String,
}

impl SuiteResult {
    fn new(name: &'static str, value: f64, bound: f64, detail: impl Into<String>) -> Self {
        Self { name, value, bound, detail: detail.into() }
    }

    pub fn pass(&self) -> bool {
        self.value <= self.bound
    }
}

fn disc() -> PerforatedDomain {
    PerforatedDomain::standard(HoleShape::Disc { radius: 0.25 }).expect("valid hole")
}

fn free() -> HamiltonianModel {
    HamiltonianModel::free().with_m0(3.0).expect("positive")
}

fn box_lattice(dom: &PerforatedDomain, rect: Rect) -> Result<SpaceTimeLattice> {
    SpaceTimeLattice::build(dom, FIXTURE_H, Extent::Box(rect), FIXTURE_H, 3.0)
}

/// `m(t+s, x, z) = min_y m(t, x, y) + m(s, y, z)`, and restarting the DP
/// from an intermediate slice reproduces the direct field.
pub fn dpp_identity() -> Result<SuiteResult> {
    const OP: &str = "validation::dpp_identity";
    let model = free();
    let lat = box_lattice(&disc(), Rect::cells([-2, -2], [2, 2]))?;
    let solver = MetricSolver::new(&model, &lat)?;
    let (n1, n2) = (6, 10);
    let x = snap(&lat, [0.5, 0.5], OP)?;
    let z = snap(&lat, [-1.5, 1.0], OP)?;
    let whole = solver.field(&[x], n1 + n2, &Propagation::default());
    let first = solver.field(&[x], n1, &Propagation::default());
    let restarted = propagate(solver.stencil(), first.values().to_vec(), n2, &Propagation::default());
    let mut restart_gap = 0.0f64;
    for (a, b) in whole.values().iter().zip(restarted.values()) {
        if a != b {
            restart_gap = restart_gap.max(if a.is_finite() && b.is_finite() { (a - b).abs() } else { f64::INFINITY });
        }
    }
    // even Lagrangian: the field out of z gives m(s, y, z) for every y
    let back = solver.field(&[z], n2, &Propagation::default());
    let split = first.values().iter().zip(back.values()).map(|(a, b)| a + b).fold(f64::INFINITY, f64::min);
    let split_gap = (split - whole.value(z)).abs();
    Ok(SuiteResult::new(
        "dpp_identity",
        restart_gap.max(split_gap),
        IDENTITY_TOL,
        format!("restart gap {restart_gap:e}, split gap {split_gap:e}"),
    ))
}

/// Larger holes never make `m` cheaper.
pub fn hole_monotonicity() -> Result<SuiteResult> {
    const OP: &str = "validation::hole_monotonicity";
    let model = free();
    let rect = Rect::cells([-2, -2], [2, 2]);
    let doms =
        [PerforatedDomain::hole_free(), disc(), PerforatedDomain::standard(HoleShape::Square { half_width: 0.25 })?];
    let mut fields = Vec::new();
    for d in &doms {
        let lat = box_lattice(d, rect)?;
        let solver = MetricSolver::new(&model, &lat)?;
        let x = snap(&lat, [0.5, 0.5], OP)?;
        fields.push(solver.field(&[x], 16, &Propagation::default()).values().to_vec());
    }
    let mut worst = f64::NEG_INFINITY;
    for w in fields.windows(2) {
        for (small, big) in w[0].iter().zip(&w[1]) {
            if big.is_finite() {
                worst = worst.max(small - big);
            }
        }
    }
    Ok(SuiteResult::new(
        "hole_monotonicity",
        worst,
        IDENTITY_TOL,
        format!("largest m(smaller hole) - m(larger hole) = {worst:e}"),
    ))
}

/// `ũ^ε ≤ w^ε ≤ u^ε` nodewise on a ray of missing holes.
pub fn defect_sandwich() -> Result<SuiteResult> {
    let model = HamiltonianModel::kinetic_weight(HoleShape::Disc { radius: 0.25 }, 2.0, 0.05)?.with_m0(3.0)?;
    let g = InitialData::linear([-1.0, 0.0]);
    let spec = SolveSpec::new(0.5, 1.0).with_snapshots(&[0.5, 1.0]);
    let rect = Rect::cells([-1, -1], [5, 1]);
    let with_defects = disc().with_defects(DefectSpec::LineE1);
    let lw = box_lattice(&with_defects, rect)?;
    let lu = box_lattice(&disc(), rect)?;
    let lt = box_lattice(&PerforatedDomain::hole_free(), rect)?;
    let w = solve_weps(&lw, &model, &g, &spec)?;
    let u = solve_ueps(&lu, &model, &g, &spec)?;
    let ut = solve_tilde_ueps(&lt, &model, &g, &spec)?;
    let mut worst = f64::NEG_INFINITY;
    for t in [0.5, 1.0] {
        let (sw, su, st) = (w.reduced(t).expect("kept"), u.reduced(t).expect("kept"), ut.reduced(t).expect("kept"));
        for z in 0..lw.len() {
            if lw.is_admissible(z) {
                worst = worst.max(st[z] - sw[z]);
            }
            if lu.is_admissible(z) {
                worst = worst.max(sw[z] - su[z]);
            }
        }
    }
    Ok(SuiteResult::new("defect_sandwich", worst, IDENTITY_TOL, format!("largest ordering violation {worst:e}")))
}

/// `|eval_L − legendre_oracle| ≤ oracle tolerance` on seeded samples.
pub fn legendre_duality(seed: u64) -> Result<SuiteResult> {
    let hole = HoleShape::Disc { radius: 0.25 };
    let models = [
        HamiltonianModel::free(),
        HamiltonianModel::kinetic_weight(hole, 2.0, 0.05)?,
        HamiltonianModel::kinetic_plus_potential(hole, 0.5, 0.05)?,
        HamiltonianModel::stripe_weight(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_grid = 129;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..LEGENDRE_SAMPLES {
        let m = &models[i % models.len()];
        let r = m.clamp_radius();
        let (a_min, _) = m.coefficient_range();
        // keep the maximizer p = v/a strictly inside the oracle box
        let speed = rng.gen_range(0.0..0.9 * a_min * r);
        let angle = rng.gen_range(0.0..std::f64::consts::TAU);
        let v = [speed * angle.cos(), speed * angle.sin()];
        let y = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
        let gap = (m.eval_l(y, v) - m.legendre_oracle(y, v, r, n_grid)?).abs();
        worst = worst.max(gap - m.oracle_tolerance(r, n_grid));
    }
    Ok(SuiteResult::new(
        "legendre_duality",
        worst,
        0.0,
        format!("{LEGENDRE_SAMPLES} samples, largest excess over the oracle tolerance {worst:e}"),
    ))
}

/// Under (A5): `H(y,0) = 0 = min H(y,·)` and hence `L(y,0) = 0 = min L(y,·)`.
pub fn a5_rest_is_free() -> Result<SuiteResult> {
    let hole = HoleShape::Disc { radius: 0.25 };
    let models = [
        HamiltonianModel::free(),
        HamiltonianModel::kinetic_weight(hole, 2.0, 0.05)?,
        HamiltonianModel::stripe_weight(),
    ];
    let ys: Vec<[f64; 2]> =
        (0..11).flat_map(|j| (0..11).map(move |i| [-0.5 + i as f64 / 10.0, -0.5 + j as f64 / 10.0])).collect();
    let mut worst = 0.0f64;
    for m in &models {
        let rep = m.check_a5(&ys)?;
        worst = worst.max(rep.max_abs_h0).max(rep.max_negative_min);
        for &y in &ys {
            worst = worst.max(m.eval_l(y, [0.0, 0.0]).abs());
            for j in -10..=10 {
                for i in -10..=10 {
                    worst = worst.max(-m.eval_l(y, [i as f64 * 0.2, j as f64 * 0.2]));
                }
            }
        }
    }
    Ok(SuiteResult::new("a5_rest_is_free", worst, IDENTITY_TOL, format!("largest |L(y,0)| or -min L {worst:e}")))
}

/// `m*` at the cell-aligned times `t ∈ {2,4,8,16,32}` along `v = e₁/2`.
fn mstar_along(ts: &[f64]) -> Result<Vec<f64>> {
    let model = free();
    ts.iter()
        .map(|&t| {
            let y = [t / 2.0, 0.0];
            let lat = box_lattice(&disc(), Rect::around(&[[0.0, 0.0], y], 2))?;
            MetricSolver::new(&model, &lat)?.cost_mstar(t, [0.0, 0.0], y)
        })
        .collect()
}

/// `a(2t) − 2a(t)` and `2a(t) − a(2t)` for `a(t) = m*(t, 0, te₁/2)`: both
/// defects stay below one constant over `t ∈ {2, 4, 8, 16}`.
pub fn additivity_defects() -> Result<SuiteResult> {
    let ts = [2.0, 4.0, 8.0, 16.0, 32.0];
    let a = mstar_along(&ts)?;
    let (mut sub, mut sup) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for i in 0..4 {
        sub = sub.max(a[i + 1] - 2.0 * a[i]);
        sup = sup.max(2.0 * a[i] - a[i + 1]);
    }
    Ok(SuiteResult::new(
        "additivity_defects",
        sub.max(sup),
        ADDITIVITY_BOUND,
        format!("subadditivity defect {sub}, superadditivity defect {sup}"),
    ))
}

/// `|m − m*|` over probe pairs in the closed domain.
pub fn anchor_gap() -> Result<SuiteResult> {
    let model = free();
    let probes: [([f64; 2], [f64; 2], f64); 4] = [
        ([0.5, 0.5], [2.5, 0.5], 2.0),
        ([0.5, 0.0], [3.0, -0.5], 3.0),
        ([-0.3, 0.4], [1.5, 1.5], 2.0),
        ([0.0, 0.5], [0.0, -1.5], 4.0),
    ];
    let mut worst = 0.0f64;
    for (x, y, t) in probes {
        let lat = box_lattice(&disc(), Rect::around(&[x, y], 2))?;
        let s = MetricSolver::new(&model, &lat)?;
        worst = worst.max((s.cost_m(t, x, y)? - s.cost_mstar(t, x, y)?).abs());
    }
    Ok(SuiteResult::new("anchor_gap", worst, ANCHOR_BOUND, format!("largest |m - m*| = {worst}")))
}

/// `m̄*(2t, 2x, 2y) = 2m̄*(t, x, y)` up to the two fit residuals.
pub fn homogeneity() -> Result<SuiteResult> {
    let (model, dom) = (free(), disc());
    let res = Resolution::new(FIXTURE_H);
    let ks = [4, 8, 16];
    let one = mbar_star(&dom, &model, res, 1.0, [0.0, 0.0], [0.5, 0.0], &ks)?;
    let two = mbar_star(&dom, &model, res, 2.0, [0.0, 0.0], [1.0, 0.0], &ks)?;
    let gap = (two.value - 2.0 * one.value).abs();
    let bound = two.residual + 2.0 * one.residual + IDENTITY_TOL;
    Ok(SuiteResult::new(
        "homogeneity",
        gap,
        bound,
        format!("mbar(2,0,e1) = {}, 2 mbar(1,0,e1/2) = {}", two.value, 2.0 * one.value),
    ))
}

/// `ū` from `m̄*` against Hopf–Lax on the sampled `L̄`, same `y`-grid.
pub fn ubar_matches_hopf_lax() -> Result<SuiteResult> {
    let (model, dom) = (free(), disc());
    let res = Resolution::new(FIXTURE_H);
    let ks = [2, 4, 8];
    let table = LbarTable::compute(&dom, &model, res, 2.0, 9, &ks)?;
    let g = InitialData::linear([-1.0, 0.0]);
    let grid = YGrid::new(0.5, 2.0)?;
    let ubar = ubar_from_mbar(&dom, &model, res, &g, [0.0, 0.0], 1.0, &ks, &grid)?;
    let hl = hopf_lax(&EffectiveSource::Table(&table), &g, [0.0, 0.0], 1.0, &grid);
    Ok(SuiteResult::new(
        "ubar_hopf_lax",
        (ubar.value - hl).abs(),
        ubar.residual + UBAR_TOL,
        format!("ubar {} (residual {}), hopf-lax {hl}", ubar.value, ubar.residual),
    ))
}

/// Solver invariants on a torus: exact `t = 0` slice, comparison band,
/// time Lipschitz bound, constant shift, and domain monotonicity.
pub fn solver_invariants() -> Result<Vec<SuiteResult>> {
    let model = HamiltonianModel::kinetic_weight(HoleShape::Disc { radius: 0.25 }, 2.0, 0.05)?.with_m0(3.0)?;
    let torus = |d: &PerforatedDomain| SpaceTimeLattice::build(d, FIXTURE_H, Extent::Torus, FIXTURE_H, 3.0);
    let (lat, lat0) = (torus(&disc())?, torus(&PerforatedDomain::hole_free())?);
    let times = [0.0, 0.25, 0.5, 0.75, 1.0];
    let spec = SolveSpec::new(0.5, 1.0).with_snapshots(&times);
    let g = InitialData::linear([-1.0, 0.5]);
    let u = solve_ueps(&lat, &model, &g, &spec)?;
    let ut = solve_tilde_ueps(&lat0, &model, &g, &spec)?;
    let (c, c1) = comparison_band(&model, &lat, &g);
    let nodes: Vec<usize> = (0..lat.len()).filter(|&z| lat.is_admissible(z)).collect();
    let slices: Vec<Vec<f64>> = times.iter().map(|&t| u.slice(t).expect("kept")).collect();

    let initial = nodes.iter().map(|&z| (slices[0][z] - g.eval(u.position(z))).abs()).fold(0.0, f64::max);
    let mut band = f64::NEG_INFINITY;
    let mut lipschitz = f64::NEG_INFINITY;
    for (i, &t) in times.iter().enumerate() {
        for &z in &nodes {
            let gz = g.eval(u.position(z));
            band = band.max(gz - c * t - slices[i][z]).max(slices[i][z] - gz - c1 * t);
            if i > 0 {
                let (d, s) = (slices[i][z] - slices[i - 1][z], t - times[i - 1]);
                lipschitz = lipschitz.max(d - c1 * s).max(-d - c * s);
            }
        }
    }

    let shift = 0.3;
    let z0 = solve_ueps(&lat, &model, &InitialData::zero(), &spec)?;
    let zc = solve_ueps(&lat, &model, &InitialData::constant(shift), &spec)?;
    let mut shift_gap = 0.0f64;
    for &t in &times {
        let (a, b) = (z0.slice(t).expect("kept"), zc.slice(t).expect("kept"));
        for &z in &nodes {
            shift_gap = shift_gap.max((b[z] - a[z] - shift).abs());
        }
    }

    let mut order = f64::NEG_INFINITY;
    for &t in &times {
        let (a, b) = (ut.reduced(t).expect("kept"), u.reduced(t).expect("kept"));
        for &z in &nodes {
            order = order.max(a[z] - b[z]);
        }
    }
    Ok(vec![
        SuiteResult::new("initial_exact", initial, 0.0, format!("max |u(.,0) - g| = {initial:e}")),
        SuiteResult::new("comparison_band", band, IDENTITY_TOL, format!("band [-{c} t, {c1} t], excursion {band:e}")),
        SuiteResult::new("time_lipschitz", lipschitz, IDENTITY_TOL, format!("largest excess {lipschitz:e}")),
        SuiteResult::new("constant_shift", shift_gap, IDENTITY_TOL, format!("largest deviation {shift_gap:e}")),
        SuiteResult::new("domain_monotonicity", order, IDENTITY_TOL, format!("largest tilde_u - u = {order:e}")),
    ])
}

/// Every suite, in a fixed order.
pub fn run_suites(seed: u64) -> Result<Vec<SuiteResult>> {
    let mut out = vec![
        dpp_identity()?,
        hole_monotonicity()?,
        defect_sandwich()?,
        legendre_duality(seed)?,
        a5_rest_is_free()?,
        additivity_defects()?,
        anchor_gap()?,
        homogeneity()?,
        ubar_matches_hopf_lax()?,
    ];
    out.extend(solver_invariants()?);
    Ok(out)
}

/// The `validate` report: one row and one check per suite.
pub fn validation_report(seed: u64) -> Result<Report> {
    let suites = run_suites(seed)?;
    let mut rep = Report::new("validate");
    let mut t = Table::new("validation", &["suite", "value", "bound", "pass"]);
    for s in &suites {
        t.push(vec![s.name.to_string(), num(s.value), num(s.bound), s.pass().to_string()]);
        rep.checks.push(Check::new(s.name, s.pass(), s.detail.clone()));
    }
    rep.tables.push(t);
    rep.summary.insert("seed".into(), json!(seed));
    rep.summary.insert("suites".into(), json!(suites.len()));
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_passes_on_the_default_fixtures() {
        for s in run_suites(7).unwrap() {
            assert!(s.pass(), "{}: {} > {} ({})", s.name, s.value, s.bound, s.detail);
        }
    }
}
