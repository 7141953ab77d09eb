//! Homogenized objects: `m̄*`, the effective Lagrangian `L̄` and the
//! effective Hamiltonian `H̄`.
//!
//! Two independent routes produce `H̄(p)`:
//!
//! * **metric**: `L̄(v) ≈ m*(k, 0, kv)/k` extrapolated in `1/k`, followed by a
//!   discrete Legendre transform over a `v`-grid;
//! * **cell**: the discounted cell problem on one periodic cell, solved by
//!   Gauss–Seidel value iteration, with `H̄ ≈ −λ v_λ(z₀)` extrapolated to
//!   `λ → 0`.
//!
//! [`infsup_upper_bound`] turns any grid function into an upper bound
//! `max_y H(y, p + Dφ)` for `H̄(p)`.

use std::io::Write;

use crate::error::{HjError, Result};
use crate::geometry::{Extent, PerforatedDomain, Rect, SpaceTimeLattice};
use crate::hamiltonians::HamiltonianModel;
use crate::kernel::{Propagation, Stencil};
use crate::metric::{steps_for, MetricSolver};
use crate::stats::inverse_k_fit;

/// Lattice resolution used by the metric route.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Resolution {
    pub h: f64,
    pub dt: f64,
    /// Extra cells around the region a path can usefully reach.
    pub margin_cells: i64,
}

impl Resolution {
    pub fn new(h: f64) -> Self {
        Self { h, dt: h, margin_cells: 2 }
    }
}

/// An extrapolated `m̄*` value.
#[derive(Clone, Debug, PartialEq)]
pub struct MbarEstimate {
    pub value: f64,
    /// Largest residual of the `c∞ + c₁/k` fit.
    pub residual: f64,
    /// `(k, m*(kt, kx, ky)/k)` pairs.
    pub samples: Vec<(u32, f64)>,
}

fn check_k_list(k_list: &[u32], op: &'static str) -> Result<()> {
    if k_list.len() < 3 || k_list.contains(&0) {
        return Err(HjError::invalid(op, "k_list needs at least three positive entries"));
    }
    Ok(())
}

fn extrapolate(ks: &[u32], vals: &[f64]) -> (f64, f64) {
    if vals.iter().any(|v| !v.is_finite()) {
        return (f64::INFINITY, f64::INFINITY);
    }
    let kf: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    let fit = inverse_k_fit(&kf, vals).expect("distinct k values");
    (fit.intercept, fit.max_residual)
}

/// `m̄*(t, x, y) = lim m*(kt, kx, ky)/k`, extrapolated from `k_list`.
pub fn mbar_star(
    dom: &PerforatedDomain,
    model: &HamiltonianModel,
    res: Resolution,
    t: f64,
    x: [f64; 2],
    y: [f64; 2],
    k_list: &[u32],
) -> Result<MbarEstimate> {
    const OP: &str = "effective::mbar_star";
    let mut samples = Vec::with_capacity(k_list.len());
    let per_k = mstar_scaled(dom, model, res, t, x, &[y], k_list, OP)?;
    for (&k, vals) in k_list.iter().zip(&per_k) {
        if !vals[0].is_finite() {
            return Err(HjError::Unreachable { op: OP, detail: format!("k = {k}: no path from {x:?} to {y:?}") });
        }
        samples.push((k, vals[0]));
    }
    let vals: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let (value, residual) = extrapolate(k_list, &vals);
    Ok(MbarEstimate { value, residual, samples })
}

/// `(m̄*(t, x, y), residual)` for many `y` sharing one source `x`; `+∞`
/// where some `k` cannot connect the pair.
#[allow(clippy::too_many_arguments)]
pub(crate) fn mbar_star_batch(
    dom: &PerforatedDomain,
    model: &HamiltonianModel,
    res: Resolution,
    t: f64,
    x: [f64; 2],
    ys: &[[f64; 2]],
    k_list: &[u32],
    op: &'static str,
) -> Result<Vec<(f64, f64)>> {
    let per_k = mstar_scaled(dom, model, res, t, x, ys, k_list, op)?;
    let mut column = vec![0.0; k_list.len()];
    Ok((0..ys.len())
        .map(|i| {
            for (c, row) in column.iter_mut().zip(&per_k) {
                *c = row[i];
            }
            extrapolate(k_list, &column)
        })
        .collect())
}

/// `m*(kt, kx, ky)/k` for every `k` (outer) and `y` (inner), one DP per `k`.
#[allow(clippy::too_many_arguments)]
fn mstar_scaled(
    dom: &PerforatedDomain,
    model: &HamiltonianModel,
    res: Resolution,
    t: f64,
    x: [f64; 2],
    ys: &[[f64; 2]],
    k_list: &[u32],
    op: &'static str,
) -> Result<Vec<Vec<f64>>> {
    check_k_list(k_list, op)?;
    let mut out = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let kf = k as f64;
        let scaled = |p: [f64; 2]| [kf * p[0], kf * p[1]];
        let kx = scaled(x);
        let mut pts: Vec<[f64; 2]> = ys.iter().map(|&y| scaled(y)).collect();
        pts.push(kx);
        let lat =
            SpaceTimeLattice::build(dom, res.h, Extent::Box(Rect::around(&pts, res.margin_cells)), res.dt, model.m0())?;
        let solver = MetricSolver::new(model, &lat)?;
        let n = steps_for(&lat, kf * t, op)?;
        let field = solver.field(&solver.anchors(kx, op)?, n, &Propagation::default());
        let vals = field.values();
        let mut row = Vec::with_capacity(ys.len());
        for y in &pts[..ys.len()] {
            let best = solver.anchors(*y, op)?.iter().map(|&s| vals[s]).fold(f64::INFINITY, f64::min);
            row.push(best / kf);
        }
        out.push(row);
    }
    Ok(out)
}

/// `L̄(v) = m̄*(1, 0, v)`.
pub fn effective_lagrangian(
    dom: &PerforatedDomain,
    model: &HamiltonianModel,
    res: Resolution,
    v: [f64; 2],
    k_list: &[u32],
) -> Result<f64> {
    Ok(mbar_star(dom, model, res, 1.0, [0.0, 0.0], v, k_list)?.value)
}

/// `L̄` sampled on an `n × n` grid over `[-radius, radius]²`.
#[derive(Clone, Debug)]
pub struct LbarTable {
    pub radius: f64,
    pub n: usize,
    pub k_list: Vec<u32>,
    /// Row-major in `(v₂, v₁)`; `+∞` where some `k` could not reach `kv`.
    pub values: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl LbarTable {
    /// One DP per `k` from the anchors around the origin, read at the
    /// anchors around every `k·v`.
    pub fn compute(
        dom: &PerforatedDomain,
        model: &HamiltonianModel,
        res: Resolution,
        radius: f64,
        n: usize,
        k_list: &[u32],
    ) -> Result<Self> {
        const OP: &str = "effective::LbarTable";
        check_k_list(k_list, OP)?;
        if n < 3 || !(radius > 0.0) {
            return Err(HjError::invalid(OP, "need a v-grid with n >= 3 and positive radius"));
        }
        // Anchors sit on whole cells, so k·v must be a lattice of cell centres;
        // otherwise the anchor freedom biases each sample differently.
        let step = 2.0 * radius / (n - 1) as f64;
        for &k in k_list {
            for q in [k as f64 * step, k as f64 * radius] {
                if (q - q.round()).abs() > 1e-9 {
                    return Err(HjError::invalid(
                        OP,
                        format!(
                            "v-grid (radius {radius}, n {n}) is not commensurate with k = {k}: k·v must be integral"
                        ),
                    ));
                }
            }
        }
        let mut per_k: Vec<Vec<f64>> = Vec::with_capacity(k_list.len());
        for &k in k_list {
            let kf = k as f64;
            let half = (radius * kf).ceil() as i64 + res.margin_cells;
            let lat = SpaceTimeLattice::build(
                dom,
                res.h,
                Extent::Box(Rect::cells([-half, -half], [half, half])),
                res.dt,
                model.m0(),
            )?;
            let solver = MetricSolver::new(model, &lat)?;
            let steps = steps_for(&lat, kf, OP)?;
            let field = solver.field(&solver.anchors([0.0, 0.0], OP)?, steps, &Propagation::default());
            let vals = field.values();
            let mut row = Vec::with_capacity(n * n);
            for j in 0..n {
                for i in 0..n {
                    let v = grid_point(radius, n, i, j);
                    let best =
                        lat.anchors([kf * v[0], kf * v[1]]).iter().map(|&s| vals[s]).fold(f64::INFINITY, f64::min);
                    row.push(best / kf);
                }
            }
            per_k.push(row);
        }
        let mut values = Vec::with_capacity(n * n);
        let mut residuals = Vec::with_capacity(n * n);
        let mut column = vec![0.0; k_list.len()];
        for idx in 0..n * n {
            for (c, row) in column.iter_mut().zip(&per_k) {
                *c = row[idx];
            }
            let (v, r) = extrapolate(k_list, &column);
            values.push(v);
            residuals.push(r);
        }
        Ok(Self { radius, n, k_list: k_list.to_vec(), values, residuals })
    }

    pub fn v(&self, i: usize, j: usize) -> [f64; 2] {
        grid_point(self.radius, self.n, i, j)
    }

    /// Iterator over `(v, L̄(v), residual)`.
    pub fn samples(&self) -> impl Iterator<Item = ([f64; 2], f64, f64)> + '_ {
        (0..self.n * self.n).map(move |idx| (self.v(idx % self.n, idx / self.n), self.values[idx], self.residuals[idx]))
    }

    /// `max_v p·v − L̄(v)` over the grid, with the maximizing `v`.
    pub fn legendre(&self, p: [f64; 2]) -> (f64, [f64; 2]) {
        let mut best = (f64::NEG_INFINITY, [0.0, 0.0]);
        for (v, l, _) in self.samples() {
            if l.is_finite() {
                let val = p[0] * v[0] + p[1] * v[1] - l;
                if val > best.0 {
                    best = (val, v);
                }
            }
        }
        best
    }

    /// Bilinear interpolation of `L̄`; `None` outside the grid or next to an unreachable sample.
    pub fn interpolate(&self, v: [f64; 2]) -> Option<f64> {
        let step = 2.0 * self.radius / (self.n - 1) as f64;
        let fx = (v[0] + self.radius) / step;
        let fy = (v[1] + self.radius) / step;
        let last = (self.n - 1) as f64;
        if !(fx >= -1e-9 && fy >= -1e-9 && fx <= last + 1e-9 && fy <= last + 1e-9) {
            return None;
        }
        let (fx, fy) = (fx.clamp(0.0, last), fy.clamp(0.0, last));
        let (i0, j0) = ((fx.floor() as usize).min(self.n - 2), (fy.floor() as usize).min(self.n - 2));
        let (tx, ty) = (fx - i0 as f64, fy - j0 as f64);
        let at = |i: usize, j: usize| self.values[j * self.n + i];
        let mut acc = 0.0;
        for (i, j, w) in [
            (i0, j0, (1.0 - tx) * (1.0 - ty)),
            (i0 + 1, j0, tx * (1.0 - ty)),
            (i0, j0 + 1, (1.0 - tx) * ty),
            (i0 + 1, j0 + 1, tx * ty),
        ] {
            if w == 0.0 {
                continue;
            }
            let val = at(i, j);
            if !val.is_finite() {
                return None;
            }
            acc += w * val;
        }
        Some(acc)
    }
}

fn grid_point(radius: f64, n: usize, i: usize, j: usize) -> [f64; 2] {
    let step = 2.0 * radius / (n - 1) as f64;
    [-radius + i as f64 * step, -radius + j as f64 * step]
}

/// Metric-route `H̄(p)`: Legendre transform of a freshly computed [`LbarTable`].
#[allow(clippy::too_many_arguments)]
pub fn effective_hamiltonian_metric(
    dom: &PerforatedDomain,
    model: &HamiltonianModel,
    res: Resolution,
    p: [f64; 2],
    v_grid: usize,
    v_radius: f64,
    k_list: &[u32],
) -> Result<f64> {
    Ok(LbarTable::compute(dom, model, res, v_radius, v_grid, k_list)?.legendre(p).0)
}

/// Discounted cell problem settings.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSettings {
    pub h: f64,
    pub dt: f64,
    pub lambdas: Vec<f64>,
    pub tol: f64,
}

impl CellSettings {
    pub fn new(h: f64, lambdas: Vec<f64>) -> Self {
        Self { h, dt: h, lambdas, tol: 1e-8 }
    }
}

/// Result of the cell route.
#[derive(Clone, Debug)]
pub struct CellSolution {
    pub hbar: f64,
    /// `(λ, −λ v_λ(z₀))` in the order solved.
    pub per_lambda: Vec<(f64, f64)>,
    /// `v_λ − v_λ(z₀)` at the smallest `λ`; `+∞` on excluded nodes.
    pub corrector: Vec<f64>,
    pub lattice: SpaceTimeLattice,
    pub sweeps: usize,
}

/// Cell-route `H̄(p)` by vanishing discount on the periodic cell.
///
/// Solves `v(z) = min_{z'→z} (1−λdt)·v(z') + dt·L(mid, w) − dt·p·w` with
/// `w = (z−z')/dt`, i.e. `λv + H(y, p + Dv) = 0`, for each `λ`.
pub fn effective_hamiltonian_cell(
    dom: &PerforatedDomain,
    model: &HamiltonianModel,
    p: [f64; 2],
    settings: &CellSettings,
) -> Result<CellSolution> {
    const OP: &str = "effective::effective_hamiltonian_cell";
    let lambdas = &settings.lambdas;
    if lambdas.len() < 2 || lambdas.windows(2).any(|w| !(w[1] < w[0])) || lambdas.iter().any(|l| !(*l > 0.0)) {
        return Err(HjError::invalid(OP, "lambda_list must hold >= 2 positive, strictly decreasing values"));
    }
    let lattice = SpaceTimeLattice::build(dom, settings.h, Extent::Torus, settings.dt, model.m0())?;
    let stencil = Stencil::new(&lattice, model, 1.0)?;
    let tilt = stencil.tilt_costs(p);
    let z0 = lattice
        .nearest_admissible([0.5, 0.5])
        .ok_or_else(|| HjError::invalid(OP, "the periodic cell has no admissible node"))?;
    let (nx, ny) = lattice.shape();
    let orders: [Vec<usize>; 4] = {
        let fwd: Vec<usize> = (0..lattice.len()).collect();
        let bwd: Vec<usize> = fwd.iter().rev().copied().collect();
        let col = |rev_x: bool, rev_y: bool| -> Vec<usize> {
            let mut o = Vec::with_capacity(lattice.len());
            for jy in 0..ny {
                let iy = if rev_y { ny - 1 - jy } else { jy };
                for jx in 0..nx {
                    let ix = if rev_x { nx - 1 - jx } else { jx };
                    o.push(iy * nx + ix);
                }
            }
            o
        };
        [fwd, bwd, col(true, false), col(false, true)]
    };
    let mut v: Vec<f64> = lattice.admissible().iter().map(|&a| if a { 0.0 } else { f64::INFINITY }).collect();
    let mut per_lambda = Vec::with_capacity(lambdas.len());
    let mut prev_lambda: Option<f64> = None;
    let mut total_sweeps = 0usize;
    for &lambda in lambdas {
        if let Some(pl) = prev_lambda {
            // warm start: v_λ ≈ −H̄/λ scales like 1/λ
            for x in v.iter_mut().filter(|x| x.is_finite()) {
                *x *= pl / lambda;
            }
        }
        let gamma = 1.0 - lambda * settings.dt;
        let cap = (1e6 / lambda).ceil() as usize;
        let mut converged = false;
        for sweep in 0..cap {
            let mut diff = 0.0f64;
            for &z in &orders[sweep % 4] {
                if !lattice.is_admissible(z) {
                    continue;
                }
                let (val, _) = stencil.relax_node(z, &v, gamma, &tilt);
                diff = diff.max((val - v[z]).abs());
                v[z] = val;
            }
            total_sweeps += 1;
            if !diff.is_finite() {
                return Err(HjError::NonConvergence {
                    op: OP,
                    detail: format!("lambda = {lambda}: non-finite update"),
                });
            }
            if diff <= settings.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(HjError::NonConvergence {
                op: OP,
                detail: format!("lambda = {lambda}: {cap} sweeps without reaching tol"),
            });
        }
        per_lambda.push((lambda, -lambda * v[z0]));
        prev_lambda = Some(lambda);
    }
    let n = per_lambda.len();
    let (l1, f1) = per_lambda[n - 1];
    let (l2, f2) = per_lambda[n - 2];
    let hbar = f1 - l1 * (f2 - f1) / (l2 - l1);
    let base = v[z0];
    let corrector = v.iter().map(|x| if x.is_finite() { x - base } else { f64::INFINITY }).collect();
    Ok(CellSolution { hbar, per_lambda, corrector, lattice, sweeps: total_sweeps })
}

/// `max_y H(y, p + Dφ(y))` over the interior nodes of a periodic cell.
///
/// The essential supremum runs over the open domain, so nodes in the
/// boundary band are skipped and never used in a difference quotient:
/// differences are central between two interior neighbours and one-sided
/// next to the band.
pub fn infsup_upper_bound(
    model: &HamiltonianModel,
    lattice: &SpaceTimeLattice,
    p: [f64; 2],
    corrector: &[f64],
) -> Result<f64> {
    const OP: &str = "effective::infsup_upper_bound";
    if !lattice.is_periodic() || corrector.len() != lattice.len() {
        return Err(HjError::invalid(OP, "corrector must live on a periodic cell lattice"));
    }
    let h = lattice.h();
    let mut best = f64::NEG_INFINITY;
    let interior = |i: usize| lattice.is_admissible(i) && !lattice.is_boundary(i);
    for z in 0..lattice.len() {
        if !interior(z) {
            continue;
        }
        let g = lattice.global(z);
        let mut grad = [0.0; 2];
        for (a, slot) in grad.iter_mut().enumerate() {
            let mut e = [0i64; 2];
            e[a] = 1;
            let nb = |s: i64| lattice.node_from_global([g[0] + s * e[0], g[1] + s * e[1]]).filter(|&i| interior(i));
            *slot = match (nb(1), nb(-1)) {
                (Some(f), Some(b)) => (corrector[f] - corrector[b]) / (2.0 * h),
                (Some(f), None) => (corrector[f] - corrector[z]) / h,
                (None, Some(b)) => (corrector[z] - corrector[b]) / h,
                (None, None) => 0.0,
            };
        }
        best = best.max(model.eval_h(lattice.position(z), [p[0] + grad[0], p[1] + grad[1]]));
    }
    Ok(best)
}

/// One row of the exported effective table.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveRow {
    /// One of `Lbar`, `Hbar_metric`, `Hbar_cell`, `Hbar_infsup`.
    pub kind: &'static str,
    pub component1: f64,
    pub component2: f64,
    pub value: f64,
    pub residual: f64,
}

/// Sampled `L̄`/`H̄` values with per-route provenance.
#[derive(Clone, Debug, Default)]
pub struct EffectiveTable {
    pub k_list: Vec<u32>,
    pub lambda_list: Vec<f64>,
    pub rows: Vec<EffectiveRow>,
}

impl EffectiveTable {
    pub fn push(&mut self, kind: &'static str, c: [f64; 2], value: f64, residual: f64) {
        self.rows.push(EffectiveRow { kind, component1: c[0], component2: c[1], value, residual });
    }

    pub fn get(&self, kind: &str, c: [f64; 2]) -> Option<&EffectiveRow> {
        self.rows.iter().find(|r| r.kind == kind && r.component1 == c[0] && r.component2 == c[1])
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let op = "effective::EffectiveTable::write_csv";
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kind", "component1", "component2", "value", "residual"])
            .map_err(|e| HjError::Csv { op, source: e })?;
        for r in &self.rows {
            w.write_record([
                r.kind.to_string(),
                r.component1.to_string(),
                r.component2.to_string(),
                r.value.to_string(),
                r.residual.to_string(),
            ])
            .map_err(|e| HjError::Csv { op, source: e })?;
        }
        w.flush().map_err(|e| HjError::Io { op, source: e })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::HoleShape;

    fn free() -> HamiltonianModel {
        HamiltonianModel::free().with_m0(3.0).unwrap()
    }

    #[test]
    fn hole_free_cell_route_is_exact() {
        let d = PerforatedDomain::hole_free();
        let s = effective_hamiltonian_cell(&d, &free(), [1.0, 0.0], &CellSettings::new(0.1, vec![0.2, 0.1])).unwrap();
        assert!((s.hbar - 0.5).abs() < 1e-6, "{}", s.hbar);
    }

    #[test]
    fn zero_corrector_certificate() {
        let d = PerforatedDomain::standard(HoleShape::Disc { radius: 0.25 }).unwrap();
        let l = SpaceTimeLattice::build(&d, 0.05, Extent::Torus, 0.05, 3.0).unwrap();
        let phi = vec![0.0; l.len()];
        let v = infsup_upper_bound(&free(), &l, [0.6, -0.8], &phi).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        let h0 = PerforatedDomain::hole_free();
        let l0 = SpaceTimeLattice::build(&h0, 0.1, Extent::Torus, 0.1, 3.0).unwrap();
        assert_eq!(infsup_upper_bound(&free(), &l0, [0.0, 0.0], &vec![0.0; l0.len()]).unwrap(), 0.0);
    }

    #[test]
    fn certificate_brackets_cell_route() {
        let d = PerforatedDomain::standard(HoleShape::Disc { radius: 0.25 }).unwrap();
        let mut cs = CellSettings::new(0.05, vec![0.2, 0.1, 0.05, 0.025]);
        cs.dt = 0.1;
        let p = [-1.0, 0.0];
        let s = effective_hamiltonian_cell(&d, &free(), p, &cs).unwrap();
        assert!((s.hbar - 0.5).abs() < 1e-6, "{}", s.hbar);
        let c = infsup_upper_bound(&free(), &s.lattice, p, &s.corrector).unwrap();
        // difference quotients of a Lipschitz corrector overshoot near the hole
        assert!((0.5 - 1e-6..=0.5 + 0.1).contains(&c), "{c}");
    }

    #[test]
    fn incommensurate_v_grid_is_rejected() {
        let d = PerforatedDomain::hole_free();
        assert!(LbarTable::compute(&d, &free(), Resolution::new(0.1), 2.0, 8, &[1, 2, 4]).is_err());
    }

    #[test]
    fn mbar_rest_is_zero() {
        let d = PerforatedDomain::standard(HoleShape::Disc { radius: 0.25 }).unwrap();
        let e = mbar_star(&d, &free(), Resolution::new(0.1), 1.0, [0.0, 0.0], [0.0, 0.0], &[2, 4, 8]).unwrap();
        assert!(e.value.abs() < 1e-12 && e.residual < 1e-12);
        assert!(mbar_star(&d, &free(), Resolution::new(0.1), 1.0, [0.0, 0.0], [0.0, 0.0], &[2, 4]).is_err());
    }

    #[test]
    fn table_interpolation_and_legendre() {
        let d = PerforatedDomain::hole_free();
        let t = LbarTable::compute(&d, &free(), Resolution::new(0.1), 2.0, 9, &[2, 4, 8]).unwrap();
        let (h, v) = t.legendre([1.0, 0.0]);
        assert!((h - 0.5).abs() < 1e-9 && (v[0] - 1.0).abs() < 1e-12);
        assert!((t.interpolate([1.0, 0.0]).unwrap() - 0.5).abs() < 1e-9);
        assert!(t.interpolate([2.5, 0.0]).is_none());
    }
}
