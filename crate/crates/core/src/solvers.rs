//! Time-dependent value functions: `u^ε`, `ũ^ε`, `w^ε`, the homogenized
//! `u` by Hopf–Lax, and `ū` assembled from `m̄*`.
//!
//! The oscillating problems are solved in fast coordinates `Y = x/ε`, where
//! the lattice has unit-cell period, time runs to `T/ε` and every step cost
//! carries a factor `ε`. Initial data are affine, `g(x) = p·x + c`, so the
//! kernel propagates the reduced value
//!
//! ```text
//! W(Y, s) = min over paths ending at Y of  ε·Σ dt·L − ε p·(Y − Y₀)
//! ```
//!
//! from `W ≡ 0` and `u = g(εY) + W`. Because `W` inherits the periodicity of
//! `L`, a periodic cell suffices whenever the domain has no defects.

use std::collections::BTreeMap;
use std::io::Write;

use crate::effective::{mbar_star_batch, LbarTable, Resolution};
use crate::error::{HjError, Result};
use crate::geometry::{PerforatedDomain, SpaceTimeLattice};
use crate::hamiltonians::HamiltonianModel;
use crate::kernel::{propagate, write_slices_csv, Propagation, Stencil};
use crate::metric::steps_for;

/// Shape of the initial datum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialKind {
    /// `g(x) = p·x`.
    LinearG([f64; 2]),
    Zero,
    Constant(f64),
}

/// Initial datum `g` with its Lipschitz constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialData {
    pub kind: InitialKind,
    pub lip: f64,
}

impl InitialData {
    pub fn linear(p: [f64; 2]) -> Self {
        Self { kind: InitialKind::LinearG(p), lip: p[0].hypot(p[1]) }
    }
    pub fn zero() -> Self {
        Self { kind: InitialKind::Zero, lip: 0.0 }
    }
    pub fn constant(c: f64) -> Self {
        Self { kind: InitialKind::Constant(c), lip: 0.0 }
    }

    /// Gradient `p` of the affine datum.
    pub fn slope(&self) -> [f64; 2] {
        match self.kind {
            InitialKind::LinearG(p) => p,
            _ => [0.0, 0.0],
        }
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match self.kind {
            InitialKind::LinearG(p) => p[0] * x[0] + p[1] * x[1],
            InitialKind::Zero => 0.0,
            InitialKind::Constant(c) => c,
        }
    }
}

/// Which constraint set a value field was computed on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainTag {
    OmegaEps,
    WholeSpace,
    WEps,
}

/// Scale, horizon and retained slices of one solve.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveSpec {
    pub epsilon: f64,
    /// Horizon `T` in slow time.
    pub horizon: f64,
    /// Extra slow times to keep besides `0` and `T`; each must be a multiple of `ε·dt`.
    pub snapshots: Vec<f64>,
}

impl SolveSpec {
    pub fn new(epsilon: f64, horizon: f64) -> Self {
        Self { epsilon, horizon, snapshots: Vec::new() }
    }

    pub fn with_snapshots(mut self, times: &[f64]) -> Self {
        self.snapshots = times.to_vec();
        self
    }
}

/// A solved value function on a fast-coordinate lattice.
#[derive(Clone, Debug)]
pub struct ValueField {
    lattice: SpaceTimeLattice,
    epsilon: f64,
    horizon: f64,
    tag: DomainTag,
    g: InitialData,
    n_steps: usize,
    /// Reduced values `W` per kept step.
    reduced: BTreeMap<usize, Vec<f64>>,
}

impl ValueField {
    pub fn lattice(&self) -> &SpaceTimeLattice {
        &self.lattice
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn tag(&self) -> DomainTag {
        self.tag
    }
    pub fn initial_data(&self) -> &InitialData {
        &self.g
    }
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Slow-time length of one DP step, `ε·dt`.
    pub fn time_step(&self) -> f64 {
        self.epsilon * self.lattice.dt()
    }

    /// Kept slow times in increasing order.
    pub fn times(&self) -> Vec<f64> {
        self.reduced.keys().map(|&s| s as f64 * self.time_step()).collect()
    }

    fn step_of(&self, t: f64) -> Option<usize> {
        let s = (t / self.time_step()).round();
        ((s * self.time_step() - t).abs() <= 1e-9 * t.max(1.0) && s >= 0.0)
            .then_some(s as usize)
            .filter(|s| self.reduced.contains_key(s))
    }

    /// Slow position of node `z` (the base period cell on a torus).
    pub fn position(&self, z: usize) -> [f64; 2] {
        let p = self.lattice.position(z);
        [self.epsilon * p[0], self.epsilon * p[1]]
    }

    /// `u` on every node at kept time `t`; `+∞` off the domain.
    pub fn slice(&self, t: f64) -> Option<Vec<f64>> {
        let w = &self.reduced[&self.step_of(t)?];
        Some((0..w.len()).map(|z| self.g.eval(self.position(z)) + w[z]).collect())
    }

    /// `u(x, t)` at the lattice node nearest `x`; `None` if that node is not
    /// admissible or `t` was not kept.
    pub fn value_at(&self, x: [f64; 2], t: f64) -> Option<f64> {
        let w = &self.reduced[&self.step_of(t)?];
        let y = [x[0] / self.epsilon, x[1] / self.epsilon];
        let z = self.lattice.node_at(y).filter(|&z| self.lattice.is_admissible(z))?;
        // the node's own (unwrapped) fast position
        let n = self.lattice.nodes_per_cell() as f64;
        let yn = [(y[0] * n).round() / n, (y[1] * n).round() / n];
        Some(self.g.eval([self.epsilon * yn[0], self.epsilon * yn[1]]) + w[z])
    }

    /// Nearest admissible node to the slow point `x`, with that node's own
    /// slow position (unwrapped on a torus).
    pub fn snap(&self, x: [f64; 2]) -> Option<(usize, [f64; 2])> {
        let y = [x[0] / self.epsilon, x[1] / self.epsilon];
        let z = self.lattice.nearest_admissible(y)?;
        let p = self.lattice.position(z);
        let shift = [(y[0] - p[0]).round(), (y[1] - p[1]).round()];
        Some((z, [self.epsilon * (p[0] + shift[0]), self.epsilon * (p[1] + shift[1])]))
    }

    /// `u` at node `z`, whose slow position is `x_node`, at kept time `t`.
    pub fn value_at_node(&self, z: usize, x_node: [f64; 2], t: f64) -> Option<f64> {
        let w = self.reduced.get(&self.step_of(t)?)?[z];
        w.is_finite().then(|| self.g.eval(x_node) + w)
    }

    /// Raw reduced slice `W` at kept time `t`; equal lattices give directly comparable slices.
    pub fn reduced(&self, t: f64) -> Option<&[f64]> {
        self.reduced.get(&self.step_of(t)?).map(|v| v.as_slice())
    }

    /// CSV export `t,x,y,value` over admissible nodes in slow coordinates.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let full: Vec<(f64, Vec<f64>)> = self.times().into_iter().map(|t| (t, self.slice(t).expect("kept"))).collect();
        write_slices_csv(&self.lattice, full.iter().map(|(t, v)| (*t, v.as_slice())), self.epsilon, out)
    }
}

fn solve(
    lattice: &SpaceTimeLattice,
    model: &HamiltonianModel,
    g: &InitialData,
    spec: &SolveSpec,
    tag: DomainTag,
    op: &'static str,
) -> Result<ValueField> {
    let eps = spec.epsilon;
    if !(eps > 0.0 && eps <= 1.0) || !(spec.horizon >= 0.0) {
        return Err(HjError::invalid(op, format!("need 0 < epsilon <= 1 and T >= 0, got {eps}, {}", spec.horizon)));
    }
    let n_steps = steps_for(lattice, spec.horizon / eps, op)?;
    let mut snaps = Vec::with_capacity(spec.snapshots.len());
    for &t in &spec.snapshots {
        if t > spec.horizon + 1e-12 {
            return Err(HjError::invalid(op, format!("snapshot t = {t} beyond horizon {}", spec.horizon)));
        }
        snaps.push(steps_for(lattice, t / eps, op)?);
    }
    let stencil = Stencil::new(lattice, model, eps)?;
    if let Some(z) = (0..lattice.len()).find(|&z| lattice.is_admissible(z) && stencil.degree(z) <= 1) {
        return Err(HjError::Unreachable {
            op,
            detail: format!("node at {:?} has no admissible neighbour", lattice.position(z)),
        });
    }
    let init: Vec<f64> = lattice.admissible().iter().map(|&a| if a { 0.0 } else { f64::INFINITY }).collect();
    let opts = Propagation { tilt: g.slope(), snapshots: snaps, keep_parents: false };
    let field = propagate(&stencil, init, n_steps, &opts);
    let reduced = field.slices().map(|(s, v)| (s, v.to_vec())).collect();
    Ok(ValueField { lattice: lattice.clone(), epsilon: eps, horizon: spec.horizon, tag, g: *g, n_steps, reduced })
}

/// Constants `(c, c₁)` with `g − c·t ≤ u ≤ g + c₁·t` for every solver on
/// `lattice`: `c = max H(y, Dg)` bounds each step from below by Fenchel's
/// inequality, `c₁ = max L(y, 0)` is the cost of resting. Both maxima run
/// over all step midpoints (the half-spacing grid).
pub fn comparison_band(model: &HamiltonianModel, lattice: &SpaceTimeLattice, g: &InitialData) -> (f64, f64) {
    let m = 2 * lattice.nodes_per_cell();
    let p = g.slope();
    let (mut c, mut c1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for j in 0..m {
        for i in 0..m {
            let y = [i as f64 / m as f64, j as f64 / m as f64];
            c = c.max(model.eval_h(y, p));
            c1 = c1.max(model.eval_l(y, [0.0, 0.0]));
        }
    }
    (c, c1)
}

/// `u^ε` on `Ω̄_ε`; the lattice's domain must carry no defects.
pub fn solve_ueps(
    lattice: &SpaceTimeLattice,
    model: &HamiltonianModel,
    g: &InitialData,
    spec: &SolveSpec,
) -> Result<ValueField> {
    const OP: &str = "solvers::solve_ueps";
    if !lattice.domain().defects.is_none() {
        return Err(HjError::invalid(OP, "u^eps lives on the defect-free domain; use solve_weps"));
    }
    solve(lattice, model, g, spec, DomainTag::OmegaEps, OP)
}

/// `ũ^ε` on the whole plane; the lattice's domain must have no holes.
pub fn solve_tilde_ueps(
    lattice: &SpaceTimeLattice,
    model: &HamiltonianModel,
    g: &InitialData,
    spec: &SolveSpec,
) -> Result<ValueField> {
    const OP: &str = "solvers::solve_tilde_ueps";
    if lattice.domain().has_holes() {
        return Err(HjError::invalid(OP, "the whole-space problem needs a lattice without holes"));
    }
    solve(lattice, model, g, spec, DomainTag::WholeSpace, OP)
}

/// `w^ε` on `W̄_ε`, the domain with the defect holes filled in.
pub fn solve_weps(
    lattice: &SpaceTimeLattice,
    model: &HamiltonianModel,
    g: &InitialData,
    spec: &SolveSpec,
) -> Result<ValueField> {
    solve(lattice, model, g, spec, DomainTag::WEps, "solvers::solve_weps")
}

/// Homogenized Lagrangian fed to Hopf–Lax.
#[derive(Clone, Copy, Debug)]
pub enum EffectiveSource<'a> {
    /// `H̄(p) = |p|²/2`, i.e. `L̄(v) = |v|²/2`.
    Quadratic,
    /// Sampled `L̄`, bilinearly interpolated; `y` outside its range is skipped.
    Table(&'a LbarTable),
}

impl EffectiveSource<'_> {
    pub fn lbar(&self, v: [f64; 2]) -> Option<f64> {
        match self {
            EffectiveSource::Quadratic => Some((v[0] * v[0] + v[1] * v[1]) / 2.0),
            EffectiveSource::Table(t) => t.interpolate(v),
        }
    }
}

/// The `y`-grid `x + spacing·ℤ²` cut to the closed ball of `radius` around `x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct YGrid {
    pub spacing: f64,
    pub radius: f64,
}

impl YGrid {
    pub fn new(spacing: f64, radius: f64) -> Result<Self> {
        if !(spacing > 0.0) || !(radius >= 0.0) || radius / spacing > 1e4 {
            return Err(HjError::invalid("solvers::YGrid", format!("bad y-grid: spacing {spacing}, radius {radius}")));
        }
        Ok(Self { spacing, radius })
    }

    /// Radius `M₀t` for `model` at time `t`.
    pub fn for_model(model: &HamiltonianModel, t: f64, spacing: f64) -> Result<Self> {
        Self::new(spacing, model.m0() * t)
    }

    /// Offsets `y − x` in row-major order.
    pub fn offsets(&self) -> Vec<[f64; 2]> {
        let r = (self.radius / self.spacing + 1e-9).floor() as i64;
        let mut out = Vec::new();
        for j in -r..=r {
            for i in -r..=r {
                let d = [i as f64 * self.spacing, j as f64 * self.spacing];
                if d[0].hypot(d[1]) <= self.radius + 1e-9 {
                    out.push(d);
                }
            }
        }
        out
    }
}

/// Hopf–Lax for affine data in closed form: `g(x) − t·H̄(Dg)`.
pub fn hopf_lax_affine(hbar_at_slope: f64, g: &InitialData, x: [f64; 2], t: f64) -> f64 {
    g.eval(x) - t.max(0.0) * hbar_at_slope
}

/// `u(x,t) = inf_y t·L̄((x−y)/t) + g(y)` over the `y`-grid; ties go to the smaller `|y|`.
pub fn hopf_lax(src: &EffectiveSource, g: &InitialData, x: [f64; 2], t: f64, grid: &YGrid) -> f64 {
    if t <= 0.0 {
        return g.eval(x);
    }
    let mut best = (f64::INFINITY, f64::INFINITY);
    for d in grid.offsets() {
        let y = [x[0] + d[0], x[1] + d[1]];
        let Some(l) = src.lbar([-d[0] / t, -d[1] / t]) else { continue };
        let val = t * l + g.eval(y);
        let ny = y[0].hypot(y[1]);
        if val < best.0 || (val == best.0 && ny < best.1) {
            best = (val, ny);
        }
    }
    best.0
}

/// `ū(x,t)` with its largest extrapolation residual among grid points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UbarEstimate {
    pub value: f64,
    pub residual: f64,
    /// Minimizing `y`.
    pub argmin: [f64; 2],
}

/// `ū(x,t) = inf_y m̄*(t, y, x) + g(y)` over the `y`-grid.
///
/// Requires an even Lagrangian: one DP per `k` started at the anchors of
/// `kx` then yields `m*(kt, ky, kx)` for every `y` at once.
#[allow(clippy::too_many_arguments)]
pub fn ubar_from_mbar(
    dom: &PerforatedDomain,
    model: &HamiltonianModel,
    res: Resolution,
    g: &InitialData,
    x: [f64; 2],
    t: f64,
    k_list: &[u32],
    grid: &YGrid,
) -> Result<UbarEstimate> {
    const OP: &str = "solvers::ubar_from_mbar";
    if !model.is_even() {
        return Err(HjError::invalid(OP, "the reversed-time shortcut needs L(y,v) = L(y,-v)"));
    }
    let ys: Vec<[f64; 2]> = grid.offsets().into_iter().map(|d| [x[0] + d[0], x[1] + d[1]]).collect();
    let est = mbar_star_batch(dom, model, res, t, x, &ys, k_list, OP)?;
    let mut best = UbarEstimate { value: f64::INFINITY, residual: 0.0, argmin: x };
    let mut best_norm = f64::INFINITY;
    for (y, (m, r)) in ys.iter().zip(est) {
        if !m.is_finite() {
            continue;
        }
        best.residual = best.residual.max(r);
        let val = m + g.eval(*y);
        let ny = y[0].hypot(y[1]);
        if val < best.value || (val == best.value && ny < best_norm) {
            best.value = val;
            best.argmin = *y;
            best_norm = ny;
        }
    }
    if !best.value.is_finite() {
        return Err(HjError::Unreachable { op: OP, detail: format!("no grid point reaches {x:?}") });
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DefectSpec, Extent, HoleShape, Rect};

    fn free() -> HamiltonianModel {
        HamiltonianModel::free().with_m0(3.0).unwrap()
    }

    fn disc() -> PerforatedDomain {
        PerforatedDomain::standard(HoleShape::Disc { radius: 0.25 }).unwrap()
    }

    #[test]
    fn zero_data_with_a5_stays_zero() {
        let l = SpaceTimeLattice::build(&disc(), 0.05, Extent::Torus, 0.05, 3.0).unwrap();
        let f = solve_ueps(&l, &free(), &InitialData::zero(), &SolveSpec::new(0.25, 1.0)).unwrap();
        assert!(f.slice(1.0).unwrap().iter().all(|v| *v == 0.0 || v.is_infinite()));
    }

    #[test]
    fn initial_slice_is_g() {
        let l = SpaceTimeLattice::build(&disc(), 0.05, Extent::Torus, 0.05, 3.0).unwrap();
        let g = InitialData::linear([-1.0, 0.3]);
        let f = solve_ueps(&l, &free(), &g, &SolveSpec::new(0.25, 0.5)).unwrap();
        let s0 = f.slice(0.0).unwrap();
        for z in (0..l.len()).filter(|&z| l.is_admissible(z)) {
            assert_eq!(s0[z], g.eval(f.position(z)));
        }
    }

    #[test]
    fn whole_space_free_line() {
        let l = SpaceTimeLattice::build(&PerforatedDomain::hole_free(), 0.05, Extent::Torus, 0.05, 3.0).unwrap();
        let f = solve_tilde_ueps(&l, &free(), &InitialData::linear([-1.0, 0.0]), &SolveSpec::new(0.25, 1.0)).unwrap();
        assert!((f.value_at([0.0, 0.0], 1.0).unwrap() + 0.5).abs() < 1e-12);
        assert!(solve_tilde_ueps(
            &SpaceTimeLattice::build(&disc(), 0.05, Extent::Torus, 0.05, 3.0).unwrap(),
            &free(),
            &InitialData::zero(),
            &SolveSpec::new(0.25, 1.0)
        )
        .is_err());
    }

    #[test]
    fn defect_free_weps_is_ueps() {
        let d = disc();
        let b = Extent::Box(Rect::cells([-2, -1], [2, 1]));
        let l = SpaceTimeLattice::build(&d, 0.05, b, 0.05, 3.0).unwrap();
        let g = InitialData::linear([-1.0, 0.0]);
        let spec = SolveSpec::new(0.5, 1.0);
        let u = solve_ueps(&l, &free(), &g, &spec).unwrap();
        let w = solve_weps(&l, &free(), &g, &spec).unwrap();
        assert_eq!(u.slice(1.0), w.slice(1.0));
        let lw = SpaceTimeLattice::build(&d.with_defects(DefectSpec::LineE1), 0.05, b, 0.05, 3.0).unwrap();
        assert!(solve_ueps(&lw, &free(), &g, &spec).is_err());
    }

    #[test]
    fn hopf_lax_closed_forms() {
        let grid = YGrid::new(0.05, 3.0).unwrap();
        let g = InitialData::linear([-1.0, 0.0]);
        assert!((hopf_lax(&EffectiveSource::Quadratic, &g, [0.0, 0.0], 1.0, &grid) + 0.5).abs() < 1e-12);
        assert!((hopf_lax(&EffectiveSource::Quadratic, &g, [0.3, -0.2], 0.5, &grid) - (-0.3 - 0.25)).abs() < 1e-12);
        let c = InitialData::constant(2.5);
        assert_eq!(hopf_lax(&EffectiveSource::Quadratic, &c, [0.1, 0.1], 1.0, &grid), 2.5);
        assert_eq!(hopf_lax(&EffectiveSource::Quadratic, &g, [0.7, 0.0], 0.0, &grid), -0.7);
    }

    #[test]
    fn ubar_matches_hopf_lax_hole_free() {
        let d = PerforatedDomain::hole_free();
        let grid = YGrid::new(0.5, 1.5).unwrap();
        let g = InitialData::linear([-1.0, 0.0]);
        let u = ubar_from_mbar(&d, &free(), Resolution::new(0.1), &g, [0.0, 0.0], 1.0, &[2, 4, 8], &grid).unwrap();
        assert!((u.value + 0.5).abs() < 1e-9, "{u:?}");
        assert_eq!(u.argmin, [1.0, 0.0]);
    }
}
