//! Min-plus dynamic-programming kernel shared by every solver.
//!
//! One step of the scheme reads
//!
//! ```text
//! new[z] = min over admissible steps z' → z of  γ·old[z'] + scale·(dt·L(mid, (z−z')/dt) − p·(z−z'))
//! ```
//!
//! where `mid = (z+z')/2`. Because `L` is ℤ²-periodic and nodes sit on a
//! grid of spacing `1/n`, the running cost depends only on the residue of
//! `z` and the offset, so it is tabulated once. Admissible steps are stored
//! per node in CSR form, sorted by predecessor index so that ties resolve to
//! the smallest predecessor.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{HjError, Result};
use crate::geometry::SpaceTimeLattice;
use crate::hamiltonians::HamiltonianModel;

pub(crate) const NO_PARENT: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
struct Step {
    pred: u32,
    k: u32,
}

/// Admissible steps and tabulated running costs on one lattice.
#[derive(Debug)]
pub struct Stencil<'a> {
    lattice: &'a SpaceTimeLattice,
    offsets: Vec<[i32; 2]>,
    reach: i64,
    run_cost: Vec<f64>,
    start: Vec<u32>,
    steps: Vec<Step>,
    res: Vec<u32>,
    scale: f64,
}

impl<'a> Stencil<'a> {
    /// Stencil for `model` with speed bound `model.m0()`; every running cost
    /// is multiplied by `scale` (the `ε` of a rescaled problem, 1 otherwise).
    pub fn new(lattice: &'a SpaceTimeLattice, model: &HamiltonianModel, scale: f64) -> Result<Self> {
        let h = lattice.h();
        let dt = lattice.dt();
        let n = lattice.nodes_per_cell();
        let r = model.m0() * dt / h;
        if r < 2.0 - 1e-9 {
            return Err(HjError::UnreachableTimeStep {
                op: "kernel::Stencil",
                detail: format!("dt*M0 = {} < 2h = {}", model.m0() * dt, 2.0 * h),
            });
        }
        let reach = (r + 1e-9).floor() as i64;
        let mut offsets = Vec::new();
        for oy in -reach..=reach {
            for ox in -reach..=reach {
                if ((ox * ox + oy * oy) as f64).sqrt() <= r + 1e-9 {
                    offsets.push([ox as i32, oy as i32]);
                }
            }
        }
        let n_off = offsets.len();

        let mut run_cost = vec![0.0; n * n * n_off];
        for ry in 0..n {
            for rx in 0..n {
                let base = (rx + n * ry) * n_off;
                for (k, o) in offsets.iter().enumerate() {
                    let mid = [
                        (2.0 * rx as f64 - o[0] as f64) / (2.0 * n as f64),
                        (2.0 * ry as f64 - o[1] as f64) / (2.0 * n as f64),
                    ];
                    let v = [o[0] as f64 * h / dt, o[1] as f64 * h / dt];
                    run_cost[base + k] = scale * dt * model.eval_l(mid, v);
                }
            }
        }

        let dom = lattice.domain();
        let len = lattice.len();
        let mut start = Vec::with_capacity(len + 1);
        let mut steps: Vec<Step> = Vec::new();
        let mut res = Vec::with_capacity(len);
        let mut local: Vec<Step> = Vec::with_capacity(n_off);
        for z in 0..len {
            start.push(steps.len() as u32);
            res.push(lattice.residue(z) as u32);
            if !lattice.is_admissible(z) {
                continue;
            }
            let gz = lattice.global(z);
            let pz = lattice.position(z);
            local.clear();
            for (k, o) in offsets.iter().enumerate() {
                let gp = [gz[0] - o[0] as i64, gz[1] - o[1] as i64];
                let Some(pred) = lattice.node_from_global(gp) else { continue };
                if !lattice.is_admissible(pred) {
                    continue;
                }
                let len_nodes = ((o[0] * o[0] + o[1] * o[1]) as f64).sqrt();
                let samples = 4usize.max((2.0 * len_nodes).ceil() as usize);
                let clear = dom.hole.is_none()
                    || (1..=samples).all(|i| {
                        let f = i as f64 / (samples + 1) as f64;
                        dom.contains([pz[0] - f * o[0] as f64 * h, pz[1] - f * o[1] as f64 * h])
                    });
                if clear {
                    local.push(Step { pred: pred as u32, k: k as u32 });
                }
            }
            local.sort_by_key(|s| s.pred);
            steps.extend_from_slice(&local);
        }
        start.push(steps.len() as u32);
        Ok(Self { lattice, offsets, reach, run_cost, start, steps, res, scale })
    }

    pub fn lattice(&self) -> &'a SpaceTimeLattice {
        self.lattice
    }
    pub fn offsets(&self) -> &[[i32; 2]] {
        &self.offsets
    }
    pub fn scale(&self) -> f64 {
        self.scale
    }
    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    /// Extra per-offset cost `−scale·p·(o·h)` for a linear tilt `p`.
    pub fn tilt_costs(&self, p: [f64; 2]) -> Vec<f64> {
        let h = self.lattice.h();
        self.offsets.iter().map(|o| -self.scale * (p[0] * o[0] as f64 * h + p[1] * o[1] as f64 * h)).collect()
    }

    /// Full cost of the step `pred → z` (running cost plus tilt).
    pub fn step_cost(&self, z: usize, pred: usize, tilt: &[f64]) -> Option<f64> {
        let n_off = self.offsets.len();
        self.node_steps(z)
            .iter()
            .find(|s| s.pred as usize == pred)
            .map(|s| self.run_cost[self.res[z] as usize * n_off + s.k as usize] + tilt[s.k as usize])
    }

    #[inline]
    fn node_steps(&self, z: usize) -> &[Step] {
        &self.steps[self.start[z] as usize..self.start[z + 1] as usize]
    }

    /// Number of admissible steps into `z`, the rest step included.
    pub fn degree(&self, z: usize) -> usize {
        self.node_steps(z).len()
    }

    /// Predecessors of `z` in tie-break order.
    pub fn predecessors(&self, z: usize) -> impl Iterator<Item = usize> + '_ {
        self.node_steps(z).iter().map(|s| s.pred as usize)
    }

    /// One Bellman update at node `z`; returns `(value, argmin predecessor)`.
    #[inline]
    pub(crate) fn relax_node(&self, z: usize, old: &[f64], gamma: f64, tilt: &[f64]) -> (f64, u32) {
        let n_off = self.offsets.len();
        let base = self.res[z] as usize * n_off;
        let mut best = f64::INFINITY;
        let mut arg = NO_PARENT;
        for s in self.node_steps(z) {
            let cand = gamma * old[s.pred as usize] + self.run_cost[base + s.k as usize] + tilt[s.k as usize];
            if cand < best {
                best = cand;
                arg = s.pred;
            }
        }
        (best, arg)
    }

    /// Applies one DP step to the rows `rows` of `new`; other rows become `+∞`.
    fn step_rows(
        &self,
        old: &[f64],
        new: &mut [f64],
        parent: Option<&mut [u32]>,
        gamma: f64,
        tilt: &[f64],
        window: [usize; 4],
    ) {
        let (nx, _) = self.lattice.shape();
        let [x0, x1, y0, y1] = window;
        let update_row = |iy: usize, row: &mut [f64], prow: Option<&mut [u32]>| {
            let mut prow = prow;
            for ix in 0..nx {
                let z = iy * nx + ix;
                let (v, a) = if iy >= y0 && iy <= y1 && ix >= x0 && ix <= x1 {
                    self.relax_node(z, old, gamma, tilt)
                } else {
                    (f64::INFINITY, NO_PARENT)
                };
                row[ix] = v;
                if let Some(p) = prow.as_deref_mut() {
                    p[ix] = a;
                }
            }
        };
        match parent {
            Some(par) => new
                .par_chunks_mut(nx)
                .zip(par.par_chunks_mut(nx))
                .enumerate()
                .for_each(|(iy, (row, prow))| update_row(iy, row, Some(prow))),
            None => new.par_chunks_mut(nx).enumerate().for_each(|(iy, row)| update_row(iy, row, None)),
        }
    }

    /// Rows/columns that can become finite after one step from `vals`.
    fn active_window(&self, vals: &[f64]) -> Option<[usize; 4]> {
        let (nx, ny) = self.lattice.shape();
        if self.lattice.is_periodic() {
            return Some([0, nx - 1, 0, ny - 1]);
        }
        let (mut x0, mut x1, mut y0, mut y1) = (usize::MAX, 0, usize::MAX, 0);
        for (iy, row) in vals.chunks(nx).enumerate() {
            if let Some(first) = row.iter().position(|v| v.is_finite()) {
                let last = row.iter().rposition(|v| v.is_finite()).unwrap_or(first);
                x0 = x0.min(first);
                x1 = x1.max(last);
                y0 = y0.min(iy);
                y1 = iy;
            }
        }
        if x0 == usize::MAX {
            return None;
        }
        let r = self.reach as usize;
        Some([x0.saturating_sub(r), (x1 + r).min(nx - 1), y0.saturating_sub(r), (y1 + r).min(ny - 1)])
    }
}

/// What to retain from a propagation.
#[derive(Clone, Debug, Default)]
pub struct Propagation {
    /// Linear tilt `p` (adds `−scale·p·Δx` to each step).
    pub tilt: [f64; 2],
    /// Step indices whose slices are kept; step 0 and the final step always are.
    pub snapshots: Vec<usize>,
    /// Keep argmin predecessors for every step (needed for backtracing).
    pub keep_parents: bool,
}

/// Minimal-action values from a source set, sampled at selected time steps.
#[derive(Clone, Debug)]
pub struct CostField<'a> {
    lattice: &'a SpaceTimeLattice,
    n_steps: usize,
    slices: BTreeMap<usize, Vec<f64>>,
    parents: Option<Vec<Vec<u32>>>,
}

/// Runs `n_steps` DP steps from `init` (`+∞` marks nodes outside the source set).
pub fn propagate<'a>(stencil: &Stencil<'a>, init: Vec<f64>, n_steps: usize, opts: &Propagation) -> CostField<'a> {
    let lat = stencil.lattice;
    assert_eq!(init.len(), lat.len(), "initial slice has the wrong length");
    let tilt = stencil.tilt_costs(opts.tilt);
    let mut slices = BTreeMap::new();
    let mut parents = opts.keep_parents.then(Vec::new);
    let mut old = init;
    let mut new = vec![f64::INFINITY; lat.len()];
    slices.insert(0, old.clone());
    for s in 1..=n_steps {
        let mut par = parents.as_ref().map(|_| vec![NO_PARENT; lat.len()]);
        match stencil.active_window(&old) {
            Some(w) => stencil.step_rows(&old, &mut new, par.as_deref_mut(), 1.0, &tilt, w),
            None => new.iter_mut().for_each(|v| *v = f64::INFINITY),
        }
        std::mem::swap(&mut old, &mut new);
        if let (Some(all), Some(p)) = (parents.as_mut(), par) {
            all.push(p);
        }
        if s != n_steps && opts.snapshots.contains(&s) {
            slices.insert(s, old.clone());
        }
    }
    slices.insert(n_steps, old);
    CostField { lattice: lat, n_steps, slices, parents }
}

/// A backtraced lattice path.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePath {
    pub times: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    pub nodes: Vec<usize>,
    pub total_action: f64,
}

impl DiscretePath {
    /// Largest `|Δx|/Δt` along the path.
    pub fn max_speed(&self) -> f64 {
        self.points
            .windows(2)
            .zip(self.times.windows(2))
            .map(|(p, t)| (p[1][0] - p[0][0]).hypot(p[1][1] - p[0][1]) / (t[1] - t[0]))
            .fold(0.0, f64::max)
    }

    /// CSV export with columns `s,x,y`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let op = "metric::DiscretePath::write_csv";
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["s", "x", "y"]).map_err(|e| HjError::Csv { op, source: e })?;
        for (t, p) in self.times.iter().zip(&self.points) {
            w.write_record([t.to_string(), p[0].to_string(), p[1].to_string()])
                .map_err(|e| HjError::Csv { op, source: e })?;
        }
        w.flush().map_err(|e| HjError::Io { op, source: e })
    }
}

impl<'a> CostField<'a> {
    pub fn lattice(&self) -> &'a SpaceTimeLattice {
        self.lattice
    }
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }
    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.lattice.dt()
    }
    /// Final slice.
    pub fn values(&self) -> &[f64] {
        &self.slices[&self.n_steps]
    }
    pub fn slice(&self, step: usize) -> Option<&[f64]> {
        self.slices.get(&step).map(|v| v.as_slice())
    }
    pub fn slices(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.slices.iter().map(|(k, v)| (*k, v.as_slice()))
    }
    pub fn value(&self, node: usize) -> f64 {
        self.values()[node]
    }

    /// Backtraces the optimal path into `sink` at the final step.
    pub fn optimal_path(&self, sink: usize) -> Result<DiscretePath> {
        const OP: &str = "metric::optimal_path";
        let parents =
            self.parents.as_ref().ok_or_else(|| HjError::invalid(OP, "field was computed without parent links"))?;
        let total = self.values()[sink];
        if !total.is_finite() {
            return Err(HjError::Unreachable { op: OP, detail: format!("sink node {sink} has infinite value") });
        }
        let mut nodes = vec![sink];
        let mut cur = sink;
        for s in (1..=self.n_steps).rev() {
            let p = parents[s - 1][cur];
            if p == NO_PARENT {
                return Err(HjError::Unreachable { op: OP, detail: format!("broken backtrace at step {s}") });
            }
            cur = p as usize;
            nodes.push(cur);
        }
        nodes.reverse();
        let dt = self.lattice.dt();
        Ok(DiscretePath {
            times: (0..nodes.len()).map(|i| i as f64 * dt).collect(),
            points: nodes.iter().map(|&i| self.lattice.position(i)).collect(),
            nodes,
            total_action: total,
        })
    }

    /// CSV export with columns `t,x,y,value` over admissible nodes of every kept slice.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_slices_csv(
            self.lattice,
            self.slices.iter().map(|(k, v)| (*k as f64 * self.lattice.dt(), v.as_slice())),
            1.0,
            out,
        )
    }
}

/// Shared CSV writer for slice tables; positions are multiplied by `pos_scale`.
pub(crate) fn write_slices_csv<'s, W: Write>(
    lattice: &SpaceTimeLattice,
    slices: impl Iterator<Item = (f64, &'s [f64])>,
    pos_scale: f64,
    out: W,
) -> Result<()> {
    let op = "kernel::write_csv";
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x", "y", "value"]).map_err(|e| HjError::Csv { op, source: e })?;
    for (t, vals) in slices {
        for (idx, v) in vals.iter().enumerate() {
            if !lattice.is_admissible(idx) {
                continue;
            }
            let p = lattice.position(idx);
            w.write_record([
                t.to_string(),
                (p[0] * pos_scale).to_string(),
                (p[1] * pos_scale).to_string(),
                v.to_string(),
            ])
            .map_err(|e| HjError::Csv { op, source: e })?;
        }
    }
    w.flush().map_err(|e| HjError::Io { op, source: e })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Extent, HoleShape, PerforatedDomain, Rect};

    #[test]
    fn stencil_counts_and_costs() {
        let d = PerforatedDomain::hole_free();
        let l = SpaceTimeLattice::build(&d, 0.1, Extent::Torus, 0.1, 3.0).unwrap();
        let m = HamiltonianModel::free().with_m0(3.0).unwrap();
        let s = Stencil::new(&l, &m, 1.0).unwrap();
        assert_eq!(s.offsets().len(), 29);
        assert_eq!(s.step_count(), 100 * 29);
        let z = l.node_at([0.0, 0.0]).unwrap();
        let pred = l.node_at([-0.1, 0.0]).unwrap();
        let c = s.step_cost(z, pred, &s.tilt_costs([0.0, 0.0])).unwrap();
        assert!((c - 0.05).abs() < 1e-15);
    }

    #[test]
    fn steps_avoid_holes() {
        let d = PerforatedDomain::standard(HoleShape::Disc { radius: 0.25 }).unwrap();
        let l = SpaceTimeLattice::build(&d, 0.05, Extent::Box(Rect::cells([0, 0], [0, 0])), 0.05, 3.0).unwrap();
        let m = HamiltonianModel::free().with_m0(3.0).unwrap();
        let s = Stencil::new(&l, &m, 1.0).unwrap();
        let z = l.node_at([-0.3, 0.0]).unwrap();
        let across = l.node_at([-0.25, 0.1]).unwrap();
        assert!(s.predecessors(z).any(|p| p == across));
        let a = l.node_at([0.0, 0.3]).unwrap();
        let b = l.node_at([0.0, 0.25]).unwrap();
        assert!(s.predecessors(a).any(|p| p == b));
        for z in 0..l.len() {
            for p in s.predecessors(z) {
                assert!(l.is_admissible(p) && l.is_admissible(z));
                let (a, b) = (l.position(p), l.position(z));
                assert!(d.contains([(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]));
            }
        }
    }

    #[test]
    fn straight_line_in_free_space() {
        let d = PerforatedDomain::hole_free();
        let l = SpaceTimeLattice::build(&d, 0.1, Extent::Box(Rect::cells([-1, -1], [2, 1])), 0.1, 3.0).unwrap();
        let m = HamiltonianModel::free().with_m0(3.0).unwrap();
        let s = Stencil::new(&l, &m, 1.0).unwrap();
        let src = l.node_at([0.0, 0.0]).unwrap();
        let mut init = vec![f64::INFINITY; l.len()];
        init[src] = 0.0;
        let f = propagate(&s, init, 10, &Propagation { keep_parents: true, ..Default::default() });
        let sink = l.node_at([1.0, 0.0]).unwrap();
        assert!((f.value(sink) - 0.5).abs() < 1e-12);
        let path = f.optimal_path(sink).unwrap();
        assert_eq!(path.points.len(), 11);
        assert!(path.points.windows(2).all(|w| w[1][0] > w[0][0]));
        assert!((path.max_speed() - 1.0).abs() < 1e-9);
        assert_eq!(f.value(src), 0.0);
    }
}
