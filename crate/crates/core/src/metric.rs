//! Constrained action costs `m`, `m*` and `m^d`.
//!
//! `m(t,x,y)` is the least action of a lattice path from `x` to `y` in time
//! `t` that never leaves the closed domain; `m*` additionally lets both
//! endpoints slide to any boundary node of the unit cell around them; `m^d`
//! is `m` on a defect domain `W`. All three are one call to the DP kernel
//! with different source/sink sets.

use crate::error::{HjError, Result};
use crate::geometry::SpaceTimeLattice;
use crate::hamiltonians::HamiltonianModel;
use crate::kernel::{propagate, CostField, Propagation, Stencil};

/// Number of DP steps covering `t`, which must be a multiple of `dt`.
pub fn steps_for(lattice: &SpaceTimeLattice, t: f64, op: &'static str) -> Result<usize> {
    let k = (t / lattice.dt()).round();
    if t < 0.0 || (k * lattice.dt() - t).abs() > 1e-9 * t.max(1.0) {
        return Err(HjError::invalid(op, format!("t = {t} is not a nonnegative multiple of dt = {}", lattice.dt())));
    }
    Ok(k as usize)
}

/// Nearest admissible node to `x`, or `Unreachable` when the lattice has none.
pub fn snap(lattice: &SpaceTimeLattice, x: [f64; 2], op: &'static str) -> Result<usize> {
    lattice
        .nearest_admissible(x)
        .ok_or_else(|| HjError::Unreachable { op, detail: format!("no admissible node near {x:?}") })
}

/// A stencil bound to one lattice, reusable across many cost queries.
pub struct MetricSolver<'a> {
    stencil: Stencil<'a>,
}

impl<'a> MetricSolver<'a> {
    pub fn new(model: &HamiltonianModel, lattice: &'a SpaceTimeLattice) -> Result<Self> {
        Ok(Self { stencil: Stencil::new(lattice, model, 1.0)? })
    }

    pub fn stencil(&self) -> &Stencil<'a> {
        &self.stencil
    }

    pub fn lattice(&self) -> &'a SpaceTimeLattice {
        self.stencil.lattice()
    }

    /// Field of least actions from the zero-cost source nodes `sources`.
    pub fn field(&self, sources: &[usize], n_steps: usize, opts: &Propagation) -> CostField<'a> {
        let mut init = vec![f64::INFINITY; self.lattice().len()];
        for &s in sources {
            init[s] = 0.0;
        }
        propagate(&self.stencil, init, n_steps, opts)
    }

    /// Anchor nodes of the closed cell around `x`.
    pub fn anchors(&self, x: [f64; 2], op: &'static str) -> Result<Vec<usize>> {
        let a = self.lattice().anchors(x);
        if a.is_empty() {
            return Err(HjError::NoAnchor { op, detail: format!("no boundary node in the cell around {x:?}") });
        }
        Ok(a)
    }

    pub fn cost_m(&self, t: f64, x: [f64; 2], y: [f64; 2]) -> Result<f64> {
        const OP: &str = "metric::cost_m";
        let n = steps_for(self.lattice(), t, OP)?;
        let (xs, ys) = (snap(self.lattice(), x, OP)?, snap(self.lattice(), y, OP)?);
        let v = self.field(&[xs], n, &Propagation::default()).value(ys);
        finite(v, OP, x, y)
    }

    pub fn cost_mstar(&self, t: f64, x: [f64; 2], y: [f64; 2]) -> Result<f64> {
        const OP: &str = "metric::cost_mstar";
        let n = steps_for(self.lattice(), t, OP)?;
        let src = self.anchors(x, OP)?;
        let sinks = self.anchors(y, OP)?;
        let f = self.field(&src, n, &Propagation::default());
        let v = sinks.iter().map(|&s| f.value(s)).fold(f64::INFINITY, f64::min);
        finite(v, OP, x, y)
    }
}

fn finite(v: f64, op: &'static str, x: [f64; 2], y: [f64; 2]) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(HjError::Unreachable { op, detail: format!("no admissible lattice path from {x:?} to {y:?}") })
    }
}

/// `m(t, x, y)` on the lattice's domain; endpoints snap to the nearest admissible node.
pub fn cost_m(model: &HamiltonianModel, lattice: &SpaceTimeLattice, t: f64, x: [f64; 2], y: [f64; 2]) -> Result<f64> {
    MetricSolver::new(model, lattice)?.cost_m(t, x, y)
}

/// `m*(t, x, y)`: minimum of `m` over boundary anchors in the cells around `x` and `y`.
pub fn cost_mstar(
    model: &HamiltonianModel,
    lattice: &SpaceTimeLattice,
    t: f64,
    x: [f64; 2],
    y: [f64; 2],
) -> Result<f64> {
    MetricSolver::new(model, lattice)?.cost_mstar(t, x, y)
}

/// `m^d(t, x, y)`: `m` over a lattice built on a defect domain `W`.
pub fn cost_md(
    model: &HamiltonianModel,
    lattice_w: &SpaceTimeLattice,
    t: f64,
    x: [f64; 2],
    y: [f64; 2],
) -> Result<f64> {
    MetricSolver::new(model, lattice_w)?.cost_m(t, x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DefectSpec, Extent, HoleShape, PerforatedDomain, Rect};

    fn free() -> HamiltonianModel {
        HamiltonianModel::free().with_m0(3.0).unwrap()
    }

    fn disc_box(defects: DefectSpec, h: f64) -> SpaceTimeLattice {
        let d = PerforatedDomain::new(HoleShape::Disc { radius: 0.25 }, 1.0, defects).unwrap();
        SpaceTimeLattice::build(&d, h, Extent::Box(Rect::cells([-2, -2], [2, 2])), h, 3.0).unwrap()
    }

    #[test]
    fn rest_costs_nothing() {
        let l = disc_box(DefectSpec::None, 0.05);
        assert_eq!(cost_m(&free(), &l, 1.0, [0.5, 0.5], [0.5, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn free_space_straight_line() {
        let d = PerforatedDomain::hole_free();
        let l = SpaceTimeLattice::build(&d, 0.05, Extent::Box(Rect::cells([-1, -1], [2, 1])), 0.05, 3.0).unwrap();
        let v = cost_m(&free(), &l, 1.0, [0.0, 0.0], [1.0, 0.0]).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn hole_forces_detour() {
        let l = disc_box(DefectSpec::None, 0.05);
        let v = cost_m(&free(), &l, 1.0, [-0.5, 0.0], [0.5, 0.0]).unwrap();
        assert!(v > 0.5);
        let w = disc_box(DefectSpec::LineE1, 0.05);
        let vd = cost_md(&free(), &w, 1.0, [-0.5, 0.0], [0.5, 0.0]).unwrap();
        assert!((vd - 0.5).abs() < 1e-12);
        assert!(vd <= v);
    }

    #[test]
    fn defect_free_md_is_m() {
        let l = disc_box(DefectSpec::None, 0.05);
        for (x, y) in [([0.5, 0.5], [1.5, -0.3]), ([-0.5, 0.0], [0.5, 0.0])] {
            assert_eq!(cost_md(&free(), &l, 1.0, x, y).unwrap(), cost_m(&free(), &l, 1.0, x, y).unwrap());
        }
    }

    #[test]
    fn rest_in_defect_hole() {
        let w = disc_box(DefectSpec::Singleton0, 0.05);
        assert_eq!(cost_md(&free(), &w, 2.0, [0.0, 0.0], [0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn mstar_anchors_and_errors() {
        let l = disc_box(DefectSpec::None, 0.05);
        let v = cost_mstar(&free(), &l, 2.0, [0.0, 0.0], [0.0, 0.0]).unwrap();
        assert_eq!(v, 0.0);
        let w = disc_box(DefectSpec::Singleton0, 0.05);
        let e = cost_mstar(&free(), &w, 1.0, [0.0, 0.0], [1.0, 0.0]).unwrap_err();
        assert!(matches!(e, HjError::NoAnchor { .. }));
        assert!(cost_m(&free(), &l, 0.123, [0.5, 0.5], [0.5, 0.5]).is_err());
    }
}
