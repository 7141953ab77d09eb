//! Uniform space lattices over a perforated domain.
//!
//! Nodes sit at integer multiples of `h = 1/n`, so every cell carries the
//! same node pattern and per-node data can be tabulated by residue
//! `(I mod n, J mod n)`.

use std::io::Write;

use super::{PerforatedDomain, BOUNDARY_EPS};
use crate::error::{HjError, Result};

/// Axis-aligned rectangle in cell units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Self { min, max }
    }

    /// Union of the closed cells `m + [-1/2,1/2]²` for `lo ≤ m ≤ hi`.
    pub fn cells(lo: [i64; 2], hi: [i64; 2]) -> Self {
        Self { min: [lo[0] as f64 - 0.5, lo[1] as f64 - 0.5], max: [hi[0] as f64 + 0.5, hi[1] as f64 + 0.5] }
    }

    /// Smallest cell-aligned rectangle containing all `points` plus `margin` cells.
    pub fn around(points: &[[f64; 2]], margin: i64) -> Self {
        let mut lo = [i64::MAX; 2];
        let mut hi = [i64::MIN; 2];
        for p in points {
            for a in 0..2 {
                let m = p[a].round() as i64;
                lo[a] = lo[a].min(m - margin);
                hi[a] = hi[a].max(m + margin);
            }
        }
        Self::cells(lo, hi)
    }
}

/// Spatial extent of a lattice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Extent {
    /// Bounded box; paths may not leave it.
    Box(Rect),
    /// One periodic cell `[-1/2, 1/2)²` with wrap-around.
    Torus,
}

/// Admissible nodes of a domain together with the time step used by the DP.
#[derive(Clone, Debug)]
pub struct SpaceTimeLattice {
    domain: PerforatedDomain,
    h: f64,
    n: usize,
    dt: f64,
    extent: Extent,
    origin: [i64; 2],
    nx: usize,
    ny: usize,
    admissible: Vec<bool>,
    boundary: Vec<bool>,
}

fn int_multiple(x: f64, n: usize, what: &str) -> Result<i64> {
    let k = (x * n as f64).round();
    if (k - x * n as f64).abs() > 1e-7 {
        return Err(HjError::invalid(
            "geometry::build_lattice",
            format!("{what} = {x} is not a multiple of h = 1/{n}"),
        ));
    }
    Ok(k as i64)
}

impl SpaceTimeLattice {
    /// Builds the admissible node set.
    ///
    /// `max_speed` is the velocity bound `M₀`; the stencil must reach at
    /// least two nodes per step (`dt·M₀ ≥ 2h`).
    pub fn build(domain: &PerforatedDomain, h: f64, extent: Extent, dt: f64, max_speed: f64) -> Result<Self> {
        const OP: &str = "geometry::build_lattice";
        if !(h > 0.0 && h <= 1.0) || !(dt > 0.0) {
            return Err(HjError::invalid(OP, format!("need 0 < h <= 1 and dt > 0, got h={h}, dt={dt}")));
        }
        let n = (1.0 / h).round() as usize;
        if (n as f64 * h - 1.0).abs() > 1e-9 {
            return Err(HjError::invalid(OP, format!("1/h must be an integer, got h={h}")));
        }
        let feature = domain.effective_hole().feature_size();
        if h > feature / 4.0 + 1e-12 {
            return Err(HjError::UnresolvedHole {
                op: OP,
                detail: format!(
                    "h = {h} exceeds feature/4 = {:.6} for hole {:?} at eta = {}",
                    feature / 4.0,
                    domain.hole,
                    domain.eta
                ),
            });
        }
        if dt * max_speed < 2.0 * h - 1e-12 {
            return Err(HjError::UnreachableTimeStep {
                op: OP,
                detail: format!("dt*M0 = {} < 2h = {}", dt * max_speed, 2.0 * h),
            });
        }
        let (origin, nx, ny) = match extent {
            Extent::Torus => {
                if !domain.defects.is_none() {
                    return Err(HjError::invalid(OP, "a periodic cell cannot carry defects"));
                }
                let o = -((n / 2) as i64);
                ([o, o], n, n)
            }
            Extent::Box(r) => {
                let lo = [int_multiple(r.min[0], n, "bbox min x")?, int_multiple(r.min[1], n, "bbox min y")?];
                let hi = [int_multiple(r.max[0], n, "bbox max x")?, int_multiple(r.max[1], n, "bbox max y")?];
                if hi[0] < lo[0] || hi[1] < lo[1] {
                    return Err(HjError::invalid(OP, format!("empty bbox {r:?}")));
                }
                (lo, (hi[0] - lo[0] + 1) as usize, (hi[1] - lo[1] + 1) as usize)
            }
        };
        let mut lat = Self {
            domain: domain.clone(),
            h,
            n,
            dt,
            extent,
            origin,
            nx,
            ny,
            admissible: vec![false; nx * ny],
            boundary: vec![false; nx * ny],
        };
        let hole = domain.effective_hole();
        for idx in 0..nx * ny {
            let x = lat.position(idx);
            let ok = domain.contains(x);
            lat.admissible[idx] = ok;
            if ok && domain.has_holes() {
                let m = [x[0].round(), x[1].round()];
                let mi = [m[0] as i64, m[1] as i64];
                lat.boundary[idx] = domain.hole_present(mi)
                    && hole.boundary_distance([x[0] - m[0], x[1] - m[1]]) <= h / 2.0 + BOUNDARY_EPS;
            }
        }
        Ok(lat)
    }

    pub fn domain(&self) -> &PerforatedDomain {
        &self.domain
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    /// Nodes per unit length (`1/h`).
    pub fn nodes_per_cell(&self) -> usize {
        self.n
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn extent(&self) -> Extent {
        self.extent
    }
    pub fn is_periodic(&self) -> bool {
        matches!(self.extent, Extent::Torus)
    }
    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }
    /// Total grid nodes, admissible or not.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn admissible_count(&self) -> usize {
        self.admissible.iter().filter(|&&a| a).count()
    }
    pub fn admissible(&self) -> &[bool] {
        &self.admissible
    }
    pub fn boundary(&self) -> &[bool] {
        &self.boundary
    }
    #[inline]
    pub fn is_admissible(&self, idx: usize) -> bool {
        self.admissible[idx]
    }
    #[inline]
    pub fn is_boundary(&self, idx: usize) -> bool {
        self.boundary[idx]
    }

    #[inline]
    pub fn grid_coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    /// Integer lattice coordinates `x / h`.
    #[inline]
    pub fn global(&self, idx: usize) -> [i64; 2] {
        let (ix, iy) = self.grid_coords(idx);
        [self.origin[0] + ix as i64, self.origin[1] + iy as i64]
    }

    #[inline]
    pub fn position(&self, idx: usize) -> [f64; 2] {
        let g = self.global(idx);
        [g[0] as f64 / self.n as f64, g[1] as f64 / self.n as f64]
    }

    /// Residue class `(I mod n) + n·(J mod n)` shared by all translates of a node.
    #[inline]
    pub fn residue(&self, idx: usize) -> usize {
        let g = self.global(idx);
        let n = self.n as i64;
        (g[0].rem_euclid(n) + n * g[1].rem_euclid(n)) as usize
    }

    /// Node whose position is closest to `x` (wrapping on the torus).
    pub fn node_at(&self, x: [f64; 2]) -> Option<usize> {
        let gi = [(x[0] * self.n as f64).round() as i64, (x[1] * self.n as f64).round() as i64];
        self.node_from_global(gi)
    }

    pub fn node_from_global(&self, g: [i64; 2]) -> Option<usize> {
        let mut c = [g[0] - self.origin[0], g[1] - self.origin[1]];
        if self.is_periodic() {
            let n = self.n as i64;
            c = [c[0].rem_euclid(n), c[1].rem_euclid(n)];
        }
        if c[0] < 0 || c[1] < 0 || c[0] >= self.nx as i64 || c[1] >= self.ny as i64 {
            return None;
        }
        Some(self.index(c[0] as usize, c[1] as usize))
    }

    /// Nearest admissible node to `x` (ties go to the smaller index).
    pub fn nearest_admissible(&self, x: [f64; 2]) -> Option<usize> {
        let n = self.n as f64;
        let c = [(x[0] * n).round() as i64, (x[1] * n).round() as i64];
        let max_r = self.nx.max(self.ny) as i64;
        let mut best: Option<(f64, usize)> = None;
        let mut limit = max_r;
        let mut r = 0;
        while r <= limit {
            for dy in -r..=r {
                for dx in -r..=r {
                    if dx.abs().max(dy.abs()) != r {
                        continue;
                    }
                    let g = [c[0] + dx, c[1] + dy];
                    let Some(idx) = self.node_from_global(g) else { continue };
                    if !self.admissible[idx] {
                        continue;
                    }
                    let d = (g[0] as f64 / n - x[0]).hypot(g[1] as f64 / n - x[1]);
                    if best.is_none_or(|(bd, bi)| d < bd || (d == bd && idx < bi)) {
                        best = Some((d, idx));
                    }
                }
            }
            if best.is_some() && limit == max_r {
                // Anything on a farther ring sits at least (ring - 1/2)·h away.
                limit = ((r as f64 + 0.5) * std::f64::consts::SQRT_2).ceil() as i64 + 1;
            }
            r += 1;
        }
        best.map(|(_, i)| i)
    }

    /// Nodes inside the closed square `center + [-half, half]²`, in index order.
    pub fn nodes_in_square(&self, center: [f64; 2], half: f64) -> Vec<usize> {
        let n = self.n as f64;
        let lo = [((center[0] - half) * n - 1e-7).ceil() as i64, ((center[1] - half) * n - 1e-7).ceil() as i64];
        let hi = [((center[0] + half) * n + 1e-7).floor() as i64, ((center[1] + half) * n + 1e-7).floor() as i64];
        let mut out = Vec::new();
        for gy in lo[1]..=hi[1] {
            for gx in lo[0]..=hi[0] {
                if let Some(idx) = self.node_from_global([gx, gy]) {
                    out.push(idx);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Anchor nodes of the closed unit cell `x + [-1/2,1/2]²`: its boundary
    /// nodes. Without holes there is no boundary and the anchor is the node
    /// nearest `x` itself, so that `m*` reduces to `m`.
    pub fn anchors(&self, x: [f64; 2]) -> Vec<usize> {
        if self.domain.has_holes() {
            self.nodes_in_square(x, 0.5).into_iter().filter(|&i| self.boundary[i]).collect()
        } else {
            self.node_at(x).filter(|&i| self.admissible[i]).into_iter().collect()
        }
    }

    /// CSV export with columns `x,y,admissible,boundary`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let op = "geometry::SpaceTimeLattice::write_csv";
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "admissible", "boundary"]).map_err(|e| HjError::Csv { op, source: e })?;
        for idx in 0..self.len() {
            let p = self.position(idx);
            w.write_record([
                p[0].to_string(),
                p[1].to_string(),
                (self.admissible[idx] as u8).to_string(),
                (self.boundary[idx] as u8).to_string(),
            ])
            .map_err(|e| HjError::Csv { op, source: e })?;
        }
        w.flush().map_err(|e| HjError::Io { op, source: e })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DefectSpec, HoleShape};

    #[test]
    fn hole_free_unit_square() {
        let d = PerforatedDomain::hole_free();
        let l = SpaceTimeLattice::build(&d, 0.1, Extent::Box(Rect::new([0.0, 0.0], [1.0, 1.0])), 0.1, 3.0).unwrap();
        assert_eq!(l.shape(), (11, 11));
        assert_eq!(l.admissible_count(), 121);
        assert!(l.boundary().iter().all(|&b| !b));
    }

    #[test]
    fn disc_cell_count_matches_enumeration() {
        let d = PerforatedDomain::standard(HoleShape::Disc { radius: 0.25 }).unwrap();
        let l = SpaceTimeLattice::build(&d, 0.05, Extent::Box(Rect::cells([0, 0], [0, 0])), 0.05, 3.0).unwrap();
        let mut inside = 0;
        for i in -10..=10i32 {
            for j in -10..=10i32 {
                let (x, y) = (i as f64 * 0.05, j as f64 * 0.05);
                if (x * x + y * y).sqrt() < 0.25 - 1e-12 {
                    inside += 1;
                }
            }
        }
        assert_eq!(l.len(), 21 * 21);
        assert_eq!(l.admissible_count(), 21 * 21 - inside);
    }

    #[test]
    fn defect_cell_keeps_hole_nodes() {
        let d = PerforatedDomain::new(HoleShape::Disc { radius: 0.25 }, 1.0, DefectSpec::Singleton0).unwrap();
        let l = SpaceTimeLattice::build(&d, 0.05, Extent::Box(Rect::cells([0, 0], [1, 0])), 0.05, 3.0).unwrap();
        assert!(l.is_admissible(l.node_at([0.0, 0.0]).unwrap()));
        assert!(!l.is_admissible(l.node_at([1.0, 0.0]).unwrap()));
        assert!(!l.is_boundary(l.node_at([0.25, 0.0]).unwrap()));
        assert!(l.is_boundary(l.node_at([1.25, 0.0]).unwrap()));
    }

    #[test]
    fn preconditions() {
        let d = PerforatedDomain::new(HoleShape::Disc { radius: 0.25 }, 0.1, DefectSpec::None).unwrap();
        let e = SpaceTimeLattice::build(&d, 0.05, Extent::Torus, 0.05, 3.0).unwrap_err();
        assert!(e.to_string().contains("unresolved hole"));
        let d1 = PerforatedDomain::hole_free();
        let e = SpaceTimeLattice::build(&d1, 0.1, Extent::Torus, 0.05, 3.0).unwrap_err();
        assert!(matches!(e, HjError::UnreachableTimeStep { .. }));
        assert!(SpaceTimeLattice::build(&d1, 0.3, Extent::Torus, 0.3, 3.0).is_err());
    }

    #[test]
    fn torus_wraps() {
        let d = PerforatedDomain::standard(HoleShape::Disc { radius: 0.25 }).unwrap();
        let l = SpaceTimeLattice::build(&d, 0.05, Extent::Torus, 0.05, 3.0).unwrap();
        assert_eq!(l.shape(), (20, 20));
        assert_eq!(l.node_at([0.5, 0.5]), Some(0));
        assert_eq!(l.node_at([1.3, -0.2]), l.node_at([0.3, -0.2]));
        assert_eq!(l.residue(l.node_at([0.3, -0.2]).unwrap()), 6 + 20 * 16);
    }

    #[test]
    fn nearest_admissible_leaves_hole() {
        let d = PerforatedDomain::standard(HoleShape::Disc { radius: 0.25 }).unwrap();
        let l = SpaceTimeLattice::build(&d, 0.05, Extent::Box(Rect::cells([-1, -1], [1, 1])), 0.05, 3.0).unwrap();
        let i = l.nearest_admissible([0.0, 0.1]).unwrap();
        let p = l.position(i);
        assert!(d.contains(p));
        assert!((p[0] - 0.0).abs() < 1e-12 && (p[1] - 0.25).abs() < 1e-12);
    }
}
