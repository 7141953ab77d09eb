//! Periodically perforated planar domains.
//!
//! A domain is the plane minus integer translates of one hole `D` (scaled by
//! `eta`), with an optional defect set `I` of cells whose hole is missing.
//! Everything here works in cell units: the hole of cell `m ∈ ℤ²` is
//! centred at `m`, and the cell itself is `m + [-1/2, 1/2]²`.

mod lattice;

pub use lattice::{Extent, Rect, SpaceTimeLattice};

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HjError, Result};

/// Points at signed depth below this are treated as lying on the hole boundary.
pub(crate) const BOUNDARY_EPS: f64 = 1e-12;

/// Shape of the reference hole, centred at the cell centre.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HoleShape {
    /// No hole at all: the unperforated plane.
    None,
    Disc {
        radius: f64,
    },
    Square {
        half_width: f64,
    },
}

impl HoleShape {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            HoleShape::None => true,
            HoleShape::Disc { radius } => radius > 0.0 && radius < 0.5,
            HoleShape::Square { half_width } => half_width > 0.0 && half_width < 0.5,
        };
        if ok {
            Ok(())
        } else {
            Err(HjError::invalid(
                "geometry::HoleShape",
                format!("{self:?}: hole closure must lie strictly inside the open unit cell"),
            ))
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, HoleShape::None)
    }

    pub fn scaled(&self, eta: f64) -> HoleShape {
        match *self {
            HoleShape::None => HoleShape::None,
            HoleShape::Disc { radius } => HoleShape::Disc { radius: radius * eta },
            HoleShape::Square { half_width } => HoleShape::Square { half_width: half_width * eta },
        }
    }

    /// Signed depth of a cell-local offset `d` from the centre: positive
    /// inside the hole, zero on its boundary, negative outside.
    #[inline]
    pub fn depth(&self, d: [f64; 2]) -> f64 {
        match *self {
            HoleShape::None => f64::NEG_INFINITY,
            HoleShape::Disc { radius } => radius - d[0].hypot(d[1]),
            HoleShape::Square { half_width } => half_width - d[0].abs().max(d[1].abs()),
        }
    }

    /// Euclidean distance from `d` to the hole boundary.
    pub fn boundary_distance(&self, d: [f64; 2]) -> f64 {
        match *self {
            HoleShape::None => f64::INFINITY,
            HoleShape::Disc { radius } => (radius - d[0].hypot(d[1])).abs(),
            HoleShape::Square { half_width } => {
                let ex = d[0].abs() - half_width;
                let ey = d[1].abs() - half_width;
                if ex <= 0.0 && ey <= 0.0 {
                    -ex.max(ey)
                } else {
                    ex.max(0.0).hypot(ey.max(0.0))
                }
            }
        }
    }

    /// Smallest geometric feature a lattice must resolve: the hole diameter
    /// or the corridor left between neighbouring holes, whichever is smaller.
    pub fn feature_size(&self) -> f64 {
        let diam = match *self {
            HoleShape::None => return f64::INFINITY,
            HoleShape::Disc { radius } => 2.0 * radius,
            HoleShape::Square { half_width } => 2.0 * half_width,
        };
        diam.min(1.0 - diam)
    }

    pub fn perimeter(&self) -> f64 {
        match *self {
            HoleShape::None => 0.0,
            HoleShape::Disc { radius } => 2.0 * PI * radius,
            HoleShape::Square { half_width } => 8.0 * half_width,
        }
    }

    /// Boundary point at arc length `s ∈ [0, perimeter)`, counter-clockwise.
    /// Discs start at angle 0; squares start at the corner (hw, -hw).
    pub fn boundary_point(&self, s: f64) -> [f64; 2] {
        match *self {
            HoleShape::None => [f64::NAN, f64::NAN],
            HoleShape::Disc { radius } => {
                let th = s / radius;
                [radius * th.cos(), radius * th.sin()]
            }
            HoleShape::Square { half_width: w } => {
                let side = 2.0 * w;
                let s = s.rem_euclid(4.0 * side);
                let (k, u) = ((s / side).floor() as i32, s % side);
                match k {
                    0 => [w, -w + u],
                    1 => [w - u, w],
                    2 => [-w, w - u],
                    _ => [-w + u, -w],
                }
            }
        }
    }
}

/// Cells whose hole is absent.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum DefectSpec {
    #[default]
    None,
    /// `I = {0}`.
    Singleton0,
    /// `I = {m e₁ : m ≥ 0}`.
    LineE1,
    /// `I = {m² e₁ : m ≥ 1}`.
    SquaresE1,
    Explicit(BTreeSet<[i64; 2]>),
}

impl DefectSpec {
    pub fn is_none(&self) -> bool {
        matches!(self, DefectSpec::None)
    }

    #[inline]
    pub fn contains(&self, m: [i64; 2]) -> bool {
        match self {
            DefectSpec::None => false,
            DefectSpec::Singleton0 => m == [0, 0],
            DefectSpec::LineE1 => m[1] == 0 && m[0] >= 0,
            DefectSpec::SquaresE1 => m[1] == 0 && m[0] >= 1 && is_square(m[0]),
            DefectSpec::Explicit(set) => set.contains(&m),
        }
    }
}

fn is_square(n: i64) -> bool {
    let r = (n as f64).sqrt().round() as i64;
    (r - 1..=r + 1).any(|q| q >= 0 && q * q == n)
}

/// `(|I ∩ [-k,k]²|, |I ∩ [-k,k]²| / k)`.
pub fn defect_count(defects: &DefectSpec, k: i64) -> Result<(usize, f64)> {
    if k < 1 {
        return Err(HjError::invalid("geometry::defect_count", format!("k = {k} must be >= 1")));
    }
    let count = match defects {
        DefectSpec::None => 0,
        DefectSpec::Singleton0 => 1,
        DefectSpec::LineE1 => (k + 1) as usize,
        DefectSpec::SquaresE1 => (1..).take_while(|m| m * m <= k).count(),
        DefectSpec::Explicit(set) => set.iter().filter(|m| m[0].abs() <= k && m[1].abs() <= k).count(),
    };
    Ok((count, count as f64 / k as f64))
}

/// Where a point sits relative to the perforations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    /// Strictly inside the hole of the given cell.
    Exterior([i64; 2]),
    Boundary,
    Interior,
}

/// `Ω^η` (or `W` when defects are present).
#[derive(Clone, Debug, PartialEq)]
pub struct PerforatedDomain {
    pub hole: HoleShape,
    pub eta: f64,
    pub defects: DefectSpec,
}

impl PerforatedDomain {
    pub fn new(hole: HoleShape, eta: f64, defects: DefectSpec) -> Result<Self> {
        hole.validate()?;
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(HjError::invalid("geometry::PerforatedDomain", format!("eta = {eta} must lie in (0, 1]")));
        }
        Ok(Self { hole, eta, defects })
    }

    pub fn standard(hole: HoleShape) -> Result<Self> {
        Self::new(hole, 1.0, DefectSpec::None)
    }

    pub fn hole_free() -> Self {
        Self { hole: HoleShape::None, eta: 1.0, defects: DefectSpec::None }
    }

    /// The same domain with every hole filled in.
    pub fn without_holes(&self) -> Self {
        Self::hole_free()
    }

    /// Same holes, different defect set.
    pub fn with_defects(&self, defects: DefectSpec) -> Self {
        Self { defects, ..self.clone() }
    }

    /// Hole actually cut out of each cell (`η·D`).
    pub fn effective_hole(&self) -> HoleShape {
        self.hole.scaled(self.eta)
    }

    pub fn has_holes(&self) -> bool {
        !self.hole.is_none()
    }

    #[inline]
    pub fn hole_present(&self, m: [i64; 2]) -> bool {
        !self.hole.is_none() && !self.defects.contains(m)
    }

    #[inline]
    fn locate(x: [f64; 2]) -> ([i64; 2], [f64; 2]) {
        let m = [x[0].round(), x[1].round()];
        ([m[0] as i64, m[1] as i64], [x[0] - m[0], x[1] - m[1]])
    }

    /// Membership in the closed domain; hole boundaries count as inside.
    #[inline]
    pub fn contains(&self, x: [f64; 2]) -> bool {
        if self.hole.is_none() {
            return true;
        }
        let (m, d) = Self::locate(x);
        !(self.hole_present(m) && self.effective_hole().depth(d) > BOUNDARY_EPS)
    }

    pub fn classify(&self, x: [f64; 2]) -> Classification {
        self.classify_with_tolerance(x, 1e-9)
    }

    pub fn classify_with_tolerance(&self, x: [f64; 2], tol: f64) -> Classification {
        let (m, d) = Self::locate(x);
        if !self.hole_present(m) {
            return Classification::Interior;
        }
        let hole = self.effective_hole();
        if hole.boundary_distance(d) <= tol {
            Classification::Boundary
        } else if hole.depth(d) > 0.0 {
            Classification::Exterior(m)
        } else {
            Classification::Interior
        }
    }

    /// Largest ratio of boundary arc length to chord length over `n_pairs`
    /// random pairs on one hole boundary.
    pub fn boundary_detour_ratio(&self, n_pairs: usize, seed: u64) -> Result<f64> {
        let hole = self.effective_hole();
        if hole.is_none() || n_pairs == 0 {
            return Err(HjError::invalid("geometry::boundary_detour_ratio", "needs a hole and at least one pair"));
        }
        let per = hole.perimeter();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 1.0f64;
        for _ in 0..n_pairs {
            let (a, b) = (rng.gen::<f64>() * per, rng.gen::<f64>() * per);
            if let Some(r) = detour_ratio_pair(&hole, a, b) {
                worst = worst.max(r);
            }
        }
        Ok(worst)
    }
}

/// Arc/chord ratio between the boundary points at arc positions `a` and `b`.
/// `None` when the points coincide.
pub fn detour_ratio_pair(hole: &HoleShape, a: f64, b: f64) -> Option<f64> {
    let per = hole.perimeter();
    let gap = (a - b).rem_euclid(per);
    let arc = gap.min(per - gap);
    let (p, q) = (hole.boundary_point(a), hole.boundary_point(b));
    let chord = (p[0] - q[0]).hypot(p[1] - q[1]);
    (chord > 1e-12).then(|| arc / chord)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc() -> PerforatedDomain {
        PerforatedDomain::standard(HoleShape::Disc { radius: 0.25 }).unwrap()
    }

    #[test]
    fn membership_examples() {
        let d = disc();
        assert!(!d.contains([0.0, 0.0]));
        assert!(d.contains([0.5, 0.5]));
        assert!(d.contains([0.25, 0.0]));
        let w = d.with_defects(DefectSpec::Singleton0);
        assert!(w.contains([0.0, 0.0]));
        assert!(!w.contains([1.0, 0.0]));
    }

    #[test]
    fn classification_examples() {
        let d = disc();
        assert_eq!(d.classify([0.25, 0.0]), Classification::Boundary);
        assert_eq!(d.classify([0.4, 0.4]), Classification::Interior);
        assert_eq!(d.classify([0.1, 0.0]), Classification::Exterior([0, 0]));
        assert_eq!(d.classify([3.1, -2.0]), Classification::Exterior([3, -2]));
    }

    #[test]
    fn defect_counts() {
        assert_eq!(defect_count(&DefectSpec::SquaresE1, 9).unwrap(), (3, 1.0 / 3.0));
        assert_eq!(defect_count(&DefectSpec::LineE1, 5).unwrap(), (6, 1.2));
        let (c, w) = defect_count(&DefectSpec::SquaresE1, 10_000).unwrap();
        assert_eq!(c, 100);
        assert!((w - 0.01).abs() < 1e-15);
        assert!(defect_count(&DefectSpec::None, 0).is_err());
    }

    #[test]
    fn squares_membership() {
        let s = DefectSpec::SquaresE1;
        let hits: Vec<i64> = (-3..50).filter(|&m| s.contains([m, 0])).collect();
        assert_eq!(hits, vec![1, 4, 9, 16, 25, 36, 49]);
        assert!(!s.contains([4, 1]));
    }

    #[test]
    fn detour_ratios() {
        let disc = HoleShape::Disc { radius: 0.25 };
        let per = disc.perimeter();
        let anti = detour_ratio_pair(&disc, 0.0, per / 2.0).unwrap();
        assert!((anti - PI / 2.0).abs() < 1e-12);
        let near = detour_ratio_pair(&disc, 0.1, 0.1 + 1e-6).unwrap();
        assert!((near - 1.0).abs() < 1e-9);
        let sq = HoleShape::Square { half_width: 0.3 };
        let side = detour_ratio_pair(&sq, 0.0, 0.6).unwrap();
        assert!((side - 1.0).abs() < 1e-12);
        let r = disc_domain_ratio();
        assert!(r > 1.0 && r <= PI / 2.0 + 1e-12);
    }

    fn disc_domain_ratio() -> f64 {
        disc().boundary_detour_ratio(500, 7).unwrap()
    }

    #[test]
    fn feature_sizes() {
        assert_eq!(HoleShape::Disc { radius: 0.25 }.feature_size(), 0.5);
        let sq = HoleShape::Square { half_width: 0.46 }.feature_size();
        assert!((sq - 0.08).abs() < 1e-12);
        assert!(HoleShape::Disc { radius: 0.5 }.validate().is_err());
    }
}
