//! Convex Hamiltonian families and their closed-form Lagrangians.
//!
//! Every family is radial in `p` with a position-dependent coefficient:
//! `H(y,p) = a(y)|p|²/2 + V(y)` for `|p| ≤ R`, `R = 2C₀ + 1`. Beyond `R`
//! the profile is bent back onto `|p|²/2` through a convex C¹ blend so that
//! `|p|²/2 − K₀ ≤ H ≤ |p|²/2 + K₀` holds globally. The duals of the blended
//! profiles are piecewise closed forms, so `eval_L` never optimizes.

use crate::error::{HjError, Result};
use crate::geometry::HoleShape;

/// Which convex family a model belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// `|p|²/2`.
    Free,
    /// `a(y)|p|²/2` with `a = 1` on the domain and `a = α` deep inside holes.
    KineticWeight,
    /// `|p|²/2 + V(y)` with a bump `V` supported in the holes.
    KineticPlusPotential,
    /// `a(y)|p|²/2` with `a(y) = 1 − |y₂|`, periodicized.
    StripeWeight,
}

/// A profile supported in the (periodic) holes, ramping in over width `rho`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HoleBump {
    pub hole: HoleShape,
    pub rho: f64,
}

impl HoleBump {
    /// Ramp value in `[0,1]`: 0 outside the hole, 1 deeper than `rho`.
    #[inline]
    pub fn ramp(&self, y: [f64; 2]) -> f64 {
        let d = [y[0] - y[0].round(), y[1] - y[1].round()];
        let depth = self.hole.depth(d);
        if depth <= 0.0 {
            0.0
        } else {
            smoothstep(depth / self.rho)
        }
    }
}

/// C¹ cubic smoothstep clamped to `[0,1]`.
#[inline]
pub fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

#[derive(Clone, Debug, PartialEq)]
enum Coefficient {
    One,
    Hole { alpha: f64, bump: HoleBump },
    Stripe,
}

/// A clamped convex Hamiltonian with its derived constants.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianModel {
    family: Family,
    coef: Coefficient,
    potential: Option<(f64, HoleBump)>,
    lip_g: f64,
    c0: f64,
    k0: f64,
    m0: f64,
}

/// Outcome of [`HamiltonianModel::check_a5`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct A5Report {
    pub max_abs_h0: f64,
    pub max_negative_min: f64,
    pub pass: bool,
}

const A5_TOL: f64 = 1e-12;

impl HamiltonianModel {
    fn build(family: Family, coef: Coefficient, potential: Option<(f64, HoleBump)>) -> Result<Self> {
        let mut m = Self { family, coef, potential, lip_g: 0.0, c0: 0.0, k0: 0.0, m0: 0.0 };
        m.rederive(None, None)?;
        Ok(m)
    }

    pub fn free() -> Self {
        Self::build(Family::Free, Coefficient::One, None).expect("free model is well formed")
    }

    /// `a = 1 + (α−1)·smoothstep(depth/ρ)` inside `hole`, 1 elsewhere.
    pub fn kinetic_weight(hole: HoleShape, alpha: f64, rho: f64) -> Result<Self> {
        if !(alpha >= 1.0) || !(rho > 0.0) {
            return Err(HjError::invalid("hamiltonians::kinetic_weight", "need alpha >= 1 and rho > 0"));
        }
        Self::build(Family::KineticWeight, Coefficient::Hole { alpha, bump: HoleBump { hole, rho } }, None)
    }

    /// `V = β·smoothstep(depth/ρ)` inside `hole`, 0 elsewhere.
    pub fn kinetic_plus_potential(hole: HoleShape, beta: f64, rho: f64) -> Result<Self> {
        if !(beta >= 0.0) || !(rho > 0.0) {
            return Err(HjError::invalid("hamiltonians::kinetic_plus_potential", "need beta >= 0 and rho > 0"));
        }
        Self::build(Family::KineticPlusPotential, Coefficient::One, Some((beta, HoleBump { hole, rho })))
    }

    pub fn stripe_weight() -> Self {
        Self::build(Family::StripeWeight, Coefficient::Stripe, None).expect("stripe model is well formed")
    }

    /// Re-derives `C₀`, `K₀`, `M₀` for initial data with Lipschitz constant `lip_g`.
    pub fn with_lip_g(mut self, lip_g: f64) -> Result<Self> {
        if !(lip_g >= 0.0) {
            return Err(HjError::invalid("hamiltonians::with_lip_g", format!("lip_g = {lip_g} < 0")));
        }
        self.lip_g = lip_g;
        self.rederive(None, None)?;
        Ok(self)
    }

    /// Overrides `C₀` (and hence the clamp radius and `K₀`); `M₀` is re-derived.
    pub fn with_c0(mut self, c0: f64) -> Result<Self> {
        if !(c0 > 0.0) {
            return Err(HjError::invalid("hamiltonians::with_c0", format!("C0 = {c0} must be positive")));
        }
        self.rederive(Some(c0), None)?;
        Ok(self)
    }

    /// Overrides the speed bound `M₀` used to size lattice stencils.
    pub fn with_m0(mut self, m0: f64) -> Result<Self> {
        if !(m0 > 0.0) {
            return Err(HjError::invalid("hamiltonians::with_m0", format!("M0 = {m0} must be positive")));
        }
        let c0 = self.c0;
        self.rederive(Some(c0), Some(m0))?;
        Ok(self)
    }

    fn rederive(&mut self, c0: Option<f64>, m0: Option<f64>) -> Result<()> {
        let (a_min, a_max) = self.coefficient_range();
        let v_max = self.max_potential();
        // a-priori gradient bound: the slope of g transported by the fastest
        // weight, plus the slope a potential well can add.
        self.c0 = c0.unwrap_or_else(|| self.lip_g * (a_max / a_min).sqrt() + (2.0 * v_max / a_min).sqrt() + 1.0);
        let r = self.clamp_radius();
        let weight_gap = |a: f64| if a >= 1.0 { a * (a - 1.0) * r * r / 2.0 } else { (1.0 - a) * r * r / 2.0 };
        self.k0 = weight_gap(a_min).max(weight_gap(a_max)) + v_max;
        self.m0 = match m0 {
            Some(m) => m,
            None => velocity_bound_from(self.k0, self.lip_g)?,
        };
        Ok(())
    }

    pub fn family(&self) -> Family {
        self.family
    }
    pub fn c0(&self) -> f64 {
        self.c0
    }
    pub fn k0(&self) -> f64 {
        self.k0
    }
    pub fn m0(&self) -> f64 {
        self.m0
    }
    pub fn lip_g(&self) -> f64 {
        self.lip_g
    }
    /// `R = 2C₀ + 1`: the family formula is exact for `|p| ≤ R`.
    pub fn clamp_radius(&self) -> f64 {
        2.0 * self.c0 + 1.0
    }

    /// `(min a, max a)` over all positions.
    pub fn coefficient_range(&self) -> (f64, f64) {
        match &self.coef {
            Coefficient::One => (1.0, 1.0),
            Coefficient::Hole { alpha, bump } => {
                if bump.hole.is_none() {
                    (1.0, 1.0)
                } else {
                    (1.0, *alpha)
                }
            }
            Coefficient::Stripe => (0.5, 1.0),
        }
    }

    pub fn max_potential(&self) -> f64 {
        match self.potential {
            Some((beta, bump)) if !bump.hole.is_none() => beta,
            _ => 0.0,
        }
    }

    /// Whether `min_p H(y,p) = H(y,0) = 0` holds by construction.
    pub fn declares_a5(&self) -> bool {
        self.max_potential() == 0.0
    }

    /// Whether `L(y,v) = L(y,-v)`; true for every supported family.
    pub fn is_even(&self) -> bool {
        true
    }

    #[inline]
    pub fn coefficient(&self, y: [f64; 2]) -> f64 {
        match &self.coef {
            Coefficient::One => 1.0,
            Coefficient::Hole { alpha, bump } => 1.0 + (alpha - 1.0) * bump.ramp(y),
            Coefficient::Stripe => 1.0 - (y[1] - y[1].round()).abs(),
        }
    }

    #[inline]
    pub fn potential(&self, y: [f64; 2]) -> f64 {
        match &self.potential {
            Some((beta, bump)) => beta * bump.ramp(y),
            None => 0.0,
        }
    }

    /// Unclamped family formula.
    #[inline]
    pub fn family_h(&self, y: [f64; 2], p: [f64; 2]) -> f64 {
        self.coefficient(y) * (p[0] * p[0] + p[1] * p[1]) / 2.0 + self.potential(y)
    }

    /// Clamped Hamiltonian.
    #[inline]
    pub fn eval_h(&self, y: [f64; 2], p: [f64; 2]) -> f64 {
        let a = self.coefficient(y);
        let s = p[0].hypot(p[1]);
        radial_h(a, self.clamp_radius(), s) + self.potential(y)
    }

    /// Closed-form Legendre dual of [`eval_h`](Self::eval_h).
    #[inline]
    pub fn eval_l(&self, y: [f64; 2], v: [f64; 2]) -> f64 {
        let a = self.coefficient(y);
        let w = v[0].hypot(v[1]);
        radial_l(a, self.clamp_radius(), w) - self.potential(y)
    }

    /// `max_p p·v − H(y,p)` over an `n_grid²` grid on `[-p_radius, p_radius]²`.
    pub fn legendre_oracle(&self, y: [f64; 2], v: [f64; 2], p_radius: f64, n_grid: usize) -> Result<f64> {
        if p_radius < self.clamp_radius() || n_grid < 64 {
            return Err(HjError::invalid(
                "hamiltonians::legendre_oracle",
                format!("need p_radius >= 2C0+1 = {} and n_grid >= 64", self.clamp_radius()),
            ));
        }
        let step = 2.0 * p_radius / (n_grid - 1) as f64;
        let mut best = f64::NEG_INFINITY;
        for j in 0..n_grid {
            let py = -p_radius + j as f64 * step;
            for i in 0..n_grid {
                let px = -p_radius + i as f64 * step;
                best = best.max(px * v[0] + py * v[1] - self.eval_h(y, [px, py]));
            }
        }
        Ok(best)
    }

    /// Worst-case gap between the oracle's grid maximum and the true supremum.
    pub fn oracle_tolerance(&self, p_radius: f64, n_grid: usize) -> f64 {
        let step = 2.0 * p_radius / (n_grid - 1) as f64;
        let (_, a_max) = self.coefficient_range();
        // the maximizer is at most step/√2 from a node; H has curvature ≤ max(a, 1)
        a_max.max(1.0) * step * step / 4.0 + 1e-12
    }

    /// Samples `H(y,0)` and `min_p H(y,p)` over a p-grid at each `y`.
    pub fn check_a5(&self, samples: &[[f64; 2]]) -> Result<A5Report> {
        if samples.is_empty() {
            return Err(HjError::invalid("hamiltonians::check_a5", "no samples"));
        }
        let mut max_abs_h0 = 0.0f64;
        let mut max_neg = 0.0f64;
        for &y in samples {
            max_abs_h0 = max_abs_h0.max(self.eval_h(y, [0.0, 0.0]).abs());
            let mut min_h = f64::INFINITY;
            for j in -20..=20 {
                for i in -20..=20 {
                    min_h = min_h.min(self.eval_h(y, [i as f64 * 0.1, j as f64 * 0.1]));
                }
            }
            max_neg = max_neg.max(-min_h);
        }
        Ok(A5Report { max_abs_h0, max_negative_min: max_neg, pass: max_abs_h0 <= A5_TOL && max_neg <= A5_TOL })
    }

    /// `M₀` for initial data with Lipschitz constant `lip_g` under this model's `K₀`.
    pub fn velocity_bound(&self, lip_g: f64) -> Result<f64> {
        velocity_bound_from(self.k0, lip_g)
    }
}

/// Explicit root of `M²/2 − K₀ = C·M + C` with `C = lip_g + 2K₀ + 1`.
pub fn velocity_bound_from(k0: f64, lip_g: f64) -> Result<f64> {
    if !(lip_g >= 0.0) {
        return Err(HjError::invalid("hamiltonians::velocity_bound", format!("lip_g = {lip_g} < 0")));
    }
    let c = lip_g + 2.0 * k0 + 1.0;
    Ok(c + (c * c + 2.0 * (c + k0)).sqrt())
}

/// Radial profile of the clamped Hamiltonian at `|p| = s`.
#[inline]
fn radial_h(a: f64, r: f64, s: f64) -> f64 {
    if s <= r {
        a * s * s / 2.0
    } else if a <= 1.0 {
        s * s / 2.0 + (a - 1.0) * r * r / 2.0
    } else if s <= a * r {
        // linear bridge with slope aR until the unit-curvature branch catches up
        a * r * r / 2.0 + a * r * (s - r)
    } else {
        s * s / 2.0 + a * (a - 1.0) * r * r / 2.0
    }
}

/// Dual of [`radial_h`] at `|v| = w`.
#[inline]
fn radial_l(a: f64, r: f64, w: f64) -> f64 {
    if w <= a * r {
        w * w / (2.0 * a)
    } else if a <= 1.0 {
        if w <= r {
            w * r - a * r * r / 2.0
        } else {
            w * w / 2.0 - (a - 1.0) * r * r / 2.0
        }
    } else {
        w * w / 2.0 - a * (a - 1.0) * r * r / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc() -> HoleShape {
        HoleShape::Disc { radius: 0.25 }
    }

    #[test]
    fn evaluation_examples() {
        let f = HamiltonianModel::free();
        assert_eq!(f.eval_h([0.3, 0.3], [1.0, 0.0]), 0.5);
        assert_eq!(f.eval_l([0.7, -2.0], [1.0, 0.0]), 0.5);
        let s = HamiltonianModel::stripe_weight();
        assert!((s.eval_h([0.0, 0.25], [1.0, 0.0]) - 0.375).abs() < 1e-15);
        assert!((s.eval_l([0.0, 0.25], [1.0, 0.0]) - 2.0 / 3.0).abs() < 1e-15);
        let big = 10.0 * f.c0();
        let h = f.eval_h([0.1, 0.2], [big, 0.0]);
        assert!((h - big * big / 2.0).abs() <= f.k0() + 1e-12);
    }

    #[test]
    fn kinetic_weight_is_one_on_domain() {
        let m = HamiltonianModel::kinetic_weight(disc(), 3.0, 0.05).unwrap();
        assert_eq!(m.coefficient([0.4, 0.4]), 1.0);
        assert_eq!(m.coefficient([0.25, 0.0]), 1.0);
        assert_eq!(m.coefficient([0.0, 0.0]), 3.0);
        assert_eq!(m.coefficient([7.0, -3.0]), 3.0);
        assert_eq!(m.eval_l([0.4, 0.1], [0.0, 0.0]), 0.0);
    }

    #[test]
    fn potential_dual_at_rest() {
        let m = HamiltonianModel::kinetic_plus_potential(disc(), 0.3, 0.05).unwrap();
        let y = [0.0, 0.0];
        assert!((m.potential(y) - 0.3).abs() < 1e-15);
        let r = m.clamp_radius() + 1.0;
        let o = m.legendre_oracle(y, [0.0, 0.0], r, 129).unwrap();
        assert!((o + 0.3).abs() <= m.oracle_tolerance(r, 129));
        assert!((m.eval_l(y, [0.0, 0.0]) + 0.3).abs() < 1e-15);
    }

    #[test]
    fn oracle_examples() {
        let f = HamiltonianModel::free();
        let o = f.legendre_oracle([0.0, 0.0], [1.0, 0.0], 4.0, 257).unwrap();
        assert!((o - 0.5).abs() <= f.oracle_tolerance(4.0, 257));
        let s = HamiltonianModel::stripe_weight();
        let r = s.clamp_radius() + 1.0;
        let o = s.legendre_oracle([0.0, 0.25], [1.0, 0.0], r, 257).unwrap();
        assert!((o - 2.0 / 3.0).abs() <= s.oracle_tolerance(r, 257));
        assert!(f.legendre_oracle([0.0, 0.0], [1.0, 0.0], 1.0, 257).is_err());
    }

    #[test]
    fn a5_examples() {
        let w = HamiltonianModel::kinetic_weight(disc(), 2.0, 0.05).unwrap();
        let ys = [[0.0, 0.0], [0.3, 0.1], [0.5, 0.5], [0.2, 0.0]];
        assert!(w.check_a5(&ys).unwrap().pass);
        assert!(HamiltonianModel::free().check_a5(&[[0.5, 0.5], [0.4, 0.0]]).unwrap().pass);
        let v = HamiltonianModel::kinetic_plus_potential(disc(), 0.5, 0.05).unwrap();
        let rep = v.check_a5(&[[0.0, 0.0]]).unwrap();
        assert!(!rep.pass);
        assert!((rep.max_abs_h0 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn velocity_bound_examples() {
        let f = HamiltonianModel::free();
        let m = f.velocity_bound(1.0).unwrap();
        let c = 1.0 + 2.0 * f.k0() + 1.0;
        assert!((m * m / 2.0 - f.k0() - (c * m + c)).abs() < 1e-9);
        assert!(f.velocity_bound(0.0).unwrap() > 0.0);
        assert!(f.velocity_bound(2.0).unwrap() >= m);
        assert!(f.velocity_bound(-1.0).is_err());
    }

    #[test]
    fn overrides() {
        let m = HamiltonianModel::free().with_lip_g(1.0).unwrap().with_m0(3.0).unwrap();
        assert_eq!(m.m0(), 3.0);
        assert_eq!(m.lip_g(), 1.0);
        assert!(HamiltonianModel::free().with_m0(0.0).is_err());
        let c = HamiltonianModel::stripe_weight().with_c0(2.0).unwrap();
        assert_eq!(c.clamp_radius(), 5.0);
        assert!((c.k0() - 0.5 * 25.0 / 2.0).abs() < 1e-12);
    }
}
