//! Randomized invariants of the Hamiltonians, the lattice DP and the solvers.

use hjlab_core::config::RunConfig;
use hjlab_core::geometry::{Extent, HoleShape, PerforatedDomain, Rect, SpaceTimeLattice};
use hjlab_core::hamiltonians::HamiltonianModel;
use hjlab_core::metric::MetricSolver;
use hjlab_core::solvers::{hopf_lax, hopf_lax_affine, solve_ueps, EffectiveSource, InitialData, SolveSpec, YGrid};
use hjlab_core::stats::linear_fit;
use proptest::prelude::*;

fn models() -> Vec<HamiltonianModel> {
    let hole = HoleShape::Disc { radius: 0.25 };
    vec![
        HamiltonianModel::free(),
        HamiltonianModel::kinetic_weight(hole, 3.0, 0.05).unwrap(),
        HamiltonianModel::kinetic_plus_potential(hole, 0.5, 0.05).unwrap(),
        HamiltonianModel::stripe_weight(),
    ]
}

fn point(r: f64) -> impl Strategy<Value = [f64; 2]> {
    (-r..r, -r..r).prop_map(|(a, b)| [a, b])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn fenchel_young(which in 0usize..4, y in point(2.0), p in point(6.0), v in point(6.0)) {
        let m = &models()[which];
        let dot = p[0] * v[0] + p[1] * v[1];
        prop_assert!(m.eval_h(y, p) + m.eval_l(y, v) >= dot - 1e-9);
    }

    #[test]
    fn quadratic_envelope(which in 0usize..4, y in point(2.0), p in point(20.0)) {
        let m = &models()[which];
        let q = (p[0] * p[0] + p[1] * p[1]) / 2.0;
        let h = m.eval_h(y, p);
        prop_assert!(h >= q - m.k0() - 1e-9 && h <= q + m.k0() + 1e-9, "H = {h}, |p|^2/2 = {q}, K0 = {}", m.k0());
    }

    #[test]
    fn hamiltonians_are_even_and_periodic(which in 0usize..4, y in point(1.0), p in point(5.0), shift in (-3i32..3, -3i32..3)) {
        let m = &models()[which];
        let ys = [y[0] + shift.0 as f64, y[1] + shift.1 as f64];
        prop_assert!((m.eval_h(y, p) - m.eval_h(y, [-p[0], -p[1]])).abs() < 1e-12);
        prop_assert!((m.eval_h(y, p) - m.eval_h(ys, p)).abs() < 1e-9);
    }

    #[test]
    fn exact_lines_are_fitted_exactly(a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let xs = [1.0, 2.0, 3.5, 7.0];
        let ys: Vec<f64> = xs.iter().map(|x| a + b * x).collect();
        let fit = linear_fit(&xs, &ys).unwrap();
        prop_assert!((fit.intercept - a).abs() < 1e-9 && (fit.slope - b).abs() < 1e-9);
    }

    #[test]
    fn hopf_lax_grid_never_beats_the_closed_form(p in point(1.5), x in point(1.0), t in 0.1f64..2.0) {
        let g = InitialData::linear(p);
        let grid = YGrid::new(0.1, 3.0 * t).unwrap();
        let exact = hopf_lax_affine((p[0] * p[0] + p[1] * p[1]) / 2.0, &g, x, t);
        prop_assert!(hopf_lax(&EffectiveSource::Quadratic, &g, x, t, &grid) >= exact - 1e-12);
    }

    #[test]
    fn config_round_trips(tol in 0.0f64..1.0, seed in any::<u64>(), h in prop::sample::select(vec![0.02, 0.05, 0.1])) {
        let mut cfg = RunConfig::default();
        cfg.experiment.tol = tol;
        cfg.output.seed = seed;
        cfg.grid.h = h;
        let text = serde_json::to_string(&cfg).unwrap();
        prop_assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// `m(t+s, x, z) ≤ m(t, x, y) + m(s, y, z)` between admissible lattice nodes.
    #[test]
    fn lattice_cost_triangle(x in point(1.5), y in point(1.5), z in point(1.5), n1 in 4usize..12, n2 in 4usize..12) {
        let dom = PerforatedDomain::standard(HoleShape::Disc { radius: 0.25 }).unwrap();
        let lat = SpaceTimeLattice::build(&dom, 0.125, Extent::Box(Rect::cells([-2, -2], [2, 2])), 0.125, 3.0).unwrap();
        let model = HamiltonianModel::free().with_m0(3.0).unwrap();
        let s = MetricSolver::new(&model, &lat).unwrap();
        let (t1, t2) = (n1 as f64 * 0.125, n2 as f64 * 0.125);
        let xy = s.cost_m(t1, x, y);
        let yz = s.cost_m(t2, y, z);
        let xz = s.cost_m(t1 + t2, x, z);
        if let (Ok(a), Ok(b)) = (xy, yz) {
            prop_assert!(xz.unwrap() <= a + b + 1e-12);
        }
    }

    /// Ordered constant data stay ordered, shifted by exactly the constant.
    #[test]
    fn solver_commutes_with_constants(c in -2.0f64..2.0) {
        let dom = PerforatedDomain::standard(HoleShape::Square { half_width: 0.25 }).unwrap();
        let lat = SpaceTimeLattice::build(&dom, 0.125, Extent::Torus, 0.125, 3.0).unwrap();
        let model = HamiltonianModel::kinetic_weight(HoleShape::Square { half_width: 0.25 }, 2.0, 0.05).unwrap().with_m0(3.0).unwrap();
        let spec = SolveSpec::new(0.5, 0.5).with_snapshots(&[0.25, 0.5]);
        let a = solve_ueps(&lat, &model, &InitialData::zero(), &spec).unwrap();
        let b = solve_ueps(&lat, &model, &InitialData::constant(c), &spec).unwrap();
        for t in [0.25, 0.5] {
            let (sa, sb) = (a.slice(t).unwrap(), b.slice(t).unwrap());
            for z in (0..lat.len()).filter(|&z| lat.is_admissible(z)) {
                prop_assert!((sb[z] - sa[z] - c).abs() < 1e-12);
            }
        }
    }
}
