use mca_core::actions::{
    action_value, action_variation, direction_battery, el_residuals, mixed_direction_battery, ActionKind, EvalPath,
    ModelRef,
};
use mca_core::grid::{observed_orders, Grid, Signal};
use mca_core::models::{analytic_sdof, build_shear_building, Forcing, SdofModel, Trajectory};
use mca_core::stationarity::{assemble, solve_stationary};
use proptest::prelude::*;

const SEED: u64 = 42;

fn forced(c: f64) -> SdofModel {
    SdofModel::new(
        1.0,
        c,
        1.0,
        Forcing::Harmonic {
            amplitude: 0.5,
            omega: 1.7,
            phase: 0.4,
        },
        0.0,
    )
    .unwrap()
}

fn max_variation(kind: ActionKind, model: ModelRef<'_>, traj: &Trajectory, dirs: &[Trajectory]) -> f64 {
    dirs.iter()
        .map(|d| action_variation(kind, model, traj, d, EvalPath::Reduced).unwrap().abs())
        .fold(0.0, f64::max)
}

fn scalar_dirs(g: Grid, pin_end: bool) -> Vec<Trajectory> {
    direction_battery(g, SEED, pin_end).into_iter().map(Trajectory::displacement).collect()
}

#[test]
fn mixed_variation_vanishes_at_discrete_solution() {
    let s = forced(0.2);
    let b = build_shear_building(3, 1.0, 10.0, 0.1).unwrap();
    let g = Grid::new(10.0, 64).unwrap();
    let cases: [(ActionKind, ModelRef<'_>, Vec<f64>, Vec<f64>); 2] = [
        (ActionKind::McaSdof, (&s).into(), vec![1.0], vec![0.0]),
        (ActionKind::McaMdof, (&b).into(), vec![0.1, 0.0, -0.1], vec![0.0, 0.3, 0.0]),
    ];
    for (kind, model, u0, v0) in cases {
        let sol = solve_stationary(&assemble(kind, model, g, &u0, &v0, EvalPath::Reduced).unwrap()).unwrap();
        let traj = sol.trajectory;
        let dirs = mixed_direction_battery(g, SEED, traj.u().len(), traj.j().len());
        let scale = 1.0 + action_value(kind, model, &traj, EvalPath::Reduced).unwrap().abs();
        let v = max_variation(kind, model, &traj, &dirs);
        assert!(v <= 1e-10 * scale, "{kind}: {v}");
    }
}

/// Largest variation over the battery at the exact trajectory, on two grids.
fn classical_variation(kind: ActionKind, model: &SdofModel, u0: f64, v0: f64, pin_end: bool) -> (f64, f64, f64) {
    let mut out = Vec::new();
    let mut scale = 0.0;
    for n in [256, 512] {
        let g = Grid::new(10.0, n).unwrap();
        let traj = analytic_sdof(model, u0, v0, g).unwrap();
        let rep = el_residuals(kind, model.into(), &traj).unwrap();
        assert!(rep.max_initial() < 1e-12, "{kind}: residuals must vanish");
        scale = 1.0 + action_value(kind, model.into(), &traj, EvalPath::Reduced).unwrap().abs();
        out.push(max_variation(kind, model.into(), &traj, &scalar_dirs(g, pin_end)));
    }
    (out[0], out[1], scale)
}

#[test]
fn classical_variations_vanish_where_residuals_do() {
    let cases = [
        (ActionKind::Hamilton, forced(0.0), 1.0, 0.3, true),
        (ActionKind::Tonti, forced(0.0), 1.0, 0.0, false),
        (ActionKind::Gurtin, forced(0.2), 1.0, -0.4, false),
    ];
    for (kind, model, u0, v0, pin) in cases {
        let (coarse, fine, scale) = classical_variation(kind, &model, u0, v0, pin);
        assert!(fine < coarse, "{kind}: {coarse} -> {fine}");
        assert!(fine <= 1e-3 * scale, "{kind}: {fine} vs scale {scale}");
    }
}

#[test]
fn evaluation_paths_agree_at_first_order() {
    for kind in [ActionKind::McaSdof, ActionKind::McaMdof] {
        let s = forced(0.3);
        let md = s.as_mdof().unwrap();
        let model: ModelRef<'_> = if kind == ActionKind::McaSdof { (&s).into() } else { (&md).into() };
        let (mut hs, mut gaps) = (Vec::new(), Vec::new());
        for n in [64, 128, 256] {
            let g = Grid::new(10.0, n).unwrap();
            let traj = analytic_sdof(&s, 1.0, 0.0, g).unwrap();
            let d = action_value(kind, model, &traj, EvalPath::Direct).unwrap();
            let r = action_value(kind, model, &traj, EvalPath::Reduced).unwrap();
            hs.push(g.h());
            gaps.push((d - r).abs());
        }
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
        for o in observed_orders(&hs, &gaps).into_iter().flatten() {
            assert!(o >= 1.0 - 0.05, "{kind}: order {o}");
        }
    }
}

fn random_traj(g: Grid, u: Vec<f64>, j: Vec<f64>) -> Trajectory {
    Trajectory::new(vec![Signal::new(g, u).unwrap()], vec![Signal::new(g, j).unwrap()]).unwrap()
}

fn path() -> impl Strategy<Value = EvalPath> {
    prop_oneof![Just(EvalPath::Direct), Just(EvalPath::Reduced)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn unforced_mixed_action_is_homogeneous_quadratic(
        u in prop::collection::vec(-2.0f64..2.0, 17),
        j in prop::collection::vec(-2.0f64..2.0, 17),
        lambda in -3.0f64..3.0,
        path in path(),
    ) {
        let m = SdofModel::free(1.3, 0.4, 2.0).unwrap();
        let traj = random_traj(Grid::new(2.0, 16).unwrap(), u, j);
        let base = action_value(ActionKind::McaSdof, (&m).into(), &traj, path).unwrap();
        let scaled = action_value(ActionKind::McaSdof, (&m).into(), &traj.scale(lambda), path).unwrap();
        prop_assert!((scaled - lambda * lambda * base).abs() <= 1e-12 * (1.0 + lambda * lambda) * (1.0 + base.abs()));
    }

    #[test]
    fn forced_mixed_action_expands_exactly(
        u in prop::collection::vec(-2.0f64..2.0, 17),
        j in prop::collection::vec(-2.0f64..2.0, 17),
        du in prop::collection::vec(-2.0f64..2.0, 17),
        dj in prop::collection::vec(-2.0f64..2.0, 17),
        eps in 0.01f64..1.0,
        path in path(),
    ) {
        let m = forced(0.4);
        let g = Grid::new(2.0, 16).unwrap();
        let traj = random_traj(g, u, j);
        let (mut du, mut dj) = (du, dj);
        du[0] = 0.0;
        dj[0] = 0.0;
        let dir = random_traj(g, du, dj);
        let at = |s: f64| action_value(ActionKind::McaSdof, (&m).into(), &traj.axpy(s, &dir).unwrap(), path).unwrap();
        let var = action_variation(ActionKind::McaSdof, (&m).into(), &traj, &dir, path).unwrap();
        let (p, z, q) = (at(eps), at(0.0), at(-eps));
        let scale = 1.0 + p.abs() + z.abs() + q.abs();
        prop_assert!(((p - q) / (2.0 * eps) - var).abs() * eps <= 1e-12 * scale);
        // the remainder is exactly quadratic in ε
        let r1 = p - z - eps * var;
        let r2 = at(2.0 * eps) - z - 2.0 * eps * var;
        prop_assert!((r2 - 4.0 * r1).abs() <= 1e-11 * scale);
    }
}
