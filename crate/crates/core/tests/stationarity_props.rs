use mca_core::actions::{action_variation, el_residuals, ActionKind, EvalPath, ModelRef};
use mca_core::grid::{Grid, Signal};
use mca_core::models::{build_bar_1d, build_shear_building, Forcing, MdofModel, SdofModel, Trajectory};
use mca_core::stationarity::{assemble, convergence_study, solve_stationary, DofMap, Variable};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn building() -> MdofModel {
    build_shear_building(3, 1.0, 10.0, 0.1)
        .unwrap()
        .with_forcing(
            Forcing::Harmonic {
                amplitude: 1.0,
                omega: 2.0,
                phase: 0.0,
            },
            vec![1.0; 3],
        )
        .unwrap()
}

fn unit_direction(map: &DofMap, grid: Grid, n_u: usize, n_j: usize, row: usize) -> Trajectory {
    let (var, comp, node) = map.entry(row);
    let sig = |v: Variable, c: usize| {
        let mut vals = vec![0.0; grid.len()];
        if v == var && c == comp {
            vals[node] = 1.0;
        }
        Signal::new(grid, vals).unwrap()
    };
    Trajectory::new((0..n_u).map(|c| sig(Variable::U, c)).collect(), (0..n_j).map(|c| sig(Variable::J, c)).collect())
        .unwrap()
}

fn gradient_matches_variation(kind: ActionKind, model: ModelRef<'_>, u0: &[f64], v0: &[f64], path: EvalPath) {
    let g = Grid::new(4.0, 24).unwrap();
    let qf = assemble(kind, model, g, u0, v0, path).unwrap();
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let d = DVector::from_fn(qf.dof_map.n_free(), |_, _| r.gen_range(-1.0..1.0));
    let grad = qf.gradient(&d);
    let traj = qf.trajectory(&d);
    let (n_u, n_j) = (traj.u().len(), traj.j().len());
    for row in 0..d.len() {
        let dir = unit_direction(&qf.dof_map, g, n_u, n_j, row);
        let v = action_variation(kind, model, &traj, &dir, path).unwrap();
        assert!((v - grad[row]).abs() <= 1e-8 * grad.amax(), "{kind} {path} row {row}: {v} vs {}", grad[row]);
    }
}

#[test]
fn gradient_equals_variation_on_unit_directions() {
    let s = SdofModel::new(
        1.0,
        0.2,
        1.0,
        Forcing::Pulse {
            amplitude: 2.0,
            duration: 1.5,
        },
        0.3,
    )
    .unwrap();
    let b = building();
    for path in [EvalPath::Reduced, EvalPath::Direct] {
        gradient_matches_variation(ActionKind::McaSdof, (&s).into(), &[1.0], &[0.0], path);
        gradient_matches_variation(ActionKind::McaMdof, (&b).into(), &[0.1, 0.2, 0.3], &[0.0, -0.1, 0.0], path);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn assembled_matrix_is_symmetric(
        m in 0.2f64..5.0,
        c in 0.0f64..2.0,
        k in 0.2f64..20.0,
        n in 4usize..40,
        direct in any::<bool>(),
    ) {
        let model = SdofModel::free(m, c, k).unwrap();
        let path = if direct { EvalPath::Direct } else { EvalPath::Reduced };
        let qf = assemble(ActionKind::McaSdof, (&model).into(), Grid::new(3.0, n).unwrap(), &[1.0], &[0.5], path).unwrap();
        prop_assert!((&qf.k - qf.k.transpose()).amax() <= 1e-14 * qf.k.amax());
    }
}

#[test]
fn mdof_solution_converges_to_oracle() {
    let b = building();
    let table =
        convergence_study(ActionKind::McaMdof, (&b).into(), &[0.0; 3], &[0.0; 3], 10.0, &[32, 64, 128], EvalPath::Reduced)
            .unwrap();
    let errs: Vec<f64> = table.rows.iter().map(|r| r.err_u_sup).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    for o in table.rows.iter().filter_map(|r| r.order_u) {
        assert!(o >= 0.8, "order {o}");
    }
}

#[test]
fn solved_trajectory_field_residuals_decrease() {
    let b = building();
    let mut last = f64::INFINITY;
    for n in [32, 64, 128] {
        let g = Grid::new(10.0, n).unwrap();
        let sol = solve_stationary(&assemble(ActionKind::McaMdof, (&b).into(), g, &[0.0; 3], &[0.0; 3], EvalPath::Reduced).unwrap())
            .unwrap();
        let rep = el_residuals(ActionKind::McaMdof, (&b).into(), &sol.trajectory).unwrap();
        assert!(rep.max_initial() <= 1e-10);
        let f = rep.max_field_sup();
        assert!(f < last, "n = {n}: {f} vs {last}");
        last = f;
    }
}

#[test]
fn bar_solve_is_well_posed() {
    let bar = build_bar_1d(1.0, 1.0, 1.0, 4).unwrap();
    let g = Grid::new(2.0, 32).unwrap();
    let u0 = vec![0.0; bar.n_dof()];
    let v0: Vec<f64> = (1..=bar.n_dof()).map(|i| i as f64 / bar.n_dof() as f64).collect();
    let sol = solve_stationary(&assemble(ActionKind::McaMdof, (&bar).into(), g, &u0, &v0, EvalPath::Reduced).unwrap())
        .unwrap();
    assert!(sol.gradient_norm < 1e-12);
}

#[test]
fn singular_system_reports_grid_and_kind() {
    let model = SdofModel::free(1.0, 0.0, 1.0).unwrap();
    let g = Grid::new(10.0, 16).unwrap();
    let mut qf = assemble(ActionKind::McaSdof, (&model).into(), g, &[1.0], &[0.0], EvalPath::Reduced).unwrap();
    qf.k.fill(0.0);
    let msg = solve_stationary(&qf).unwrap_err().to_string();
    for part in ["stationarity", "solve_stationary", "t = 10", "n = 16", "MCA_SDOF"] {
        assert!(msg.contains(part), "{msg}");
    }
}
