//! Discrete stationarity of the mixed convolved action.
//!
//! The unknowns are the nodal values of every displacement and impulse
//! component at nodes `1..=n`; node 0 is fixed by the mixed initial
//! conditions. The action restricted to the free values is the quadratic
//! `½ dᵀ K d + rᵀ d + const`, assembled entry by entry from the same
//! primitives that [`crate::actions`] evaluates.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use crate::actions::{ActionKind, EvalPath, ModelRef};
use crate::error::{Error, Result};
use crate::fracops::{gl_weights, FracOrder};
use crate::grid::{observed_orders, Grid, Signal};
use crate::io::{fmt_f64, fmt_opt};
use crate::models::{
    analytic_sdof_impulse, initial_force_rate, mdof_oracle, mixed_initials_mdof, ClosedForm, InitialRates, MdofModel,
    Trajectory,
};

/// Which history a degree of freedom belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    U,
    J,
}

/// Free-DOF numbering: component `c` (displacements first, then impulses) at
/// node `k ≥ 1` maps to row `c·n + k − 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofMap {
    n_steps: usize,
    n_u: usize,
    n_j: usize,
}

impl DofMap {
    pub fn new(n_steps: usize, n_u: usize, n_j: usize) -> Self {
        DofMap { n_steps, n_u, n_j }
    }

    pub fn n_free(&self) -> usize {
        (self.n_u + self.n_j) * self.n_steps
    }

    fn component(&self, var: Variable, comp: usize) -> usize {
        match var {
            Variable::U => {
                assert!(comp < self.n_u, "displacement component out of range");
                comp
            }
            Variable::J => {
                assert!(comp < self.n_j, "impulse component out of range");
                self.n_u + comp
            }
        }
    }

    /// Row of `(var, comp, node)`, or `None` for the fixed node 0.
    pub fn index(&self, var: Variable, comp: usize, node: usize) -> Option<usize> {
        assert!(node <= self.n_steps, "node out of range");
        let c = self.component(var, comp);
        (node > 0).then(|| c * self.n_steps + node - 1)
    }

    /// Inverse of [`DofMap::index`].
    pub fn entry(&self, row: usize) -> (Variable, usize, usize) {
        let c = row / self.n_steps;
        let node = row % self.n_steps + 1;
        if c < self.n_u {
            (Variable::U, c, node)
        } else {
            (Variable::J, c - self.n_u, node)
        }
    }
}

/// `I(d) = ½ dᵀ K d + rᵀ d + constant` over the free nodal values.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    pub k: DMatrix<f64>,
    pub r: DVector<f64>,
    pub constant: f64,
    pub dof_map: DofMap,
    /// Node-0 values per component, displacements first.
    pub fixed: Vec<f64>,
    pub grid: Grid,
    pub kind: ActionKind,
    pub path: EvalPath,
    rates: InitialRates,
}

impl QuadraticForm {
    pub fn value(&self, d: &DVector<f64>) -> f64 {
        0.5 * d.dot(&(&self.k * d)) + self.r.dot(d) + self.constant
    }

    /// `K d + r`.
    pub fn gradient(&self, d: &DVector<f64>) -> DVector<f64> {
        &self.k * d + &self.r
    }

    /// Free values of a trajectory on this grid.
    pub fn free_vector(&self, traj: &Trajectory) -> Result<DVector<f64>> {
        self.grid.ensure_same(&traj.grid(), "QuadraticForm::free_vector")?;
        if traj.u().len() != self.dof_map.n_u || traj.j().len() != self.dof_map.n_j {
            return Err(Error::invalid("trajectory dimensions do not match the quadratic form"));
        }
        let comps: Vec<&Signal> = traj.u().iter().chain(traj.j()).collect();
        Ok(DVector::from_fn(self.dof_map.n_free(), |row, _| {
            let n = self.dof_map.n_steps;
            comps[row / n].values()[row % n + 1]
        }))
    }

    /// Trajectory with node 0 reinstated and the declared initial rates.
    pub fn trajectory(&self, d: &DVector<f64>) -> Trajectory {
        let n = self.dof_map.n_steps;
        let comp = |c: usize| {
            let mut v = Vec::with_capacity(n + 1);
            v.push(self.fixed[c]);
            v.extend(d.rows(c * n, n).iter());
            Signal::new(self.grid, v).expect("grid-sized by construction")
        };
        let n_u = self.dof_map.n_u;
        Trajectory::new((0..n_u).map(comp).collect(), (n_u..n_u + self.dof_map.n_j).map(comp).collect())
            .and_then(|t| t.with_rates(self.rates.clone()))
            .expect("consistent dimensions")
    }
}

/// Collects `Φ` coefficients into `K`, `r` and the constant.
struct Assembler {
    n: usize,
    k: DMatrix<f64>,
    r: DVector<f64>,
    constant: f64,
    fixed: Vec<f64>,
}

impl Assembler {
    /// Adds `coef · a_{ca,p} · b_{cb,q}` to `Φ(a, b)`.
    fn bilinear(&mut self, ca: usize, p: usize, cb: usize, q: usize, coef: f64) {
        let n = self.n;
        let half = 0.5 * coef;
        match (p, q) {
            (0, 0) => self.constant += half * self.fixed[ca] * self.fixed[cb],
            (0, _) => self.r[cb * n + q - 1] += half * self.fixed[ca],
            (_, 0) => self.r[ca * n + p - 1] += half * self.fixed[cb],
            _ => {
                let (i, j) = (ca * n + p - 1, cb * n + q - 1);
                self.k[(i, j)] += half;
                self.k[(j, i)] += half;
            }
        }
    }

    fn linear(&mut self, c: usize, p: usize, coef: f64) {
        if p == 0 {
            self.constant += coef * self.fixed[c];
        } else {
            self.r[c * self.n + p - 1] += coef;
        }
    }

    /// `scale · P(x_ca, y_cb)`, `P(x, y) = (1/h) Σ Δx_k Δy_{n−k−1}`.
    fn slope_conv(&mut self, ca: usize, cb: usize, scale: f64, h: f64) {
        let n = self.n;
        let s = scale / h;
        for k in 0..n {
            self.bilinear(ca, k + 1, cb, n - k, s);
            self.bilinear(ca, k + 1, cb, n - k - 1, -s);
            self.bilinear(ca, k, cb, n - k, -s);
            self.bilinear(ca, k, cb, n - k - 1, s);
        }
    }

    /// `scale · X(x_ca, y_cb)` along the chosen path.
    fn half_conv(&mut self, ca: usize, cb: usize, scale: f64, path: EvalPath, ww: &[f64]) {
        let n = self.n;
        match path {
            EvalPath::Reduced => {
                let s = 0.5 * scale;
                for k in 0..n {
                    self.bilinear(ca, k + 1, cb, n - k, s);
                    self.bilinear(ca, k + 1, cb, n - k - 1, s);
                    self.bilinear(ca, k, cb, n - k, -s);
                    self.bilinear(ca, k, cb, n - k - 1, -s);
                }
                self.bilinear(ca, 0, cb, n, scale);
            }
            EvalPath::Direct => {
                for p in 0..=n {
                    for q in 0..=n - p {
                        self.bilinear(ca, p, cb, q, scale * ww[n - p - q]);
                    }
                }
            }
        }
    }
}

/// Autoconvolution of the order-½ Grünwald–Letnikov weights: the DIRECT
/// coefficient of `x_p y_q` in `h Σ_k (𝒟x)_k (𝒟y)_{n−k}` is `ww[n − p − q]`.
fn gl_autoconvolution(n: usize) -> Vec<f64> {
    let w = gl_weights(FracOrder::HALF, n + 1).w;
    (0..=n).map(|m| (0..=m).map(|j| w[j] * w[m - j]).sum()).collect()
}

fn mixed_model(kind: ActionKind, model: ModelRef<'_>) -> Result<MdofModel> {
    match (kind, model) {
        (ActionKind::McaSdof, ModelRef::Sdof(m)) => m.as_mdof(),
        (ActionKind::McaMdof, ModelRef::Mdof(m)) => Ok(m.clone()),
        (ActionKind::McaSdof, _) => Err(Error::invalid("MCA_SDOF requires an SDOF model")),
        (ActionKind::McaMdof, _) => Err(Error::invalid("MCA_MDOF requires an MDOF model")),
        _ => Err(Error::invalid(format!("{kind} has no mixed quadratic form"))),
    }
}

/// Assembles the discrete mixed convolved action with node 0 fixed by the
/// mixed initial conditions.
pub fn assemble(
    kind: ActionKind,
    model: ModelRef<'_>,
    grid: Grid,
    u0: &[f64],
    v0: &[f64],
    path: EvalPath,
) -> Result<QuadraticForm> {
    let md = mixed_model(kind, model)?;
    let (nd, ne) = (md.n_dof(), md.n_el());
    if u0.len() != nd || v0.len() != nd {
        return Err(Error::invalid(format!("u0 and v0 must have {nd} entries")));
    }
    if u0.iter().chain(v0).any(|v| !v.is_finite()) {
        return Err(Error::invalid("initial conditions must be finite"));
    }
    let j0 = mixed_initials_mdof(&md, u0, v0)?;
    let n = grid.n_steps();
    let h = grid.h();
    let map = DofMap::new(n, nd, ne);
    let mut fixed = u0.to_vec();
    fixed.extend(&j0);
    let mut asm = Assembler {
        n,
        k: DMatrix::zeros(map.n_free(), map.n_free()),
        r: DVector::zeros(map.n_free()),
        constant: 0.0,
        fixed,
    };
    let ww = match path {
        EvalPath::Direct => gl_autoconvolution(n),
        EvalPath::Reduced => Vec::new(),
    };
    let (m, c, b, a) = (md.mass(), md.damping(), md.equilibrium(), md.flexibility());
    for i in 0..nd {
        for j in 0..nd {
            if m[(i, j)] != 0.0 {
                asm.slope_conv(i, j, m[(i, j)], h);
            }
            if c[(i, j)] != 0.0 {
                asm.half_conv(i, j, c[(i, j)], path, &ww);
            }
        }
    }
    for e in 0..ne {
        for f in 0..ne {
            if a[(e, f)] != 0.0 {
                asm.slope_conv(nd + e, nd + f, -a[(e, f)], h);
            }
        }
    }
    for i in 0..nd {
        for e in 0..ne {
            if b[(i, e)] != 0.0 {
                asm.half_conv(nd + e, i, b[(i, e)], path, &ww);
                transpose_half_conv(&mut asm, i, nd + e, b[(i, e)], path, &ww);
            }
        }
    }
    let forces = md.sample_forcing(grid);
    for (i, f) in forces.iter().enumerate() {
        let fv = f.values();
        for k in 0..=n {
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            if fv[n - k] != 0.0 {
                asm.linear(i, k, -h * w * fv[n - k]);
            }
        }
        asm.linear(i, n, -md.j_hat_0()[i]);
    }
    let rates = InitialRates {
        velocity: v0.to_vec(),
        force: initial_force_rate(&md, u0),
    };
    Ok(QuadraticForm {
        k: asm.k,
        r: asm.r,
        constant: asm.constant,
        dof_map: map,
        fixed: asm.fixed,
        grid,
        kind,
        path,
        rates,
    })
}

/// `scale · X(y_cb, x_ca)` entered with the first bilinear slot on `ca`.
fn transpose_half_conv(asm: &mut Assembler, ca: usize, cb: usize, scale: f64, path: EvalPath, ww: &[f64]) {
    let n = asm.n;
    match path {
        EvalPath::Reduced => {
            let s = 0.5 * scale;
            for k in 0..n {
                asm.bilinear(ca, n - k, cb, k + 1, s);
                asm.bilinear(ca, n - k - 1, cb, k + 1, s);
                asm.bilinear(ca, n - k, cb, k, -s);
                asm.bilinear(ca, n - k - 1, cb, k, -s);
            }
            asm.bilinear(ca, n, cb, 0, scale);
        }
        EvalPath::Direct => {
            for p in 0..=n {
                for q in 0..=n - p {
                    asm.bilinear(ca, q, cb, p, scale * ww[n - p - q]);
                }
            }
        }
    }
}

/// Outcome of a stationarity solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub trajectory: Trajectory,
    /// `‖K d + r‖∞ / (‖K‖∞ ‖d‖∞ + ‖r‖∞)`.
    pub gradient_norm: f64,
    /// 1-norm condition estimate of `K`.
    pub condition_estimate: f64,
    pub wall_time: Duration,
}

/// Largest admissible condition estimate, `ε^{−1/2}`.
pub fn condition_threshold() -> f64 {
    1.0 / f64::EPSILON.sqrt()
}

fn norm1(k: &DMatrix<f64>) -> f64 {
    k.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn norm_inf(k: &DMatrix<f64>) -> f64 {
    k.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Hager's estimate of `‖K⁻¹‖₁` from solves with a factorization of the
/// symmetric `K`.
fn inverse_norm1_estimate(solve: impl Fn(&DVector<f64>) -> Option<DVector<f64>>, n: usize) -> Option<f64> {
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut est = 0.0;
    for _ in 0..5 {
        let y = solve(&x)?;
        est = y.iter().map(|v| v.abs()).sum::<f64>();
        let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let z = solve(&xi)?;
        let (j, zmax) = z.iter().enumerate().fold((0, 0.0), |(bj, bm), (i, v)| {
            if v.abs() > bm {
                (i, v.abs())
            } else {
                (bj, bm)
            }
        });
        if zmax <= z.dot(&x) {
            break;
        }
        x = DVector::zeros(n);
        x[j] = 1.0;
    }
    Some(est)
}

/// Solves `K d = −r` by LU with partial pivoting; `K` may be indefinite.
pub fn solve_stationary(qf: &QuadraticForm) -> Result<SolveReport> {
    let start = Instant::now();
    let fail = |detail: String| Error::Numerical {
        module: "stationarity",
        operation: "solve_stationary",
        t_final: qf.grid.t_final(),
        n_steps: qf.grid.n_steps(),
        detail: format!("{} ({}): {detail}", qf.kind, qf.path),
    };
    if qf.k.iter().chain(qf.r.iter()).any(|v| !v.is_finite()) {
        return Err(fail("assembled system is not finite".into()));
    }
    let lu = qf.k.clone().lu();
    let n = qf.k.nrows();
    let solve = |b: &DVector<f64>| lu.solve(b);
    let inv = inverse_norm1_estimate(solve, n).ok_or_else(|| fail("matrix is exactly singular".into()))?;
    let cond = norm1(&qf.k) * inv;
    if !cond.is_finite() || cond > condition_threshold() {
        return Err(fail(format!(
            "condition estimate {cond:e} exceeds {:e}",
            condition_threshold()
        )));
    }
    let d = lu.solve(&(-&qf.r)).ok_or_else(|| fail("matrix is exactly singular".into()))?;
    if d.iter().any(|v| !v.is_finite()) {
        return Err(fail("solution is not finite".into()));
    }
    let g = qf.gradient(&d);
    let scale = norm_inf(&qf.k) * d.amax() + qf.r.amax();
    let gradient_norm = if scale > 0.0 { g.amax() / scale } else { g.amax() };
    Ok(SolveReport {
        trajectory: qf.trajectory(&d),
        gradient_norm,
        condition_estimate: cond,
        wall_time: start.elapsed(),
    })
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub err_u_sup: f64,
    pub err_u_l2: f64,
    pub err_j_sup: f64,
    pub err_j_l2: f64,
    pub order_u: Option<f64>,
    pub order_j: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub kind: ActionKind,
    pub path: EvalPath,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// CSV `n,h,err_u_sup,err_u_l2,err_J_sup,err_J_l2,order_u,order_J,wall_ms`.
    /// Timing is machine dependent, so `wall_ms` is left empty unless
    /// `with_timing` is set.
    pub fn to_csv(&self, with_timing: bool) -> String {
        let mut out = String::from("n,h,err_u_sup,err_u_l2,err_J_sup,err_J_l2,order_u,order_J,wall_ms\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.n,
                fmt_f64(r.h),
                fmt_f64(r.err_u_sup),
                fmt_f64(r.err_u_l2),
                fmt_f64(r.err_j_sup),
                fmt_f64(r.err_j_l2),
                fmt_opt(r.order_u),
                fmt_opt(r.order_j),
                if with_timing { fmt_f64(r.wall_ms) } else { String::new() }
            ));
        }
        out
    }
}

/// Reference trajectory for the mixed kinds: the closed form with its exact
/// impulse for SDOF models, the state-space oracle otherwise.
pub fn oracle_trajectory(kind: ActionKind, model: ModelRef<'_>, u0: &[f64], v0: &[f64], grid: Grid) -> Result<Trajectory> {
    match (kind, model) {
        (ActionKind::McaSdof, ModelRef::Sdof(m)) => {
            if u0.len() != 1 || v0.len() != 1 {
                return Err(Error::invalid("u0 and v0 must have one entry"));
            }
            let cf = ClosedForm::new(m.m(), m.c(), m.k(), m.forcing(), u0[0], v0[0])?;
            let (u, _) = cf.sample(grid);
            let j = analytic_sdof_impulse(m, u0[0], v0[0], grid)?;
            Trajectory::new(vec![u], vec![j])?.with_rates(InitialRates {
                velocity: v0.to_vec(),
                force: vec![m.k() * u0[0]],
            })
        }
        (ActionKind::McaMdof, ModelRef::Mdof(m)) => mdof_oracle(m, u0, v0, grid),
        _ => mixed_model(kind, model).map(|_| unreachable!("mismatch handled above")),
    }
}

fn errors(a: &[Signal], b: &[Signal]) -> Result<(f64, f64)> {
    let mut sup: f64 = 0.0;
    let mut l2sq = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x.sub(y)?;
        sup = sup.max(d.sup_norm());
        l2sq += d.l2_norm().powi(2);
    }
    Ok((sup, l2sq.sqrt()))
}

/// Solves on every grid in `n_list` and compares with the oracle.
pub fn convergence_study(
    kind: ActionKind,
    model: ModelRef<'_>,
    u0: &[f64],
    v0: &[f64],
    t_final: f64,
    n_list: &[usize],
    path: EvalPath,
) -> Result<ConvergenceTable> {
    if n_list.len() < 3 || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("n_list must be strictly increasing with at least three entries"));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let grid = Grid::new(t_final, n)?;
        let oracle = oracle_trajectory(kind, model, u0, v0, grid)?;
        let start = Instant::now();
        let qf = assemble(kind, model, grid, u0, v0, path)?;
        let sol = solve_stationary(&qf)?;
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        let (eus, eul) = errors(sol.trajectory.u(), oracle.u())?;
        let (ejs, ejl) = errors(sol.trajectory.j(), oracle.j())?;
        rows.push(ConvergenceRow {
            n,
            h: grid.h(),
            err_u_sup: eus,
            err_u_l2: eul,
            err_j_sup: ejs,
            err_j_l2: ejl,
            order_u: None,
            order_j: None,
            wall_ms,
        });
    }
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let ou = observed_orders(&hs, &rows.iter().map(|r| r.err_u_sup).collect::<Vec<_>>());
    let oj = observed_orders(&hs, &rows.iter().map(|r| r.err_j_sup).collect::<Vec<_>>());
    for (i, r) in rows.iter_mut().enumerate() {
        r.order_u = ou[i];
        r.order_j = oj[i];
    }
    Ok(ConvergenceTable { kind, path, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::action_value;
    use crate::models::{build_shear_building, Forcing, SdofModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sdof() -> SdofModel {
        SdofModel::new(
            1.0,
            0.2,
            1.0,
            Forcing::Harmonic {
                amplitude: 0.5,
                omega: 1.3,
                phase: 0.2,
            },
            0.1,
        )
        .unwrap()
    }

    fn random_free(qf: &QuadraticForm, seed: u64) -> DVector<f64> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        DVector::from_fn(qf.dof_map.n_free(), |_, _| r.gen_range(-1.0..1.0))
    }

    #[test]
    fn dof_map_roundtrip() {
        let map = DofMap::new(5, 2, 3);
        assert_eq!(map.n_free(), 25);
        assert_eq!(map.index(Variable::U, 0, 0), None);
        for row in 0..map.n_free() {
            let (v, c, k) = map.entry(row);
            assert_eq!(map.index(v, c, k), Some(row));
        }
    }

    #[test]
    fn quadratic_matches_action_sdof() {
        let m = sdof();
        let grid = Grid::new(3.0, 12).unwrap();
        for path in [EvalPath::Reduced, EvalPath::Direct] {
            let qf = assemble(ActionKind::McaSdof, (&m).into(), grid, &[0.7], &[-0.3], path).unwrap();
            assert!((&qf.k - qf.k.transpose()).amax() == 0.0);
            for seed in 0..3 {
                let d = random_free(&qf, seed);
                let traj = qf.trajectory(&d);
                let direct = action_value(ActionKind::McaSdof, (&m).into(), &traj, path).unwrap();
                let quad = qf.value(&d);
                assert!((direct - quad).abs() < 1e-12 * (1.0 + direct.abs()), "{path}: {direct} vs {quad}");
                let back = qf.free_vector(&traj).unwrap();
                assert_eq!(back, d);
            }
        }
    }

    #[test]
    fn quadratic_matches_action_mdof() {
        let m = build_shear_building(3, 1.0, 10.0, 0.1)
            .unwrap()
            .with_forcing(
                Forcing::Harmonic {
                    amplitude: 1.0,
                    omega: 2.0,
                    phase: 0.0,
                },
                vec![1.0, 0.5, -0.2],
            )
            .unwrap();
        let grid = Grid::new(2.0, 8).unwrap();
        let u0 = [0.1, -0.2, 0.3];
        let v0 = [0.0, 0.4, -0.1];
        for path in [EvalPath::Reduced, EvalPath::Direct] {
            let qf = assemble(ActionKind::McaMdof, (&m).into(), grid, &u0, &v0, path).unwrap();
            let d = random_free(&qf, 9);
            let traj = qf.trajectory(&d);
            let direct = action_value(ActionKind::McaMdof, (&m).into(), &traj, path).unwrap();
            assert!((direct - qf.value(&d)).abs() < 1e-11 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn homogeneous_problem_has_zero_solution() {
        let m = SdofModel::free(1.0, 0.3, 2.0).unwrap();
        let grid = Grid::new(4.0, 32).unwrap();
        let qf = assemble(ActionKind::McaSdof, (&m).into(), grid, &[0.0], &[0.0], EvalPath::Reduced).unwrap();
        let sol = solve_stationary(&qf).unwrap();
        assert!(sol.trajectory.u()[0].sup_norm() == 0.0);
        assert!(sol.trajectory.j()[0].sup_norm() == 0.0);
    }

    #[test]
    fn solve_is_stationary_and_tracks_closed_form() {
        let m = sdof();
        let grid = Grid::new(10.0, 128).unwrap();
        let qf = assemble(ActionKind::McaSdof, (&m).into(), grid, &[1.0], &[0.0], EvalPath::Reduced).unwrap();
        let sol = solve_stationary(&qf).unwrap();
        assert!(sol.gradient_norm < 1e-12, "{}", sol.gradient_norm);
        assert!(sol.condition_estimate < condition_threshold());
        let oracle = oracle_trajectory(ActionKind::McaSdof, (&m).into(), &[1.0], &[0.0], grid).unwrap();
        let err = sol.trajectory.u()[0].sub(&oracle.u()[0]).unwrap().sup_norm();
        assert!(err < 0.1, "{err}");
    }

    #[test]
    fn one_story_building_equals_sdof() {
        let s = SdofModel::free(1.0, 0.1, 10.0).unwrap();
        let b = build_shear_building(1, 1.0, 10.0, 0.1).unwrap();
        let grid = Grid::new(5.0, 64).unwrap();
        let a = solve_stationary(&assemble(ActionKind::McaSdof, (&s).into(), grid, &[0.5], &[0.2], EvalPath::Reduced).unwrap())
            .unwrap();
        let c = solve_stationary(&assemble(ActionKind::McaMdof, (&b).into(), grid, &[0.5], &[0.2], EvalPath::Reduced).unwrap())
            .unwrap();
        assert!(a.trajectory.u()[0].sub(&c.trajectory.u()[0]).unwrap().sup_norm() < 1e-12);
        assert!(a.trajectory.j()[0].sub(&c.trajectory.j()[0]).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn ill_conditioned_system_is_rejected() {
        let m = SdofModel::free(1.0, 0.0, 1.0).unwrap();
        let grid = Grid::new(10.0, 16).unwrap();
        let mut qf = assemble(ActionKind::McaSdof, (&m).into(), grid, &[1.0], &[0.0], EvalPath::Reduced).unwrap();
        qf.k.row_mut(0).fill(0.0);
        qf.k.column_mut(0).fill(0.0);
        let err = solve_stationary(&qf).unwrap_err();
        assert!(err.is_numerical());
        assert!(err.to_string().contains("MCA_SDOF"));
    }

    #[test]
    fn non_mixed_kinds_rejected() {
        let m = sdof();
        let grid = Grid::new(1.0, 4).unwrap();
        assert!(assemble(ActionKind::Tonti, (&m).into(), grid, &[0.0], &[0.0], EvalPath::Reduced).is_err());
    }

    #[test]
    fn convergence_csv_omits_timing_by_default() {
        let m = sdof();
        let table =
            convergence_study(ActionKind::McaSdof, (&m).into(), &[1.0], &[0.0], 10.0, &[32, 64, 128], EvalPath::Reduced)
                .unwrap();
        let csv = table.to_csv(false);
        assert!(csv.lines().skip(1).all(|l| l.ends_with(',')));
        assert!(table.rows[2].order_u.is_some());
        assert!(table.rows[0].order_u.is_none());
    }
}
