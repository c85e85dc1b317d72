//! Action functionals, first variations and Euler–Lagrange residuals.
//!
//! Every functional here is `I(z) = ½Φ(z, z) + L(z)` with `Φ` bilinear and
//! `L` linear, so the first variation in direction `d` is
//! `½(Φ(z, d) + Φ(d, z)) + L(d)`, evaluated in closed form.
//!
//! Sampled signals are read as piecewise-linear interpolants wherever a
//! derivative appears inside an action; residuals use central differences.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fracops::{frac_deriv, FracOrder, Side};
use crate::grid::{convolve, convolve_final, derivative, inner_product, sample, second_derivative, Grid, Signal};
use crate::io::fmt_f64;
use crate::models::{MdofModel, SdofModel, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionKind {
    Hamilton,
    Gurtin,
    Tonti,
    McaSdof,
    McaMdof,
}

impl ActionKind {
    pub const ALL: [ActionKind; 5] = [
        ActionKind::Hamilton,
        ActionKind::Gurtin,
        ActionKind::Tonti,
        ActionKind::McaSdof,
        ActionKind::McaMdof,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActionKind::Hamilton => "HAMILTON",
            ActionKind::Gurtin => "GURTIN",
            ActionKind::Tonti => "TONTI",
            ActionKind::McaSdof => "MCA_SDOF",
            ActionKind::McaMdof => "MCA_MDOF",
        }
    }

    pub fn is_mixed(self) -> bool {
        matches!(self, ActionKind::McaSdof | ActionKind::McaMdof)
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.to_ascii_uppercase().replace('-', "_");
        ActionKind::ALL
            .into_iter()
            .find(|k| k.name() == up)
            .ok_or_else(|| Error::invalid(format!("unknown action kind '{s}'")))
    }
}

/// Evaluation of the semi-derivative convolutions in the mixed actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum EvalPath {
    /// Grünwald–Letnikov semi-derivatives, convolved by a rectangle sum.
    Direct,
    /// `x̆ * y̆ = ẋ * y + x(0)·y(t)`, exact for piecewise-linear signals.
    #[default]
    Reduced,
}

impl EvalPath {
    pub fn name(self) -> &'static str {
        match self {
            EvalPath::Direct => "direct",
            EvalPath::Reduced => "reduced",
        }
    }
}

impl fmt::Display for EvalPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EvalPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(EvalPath::Direct),
            "reduced" => Ok(EvalPath::Reduced),
            _ => Err(Error::invalid(format!("unknown scheme '{s}' (expected direct or reduced)"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum ModelRef<'a> {
    Sdof(&'a SdofModel),
    Mdof(&'a MdofModel),
}

impl<'a> From<&'a SdofModel> for ModelRef<'a> {
    fn from(m: &'a SdofModel) -> Self {
        ModelRef::Sdof(m)
    }
}

impl<'a> From<&'a MdofModel> for ModelRef<'a> {
    fn from(m: &'a MdofModel) -> Self {
        ModelRef::Mdof(m)
    }
}

/// `∫₀ᵗ ẋ(τ) ẏ(t − τ) dτ` for piecewise-linear `x`, `y`.
pub(crate) fn slope_conv(x: &[f64], y: &[f64], h: f64) -> f64 {
    let n = x.len() - 1;
    let mut s = 0.0;
    for k in 0..n {
        s += (x[k + 1] - x[k]) * (y[n - k] - y[n - k - 1]);
    }
    s / h
}

/// `∫₀ᵗ ẋ(τ) y(t − τ) dτ` for piecewise-linear `x`, `y`.
pub(crate) fn slope_value_conv(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() - 1;
    let mut s = 0.0;
    for k in 0..n {
        s += (x[k + 1] - x[k]) * (y[n - k] + y[n - k - 1]);
    }
    0.5 * s
}

/// `∫₀ᵗ ẋ(τ) ẏ(τ) dτ` for piecewise-linear `x`, `y`.
pub(crate) fn slope_inner(x: &[f64], y: &[f64], h: f64) -> f64 {
    let mut s = 0.0;
    for k in 0..x.len() - 1 {
        s += (x[k + 1] - x[k]) * (y[k + 1] - y[k]);
    }
    s / h
}

/// Semi-derivative convolution `[x̆ * y̆](t)` along the chosen path.
pub fn half_conv(path: EvalPath, x: &Signal, y: &Signal) -> Result<f64> {
    x.grid().ensure_same(&y.grid(), "half_conv")?;
    match path {
        EvalPath::Reduced => Ok(slope_value_conv(x.values(), y.values()) + x.first() * y.last()),
        EvalPath::Direct => {
            let gx = frac_deriv(Side::Left, x, FracOrder::HALF);
            let gy = frac_deriv(Side::Left, y, FracOrder::HALF);
            Ok(gl_pair(&gx, &gy))
        }
    }
}

/// `h Σ_{k=0}^{n} x_k y_{n−k}` for semi-derivative samples.
fn gl_pair(gx: &Signal, gy: &Signal) -> f64 {
    let (x, y) = (gx.values(), gy.values());
    let n = x.len() - 1;
    let mut s = 0.0;
    for k in 0..=n {
        s += x[k] * y[n - k];
    }
    gx.grid().h() * s
}

fn mismatch(kind: ActionKind, what: &str) -> Error {
    Error::invalid(format!("{kind} requires {what}"))
}

fn sdof_for(kind: ActionKind, model: ModelRef<'_>) -> Result<&SdofModel> {
    match model {
        ModelRef::Sdof(m) => Ok(m),
        ModelRef::Mdof(_) => Err(mismatch(kind, "an SDOF model")),
    }
}

fn scalar_u(kind: ActionKind, traj: &Trajectory) -> Result<&Signal> {
    if traj.u().len() != 1 {
        return Err(mismatch(kind, "a scalar displacement trajectory"));
    }
    Ok(&traj.u()[0])
}

/// Declared `u̇(0)` or, failing that, the one-sided difference at node 0.
fn initial_velocity(traj: &Trajectory, i: usize) -> f64 {
    match traj.rates() {
        Some(r) => r.velocity[i],
        None => derivative(&traj.u()[i]).first(),
    }
}

fn initial_force_rate(traj: &Trajectory, e: usize) -> f64 {
    match traj.rates() {
        Some(r) => r.force[e],
        None => derivative(&traj.j()[e]).first(),
    }
}

/// The mixed system for either MCA kind, with dimensions checked.
fn mca_model(kind: ActionKind, model: ModelRef<'_>, traj: &Trajectory) -> Result<MdofModel> {
    let md = match (kind, model) {
        (ActionKind::McaSdof, ModelRef::Sdof(m)) => m.as_mdof()?,
        (ActionKind::McaMdof, ModelRef::Mdof(m)) => m.clone(),
        (ActionKind::McaSdof, _) => return Err(mismatch(kind, "an SDOF model")),
        (ActionKind::McaMdof, _) => return Err(mismatch(kind, "an MDOF model")),
        _ => unreachable!("mixed kinds only"),
    };
    if traj.u().len() != md.n_dof() || traj.j().len() != md.n_el() {
        return Err(mismatch(
            kind,
            &format!("a mixed trajectory with {} displacement and {} impulse components", md.n_dof(), md.n_el()),
        ));
    }
    Ok(md)
}

/// Semi-derivative samples used by the DIRECT path, computed once per
/// component.
struct HalfDerivs {
    u: Vec<Signal>,
    j: Vec<Signal>,
}

impl HalfDerivs {
    fn new(z: &Trajectory) -> Self {
        let d = |s: &Signal| frac_deriv(Side::Left, s, FracOrder::HALF);
        HalfDerivs {
            u: z.u().iter().map(d).collect(),
            j: z.j().iter().map(d).collect(),
        }
    }
}

fn mca_half(path: EvalPath, x: &Signal, y: &Signal, gx: Option<&Signal>, gy: Option<&Signal>) -> f64 {
    match (path, gx, gy) {
        (EvalPath::Direct, Some(gx), Some(gy)) => gl_pair(gx, gy),
        _ => slope_value_conv(x.values(), y.values()) + x.first() * y.last(),
    }
}

/// `Φ(a, b) = Σ M_ij P(aᵤi, bᵤj) − Σ A_ef P(aJe, bJf)
///          + Σ B_ie [X(aJe, bᵤi) + X(bJe, aᵤi)] + Σ C_ij X(aᵤi, bᵤj)`
/// with `P(x, y) = [ẋ * ẏ](t)` and `X(x, y) = [x̆ * y̆](t)`.
fn mca_bilinear(md: &MdofModel, path: EvalPath, a: &Trajectory, b: &Trajectory) -> Result<f64> {
    a.grid().ensure_same(&b.grid(), "action bilinear form")?;
    let h = a.grid().h();
    let (ga, gb) = match path {
        EvalPath::Direct => (Some(HalfDerivs::new(a)), Some(HalfDerivs::new(b))),
        EvalPath::Reduced => (None, None),
    };
    fn gu(g: &Option<HalfDerivs>, i: usize) -> Option<&Signal> {
        g.as_ref().map(|g| &g.u[i])
    }
    fn gj(g: &Option<HalfDerivs>, e: usize) -> Option<&Signal> {
        g.as_ref().map(|g| &g.j[e])
    }
    let m = md.mass();
    let c = md.damping();
    let bm = md.equilibrium();
    let am = md.flexibility();
    let mut total = 0.0;
    for i in 0..md.n_dof() {
        for j in 0..md.n_dof() {
            if m[(i, j)] != 0.0 {
                total += m[(i, j)] * slope_conv(a.u()[i].values(), b.u()[j].values(), h);
            }
            if c[(i, j)] != 0.0 {
                total += c[(i, j)] * mca_half(path, &a.u()[i], &b.u()[j], gu(&ga, i), gu(&gb, j));
            }
        }
    }
    for e in 0..md.n_el() {
        for f in 0..md.n_el() {
            if am[(e, f)] != 0.0 {
                total -= am[(e, f)] * slope_conv(a.j()[e].values(), b.j()[f].values(), h);
            }
        }
    }
    for i in 0..md.n_dof() {
        for e in 0..md.n_el() {
            let bie = bm[(i, e)];
            if bie != 0.0 {
                total += bie
                    * (mca_half(path, &a.j()[e], &b.u()[i], gj(&ga, e), gu(&gb, i))
                        + mca_half(path, &b.j()[e], &a.u()[i], gj(&gb, e), gu(&ga, i)));
            }
        }
    }
    Ok(total)
}

/// `−Σ [uᵢ * f̂ᵢ](t) − Σ uᵢ(t) ĵᵢ(0)`.
fn mca_linear(md: &MdofModel, z: &Trajectory) -> Result<f64> {
    let f = md.sample_forcing(z.grid());
    let mut total = 0.0;
    for (i, ui) in z.u().iter().enumerate() {
        total -= convolve_final(ui, &f[i])? + ui.last() * md.j_hat_0()[i];
    }
    Ok(total)
}

fn tau_signal(g: Grid) -> Signal {
    Signal::from_parts(g, g.nodes())
}

/// `f(τ) = [τ * f̂](τ) + (m + cτ)u₀ + m τ v₀`.
pub fn gurtin_forcing(model: &SdofModel, u0: f64, v0: f64, grid: Grid) -> Result<Signal> {
    let conv = convolve(&tau_signal(grid), &model.forcing().sample(grid))?;
    Ok(Signal::from_parts(
        grid,
        grid.nodes()
            .iter()
            .zip(conv.values())
            .map(|(&t, &cv)| cv + (model.m() + model.c() * t) * u0 + model.m() * t * v0)
            .collect(),
    ))
}

fn gurtin_bilinear(model: &SdofModel, x: &Signal, y: &Signal) -> Result<f64> {
    let g = x.grid();
    let s = convolve(x, y)?;
    Ok(model.m() * s.last()
        + convolve_final(&Signal::constant(g, model.c()), &s)?
        + convolve_final(&tau_signal(g).scale(model.k()), &s)?)
}

fn hamilton_bilinear(model: &SdofModel, x: &Signal, y: &Signal) -> Result<f64> {
    let h = x.grid().h();
    Ok(model.m() * slope_inner(x.values(), y.values(), h) - model.k() * inner_product(x, y)?)
}

fn tonti_bilinear(model: &SdofModel, x: &Signal, y: &Signal) -> Result<f64> {
    let h = x.grid().h();
    Ok(model.m() * slope_conv(x.values(), y.values(), h)
        // ∫ ẋ(t − τ) y(τ) dτ = [ẋ * y](t)
        + model.c() * slope_value_conv(x.values(), y.values())
        + model.k() * convolve_final(x, y)?)
}

/// Bilinear part and the linear functional for one kind, as closures over
/// the state shape; the Gurtin load is fixed by the base trajectory.
enum Parts {
    Scalar {
        model: SdofModel,
        kind: ActionKind,
        gurtin_load: Option<Signal>,
    },
    Mixed {
        model: MdofModel,
        path: EvalPath,
    },
}

impl Parts {
    fn new(kind: ActionKind, model: ModelRef<'_>, base: &Trajectory, path: EvalPath) -> Result<Self> {
        if kind.is_mixed() {
            return Ok(Parts::Mixed {
                model: mca_model(kind, model, base)?,
                path,
            });
        }
        let m = sdof_for(kind, model)?.clone();
        let u = scalar_u(kind, base)?;
        let gurtin_load = match kind {
            ActionKind::Gurtin => Some(gurtin_forcing(&m, u.first(), initial_velocity(base, 0), u.grid())?),
            _ => None,
        };
        Ok(Parts::Scalar {
            model: m,
            kind,
            gurtin_load,
        })
    }

    fn check(&self, kind: ActionKind, z: &Trajectory) -> Result<()> {
        match self {
            Parts::Scalar { .. } => scalar_u(kind, z).map(|_| ()),
            Parts::Mixed { model, .. } => {
                if z.u().len() != model.n_dof() || z.j().len() != model.n_el() {
                    Err(mismatch(kind, "matching trajectory dimensions"))
                } else {
                    Ok(())
                }
            }
        }
    }

    fn bilinear(&self, a: &Trajectory, b: &Trajectory) -> Result<f64> {
        match self {
            Parts::Scalar { model, kind, .. } => {
                let (x, y) = (&a.u()[0], &b.u()[0]);
                x.grid().ensure_same(&y.grid(), "action bilinear form")?;
                match kind {
                    ActionKind::Hamilton => hamilton_bilinear(model, x, y),
                    ActionKind::Gurtin => gurtin_bilinear(model, x, y),
                    ActionKind::Tonti => tonti_bilinear(model, x, y),
                    _ => unreachable!("scalar kinds only"),
                }
            }
            Parts::Mixed { model, path } => mca_bilinear(model, *path, a, b),
        }
    }

    fn linear(&self, z: &Trajectory) -> Result<f64> {
        match self {
            Parts::Scalar {
                model,
                kind,
                gurtin_load,
            } => {
                let u = &z.u()[0];
                let g = u.grid();
                match kind {
                    ActionKind::Hamilton => inner_product(&model.forcing().sample(g), u),
                    ActionKind::Gurtin => Ok(-convolve_final(gurtin_load.as_ref().expect("built for GURTIN"), u)?),
                    ActionKind::Tonti => Ok(-convolve_final(u, &model.forcing().sample(g))?),
                    _ => unreachable!("scalar kinds only"),
                }
            }
            Parts::Mixed { model, .. } => mca_linear(model, z),
        }
    }
}

/// Value of the action functional at the final time.
///
/// HAMILTON: `∫ ½m u̇² − ½k u² + f̂ u`. GURTIN: `½m[u*u] + ½[c*[u*u]] +
/// ½[kτ*[u*u]] − [f*u]` with the load built from `u(0)` and `u̇(0)`.
/// TONTI: `½m[u̇*u̇] + ½c[u̇*u] + ½k[u*u] − [u*f̂]`. MCA: `½ u̇ᵀ*Mu̇ −
/// ½ J̇ᵀ*AJ̇ + J̆ᵀ*Bᵀŭ + ½ ŭᵀ*Cŭ − uᵀ*f̂ − uᵀ(t)ĵ(0)`. `path` only affects the
/// MCA kinds.
pub fn action_value(kind: ActionKind, model: ModelRef<'_>, traj: &Trajectory, path: EvalPath) -> Result<f64> {
    let parts = Parts::new(kind, model, traj, path)?;
    Ok(0.5 * parts.bilinear(traj, traj)? + parts.linear(traj)?)
}

/// Gateaux derivative of [`action_value`] at `traj` in `direction`.
pub fn action_variation(
    kind: ActionKind,
    model: ModelRef<'_>,
    traj: &Trajectory,
    direction: &Trajectory,
    path: EvalPath,
) -> Result<f64> {
    let parts = Parts::new(kind, model, traj, path)?;
    parts.check(kind, direction)?;
    Ok(0.5 * (parts.bilinear(traj, direction)? + parts.bilinear(direction, traj)?) + parts.linear(direction)?)
}

fn pinned(what: &str, d: &Signal, end_too: bool) -> Result<()> {
    let tol = 1e-12 * (1.0 + d.sup_norm());
    if d.first().abs() > tol || (end_too && d.last().abs() > tol) {
        return Err(Error::invalid(format!(
            "{what}: direction must vanish at τ = 0{}",
            if end_too { " and τ = t" } else { "" }
        )));
    }
    Ok(())
}

/// `∫₀ᵗ m(δu̇)² − k(δu)² dτ`.
pub fn hamilton_second_variation(model: &SdofModel, direction: &Signal) -> Result<f64> {
    pinned("hamilton_second_variation", direction, true)?;
    hamilton_bilinear(model, direction, direction)
}

/// `∫₀ᵗ m u̇ δu̇ − k u δu + f̂ δu − c u̇ δu dτ`.
pub fn rayleigh_variation(model: &SdofModel, u: &Signal, direction: &Signal) -> Result<f64> {
    pinned("rayleigh_variation", direction, true)?;
    let g = u.grid();
    let hv = hamilton_bilinear(model, u, direction)? + inner_product(&model.forcing().sample(g), direction)?;
    Ok(hv - model.c() * inner_product(&derivative(u), direction)?)
}

/// One named field residual with its node exclusions.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldResidual {
    pub name: String,
    pub signal: Signal,
    /// Nodes at either end left out of the norms.
    pub excluded_nodes: usize,
}

impl FieldResidual {
    fn new(name: impl Into<String>, signal: Signal) -> Self {
        FieldResidual {
            name: name.into(),
            signal,
            excluded_nodes: 0,
        }
    }

    fn kept(&self) -> Signal {
        let v = self.signal.values();
        let e = self.excluded_nodes;
        if e == 0 {
            return self.signal.clone();
        }
        let mut w = v.to_vec();
        for x in w.iter_mut().take(e) {
            *x = 0.0;
        }
        for x in w.iter_mut().rev().take(e) {
            *x = 0.0;
        }
        Signal::from_parts(self.signal.grid(), w)
    }

    pub fn sup_norm(&self) -> f64 {
        self.kept().sup_norm()
    }

    pub fn l2_norm(&self) -> f64 {
        self.kept().l2_norm()
    }
}

/// Euler–Lagrange residuals: field equations as signals and initial
/// conditions as scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub kind: String,
    pub fields: Vec<FieldResidual>,
    pub initial: Vec<(String, f64)>,
}

impl ResidualReport {
    pub fn field(&self, name: &str) -> Option<&FieldResidual> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn initial(&self, name: &str) -> Option<f64> {
        self.initial.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// Largest field sup-norm.
    pub fn max_field_sup(&self) -> f64 {
        self.fields.iter().map(FieldResidual::sup_norm).fold(0.0, f64::max)
    }

    /// Largest initial-condition residual magnitude.
    pub fn max_initial(&self) -> f64 {
        self.initial.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max)
    }

    /// CSV `name,sup_norm,l2_norm,excluded_nodes`; initial-condition rows
    /// report the magnitude in both norm columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,sup_norm,l2_norm,excluded_nodes\n");
        for f in &self.fields {
            out.push_str(&format!(
                "{},{},{},{}\n",
                f.name,
                fmt_f64(f.sup_norm()),
                fmt_f64(f.l2_norm()),
                f.excluded_nodes
            ));
        }
        for (n, v) in &self.initial {
            out.push_str(&format!("{},{},{},0\n", n, fmt_f64(v.abs()), fmt_f64(v.abs())));
        }
        out
    }
}

fn combine(g: Grid, terms: &[(f64, &Signal)]) -> Signal {
    let mut v = vec![0.0; g.len()];
    for (c, s) in terms {
        if *c != 0.0 {
            for (acc, x) in v.iter_mut().zip(s.values()) {
                *acc += c * x;
            }
        }
    }
    Signal::from_parts(g, v)
}

fn oscillator_residual(m: f64, c: f64, k: f64, u: &Signal, f: &Signal) -> Signal {
    combine(
        u.grid(),
        &[(m, &second_derivative(u)), (c, &derivative(u)), (k, u), (-1.0, f)],
    )
}

/// Residuals of the strong-form equations recovered from each action.
///
/// HAMILTON: `motion = m ü + k u − f̂`. GURTIN: `integro_differential =
/// m u + c*u + kτ*u − f`. TONTI: `motion = m ü + c u̇ + k u − f̂` and
/// `momentum_initial = m u̇(0) + ½c u(0)`. MCA_SDOF: `motion = m ü + c u̇ +
/// J̇ − f̂`, `compatibility = a J̈ − u̇`, `momentum_initial = m u̇(0) + c u(0)
/// + J(0) − ĵ(0)`, `compatibility_initial = a J̇(0) − u(0)`. MCA_MDOF: the
/// matrix forms `M ü + C u̇ + B J̇ − f̂` and `−A J̈ + Bᵀ u̇` with their initial
/// counterparts, suffixed `[i]`.
///
/// Declared initial rates on the trajectory take the place of `u̇(0)` and
/// `J̇(0)` in the initial-condition residuals.
pub fn el_residuals(kind: ActionKind, model: ModelRef<'_>, traj: &Trajectory) -> Result<ResidualReport> {
    let g = traj.grid();
    let mut fields = Vec::new();
    let mut initial = Vec::new();
    match kind {
        ActionKind::Hamilton | ActionKind::Gurtin | ActionKind::Tonti => {
            let m = sdof_for(kind, model)?;
            let u = scalar_u(kind, traj)?;
            let f = m.forcing().sample(g);
            match kind {
                ActionKind::Hamilton => {
                    fields.push(FieldResidual::new("motion", oscillator_residual(m.m(), 0.0, m.k(), u, &f)));
                }
                ActionKind::Gurtin => {
                    let load = gurtin_forcing(m, u.first(), initial_velocity(traj, 0), g)?;
                    let cu = convolve(&Signal::constant(g, m.c()), u)?;
                    let ku = convolve(&tau_signal(g).scale(m.k()), u)?;
                    fields.push(FieldResidual::new(
                        "integro_differential",
                        combine(g, &[(m.m(), u), (1.0, &cu), (1.0, &ku), (-1.0, &load)]),
                    ));
                }
                _ => {
                    fields.push(FieldResidual::new("motion", oscillator_residual(m.m(), m.c(), m.k(), u, &f)));
                    initial.push((
                        "momentum_initial".to_string(),
                        m.m() * initial_velocity(traj, 0) + 0.5 * m.c() * u.first(),
                    ));
                }
            }
        }
        ActionKind::McaSdof => {
            let m = sdof_for(kind, model)?;
            mca_model(kind, model, traj)?;
            let (u, j) = (&traj.u()[0], &traj.j()[0]);
            let f = m.forcing().sample(g);
            fields.push(FieldResidual::new(
                "motion",
                combine(g, &[(m.m(), &second_derivative(u)), (m.c(), &derivative(u)), (1.0, &derivative(j)), (-1.0, &f)]),
            ));
            fields.push(FieldResidual::new(
                "compatibility",
                combine(g, &[(m.a(), &second_derivative(j)), (-1.0, &derivative(u))]),
            ));
            initial.push((
                "momentum_initial".to_string(),
                m.m() * initial_velocity(traj, 0) + m.c() * u.first() + j.first() - m.j_hat_0(),
            ));
            initial.push((
                "compatibility_initial".to_string(),
                m.a() * initial_force_rate(traj, 0) - u.first(),
            ));
        }
        ActionKind::McaMdof => {
            let md = mca_model(kind, model, traj)?;
            let (mm, cm, bm, am) = (md.mass(), md.damping(), md.equilibrium(), md.flexibility());
            let f = md.sample_forcing(g);
            let du: Vec<Signal> = traj.u().iter().map(derivative).collect();
            let ddu: Vec<Signal> = traj.u().iter().map(second_derivative).collect();
            let dj: Vec<Signal> = traj.j().iter().map(derivative).collect();
            let ddj: Vec<Signal> = traj.j().iter().map(second_derivative).collect();
            for i in 0..md.n_dof() {
                let mut terms: Vec<(f64, &Signal)> = Vec::new();
                for j in 0..md.n_dof() {
                    terms.push((mm[(i, j)], &ddu[j]));
                    terms.push((cm[(i, j)], &du[j]));
                }
                for e in 0..md.n_el() {
                    terms.push((bm[(i, e)], &dj[e]));
                }
                terms.push((-1.0, &f[i]));
                fields.push(FieldResidual::new(format!("motion[{i}]"), combine(g, &terms)));
            }
            for e in 0..md.n_el() {
                let mut terms: Vec<(f64, &Signal)> = Vec::new();
                for ff in 0..md.n_el() {
                    terms.push((-am[(e, ff)], &ddj[ff]));
                }
                for i in 0..md.n_dof() {
                    terms.push((bm[(i, e)], &du[i]));
                }
                fields.push(FieldResidual::new(format!("compatibility[{e}]"), combine(g, &terms)));
            }
            for i in 0..md.n_dof() {
                let mut r = -md.j_hat_0()[i];
                for j in 0..md.n_dof() {
                    r += mm[(i, j)] * initial_velocity(traj, j) + cm[(i, j)] * traj.u()[j].first();
                }
                for e in 0..md.n_el() {
                    r += bm[(i, e)] * traj.j()[e].first();
                }
                initial.push((format!("momentum_initial[{i}]"), r));
            }
            for e in 0..md.n_el() {
                let mut r = 0.0;
                for ff in 0..md.n_el() {
                    r -= am[(e, ff)] * initial_force_rate(traj, ff);
                }
                for i in 0..md.n_dof() {
                    r += bm[(i, e)] * traj.u()[i].first();
                }
                initial.push((format!("compatibility_initial[{e}]"), r));
            }
        }
    }
    Ok(ResidualReport {
        kind: kind.name().to_string(),
        fields,
        initial,
    })
}

/// Residuals of the physical equation and of its negative-damping mirror:
/// `physical = m ü + c u̇ + k u − f̂`, `mirror = m v̈ − c v̇ + k v − f̂`.
pub fn bateman_residuals(model: &SdofModel, u: &Signal, v: &Signal) -> Result<ResidualReport> {
    u.grid().ensure_same(&v.grid(), "bateman_residuals")?;
    let f = model.forcing().sample(u.grid());
    Ok(ResidualReport {
        kind: "BATEMAN".to_string(),
        fields: vec![
            FieldResidual::new("physical", oscillator_residual(model.m(), model.c(), model.k(), u, &f)),
            FieldResidual::new("mirror", oscillator_residual(model.m(), -model.c(), model.k(), v, &f)),
        ],
        initial: Vec::new(),
    })
}

/// Number of directions in every battery.
pub const BATTERY_SIZE: usize = 16;
const BATTERY_SEGMENTS: usize = 6;

/// Random piecewise-cubic Hermite signal on `[0, t]` with zero value at
/// τ = 0 and, when `pin_end` is set, at τ = t.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteDirection {
    t_final: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl HermiteDirection {
    pub fn new(t_final: f64, pin_end: bool, seed: u64, stream: u64) -> Self {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(stream);
        let seg = BATTERY_SEGMENTS;
        let mut values: Vec<f64> = (0..=seg).map(|_| r.gen_range(-1.0..1.0)).collect();
        let slopes = (0..=seg).map(|_| r.gen_range(-1.0..1.0) * seg as f64 / t_final).collect();
        values[0] = 0.0;
        if pin_end {
            values[seg] = 0.0;
        }
        HermiteDirection { t_final, values, slopes }
    }

    pub fn eval(&self, tau: f64) -> f64 {
        let seg = BATTERY_SEGMENTS;
        let w = self.t_final / seg as f64;
        let i = ((tau / w).floor() as usize).min(seg - 1);
        let s = (tau - i as f64 * w) / w;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.values[i] + h10 * w * self.slopes[i] + h01 * self.values[i + 1] + h11 * w * self.slopes[i + 1]
    }

    pub fn sample(&self, grid: Grid) -> Signal {
        let mut s = sample(|t| self.eval(t), grid).expect("finite by construction").into_values();
        s[0] = 0.0;
        if self.values[BATTERY_SEGMENTS] == 0.0 {
            let n = s.len() - 1;
            s[n] = 0.0;
        }
        Signal::from_parts(grid, s)
    }
}

/// The fixed battery of [`BATTERY_SIZE`] scalar directions.
pub fn direction_battery(grid: Grid, seed: u64, pin_end: bool) -> Vec<Signal> {
    (0..BATTERY_SIZE as u64)
        .map(|i| HermiteDirection::new(grid.t_final(), pin_end, seed, i).sample(grid))
        .collect()
}

/// Mixed directions: every displacement and impulse component drawn
/// independently, all vanishing at τ = 0.
pub fn mixed_direction_battery(grid: Grid, seed: u64, n_u: usize, n_j: usize) -> Vec<Trajectory> {
    (0..BATTERY_SIZE as u64)
        .map(|i| {
            let comp = |c: usize| HermiteDirection::new(grid.t_final(), false, seed, (i << 16) | c as u64).sample(grid);
            Trajectory::new((0..n_u).map(comp).collect(), (n_u..n_u + n_j).map(comp).collect())
                .expect("components share the grid")
        })
        .collect()
}

/// One action value row.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionRow {
    pub kind: ActionKind,
    pub path: Option<EvalPath>,
    pub value: f64,
    pub h: f64,
}

/// CSV `kind,path,value,h`; the path is empty for non-mixed kinds.
pub fn action_csv(rows: &[ActionRow]) -> String {
    let mut out = String::from("kind,path,value,h\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.kind,
            r.path.map(EvalPath::name).unwrap_or(""),
            fmt_f64(r.value),
            fmt_f64(r.h)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{analytic_sdof, build_shear_building, Forcing};
    use std::f64::consts::PI;

    fn grid(t: f64, n: usize) -> Grid {
        Grid::new(t, n).unwrap()
    }

    fn preset() -> SdofModel {
        SdofModel::free(1.0, 0.2, 1.0).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for k in ActionKind::ALL {
            assert_eq!(k.name().parse::<ActionKind>().unwrap(), k);
        }
        assert_eq!("mca-sdof".parse::<ActionKind>().unwrap(), ActionKind::McaSdof);
        assert!("x".parse::<ActionKind>().is_err());
        assert_eq!("DIRECT".parse::<EvalPath>().unwrap(), EvalPath::Direct);
    }

    #[test]
    fn pl_primitives_are_exact() {
        // x = τ², y = τ sampled at τ = 0, 1, 2 and read as piecewise-linear
        let x = [0.0, 1.0, 4.0];
        let y = [0.0, 1.0, 2.0];
        assert_eq!(slope_conv(&x, &y, 1.0), 4.0);
        assert_eq!(slope_value_conv(&x, &y), 3.0);
        // ẋ = 1, y = 1 on [0, 3]: [ẋ * y](t) = 3
        let g = grid(3.0, 6);
        let lin = sample(|t| t, g).unwrap();
        let one = Signal::constant(g, 1.0);
        assert!((slope_value_conv(lin.values(), one.values()) - 3.0).abs() < 1e-14);
        assert!((slope_inner(lin.values(), lin.values(), g.h()) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn half_conv_closed_forms() {
        // 1̆ * 1̆ = 1 and τ̆ * 1̆ = t for both paths
        let g = grid(2.0, 64);
        let one = Signal::constant(g, 1.0);
        let lin = sample(|t| t, g).unwrap();
        for p in [EvalPath::Direct, EvalPath::Reduced] {
            assert!((half_conv(p, &one, &one).unwrap() - 1.0).abs() < 1e-12, "{p}");
            assert!((half_conv(p, &lin, &one).unwrap() - 2.0).abs() < 1e-12, "{p}");
        }
        // sin̆ * cos̆ = d/dt [sin * cos](t) = (sin t + t cos t)/2; DIRECT is
        // first order, REDUCED second
        let exact = 0.5 * (2f64.sin() + 2.0 * 2f64.cos());
        for (p, gain, tol) in [(EvalPath::Direct, 3.0, 5e-3), (EvalPath::Reduced, 12.0, 1e-4)] {
            let e: Vec<f64> = [64, 256]
                .iter()
                .map(|&n| {
                    let g = grid(2.0, n);
                    (half_conv(p, &sample(f64::sin, g).unwrap(), &sample(f64::cos, g).unwrap()).unwrap() - exact).abs()
                })
                .collect();
            assert!(e[1] < e[0] / gain && e[1] < tol, "{p}: {e:?}");
        }
    }

    #[test]
    fn zero_trajectory_has_zero_action() {
        let g = grid(1.0, 16);
        let m = preset();
        let z = Trajectory::displacement(Signal::zeros(g));
        for k in [ActionKind::Hamilton, ActionKind::Gurtin, ActionKind::Tonti] {
            assert_eq!(action_value(k, (&m).into(), &z, EvalPath::Reduced).unwrap(), 0.0);
        }
        let zm = Trajectory::new(vec![Signal::zeros(g)], vec![Signal::zeros(g)]).unwrap();
        assert_eq!(action_value(ActionKind::McaSdof, (&m).into(), &zm, EvalPath::Direct).unwrap(), 0.0);
        let b = build_shear_building(2, 1.0, 1.0, 0.1).unwrap();
        let zb = Trajectory::new(vec![Signal::zeros(g); 2], vec![Signal::zeros(g); 2]).unwrap();
        assert_eq!(action_value(ActionKind::McaMdof, (&b).into(), &zb, EvalPath::Reduced).unwrap(), 0.0);
    }

    #[test]
    fn hamilton_free_particle() {
        let g = grid(1.0, 10);
        let m = SdofModel::free(1.0, 0.0, 1.0).unwrap();
        // k enters only through −½k∫u²; take it out by hand
        let u = sample(|t| t, g).unwrap();
        let tr = Trajectory::displacement(u.clone());
        let v = action_value(ActionKind::Hamilton, (&m).into(), &tr, EvalPath::Reduced).unwrap();
        let pot = 0.5 * inner_product(&u, &u).unwrap();
        assert!((v + pot - 0.5).abs() < 1e-14);
    }

    #[test]
    fn kind_model_mismatch_is_rejected() {
        let g = grid(1.0, 8);
        let m = preset();
        let b = build_shear_building(2, 1.0, 1.0, 0.1).unwrap();
        let z = Trajectory::displacement(Signal::zeros(g));
        assert!(action_value(ActionKind::McaSdof, (&m).into(), &z, EvalPath::Reduced).is_err());
        assert!(action_value(ActionKind::Hamilton, (&b).into(), &z, EvalPath::Reduced).is_err());
        let zm = Trajectory::new(vec![Signal::zeros(g)], vec![Signal::zeros(g)]).unwrap();
        assert!(action_value(ActionKind::McaMdof, (&b).into(), &zm, EvalPath::Reduced).is_err());
    }

    #[test]
    fn second_variation_examples() {
        let g = grid(10.0, 400);
        let d = sample(|t| (PI * t / 10.0).sin(), g).unwrap();
        let m = SdofModel::free(1.0, 0.0, 1.0).unwrap();
        let v = hamilton_second_variation(&m, &d).unwrap();
        let exact = 5.0 * (PI * PI / 100.0 - 1.0);
        assert!((v - exact).abs() < 1e-3, "{v} vs {exact}");
        assert_eq!(hamilton_second_variation(&m, &Signal::zeros(g)).unwrap(), 0.0);
        assert!(hamilton_second_variation(&m, &sample(|t| t, g).unwrap()).is_err());
    }

    #[test]
    fn rayleigh_reduces_to_hamilton_without_damping() {
        let g = grid(10.0, 200);
        let m = SdofModel::new(1.0, 0.0, 2.0, Forcing::Harmonic { amplitude: 1.0, omega: 0.7, phase: 0.0 }, 0.0).unwrap();
        let u = sample(|t| (0.3 * t).cos(), g).unwrap();
        for d in direction_battery(g, 3, true) {
            let r = rayleigh_variation(&m, &u, &d).unwrap();
            let h = action_variation(
                ActionKind::Hamilton,
                (&m).into(),
                &Trajectory::displacement(u.clone()),
                &Trajectory::displacement(d),
                EvalPath::Reduced,
            )
            .unwrap();
            assert!((r - h).abs() <= 1e-13 * (1.0 + h.abs()));
        }
        assert_eq!(rayleigh_variation(&m, &u, &Signal::zeros(g)).unwrap(), 0.0);
    }

    #[test]
    fn rayleigh_vanishes_on_exact_solution() {
        let m = preset();
        let e: Vec<f64> = [100, 200, 400]
            .iter()
            .map(|&n| {
                let g = grid(10.0, n);
                let u = analytic_sdof(&m, 1.0, 0.0, g).unwrap().u()[0].clone();
                direction_battery(g, 1, true)
                    .iter()
                    .map(|d| rayleigh_variation(&m, &u, d).unwrap().abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
    }

    #[test]
    fn gurtin_forcing_examples() {
        let g = grid(2.0, 20);
        let m = SdofModel::new(1.0, 0.0, 1.0, Forcing::Zero, 0.0).unwrap();
        let f = gurtin_forcing(&m, 1.0, 0.0, g).unwrap();
        assert!(f.values().iter().all(|&v| v == 1.0));
        assert_eq!(gurtin_forcing(&preset(), 0.0, 0.0, g).unwrap().sup_norm(), 0.0);
        // f̂ ≡ 1 (a cosine of negligible frequency) with zero initial data:
        // f = [τ * 1] = τ²/2, exact for the trapezoid rule on a linear integrand
        let unit = Forcing::Harmonic {
            amplitude: 1.0,
            omega: 1e-300,
            phase: PI / 2.0,
        };
        let m = SdofModel::new(1.0, 0.0, 1.0, unit, 0.0).unwrap();
        let f = gurtin_forcing(&m, 0.0, 0.0, g).unwrap();
        for k in 0..g.len() {
            assert!((f.values()[k] - 0.5 * g.node(k).powi(2)).abs() < 1e-14);
        }
    }

    #[test]
    fn tonti_defect_and_motion() {
        let m = preset();
        let g = grid(10.0, 256);
        let u = analytic_sdof(&m, 1.0, 0.0, g).unwrap().u()[0].clone();
        let rates = crate::models::InitialRates {
            velocity: vec![0.0],
            force: vec![],
        };
        let tr = Trajectory::displacement(u).with_rates(rates).unwrap();
        let r = el_residuals(ActionKind::Tonti, (&m).into(), &tr).unwrap();
        assert!((r.initial("momentum_initial").unwrap() - 0.1).abs() < 1e-15);
        assert!(r.field("motion").unwrap().sup_norm() < 1e-2);
    }

    #[test]
    fn gurtin_zero_trajectory() {
        let g = grid(1.0, 8);
        let r = el_residuals(ActionKind::Gurtin, (&preset()).into(), &Trajectory::displacement(Signal::zeros(g))).unwrap();
        assert_eq!(r.max_field_sup(), 0.0);
        assert!(r.to_csv().starts_with("name,sup_norm,l2_norm,excluded_nodes\nintegro_differential,"));
    }

    #[test]
    fn bateman_examples() {
        let m = preset();
        let e: Vec<(f64, f64)> = [100, 200, 400]
            .iter()
            .map(|&n| {
                let g = grid(10.0, n);
                let cf = crate::models::ClosedForm::new(1.0, 0.2, 1.0, Forcing::Zero, 1.0, 0.0).unwrap();
                let mirror = crate::models::ClosedForm::new(1.0, -0.2, 1.0, Forcing::Zero, 1.0, 0.0).unwrap();
                let r = bateman_residuals(&m, &cf.sample(g).0, &mirror.sample(g).0).unwrap();
                (r.field("physical").unwrap().sup_norm(), r.field("mirror").unwrap().sup_norm())
            })
            .collect();
        assert!(e[0].0 > e[1].0 && e[1].0 > e[2].0, "{e:?}");
        assert!(e[0].1 > e[1].1 && e[1].1 > e[2].1, "{e:?}");
        let g = grid(1.0, 8);
        let z = bateman_residuals(&m, &Signal::zeros(g), &Signal::zeros(g)).unwrap();
        assert_eq!(z.max_field_sup(), 0.0);
    }

    #[test]
    fn battery_shape() {
        let g = grid(5.0, 50);
        let b = direction_battery(g, 9, true);
        assert_eq!(b.len(), BATTERY_SIZE);
        for d in &b {
            assert_eq!(d.first(), 0.0);
            assert_eq!(d.last(), 0.0);
            assert!(d.sup_norm() > 0.0);
        }
        let free = direction_battery(g, 9, false);
        assert!(free.iter().all(|d| d.first() == 0.0));
        assert!(free.iter().any(|d| d.last() != 0.0));
        assert_eq!(direction_battery(g, 9, true), b);
        assert_ne!(direction_battery(g, 10, true), b);
        let mixed = mixed_direction_battery(g, 9, 2, 3);
        assert_eq!(mixed[0].u().len(), 2);
        assert_eq!(mixed[0].j().len(), 3);
        assert_ne!(mixed[0].u()[0], mixed[0].u()[1]);
    }

    #[test]
    fn action_csv_layout() {
        let rows = [
            ActionRow { kind: ActionKind::Tonti, path: None, value: 0.5, h: 0.1 },
            ActionRow { kind: ActionKind::McaSdof, path: Some(EvalPath::Direct), value: -1.0, h: 0.1 },
        ];
        let csv = action_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "kind,path,value,h");
        assert!(lines[1].starts_with("TONTI,,5.0000000000000000e-1,"));
        assert!(lines[2].starts_with("MCA_SDOF,direct,"));
    }
}
