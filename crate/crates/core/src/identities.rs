//! Residual checks of the fractional integration-by-parts relations for
//! inner products and convolutions, and of the complementary-order results.
//!
//! Derivatives inside the relations use [`frac_deriv_split`], which carries
//! the endpoint singularity `u(0)τ^{−α}/Γ(1−α)` in closed form; sampled
//! parts are paired by trapezoid or product quadrature.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fracops::{frac_deriv_split, frac_integral, integral_any_order, EndpointSignal, FracOrder, Side};
use crate::grid::{convolve_final, derivative, inner_product, observed_orders, Grid, Signal};
use crate::io::{fmt_f64, fmt_opt};

/// The integration-by-parts relations checked by [`ibp_residual`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IdentityKind {
    /// `∫ f 𝒥₀₊^α g = ∫ (𝒥ₜ₋^α f) g`.
    InnerIntegral,
    /// `∫ φ 𝒟₀₊^α ψ = ∫ (𝒟ₜ₋^α φ) ψ + (𝒥ₜ₋^{1−α}φ)(t)ψ(t) − φ(0)(𝒥₀₊^{1−α}ψ)(0)`.
    InnerDeriv,
    /// `∫ φ ψ̇ = −∫ φ̇ ψ + φ(t)ψ(t) − φ(0)ψ(0)`.
    ClassicInner,
    /// Left-derivative convolution transfer.
    ConvLeft,
    /// Right-derivative convolution transfer.
    ConvRight,
    /// `∫ φ(t−τ) ψ̇(τ) = ∫ φ̇(τ) ψ(t−τ) + φ(0)ψ(t) − φ(t)ψ(0)`.
    ConvClassic,
    /// `∫ (𝒟^{1−α}φ)(τ)(𝒟^α ψ)(t−τ) = ∫ φ̇(τ) ψ(t−τ) + φ(0)ψ(t)`.
    ConvComplementary,
}

impl IdentityKind {
    pub const ALL: [IdentityKind; 7] = [
        IdentityKind::InnerIntegral,
        IdentityKind::InnerDeriv,
        IdentityKind::ClassicInner,
        IdentityKind::ConvLeft,
        IdentityKind::ConvRight,
        IdentityKind::ConvClassic,
        IdentityKind::ConvComplementary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IdentityKind::InnerIntegral => "INNER_INTEGRAL",
            IdentityKind::InnerDeriv => "INNER_DERIV",
            IdentityKind::ClassicInner => "CLASSIC_INNER",
            IdentityKind::ConvLeft => "CONV_LEFT",
            IdentityKind::ConvRight => "CONV_RIGHT",
            IdentityKind::ConvClassic => "CONV_CLASSIC",
            IdentityKind::ConvComplementary => "CONV_COMPLEMENTARY",
        }
    }

    /// Relations involving only integer-order derivatives; α is ignored.
    pub fn is_integer_order(self) -> bool {
        matches!(self, IdentityKind::ClassicInner | IdentityKind::ConvClassic)
    }

    /// Relations whose construction needs the complement 1 − α to be a valid order.
    pub fn needs_complement(self) -> bool {
        matches!(self, IdentityKind::ConvComplementary)
    }
}

impl fmt::Display for IdentityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IdentityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IdentityKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown identity kind '{s}'")))
    }
}

/// Label of a report: one of the seven relations, or one of the three
/// single-signal results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    Ibp(IdentityKind),
    /// `∫ u u̇ = ½[u²(t) − u²(0)]`.
    InnerUUdot,
    /// `∫ (𝒟ₜ₋^{1−α}u)(𝒟₀₊^α u) = ½[u²(t) + u²(0)]`.
    ComplementaryInner,
    /// `∫ (𝒟^{1−α}u)(τ)(𝒟^α u)(t−τ) = ∫ u̇(τ)u(t−τ) + u(0)u(t)`.
    ComplementaryConv,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Relation::Ibp(k) => f.write_str(k.name()),
            Relation::InnerUUdot => f.write_str("INNER_U_UDOT"),
            Relation::ComplementaryInner => f.write_str("COMPLEMENTARY_INNER"),
            Relation::ComplementaryConv => f.write_str("COMPLEMENTARY_CONV"),
        }
    }
}

/// Both sides of a relation and their normalized discrepancy.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub relation: Relation,
    pub alpha: f64,
    pub h: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs| / scale`.
    pub residual: f64,
    /// `max(|lhs|, |rhs|, 1)`.
    pub scale: f64,
}

impl IdentityReport {
    fn new(relation: Relation, alpha: f64, h: f64, lhs: f64, rhs: f64) -> Self {
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        IdentityReport {
            relation,
            alpha,
            h,
            lhs,
            rhs,
            residual: (lhs - rhs).abs() / scale,
            scale,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.lhs.is_finite() && self.rhs.is_finite() && self.residual.is_finite()
    }
}

/// `(𝒥^{order}u)` at node `k`; order 0 is the identity.
fn integral_at(side: Side, u: &Signal, order: f64, k: usize) -> f64 {
    integral_any_order(side, u, order).values()[k]
}

/// Evaluates both sides of `kind` for the pair `(φ, ψ)`.
pub fn ibp_residual(kind: IdentityKind, phi: &Signal, psi: &Signal, alpha: FracOrder) -> Result<IdentityReport> {
    let g = phi.grid();
    g.ensure_same(&psi.grid(), "ibp_residual")?;
    if kind.needs_complement() && alpha.is_integer() {
        return Err(Error::invalid(format!("{kind} requires alpha < 1 (the complement 1 - alpha vanishes)")));
    }
    let n = g.n_steps();
    let a = alpha.value();
    let c = 1.0 - a;
    let reg = |s: &Signal| EndpointSignal::regular(s.clone());
    let (lhs, rhs) = match kind {
        IdentityKind::InnerIntegral => (
            inner_product(phi, &frac_integral(Side::Left, psi, alpha))?,
            inner_product(&frac_integral(Side::Right, phi, alpha), psi)?,
        ),
        IdentityKind::InnerDeriv => {
            let lhs = reg(phi).inner(&frac_deriv_split(Side::Left, psi, alpha))?;
            let rhs = frac_deriv_split(Side::Right, phi, alpha).inner(&reg(psi))?
                + integral_at(Side::Right, phi, c, n) * psi.last()
                - phi.first() * integral_at(Side::Left, psi, c, 0);
            (lhs, rhs)
        }
        IdentityKind::ClassicInner => (
            inner_product(phi, &derivative(psi))?,
            -inner_product(&derivative(phi), psi)? + phi.last() * psi.last() - phi.first() * psi.first(),
        ),
        IdentityKind::ConvLeft => {
            let lhs = reg(phi).convolve_final(&frac_deriv_split(Side::Left, psi, alpha))?;
            let rhs = frac_deriv_split(Side::Left, phi, alpha).convolve_final(&reg(psi))?
                + integral_at(Side::Left, phi, c, 0) * psi.last()
                - phi.last() * integral_at(Side::Left, psi, c, 0);
            (lhs, rhs)
        }
        IdentityKind::ConvRight => {
            let lhs = reg(phi).convolve_final(&frac_deriv_split(Side::Right, psi, alpha))?;
            let rhs = frac_deriv_split(Side::Right, phi, alpha).convolve_final(&reg(psi))?
                + integral_at(Side::Right, phi, c, n) * psi.first()
                - phi.first() * integral_at(Side::Right, psi, c, n);
            (lhs, rhs)
        }
        IdentityKind::ConvClassic => (
            convolve_final(&derivative(psi), phi)?,
            convolve_final(&derivative(phi), psi)? + phi.first() * psi.last() - phi.last() * psi.first(),
        ),
        IdentityKind::ConvComplementary => {
            let lhs = frac_deriv_split(Side::Left, phi, alpha.complement()?)
                .convolve_final(&frac_deriv_split(Side::Left, psi, alpha))?;
            let rhs = convolve_final(&derivative(phi), psi)? + phi.first() * psi.last();
            (lhs, rhs)
        }
    };
    Ok(IdentityReport::new(Relation::Ibp(kind), a, g.h(), lhs, rhs))
}

/// `∫ u u̇ dτ` by central differences against `½[u²(t) − u²(0)]`.
pub fn inner_u_udot(u: &Signal) -> IdentityReport {
    let lhs = inner_product(u, &derivative(u)).expect("same grid");
    let rhs = 0.5 * (u.last() * u.last() - u.first() * u.first());
    IdentityReport::new(Relation::InnerUUdot, 1.0, u.grid().h(), lhs, rhs)
}

fn fractional_only(alpha: FracOrder, what: &str) -> Result<FracOrder> {
    alpha
        .complement()
        .map_err(|_| Error::invalid(format!("{what} requires alpha < 1 (the complement 1 - alpha vanishes)")))
}

/// Inner product of complementary-order right and left derivatives against
/// `½[u²(t) + u²(0)]`.
pub fn complementary_inner(u: &Signal, alpha: FracOrder) -> Result<IdentityReport> {
    let comp = fractional_only(alpha, "complementary_inner")?;
    let lhs = frac_deriv_split(Side::Right, u, comp).inner(&frac_deriv_split(Side::Left, u, alpha))?;
    let rhs = 0.5 * (u.last() * u.last() + u.first() * u.first());
    Ok(IdentityReport::new(Relation::ComplementaryInner, alpha.value(), u.grid().h(), lhs, rhs))
}

/// Convolution of complementary-order left derivatives against
/// `∫ u̇(τ)u(t−τ) dτ + u(0)u(t)`.
pub fn complementary_conv(u: &Signal, alpha: FracOrder) -> Result<IdentityReport> {
    let comp = fractional_only(alpha, "complementary_conv")?;
    let lhs = frac_deriv_split(Side::Left, u, comp).convolve_final(&frac_deriv_split(Side::Left, u, alpha))?;
    let rhs = convolve_final(&derivative(u), u)? + u.first() * u.last();
    Ok(IdentityReport::new(Relation::ComplementaryConv, alpha.value(), u.grid().h(), lhs, rhs))
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Smooth random function `a₀ + Σ aᵢ sin(ωᵢ τ/t + pᵢ)` on `[0, t]`, fixed by
/// `(seed, index)` independently of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothSignal {
    t_final: f64,
    offset: f64,
    modes: Vec<(f64, f64, f64)>,
}

impl SmoothSignal {
    pub fn new(t_final: f64, seed: u64, index: u64) -> Self {
        let mut r = rng_for(seed, index);
        let offset = r.gen_range(-1.0..1.0);
        let modes = (0..3)
            .map(|_| (r.gen_range(-1.0..1.0), r.gen_range(0.5..3.0), r.gen_range(0.0..std::f64::consts::TAU)))
            .collect();
        SmoothSignal { t_final, offset, modes }
    }

    pub fn eval(&self, tau: f64) -> f64 {
        let s = tau / self.t_final;
        self.offset + self.modes.iter().map(|(a, w, p)| a * (w * s + p).sin()).sum::<f64>()
    }

    pub fn sample(&self, grid: Grid) -> Signal {
        Signal::from_parts(grid, grid.nodes().into_iter().map(|t| self.eval(t)).collect())
    }
}

/// Random cubic path `u(τ) = u_a + (u_b − u_a)s + s(1 − s)(c₁ + c₂ s)`,
/// `s = τ/t`, pinned to `u_a` and `u_b` at the ends.
#[derive(Debug, Clone, PartialEq)]
pub struct PinnedCubic {
    t_final: f64,
    start: f64,
    end: f64,
    c1: f64,
    c2: f64,
}

impl PinnedCubic {
    pub fn new(t_final: f64, start: f64, end: f64, seed: u64, index: u64) -> Self {
        let mut r = rng_for(seed, 1 << 32 | index);
        PinnedCubic {
            t_final,
            start,
            end,
            c1: r.gen_range(-2.0..2.0),
            c2: r.gen_range(-2.0..2.0),
        }
    }

    pub fn eval(&self, tau: f64) -> f64 {
        let s = tau / self.t_final;
        self.start + (self.end - self.start) * s + s * (1.0 - s) * (self.c1 + self.c2 * s)
    }

    pub fn sample(&self, grid: Grid) -> Signal {
        Signal::from_parts(grid, grid.nodes().into_iter().map(|t| self.eval(t)).collect())
    }
}

/// Parameters of an identity sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub kinds: Vec<IdentityKind>,
    pub alphas: Vec<FracOrder>,
    pub grids: Vec<usize>,
    pub t_final: f64,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            kinds: IdentityKind::ALL.to_vec(),
            alphas: [0.25, 0.5, 0.75].iter().map(|&a| FracOrder::new(a).unwrap()).collect(),
            grids: vec![64, 128, 256],
            t_final: 1.0,
            seed: 42,
        }
    }
}

/// One row of a sweep: a report on one grid plus its observed order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub kind: IdentityKind,
    pub n: usize,
    pub report: IdentityReport,
    /// Observed order against the previous (coarser) grid.
    pub order_estimate: Option<f64>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() || self.alphas.is_empty() {
            return Err(Error::invalid("sweep needs at least one kind and one alpha"));
        }
        if self.grids.len() < 2 || self.grids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("sweep grids must be strictly increasing with at least two entries"));
        }
        Grid::new(self.t_final, self.grids[0])?;
        for k in &self.kinds {
            if k.needs_complement() && self.alphas.iter().any(|a| a.is_integer()) {
                return Err(Error::invalid(format!("alpha = 1 is not allowed for {k}")));
            }
        }
        Ok(())
    }
}

/// Runs every `(kind, α, n)` cell; rows come out ordered by kind, α, then n.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let phi = SmoothSignal::new(cfg.t_final, cfg.seed, 0);
    let psi = SmoothSignal::new(cfg.t_final, cfg.seed, 1);
    let mut kinds = cfg.kinds.clone();
    kinds.sort();
    kinds.dedup();
    let mut alphas = cfg.alphas.clone();
    alphas.sort_by(|a, b| a.value().total_cmp(&b.value()));
    alphas.dedup();
    let mut rows = Vec::new();
    for kind in kinds {
        for &alpha in &alphas {
            let mut block = Vec::new();
            for &n in &cfg.grids {
                let g = Grid::new(cfg.t_final, n)?;
                block.push((n, ibp_residual(kind, &phi.sample(g), &psi.sample(g), alpha)?));
            }
            let hs: Vec<f64> = block.iter().map(|(_, r)| r.h).collect();
            let res: Vec<f64> = block.iter().map(|(_, r)| r.residual).collect();
            for ((n, report), order_estimate) in block.into_iter().zip(observed_orders(&hs, &res)) {
                rows.push(SweepRow {
                    kind,
                    n,
                    report,
                    order_estimate,
                });
            }
        }
    }
    Ok(rows)
}

/// CSV with header `kind,alpha,h,lhs,rhs,residual,order_estimate`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("kind,alpha,h,lhs,rhs,residual,order_estimate\n");
    for r in rows {
        let p = &r.report;
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.relation,
            fmt_f64(p.alpha),
            fmt_f64(p.h),
            fmt_f64(p.lhs),
            fmt_f64(p.rhs),
            fmt_f64(p.residual),
            fmt_opt(r.order_estimate)
        ));
    }
    out
}
