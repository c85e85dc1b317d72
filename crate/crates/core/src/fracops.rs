//! Left and right Riemann–Liouville fractional integrals and derivatives.
//!
//! Integrals use product quadrature: the kernel `(τ − ξ)^{α−1}` is integrated
//! exactly against the piecewise-linear interpolant of the samples, so the
//! weak singularity needs no special treatment. Derivatives use
//! Grünwald–Letnikov sums. [`frac_deriv_split`] offers a second derivative
//! representation that keeps the endpoint singularity in closed form.

use crate::error::{Error, Result};
use crate::grid::{derivative, inner_product, reflect, Grid, Signal};
use crate::special::{beta, gamma};

/// Fractional order α ∈ (0, 1]; α = 1 selects the integer-order path.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FracOrder(f64);

impl FracOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha > 0.0 && alpha <= 1.0 {
            Ok(FracOrder(alpha))
        } else {
            Err(Error::invalid(format!("fractional order must lie in (0, 1], got {alpha}")))
        }
    }

    pub const HALF: FracOrder = FracOrder(0.5);
    pub const ONE: FracOrder = FracOrder(1.0);

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_integer(self) -> bool {
        self.0 == 1.0
    }

    /// The complementary order 1 − α; fails for α = 1.
    pub fn complement(self) -> Result<FracOrder> {
        FracOrder::new(1.0 - self.0)
    }
}

/// Which endpoint the operator integrates from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// Integrates from 0 (operators 𝒥₀₊, 𝒟₀₊).
    Left,
    /// Integrates toward t (operators 𝒥ₜ₋, 𝒟ₜ₋).
    Right,
}

/// Grünwald–Letnikov weights `w_0 = 1`, `w_j = w_{j−1}(j − 1 − α)/j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlWeights {
    pub alpha: FracOrder,
    pub w: Vec<f64>,
}

/// The first `count` Grünwald–Letnikov weights (at least one is returned).
pub fn gl_weights(alpha: FracOrder, count: usize) -> GlWeights {
    let a = alpha.value();
    let mut w = Vec::with_capacity(count.max(1));
    w.push(1.0);
    for j in 1..count {
        let prev = w[j - 1];
        w.push(prev * ((j as f64 - 1.0 - a) / j as f64));
    }
    GlWeights { alpha, w }
}

/// `binom(p, j)` for j = 0..=terms by the multiplicative recurrence.
fn binomials(p: f64, terms: usize) -> Vec<f64> {
    let mut b = Vec::with_capacity(terms + 1);
    b.push(1.0);
    for j in 1..=terms {
        let prev = b[j - 1];
        b.push(prev * (p - j as f64 + 1.0) / j as f64);
    }
    b
}

const SERIES_FROM: usize = 16;
const SERIES_TERMS: usize = 24;

/// `(m+1)^p − 2m^p + (m−1)^p`, by a binomial series for large m where the
/// direct form cancels.
fn second_difference_of_power(m: usize, p: f64, binom: &[f64]) -> f64 {
    let mf = m as f64;
    if m < SERIES_FROM {
        return (mf + 1.0).powf(p) - 2.0 * mf.powf(p) + (mf - 1.0).powf(p);
    }
    let inv2 = 1.0 / (mf * mf);
    let mut s = 0.0;
    let mut pow = 1.0;
    for i in 1..=SERIES_TERMS / 2 {
        pow *= inv2;
        let term = 2.0 * binom[2 * i] * pow;
        s += term;
        if term.abs() < 1e-18 * s.abs() {
            break;
        }
    }
    mf.powf(p) * s
}

/// `(k−1)^p − (k − p)·k^{p−1}`, the weight of the first sample at node k.
fn start_weight(k: usize, p: f64, binom: &[f64]) -> f64 {
    let kf = k as f64;
    if k < SERIES_FROM {
        return (kf - 1.0).powf(p) - (kf - p) * kf.powf(p - 1.0);
    }
    let x = -1.0 / kf;
    let mut s = 0.0;
    let mut pow = x;
    for b in binom.iter().take(SERIES_TERMS + 1).skip(2) {
        pow *= x;
        let term = b * pow;
        s += term;
        if term.abs() < 1e-18 * s.abs() {
            break;
        }
    }
    kf.powf(p) * s
}

/// Product-quadrature weights for the left integral of any order > 0.
struct PqWeights {
    scale: f64,
    interior: Vec<f64>,
    start: Vec<f64>,
}

impl PqWeights {
    fn new(n: usize, h: f64, order: f64) -> Self {
        let p = order + 1.0;
        let binom = binomials(p, SERIES_TERMS);
        let interior = (0..=n)
            .map(|m| if m == 0 { 1.0 } else { second_difference_of_power(m, p, &binom) })
            .collect();
        let start = (0..=n)
            .map(|k| if k == 0 { 0.0 } else { start_weight(k, p, &binom) })
            .collect();
        PqWeights {
            scale: h.powf(order) / gamma(order + 2.0),
            interior,
            start,
        }
    }

    fn at(&self, u: &[f64], k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let mut s = self.start[k] * u[0];
        for (j, uj) in u.iter().enumerate().take(k).skip(1) {
            s += self.interior[k - j] * uj;
        }
        s += u[k];
        self.scale * s
    }
}

fn pq_left(u: &Signal, order: f64) -> Signal {
    let g = u.grid();
    let w = PqWeights::new(g.n_steps(), g.h(), order);
    let v = u.values();
    Signal::from_parts(g, (0..g.len()).map(|k| w.at(v, k)).collect())
}

/// Left integral of the given order at the final node only.
fn pq_left_final(u: &Signal, order: f64) -> f64 {
    let g = u.grid();
    PqWeights::new(g.n_steps(), g.h(), order).at(u.values(), g.n_steps())
}

/// Fractional integral of any positive order; order 0 is the identity.
pub(crate) fn integral_any_order(side: Side, u: &Signal, order: f64) -> Signal {
    if order == 0.0 {
        return u.clone();
    }
    match side {
        Side::Left => pq_left(u, order),
        Side::Right => reflect(&pq_left(&reflect(u), order)),
    }
}

/// Riemann–Liouville integral of order α.
///
/// Left: `(1/Γ(α)) ∫₀^τ u(ξ)(τ − ξ)^{α−1} dξ`; right: the mirror over `(τ, t)`.
/// For α = 1 this is the running trapezoid integral.
pub fn frac_integral(side: Side, u: &Signal, alpha: FracOrder) -> Signal {
    integral_any_order(side, u, alpha.value())
}

/// Riemann–Liouville derivative of order α by Grünwald–Letnikov sums.
///
/// Left: `h^{−α} Σ_{j≤k} w_j u_{k−j}`; right: `h^{−α} Σ_{j≤n−k} w_j u_{k+j}`.
/// For α = 1 the left derivative is the central-difference `u̇` and the right
/// one is `−u̇`. Values at the singular endpoint are kept as computed.
pub fn frac_deriv(side: Side, u: &Signal, alpha: FracOrder) -> Signal {
    if alpha.is_integer() {
        let d = derivative(u);
        return match side {
            Side::Left => d,
            Side::Right => d.scale(-1.0),
        };
    }
    match side {
        Side::Left => gl_left(u, alpha),
        Side::Right => reflect(&gl_left(&reflect(u), alpha)),
    }
}

fn gl_left(u: &Signal, alpha: FracOrder) -> Signal {
    let g = u.grid();
    let w = gl_weights(alpha, g.len()).w;
    let v = u.values();
    let s = g.h().powf(-alpha.value());
    let out = (0..g.len())
        .map(|k| {
            let mut acc = 0.0;
            for j in 0..=k {
                acc += w[j] * v[k - j];
            }
            s * acc
        })
        .collect();
    Signal::from_parts(g, out)
}

/// Composition laws checked by [`composition_residual`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Composition {
    /// `𝒥^α 𝒥^β u = 𝒥^{α+β} u`.
    IntegralOfIntegral,
    /// `𝒟^α 𝒥^α u = u`.
    DerivOfIntegral,
    /// `𝒥^α 𝒟^α u = u − (𝒥^{1−α}u)(endpoint)·κ^{α−1}/Γ(α)`.
    IntegralOfDeriv,
}

/// Relative sup-norm residual of a composition law over interior nodes.
///
/// The two nodes nearest the singular endpoint of `side` are excluded; the
/// result is `max |lhs − rhs| / max |rhs|` (absolute when `rhs` vanishes).
/// The derivative laws are same-order compositions, so `beta` must equal
/// `alpha` for them.
pub fn composition_residual(
    kind: Composition,
    side: Side,
    u: &Signal,
    alpha: FracOrder,
    beta: FracOrder,
) -> Result<f64> {
    let g = u.grid();
    let a = alpha.value();
    let (lhs, rhs) = match kind {
        Composition::IntegralOfIntegral => (
            frac_integral(side, &frac_integral(side, u, beta), alpha),
            integral_any_order(side, u, a + beta.value()),
        ),
        Composition::DerivOfIntegral | Composition::IntegralOfDeriv if alpha != beta => {
            return Err(Error::invalid(format!(
                "{kind:?} composes equal orders; got alpha = {a}, beta = {}",
                beta.value()
            )));
        }
        Composition::DerivOfIntegral => (frac_deriv(side, &frac_integral(side, u, alpha), alpha), u.clone()),
        Composition::IntegralOfDeriv => {
            let lhs = frac_integral(side, &frac_deriv(side, u, alpha), alpha);
            let n = g.n_steps();
            let end = if side == Side::Left { 0 } else { n };
            let b = integral_any_order(side, u, 1.0 - a).values()[end];
            let rhs: Vec<f64> = (0..g.len())
                .map(|k| {
                    let dist = match side {
                        Side::Left => g.node(k),
                        Side::Right => g.t_final() - g.node(k),
                    };
                    let kernel = if a == 1.0 {
                        1.0
                    } else if dist > 0.0 {
                        dist.powf(a - 1.0) / gamma(a)
                    } else {
                        0.0
                    };
                    u.values()[k] - b * kernel
                })
                .collect();
            (lhs, Signal::from_parts(g, rhs))
        }
    };
    let interior = match side {
        Side::Left => 2..g.len(),
        Side::Right => 0..g.len() - 2,
    };
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for k in interior {
        num = num.max((lhs.values()[k] - rhs.values()[k]).abs());
        den = den.max(rhs.values()[k].abs());
    }
    Ok(if den > 0.0 { num / den } else { num })
}

/// Endpoint term `coef · d^{−exponent}`, where `d` is the distance to the
/// endpoint and `exponent < 1`. Negative exponents give terms that vanish at
/// the endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singularity {
    pub coef: f64,
    pub exponent: f64,
}

/// A sampled regular part plus closed-form endpoint terms at τ = 0 and/or
/// τ = t.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointSignal {
    regular: Signal,
    left: Vec<Singularity>,
    right: Vec<Singularity>,
}

impl EndpointSignal {
    pub fn regular(s: Signal) -> Self {
        EndpointSignal {
            regular: s,
            left: Vec::new(),
            right: Vec::new(),
        }
    }

    pub fn regular_part(&self) -> &Signal {
        &self.regular
    }

    pub fn left(&self) -> &[Singularity] {
        &self.left
    }

    pub fn right(&self) -> &[Singularity] {
        &self.right
    }

    pub fn grid(&self) -> Grid {
        self.regular.grid()
    }

    /// Time reversal; swaps the endpoint terms.
    pub fn reflect(&self) -> Self {
        EndpointSignal {
            regular: reflect(&self.regular),
            left: self.right.clone(),
            right: self.left.clone(),
        }
    }

    /// `∫₀ᵗ x(τ) y(τ) dτ`: trapezoid for regular products, product quadrature
    /// for endpoint × regular, and Beta integrals for endpoint × endpoint.
    pub fn inner(&self, other: &EndpointSignal) -> Result<f64> {
        let g = self.grid();
        g.ensure_same(&other.grid(), "EndpointSignal::inner")?;
        let t = g.t_final();
        let mut total = inner_product(&self.regular, &other.regular)?;
        for (s, r) in [(self, other), (other, self)] {
            if !s.left.is_empty() {
                let rr = reflect(&r.regular);
                for sg in &s.left {
                    total += sg.coef * kernel_moment(&rr, sg.exponent);
                }
            }
            for sg in &s.right {
                total += sg.coef * kernel_moment(&r.regular, sg.exponent);
            }
        }
        let same = |a: &[Singularity], b: &[Singularity]| -> Result<f64> {
            let mut acc = 0.0;
            for x in a {
                for y in b {
                    let e = x.exponent + y.exponent;
                    if e >= 1.0 {
                        return Err(Error::invalid(format!(
                            "product of endpoint singularities with exponents {} and {} is not integrable",
                            x.exponent, y.exponent
                        )));
                    }
                    acc += x.coef * y.coef * t.powf(1.0 - e) / (1.0 - e);
                }
            }
            Ok(acc)
        };
        let opposite = |a: &[Singularity], b: &[Singularity]| {
            let mut acc = 0.0;
            for x in a {
                for y in b {
                    acc += x.coef
                        * y.coef
                        * t.powf(1.0 - x.exponent - y.exponent)
                        * beta(1.0 - x.exponent, 1.0 - y.exponent);
                }
            }
            acc
        };
        total += same(&self.left, &other.left)?;
        total += same(&self.right, &other.right)?;
        total += opposite(&self.left, &other.right);
        total += opposite(&self.right, &other.left);
        Ok(total)
    }

    /// `[x * y](t) = ∫₀ᵗ x(τ) y(t − τ) dτ`.
    pub fn convolve_final(&self, other: &EndpointSignal) -> Result<f64> {
        self.inner(&other.reflect())
    }
}

/// `∫₀ᵗ (t − τ)^{−e} g(τ) dτ = Γ(1 − e)·(𝒥₀₊^{1−e} g)(t)`.
fn kernel_moment(g: &Signal, e: f64) -> f64 {
    gamma(1.0 - e) * pq_left_final(g, 1.0 - e)
}

/// Fractional derivative with the two leading endpoint terms kept in closed
/// form. Left:
/// `u(0)τ^{−α}/Γ(1−α) + u̇(0)τ^{1−α}/Γ(2−α) + 𝒥₀₊^{1−α}(u̇ − u̇(0))`;
/// the right side mirrors this with `d = t − τ` and a sign flip on the
/// derivative terms. For α = 1 this is `±u̇`.
pub fn frac_deriv_split(side: Side, u: &Signal, alpha: FracOrder) -> EndpointSignal {
    let du = derivative(u);
    if alpha.is_integer() {
        return EndpointSignal::regular(match side {
            Side::Left => du,
            Side::Right => du.scale(-1.0),
        });
    }
    let a = alpha.value();
    let (u_end, du_end, sign) = match side {
        Side::Left => (u.first(), du.first(), 1.0),
        Side::Right => (u.last(), du.last(), -1.0),
    };
    let reg = integral_any_order(side, &du.map(|v| v - du_end), 1.0 - a).scale(sign);
    let mut terms = Vec::new();
    if u_end != 0.0 {
        terms.push(Singularity {
            coef: u_end / gamma(1.0 - a),
            exponent: a,
        });
    }
    if du_end != 0.0 {
        terms.push(Singularity {
            coef: sign * du_end / gamma(2.0 - a),
            exponent: a - 1.0,
        });
    }
    match side {
        Side::Left => EndpointSignal {
            regular: reg,
            left: terms,
            right: Vec::new(),
        },
        Side::Right => EndpointSignal {
            regular: reg,
            left: Vec::new(),
            right: terms,
        },
    }
}
