//! Uniform time grids, sampled signals, trapezoid quadrature and the
//! convolution pairing `[u * v](t) = ∫₀ᵗ u(τ) v(t − τ) dτ`.

use crate::error::{Error, Result};
use crate::io::fmt_f64;

/// Uniform grid on `[0, t_final]` with `n_steps + 1` nodes `τ_k = k·h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    t_final: f64,
    n_steps: usize,
}

impl Grid {
    pub fn new(t_final: f64, n_steps: usize) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::invalid(format!("t_final must be finite and > 0, got {t_final}")));
        }
        if n_steps < 2 {
            return Err(Error::invalid(format!("n_steps must be >= 2, got {n_steps}")));
        }
        Ok(Grid { t_final, n_steps })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of nodes, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        k as f64 * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.node(k)).collect()
    }

    pub(crate) fn ensure_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: (t = {}, n = {}) vs (t = {}, n = {})",
                self.t_final, self.n_steps, other.t_final, other.n_steps
            )))
        }
    }
}

/// Finite samples of a real function at every node of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    grid: Grid,
    values: Vec<f64>,
}

impl Signal {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "signal has {} samples, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at node {k}")));
        }
        Ok(Signal { grid, values })
    }

    /// Builds a signal from values already known to be finite and of the right length.
    pub(crate) fn from_parts(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Signal { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Signal::from_parts(grid, vec![c; grid.len()])
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Signal {
        Signal::from_parts(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, s: f64) -> Signal {
        self.map(|v| s * v)
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &Signal) -> Result<Signal> {
        self.grid.ensure_same(&other.grid, "axpy")?;
        Ok(Signal::from_parts(
            self.grid,
            self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect(),
        ))
    }

    pub fn add(&self, other: &Signal) -> Result<Signal> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Signal) -> Result<Signal> {
        self.axpy(-1.0, other)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Trapezoid L2 norm over `[0, t]`.
    pub fn l2_norm(&self) -> f64 {
        trapezoid_sum(self.grid.h(), self.values.iter().map(|v| v * v), self.values.len()).sqrt()
    }

    /// `tau,value` CSV with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,value\n");
        for (k, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{}\n", fmt_f64(self.grid.node(k)), fmt_f64(*v)));
        }
        out
    }
}

/// Samples `f` at every node.
pub fn sample(f: impl Fn(f64) -> f64, grid: Grid) -> Result<Signal> {
    let values: Vec<f64> = (0..grid.len()).map(|k| f(grid.node(k))).collect();
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "function is not finite at node {k} (tau = {})",
            grid.node(k)
        )));
    }
    Ok(Signal::from_parts(grid, values))
}

fn trapezoid_sum(h: f64, terms: impl Iterator<Item = f64>, len: usize) -> f64 {
    let mut s = 0.0;
    for (k, t) in terms.enumerate() {
        s += if k == 0 || k + 1 == len { 0.5 * t } else { t };
    }
    h * s
}

/// Trapezoid product sum for `[u * v](τ_k)`, symmetric term by term so that
/// swapping the arguments reproduces the result bit for bit.
fn conv_at(u: &[f64], v: &[f64], k: usize, h: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..=k / 2 {
        let j = k - i;
        let term = if i == j {
            u[i] * v[i]
        } else {
            u[i] * v[j] + u[j] * v[i]
        };
        s += if i == 0 { 0.5 * term } else { term };
    }
    h * s
}

/// Running convolution `[u * v](τ_k)` at every node; `result[0] = 0`.
pub fn convolve(u: &Signal, v: &Signal) -> Result<Signal> {
    u.grid.ensure_same(&v.grid, "convolve")?;
    let h = u.grid.h();
    let values = (0..u.grid.len()).map(|k| conv_at(&u.values, &v.values, k, h)).collect();
    Ok(Signal::from_parts(u.grid, values))
}

/// `[u * v](t)` at the final node only; equals `convolve(u, v).last()` exactly.
pub fn convolve_final(u: &Signal, v: &Signal) -> Result<f64> {
    u.grid.ensure_same(&v.grid, "convolve_final")?;
    Ok(conv_at(&u.values, &v.values, u.grid.n_steps, u.grid.h()))
}

/// Trapezoid approximation of `∫₀ᵗ u v dτ`.
pub fn inner_product(u: &Signal, v: &Signal) -> Result<f64> {
    u.grid.ensure_same(&v.grid, "inner_product")?;
    Ok(trapezoid_sum(
        u.grid.h(),
        u.values.iter().zip(&v.values).map(|(a, b)| a * b),
        u.values.len(),
    ))
}

/// Time reversal `τ ↦ t − τ`.
pub fn reflect(u: &Signal) -> Signal {
    Signal::from_parts(u.grid, u.values.iter().rev().copied().collect())
}

/// First derivative by second-order central differences, with one-sided
/// second-order stencils at both ends.
pub fn derivative(u: &Signal) -> Signal {
    let x = &u.values;
    let n = u.grid.n_steps;
    let h2 = 2.0 * u.grid.h();
    let mut d = Vec::with_capacity(n + 1);
    d.push((-3.0 * x[0] + 4.0 * x[1] - x[2]) / h2);
    for k in 1..n {
        d.push((x[k + 1] - x[k - 1]) / h2);
    }
    d.push((3.0 * x[n] - 4.0 * x[n - 1] + x[n - 2]) / h2);
    Signal::from_parts(u.grid, d)
}

/// Second derivative by central differences; one-sided second-order
/// four-point stencils at the ends (three-point when only three nodes exist).
pub fn second_derivative(u: &Signal) -> Signal {
    let x = &u.values;
    let n = u.grid.n_steps;
    let hh = u.grid.h() * u.grid.h();
    let mut d = Vec::with_capacity(n + 1);
    let (first, last) = if n >= 3 {
        (
            (2.0 * x[0] - 5.0 * x[1] + 4.0 * x[2] - x[3]) / hh,
            (2.0 * x[n] - 5.0 * x[n - 1] + 4.0 * x[n - 2] - x[n - 3]) / hh,
        )
    } else {
        let c = (x[0] - 2.0 * x[1] + x[2]) / hh;
        (c, c)
    };
    d.push(first);
    for k in 1..n {
        d.push((x[k + 1] - 2.0 * x[k] + x[k - 1]) / hh);
    }
    d.push(last);
    Signal::from_parts(u.grid, d)
}

/// Cumulative trapezoid integral `∫₀^{τ_k} u dτ`.
pub fn running_integral(u: &Signal) -> Signal {
    let h = u.grid.h();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(u.values.len());
    out.push(0.0);
    for w in u.values.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    Signal::from_parts(u.grid, out)
}

/// Observed convergence orders `log(e_{i−1}/e_i) / log(h_{i−1}/h_i)`;
/// the first entry is `None`.
pub fn observed_orders(hs: &[f64], errors: &[f64]) -> Vec<Option<f64>> {
    let mut out = vec![None];
    for i in 1..errors.len().min(hs.len()) {
        out.push(Some((errors[i - 1] / errors[i]).ln() / (hs[i - 1] / hs[i]).ln()));
    }
    out.truncate(errors.len().min(hs.len()));
    out
}
