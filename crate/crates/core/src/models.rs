//! Physical models, mixed-variable lifts, oracles and MDOF assemblers.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{running_integral, Grid, Signal};

/// Scalar applied-force history `f̂(τ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Forcing {
    Zero,
    /// `amplitude · sin(omega·τ + phase)`
    Harmonic { amplitude: f64, omega: f64, phase: f64 },
    /// Half-sine `amplitude · sin(πτ/duration)` on `[0, duration]`, zero after.
    Pulse { amplitude: f64, duration: f64 },
}

impl Forcing {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Forcing::Zero => true,
            Forcing::Harmonic { amplitude, omega, phase } => {
                amplitude.is_finite() && omega.is_finite() && omega > 0.0 && phase.is_finite()
            }
            Forcing::Pulse { amplitude, duration } => amplitude.is_finite() && duration.is_finite() && duration > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid forcing {self:?}")))
        }
    }

    pub fn eval(&self, tau: f64) -> f64 {
        match *self {
            Forcing::Zero => 0.0,
            Forcing::Harmonic { amplitude, omega, phase } => amplitude * (omega * tau + phase).sin(),
            Forcing::Pulse { amplitude, duration } => {
                if tau <= duration {
                    amplitude * (PI * tau / duration).sin()
                } else {
                    0.0
                }
            }
        }
    }

    /// `∫₀^τ f̂(s) ds`.
    pub fn impulse(&self, tau: f64) -> f64 {
        match *self {
            Forcing::Zero => 0.0,
            Forcing::Harmonic { amplitude, omega, phase } => {
                amplitude * (phase.cos() - (omega * tau + phase).cos()) / omega
            }
            Forcing::Pulse { amplitude, duration } => {
                let s = tau.min(duration);
                amplitude * duration / PI * (1.0 - (PI * s / duration).cos())
            }
        }
    }

    pub fn sample(&self, grid: Grid) -> Signal {
        Signal::from_parts(grid, grid.nodes().into_iter().map(|t| self.eval(t)).collect())
    }
}

/// Single-degree-of-freedom damped oscillator.
#[derive(Debug, Clone, PartialEq)]
pub struct SdofModel {
    m: f64,
    c: f64,
    k: f64,
    forcing: Forcing,
    j_hat_0: f64,
}

impl SdofModel {
    pub fn new(m: f64, c: f64, k: f64, forcing: Forcing, j_hat_0: f64) -> Result<Self> {
        Self::build(m, c, k, forcing, j_hat_0, false)
    }

    /// Like [`SdofModel::new`] but admits `k = 0`. Only the classical actions
    /// accept such a model; the mixed forms need the flexibility `1/k`.
    pub fn classical(m: f64, c: f64, k: f64, forcing: Forcing, j_hat_0: f64) -> Result<Self> {
        Self::build(m, c, k, forcing, j_hat_0, true)
    }

    fn build(m: f64, c: f64, k: f64, forcing: Forcing, j_hat_0: f64, zero_k: bool) -> Result<Self> {
        for (name, v) in [("m", m), ("c", c), ("k", k), ("j_hat_0", j_hat_0)] {
            if !v.is_finite() {
                return Err(Error::model(name, "must be finite"));
            }
        }
        if m <= 0.0 {
            return Err(Error::model("m", format!("mass must be positive, got {m}")));
        }
        if k < 0.0 || (k == 0.0 && !zero_k) {
            return Err(Error::model("k", format!("stiffness must be positive, got {k}")));
        }
        if c < 0.0 {
            return Err(Error::model("c", format!("damping must be non-negative, got {c}")));
        }
        forcing.validate().map_err(|e| Error::model("forcing", e.to_string()))?;
        Ok(SdofModel { m, c, k, forcing, j_hat_0 })
    }

    /// Unforced model with zero initial impulse.
    pub fn free(m: f64, c: f64, k: f64) -> Result<Self> {
        Self::new(m, c, k, Forcing::Zero, 0.0)
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Spring flexibility `1/k`.
    pub fn a(&self) -> f64 {
        1.0 / self.k
    }

    pub fn forcing(&self) -> Forcing {
        self.forcing
    }

    pub fn j_hat_0(&self) -> f64 {
        self.j_hat_0
    }

    /// Total applied impulse `ĵ(τ) = ĵ(0) + ∫₀^τ f̂`.
    pub fn j_hat(&self, tau: f64) -> f64 {
        self.j_hat_0 + self.forcing.impulse(tau)
    }

    pub fn with_forcing(&self, forcing: Forcing) -> Result<Self> {
        Self::build(self.m, self.c, self.k, forcing, self.j_hat_0, true)
    }

    /// The same oscillator as a one-DOF, one-element system with `B = 1`.
    pub fn as_mdof(&self) -> Result<MdofModel> {
        if self.k == 0.0 {
            return Err(Error::model("k", "the mixed form needs a positive stiffness"));
        }
        Ok(MdofModel {
            m: DMatrix::from_element(1, 1, self.m),
            c: DMatrix::from_element(1, 1, self.c),
            a_blocks: vec![DMatrix::from_element(1, 1, self.a())],
            b: DMatrix::from_element(1, 1, 1.0),
            forcing: self.forcing,
            distribution: vec![1.0],
            j_hat_0: vec![self.j_hat_0],
        })
    }
}

/// Multi-degree-of-freedom system `M ü + C u̇ + B J̇ = f̂`, `A J̈ = Bᵀ u̇`.
#[derive(Debug, Clone, PartialEq)]
pub struct MdofModel {
    m: DMatrix<f64>,
    c: DMatrix<f64>,
    a_blocks: Vec<DMatrix<f64>>,
    b: DMatrix<f64>,
    forcing: Forcing,
    distribution: Vec<f64>,
    j_hat_0: Vec<f64>,
}

fn check_symmetric(path: &str, x: &DMatrix<f64>) -> Result<()> {
    let scale = x.amax().max(f64::MIN_POSITIVE);
    if (x - x.transpose()).amax() > 1e-12 * scale {
        return Err(Error::model(path, "matrix is not symmetric"));
    }
    Ok(())
}

fn check_finite(path: &str, x: &DMatrix<f64>) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::model(path, "entries must be finite"))
    }
}

fn min_eigenvalue(x: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(x.clone()).eigenvalues.min()
}

impl MdofModel {
    /// Validates every invariant; errors carry the offending field path.
    pub fn new(
        m: DMatrix<f64>,
        c: DMatrix<f64>,
        a_blocks: Vec<DMatrix<f64>>,
        b: DMatrix<f64>,
        forcing: Forcing,
        distribution: Vec<f64>,
        j_hat_0: Vec<f64>,
    ) -> Result<Self> {
        let n_dof = m.nrows();
        if n_dof == 0 || m.ncols() != n_dof {
            return Err(Error::model("M", "must be a non-empty square matrix"));
        }
        if c.nrows() != n_dof || c.ncols() != n_dof {
            return Err(Error::model("C", format!("must be {n_dof}x{n_dof}")));
        }
        check_finite("M", &m)?;
        check_finite("C", &c)?;
        check_symmetric("M", &m)?;
        check_symmetric("C", &c)?;
        if min_eigenvalue(&m) <= 0.0 {
            return Err(Error::model("M", "must be positive definite"));
        }
        if min_eigenvalue(&c) < -1e-12 * c.amax() {
            return Err(Error::model("C", "must be positive semidefinite"));
        }
        if a_blocks.is_empty() {
            return Err(Error::model("A_blocks", "at least one block is required"));
        }
        for (i, blk) in a_blocks.iter().enumerate() {
            let p = format!("A_blocks[{i}]");
            if blk.nrows() == 0 || blk.ncols() != blk.nrows() {
                return Err(Error::model(p, "must be a non-empty square matrix"));
            }
            check_finite(&p, blk)?;
            check_symmetric(&p, blk)?;
            if min_eigenvalue(blk) <= 0.0 {
                return Err(Error::model(p, "must be positive definite"));
            }
        }
        let n_el: usize = a_blocks.iter().map(|b| b.nrows()).sum();
        if b.nrows() != n_dof || b.ncols() != n_el {
            return Err(Error::model("B", format!("must be {n_dof}x{n_el}")));
        }
        check_finite("B", &b)?;
        forcing.validate().map_err(|e| Error::model("forcing", e.to_string()))?;
        if distribution.len() != n_dof {
            return Err(Error::model("forcing.distribution", format!("must have {n_dof} entries")));
        }
        if distribution.iter().any(|v| !v.is_finite()) {
            return Err(Error::model("forcing.distribution", "entries must be finite"));
        }
        if j_hat_0.len() != n_dof {
            return Err(Error::model("j_hat_0", format!("must have {n_dof} entries")));
        }
        if j_hat_0.iter().any(|v| !v.is_finite()) {
            return Err(Error::model("j_hat_0", "entries must be finite"));
        }
        Ok(MdofModel {
            m,
            c,
            a_blocks,
            b,
            forcing,
            distribution,
            j_hat_0,
        })
    }

    pub fn n_dof(&self) -> usize {
        self.m.nrows()
    }

    pub fn n_el(&self) -> usize {
        self.b.ncols()
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn damping(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn equilibrium(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn a_blocks(&self) -> &[DMatrix<f64>] {
        &self.a_blocks
    }

    /// Dense block-diagonal flexibility matrix.
    pub fn flexibility(&self) -> DMatrix<f64> {
        let n = self.n_el();
        let mut a = DMatrix::zeros(n, n);
        let mut off = 0;
        for blk in &self.a_blocks {
            let s = blk.nrows();
            a.view_mut((off, off), (s, s)).copy_from(blk);
            off += s;
        }
        a
    }

    /// Inverse of the flexibility, block by block.
    pub fn flexibility_inverse(&self) -> DMatrix<f64> {
        let n = self.n_el();
        let mut a = DMatrix::zeros(n, n);
        let mut off = 0;
        for blk in &self.a_blocks {
            let s = blk.nrows();
            let inv = blk.clone().cholesky().expect("validated positive definite").inverse();
            a.view_mut((off, off), (s, s)).copy_from(&inv);
            off += s;
        }
        a
    }

    /// Displacement-form stiffness `B A⁻¹ Bᵀ`.
    pub fn stiffness(&self) -> DMatrix<f64> {
        &self.b * self.flexibility_inverse() * self.b.transpose()
    }

    pub fn forcing(&self) -> Forcing {
        self.forcing
    }

    pub fn distribution(&self) -> &[f64] {
        &self.distribution
    }

    pub fn j_hat_0(&self) -> &[f64] {
        &self.j_hat_0
    }

    /// Nodal force histories `distribution[i] · f̂(τ)`.
    pub fn sample_forcing(&self, grid: Grid) -> Vec<Signal> {
        let f = self.forcing.sample(grid);
        self.distribution.iter().map(|&d| f.scale(d)).collect()
    }

    pub fn with_forcing(&self, forcing: Forcing, distribution: Vec<f64>) -> Result<Self> {
        Self::new(
            self.m.clone(),
            self.c.clone(),
            self.a_blocks.clone(),
            self.b.clone(),
            forcing,
            distribution,
            self.j_hat_0.clone(),
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: MdofJson = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::model(if path == "." { String::new() } else { path }, e.inner().to_string())
        })?;
        raw.into_model()
    }

    pub fn to_json(&self) -> String {
        let rows = |x: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect()
        };
        let forcing = match self.forcing {
            Forcing::Zero => ForcingJson {
                preset: Preset::Zero,
                amplitude: None,
                omega: None,
                phase: None,
                duration: None,
                distribution: self.distribution.clone(),
            },
            Forcing::Harmonic { amplitude, omega, phase } => ForcingJson {
                preset: Preset::Harmonic,
                amplitude: Some(amplitude),
                omega: Some(omega),
                phase: Some(phase),
                duration: None,
                distribution: self.distribution.clone(),
            },
            Forcing::Pulse { amplitude, duration } => ForcingJson {
                preset: Preset::Pulse,
                amplitude: Some(amplitude),
                omega: None,
                phase: None,
                duration: Some(duration),
                distribution: self.distribution.clone(),
            },
        };
        let doc = MdofJson {
            m: rows(&self.m),
            c: rows(&self.c),
            a_blocks: self.a_blocks.iter().map(rows).collect(),
            b: rows(&self.b),
            forcing,
            j_hat_0: Some(self.j_hat_0.clone()),
        };
        serde_json::to_string_pretty(&doc).expect("plain data serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MdofJson {
    #[serde(rename = "M")]
    m: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "A_blocks")]
    a_blocks: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    forcing: ForcingJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    j_hat_0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Preset {
    Zero,
    Harmonic,
    Pulse,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ForcingJson {
    preset: Preset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phase: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    duration: Option<f64>,
    distribution: Vec<f64>,
}

fn matrix(path: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if nr == 0 || nc == 0 {
        return Err(Error::model(path, "matrix must be non-empty"));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != nc) {
        return Err(Error::model(format!("{path}[{i}]"), format!("expected {nc} columns")));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

impl MdofJson {
    fn into_model(self) -> Result<MdofModel> {
        let m = matrix("M", &self.m)?;
        let c = matrix("C", &self.c)?;
        let b = matrix("B", &self.b)?;
        let a_blocks = self
            .a_blocks
            .iter()
            .enumerate()
            .map(|(i, blk)| matrix(&format!("A_blocks[{i}]"), blk))
            .collect::<Result<Vec<_>>>()?;
        let f = &self.forcing;
        let need = |name: &str, v: Option<f64>| {
            v.ok_or_else(|| Error::model(format!("forcing.{name}"), "required by this preset"))
        };
        let reject = |name: &str, v: Option<f64>| match v {
            Some(_) => Err(Error::model(format!("forcing.{name}"), "not used by this preset")),
            None => Ok(()),
        };
        let forcing = match f.preset {
            Preset::Zero => {
                for (n, v) in [("amplitude", f.amplitude), ("omega", f.omega), ("phase", f.phase), ("duration", f.duration)] {
                    reject(n, v)?;
                }
                Forcing::Zero
            }
            Preset::Harmonic => {
                reject("duration", f.duration)?;
                Forcing::Harmonic {
                    amplitude: need("amplitude", f.amplitude)?,
                    omega: need("omega", f.omega)?,
                    phase: f.phase.unwrap_or(0.0),
                }
            }
            Preset::Pulse => {
                reject("omega", f.omega)?;
                reject("phase", f.phase)?;
                Forcing::Pulse {
                    amplitude: need("amplitude", f.amplitude)?,
                    duration: need("duration", f.duration)?,
                }
            }
        };
        let n_dof = m.nrows();
        let j_hat_0 = self.j_hat_0.unwrap_or_else(|| vec![0.0; n_dof]);
        MdofModel::new(m, c, a_blocks, b, forcing, self.forcing.distribution, j_hat_0)
    }
}

/// Displacement and impulse histories on a shared grid, with optional
/// declared initial rates `u̇(0)` and `J̇(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    u: Vec<Signal>,
    j: Vec<Signal>,
    rates: Option<InitialRates>,
}

/// Declared `u̇(0)` (one per DOF) and `J̇(0)` (one per element).
#[derive(Debug, Clone, PartialEq)]
pub struct InitialRates {
    pub velocity: Vec<f64>,
    pub force: Vec<f64>,
}

impl Trajectory {
    pub fn new(u: Vec<Signal>, j: Vec<Signal>) -> Result<Self> {
        let Some(first) = u.first() else {
            return Err(Error::invalid("trajectory needs at least one displacement component"));
        };
        let g = first.grid();
        for s in u.iter().chain(&j) {
            g.ensure_same(&s.grid(), "Trajectory::new")?;
        }
        Ok(Trajectory { u, j, rates: None })
    }

    /// Displacement-only scalar trajectory.
    pub fn displacement(u: Signal) -> Self {
        Trajectory {
            u: vec![u],
            j: Vec::new(),
            rates: None,
        }
    }

    pub fn with_rates(mut self, rates: InitialRates) -> Result<Self> {
        if rates.velocity.len() != self.u.len() || rates.force.len() != self.j.len() {
            return Err(Error::invalid("initial rates do not match the trajectory dimensions"));
        }
        self.rates = Some(rates);
        Ok(self)
    }

    pub fn without_rates(mut self) -> Self {
        self.rates = None;
        self
    }

    pub fn grid(&self) -> Grid {
        self.u[0].grid()
    }

    pub fn u(&self) -> &[Signal] {
        &self.u
    }

    pub fn j(&self) -> &[Signal] {
        &self.j
    }

    pub fn rates(&self) -> Option<&InitialRates> {
        self.rates.as_ref()
    }

    pub fn is_mixed(&self) -> bool {
        !self.j.is_empty()
    }

    /// Component-wise `self + s·other`; declared rates combine the same way
    /// when both sides carry them.
    pub fn axpy(&self, s: f64, other: &Trajectory) -> Result<Trajectory> {
        if self.u.len() != other.u.len() || self.j.len() != other.j.len() {
            return Err(Error::invalid("trajectory dimensions differ"));
        }
        let comb = |a: &[Signal], b: &[Signal]| -> Result<Vec<Signal>> {
            a.iter().zip(b).map(|(x, y)| x.axpy(s, y)).collect()
        };
        let rates = match (&self.rates, &other.rates) {
            (Some(a), Some(b)) => Some(InitialRates {
                velocity: a.velocity.iter().zip(&b.velocity).map(|(x, y)| x + s * y).collect(),
                force: a.force.iter().zip(&b.force).map(|(x, y)| x + s * y).collect(),
            }),
            (Some(a), None) => Some(a.clone()),
            _ => None,
        };
        Ok(Trajectory {
            u: comb(&self.u, &other.u)?,
            j: comb(&self.j, &other.j)?,
            rates,
        })
    }

    pub fn scale(&self, s: f64) -> Trajectory {
        Trajectory {
            u: self.u.iter().map(|x| x.scale(s)).collect(),
            j: self.j.iter().map(|x| x.scale(s)).collect(),
            rates: self.rates.as_ref().map(|r| InitialRates {
                velocity: r.velocity.iter().map(|v| v * s).collect(),
                force: r.force.iter().map(|v| v * s).collect(),
            }),
        }
    }

    /// CSV `tau,u[0],…,J[0],…`.
    pub fn to_csv(&self) -> String {
        use crate::io::fmt_f64;
        let g = self.grid();
        let mut out = String::from("tau");
        for i in 0..self.u.len() {
            out.push_str(&format!(",u[{i}]"));
        }
        for e in 0..self.j.len() {
            out.push_str(&format!(",J[{e}]"));
        }
        out.push('\n');
        for k in 0..g.len() {
            out.push_str(&fmt_f64(g.node(k)));
            for s in self.u.iter().chain(&self.j) {
                out.push(',');
                out.push_str(&fmt_f64(s.values()[k]));
            }
            out.push('\n');
        }
        out
    }
}

/// Closed-form solution of `m ü + c u̇ + k u = f̂` for zero or harmonic `f̂`.
/// Any sign of `c` is accepted so that the negative-damping mirror system is
/// covered as well.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForm {
    homogeneous: Homogeneous,
    particular: Particular,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Homogeneous {
    Oscillatory { sigma: f64, omega_d: f64, a: f64, b: f64 },
    Critical { sigma: f64, a: f64, b: f64 },
    Real { r1: f64, r2: f64, c1: f64, c2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Particular {
    None,
    /// `re·sin(ωτ + φ) + im·cos(ωτ + φ)`
    Steady { omega: f64, phase: f64, re: f64, im: f64 },
    /// `coef · τ · cos(ωτ + φ)`
    Resonant { omega: f64, phase: f64, coef: f64 },
}

impl Particular {
    fn eval(&self, t: f64) -> (f64, f64) {
        match *self {
            Particular::None => (0.0, 0.0),
            Particular::Steady { omega, phase, re, im } => {
                let (s, c) = (omega * t + phase).sin_cos();
                (re * s + im * c, omega * (re * c - im * s))
            }
            Particular::Resonant { omega, phase, coef } => {
                let (s, c) = (omega * t + phase).sin_cos();
                (coef * t * c, coef * (c - omega * t * s))
            }
        }
    }
}

impl ClosedForm {
    pub fn new(m: f64, c: f64, k: f64, forcing: Forcing, u0: f64, v0: f64) -> Result<Self> {
        let particular = match forcing {
            Forcing::Zero => Particular::None,
            Forcing::Harmonic { amplitude, omega, phase } => {
                let re_d = k - m * omega * omega;
                let im_d = c * omega;
                if re_d == 0.0 && im_d == 0.0 {
                    Particular::Resonant {
                        omega,
                        phase,
                        coef: -amplitude / (2.0 * m * omega),
                    }
                } else {
                    // amplitude / (re_d + i·im_d), taken along e^{i(ωτ+φ)}
                    let den = re_d * re_d + im_d * im_d;
                    Particular::Steady {
                        omega,
                        phase,
                        re: amplitude * re_d / den,
                        im: -amplitude * im_d / den,
                    }
                }
            }
            Forcing::Pulse { .. } => {
                return Err(Error::OracleUnavailable(
                    "no closed form for pulse forcing; use the state-space oracle".into(),
                ))
            }
        };
        let (p0, dp0) = particular.eval(0.0);
        let x0 = u0 - p0;
        let y0 = v0 - dp0;
        let sigma = -c / (2.0 * m);
        let disc = c * c - 4.0 * m * k;
        let homogeneous = if disc.abs() <= 1e-14 * (c * c + 4.0 * m * k) {
            Homogeneous::Critical {
                sigma,
                a: x0,
                b: y0 - sigma * x0,
            }
        } else if disc < 0.0 {
            let omega_d = (-disc).sqrt() / (2.0 * m);
            Homogeneous::Oscillatory {
                sigma,
                omega_d,
                a: x0,
                b: (y0 - sigma * x0) / omega_d,
            }
        } else {
            let q = disc.sqrt() / (2.0 * m);
            let (r1, r2) = (sigma + q, sigma - q);
            let c1 = (y0 - r2 * x0) / (r1 - r2);
            Homogeneous::Real { r1, r2, c1, c2: x0 - c1 }
        };
        Ok(ClosedForm { homogeneous, particular })
    }

    /// `(u(τ), u̇(τ))`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let (hu, hv) = match self.homogeneous {
            Homogeneous::Oscillatory { sigma, omega_d, a, b } => {
                let e = (sigma * t).exp();
                let (s, c) = (omega_d * t).sin_cos();
                let u = a * c + b * s;
                let du = -a * omega_d * s + b * omega_d * c;
                (e * u, e * (sigma * u + du))
            }
            Homogeneous::Critical { sigma, a, b } => {
                let e = (sigma * t).exp();
                (e * (a + b * t), e * (b + sigma * (a + b * t)))
            }
            Homogeneous::Real { r1, r2, c1, c2 } => {
                let (e1, e2) = ((r1 * t).exp(), (r2 * t).exp());
                (c1 * e1 + c2 * e2, c1 * r1 * e1 + c2 * r2 * e2)
            }
        };
        let (pu, pv) = self.particular.eval(t);
        (hu + pu, hv + pv)
    }

    pub fn sample(&self, grid: Grid) -> (Signal, Signal) {
        let (u, v): (Vec<f64>, Vec<f64>) = grid.nodes().into_iter().map(|t| self.eval(t)).unzip();
        (Signal::from_parts(grid, u), Signal::from_parts(grid, v))
    }
}

/// `(u(0), J(0))` with `J(0) = ĵ(0) − m v₀ − c u₀`.
pub fn mixed_initials(model: &SdofModel, u0: f64, v0: f64) -> (f64, f64) {
    (u0, model.j_hat_0 - model.m * v0 - model.c * u0)
}

/// Minimum-norm `J(0)` solving `B J(0) = ĵ(0) − M v₀ − C u₀`; errors when the
/// system is inconsistent.
pub fn mixed_initials_mdof(model: &MdofModel, u0: &[f64], v0: &[f64]) -> Result<Vec<f64>> {
    let n = model.n_dof();
    if u0.len() != n || v0.len() != n {
        return Err(Error::invalid(format!("initial vectors must have {n} entries")));
    }
    let u = DVector::from_column_slice(u0);
    let v = DVector::from_column_slice(v0);
    let rhs = DVector::from_column_slice(&model.j_hat_0) - &model.m * v - &model.c * u;
    let svd = model.b.clone().svd(true, true);
    let tol = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let j0 = svd.solve(&rhs, tol).map_err(|e| Error::invalid(e.to_string()))?;
    let resid = (&model.b * &j0 - &rhs).amax();
    if resid > 1e-10 * (1.0 + rhs.amax()) {
        return Err(Error::invalid(format!(
            "initial momentum balance has no solution for J(0) (residual {resid:e})"
        )));
    }
    Ok(j0.iter().copied().collect())
}

/// `J̇(0) = A⁻¹ Bᵀ u₀`, the initial element forces.
pub fn initial_force_rate(model: &MdofModel, u0: &[f64]) -> Vec<f64> {
    let u = DVector::from_column_slice(u0);
    (model.flexibility_inverse() * model.b.transpose() * u).iter().copied().collect()
}

/// `J(τ) = J(0) + ∫₀^τ k·u` by the running trapezoid rule; the result
/// declares `u̇(0) = v₀` and `J̇(0) = k u₀`.
pub fn lift_to_mixed(model: &SdofModel, u: &Signal, u0: f64, v0: f64) -> Result<Trajectory> {
    if (u.first() - u0).abs() > 1e-12 * (1.0 + u0.abs()) {
        return Err(Error::invalid(format!("u[0] = {} does not match u0 = {u0}", u.first())));
    }
    let (_, j0) = mixed_initials(model, u0, v0);
    let j = running_integral(&u.scale(model.k)).map(|v| v + j0);
    Trajectory::new(vec![u.clone()], vec![j])?.with_rates(InitialRates {
        velocity: vec![v0],
        force: vec![model.k * u0],
    })
}

/// Closed-form displacement lifted to mixed variables.
pub fn analytic_sdof(model: &SdofModel, u0: f64, v0: f64, grid: Grid) -> Result<Trajectory> {
    let cf = ClosedForm::new(model.m, model.c, model.k, model.forcing, u0, v0)?;
    let (u, _) = cf.sample(grid);
    lift_to_mixed(model, &u, u0, v0)
}

/// Exact impulse `J(τ) = ĵ(τ) − m u̇(τ) − c u(τ)` of the closed-form solution.
pub fn analytic_sdof_impulse(model: &SdofModel, u0: f64, v0: f64, grid: Grid) -> Result<Signal> {
    let cf = ClosedForm::new(model.m, model.c, model.k, model.forcing, u0, v0)?;
    Ok(Signal::from_parts(
        grid,
        grid.nodes()
            .into_iter()
            .map(|t| {
                let (u, v) = cf.eval(t);
                model.j_hat(t) - model.m * v - model.c * u
            })
            .collect(),
    ))
}

/// Reference solution by classical fourth-order Runge–Kutta on the state
/// `[u, u̇, J]` with eight substeps per output step.
pub fn mdof_oracle(model: &MdofModel, u0: &[f64], v0: &[f64], grid: Grid) -> Result<Trajectory> {
    const SUBSTEPS: usize = 8;
    let nd = model.n_dof();
    let ne = model.n_el();
    let j0 = mixed_initials_mdof(model, u0, v0)?;
    let minv = model.m.clone().cholesky().expect("validated positive definite").inverse();
    let force_map = model.flexibility_inverse() * model.b.transpose();
    let k_red = &model.b * &force_map;
    let dist = DVector::from_column_slice(&model.distribution);
    let rhs = |t: f64, y: &DVector<f64>| -> DVector<f64> {
        let u = y.rows(0, nd);
        let v = y.rows(nd, nd);
        let acc = &minv * (&dist * model.forcing.eval(t) - &model.c * v - &k_red * u);
        let jdot = &force_map * u;
        let mut out = DVector::zeros(2 * nd + ne);
        out.rows_mut(0, nd).copy_from(&v);
        out.rows_mut(nd, nd).copy_from(&acc);
        out.rows_mut(2 * nd, ne).copy_from(&jdot);
        out
    };
    let mut y = DVector::zeros(2 * nd + ne);
    y.rows_mut(0, nd).copy_from_slice(u0);
    y.rows_mut(nd, nd).copy_from_slice(v0);
    y.rows_mut(2 * nd, ne).copy_from_slice(&j0);
    let dt = grid.h() / SUBSTEPS as f64;
    let mut us = vec![Vec::with_capacity(grid.len()); nd];
    let mut js = vec![Vec::with_capacity(grid.len()); ne];
    let mut record = |y: &DVector<f64>| {
        for i in 0..nd {
            us[i].push(y[i]);
        }
        for e in 0..ne {
            js[e].push(y[2 * nd + e]);
        }
    };
    record(&y);
    for step in 0..grid.n_steps() {
        for sub in 0..SUBSTEPS {
            let t = grid.node(step) + sub as f64 * dt;
            let k1 = rhs(t, &y);
            let k2 = rhs(t + 0.5 * dt, &(&y + &k1 * (0.5 * dt)));
            let k3 = rhs(t + 0.5 * dt, &(&y + &k2 * (0.5 * dt)));
            let k4 = rhs(t + dt, &(&y + &k3 * dt));
            y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                module: "models",
                operation: "mdof_oracle",
                t_final: grid.t_final(),
                n_steps: grid.n_steps(),
                detail: format!("state at step {}", step + 1),
            });
        }
        record(&y);
    }
    let to_signals = |v: Vec<Vec<f64>>| v.into_iter().map(|x| Signal::from_parts(grid, x)).collect();
    Trajectory::new(to_signals(us), to_signals(js))?.with_rates(InitialRates {
        velocity: v0.to_vec(),
        force: initial_force_rate(model, u0),
    })
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::model(name, format!("must be positive, got {v}")))
    }
}

/// Element `e` joins DOF `e − 1` (or the support for `e = 0`) to DOF `e`.
fn chain_incidence(n: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n, n);
    for e in 0..n {
        b[(e, e)] = 1.0;
        if e > 0 {
            b[(e - 1, e)] = -1.0;
        }
    }
    b
}

/// Shear building with identical stories; unforced, with a unit load
/// distribution ready for [`MdofModel::with_forcing`].
pub fn build_shear_building(n_stories: usize, story_mass: f64, story_stiffness: f64, story_damping: f64) -> Result<MdofModel> {
    if n_stories == 0 {
        return Err(Error::model("n_stories", "at least one story is required"));
    }
    positive("story_mass", story_mass)?;
    positive("story_stiffness", story_stiffness)?;
    if !(story_damping.is_finite() && story_damping >= 0.0) {
        return Err(Error::model("story_damping", format!("must be non-negative, got {story_damping}")));
    }
    let n = n_stories;
    MdofModel::new(
        DMatrix::from_diagonal_element(n, n, story_mass),
        DMatrix::from_diagonal_element(n, n, story_damping),
        vec![DMatrix::from_element(1, 1, 1.0 / story_stiffness); n],
        chain_incidence(n),
        Forcing::Zero,
        vec![1.0; n],
        vec![0.0; n],
    )
}

/// Fixed-free bar of linear two-node elements with lumped mass; the clamped
/// node is removed.
pub fn build_bar_1d(density: f64, axial_rigidity: f64, length: f64, n_elem: usize) -> Result<MdofModel> {
    if n_elem == 0 {
        return Err(Error::model("n_elem", "at least one element is required"));
    }
    positive("density", density)?;
    positive("axial_rigidity", axial_rigidity)?;
    positive("length", length)?;
    let n = n_elem;
    let he = length / n as f64;
    let mut m = DMatrix::from_diagonal_element(n, n, density * he);
    m[(n - 1, n - 1)] = 0.5 * density * he;
    MdofModel::new(
        m,
        DMatrix::zeros(n, n),
        vec![DMatrix::from_element(1, 1, he / axial_rigidity); n],
        chain_incidence(n),
        Forcing::Zero,
        vec![1.0; n],
        vec![0.0; n],
    )
}

/// Lowest natural circular frequency of `M ü + B A⁻¹ Bᵀ u = 0`.
pub fn fundamental_frequency(model: &MdofModel) -> f64 {
    let l = model.m.clone().cholesky().expect("validated positive definite");
    let linv = l.l().try_inverse().expect("triangular factor is invertible");
    let s = &linv * model.stiffness() * linv.transpose();
    let s = (&s + s.transpose()) * 0.5;
    SymmetricEigen::new(s).eigenvalues.min().max(0.0).sqrt()
}

/// Mechanical energy `½ u̇ᵀ M u̇ + ½ uᵀ B A⁻¹ Bᵀ u`.
pub fn total_energy(model: &MdofModel, u: &[f64], v: &[f64]) -> f64 {
    let u = DVector::from_column_slice(u);
    let v = DVector::from_column_slice(v);
    0.5 * v.dot(&(&model.m * &v)) + 0.5 * u.dot(&(model.stiffness() * &u))
}
