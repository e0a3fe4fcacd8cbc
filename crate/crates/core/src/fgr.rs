//! Fermi golden rule model Hamiltonians: radiation constants, time stepping and leak ledgers.
//!
//! Fourier convention throughout: G^(xi) = (2 pi)^{-1} int G(x) e^{-i xi.x} dx, which is unitary on
//! L^2(R^2). Under it <G, delta(-Delta - 1) G> = (1/2) int_{|xi|=1} |G^|^2 d sigma.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::gauss_legendre;
use crate::error::FgrError;

pub mod grid;
pub mod model1;
pub mod model2;

pub use grid::{PeriodicGrid, SampledTransform};
pub use model1::{simulate_model1, Model1Config};
pub use model2::{gamma_model2, simulate_model2, Coupling, GammaResult, Mode, Model2Config};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Complex function on the plane entering a coupling or an initial field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingFunction {
    Zero,
    /// A (1 + q |y|^2/w^2) e^{-|y|^2/(2 w^2)} cos(kr |y|) e^{i k.x} with y = x - center.
    Gaussian {
        amplitude: Complex64,
        width: f64,
        #[serde(default)]
        center: [f64; 2],
        #[serde(default)]
        radial_quadratic: f64,
        #[serde(default)]
        wavevector: [f64; 2],
        #[serde(default)]
        radial_wavenumber: f64,
    },
    /// Values on the points -L/2 + j L/n, row-major; bilinear in between, zero outside.
    Samples {
        box_len: f64,
        n: usize,
        values: Vec<Complex64>,
    },
}

impl CouplingFunction {
    pub fn gaussian(amplitude: Complex64, width: f64) -> CouplingFunction {
        CouplingFunction::Gaussian {
            amplitude,
            width,
            center: [0.0; 2],
            radial_quadratic: 0.0,
            wavevector: [0.0; 2],
            radial_wavenumber: 0.0,
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> Complex64 {
        match self {
            CouplingFunction::Zero => Complex64::new(0.0, 0.0),
            CouplingFunction::Gaussian {
                amplitude,
                width,
                center,
                radial_quadratic,
                wavevector,
                radial_wavenumber,
            } => {
                let (a, b) = (x - center[0], y - center[1]);
                let r2 = a * a + b * b;
                let w2 = width * width;
                let mut v = (1.0 + radial_quadratic * r2 / w2) * (-0.5 * r2 / w2).exp();
                if *radial_wavenumber != 0.0 {
                    v *= (radial_wavenumber * r2.sqrt()).cos();
                }
                amplitude * v * Complex64::from_polar(1.0, wavevector[0] * x + wavevector[1] * y)
            }
            CouplingFunction::Samples { box_len, n, values } => {
                let h = box_len / *n as f64;
                let u = (x + 0.5 * box_len) / h;
                let v = (y + 0.5 * box_len) / h;
                if u < 0.0 || v < 0.0 || u > (*n - 1) as f64 || v > (*n - 1) as f64 {
                    return Complex64::new(0.0, 0.0);
                }
                let (i, j) = ((u.floor() as usize).min(n - 2), (v.floor() as usize).min(n - 2));
                let (fu, fv) = (u - i as f64, v - j as f64);
                let at = |ix: usize, iy: usize| values[iy * n + ix];
                at(i, j) * ((1.0 - fu) * (1.0 - fv))
                    + at(i + 1, j) * (fu * (1.0 - fv))
                    + at(i, j + 1) * ((1.0 - fu) * fv)
                    + at(i + 1, j + 1) * (fu * fv)
            }
        }
    }

    /// Unitary Fourier transform in closed form, when one exists.
    pub fn transform(&self, xi: [f64; 2]) -> Option<Complex64> {
        match self {
            CouplingFunction::Zero => Some(Complex64::new(0.0, 0.0)),
            CouplingFunction::Gaussian {
                amplitude,
                width,
                center,
                radial_quadratic,
                wavevector,
                radial_wavenumber,
            } => {
                if *radial_wavenumber != 0.0 {
                    return None;
                }
                let e = [xi[0] - wavevector[0], xi[1] - wavevector[1]];
                let e2 = e[0] * e[0] + e[1] * e[1];
                let w2 = width * width;
                let radial = w2 * (-0.5 * w2 * e2).exp() * (1.0 + radial_quadratic * (2.0 - w2 * e2));
                let shift = Complex64::from_polar(1.0, -(e[0] * center[0] + e[1] * center[1]));
                Some(amplitude * radial * shift)
            }
            CouplingFunction::Samples { .. } => None,
        }
    }

    pub fn conj(&self) -> CouplingFunction {
        match self {
            CouplingFunction::Zero => CouplingFunction::Zero,
            CouplingFunction::Gaussian {
                amplitude,
                width,
                center,
                radial_quadratic,
                wavevector,
                radial_wavenumber,
            } => CouplingFunction::Gaussian {
                amplitude: amplitude.conj(),
                width: *width,
                center: *center,
                radial_quadratic: *radial_quadratic,
                wavevector: [-wavevector[0], -wavevector[1]],
                radial_wavenumber: *radial_wavenumber,
            },
            CouplingFunction::Samples { box_len, n, values } => CouplingFunction::Samples {
                box_len: *box_len,
                n: *n,
                values: values.iter().map(|v| v.conj()).collect(),
            },
        }
    }

    pub fn scaled(&self, s: Complex64) -> CouplingFunction {
        match self {
            CouplingFunction::Zero => CouplingFunction::Zero,
            CouplingFunction::Gaussian { amplitude, .. } => {
                let mut out = self.clone();
                if let CouplingFunction::Gaussian { amplitude: a, .. } = &mut out {
                    *a = amplitude * s;
                }
                out
            }
            CouplingFunction::Samples { box_len, n, values } => CouplingFunction::Samples {
                box_len: *box_len,
                n: *n,
                values: values.iter().map(|v| v * s).collect(),
            },
        }
    }

    /// Largest modulus on the boundary of the box of side `box_len` relative to the largest sample.
    pub fn boundary_tail(&self, grid: &PeriodicGrid) -> f64 {
        let v = grid.sample(self);
        let peak = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let n = grid.n;
        let mut edge: f64 = 0.0;
        for i in 0..n {
            for idx in [i, (n - 1) * n + i, i * n, i * n + n - 1] {
                edge = edge.max(v[idx].norm());
            }
        }
        edge / peak
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformMethod {
    /// closed form when available, otherwise the grid
    Auto,
    Grid,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    #[serde(rename = "box")]
    pub box_len: f64,
    pub n_grid: usize,
    /// uniform points on each resonant circle
    pub n_theta: usize,
    pub method: TransformMethod,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            box_len: 40.0,
            n_grid: 256,
            n_theta: 512,
            method: TransformMethod::Auto,
        }
    }
}

/// Fourier transform evaluator chosen per the quadrature config.
pub enum Transform<'a> {
    Closed(&'a CouplingFunction),
    Sampled(SampledTransform),
}

impl Transform<'_> {
    pub fn at(&self, xi: [f64; 2]) -> Complex64 {
        match self {
            Transform::Closed(g) => g.transform(xi).expect("closed form checked at construction"),
            Transform::Sampled(t) => t.at(xi),
        }
    }
}

/// Closed-form or sampled transform of `g`; `pad` multiplies the box at fixed spacing.
pub fn transform_for<'a>(g: &'a CouplingFunction, cfg: &QuadratureConfig, pad: usize) -> Transform<'a> {
    let closed = g.transform([0.0, 0.0]).is_some();
    match cfg.method {
        TransformMethod::ClosedForm | TransformMethod::Auto if closed => Transform::Closed(g),
        _ => {
            let grid = PeriodicGrid::new(cfg.box_len * pad as f64, cfg.n_grid * pad);
            Transform::Sampled(SampledTransform::new(&grid, g))
        }
    }
}

/// int_0^{2 pi} f(rho cos t, rho sin t) dt by the periodic trapezoid rule.
pub fn circle_mean<F: FnMut([f64; 2]) -> f64>(rho: f64, n_theta: usize, mut f: F) -> f64 {
    let h = 2.0 * PI / n_theta as f64;
    (0..n_theta)
        .map(|l| {
            let t = h * l as f64;
            f([rho * t.cos(), rho * t.sin()])
        })
        .sum::<f64>()
        * h
}

fn constant_with(t: &Transform, n_theta: usize) -> f64 {
    0.5 * circle_mean(1.0, n_theta, |xi| t.at(xi).norm_sqr())
}

/// L^2 norm squared of `g` by grid quadrature, used as the absolute scale for error checks.
/// Largest value of c that |G^|^2 admits, pi max |G^|^2; absolute floor for the error checks.
fn peak_scale(g: &CouplingFunction, cfg: &QuadratureConfig) -> f64 {
    let grid = PeriodicGrid::new(cfg.box_len, cfg.n_grid);
    PI * SampledTransform::new(&grid, g).peak_norm_sqr()
}

/// Errors below this fraction of the peak scale are indistinguishable from zero.
const ABS_FLOOR: f64 = 1e-6;

/// c = (1/2) int_{|xi|=1} |G^|^2 d sigma.
pub fn fgr_constant(g: &CouplingFunction, cfg: &QuadratureConfig) -> Result<f64, FgrError> {
    let t = transform_for(g, cfg, 1);
    let c = constant_with(&t, cfg.n_theta);
    if let Transform::Sampled(_) = t {
        let fine = constant_with(&transform_for(g, cfg, 2), cfg.n_theta);
        let err = (c - fine).abs();
        if err > 0.01 * fine + ABS_FLOOR * peak_scale(g, cfg) {
            return Err(FgrError::GridTooCoarse {
                rel_error: err / fine.max(f64::MIN_POSITIVE),
            });
        }
    }
    Ok(c)
}

pub const ORACLE_EPSILONS: [f64; 3] = [0.1, 0.05, 0.025];
const ORACLE_PANELS: usize = 1000;
const ORACLE_ORDER: usize = 8;

/// (1/pi) int eps / ((|xi|^2 - 1)^2 + eps^2) |G^|^2 d xi, with u = |xi|^2 = 1 + eps tan(phi).
fn lorentzian_smeared(t: &Transform, eps: f64, n_theta: usize) -> f64 {
    let (x, w) = gauss_legendre(ORACLE_ORDER);
    let lo = (-1.0 / eps).atan();
    let hi = 0.5 * PI;
    let h = (hi - lo) / ORACLE_PANELS as f64;
    let mut acc = 0.0;
    for p in 0..ORACLE_PANELS {
        let a = lo + h * p as f64;
        for (xq, wq) in x.iter().zip(&w) {
            let phi = a + 0.5 * h * (xq + 1.0);
            let u = (1.0 + eps * phi.tan()).max(0.0);
            let ring = circle_mean(u.sqrt(), n_theta, |xi| t.at(xi).norm_sqr());
            acc += 0.5 * h * wq * ring;
        }
    }
    // rho d rho = du / 2 and eps du / ((u-1)^2 + eps^2) = d phi
    acc / (2.0 * PI)
}

/// Value at 0 of the interpolating polynomial through (x_i, y_i) (Neville).
fn extrapolate_to_zero(x: &[f64], y: &[f64]) -> f64 {
    let mut p = y.to_vec();
    let n = x.len();
    for k in 1..n {
        for i in 0..n - k {
            p[i] = (x[i + k] * p[i] - x[i] * p[i + 1]) / (x[i + k] - x[i]);
        }
    }
    p[0]
}

/// Broadened delta function limit, extrapolated to zero width.
pub fn fgr_constant_oracle(g: &CouplingFunction, epsilons: &[f64], cfg: &QuadratureConfig) -> Result<f64, FgrError> {
    let t = transform_for(g, cfg, 2);
    let vals: Vec<f64> = epsilons
        .iter()
        .map(|&e| lorentzian_smeared(&t, e, cfg.n_theta))
        .collect();
    let full = extrapolate_to_zero(epsilons, &vals);
    if epsilons.len() < 2 {
        return Ok(full);
    }
    let partial = extrapolate_to_zero(&epsilons[1..], &vals[1..]);
    let resid = (full - partial).abs();
    if resid > 0.01 * full.abs() + ABS_FLOOR * peak_scale(g, cfg) {
        return Err(FgrError::NonConvergent {
            rel_residual: resid / full.abs().max(f64::MIN_POSITIVE),
        });
    }
    Ok(full.max(0.0))
}

/// |z0|^2 / (1 + 4 pi c |z0|^4 t)^{1/2}.
pub fn predicted_decay(c: f64, z0: Complex64, t: f64) -> f64 {
    let a = z0.norm_sqr();
    a / (1.0 + 4.0 * PI * c * a * a * t).sqrt()
}

/// Sampled trajectory of a model run.
#[derive(Debug, Clone, Serialize)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    /// one column per mode
    pub z_abs2: Vec<Vec<f64>>,
    /// |z|^2 for the first model, sum_j s_j lambda_j |z_j|^2 for the second
    pub signed_energy: Vec<f64>,
    pub leak_integral: Vec<f64>,
    pub field_l2: Vec<f64>,
    pub predicted: Option<Vec<f64>>,
    pub hamiltonian: Vec<f64>,
    /// energy balance that the golden rule predicts constant
    pub ledger: Vec<f64>,
    pub max_boundary_fraction: f64,
    /// radiation constant used for the leak integrand (first model)
    pub fgr_constant: Option<f64>,
}

impl TimeSeries {
    pub fn hamiltonian_drift(&self) -> f64 {
        let h0 = self.hamiltonian[0];
        let scale = h0.abs().max(f64::MIN_POSITIVE);
        self.hamiltonian.iter().map(|h| (h - h0).abs()).fold(0.0, f64::max) / scale
    }

    /// Largest deviation of the ledger from its initial value relative to `scale`.
    pub fn ledger_drift(&self, scale: f64) -> f64 {
        let l0 = self.ledger[0];
        self.ledger.iter().map(|l| (l - l0).abs()).fold(0.0, f64::max) / scale
    }

    /// Ledger drift measured from the first sample at or after `t_start`.
    pub fn ledger_drift_after(&self, t_start: f64, scale: f64) -> f64 {
        let i0 = self.t.iter().position(|&t| t >= t_start).unwrap_or(self.t.len() - 1);
        let l0 = self.ledger[i0];
        self.ledger[i0..].iter().map(|l| (l - l0).abs()).fold(0.0, f64::max) / scale
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for j in 0..self.z_abs2.len() {
            write!(s, ",z{}_abs2", j + 1).unwrap();
        }
        s.push_str(",signed_energy,leak_integral,field_l2");
        if self.predicted.is_some() {
            s.push_str(",predicted");
        }
        s.push('\n');
        for i in 0..self.t.len() {
            write!(s, "{:?}", self.t[i]).unwrap();
            for col in &self.z_abs2 {
                write!(s, ",{:?}", col[i]).unwrap();
            }
            write!(s, ",{:?},{:?},{:?}", self.signed_energy[i], self.leak_integral[i], self.field_l2[i]).unwrap();
            if let Some(p) = &self.predicted {
                write!(s, ",{:?}", p[i]).unwrap();
            }
            s.push('\n');
        }
        s
    }
}

/// Shared time grid: steps of exactly t_final / n_steps, output every `every` steps.
pub(crate) fn schedule(dt: f64, t_final: f64, sample_dt: f64) -> (usize, f64, usize) {
    let steps = (t_final / dt).round().max(1.0) as usize;
    let h = t_final / steps as f64;
    let every = ((sample_dt / h).round() as usize).max(1);
    (steps, h, every)
}

pub(crate) fn rk4<S, F>(y: &S, h: f64, f: F) -> S
where
    S: Clone + Axpy,
    F: Fn(&S) -> S,
{
    let k1 = f(y);
    let k2 = f(&y.axpy(0.5 * h, &k1));
    let k3 = f(&y.axpy(0.5 * h, &k2));
    let k4 = f(&y.axpy(h, &k3));
    let mut out = y.axpy(h / 6.0, &k1);
    out = out.axpy(h / 3.0, &k2);
    out = out.axpy(h / 3.0, &k3);
    out.axpy(h / 6.0, &k4)
}

pub(crate) trait Axpy {
    fn axpy(&self, a: f64, x: &Self) -> Self;
}

impl Axpy for Vec<Complex64> {
    fn axpy(&self, a: f64, x: &Self) -> Self {
        self.iter().zip(x).map(|(u, v)| u + v * a).collect()
    }
}
