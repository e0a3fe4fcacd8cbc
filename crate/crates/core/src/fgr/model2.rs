//! Several discrete modes of either Krein signature coupled to a two-component field h = (f, conj f)
//! evolving under sigma_3 (-Delta + omega).
//!
//! Each configured coupling (alpha, beta, G) contributes z^alpha conj(z)^beta G to the field equation
//! together with its conjugate partner (beta, alpha, -sigma_1 conj(G)).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::model1::{check_grid, check_tail, BOUNDARY_TOL, STABILITY_BOUND};
use super::{circle_mean, rk4, schedule, transform_for, CouplingFunction, PeriodicGrid, QuadratureConfig, TimeSeries, Transform, I};
use crate::error::FgrError;

/// Levels closer than this are one physical level.
pub const LEVEL_MERGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub lambda: f64,
    pub s: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coupling {
    pub alpha: Vec<u32>,
    /// exponents of conj(z); empty means zero
    #[serde(default)]
    pub beta: Vec<u32>,
    /// the two components of G_{alpha beta}
    #[serde(rename = "G")]
    pub g: [CouplingFunction; 2],
}

impl Coupling {
    fn exponents(&self, n: usize) -> (Vec<u32>, Vec<u32>) {
        let mut a = self.alpha.clone();
        let mut b = self.beta.clone();
        a.resize(n, 0);
        b.resize(n, 0);
        (a, b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Model2Config {
    pub omega: f64,
    pub modes: Vec<Mode>,
    pub couplings: Vec<Coupling>,
    #[serde(rename = "box")]
    pub box_len: f64,
    pub n_grid: usize,
    pub dt: f64,
    pub t_final: f64,
    pub z0: Vec<Complex64>,
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    /// points on each resonant circle
    #[serde(default = "default_n_theta")]
    pub n_theta: usize,
}

fn default_sample_dt() -> f64 {
    0.5
}

fn default_substeps() -> usize {
    1
}

fn default_n_theta() -> usize {
    256
}

fn gauss(a: f64, w: f64, center: [f64; 2]) -> CouplingFunction {
    CouplingFunction::Gaussian {
        amplitude: Complex64::new(a, 0.0),
        width: w,
        center,
        radial_quadratic: 0.0,
        wavevector: [0.0; 2],
        radial_wavenumber: 0.0,
    }
}

impl Model2Config {
    /// One mode of positive energy radiating through z^3 at the level 3 lambda.
    pub fn single_mode_preset() -> Model2Config {
        Model2Config {
            omega: 0.5,
            modes: vec![Mode { lambda: 0.5, s: -1 }],
            couplings: vec![Coupling {
                alpha: vec![3],
                beta: vec![],
                g: [gauss(0.125, 1.0, [0.0; 2]), gauss(0.25, 1.0, [0.0; 2])],
            }],
            box_len: 320.0,
            n_grid: 512,
            dt: 0.05,
            t_final: 30.0,
            z0: vec![Complex64::new(0.4, 0.0)],
            sample_dt: 0.5,
            substeps: 1,
            n_theta: 256,
        }
    }

    /// Modes of opposite signature; z_2^2 conj(z_1) drains both, z_2^3 drains the second alone.
    pub fn two_mode_preset() -> Model2Config {
        Model2Config {
            omega: 1.0,
            modes: vec![Mode { lambda: 0.6, s: 1 }, Mode { lambda: 1.2, s: -1 }],
            couplings: vec![
                Coupling {
                    alpha: vec![0, 2],
                    beta: vec![1, 0],
                    g: [gauss(0.24, 1.0, [0.3, 0.0]), gauss(0.9, 1.2, [0.0, 0.2])],
                },
                Coupling {
                    alpha: vec![0, 3],
                    beta: vec![],
                    g: [gauss(0.18, 0.9, [0.0; 2]), gauss(0.36, 1.0, [-0.2, 0.0])],
                },
            ],
            box_len: 600.0,
            n_grid: 1024,
            dt: 0.05,
            t_final: 57.0,
            z0: vec![Complex64::new(0.25, 0.0), Complex64::new(0.25 * 2f64.sqrt(), 0.0)],
            sample_dt: 0.5,
            substeps: 1,
            n_theta: 256,
        }
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        QuadratureConfig {
            box_len: self.box_len,
            n_grid: self.n_grid,
            n_theta: self.n_theta,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<(), FgrError> {
        check_grid(self.box_len, self.n_grid, self.dt, self.t_final)?;
        let n = self.modes.len();
        if n == 0 || self.z0.len() != n {
            return Err(FgrError::InvalidConfig(format!(
                "need at least one mode and one initial amplitude per mode (modes {n}, z0 {})",
                self.z0.len()
            )));
        }
        if !(self.omega > 0.0) {
            return Err(FgrError::InvalidConfig(format!("omega must be positive, got {}", self.omega)));
        }
        for (j, m) in self.modes.iter().enumerate() {
            if !(m.lambda > 0.0) || (m.s != 1 && m.s != -1) {
                return Err(FgrError::InvalidConfig(format!(
                    "mode {j}: need lambda > 0 and s = +-1, got {} and {}",
                    m.lambda, m.s
                )));
            }
        }
        for (i, c) in self.couplings.iter().enumerate() {
            if c.alpha.len() > n || c.beta.len() > n {
                return Err(FgrError::InvalidConfig(format!("coupling {i} has more exponents than modes")));
            }
            let l = self.level(c).abs();
            if l <= self.omega {
                return Err(FgrError::CouplingConstraint {
                    index: i,
                    level: l,
                    omega: self.omega,
                });
            }
        }
        Ok(())
    }

    /// lambda . (alpha - beta)
    pub fn level(&self, c: &Coupling) -> f64 {
        let (a, b) = c.exponents(self.modes.len());
        self.modes
            .iter()
            .zip(a.iter().zip(&b))
            .map(|(m, (x, y))| m.lambda * (*x as f64 - *y as f64))
            .sum()
    }
}

fn monomial(z: &[Complex64], a: &[u32], b: &[u32]) -> Complex64 {
    let mut p = Complex64::new(1.0, 0.0);
    for ((zj, &x), &y) in z.iter().zip(a).zip(b) {
        p *= zj.powu(x) * zj.conj().powu(y);
    }
    p
}

/// d/d conj(z_j) of z^a conj(z)^b.
fn monomial_dzbar(z: &[Complex64], a: &[u32], b: &[u32], j: usize) -> Complex64 {
    if b[j] == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let mut bb = b.to_vec();
    bb[j] -= 1;
    monomial(z, a, &bb) * b[j] as f64
}

/// A coupling as seen by the resonant radiation: the term whose field forcing oscillates at -L.
struct Radiator {
    coupling: usize,
    /// true when the amplitude is conj(z^alpha conj(z)^beta)
    conj: bool,
}

struct Level {
    l: f64,
    members: Vec<Radiator>,
    /// q[t][u] = int_0^{2 pi} conj(B^_t) B^_u d theta on the circle |xi| = sqrt(L - omega)
    q: Vec<Vec<Complex64>>,
}

struct Resonances {
    levels: Vec<Level>,
    exps: Vec<(Vec<u32>, Vec<u32>)>,
}

impl Resonances {
    fn amplitude(&self, r: &Radiator, z: &[Complex64]) -> Complex64 {
        let (a, b) = &self.exps[r.coupling];
        let p = monomial(z, a, b);
        if r.conj {
            p.conj()
        } else {
            p
        }
    }

    /// pi sum_L L int |sum_t m_t(z) B^_t|^2 d theta, the growth rate of the signed energy.
    fn leak_rate(&self, z: &[Complex64]) -> f64 {
        let mut out = 0.0;
        for lv in &self.levels {
            let m: Vec<Complex64> = lv.members.iter().map(|r| self.amplitude(r, z)).collect();
            let mut acc = Complex64::new(0.0, 0.0);
            for (t, mt) in m.iter().enumerate() {
                for (u, mu) in m.iter().enumerate() {
                    acc += mt.conj() * mu * lv.q[t][u];
                }
            }
            out += PI * lv.l * acc.re;
        }
        out
    }
}

fn forcing(cfg: &Model2Config, c: &Coupling) -> (bool, CouplingFunction) {
    if cfg.level(c) > 0.0 {
        // the partner term conj(P) (-conj(G_2)) radiates
        (true, c.g[1].conj().scaled(Complex64::new(-1.0, 0.0)))
    } else {
        (false, c.g[0].clone())
    }
}

fn level_matrices(cfg: &Model2Config, quad: &QuadratureConfig, pad: usize, groups: &[(f64, Vec<usize>)]) -> Vec<Vec<Vec<Complex64>>> {
    let forcings: Vec<CouplingFunction> = cfg.couplings.iter().map(|c| forcing(cfg, c).1).collect();
    groups
        .iter()
        .map(|(l, idx)| {
            let ts: Vec<Transform> = idx.iter().map(|&i| transform_for(&forcings[i], quad, pad)).collect();
            let rho = (l - cfg.omega).sqrt();
            let n = idx.len();
            let mut q = vec![vec![Complex64::new(0.0, 0.0); n]; n];
            for t in 0..n {
                for u in t..n {
                    let re = circle_mean(rho, quad.n_theta, |xi| (ts[t].at(xi).conj() * ts[u].at(xi)).re);
                    let im = circle_mean(rho, quad.n_theta, |xi| (ts[t].at(xi).conj() * ts[u].at(xi)).im);
                    q[t][u] = Complex64::new(re, im);
                    q[u][t] = Complex64::new(re, -im);
                }
            }
            q
        })
        .collect()
}

fn resonances(cfg: &Model2Config, quad: &QuadratureConfig) -> Result<Resonances, FgrError> {
    let n = cfg.modes.len();
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for (i, c) in cfg.couplings.iter().enumerate() {
        let l = cfg.level(c).abs();
        match groups.iter_mut().find(|(g, _)| (g - l).abs() < LEVEL_MERGE_TOL) {
            Some((_, v)) => v.push(i),
            None => groups.push((l, vec![i])),
        }
    }
    groups.sort_by(|a, b| a.0.total_cmp(&b.0));
    let qs = level_matrices(cfg, quad, 1, &groups);
    let sampled = cfg
        .couplings
        .iter()
        .any(|c| matches!(transform_for(&forcing(cfg, c).1, quad, 1), Transform::Sampled(_)));
    if sampled {
        let fine = level_matrices(cfg, quad, 2, &groups);
        let (mut diff, mut size) = (0.0, 0.0);
        for (a, b) in qs.iter().zip(&fine) {
            for (ra, rb) in a.iter().zip(b) {
                for (x, y) in ra.iter().zip(rb) {
                    diff += (x - y).norm_sqr();
                    size += y.norm_sqr();
                }
            }
        }
        let scale: f64 = cfg
            .couplings
            .iter()
            .map(|c| super::peak_scale(&forcing(cfg, c).1, quad))
            .sum();
        if diff.sqrt() > 0.01 * size.sqrt() + super::ABS_FLOOR * scale {
            return Err(FgrError::GridTooCoarse {
                rel_error: diff.sqrt() / size.sqrt().max(f64::MIN_POSITIVE),
            });
        }
    }
    let levels = groups
        .into_iter()
        .zip(qs)
        .map(|((l, idx), q)| Level {
            l,
            members: idx
                .into_iter()
                .map(|i| Radiator {
                    coupling: i,
                    conj: forcing(cfg, &cfg.couplings[i]).0,
                })
                .collect(),
            q,
        })
        .collect();
    Ok(Resonances {
        levels,
        exps: cfg.couplings.iter().map(|c| c.exponents(n)).collect(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaResult {
    /// Gamma(zeta) = -(growth rate of sum_j s_j lambda_j |z_j|^2) at z = zeta
    pub gamma_values: Vec<f64>,
    /// min over samples of -Gamma(zeta) / sum |zeta^alpha conj(zeta)^beta|^2
    pub h13_margin: f64,
    pub levels: Vec<f64>,
}

/// Radiation form Gamma on the given points of mode space.
pub fn gamma_model2(cfg: &Model2Config, zeta_samples: &[Vec<Complex64>]) -> Result<GammaResult, FgrError> {
    cfg.validate()?;
    let res = resonances(cfg, &cfg.quadrature())?;
    let mut monos: Vec<&(Vec<u32>, Vec<u32>)> = Vec::new();
    for e in &res.exps {
        if !monos.contains(&e) {
            monos.push(e);
        }
    }
    let mut gamma_values = Vec::with_capacity(zeta_samples.len());
    let mut margin = f64::INFINITY;
    for zeta in zeta_samples {
        if zeta.len() != cfg.modes.len() {
            return Err(FgrError::InvalidConfig(format!(
                "sample has {} entries for {} modes",
                zeta.len(),
                cfg.modes.len()
            )));
        }
        let g = -res.leak_rate(zeta);
        let denom: f64 = monos.iter().map(|(a, b)| monomial(zeta, a, b).norm_sqr()).sum();
        if denom > 0.0 {
            margin = margin.min(-g / denom);
        }
        gamma_values.push(g);
    }
    Ok(GammaResult {
        gamma_values,
        h13_margin: if margin.is_finite() { margin } else { 0.0 },
        levels: res.levels.iter().map(|l| l.l).collect(),
    })
}

/// Coupling-flow state: modes, A_c = int (G_{c,1} conj f - G_{c,2} f), and W_c = int P_c dt.
struct Flow<'a> {
    s: Vec<f64>,
    exps: &'a [(Vec<u32>, Vec<u32>)],
    m11: Vec<Vec<Complex64>>,
    m12: Vec<Vec<Complex64>>,
    m21: Vec<Vec<Complex64>>,
    m22: Vec<Vec<Complex64>>,
}

impl Flow<'_> {
    fn rhs(&self, y: &[Complex64]) -> Vec<Complex64> {
        let n = self.s.len();
        let nc = self.exps.len();
        let z = &y[..n];
        let a = &y[n..n + nc];
        let p: Vec<Complex64> = self.exps.iter().map(|(al, be)| monomial(z, al, be)).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); n + 2 * nc];
        for j in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, (al, be)) in self.exps.iter().enumerate() {
                acc += monomial_dzbar(z, al, be, j) * a[c] + monomial_dzbar(z, be, al, j) * a[c].conj();
            }
            out[j] = -I * self.s[j] * acc;
        }
        for c in 0..nc {
            let mut acc = Complex64::new(0.0, 0.0);
            for d in 0..nc {
                let (pd, qd) = (p[d], p[d].conj());
                acc += qd * self.m11[c][d] - pd * self.m12[c][d] + pd * self.m21[c][d] - qd * self.m22[c][d];
            }
            out[n + c] = I * acc;
            out[n + nc + c] = p[c];
        }
        out
    }
}

fn gram(a: &[Complex64], b: &[Complex64], conj_b: bool, dx2: f64) -> Complex64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| if conj_b { x * y.conj() } else { x * y })
        .sum::<Complex64>()
        * dx2
}

/// Strang splitting: exact half steps of K and of the mode rotations, RK4 for the coupling flow.
pub fn simulate_model2(cfg: &Model2Config) -> Result<TimeSeries, FgrError> {
    cfg.validate()?;
    let lam_max = cfg.modes.iter().map(|m| m.lambda).fold(0.0, f64::max);
    if cfg.dt * lam_max > STABILITY_BOUND {
        return Err(FgrError::Unstable(format!(
            "dt * max lambda = {} exceeds {STABILITY_BOUND}",
            cfg.dt * lam_max
        )));
    }
    let grid = PeriodicGrid::new(cfg.box_len, cfg.n_grid);
    for (i, c) in cfg.couplings.iter().enumerate() {
        check_tail(&c.g[0], &grid, &format!("coupling {i} component 1"))?;
        check_tail(&c.g[1], &grid, &format!("coupling {i} component 2"))?;
    }
    let res = resonances(cfg, &cfg.quadrature())?;
    let n = cfg.modes.len();
    let nc = cfg.couplings.len();
    let (steps, dt, every) = schedule(cfg.dt, cfg.t_final, cfg.sample_dt);
    let n2 = grid.len();
    let dx2 = grid.dx * grid.dx;
    let norm = dx2 / n2 as f64;

    let g1: Vec<Vec<Complex64>> = cfg.couplings.iter().map(|c| grid.sample(&c.g[0])).collect();
    let g2: Vec<Vec<Complex64>> = cfg.couplings.iter().map(|c| grid.sample(&c.g[1])).collect();
    let table = |f: &dyn Fn(usize, usize) -> Complex64| -> Vec<Vec<Complex64>> {
        (0..nc).map(|c| (0..nc).map(|d| f(c, d)).collect()).collect()
    };
    let flow = Flow {
        s: cfg.modes.iter().map(|m| m.s as f64).collect(),
        exps: &res.exps,
        m11: table(&|c, d| gram(&g1[c], &g1[d], true, dx2)),
        m12: table(&|c, d| gram(&g1[c], &g2[d], false, dx2)),
        m21: table(&|c, d| gram(&g2[c], &g1[d], false, dx2)),
        m22: table(&|c, d| gram(&g2[c], &g2[d], true, dx2)),
    };
    let d1: Vec<Vec<Complex64>> = cfg.couplings.iter().map(|c| grid.dft(&c.g[0])).collect();
    let d2: Vec<Vec<Complex64>> = cfg.couplings.iter().map(|c| grid.dft(&c.g[1])).collect();
    let d2bar: Vec<Vec<Complex64>> = cfg.couplings.iter().map(|c| grid.dft(&c.g[1].conj())).collect();
    let d2neg: Vec<Vec<Complex64>> = d2.iter().map(|d| (0..n2).map(|k| d[grid.neg_index(k)]).collect()).collect();
    let symbol: Vec<f64> = grid.laplacian_symbol().iter().map(|l| l + cfg.omega).collect();
    let half: Vec<Complex64> = symbol.iter().map(|l| Complex64::from_polar(1.0, -0.5 * l * dt)).collect();
    let z_half: Vec<Complex64> = cfg.modes.iter().map(|m| Complex64::from_polar(1.0, 0.5 * m.lambda * dt)).collect();

    let project = |f: &[Complex64]| -> Vec<Complex64> {
        (0..nc)
            .map(|c| {
                f.iter()
                    .zip(d1[c].iter().zip(&d2neg[c]))
                    .map(|(v, (a, b))| a * v.conj() - b * v)
                    .sum::<Complex64>()
                    * norm
            })
            .collect()
    };
    let signed = |z: &[Complex64]| -> f64 {
        cfg.modes
            .iter()
            .zip(z)
            .map(|(m, zj)| m.s as f64 * m.lambda * zj.norm_sqr())
            .sum()
    };
    let energy = |z: &[Complex64], f: &[Complex64]| -> f64 {
        let field: f64 = symbol.iter().zip(f).map(|(l, v)| l * v.norm_sqr()).sum::<f64>() * norm;
        let a = project(f);
        let coup: f64 = res
            .exps
            .iter()
            .zip(&a)
            .map(|((al, be), ac)| 2.0 * (monomial(z, al, be) * ac).re)
            .sum();
        -signed(z) + field + coup
    };

    let mut ts = TimeSeries {
        t: Vec::new(),
        z_abs2: vec![Vec::new(); n],
        signed_energy: Vec::new(),
        leak_integral: Vec::new(),
        field_l2: Vec::new(),
        predicted: None,
        hamiltonian: Vec::new(),
        ledger: Vec::new(),
        max_boundary_fraction: 0.0,
        fgr_constant: None,
    };
    let record = |ts: &mut TimeSeries, t: f64, z: &[Complex64], f: &[Complex64], leak: f64| -> Result<(), FgrError> {
        let mass: f64 = f.iter().map(|v| v.norm_sqr()).sum::<f64>() * norm;
        let hval = energy(z, f);
        if !hval.is_finite() {
            return Err(FgrError::Unstable(format!("non-finite state at t={t}")));
        }
        if mass > 0.0 {
            let frac = grid.boundary_fraction(&grid.to_real(f));
            ts.max_boundary_fraction = ts.max_boundary_fraction.max(frac);
            if frac > BOUNDARY_TOL {
                return Err(FgrError::BoxWrap { t, fraction: frac });
            }
        }
        let es = signed(z);
        ts.t.push(t);
        for (col, zj) in ts.z_abs2.iter_mut().zip(z) {
            col.push(zj.norm_sqr());
        }
        ts.signed_energy.push(es);
        ts.leak_integral.push(leak);
        ts.field_l2.push(mass);
        ts.hamiltonian.push(hval);
        ts.ledger.push(es - leak);
        Ok(())
    };

    let mut z = cfg.z0.clone();
    let mut f = vec![Complex64::new(0.0, 0.0); n2];
    let mut leak = 0.0;
    let mut rate = res.leak_rate(&z);
    record(&mut ts, 0.0, &z, &f, leak)?;
    let sub = cfg.substeps.max(1);
    for step in 1..=steps {
        f.iter_mut().zip(&half).for_each(|(v, p)| *v *= p);
        z.iter_mut().zip(&z_half).for_each(|(v, p)| *v *= p);
        let mut y = z.clone();
        y.extend(project(&f));
        y.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), nc));
        for _ in 0..sub {
            y = rk4(&y, dt / sub as f64, |s| flow.rhs(s));
        }
        z.copy_from_slice(&y[..n]);
        let w = &y[n + nc..];
        for c in 0..nc {
            let (wc, wb) = (-I * w[c], I * w[c].conj());
            f.iter_mut()
                .zip(d1[c].iter().zip(&d2bar[c]))
                .for_each(|(v, (a, b))| *v += wc * a + wb * b);
        }
        f.iter_mut().zip(&half).for_each(|(v, p)| *v *= p);
        z.iter_mut().zip(&z_half).for_each(|(v, p)| *v *= p);
        let next = res.leak_rate(&z);
        leak += 0.5 * dt * (rate + next);
        rate = next;
        if step % every == 0 || step == steps {
            record(&mut ts, step as f64 * dt, &z, &f, leak)?;
        }
    }
    Ok(ts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Model2Config {
        let mut cfg = Model2Config::two_mode_preset();
        cfg.box_len = 48.0;
        cfg.n_grid = 96;
        cfg.t_final = 5.0;
        cfg.dt = 0.05;
        cfg
    }

    #[test]
    fn zero_couplings_keep_amplitudes() {
        let mut cfg = tiny();
        for c in &mut cfg.couplings {
            c.g = [CouplingFunction::Zero, CouplingFunction::Zero];
        }
        let ts = simulate_model2(&cfg).unwrap();
        for (j, col) in ts.z_abs2.iter().enumerate() {
            for v in col {
                assert!((v - cfg.z0[j].norm_sqr()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn constraint_violation_rejected() {
        let mut cfg = tiny();
        cfg.couplings[0].alpha = vec![1, 0];
        cfg.couplings[0].beta = vec![];
        assert!(matches!(simulate_model2(&cfg), Err(FgrError::CouplingConstraint { index: 0, .. })));
    }

    #[test]
    fn monomial_derivative_matches_difference() {
        let z = [Complex64::new(0.3, -0.2), Complex64::new(-0.1, 0.4)];
        let (a, b) = ([2u32, 1], [1u32, 2]);
        let h = 1e-6;
        for j in 0..2 {
            // d/d conj(z) = (d/dx + i d/dy) / 2
            let mut zp = z;
            zp[j] += h;
            let mut zm = z;
            zm[j] -= h;
            let dx = (monomial(&zp, &a, &b) - monomial(&zm, &a, &b)) / (2.0 * h);
            let mut zp = z;
            zp[j] += I * h;
            let mut zm = z;
            zm[j] -= I * h;
            let dy = (monomial(&zp, &a, &b) - monomial(&zm, &a, &b)) / (2.0 * h);
            let num = 0.5 * (dx + I * dy);
            assert!((num - monomial_dzbar(&z, &a, &b, j)).norm() < 1e-8);
        }
    }

    #[test]
    fn gamma_is_nonpositive_and_phase_invariant() {
        let cfg = Model2Config::two_mode_preset();
        let zeta = vec![Complex64::new(0.6, 0.1), Complex64::new(-0.3, 0.7)];
        let rot: Vec<Complex64> = zeta
            .iter()
            .zip(&cfg.modes)
            .map(|(z, m)| z * Complex64::from_polar(1.0, 1.7 * m.lambda))
            .collect();
        let g = gamma_model2(&cfg, &[zeta, rot]).unwrap();
        assert!(g.gamma_values.iter().all(|v| *v < 0.0));
        assert!((g.gamma_values[0] - g.gamma_values[1]).abs() < 1e-12 * g.gamma_values[0].abs());
    }

    #[test]
    fn vanishing_transforms_give_zero_gamma() {
        // the level 3 lambda = 1.5 sits on the unit circle, where (1 - |x|^2) e^{-|x|^2/2} has no transform
        let mut cfg = Model2Config::single_mode_preset();
        cfg.couplings[0].g[1] = CouplingFunction::Gaussian {
            amplitude: Complex64::new(1.0, 0.0),
            width: 1.0,
            center: [0.0; 2],
            radial_quadratic: -1.0,
            wavevector: [0.0; 2],
            radial_wavenumber: 0.0,
        };
        let g = gamma_model2(&cfg, &[vec![Complex64::new(1.0, 0.0)]]).unwrap();
        assert!(g.gamma_values[0].abs() < 1e-28 && g.h13_margin < 1e-28);
    }
}
