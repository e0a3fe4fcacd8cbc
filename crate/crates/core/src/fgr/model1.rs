//! One discrete mode z coupled to a scalar field h through the cubic channel |z|^2 z G.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{fgr_constant, predicted_decay, rk4, schedule, CouplingFunction, PeriodicGrid, QuadratureConfig, TimeSeries, I};
use crate::error::FgrError;

/// Largest accepted dt times the oscillator frequency.
pub const STABILITY_BOUND: f64 = 0.5;
pub const BOUNDARY_TOL: f64 = 1e-4;
pub const TAIL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Model1Config {
    #[serde(rename = "G")]
    pub g: CouplingFunction,
    #[serde(rename = "box")]
    pub box_len: f64,
    pub n_grid: usize,
    pub dt: f64,
    pub t_final: f64,
    pub z0: Complex64,
    #[serde(default)]
    pub h0: Option<CouplingFunction>,
    /// spacing of the recorded samples
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
    /// RK4 substeps of the coupling flow per step
    #[serde(default = "default_substeps")]
    pub substeps: usize,
}

fn default_sample_dt() -> f64 {
    0.25
}

fn default_substeps() -> usize {
    1
}

impl Model1Config {
    /// Unit Gaussian coupling with t_final chosen so that 4 pi c |z0|^4 t_final = 3.
    pub fn gaussian_preset(z0: f64) -> Model1Config {
        let c = PI / std::f64::consts::E;
        let t_final = 3.0 / (4.0 * PI * c * z0.powi(4));
        // outgoing waves of the forcing frequency travel at 2, faster transients at up to about 4
        let box_len = (10.0 * t_final).max(64.0).ceil();
        let n_grid = ((box_len / 0.5) as usize).next_power_of_two();
        Model1Config {
            g: CouplingFunction::gaussian(Complex64::new(1.0, 0.0), 1.0),
            box_len,
            n_grid,
            dt: 0.02,
            t_final,
            z0: Complex64::new(z0, 0.0),
            h0: None,
            sample_dt: 0.25,
            substeps: 1,
        }
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        QuadratureConfig {
            box_len: self.box_len,
            n_grid: self.n_grid,
            ..Default::default()
        }
    }
}

#[derive(Clone)]
struct Coupled {
    z: Complex64,
    /// int G h dx
    a: Complex64,
    /// int |z|^2 z dt over the coupling step
    w: Complex64,
}

impl super::Axpy for Coupled {
    fn axpy(&self, s: f64, x: &Self) -> Self {
        Coupled {
            z: self.z + x.z * s,
            a: self.a + x.a * s,
            w: self.w + x.w * s,
        }
    }
}

pub(crate) fn check_tail(g: &CouplingFunction, grid: &PeriodicGrid, what: &str) -> Result<(), FgrError> {
    let tail = g.boundary_tail(grid);
    if tail > TAIL_TOL {
        return Err(FgrError::InvalidConfig(format!(
            "{what} is {tail:e} of its peak at the box boundary (limit {TAIL_TOL:e})"
        )));
    }
    Ok(())
}

pub(crate) fn check_grid(box_len: f64, n: usize, dt: f64, t_final: f64) -> Result<(), FgrError> {
    if !(box_len > 0.0) || n < 8 || !(dt > 0.0) || !(t_final > 0.0) {
        return Err(FgrError::InvalidConfig(format!(
            "need box > 0, n_grid >= 8, dt > 0, t_final > 0 (got {box_len}, {n}, {dt}, {t_final})"
        )));
    }
    Ok(())
}

/// Strang splitting: exact half steps of -Delta and of the oscillator, one RK4 step of the coupling.
pub fn simulate_model1(cfg: &Model1Config) -> Result<TimeSeries, FgrError> {
    check_grid(cfg.box_len, cfg.n_grid, cfg.dt, cfg.t_final)?;
    if cfg.dt > STABILITY_BOUND {
        return Err(FgrError::Unstable(format!(
            "dt * frequency = {} exceeds {STABILITY_BOUND}",
            cfg.dt
        )));
    }
    let grid = PeriodicGrid::new(cfg.box_len, cfg.n_grid);
    check_tail(&cfg.g, &grid, "G")?;
    let c = fgr_constant(&cfg.g, &cfg.quadrature())?;
    let (steps, dt, every) = schedule(cfg.dt, cfg.t_final, cfg.sample_dt);
    let n2 = grid.len();
    let dx2 = grid.dx * grid.dx;
    let norm = dx2 / n2 as f64;

    let g_dft = grid.dft(&cfg.g);
    let gbar_dft = grid.dft(&cfg.g.conj());
    // a = int G h = (dx^2 / N) sum_k DFT(G)(-k) h^(k)
    let proj: Vec<Complex64> = (0..n2).map(|k| g_dft[grid.neg_index(k)] * norm).collect();
    let gamma = grid.sample(&cfg.g).iter().map(|v| v.norm_sqr()).sum::<f64>() * dx2;
    let lap = grid.laplacian_symbol();
    let half: Vec<Complex64> = lap.iter().map(|l| Complex64::from_polar(1.0, -0.5 * l * dt)).collect();
    let z_half = Complex64::from_polar(1.0, -0.5 * dt);

    let mut h = match &cfg.h0 {
        Some(h0) => {
            check_tail(h0, &grid, "h0")?;
            grid.dft(h0)
        }
        None => vec![Complex64::new(0.0, 0.0); n2],
    };
    let mut z = cfg.z0;
    let project = |h: &[Complex64]| -> Complex64 { proj.iter().zip(h).map(|(p, v)| p * v).sum() };
    let energy = |z: Complex64, h: &[Complex64]| -> f64 {
        let grad: f64 = lap.iter().zip(h).map(|(l, v)| l * v.norm_sqr()).sum::<f64>() * norm;
        z.norm_sqr() + grad + 2.0 * (z.norm_sqr() * z.conj() * project(h)).re
    };

    let mut ts = TimeSeries {
        t: Vec::new(),
        z_abs2: vec![Vec::new()],
        signed_energy: Vec::new(),
        leak_integral: Vec::new(),
        field_l2: Vec::new(),
        predicted: Some(Vec::new()),
        hamiltonian: Vec::new(),
        ledger: Vec::new(),
        max_boundary_fraction: 0.0,
        fgr_constant: Some(c),
    };
    let mut leak = 0.0;
    let record = |ts: &mut TimeSeries, t: f64, z: Complex64, h: &[Complex64], leak: f64| -> Result<(), FgrError> {
        let mass: f64 = h.iter().map(|v| v.norm_sqr()).sum::<f64>() * norm;
        let hval = energy(z, h);
        if !hval.is_finite() || !z.norm().is_finite() {
            return Err(FgrError::Unstable(format!("non-finite state at t={t}")));
        }
        if mass > 0.0 {
            let frac = grid.boundary_fraction(&grid.to_real(h));
            ts.max_boundary_fraction = ts.max_boundary_fraction.max(frac);
            if frac > BOUNDARY_TOL {
                return Err(FgrError::BoxWrap { t, fraction: frac });
            }
        }
        ts.t.push(t);
        ts.z_abs2[0].push(z.norm_sqr());
        ts.signed_energy.push(z.norm_sqr());
        ts.leak_integral.push(leak);
        ts.field_l2.push(mass);
        ts.predicted.as_mut().unwrap().push(predicted_decay(c, cfg.z0, t));
        ts.hamiltonian.push(hval);
        ts.ledger.push(z.norm_sqr() + leak);
        Ok(())
    };
    record(&mut ts, 0.0, z, &h, leak)?;
    let sub = cfg.substeps.max(1);
    for step in 1..=steps {
        let z6_before = z.norm_sqr().powi(3);
        h.iter_mut().zip(&half).for_each(|(v, p)| *v *= p);
        z *= z_half;
        let mut y = Coupled {
            z,
            a: project(&h),
            w: Complex64::new(0.0, 0.0),
        };
        for _ in 0..sub {
            y = rk4(&y, dt / sub as f64, |s| {
                let m = s.z.norm_sqr();
                Coupled {
                    z: -I * (2.0 * m * s.a + s.z * s.z * s.a.conj()),
                    a: -I * gamma * m * s.z,
                    w: m * s.z,
                }
            });
        }
        z = y.z;
        h.iter_mut().zip(&gbar_dft).for_each(|(v, g)| *v += -I * y.w * g);
        h.iter_mut().zip(&half).for_each(|(v, p)| *v *= p);
        z *= z_half;
        leak += 2.0 * PI * c * 0.5 * dt * (z6_before + z.norm_sqr().powi(3));
        if step % every == 0 || step == steps {
            record(&mut ts, step as f64 * dt, z, &h, leak)?;
        }
    }
    Ok(ts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(g: CouplingFunction) -> Model1Config {
        Model1Config {
            g,
            box_len: 64.0,
            n_grid: 128,
            dt: 0.05,
            t_final: 6.0,
            z0: Complex64::new(0.4, 0.0),
            h0: None,
            sample_dt: 0.5,
            substeps: 1,
        }
    }

    #[test]
    fn zero_coupling_keeps_amplitude() {
        let ts = simulate_model1(&small(CouplingFunction::Zero)).unwrap();
        for (a, f) in ts.z_abs2[0].iter().zip(&ts.field_l2) {
            assert!((a - 0.16).abs() < 1e-14);
            assert_eq!(*f, 0.0);
        }
    }

    #[test]
    fn gauge_rotation_leaves_moduli() {
        let g = CouplingFunction::gaussian(Complex64::new(1.0, 0.3), 1.0);
        let h0 = CouplingFunction::gaussian(Complex64::new(0.05, 0.02), 1.5);
        let mut a = small(g);
        a.h0 = Some(h0.clone());
        let mut b = a.clone();
        let rot = Complex64::from_polar(1.0, 0.9);
        b.z0 *= rot;
        b.h0 = Some(h0.scaled(rot));
        let (ta, tb) = (simulate_model1(&a).unwrap(), simulate_model1(&b).unwrap());
        for (x, y) in ta.z_abs2[0].iter().zip(&tb.z_abs2[0]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_drift_is_second_order() {
        let g = CouplingFunction::gaussian(Complex64::new(1.0, 0.0), 1.0);
        let mut a = small(g);
        a.dt = 0.1;
        let mut b = a.clone();
        b.dt = 0.05;
        let (da, db) = (
            simulate_model1(&a).unwrap().hamiltonian_drift(),
            simulate_model1(&b).unwrap().hamiltonian_drift(),
        );
        assert!(da < 5e-3 && db < da * 0.5, "{da} {db}");
    }

    #[test]
    fn wide_coupling_rejected() {
        let g = CouplingFunction::gaussian(Complex64::new(1.0, 0.0), 8.0);
        assert!(matches!(simulate_model1(&small(g)), Err(FgrError::InvalidConfig(_))));
    }

    #[test]
    fn large_dt_rejected() {
        let mut cfg = small(CouplingFunction::Zero);
        cfg.dt = 0.8;
        assert!(matches!(simulate_model1(&cfg), Err(FgrError::Unstable(_))));
    }

    #[test]
    fn small_box_wraps() {
        let mut cfg = small(CouplingFunction::gaussian(Complex64::new(1.0, 0.0), 1.0));
        cfg.box_len = 16.0;
        cfg.n_grid = 64;
        cfg.t_final = 20.0;
        assert!(matches!(simulate_model1(&cfg), Err(FgrError::BoxWrap { .. })));
    }
}
