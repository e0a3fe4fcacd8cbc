//! Periodic square grid, 2D FFTs and the sampled unitary Fourier transform.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use super::CouplingFunction;

/// Points x_j = -L/2 + j L/n in each direction, row-major (iy * n + ix).
pub struct PeriodicGrid {
    pub n: usize,
    pub box_len: f64,
    pub dx: f64,
    /// signed wavenumber 2 pi k / L for each DFT index
    pub kappa: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl PeriodicGrid {
    pub fn new(box_len: f64, n: usize) -> PeriodicGrid {
        let mut planner = FftPlanner::new();
        let kappa = (0..n)
            .map(|i| {
                let k = if i < n.div_ceil(2) { i as f64 } else { i as f64 - n as f64 };
                2.0 * PI * k / box_len
            })
            .collect();
        PeriodicGrid {
            n,
            box_len,
            dx: box_len / n as f64,
            kappa,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn x(&self, i: usize) -> f64 {
        -0.5 * self.box_len + i as f64 * self.dx
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn sample(&self, g: &CouplingFunction) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.len());
        for iy in 0..self.n {
            for ix in 0..self.n {
                out.push(g.eval(self.x(ix), self.x(iy)));
            }
        }
        out
    }

    /// |kappa|^2 for every DFT index.
    pub fn laplacian_symbol(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for iy in 0..self.n {
            for ix in 0..self.n {
                out.push(self.kappa[ix] * self.kappa[ix] + self.kappa[iy] * self.kappa[iy]);
            }
        }
        out
    }

    /// Index of -k for the DFT index k.
    pub fn neg_index(&self, idx: usize) -> usize {
        let (iy, ix) = (idx / self.n, idx % self.n);
        ((self.n - iy) % self.n) * self.n + (self.n - ix) % self.n
    }

    /// Unnormalized 2D DFT in place; the inverse does not divide by n^2.
    pub fn fft2(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let plan = if inverse { &self.inverse } else { &self.forward };
        for row in data.chunks_mut(n) {
            plan.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for ix in 0..n {
            for iy in 0..n {
                col[iy] = data[iy * n + ix];
            }
            plan.process(&mut col);
            for iy in 0..n {
                data[iy * n + ix] = col[iy];
            }
        }
    }

    pub fn dft(&self, g: &CouplingFunction) -> Vec<Complex64> {
        let mut v = self.sample(g);
        self.fft2(&mut v, false);
        v
    }

    /// Real-space values from DFT coefficients.
    pub fn to_real(&self, spec: &[Complex64]) -> Vec<Complex64> {
        let mut v = spec.to_vec();
        self.fft2(&mut v, true);
        let s = 1.0 / self.len() as f64;
        v.iter_mut().for_each(|z| *z *= s);
        v
    }

    /// Fraction of the field mass in the outer tenth of the box on each side.
    pub fn boundary_fraction(&self, values: &[Complex64]) -> f64 {
        let edge = 0.4 * self.box_len;
        let (mut strip, mut total) = (0.0, 0.0);
        for iy in 0..self.n {
            for ix in 0..self.n {
                let m = values[iy * self.n + ix].norm_sqr();
                total += m;
                if self.x(ix).abs() > edge || self.x(iy).abs() > edge {
                    strip += m;
                }
            }
        }
        if total > 0.0 {
            strip / total
        } else {
            0.0
        }
    }
}

/// Samples of the unitary transform (2 pi)^{-1} int G e^{-i xi.x} dx on the DFT lattice.
pub struct SampledTransform {
    n: usize,
    dk: f64,
    values: Vec<Complex64>,
}

fn keys(t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        1.5 * t * t * t - 2.5 * t * t + 1.0
    } else if t < 2.0 {
        -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0
    } else {
        0.0
    }
}

impl SampledTransform {
    pub fn new(grid: &PeriodicGrid, g: &CouplingFunction) -> SampledTransform {
        let dft = grid.dft(g);
        let scale = grid.dx * grid.dx / (2.0 * PI);
        let n = grid.n;
        // x_0 = -L/2 contributes e^{i kappa L/2} = (-1)^k
        let values = dft
            .iter()
            .enumerate()
            .map(|(idx, v)| {
                let (iy, ix) = (idx / n, idx % n);
                let sign = if (ix + iy) % 2 == 0 { 1.0 } else { -1.0 };
                v * scale * sign
            })
            .collect();
        SampledTransform {
            n,
            dk: 2.0 * PI / grid.box_len,
            values,
        }
    }

    fn lattice(&self, k: i64) -> Option<usize> {
        let half = (self.n / 2) as i64;
        if k < -half || k >= half {
            return None;
        }
        Some(k.rem_euclid(self.n as i64) as usize)
    }

    pub fn peak_norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max)
    }

    /// Bicubic (Keys) interpolation; zero outside the resolved band.
    pub fn at(&self, xi: [f64; 2]) -> Complex64 {
        let (u, v) = (xi[0] / self.dk, xi[1] / self.dk);
        let (i0, j0) = (u.floor() as i64, v.floor() as i64);
        let mut acc = Complex64::new(0.0, 0.0);
        for dj in -1..=2 {
            let wy = keys(v - (j0 + dj) as f64);
            let Some(jy) = self.lattice(j0 + dj) else { continue };
            for di in -1..=2 {
                let wx = keys(u - (i0 + di) as f64);
                let Some(ix) = self.lattice(i0 + di) else { continue };
                acc += self.values[jy * self.n + ix] * (wx * wy);
            }
        }
        acc
    }
}
