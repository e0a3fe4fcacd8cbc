//! Browser bindings: existence window, vortex profile and golden-rule decay curve.

use num_complex::Complex64;
use wasm_bindgen::prelude::*;

use vortex_spectra::basis::GridConfig;
use vortex_spectra::fgr::{fgr_constant, predicted_decay, CouplingFunction, QuadratureConfig, TransformMethod};
use vortex_spectra::profiles::{self, NonlinearityModel, RadialPotential, SolverConfig};

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Upper end of the frequency window for beta(s) = sum_k coeffs[k] s^(k+1); infinite when unbounded.
#[wasm_bindgen]
pub fn existence_window(coeffs: &[f64]) -> Result<f64, JsError> {
    let model = NonlinearityModel::custom(coeffs.to_vec());
    profiles::existence_window(&model, profiles::WINDOW_S_MAX)
        .map(|w| w.omega_star)
        .map_err(js_err)
}

#[wasm_bindgen]
pub struct Profile {
    r: Vec<f64>,
    psi: Vec<f64>,
    mass: f64,
    energy: f64,
    residual: f64,
}

#[wasm_bindgen]
impl Profile {
    #[wasm_bindgen(getter)]
    pub fn r(&self) -> Vec<f64> {
        self.r.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn psi(&self) -> Vec<f64> {
        self.psi.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn mass(&self) -> f64 {
        self.mass
    }

    #[wasm_bindgen(getter)]
    pub fn energy(&self) -> f64 {
        self.energy
    }

    #[wasm_bindgen(getter)]
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

/// Cubic-quintic vortex of winding m on a coarse grid, sampled at `points` radii.
#[wasm_bindgen]
pub fn solve_profile(omega: f64, m: i32, r_max: f64, points: usize) -> Result<Profile, JsError> {
    let grid = GridConfig {
        r_max,
        elements: 80,
        ..Default::default()
    };
    let p = profiles::solve_profile(
        &NonlinearityModel::cubic_quintic(),
        &RadialPotential::none(),
        omega,
        m as i64,
        grid,
        None,
        &SolverConfig::default(),
    )
    .map_err(js_err)?;
    let basis = p.basis();
    let n = points.max(2);
    let r: Vec<f64> = (0..n).map(|i| r_max * i as f64 / (n - 1) as f64).collect();
    let psi = r.iter().map(|&x| p.value_at(&basis, x)).collect();
    Ok(Profile {
        r,
        psi,
        mass: p.q,
        energy: p.energy,
        residual: p.residual_norm,
    })
}

#[wasm_bindgen]
pub struct Decay {
    constant: f64,
    t: Vec<f64>,
    z_abs2: Vec<f64>,
}

#[wasm_bindgen]
impl Decay {
    #[wasm_bindgen(getter)]
    pub fn constant(&self) -> f64 {
        self.constant
    }

    #[wasm_bindgen(getter)]
    pub fn t(&self) -> Vec<f64> {
        self.t.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn z_abs2(&self) -> Vec<f64> {
        self.z_abs2.clone()
    }
}

/// Golden-rule constant of amplitude * exp(-|x|^2 / (2 width^2)) and the decay law it predicts.
#[wasm_bindgen]
pub fn decay_curve(amplitude: f64, width: f64, z0: f64, t_final: f64, points: usize) -> Result<Decay, JsError> {
    let g = CouplingFunction::gaussian(Complex64::new(amplitude, 0.0), width);
    let cfg = QuadratureConfig {
        method: TransformMethod::ClosedForm,
        ..Default::default()
    };
    let c = fgr_constant(&g, &cfg).map_err(js_err)?;
    let n = points.max(2);
    let t: Vec<f64> = (0..n).map(|i| t_final * i as f64 / (n - 1) as f64).collect();
    let z = Complex64::new(z0, 0.0);
    let z_abs2 = t.iter().map(|&s| predicted_decay(c, z, s)).collect();
    Ok(Decay { constant: c, t, z_abs2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_starts_at_initial_mass() {
        let d = decay_curve(1.0, 1.0, 0.5, 10.0, 5).unwrap();
        assert!((d.constant - std::f64::consts::PI / std::f64::consts::E).abs() < 1e-12);
        assert_eq!(d.z_abs2[0], 0.25);
        assert!(d.z_abs2.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn cubic_quintic_window() {
        assert!((existence_window(&[-1.0, 1.0]).unwrap() - 0.1875).abs() < 1e-6);
    }

    #[test]
    fn profile_vanishes_at_origin_and_far_field() {
        let p = solve_profile(0.15, 1, 40.0, 41).unwrap();
        assert_eq!(p.psi[0], 0.0);
        assert!(p.psi[40].abs() < 1e-6);
        assert!(p.mass > 0.0);
    }
}
