//! Fixed-mass perturbation along a discrete mode and the sign of the energy change.

use std::f64::consts::PI;

use serde::Serialize;

use super::{CatalogEntry, SpectrumReport};
use crate::basis::SplineBasis;
use crate::error::SpectraError;
use crate::linop::{assemble_block_on, HarmonicBlockOperator};
use crate::profiles::RadialProfile;

pub const ALPHA_EPSILONS: [f64; 3] = [1e-2, 1e-3, 1e-4];
pub const ENERGY_EPSILONS: [f64; 4] = [4e-2, 2e-2, 1e-2, 5e-3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NotTrapped,
    Trapped,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergySample {
    pub epsilon: f64,
    pub delta_e: f64,
    pub ratio: f64,
    pub mass_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrappingResult {
    pub j: usize,
    pub lambda: f64,
    pub s: i8,
    /// Hessian of the action evaluated on the real field of the mode
    pub form_value: f64,
    /// -2 lambda s
    pub expected: f64,
    pub form_rel_error: f64,
    pub alphas: Vec<(f64, f64)>,
    pub alpha_exponent: f64,
    /// largest relative mass violation of the constructed states
    pub mass_error: f64,
    pub energy: Vec<EnergySample>,
    /// extrapolated limit of Delta E / eps^2
    pub energy_limit: f64,
    pub energy_decreases: bool,
    pub verdict: Verdict,
}

/// Least-squares fit y = c x^p on a log-log scale; returns (p, c).
pub fn power_law_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let p = sxy / sxx;
    (p, (my - p * mx).exp())
}

/// Radial data of w = e^{i m theta}(a e^{i k theta} + b e^{-i k theta}) at the quadrature nodes.
struct ModeField {
    k: i64,
    a: Vec<f64>,
    da: Vec<f64>,
    b: Vec<f64>,
    db: Vec<f64>,
}

fn mode_field(basis: &SplineBasis, block: &HarmonicBlockOperator, v: &[f64]) -> ModeField {
    let (ca, cb) = block.to_coefficients(basis, v);
    ModeField {
        k: block.k,
        a: basis.at_nodes(&ca),
        da: basis.deriv_at_nodes(&ca),
        b: basis.at_nodes(&cb),
        db: basis.deriv_at_nodes(&cb),
    }
}

/// <S''(phi) w, w> with the angular integral done analytically.
fn field_form(basis: &SplineBasis, profile: &RadialProfile, f: &ModeField) -> f64 {
    let g = &basis.grid;
    let (m, k) = (profile.m as f64, f.k as f64);
    let mut acc = 0.0;
    for i in 0..g.n {
        let r = g.r[i];
        let s = profile.psi[i] * profile.psi[i];
        let pot = profile.omega + profile.potential.at(r) + profile.model.beta(s);
        let cross = 2.0 * profile.model.beta_prime(s) * s;
        let val = if f.k == 0 {
            let p = f.a[i] + f.b[i];
            let dp = f.da[i] + f.db[i];
            dp * dp + (m * m / (r * r) + pot + cross) * p * p
        } else {
            let (ja, jb) = (m + k, m - k);
            let pa = f.da[i] * f.da[i] + (ja * ja / (r * r) + pot) * f.a[i] * f.a[i];
            let pb = f.db[i] * f.db[i] + (jb * jb / (r * r) + pot) * f.b[i] * f.b[i];
            pa + pb + 0.5 * cross * (f.a[i] + f.b[i]).powi(2)
        };
        acc += g.quad_weights[i] * val;
    }
    2.0 * PI * acc
}

/// alpha solving Q((1 - alpha) phi + eps w) = Q(phi), from the radial integrals of the mass.
fn matching_alpha(basis: &SplineBasis, profile: &RadialProfile, f: &ModeField, eps: f64) -> f64 {
    let g = &basis.grid;
    let same = if f.k == 0 { 1.0 } else { 0.0 };
    let (mut a2, mut lin, mut quad) = (0.0, 0.0, 0.0);
    for i in 0..g.n {
        let w = g.quad_weights[i];
        let p = profile.psi[i];
        a2 += w * p * p;
        lin += w * 2.0 * same * p * (f.a[i] + f.b[i]);
        quad += w * (f.a[i] * f.a[i] + f.b[i] * f.b[i] + 2.0 * same * f.a[i] * f.b[i]);
    }
    // a2 (1 - alpha)^2 + lin eps (1 - alpha) + quad eps^2 = a2, smaller root in stable form
    let bq = 2.0 * a2 + lin * eps;
    let c = lin * eps + quad * eps * eps;
    let disc = (bq * bq - 4.0 * a2 * c).max(0.0);
    2.0 * c / (bq + disc.sqrt())
}

/// Mass and energy of (1 - alpha) phi + eps w by direct quadrature on an (r, theta) grid.
fn direct_functionals(basis: &SplineBasis, profile: &RadialProfile, f: &ModeField, alpha: f64, eps: f64) -> (f64, f64) {
    let g = &basis.grid;
    let psi = &profile.psi;
    let dpsi = basis.deriv_at_nodes(&profile.coeffs);
    let m = profile.m as f64;
    let k = f.k as f64;
    let n_theta = 16 * (f.k.unsigned_abs() as usize + 1);
    let dth = 2.0 * PI / n_theta as f64;
    let trig: Vec<(f64, f64)> = (0..n_theta)
        .map(|l| {
            let t = k * dth * l as f64;
            (t.cos(), t.sin())
        })
        .collect();
    let x = 1.0 - alpha;
    let (mut q, mut e) = (0.0, 0.0);
    for i in 0..g.n {
        let r = g.r[i];
        let v = profile.potential.at(r);
        let (mut qi, mut ei) = (0.0, 0.0);
        for &(c, s) in &trig {
            // U = x psi + eps (a e^{ik th} + b e^{-ik th}) after removing e^{i m th}
            let ure = x * psi[i] + eps * (f.a[i] + f.b[i]) * c;
            let uim = eps * (f.a[i] - f.b[i]) * s;
            let rre = x * dpsi[i] + eps * (f.da[i] + f.db[i]) * c;
            let rim = eps * (f.da[i] - f.db[i]) * s;
            let tre = x * m * psi[i] + eps * ((m + k) * f.a[i] + (m - k) * f.b[i]) * c;
            let tim = eps * ((m + k) * f.a[i] - (m - k) * f.b[i]) * s;
            let u2 = ure * ure + uim * uim;
            qi += u2;
            ei += rre * rre + rim * rim + (tre * tre + tim * tim) / (r * r) + v * u2 + profile.model.big_b(u2);
        }
        q += g.quad_weights[i] * qi;
        e += g.quad_weights[i] * ei;
    }
    (0.5 * dth * q, 0.5 * dth * e)
}

/// Builds the fixed-mass curve along catalog entry `j` (any signature) and evaluates the energy change.
pub fn trapping_construction(profile: &RadialProfile, entry: &CatalogEntry, j: usize) -> Result<TrappingResult, SpectraError> {
    let basis = profile.basis();
    let block = assemble_block_on(&basis, profile, entry.k.abs())?;
    let field = mode_field(&basis, &block, &entry.vec);
    let form_value = field_form(&basis, profile, &field);
    let expected = -2.0 * entry.lambda * entry.s as f64;
    let alphas: Vec<(f64, f64)> = ALPHA_EPSILONS
        .iter()
        .map(|&e| (e, matching_alpha(&basis, profile, &field, e)))
        .collect();
    let xs: Vec<f64> = alphas.iter().map(|a| a.0).collect();
    let ys: Vec<f64> = alphas.iter().map(|a| a.1).collect();
    let (alpha_exponent, _) = power_law_fit(&xs, &ys);
    let (q0, e0) = direct_functionals(&basis, profile, &field, 0.0, 0.0);
    let mut mass_error: f64 = 0.0;
    let mut energy = Vec::new();
    for &(e, a) in &alphas {
        let (q, _) = direct_functionals(&basis, profile, &field, a, e);
        mass_error = mass_error.max(((q - q0) / q0).abs());
    }
    for &e in &ENERGY_EPSILONS {
        let a = matching_alpha(&basis, profile, &field, e);
        let (q, en) = direct_functionals(&basis, profile, &field, a, e);
        let me = ((q - q0) / q0).abs();
        mass_error = mass_error.max(me);
        energy.push(EnergySample {
            epsilon: e,
            delta_e: en - e0,
            ratio: (en - e0) / (e * e),
            mass_error: me,
        });
    }
    // ratio = L + c eps + O(eps^2); eliminate the linear term with the two smallest eps
    let n = energy.len();
    let (e1, r1) = (energy[n - 2].epsilon, energy[n - 2].ratio);
    let (e2, r2) = (energy[n - 1].epsilon, energy[n - 1].ratio);
    let energy_limit = (r2 * e1 - r1 * e2) / (e1 - e2);
    Ok(TrappingResult {
        j,
        lambda: entry.lambda,
        s: entry.s,
        form_value,
        expected,
        form_rel_error: ((form_value - expected) / expected).abs(),
        alphas,
        alpha_exponent,
        mass_error,
        energy_decreases: energy.iter().all(|s| s.delta_e < 0.0),
        energy,
        energy_limit,
        verdict: if form_value < 0.0 {
            Verdict::NotTrapped
        } else {
            Verdict::Trapped
        },
    })
}

/// Trapping test along a negative-energy (s = +1) catalog entry.
pub fn trapping_test(profile: &RadialProfile, report: &SpectrumReport, j: usize) -> Result<TrappingResult, SpectraError> {
    let entry = &report.catalog[j];
    if entry.s != 1 {
        return Err(SpectraError::SignatureMismatch { j, s: entry.s });
    }
    trapping_construction(profile, entry, j)
}
