//! Fate of the translation modes of harmonic 1 when a small potential breaks the symmetry.

use num_complex::Complex64;
use serde::Serialize;

use super::{block_spectrum, SpectrumConfig};
use super::trapping::power_law_fit;
use crate::basis::{GridConfig, SplineBasis};
use crate::error::SpectraError;
use crate::profiles::{continue_in_epsilon, NonlinearityModel, RadialPotential, SolverConfig};

/// Two eigenvalues of harmonic 1 count as one double eigenvalue when their moduli agree this well.
pub const MULTIPLICITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct TranslationSplit {
    pub epsilon: f64,
    /// the accepted harmonic-1 eigenvalues of smallest modulus
    pub mu: Vec<Complex64>,
    pub abs_mu: f64,
    pub multiplicity: usize,
    /// geometric and algebraic dimension of the kernel of harmonic 0
    pub kernel_k0: (usize, usize),
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbationScaling {
    pub members: Vec<TranslationSplit>,
    /// fitted |mu| = prefactor * eps^exponent
    pub exponent: f64,
    pub prefactor: f64,
    /// curvature e of the unit-strength potential at the origin
    pub hessian_eigenvalue: f64,
    /// eps sqrt(2 e) at every member, for comparison with the linear law
    pub linear_law: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn perturbation_scaling(
    model: &NonlinearityModel,
    shape: &RadialPotential,
    omega: f64,
    m: i64,
    epsilons: &[f64],
    grid: GridConfig,
    solver: &SolverConfig,
    spectrum: &SpectrumConfig,
) -> Result<PerturbationScaling, SpectraError> {
    let mut eps_list = vec![0.0];
    eps_list.extend_from_slice(epsilons);
    let family = continue_in_epsilon(model, shape, omega, m, &eps_list, grid, solver)?;
    let basis = SplineBasis::new(grid);
    let mut members = Vec::new();
    for member in family.iter().skip(1) {
        let p = &member.profile;
        let (_, k1) = block_spectrum(&basis, p, 1, spectrum)?;
        let (_, k0) = block_spectrum(&basis, p, 0, spectrum)?;
        let mut small: Vec<Complex64> = k1.pairs.iter().map(|q| q.mu).collect();
        small.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        let abs_mu = small.first().map_or(0.0, |z| z.norm());
        let close: Vec<Complex64> = small
            .iter()
            .copied()
            .filter(|z| (z.norm() - abs_mu).abs() < MULTIPLICITY_TOL)
            .collect();
        members.push(TranslationSplit {
            epsilon: p.epsilon(),
            multiplicity: close.len(),
            mu: close,
            abs_mu,
            kernel_k0: (k0.kernel.geo, k0.kernel.alg),
        });
    }
    let xs: Vec<f64> = members.iter().map(|t| t.epsilon).collect();
    let ys: Vec<f64> = members.iter().map(|t| t.abs_mu).collect();
    let (exponent, prefactor) = power_law_fit(&xs, &ys);
    let e = shape.hessian_eigenvalue();
    Ok(PerturbationScaling {
        linear_law: xs.iter().map(|x| x * (2.0 * e).sqrt()).collect(),
        members,
        exponent,
        prefactor,
        hessian_eigenvalue: e,
    })
}
