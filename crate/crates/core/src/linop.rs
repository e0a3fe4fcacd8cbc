//! Per-harmonic blocks of the linearization and of the Hessian of the action.
//!
//! A perturbation e^{i m theta} (a(r) e^{i k theta} + conj(b(r)) e^{-i k theta}) evolves under
//! i d/dt (a, b) = K_k (a, b) with K_k = Sigma_3 S_k. Matrices live in mass-orthonormal
//! coordinates, where the Euclidean inner product is the r dr weighted one.

use std::io::Write;

use faer::Mat;
use serde::Serialize;

use crate::basis::{GridConfig, SplineBasis};
use crate::error::LinopError;
use crate::linalg::{cholesky_lower, congruence_inverse, symmetrize};
use crate::profiles::RadialProfile;

#[derive(Debug, Clone)]
pub struct HarmonicBlockOperator {
    pub k: i64,
    pub m: i64,
    pub omega: f64,
    /// angular indices of the a and b components: m + k and m - k
    pub ja: i64,
    pub jb: i64,
    pub na: usize,
    pub nb: usize,
    /// dynamics block, equal to Sigma_3 s
    pub k_mat: Mat<f64>,
    /// symmetric Hessian block
    pub s: Mat<f64>,
    /// Galerkin Hessian before the change to orthonormal coordinates
    pub s_galerkin: Mat<f64>,
    /// lower Cholesky factors of the a and b mass matrices
    pub chol_a: Mat<f64>,
    pub chol_b: Mat<f64>,
    pub grid: GridConfig,
    pub edges: EssentialBand,
}

impl HarmonicBlockOperator {
    pub fn dim(&self) -> usize {
        self.na + self.nb
    }

    /// Spline coefficients (full basis) of the a and b components of a real block vector.
    pub fn to_coefficients(&self, basis: &SplineBasis, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let solve = |l: &Mat<f64>, part: &[f64]| {
            let mut x = crate::linalg::col(part);
            l.as_ref()
                .transpose()
                .solve_upper_triangular_in_place(x.as_mut());
            crate::linalg::to_vec(&x)
        };
        let a = solve(&self.chol_a, &y[..self.na]);
        let b = solve(&self.chol_b, &y[self.na..]);
        (
            basis.embed(basis.space(self.ja), &a),
            basis.embed(basis.space(self.jb), &b),
        )
    }

    /// Sigma_3 applied to a vector.
    pub fn sigma3(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .enumerate()
            .map(|(i, v)| if i < self.na { *v } else { -*v })
            .collect()
    }
}

/// Essential spectrum of K: the rays [omega, inf) and (-inf, -omega].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EssentialBand {
    pub upper_edge: f64,
    pub lower_edge: f64,
}

impl EssentialBand {
    pub fn contains(&self, mu: f64) -> bool {
        mu >= self.upper_edge || mu <= self.lower_edge
    }
}

pub fn essential_band(omega: f64) -> EssentialBand {
    EssentialBand {
        upper_edge: omega,
        lower_edge: -omega,
    }
}

/// Coefficient functions of H_j and W at the quadrature nodes.
pub fn block_potentials(profile: &RadialProfile) -> (Vec<f64>, Vec<f64>) {
    let mut diag = Vec::with_capacity(profile.psi.len());
    let mut w = Vec::with_capacity(profile.psi.len());
    for (p, &r) in profile.psi.iter().zip(&profile.r) {
        let s = p * p;
        let ws = profile.model.beta_prime(s) * s;
        diag.push(profile.omega + profile.potential.at(r) + profile.model.beta(s) + ws);
        w.push(ws);
    }
    (diag, w)
}

pub fn assemble_block(profile: &RadialProfile, k: i64) -> Result<HarmonicBlockOperator, LinopError> {
    let basis = profile.basis();
    assemble_block_on(&basis, profile, k)
}

pub fn assemble_block_on(
    basis: &SplineBasis,
    profile: &RadialProfile,
    k: i64,
) -> Result<HarmonicBlockOperator, LinopError> {
    if basis.cfg != profile.grid || basis.grid.n != profile.psi.len() {
        return Err(LinopError::GridMismatch(format!(
            "profile has {} nodes on {:?}, basis has {} on {:?}",
            profile.psi.len(),
            profile.grid,
            basis.grid.n,
            basis.cfg
        )));
    }
    let m = profile.m;
    let (ja, jb) = (m + k, m - k);
    let (diag, w) = block_potentials(profile);
    let ha = basis.stiffness(ja) + basis.potential(ja, ja, &diag);
    let hb = basis.stiffness(jb) + basis.potential(jb, jb, &diag);
    let wab = basis.potential(ja, jb, &w);
    let (na, nb) = (ha.nrows(), hb.nrows());
    let n = na + nb;
    let mut s_gal = Mat::<f64>::zeros(n, n);
    for i in 0..na {
        for j in 0..na {
            s_gal[(i, j)] = ha[(i, j)];
        }
        for j in 0..nb {
            s_gal[(i, na + j)] = wab[(i, j)];
            s_gal[(na + j, i)] = wab[(i, j)];
        }
    }
    for i in 0..nb {
        for j in 0..nb {
            s_gal[(na + i, na + j)] = hb[(i, j)];
        }
    }
    let chol_a = cholesky_lower(&basis.mass(ja));
    let chol_b = cholesky_lower(&basis.mass(jb));
    let mut l = Mat::<f64>::zeros(n, n);
    for i in 0..na {
        for j in 0..=i {
            l[(i, j)] = chol_a[(i, j)];
        }
    }
    for i in 0..nb {
        for j in 0..=i {
            l[(na + i, na + j)] = chol_b[(i, j)];
        }
    }
    let mut s = congruence_inverse(&l, &s_gal);
    symmetrize(&mut s);
    let k_mat = Mat::from_fn(n, n, |i, j| if i < na { s[(i, j)] } else { -s[(i, j)] });
    Ok(HarmonicBlockOperator {
        k,
        m,
        omega: profile.omega,
        ja,
        jb,
        na,
        nb,
        k_mat,
        s,
        s_galerkin: s_gal,
        chol_a,
        chol_b,
        grid: profile.grid,
        edges: essential_band(profile.omega),
    })
}

#[derive(Debug, Clone, Serialize)]
struct DumpHeader {
    k: i64,
    n: usize,
    omega: f64,
}

/// Debug dump: one JSON header line, then K and S as row-major little-endian f64.
pub fn write_block_dump<W: Write>(block: &HarmonicBlockOperator, mut out: W) -> std::io::Result<()> {
    let header = DumpHeader {
        k: block.k,
        n: block.dim(),
        omega: block.omega,
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for mat in [&block.k_mat, &block.s] {
        for i in 0..mat.nrows() {
            for j in 0..mat.ncols() {
                out.write_all(&mat[(i, j)].to_le_bytes())?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{solve_profile, NonlinearityModel, RadialPotential, SolverConfig};

    fn small_profile() -> RadialProfile {
        let grid = GridConfig {
            r_max: 30.0,
            elements: 90,
            ..Default::default()
        };
        solve_profile(
            &NonlinearityModel::cubic_quintic(),
            &RadialPotential::none(),
            0.15,
            1,
            grid,
            None,
            &SolverConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn hessian_block_is_symmetric_and_k_is_sigma3_s() {
        let p = small_profile();
        for k in [0, 1, 3] {
            let b = assemble_block(&p, k).unwrap();
            let n = b.dim();
            for i in 0..n {
                for j in 0..n {
                    assert!((b.s[(i, j)] - b.s[(j, i)]).abs() < 1e-12);
                    let sign = if i < b.na { 1.0 } else { -1.0 };
                    assert_eq!(b.k_mat[(i, j)], sign * b.s[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn dump_has_header_and_payload() {
        let p = small_profile();
        let b = assemble_block(&p, 2).unwrap();
        let mut buf = Vec::new();
        write_block_dump(&b, &mut buf).unwrap();
        let nl = buf.iter().position(|&c| c == b'\n').unwrap();
        let header: serde_json::Value = serde_json::from_slice(&buf[..nl]).unwrap();
        assert_eq!(header["k"], 2);
        assert_eq!(header["n"], b.dim());
        assert_eq!(buf.len() - nl - 1, 2 * 8 * b.dim() * b.dim());
        let first = f64::from_le_bytes(buf[nl + 1..nl + 9].try_into().unwrap());
        assert_eq!(first, b.k_mat[(0, 0)]);
    }

    #[test]
    fn band_edges() {
        let e = essential_band(0.15);
        assert_eq!((e.upper_edge, e.lower_edge), (0.15, -0.15));
        assert!(e.contains(0.2) && e.contains(-0.15) && !e.contains(0.1));
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let p = small_profile();
        let other = SplineBasis::new(GridConfig {
            r_max: 30.0,
            elements: 40,
            ..Default::default()
        });
        assert!(matches!(
            assemble_block_on(&other, &p, 0),
            Err(LinopError::GridMismatch(_))
        ));
    }
}
