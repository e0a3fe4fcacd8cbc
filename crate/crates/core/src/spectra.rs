//! Discrete spectrum, Krein signatures, critical frequency, trapping test and index identity.

use std::f64::consts::PI;

use faer::{Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::SplineBasis;
use crate::error::SpectraError;
use crate::linalg::{congruence_inverse, dot, matvec};
use crate::linop::{assemble_block_on, HarmonicBlockOperator};
use crate::profiles::RadialProfile;

pub mod critical;
pub mod index;
pub mod ledger;
pub mod perturbation;
pub mod trapping;

pub use critical::{detect_omega_cr, CriticalFrequency, OmegaCrConfig};
pub use index::{check_h12, h12_bound, negative_index, H12Check, IndexIdentity};
pub use ledger::{hypothesis_ledger, ledger_csv, ledger_row, StabilityLedger};
pub use perturbation::{perturbation_scaling, PerturbationScaling, TranslationSplit};
pub use trapping::{trapping_construction, trapping_test, TrappingResult, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub k_max: i64,
    pub residual_tol: f64,
    pub localization_tol: f64,
    /// eigenvalues with |mu| below this belong to the generalized kernel
    pub zero_tol: f64,
    pub instability_tol: f64,
    pub signature_tol: f64,
    /// eigenvalues farther than this from the origin are not examined
    pub max_abs_mu: f64,
    pub rank_tol: f64,
    /// eigenvalues closer than this form one cluster in the Jordan test
    pub cluster_tol: f64,
    /// relative tolerance for integer relations among the catalog frequencies
    pub resonance_tol: f64,
    pub h12_node_cap: u64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            k_max: 8,
            residual_tol: 1e-8,
            localization_tol: 0.05,
            zero_tol: 1e-4,
            instability_tol: 1e-5,
            signature_tol: 1e-10,
            max_abs_mu: 1.0,
            rank_tol: 1e-7,
            cluster_tol: 1e-6,
            resonance_tol: 1e-9,
            h12_node_cap: index::H12_NODE_CAP,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenPair {
    pub mu: Complex64,
    pub k: i64,
    #[serde(skip)]
    pub vec: Vec<Complex64>,
    pub residual: f64,
    pub localization: f64,
    pub s: Option<i8>,
    pub embedded_candidate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelInfo {
    pub k: i64,
    pub geo: usize,
    pub alg: usize,
}

#[derive(Debug, Clone)]
pub struct BlockSpectrum {
    pub k: i64,
    pub pairs: Vec<EigenPair>,
    pub kernel: KernelInfo,
    /// every nonzero eigenvalue cluster is semisimple
    pub semisimple: bool,
}

fn cnorm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Real quadratic form v^H A v for symmetric real A.
fn hermitian_form(a: &Mat<f64>, v: &[Complex64]) -> f64 {
    let re: Vec<f64> = v.iter().map(|z| z.re).collect();
    let im: Vec<f64> = v.iter().map(|z| z.im).collect();
    dot(&re, &matvec(a, &re)) + dot(&im, &matvec(a, &im))
}

/// Mass of r > 0.8 r_max in block coordinates.
fn tail_matrix(basis: &SplineBasis, block: &HarmonicBlockOperator) -> Mat<f64> {
    let cut = 0.8 * basis.cfg.r_max;
    let ind: Vec<f64> = basis.grid.r.iter().map(|&r| if r > cut { 1.0 } else { 0.0 }).collect();
    let ta = congruence_inverse(&block.chol_a, &basis.potential(block.ja, block.ja, &ind));
    let tb = congruence_inverse(&block.chol_b, &basis.potential(block.jb, block.jb, &ind));
    let n = block.dim();
    let mut t = Mat::<f64>::zeros(n, n);
    for i in 0..block.na {
        for j in 0..block.na {
            t[(i, j)] = ta[(i, j)];
        }
    }
    for i in 0..block.nb {
        for j in 0..block.nb {
            t[(block.na + i, block.na + j)] = tb[(i, j)];
        }
    }
    t
}

fn eigen_decomposition(block: &HarmonicBlockOperator) -> Result<(Vec<Complex64>, Mat<Complex64>), SpectraError> {
    let e = block.k_mat.eigen().map_err(|_| SpectraError::EigensolverFailure {
        k: block.k,
        n: block.dim(),
    })?;
    let vals: Vec<Complex64> = (0..block.dim()).map(|i| e.S().column_vector()[i]).collect();
    Ok((vals, e.U().to_owned()))
}

/// Orthonormal basis (columns) of the right singular vectors of A with the d smallest singular values.
fn smallest_right_singular(a: &Mat<f64>, d: usize) -> Mat<f64> {
    let svd = a.svd().expect("svd converges");
    let v = svd.V();
    let n = a.ncols();
    Mat::from_fn(n, d, |i, j| v[(i, n - d + j)])
}

fn singular_values(a: &Mat<f64>) -> Vec<f64> {
    a.singular_values().expect("svd converges")
}

/// Geometric and algebraic multiplicity of the eigenvalue 0 from rank tests on K restricted to its near-kernel.
fn kernel_structure(block: &HarmonicBlockOperator, vals: &[Complex64], cfg: &SpectrumConfig) -> KernelInfo {
    let alg = vals.iter().filter(|z| z.norm() < cfg.zero_tol).count();
    if alg == 0 {
        return KernelInfo { k: block.k, geo: 0, alg: 0 };
    }
    let mut power = block.k_mat.clone();
    for _ in 1..alg {
        power = &power * &block.k_mat;
    }
    let q = smallest_right_singular(&power, alg);
    let r = q.transpose() * &block.k_mat * &q;
    let scale = 1.0;
    let rank = singular_values(&r).iter().filter(|&&s| s > cfg.rank_tol * scale).count();
    KernelInfo {
        k: block.k,
        geo: alg - rank,
        alg,
    }
}

/// Checks R - mu I = 0 on the invariant subspace of every nonzero eigenvalue cluster.
fn clusters_semisimple(block: &HarmonicBlockOperator, vals: &[Complex64], vecs: &Mat<Complex64>, cfg: &SpectrumConfig) -> bool {
    let idx: Vec<usize> = (0..vals.len())
        .filter(|&i| vals[i].norm() >= cfg.zero_tol && vals[i].norm() < cfg.max_abs_mu)
        .collect();
    let mut used = vec![false; vals.len()];
    for &i in &idx {
        if used[i] {
            continue;
        }
        let members: Vec<usize> = idx
            .iter()
            .copied()
            .filter(|&j| !used[j] && (vals[j] - vals[i]).norm() < cfg.cluster_tol)
            .collect();
        for &j in &members {
            used[j] = true;
        }
        if members.len() < 2 {
            continue;
        }
        // a defective cluster has nearly parallel eigenvectors
        let d = members.len();
        let n = block.dim();
        let g = Mat::<Complex64>::from_fn(d, d, |a, b| {
            (0..n).map(|t| vecs[(t, members[a])].conj() * vecs[(t, members[b])]).sum()
        });
        let herm = Mat::<Complex64>::from_fn(d, d, |a, b| 0.5 * (g[(a, b)] + g[(b, a)].conj()));
        let ev = herm
            .self_adjoint_eigenvalues(Side::Lower)
            .expect("hermitian eigensolver converges");
        if ev.iter().cloned().fold(f64::INFINITY, f64::min) < cfg.rank_tol.sqrt() {
            return false;
        }
    }
    true
}

/// Dense eigensolve of one block with residual and localization filtering.
pub fn point_spectrum(
    basis: &SplineBasis,
    block: &HarmonicBlockOperator,
    cfg: &SpectrumConfig,
) -> Result<BlockSpectrum, SpectraError> {
    let (vals, vecs) = eigen_decomposition(block)?;
    let kernel = kernel_structure(block, &vals, cfg);
    let semisimple = clusters_semisimple(block, &vals, &vecs, cfg);
    let tail = tail_matrix(basis, block);
    let n = block.dim();
    let mut pairs = Vec::new();
    for (i, &mu) in vals.iter().enumerate() {
        if mu.norm() < cfg.zero_tol || mu.norm() > cfg.max_abs_mu {
            continue;
        }
        let v: Vec<Complex64> = (0..n).map(|t| vecs[(t, i)]).collect();
        let norm = cnorm(&v);
        let re: Vec<f64> = v.iter().map(|z| z.re).collect();
        let im: Vec<f64> = v.iter().map(|z| z.im).collect();
        let kr = matvec(&block.k_mat, &re);
        let ki = matvec(&block.k_mat, &im);
        let res: f64 = (0..n)
            .map(|t| (Complex64::new(kr[t], ki[t]) - mu * v[t]).norm_sqr())
            .sum::<f64>()
            .sqrt()
            / norm;
        let loc = hermitian_form(&tail, &v) / (norm * norm);
        if res > cfg.residual_tol || loc > cfg.localization_tol {
            continue;
        }
        let mut pair = EigenPair {
            mu,
            k: block.k,
            vec: v,
            residual: res,
            localization: loc,
            s: None,
            embedded_candidate: block.edges.contains(mu.re) && mu.im.abs() <= cfg.instability_tol,
        };
        pair.s = krein_signature(block, &pair, cfg).ok();
        pairs.push(pair);
    }
    pairs.sort_by(|a, b| a.mu.re.total_cmp(&b.mu.re).then(a.mu.im.total_cmp(&b.mu.im)));
    Ok(BlockSpectrum {
        k: block.k,
        pairs,
        kernel,
        semisimple,
    })
}

/// Energy form q_S = <S v, v> in the r dr weighted inner product.
pub fn energy_form(block: &HarmonicBlockOperator, v: &[Complex64]) -> f64 {
    hermitian_form(&block.s, v)
}

/// s = +1 iff q_S sign(mu) < 0, defined for real nonzero mu.
pub fn krein_signature(block: &HarmonicBlockOperator, pair: &EigenPair, cfg: &SpectrumConfig) -> Result<i8, SpectraError> {
    let q_s = energy_form(block, &pair.vec);
    let norm2 = pair.vec.iter().map(|z| z.norm_sqr()).sum::<f64>();
    if pair.mu.im.abs() > cfg.instability_tol || pair.mu.re == 0.0 || q_s.abs() < cfg.signature_tol * norm2 {
        return Err(SpectraError::UndefinedSignature { q_s });
    }
    Ok(if q_s * pair.mu.re.signum() < 0.0 { 1 } else { -1 })
}

/// Real eigenvector with the largest component of a real-positive, scaled so pi <Sigma_3 v, v> = -s.
pub fn normalized_mode(block: &HarmonicBlockOperator, pair: &EigenPair, s: i8) -> Vec<f64> {
    let (imax, _) = pair.vec[..block.na]
        .iter()
        .enumerate()
        .fold((0, -1.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
    let phase = pair.vec[imax].conj() / pair.vec[imax].norm();
    let mut v: Vec<f64> = pair.vec.iter().map(|z| (z * phase).re).collect();
    let sig = dot(&block.sigma3(&v), &v);
    let target = -(s as f64) / PI;
    let scale = (target / sig).abs().sqrt();
    for x in v.iter_mut() {
        *x *= scale;
    }
    v
}

/// Entry lambda_j of the positive catalog of discrete eigenvalues.
#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub lambda: f64,
    pub s: i8,
    pub n_j: u64,
    /// harmonic of the block whose eigenvalue is +lambda (negative when folded from -k)
    pub k: i64,
    /// normalized real eigenvector of K_|k| for the eigenvalue sign(k) lambda
    #[serde(skip)]
    pub vec: Vec<f64>,
    pub mu: f64,
}

/// N_j = inf{n : n lambda_j >= omega} - 1.
pub fn n_j(lambda: f64, omega: f64) -> u64 {
    let ratio = omega / lambda;
    let mut n = ratio.ceil();
    if (n - 1.0) * lambda >= omega {
        n -= 1.0;
    }
    (n.max(1.0) as u64) - 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    #[serde(rename = "N_unstable")]
    pub n_unstable: usize,
    #[serde(rename = "N_discrete_stable")]
    pub n_discrete_stable: usize,
    #[serde(rename = "N_negative_signature")]
    pub n_negative_signature: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub omega: f64,
    pub m: i64,
    pub epsilon: f64,
    pub pairs: Vec<EigenPair>,
    pub kernel: Vec<KernelInfo>,
    pub counts: Counts,
    pub spectrally_stable: bool,
    pub catalog: Vec<CatalogEntry>,
    pub h8_ok: bool,
    pub unstable_harmonics: Vec<i64>,
}

impl SpectrumReport {
    pub fn embedded_candidates(&self) -> Vec<&EigenPair> {
        self.pairs.iter().filter(|p| p.embedded_candidate).collect()
    }

    /// Generalized kernel totals over all harmonics, k > 0 counted for +k and -k.
    pub fn kernel_totals(&self) -> (usize, usize) {
        self.kernel.iter().fold((0, 0), |(g, a), ki| {
            let w = if ki.k == 0 { 1 } else { 2 };
            (g + w * ki.geo, a + w * ki.alg)
        })
    }

    pub fn json(&self) -> serde_json::Value {
        let pairs: Vec<serde_json::Value> = self
            .pairs
            .iter()
            .map(|p| {
                serde_json::json!({
                    "re": p.mu.re,
                    "im": p.mu.im,
                    "k": p.k,
                    "s": p.s,
                    "residual": p.residual,
                    "localization": p.localization,
                    "embedded_candidate": p.embedded_candidate,
                })
            })
            .collect();
        serde_json::json!({
            "omega": self.omega,
            "m": self.m,
            "epsilon": self.epsilon,
            "pairs": pairs,
            "kernel": self.kernel,
            "counts": self.counts,
            "spectrally_stable": self.spectrally_stable,
        })
    }
}

/// Spectrum of one harmonic for a profile.
pub fn block_spectrum(
    basis: &SplineBasis,
    profile: &RadialProfile,
    k: i64,
    cfg: &SpectrumConfig,
) -> Result<(HarmonicBlockOperator, BlockSpectrum), SpectraError> {
    let block = assemble_block_on(basis, profile, k)?;
    let spec = point_spectrum(basis, &block, cfg)?;
    Ok((block, spec))
}

pub fn full_spectrum(profile: &RadialProfile, cfg: &SpectrumConfig) -> Result<SpectrumReport, SpectraError> {
    let basis = profile.basis();
    let ks: Vec<i64> = (0..=cfg.k_max).collect();
    let blocks = ks
        .iter()
        .map(|&k| block_spectrum(&basis, profile, k, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(assemble_report(profile, blocks, cfg))
}

fn is_unstable(p: &EigenPair, cfg: &SpectrumConfig) -> bool {
    p.mu.im.abs() > cfg.instability_tol
}

/// Aggregates per-harmonic spectra into the catalog and counts.
pub fn assemble_report(
    profile: &RadialProfile,
    blocks: Vec<(HarmonicBlockOperator, BlockSpectrum)>,
    cfg: &SpectrumConfig,
) -> SpectrumReport {
    let mut pairs = Vec::new();
    let mut kernel = Vec::new();
    let mut catalog = Vec::new();
    let mut n_unstable = 0;
    let mut h8_ok = true;
    let mut unstable_harmonics = Vec::new();
    for (block, spec) in &blocks {
        kernel.push(spec.kernel);
        h8_ok &= spec.semisimple;
        let mut unstable_here = false;
        for p in &spec.pairs {
            if is_unstable(p, cfg) {
                unstable_here = true;
                if p.mu.im > 0.0 && (block.k > 0 || p.mu.re >= -1e-12) {
                    n_unstable += 1;
                }
                continue;
            }
            if p.embedded_candidate {
                continue;
            }
            let fold = block.k == 0 && p.mu.re < 0.0;
            if fold {
                continue;
            }
            if let Some(s_pair) = p.s {
                // the -mu eigenvalue of K_k is the +|mu| eigenvalue of K_{-k}
                let s = if p.mu.re > 0.0 { s_pair } else { -s_pair };
                let lambda = p.mu.re.abs();
                catalog.push(CatalogEntry {
                    lambda,
                    s,
                    n_j: n_j(lambda, profile.omega),
                    k: if p.mu.re > 0.0 { block.k } else { -block.k },
                    vec: normalized_mode(block, p, s_pair),
                    mu: p.mu.re,
                });
            }
        }
        if unstable_here {
            unstable_harmonics.push(block.k);
        }
        pairs.extend(spec.pairs.iter().cloned());
    }
    catalog.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let counts = Counts {
        n_unstable,
        n_discrete_stable: catalog.len(),
        n_negative_signature: catalog.iter().filter(|c| c.s == 1).count(),
    };
    SpectrumReport {
        omega: profile.omega,
        m: profile.m,
        epsilon: profile.epsilon(),
        pairs,
        kernel,
        counts,
        spectrally_stable: n_unstable == 0,
        catalog,
        h8_ok,
        unstable_harmonics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n_j_counts_multiples_below_band() {
        assert_eq!(n_j(0.05, 0.16), 3);
        assert_eq!(n_j(0.05, 0.15), 2);
        assert_eq!(n_j(0.2, 0.15), 0);
        assert_eq!(n_j(0.0478, 0.1487), 3);
    }
}
