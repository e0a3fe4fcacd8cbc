//! Negative index of the Hessian and the non-resonance check on the discrete frequencies.

use faer::Side;
use serde::Serialize;

use super::{SpectrumConfig, SpectrumReport};
use crate::error::SpectraError;
use crate::linop::assemble_block_on;
use crate::profiles::RadialProfile;

/// Hessian eigenvalues closer than this to 0, outside the known kernel, make the count unreliable.
pub const INDEX_ZERO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct IndexIdentity {
    pub n_neg: usize,
    /// negative eigenvalues of S_k for k = 0..=k_max (not yet doubled)
    pub per_harmonic: Vec<usize>,
    pub p_qprime: usize,
    pub n_negative_signature_pairs: usize,
    /// n_neg - p(q') - 2 N; only defined for spectrally stable reports
    pub identity_residual: Option<i64>,
}

/// Counts negative directions of the Hessian blocks, deflating the kernel recorded in the report.
pub fn negative_index(
    profile: &RadialProfile,
    report: &SpectrumReport,
    q_prime: f64,
    cfg: &SpectrumConfig,
) -> Result<IndexIdentity, SpectraError> {
    let basis = profile.basis();
    let mut per_harmonic = Vec::new();
    let mut n_neg = 0;
    for k in 0..=cfg.k_max {
        let block = assemble_block_on(&basis, profile, k)?;
        let mut ev = block
            .s
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|_| SpectraError::EigensolverFailure { k, n: block.dim() })?;
        let known = report.kernel.iter().find(|ki| ki.k == k).map_or(0, |ki| ki.geo);
        ev.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
        let rest = &ev[known.min(ev.len())..];
        if let Some(v) = rest.iter().find(|v| v.abs() < INDEX_ZERO_TOL) {
            return Err(SpectraError::Inconclusive { k, value: *v });
        }
        let neg = rest.iter().filter(|&&v| v < 0.0).count();
        per_harmonic.push(neg);
        n_neg += if k == 0 { neg } else { 2 * neg };
    }
    let p_qprime = usize::from(q_prime > 0.0);
    let pairs = report.counts.n_negative_signature;
    Ok(IndexIdentity {
        n_neg,
        per_harmonic,
        p_qprime,
        n_negative_signature_pairs: pairs,
        identity_residual: report
            .spectrally_stable
            .then(|| n_neg as i64 - p_qprime as i64 - 2 * pairs as i64),
    })
}

/// Bound 2N + 3 on the l1 norm of integer relations.
pub fn h12_bound(n: u64) -> u64 {
    2 * n + 3
}

#[derive(Debug, Clone, Serialize)]
pub struct H12Check {
    /// integer vectors (first nonzero entry positive) with |mu . lambda| < tol |lambda|
    pub violations: Vec<Vec<i64>>,
    pub bound: u64,
    /// false when the node budget ran out before the search finished
    pub complete: bool,
    pub nodes: u64,
}

impl H12Check {
    pub fn holds(&self) -> Option<bool> {
        if !self.violations.is_empty() {
            Some(false)
        } else if self.complete {
            Some(true)
        } else {
            None
        }
    }
}

pub const H12_NODE_CAP: u64 = 20_000_000;
const MAX_VIOLATIONS: usize = 1000;

struct Search<'a> {
    lambda: &'a [f64],
    suffix_max: Vec<f64>,
    thr: f64,
    cap: u64,
    nodes: u64,
    complete: bool,
    mu: Vec<i64>,
    found: Vec<Vec<i64>>,
}

impl Search<'_> {
    fn visit(&mut self, i: usize, budget: i64, partial: f64, started: bool) {
        if !self.complete {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.cap || self.found.len() >= MAX_VIOLATIONS {
            self.complete = false;
            return;
        }
        if i == self.lambda.len() {
            if started && partial.abs() < self.thr {
                self.found.push(self.mu.clone());
            }
            return;
        }
        if partial.abs() - budget as f64 * self.suffix_max[i] >= self.thr {
            return;
        }
        let lo = if started { -budget } else { 0 };
        for c in lo..=budget {
            self.mu[i] = c;
            self.visit(i + 1, budget - c.abs(), partial + c as f64 * self.lambda[i], started || c != 0);
        }
        self.mu[i] = 0;
    }
}

/// Depth-first enumeration of integer relations with |mu|_1 <= bound, pruned when the
/// remaining budget cannot bring the partial sum back below tolerance.
pub fn check_h12(lambda: &[f64], bound: u64, resonance_tol: f64, node_cap: u64) -> H12Check {
    let norm = lambda.iter().map(|l| l * l).sum::<f64>().sqrt();
    let mut suffix_max = vec![0.0_f64; lambda.len() + 1];
    for i in (0..lambda.len()).rev() {
        suffix_max[i] = suffix_max[i + 1].max(lambda[i].abs());
    }
    let mut s = Search {
        lambda,
        suffix_max,
        thr: resonance_tol * norm,
        cap: node_cap,
        nodes: 0,
        complete: true,
        mu: vec![0; lambda.len()],
        found: Vec::new(),
    };
    if !lambda.is_empty() {
        s.visit(0, bound as i64, 0.0, false);
    }
    H12Check {
        violations: s.found,
        bound,
        complete: s.complete,
        nodes: s.nodes,
    }
}

/// Distinct values of a sorted list, merging entries closer than `tol` relative.
pub fn distinct(sorted: &[f64], tol: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &x in sorted {
        if out.last().is_none_or(|&y| (x - y).abs() > tol * x.abs().max(y.abs())) {
            out.push(x);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(lambda: &[f64], bound: i64, tol: f64) -> Vec<Vec<i64>> {
        let norm = lambda.iter().map(|l| l * l).sum::<f64>().sqrt();
        let mut out = Vec::new();
        let n = lambda.len();
        let mut mu = vec![-bound; n];
        loop {
            let l1: i64 = mu.iter().map(|c| c.abs()).sum();
            let first = mu.iter().find(|&&c| c != 0);
            if l1 <= bound && first.is_some_and(|&c| c > 0) {
                let dot: f64 = mu.iter().zip(lambda).map(|(c, l)| *c as f64 * l).sum();
                if dot.abs() < tol * norm {
                    out.push(mu.clone());
                }
            }
            let mut i = n;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if mu[i] < bound {
                    mu[i] += 1;
                    break;
                }
                mu[i] = -bound;
            }
        }
    }

    #[test]
    fn non_resonant_pair() {
        let c = check_h12(&[0.05, 0.11], h12_bound(2), 1e-9, H12_NODE_CAP);
        assert!(c.violations.is_empty() && c.complete);
        assert_eq!(c.holds(), Some(true));
    }

    #[test]
    fn exact_two_to_one() {
        let c = check_h12(&[0.05, 0.10], 7, 1e-9, H12_NODE_CAP);
        assert!(c.violations.contains(&vec![2, -1]));
    }

    #[test]
    fn single_mode_never_resonates() {
        for b in [1, 5, 40] {
            assert!(check_h12(&[0.07], b, 1e-9, H12_NODE_CAP).violations.is_empty());
        }
    }

    #[test]
    fn matches_brute_force() {
        let lambda = [0.03, 0.05, 0.08];
        let mut fast = check_h12(&lambda, 6, 1e-9, H12_NODE_CAP).violations;
        let mut slow = brute(&lambda, 6, 1e-9);
        fast.sort();
        slow.sort();
        assert_eq!(fast, slow);
        assert!(!fast.is_empty());
    }

    #[test]
    fn node_cap_marks_incomplete() {
        let c = check_h12(&[0.011, 0.0237, 0.0419, 0.0563], 60, 1e-12, 1000);
        assert!(!c.complete);
        assert_eq!(c.holds(), None);
    }

    #[test]
    fn distinct_merges_close_values() {
        assert_eq!(distinct(&[0.1, 0.1 + 1e-12, 0.2], 1e-9), vec![0.1, 0.2]);
    }
}
