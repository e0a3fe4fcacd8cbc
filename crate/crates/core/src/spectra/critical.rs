//! Bisection for the frequency where a pair of real eigenvalues collides and leaves the axis.

use serde::{Deserialize, Serialize};

use super::{block_spectrum, is_unstable, BlockSpectrum, SpectrumConfig};
use crate::basis::{GridConfig, SplineBasis};
use crate::error::SpectraError;
use crate::profiles::{solve_profile_on, NonlinearityModel, RadialPotential, RadialProfile, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OmegaCrConfig {
    pub tol_omega: f64,
    /// equispaced probes (endpoints included) checked for monotonicity before bisecting
    pub prescan_points: usize,
}

impl Default for OmegaCrConfig {
    fn default() -> Self {
        OmegaCrConfig {
            tol_omega: 5e-4,
            prescan_points: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Probe {
    pub omega: f64,
    pub unstable: bool,
    pub unstable_harmonics: Vec<i64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalFrequency {
    pub omega_cr: f64,
    pub lambda_cr: f64,
    /// catalog signatures of the two colliding modes at the stable endpoint
    pub colliding_pair_signatures: [i8; 2],
    pub colliding_lambdas: [f64; 2],
    pub harmonic: i64,
    pub stable_endpoint: f64,
    pub unstable_endpoint: f64,
    pub probes: Vec<Probe>,
}

struct Prober<'a> {
    basis: SplineBasis,
    model: &'a NonlinearityModel,
    potential: &'a RadialPotential,
    m: i64,
    solver: &'a SolverConfig,
    spectrum: &'a SpectrumConfig,
    solved: Vec<RadialProfile>,
}

impl Prober<'_> {
    fn profile(&mut self, omega: f64) -> Result<RadialProfile, SpectraError> {
        let guess = self
            .solved
            .iter()
            .min_by(|a, b| (a.omega - omega).abs().total_cmp(&(b.omega - omega).abs()))
            .cloned();
        let p = match guess {
            Some(g) => solve_profile_on(&self.basis, self.model, self.potential, omega, self.m, Some(&g), self.solver)
                .or_else(|_| solve_profile_on(&self.basis, self.model, self.potential, omega, self.m, None, self.solver)),
            None => solve_profile_on(&self.basis, self.model, self.potential, omega, self.m, None, self.solver),
        }?;
        self.solved.push(p.clone());
        Ok(p)
    }

    fn probe(&mut self, omega: f64, ks: &[i64]) -> Result<(Probe, Vec<BlockSpectrum>), SpectraError> {
        let p = self.profile(omega)?;
        let mut specs = Vec::new();
        let mut unstable_harmonics = Vec::new();
        for &k in ks {
            let (_, spec) = block_spectrum(&self.basis, &p, k, self.spectrum)?;
            if spec.pairs.iter().any(|q| is_unstable(q, self.spectrum)) {
                unstable_harmonics.push(k);
            }
            specs.push(spec);
        }
        let probe = Probe {
            omega,
            unstable: !unstable_harmonics.is_empty(),
            unstable_harmonics,
        };
        Ok((probe, specs))
    }
}

/// Locates the spectral stability transition inside `bracket`.
///
/// After a pre-scan over all harmonics the bisection only re-examines the harmonics that were
/// unstable somewhere on the scan.
#[allow(clippy::too_many_arguments)]
pub fn detect_omega_cr(
    model: &NonlinearityModel,
    potential: &RadialPotential,
    m: i64,
    bracket: (f64, f64),
    grid: GridConfig,
    solver: &SolverConfig,
    spectrum: &SpectrumConfig,
    cfg: &OmegaCrConfig,
) -> Result<CriticalFrequency, SpectraError> {
    let (lo, hi) = bracket;
    let mut prober = Prober {
        basis: SplineBasis::new(grid),
        model,
        potential,
        m,
        solver,
        spectrum,
        solved: Vec::new(),
    };
    let all: Vec<i64> = (0..=spectrum.k_max).collect();
    let n = cfg.prescan_points.max(2);
    let mut probes = Vec::new();
    // scan from the top of the bracket, where profiles are wide and best continued downward
    for i in (0..n).rev() {
        let w = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        probes.push(prober.probe(w, &all)?.0);
    }
    probes.reverse();
    let flips = probes.windows(2).filter(|p| p[0].unstable != p[1].unstable).count();
    if flips == 0 {
        return Err(SpectraError::NoTransition { lo, hi });
    }
    if flips > 1 {
        return Err(SpectraError::MultipleTransitions { lo, hi });
    }
    let mut ks: Vec<i64> = probes.iter().flat_map(|p| p.unstable_harmonics.iter().copied()).collect();
    ks.sort_unstable();
    ks.dedup();
    let i = probes.windows(2).position(|p| p[0].unstable != p[1].unstable).unwrap();
    let (mut a, mut b) = (probes[i].omega, probes[i + 1].omega);
    let unstable_low = probes[i].unstable;
    while (b - a) > cfg.tol_omega {
        let mid = 0.5 * (a + b);
        let (p, _) = prober.probe(mid, &ks)?;
        if p.unstable == unstable_low {
            a = mid;
        } else {
            b = mid;
        }
        probes.push(p);
    }
    let (stable_w, unstable_w) = if unstable_low { (b, a) } else { (a, b) };
    let (unstable_probe, unstable_specs) = prober.probe(unstable_w, &ks)?;
    let (_, stable_specs) = prober.probe(stable_w, &ks)?;
    let ki = ks
        .iter()
        .position(|k| unstable_probe.unstable_harmonics.contains(k))
        .unwrap_or(0);
    let harmonic = ks[ki];
    let side = unstable_specs[ki]
        .pairs
        .iter()
        .find(|p| is_unstable(p, spectrum))
        .map(|p| p.mu.re.signum())
        .unwrap_or(1.0);
    let (sigs, lams) = colliding_pair(&stable_specs[ki], side, spectrum).ok_or(SpectraError::NoTransition { lo, hi })?;
    probes.sort_by(|x, y| x.omega.total_cmp(&y.omega));
    Ok(CriticalFrequency {
        omega_cr: 0.5 * (a + b),
        lambda_cr: 0.5 * (lams[0] + lams[1]),
        colliding_pair_signatures: sigs,
        colliding_lambdas: lams,
        harmonic,
        stable_endpoint: stable_w,
        unstable_endpoint: unstable_w,
        probes,
    })
}

/// Closest pair of real eigenvalues on one side of the axis with opposite signatures.
fn colliding_pair(spec: &BlockSpectrum, side: f64, cfg: &SpectrumConfig) -> Option<([i8; 2], [f64; 2])> {
    let mut real: Vec<(f64, i8)> = spec
        .pairs
        .iter()
        .filter(|p| !is_unstable(p, cfg) && p.mu.re * side > 0.0 && !p.embedded_candidate)
        .filter_map(|p| p.s.map(|s| (p.mu.re, if p.mu.re > 0.0 { s } else { -s })))
        .collect();
    real.sort_by(|x, y| x.0.total_cmp(&y.0));
    real.windows(2)
        .filter(|w| w[0].1 != w[1].1)
        .min_by(|x, y| (x[1].0 - x[0].0).total_cmp(&(y[1].0 - y[0].0)))
        .map(|w| ([w[0].1, w[1].1], [w[0].0.abs(), w[1].0.abs()]))
}
