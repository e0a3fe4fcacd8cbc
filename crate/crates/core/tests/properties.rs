//! Property tests for the invariants of the profile, spectral and radiation modules.

use std::f64::consts::{E, PI};
use std::sync::OnceLock;

use num_complex::Complex64;
use proptest::prelude::*;

use vortex_spectra::basis::{GridConfig, SplineBasis};
use vortex_spectra::fgr::{
    fgr_constant, gamma_model2, predicted_decay, CouplingFunction, Model2Config, QuadratureConfig, TransformMethod,
};
use vortex_spectra::linop::assemble_block;
use vortex_spectra::profiles::{solve_profile, NonlinearityModel, RadialPotential, RadialProfile, SolverConfig};
use vortex_spectra::spectra::{block_spectrum, krein_signature, SpectrumConfig};

fn profile() -> &'static RadialProfile {
    static P: OnceLock<RadialProfile> = OnceLock::new();
    P.get_or_init(|| {
        solve_profile(
            &NonlinearityModel::cubic_quintic(),
            &RadialPotential::none(),
            0.16,
            1,
            GridConfig {
                r_max: 40.0,
                elements: 120,
                ..Default::default()
            },
            None,
            &SolverConfig::default(),
        )
        .unwrap()
    })
}

fn closed() -> QuadratureConfig {
    QuadratureConfig {
        method: TransformMethod::ClosedForm,
        ..Default::default()
    }
}

fn gaussian(a: Complex64, w: f64, c: [f64; 2], q: f64, k: [f64; 2]) -> CouplingFunction {
    CouplingFunction::Gaussian {
        amplitude: a,
        width: w,
        center: c,
        radial_quadratic: q,
        wavevector: k,
        radial_wavenumber: 0.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn beta_prime_matches_centered_difference(s in 0.01f64..2.0) {
        let m = NonlinearityModel::cubic_quintic();
        let h = 1e-3;
        let fd = (m.beta(s + h) - m.beta(s - h)) / (2.0 * h);
        prop_assert!((m.beta_prime(s) - fd).abs() < 1e-5);
        prop_assert!((m.beta(s) - (-s + s * s)).abs() < 1e-15);
        prop_assert!((m.big_b(s) - (-s * s / 2.0 + s.powi(3) / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn custom_nonlinearity_vanishes_at_zero(c in prop::collection::vec(-3.0f64..3.0, 1..5)) {
        prop_assert_eq!(NonlinearityModel::custom(c).beta(0.0), 0.0);
    }

    #[test]
    fn quadrature_integrates_monomials(p in 0i32..10, r_max in 10.0f64..60.0) {
        let basis = SplineBasis::new(GridConfig { r_max, elements: 40, ..Default::default() });
        let f: Vec<f64> = basis.grid.r.iter().map(|r| r.powi(p)).collect();
        let exact = r_max.powi(p + 2) / (p + 2) as f64;
        prop_assert!((basis.grid.integrate(&f) / exact - 1.0).abs() < 1e-10);
        prop_assert!(basis.grid.r.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn predicted_decay_identities(c in 0.0f64..3.0, z in 0.05f64..1.0, t in 0.0f64..100.0) {
        let z0 = Complex64::new(z, 0.0);
        prop_assert_eq!(predicted_decay(c, z0, 0.0), z * z);
        prop_assert_eq!(predicted_decay(0.0, z0, t), z * z);
        prop_assert!(predicted_decay(c, z0, t) <= z * z);
        if c > 1e-3 {
            let half = 3.0 / (4.0 * PI * c * z.powi(4));
            prop_assert!((predicted_decay(c, z0, half) / (z * z) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_scales_and_ignores_translation(
        re in -2.0f64..2.0, im in -2.0f64..2.0, w in 0.5f64..2.0,
        cx in -3.0f64..3.0, cy in -3.0f64..3.0, q in -1.0f64..1.0,
    ) {
        let a = Complex64::new(re, im);
        let base = fgr_constant(&gaussian(Complex64::new(1.0, 0.0), w, [0.0; 2], q, [0.0; 2]), &closed()).unwrap();
        let moved = fgr_constant(&gaussian(a, w, [cx, cy], q, [0.0; 2]), &closed()).unwrap();
        prop_assert!(base >= 0.0);
        prop_assert!((moved - a.norm_sqr() * base).abs() <= 1e-12 * (1.0 + base));
    }

    #[test]
    fn transform_of_conjugate_is_reflected(x in -2.0f64..2.0, y in -2.0f64..2.0, kx in -1.0f64..1.0) {
        let g = gaussian(Complex64::new(0.7, -0.4), 1.1, [0.3, -0.2], 0.2, [kx, 0.1]);
        let lhs = g.conj().transform([x, y]).unwrap();
        let rhs = g.transform([-x, -y]).unwrap().conj();
        prop_assert!((lhs - rhs).norm() < 1e-13);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn hessian_blocks_are_symmetric(k in 0i64..=8) {
        let b = assemble_block(profile(), k).unwrap();
        let n = b.dim();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((b.s[(i, j)] - b.s[(j, i)]).abs() < 1e-12);
                let sign = if i < b.na { 1.0 } else { -1.0 };
                prop_assert_eq!(b.k_mat[(i, j)], sign * b.s[(i, j)]);
            }
        }
    }

    #[test]
    fn signature_is_scale_invariant(k in 0i64..=4, re in -3.0f64..3.0, im in -3.0f64..3.0) {
        prop_assume!(re.abs() + im.abs() > 1e-3);
        let p = profile();
        let cfg = SpectrumConfig::default();
        let (block, spec) = block_spectrum(&p.basis(), p, k, &cfg).unwrap();
        let c = Complex64::new(re, im);
        for pair in spec.pairs.iter().filter(|q| q.s.is_some()) {
            let mut scaled = pair.clone();
            scaled.vec.iter_mut().for_each(|v| *v *= c);
            prop_assert_eq!(krein_signature(&block, &scaled, &cfg).ok(), pair.s);
        }
    }

    #[test]
    fn reported_pairs_satisfy_residual_bound(k in 0i64..=8) {
        let p = profile();
        let cfg = SpectrumConfig::default();
        let (block, spec) = block_spectrum(&p.basis(), p, k, &cfg).unwrap();
        let n = block.dim();
        for pair in &spec.pairs {
            let norm = pair.vec.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let mut res = 0.0;
            for i in 0..n {
                let kv: Complex64 = (0..n).map(|j| pair.vec[j] * block.k_mat[(i, j)]).sum();
                res += (kv - pair.mu * pair.vec[i]).norm_sqr();
            }
            prop_assert!(res.sqrt() / norm <= cfg.residual_tol);
            // real matrix: the conjugate eigenvalue is reported as well
            let conj = pair.mu.conj();
            prop_assert!(spec.pairs.iter().any(|q| (q.mu - conj).norm() < 1e-9));
        }
    }

    #[test]
    fn gamma_is_nonpositive_and_phase_invariant(
        a in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2), theta in 0.0f64..(2.0 * PI),
    ) {
        let zeta: Vec<Complex64> = a.iter().map(|(x, y)| Complex64::new(*x, *y)).collect();
        prop_assume!(zeta.iter().map(|z| z.norm_sqr()).sum::<f64>() > 1e-4);
        let cfg = Model2Config::two_mode_preset();
        let rot: Vec<Complex64> = zeta.iter().map(|z| z * Complex64::from_polar(1.0, theta)).collect();
        let g = gamma_model2(&cfg, &[zeta, rot]).unwrap();
        prop_assert!(g.gamma_values[0] <= 0.0);
        prop_assert!((g.gamma_values[0] - g.gamma_values[1]).abs() <= 1e-12 * g.gamma_values[0].abs().max(1e-300));
    }
}

#[test]
fn unit_gaussian_constant_is_pi_over_e() {
    let c = fgr_constant(&CouplingFunction::gaussian(Complex64::new(1.0, 0.0), 1.0), &closed()).unwrap();
    assert!((c - PI / E).abs() < 1e-12);
}
