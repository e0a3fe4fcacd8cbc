//! Radial vortex profiles: existence window, Newton solver, continuation and conserved functionals.

use std::f64::consts::PI;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::basis::{GridConfig, SplineBasis};
use crate::error::ProfileError;
use crate::linalg::{cholesky_lower, dot, lu_solve, matvec, norm_inf, to_vec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityKind {
    CubicQuintic,
    Custom,
}

/// Polynomial nonlinearity beta(s) = sum_k coeffs[k] s^(k+1), so beta(0) = 0 by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityModel {
    pub kind: NonlinearityKind,
    #[serde(default)]
    pub coeffs: Vec<f64>,
}

impl Default for NonlinearityModel {
    fn default() -> Self {
        NonlinearityModel::cubic_quintic()
    }
}

impl NonlinearityModel {
    pub fn cubic_quintic() -> Self {
        NonlinearityModel {
            kind: NonlinearityKind::CubicQuintic,
            coeffs: vec![-1.0, 1.0],
        }
    }

    pub fn custom(coeffs: Vec<f64>) -> Self {
        NonlinearityModel {
            kind: NonlinearityKind::Custom,
            coeffs,
        }
    }

    fn coeffs(&self) -> &[f64] {
        match self.kind {
            NonlinearityKind::CubicQuintic => &[-1.0, 1.0],
            NonlinearityKind::Custom => &self.coeffs,
        }
    }

    pub fn beta(&self, s: f64) -> f64 {
        self.coeffs().iter().rev().fold(0.0, |acc, c| (acc + c) * s)
    }

    pub fn beta_prime(&self, s: f64) -> f64 {
        let c = self.coeffs();
        let mut acc = 0.0;
        for k in (0..c.len()).rev() {
            acc = acc * s + (k + 1) as f64 * c[k];
        }
        acc
    }

    /// Antiderivative of beta with B(0) = 0.
    pub fn big_b(&self, s: f64) -> f64 {
        let c = self.coeffs();
        let mut acc = 0.0;
        for k in (0..c.len()).rev() {
            acc = acc * s + c[k] / (k + 2) as f64;
        }
        acc * s * s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum PotentialShape {
    None,
    /// V(r) = amplitude * exp(-r^2 / (2 width^2))
    Gaussian { amplitude: f64, width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialPotential {
    pub shape: PotentialShape,
    pub epsilon: f64,
}

impl Default for RadialPotential {
    fn default() -> Self {
        RadialPotential::none()
    }
}

impl RadialPotential {
    pub fn none() -> Self {
        RadialPotential {
            shape: PotentialShape::None,
            epsilon: 0.0,
        }
    }

    /// V = -exp(-r^2/2) with strength epsilon.
    pub fn gaussian_well(epsilon: f64) -> Self {
        RadialPotential {
            shape: PotentialShape::Gaussian {
                amplitude: -1.0,
                width: 1.0,
            },
            epsilon,
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        RadialPotential { epsilon, ..*self }
    }

    /// Unscaled shape V(r).
    pub fn shape_at(&self, r: f64) -> f64 {
        match self.shape {
            PotentialShape::None => 0.0,
            PotentialShape::Gaussian { amplitude, width } => {
                amplitude * (-r * r / (2.0 * width * width)).exp()
            }
        }
    }

    /// epsilon * V(r).
    pub fn at(&self, r: f64) -> f64 {
        self.epsilon * self.shape_at(r)
    }

    /// Curvature of V at the origin.
    pub fn hessian_eigenvalue(&self) -> f64 {
        match self.shape {
            PotentialShape::None => 0.0,
            PotentialShape::Gaussian { amplitude, width } => -amplitude / (width * width),
        }
    }
}

/// Largest amplitude scanned by the numeric existence window when solving profiles.
pub const WINDOW_S_MAX: f64 = 10.0;

/// Upper end of the frequency window (0, omega_star) where bound states can exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExistenceWindow {
    pub omega_star: f64,
    /// s^2 at which the supremum is attained (infinite when unbounded)
    pub argmax_s2: f64,
}

/// omega_star = sup_{s>0} -B(s^2)/s^2, analytic for the cubic-quintic model.
pub fn existence_window(model: &NonlinearityModel, s_max: f64) -> Result<ExistenceWindow, ProfileError> {
    if model.kind == NonlinearityKind::CubicQuintic {
        // -B(t)/t = t/2 - t^2/3, maximal at t = 3/4
        return Ok(ExistenceWindow {
            omega_star: 3.0 / 16.0,
            argmax_s2: 0.75,
        });
    }
    existence_window_numeric(model, s_max)
}

pub fn existence_window_numeric(model: &NonlinearityModel, s_max: f64) -> Result<ExistenceWindow, ProfileError> {
    let g = |t: f64| -model.big_b(t) / t;
    let t_max = s_max * s_max;
    let n = 4000;
    let t_min = 1e-8 * t_max.min(1.0);
    let ratio = (t_max / t_min).powf(1.0 / n as f64);
    let mut best = (f64::NEG_INFINITY, 0.0, 0usize);
    let mut ts = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let t = t_min * ratio.powi(i as i32);
        ts.push(t);
        let v = g(t);
        if v > best.0 {
            best = (v, t, i);
        }
    }
    if best.2 == n && g(t_max) > g(ts[n - 1]) {
        return Ok(ExistenceWindow {
            omega_star: f64::INFINITY,
            argmax_s2: f64::INFINITY,
        });
    }
    if best.0 <= 0.0 {
        return Err(ProfileError::EmptyWindow { sup: best.0.max(0.0) });
    }
    let mut a = ts[best.2.saturating_sub(1)];
    let mut b = ts[(best.2 + 1).min(n)];
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let x1 = b - phi * (b - a);
        let x2 = a + phi * (b - a);
        if g(x1) < g(x2) {
            a = x1;
        } else {
            b = x2;
        }
    }
    let t = 0.5 * (a + b);
    Ok(ExistenceWindow {
        omega_star: g(t),
        argmax_s2: t,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub profile_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            profile_tol: 1e-8,
            max_iter: 60,
        }
    }
}

/// A computed vortex profile psi(r) with phi = e^{i m theta} psi.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub omega: f64,
    pub m: i64,
    pub model: NonlinearityModel,
    pub potential: RadialPotential,
    pub grid: GridConfig,
    /// spline coefficients on the full basis
    pub coeffs: Vec<f64>,
    pub r: Vec<f64>,
    pub psi: Vec<f64>,
    pub residual_norm: f64,
    pub tol: f64,
    pub q: f64,
    pub energy: f64,
    pub d: f64,
    pub newton_iterations: usize,
}

impl RadialProfile {
    pub fn basis(&self) -> SplineBasis {
        SplineBasis::new(self.grid)
    }

    pub fn value_at(&self, basis: &SplineBasis, r: f64) -> f64 {
        basis.eval_function(&self.coeffs, r).0
    }

    pub fn epsilon(&self) -> f64 {
        self.potential.epsilon
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,psi\n");
        for (r, p) in self.r.iter().zip(&self.psi) {
            s.push_str(&format!("{r:?},{p:?}\n"));
        }
        s
    }

    pub fn sidecar(&self) -> ProfileSidecar {
        ProfileSidecar {
            omega: self.omega,
            m: self.m,
            epsilon: self.epsilon(),
            q: self.q,
            #[allow(non_snake_case)]
            E: self.energy,
            d: self.d,
            residual_norm: self.residual_norm,
            grid: SidecarGrid {
                r_max: self.grid.r_max,
                n: self.r.len(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ProfileSidecar {
    pub omega: f64,
    pub m: i64,
    pub epsilon: f64,
    pub q: f64,
    pub E: f64,
    pub d: f64,
    pub residual_norm: f64,
    pub grid: SidecarGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarGrid {
    pub r_max: f64,
    pub n: usize,
}

/// Discrete profile problem on one spline space.
pub(crate) struct ProfileProblem<'a> {
    pub basis: &'a SplineBasis,
    pub model: &'a NonlinearityModel,
    pub potential: &'a RadialPotential,
    pub omega: f64,
    pub m: i64,
    stiffness: Mat<f64>,
    mass_chol: Mat<f64>,
    v_nodes: Vec<f64>,
}

impl<'a> ProfileProblem<'a> {
    pub fn new(
        basis: &'a SplineBasis,
        model: &'a NonlinearityModel,
        potential: &'a RadialPotential,
        omega: f64,
        m: i64,
    ) -> Self {
        let v_nodes = basis.grid.r.iter().map(|&r| potential.at(r)).collect();
        ProfileProblem {
            basis,
            model,
            potential,
            omega,
            m,
            stiffness: basis.stiffness(m),
            mass_chol: cholesky_lower(&basis.mass(m)),
            v_nodes,
        }
    }

    fn psi_nodes(&self, c: &[f64]) -> Vec<f64> {
        self.basis.at_nodes(&self.basis.embed(self.basis.space(self.m), c))
    }

    pub fn residual(&self, c: &[f64]) -> Vec<f64> {
        let psi = self.psi_nodes(c);
        let g: Vec<f64> = psi
            .iter()
            .zip(&self.v_nodes)
            .map(|(&p, &v)| (self.omega + v + self.model.beta(p * p)) * p)
            .collect();
        let mut f = matvec(&self.stiffness, c);
        for (fi, li) in f.iter_mut().zip(self.basis.load(self.m, &g)) {
            *fi += li;
        }
        f
    }

    /// Jacobian H_m + W of the residual.
    pub fn jacobian(&self, c: &[f64]) -> Mat<f64> {
        let psi = self.psi_nodes(c);
        let f: Vec<f64> = psi
            .iter()
            .zip(&self.v_nodes)
            .map(|(&p, &v)| {
                let s = p * p;
                self.omega + v + self.model.beta(s) + 2.0 * self.model.beta_prime(s) * s
            })
            .collect();
        &self.stiffness + self.basis.potential(self.m, self.m, &f)
    }

    /// Sup norm of the L2(r dr) Riesz representative of the residual.
    pub fn residual_norm(&self, f: &[f64]) -> f64 {
        let mut b = crate::linalg::col(f);
        crate::linalg::lower_solve(&self.mass_chol, &mut b);
        let mut bt = b;
        self.mass_chol
            .as_ref()
            .transpose()
            .solve_upper_triangular_in_place(bt.as_mut());
        let x = to_vec(&bt);
        norm_inf(&self.basis.at_nodes(&self.basis.embed(self.basis.space(self.m), &x)))
    }

    fn scale(&self, c: &[f64]) -> f64 {
        let mut s = matvec(&self.stiffness, c);
        let mc = self.basis.load(self.m, &self.psi_nodes(c));
        for (a, b) in s.iter_mut().zip(mc) {
            *a += self.omega * b;
        }
        dot(&s, &s).sqrt().max(1e-300)
    }

    /// Damped Newton from c0 with the natural monotonicity test on the Newton correction.
    pub fn newton(&self, c0: Vec<f64>, cfg: &SolverConfig) -> Result<(Vec<f64>, f64, usize), ProfileError> {
        use faer::linalg::solvers::Solve;
        let mut c = c0;
        let mut f = self.residual(&c);
        let mut res = self.residual_norm(&f);
        let mut iters = 0;
        let mut polish = 0;
        let mut t: f64 = 1.0;
        while iters < cfg.max_iter {
            if res < cfg.profile_tol {
                // a few extra steps drive the residual to round-off level
                if res < cfg.profile_tol * 1e-4 || polish >= 3 {
                    break;
                }
                polish += 1;
            }
            iters += 1;
            let lu = self.jacobian(&c).partial_piv_lu();
            let step = to_vec(&lu.solve(crate::linalg::col(&f)));
            if step.iter().any(|x| !x.is_finite()) {
                break;
            }
            let size = dot(&step, &step).sqrt();
            t = (2.0 * t).min(1.0);
            let mut accepted = false;
            while t > 1e-6 {
                let trial: Vec<f64> = c.iter().zip(&step).map(|(a, b)| a - t * b).collect();
                let ft = self.residual(&trial);
                let simplified = to_vec(&lu.solve(crate::linalg::col(&ft)));
                let st = dot(&simplified, &simplified).sqrt();
                if st.is_finite() && (st < (1.0 - 0.5 * t) * size || (polish > 0 && st <= size)) {
                    c = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
            res = self.residual_norm(&f);
        }
        if res < cfg.profile_tol {
            Ok((c, res, iters))
        } else {
            Err(ProfileError::NoConvergence {
                omega: self.omega,
                epsilon: self.potential.epsilon,
                iterations: iters,
                residual: res,
            })
        }
    }

    /// Relative residual of a trial state, used to rank initial guesses.
    fn relative_residual(&self, c: &[f64]) -> f64 {
        let f = self.residual(c);
        dot(&f, &f).sqrt() / self.scale(c)
    }

    pub fn finish(&self, c: Vec<f64>, residual_norm: f64, tol: f64, iterations: usize) -> RadialProfile {
        let full = self.basis.embed(self.basis.space(self.m), &c);
        let psi = self.basis.at_nodes(&full);
        let dpsi = self.basis.deriv_at_nodes(&full);
        let (q, energy) = functionals(self.basis, self.model, self.potential, self.m, &psi, &dpsi);
        RadialProfile {
            omega: self.omega,
            m: self.m,
            model: self.model.clone(),
            potential: *self.potential,
            grid: self.basis.cfg,
            coeffs: full,
            r: self.basis.grid.r.clone(),
            psi,
            residual_norm,
            tol,
            q,
            energy,
            d: energy + self.omega * q,
            newton_iterations: iterations,
        }
    }
}

/// Mass Q = (1/2) int |phi|^2 and energy E = (1/2) int |grad phi|^2 + V|phi|^2 + B(|phi|^2).
pub fn functionals(
    basis: &SplineBasis,
    model: &NonlinearityModel,
    potential: &RadialPotential,
    m: i64,
    psi: &[f64],
    dpsi: &[f64],
) -> (f64, f64) {
    let g = &basis.grid;
    let m2 = (m * m) as f64;
    let mut q = 0.0;
    let mut e = 0.0;
    for i in 0..g.n {
        let r = g.r[i];
        let p = psi[i];
        let w = g.quad_weights[i];
        q += w * p * p;
        e += w * (dpsi[i] * dpsi[i] + m2 * p * p / (r * r) + potential.at(r) * p * p + model.big_b(p * p));
    }
    (PI * q, PI * e)
}

fn bump(a: f64, sigma: f64, m: i64, r: f64) -> f64 {
    let x = r / sigma;
    let peak = if m == 0 {
        1.0
    } else {
        let xm = (m as f64 / 2.0).sqrt();
        xm.powi(m as i32) * (-xm * xm).exp()
    };
    a * x.powi(m as i32) * (-x * x).exp() / peak
}

fn flat_top(a: f64, radius: f64, m: i64, r: f64) -> f64 {
    let core = r / (1.0 + r);
    a * core.powi(m as i32) * 0.5 * (1.0 - ((r - radius) / 1.5).tanh())
}

fn is_trivial(psi: &[f64]) -> bool {
    norm_inf(psi) < 1e-6
}

/// Solves the radial profile equation by Newton from a scanned bump (or the supplied guess).
pub fn solve_profile(
    model: &NonlinearityModel,
    potential: &RadialPotential,
    omega: f64,
    m: i64,
    grid: GridConfig,
    initial_guess: Option<&RadialProfile>,
    cfg: &SolverConfig,
) -> Result<RadialProfile, ProfileError> {
    let basis = SplineBasis::new(grid);
    solve_profile_on(&basis, model, potential, omega, m, initial_guess, cfg)
}

pub fn solve_profile_on(
    basis: &SplineBasis,
    model: &NonlinearityModel,
    potential: &RadialPotential,
    omega: f64,
    m: i64,
    initial_guess: Option<&RadialProfile>,
    cfg: &SolverConfig,
) -> Result<RadialProfile, ProfileError> {
    if potential.epsilon == 0.0 {
        let window = existence_window(model, WINDOW_S_MAX)?;
        if !(omega > 0.0 && omega < window.omega_star) {
            return Err(ProfileError::OutsideWindow {
                omega,
                omega_star: window.omega_star,
            });
        }
    }
    let prob = ProfileProblem::new(basis, model, potential, omega, m);
    let sp = basis.space(m);
    let mut guesses: Vec<Vec<f64>> = Vec::new();
    if let Some(g) = initial_guess {
        let gb = g.basis();
        let c = if g.grid == basis.cfg {
            g.coeffs[sp.first..sp.end].to_vec()
        } else {
            basis.project(m, &|r| g.value_at(&gb, r))
        };
        guesses.push(c);
    } else {
        let mut scored: Vec<(f64, Vec<f64>)> = Vec::new();
        for &a in &[0.3, 0.5, 0.7, 0.8, 0.9, 1.0] {
            for &sigma in &[2.0, 3.0, 4.5, 6.0, 8.0, 11.0, 15.0, 20.0] {
                let c = basis.project(m, &|r| bump(a, sigma, m, r));
                scored.push((prob.relative_residual(&c), c));
            }
        }
        // flat-top shapes for frequencies close to the window edge
        for &a in &[0.8, 0.87, 0.95] {
            for &radius in &[5.0, 8.0, 12.0, 16.0, 22.0] {
                let c = basis.project(m, &|r| flat_top(a, radius, m, r));
                scored.push((prob.relative_residual(&c), c));
            }
        }
        scored.sort_by(|x, y| x.0.total_cmp(&y.0));
        guesses.extend(scored.into_iter().take(10).map(|s| s.1));
    }
    let mut last_err = None;
    for c0 in guesses {
        match prob.newton(c0, cfg) {
            Ok((c, res, it)) => {
                let p = prob.finish(c, res, cfg.profile_tol, it);
                if is_trivial(&p.psi) {
                    last_err = Some(ProfileError::TrivialSolution { omega });
                    continue;
                }
                return Ok(p);
            }
            Err(e) => {
                if last_err.is_none() || matches!(last_err, Some(ProfileError::NoConvergence { .. })) {
                    last_err = Some(e);
                }
            }
        }
    }
    if initial_guess.is_none() {
        // homotopy from a lower frequency where bump guesses converge
        let start = 0.75 * omega;
        if let Ok(mut p) = solve_profile_on(basis, model, potential, start, m, None, cfg) {
            let mut step = (omega - start) / 8.0;
            while p.omega < omega && step > 1e-5 * omega {
                let w = (p.omega + step).min(omega);
                match solve_profile_on(basis, model, potential, w, m, Some(&p), cfg) {
                    Ok(next) if !is_trivial(&next.psi) => {
                        p = next;
                        step *= 1.5;
                    }
                    _ => step *= 0.5,
                }
            }
            if p.omega == omega {
                return Ok(p);
            }
        }
    }
    Err(last_err.unwrap_or(ProfileError::TrivialSolution { omega }))
}

/// Profile family along omega with centered-difference q'.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileFamily {
    pub profiles: Vec<RadialProfile>,
    pub q_prime: Vec<f64>,
    pub e_prime: Vec<f64>,
    pub d_prime: Vec<f64>,
    pub q_prime_sign_change: bool,
}

/// Three-point derivative on a possibly nonuniform grid, one-sided at the ends.
pub fn finite_difference(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![f64::NAN; n];
    }
    if n == 2 {
        let d = (y[1] - y[0]) / (x[1] - x[0]);
        return vec![d, d];
    }
    let three = |i0: usize, at: usize| {
        let (x0, x1, x2) = (x[i0], x[i0 + 1], x[i0 + 2]);
        let t = x[at];
        y[i0] * ((t - x1) + (t - x2)) / ((x0 - x1) * (x0 - x2))
            + y[i0 + 1] * ((t - x0) + (t - x2)) / ((x1 - x0) * (x1 - x2))
            + y[i0 + 2] * ((t - x0) + (t - x1)) / ((x2 - x0) * (x2 - x1))
    };
    (0..n)
        .map(|i| {
            if i == 0 {
                three(0, 0)
            } else if i == n - 1 {
                three(n - 3, n - 1)
            } else {
                three(i - 1, i)
            }
        })
        .collect()
}

pub fn continue_family(
    model: &NonlinearityModel,
    potential: &RadialPotential,
    omegas: &[f64],
    m: i64,
    grid: GridConfig,
    cfg: &SolverConfig,
) -> Result<ProfileFamily, ProfileError> {
    let basis = SplineBasis::new(grid);
    let mut profiles: Vec<RadialProfile> = Vec::with_capacity(omegas.len());
    for &w in omegas {
        let p = solve_profile_on(&basis, model, potential, w, m, profiles.last(), cfg)
            .or_else(|_| solve_profile_on(&basis, model, potential, w, m, None, cfg))?;
        profiles.push(p);
    }
    Ok(family_from(profiles))
}

pub fn family_from(profiles: Vec<RadialProfile>) -> ProfileFamily {
    let w: Vec<f64> = profiles.iter().map(|p| p.omega).collect();
    let q: Vec<f64> = profiles.iter().map(|p| p.q).collect();
    let e: Vec<f64> = profiles.iter().map(|p| p.energy).collect();
    let d: Vec<f64> = profiles.iter().map(|p| p.d).collect();
    let q_prime = finite_difference(&w, &q);
    let sign_change = q_prime.windows(2).any(|p| p[0] * p[1] <= 0.0);
    ProfileFamily {
        e_prime: finite_difference(&w, &e),
        d_prime: finite_difference(&w, &d),
        q_prime,
        q_prime_sign_change: sign_change,
        profiles,
    }
}

/// Member of an epsilon continuation with its distance from the linear prediction.
#[derive(Debug, Clone, Serialize)]
pub struct EpsilonMember {
    pub profile: RadialProfile,
    /// sup |psi_eps - psi_0| on the nodes
    pub deviation: f64,
    /// sup |psi_eps - psi_0 - eps dpsi/deps| / sup |psi_eps - psi_0|
    pub nonlinear_ratio: f64,
    pub outside_linear_regime: bool,
}

pub fn continue_in_epsilon(
    model: &NonlinearityModel,
    shape: &RadialPotential,
    omega: f64,
    m: i64,
    eps_list: &[f64],
    grid: GridConfig,
    cfg: &SolverConfig,
) -> Result<Vec<EpsilonMember>, ProfileError> {
    let basis = SplineBasis::new(grid);
    let base_pot = shape.with_epsilon(0.0);
    let base = solve_profile_on(&basis, model, &base_pot, omega, m, None, cfg)?;
    // tangent d psi / d eps = -J^{-1} (V psi)
    let prob0 = ProfileProblem::new(&basis, model, &base_pot, omega, m);
    let sp = basis.space(m);
    let c0 = base.coeffs[sp.first..sp.end].to_vec();
    let vpsi: Vec<f64> = base
        .psi
        .iter()
        .zip(&basis.grid.r)
        .map(|(p, &r)| shape.shape_at(r) * p)
        .collect();
    let tangent = lu_solve(&prob0.jacobian(&c0), &basis.load(m, &vpsi));
    let tangent_nodes = basis.at_nodes(&basis.embed(sp, &tangent));
    let mut out: Vec<EpsilonMember> = Vec::new();
    let mut prev = base.clone();
    for &eps in eps_list {
        let profile = if eps == 0.0 {
            base.clone()
        } else {
            let pot = shape.with_epsilon(eps);
            solve_profile_on(&basis, model, &pot, omega, m, Some(&prev), cfg).map_err(|e| match e {
                ProfileError::NoConvergence {
                    iterations, residual, ..
                } => ProfileError::NoConvergence {
                    omega,
                    epsilon: eps,
                    iterations,
                    residual,
                },
                other => other,
            })?
        };
        let mut dev: f64 = 0.0;
        let mut nonlin: f64 = 0.0;
        for i in 0..profile.psi.len() {
            let d = profile.psi[i] - base.psi[i];
            dev = dev.max(d.abs());
            nonlin = nonlin.max((d + eps * tangent_nodes[i]).abs());
        }
        let ratio = if dev > 0.0 { nonlin / dev } else { 0.0 };
        prev = profile.clone();
        out.push(EpsilonMember {
            profile,
            deviation: dev,
            nonlinear_ratio: ratio,
            outside_linear_regime: ratio > 0.2,
        });
    }
    Ok(out)
}

/// Galerkin residual of the profile re-measured on the 2x refined spline space.
pub fn refined_residual(profile: &RadialProfile) -> f64 {
    let fine = SplineBasis::new(profile.grid.refined());
    let coarse = profile.basis();
    let c = fine.project(profile.m, &|r| profile.value_at(&coarse, r));
    let prob = ProfileProblem::new(&fine, &profile.model, &profile.potential, profile.omega, profile.m);
    prob.residual_norm(&prob.residual(&c))
}

/// Independent shooting solution from the series psi ~ c r^m (1 + gamma r^2).
#[derive(Debug, Clone)]
pub struct ShootingProfile {
    pub c: f64,
    pub dr: f64,
    pub r0: f64,
    pub psi: Vec<f64>,
    pub dpsi: Vec<f64>,
}

impl ShootingProfile {
    /// Cubic Hermite interpolation of the stored trajectory.
    pub fn value_at(&self, r: f64) -> f64 {
        let x = ((r - self.r0) / self.dr).max(0.0);
        let i = (x.floor() as usize).min(self.psi.len() - 2);
        let t = x - i as f64;
        let (p0, p1) = (self.psi[i], self.psi[i + 1]);
        let (m0, m1) = (self.dpsi[i] * self.dr, self.dpsi[i + 1] * self.dr);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * p0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * p1 + (t3 - t2) * m1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shot {
    TooSmall,
    TooLarge,
    Undecided,
}

pub fn shoot_profile(
    model: &NonlinearityModel,
    potential: &RadialPotential,
    omega: f64,
    m: i64,
    r_end: f64,
) -> Option<ShootingProfile> {
    let dr: f64 = 2e-3;
    let r0: f64 = 1e-3;
    let mf = m as f64;
    let rhs = |r: f64, y: [f64; 2]| -> [f64; 2] {
        let p = y[0];
        [
            y[1],
            -y[1] / r + mf * mf * p / (r * r) + (omega + potential.at(r) + model.beta(p * p)) * p,
        ]
    };
    let run = |c: f64, keep: bool| -> (Shot, Vec<f64>, Vec<f64>) {
        let gamma = if m == 0 {
            (omega + potential.at(0.0) + model.beta(c * c)) / 4.0
        } else {
            (omega + potential.at(0.0)) / (4.0 * (mf + 1.0))
        };
        let mut y = [
            c * r0.powi(m as i32) * (1.0 + gamma * r0 * r0),
            c * (mf * r0.powi(m as i32 - 1) + (mf + 2.0) * gamma * r0.powi(m as i32 + 1)),
        ];
        let mut r = r0;
        let mut ps = Vec::new();
        let mut ds = Vec::new();
        let mut descending = false;
        let steps = ((r_end - r0) / dr).ceil() as usize;
        for _ in 0..steps {
            if keep {
                ps.push(y[0]);
                ds.push(y[1]);
            }
            let k1 = rhs(r, y);
            let k2 = rhs(r + 0.5 * dr, [y[0] + 0.5 * dr * k1[0], y[1] + 0.5 * dr * k1[1]]);
            let k3 = rhs(r + 0.5 * dr, [y[0] + 0.5 * dr * k2[0], y[1] + 0.5 * dr * k2[1]]);
            let k4 = rhs(r + dr, [y[0] + dr * k3[0], y[1] + dr * k3[1]]);
            y[0] += dr / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
            y[1] += dr / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
            r += dr;
            if !keep {
                if y[0] < 0.0 {
                    return (Shot::TooLarge, ps, ds);
                }
                if y[1] < 0.0 {
                    descending = true;
                }
                if (descending && y[1] > 0.0) || y[0] > 10.0 {
                    return (Shot::TooSmall, ps, ds);
                }
            }
        }
        (Shot::Undecided, ps, ds)
    };
    let mut prev = (1e-4, run(1e-4, false).0);
    if prev.1 != Shot::TooSmall {
        return None;
    }
    let mut bracket = None;
    let mut c = 1e-4;
    while c < 20.0 {
        c *= 1.03;
        let s = run(c, false).0;
        if s == Shot::TooLarge && prev.1 == Shot::TooSmall {
            bracket = Some((prev.0, c));
            break;
        }
        prev = (c, s);
    }
    let (mut lo, mut hi) = bracket?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match run(mid, false).0 {
            Shot::TooLarge => hi = mid,
            _ => lo = mid,
        }
    }
    let c = 0.5 * (lo + hi);
    let (_, psi, dpsi) = run(c, true);
    Some(ShootingProfile { c, dr, r0, psi, dpsi })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_quintic_window_is_three_sixteenths() {
        let w = existence_window(&NonlinearityModel::cubic_quintic(), 3.0).unwrap();
        assert_eq!(w.omega_star, 0.1875);
        assert_eq!(w.argmax_s2, 0.75);
    }

    #[test]
    fn frequency_above_window_rejected() {
        let r = solve_profile(
            &NonlinearityModel::cubic_quintic(),
            &RadialPotential::none(),
            0.25,
            1,
            GridConfig { r_max: 20.0, elements: 20, ..Default::default() },
            None,
            &SolverConfig::default(),
        );
        assert!(matches!(r, Err(ProfileError::OutsideWindow { omega_star, .. }) if omega_star == 0.1875));
    }

    #[test]
    fn numeric_window_matches_closed_form() {
        let w = existence_window_numeric(&NonlinearityModel::custom(vec![-1.0, 1.0]), 3.0).unwrap();
        assert!((w.omega_star - 0.1875).abs() < 1e-9);
    }

    #[test]
    fn defocusing_window_is_empty() {
        let e = existence_window(&NonlinearityModel::custom(vec![1.0]), 5.0).unwrap_err();
        assert!(matches!(e, ProfileError::EmptyWindow { .. }));
    }

    #[test]
    fn pure_cubic_window_is_unbounded() {
        let w = existence_window(&NonlinearityModel::custom(vec![-1.0]), 100.0).unwrap();
        assert!(w.omega_star.is_infinite());
    }

    #[test]
    fn beta_prime_matches_centered_difference() {
        let model = NonlinearityModel::cubic_quintic();
        for &s in &[0.0, 0.3, 0.75, 1.4] {
            let h = 1e-5;
            let fd = (model.beta(s + h) - model.beta(s - h)) / (2.0 * h);
            assert!((fd - model.beta_prime(s)).abs() < 1e-9);
        }
        assert_eq!(model.beta(0.0), 0.0);
        assert!((model.big_b(0.6) - (-0.18 + 0.072)).abs() < 1e-15);
    }

    #[test]
    fn finite_difference_exact_on_quadratics() {
        let x = [0.0, 0.1, 0.25, 0.3, 0.5];
        let y: Vec<f64> = x.iter().map(|t| 3.0 * t * t - t + 2.0).collect();
        let d = finite_difference(&x, &y);
        for (t, di) in x.iter().zip(d) {
            assert!((di - (6.0 * t - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_well_curvature() {
        let p = RadialPotential::gaussian_well(0.01);
        assert_eq!(p.hessian_eigenvalue(), 1.0);
        let h = 1e-4;
        let fd = (p.shape_at(h) - 2.0 * p.shape_at(0.0) + p.shape_at(h)) / (h * h);
        assert!((fd - 1.0).abs() < 1e-6);
    }
}
