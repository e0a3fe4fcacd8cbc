use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("EmptyWindow: no bound states (sup of -B(s^2)/s^2 is {sup})")]
    EmptyWindow { sup: f64 },
    #[error("NoConvergence: Newton failed at omega={omega}, epsilon={epsilon} after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        omega: f64,
        epsilon: f64,
        iterations: usize,
        residual: f64,
    },
    #[error("OutsideWindow: omega={omega} is outside the existence window (0, {omega_star})")]
    OutsideWindow { omega: f64, omega_star: f64 },
    #[error("TrivialSolution: Newton converged to psi = 0 at omega={omega}")]
    TrivialSolution { omega: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinopError {
    #[error("GridMismatch: {0}")]
    GridMismatch(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("EigensolverFailure: eigensolver did not converge for k={k}, n={n}")]
    EigensolverFailure { k: i64, n: usize },
    #[error("UndefinedSignature: energy form {q_s:e} is below tolerance")]
    UndefinedSignature { q_s: f64 },
    #[error("NoTransition: stability predicate is constant on [{lo}, {hi}]")]
    NoTransition { lo: f64, hi: f64 },
    #[error("MultipleTransitions: stability predicate is not monotone on [{lo}, {hi}]")]
    MultipleTransitions { lo: f64, hi: f64 },
    #[error("SignatureMismatch: catalog entry {j} has s = {s}, expected +1")]
    SignatureMismatch { j: usize, s: i8 },
    #[error("Inconclusive: Hessian eigenvalue {value:e} in harmonic {k} is too close to 0")]
    Inconclusive { k: i64, value: f64 },
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Linop(#[from] LinopError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FgrError {
    #[error("GridTooCoarse: circle interpolation error {rel_error:e} exceeds 1% of the constant")]
    GridTooCoarse { rel_error: f64 },
    #[error("NonConvergent: Lorentzian extrapolation residual {rel_residual:e} exceeds 1%")]
    NonConvergent { rel_residual: f64 },
    #[error("BoxWrap: boundary field mass fraction {fraction:e} at t={t}")]
    BoxWrap { t: f64, fraction: f64 },
    #[error("Unstable: {0}")]
    Unstable(String),
    #[error("CouplingConstraint: coupling {index} has |lambda.(alpha-beta)| = {level} <= omega = {omega}")]
    CouplingConstraint { index: usize, level: f64, omega: f64 },
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
}

impl ProfileError {
    pub fn name(&self) -> &'static str {
        match self {
            ProfileError::EmptyWindow { .. } => "EmptyWindow",
            ProfileError::NoConvergence { .. } => "NoConvergence",
            ProfileError::OutsideWindow { .. } => "OutsideWindow",
            ProfileError::TrivialSolution { .. } => "TrivialSolution",
        }
    }
}

impl SpectraError {
    pub fn name(&self) -> &'static str {
        match self {
            SpectraError::EigensolverFailure { .. } => "EigensolverFailure",
            SpectraError::UndefinedSignature { .. } => "UndefinedSignature",
            SpectraError::NoTransition { .. } => "NoTransition",
            SpectraError::MultipleTransitions { .. } => "MultipleTransitions",
            SpectraError::SignatureMismatch { .. } => "SignatureMismatch",
            SpectraError::Inconclusive { .. } => "Inconclusive",
            SpectraError::Profile(e) => e.name(),
            SpectraError::Linop(_) => "GridMismatch",
        }
    }
}

impl FgrError {
    pub fn name(&self) -> &'static str {
        match self {
            FgrError::GridTooCoarse { .. } => "GridTooCoarse",
            FgrError::NonConvergent { .. } => "NonConvergent",
            FgrError::BoxWrap { .. } => "BoxWrap",
            FgrError::Unstable(_) => "Unstable",
            FgrError::CouplingConstraint { .. } => "CouplingConstraint",
            FgrError::InvalidConfig(_) => "InvalidConfig",
        }
    }
}
