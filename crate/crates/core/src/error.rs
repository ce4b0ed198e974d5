//! Error type shared by every module of the engine.

use std::fmt;

/// Everything that can go wrong while building or querying the recursion data.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Division by an exact or numerical zero.
    DivisionByZero,
    /// Natural log requested on a backend that cannot represent it exactly.
    LogUnavailable,
    /// A local expansion needed a principal part deeper than the configured cap.
    PoleOrderOverflow {
        center: String,
        order: usize,
        cap: usize,
    },
    /// A pole-basis or tensor evaluation hit one of its own poles.
    EvaluationAtPole,
    /// Newton iteration did not reach the requested tolerance.
    NoConvergence { iterations: usize, residual: f64 },
    /// Two Bethe roots (or a root and a seed) collided.
    RootCollision { min_distance: f64 },
    /// A root landed on a pole of the potential.
    RootAtPotentialPole,
    /// The exact backend could not certify a zero-residual root configuration.
    ExactRootsNotCertified { residual: String },
    /// The Hessian of the Bethe action is singular.
    SingularHessian,
    /// The order-(x-s_i)^1 matching of the kernel ODE failed; the roots do not
    /// satisfy the Bethe equation to the working tolerance.
    BetheConsistencyViolation { root: usize, residual: f64 },
    /// A computed correlator tensor is not symmetric.
    SymmetryViolation { g: u32, n: u32, residual: f64 },
    /// Kernel auto-extension hit the pole-order cap.
    CapExceeded { requested: usize, cap: usize },
    /// The sampled free-energy integrand is not a Laurent polynomial in hbar.
    NotLaurentPolynomial {
        heldout_residual: f64,
        tolerance: f64,
    },
    /// The resonant hbar power carries a non-negligible coefficient.
    ResonantTerm { coefficient: f64, tolerance: f64 },
    /// A precondition on user input was violated.
    InvalidInput(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DivisionByZero => write!(f, "division by zero"),
            Error::LogUnavailable => {
                write!(f, "natural log is not available on the exact rational backend")
            }
            Error::PoleOrderOverflow { center, order, cap } => write!(
                f,
                "principal part of order {order} at {center} exceeds the pole-order cap {cap}"
            ),
            Error::EvaluationAtPole => write!(f, "evaluation point coincides with a pole"),
            Error::NoConvergence { iterations, residual } => write!(
                f,
                "Newton did not converge after {iterations} iterations (residual {residual:.3e})"
            ),
            Error::RootCollision { min_distance } => {
                write!(f, "roots too close together (min distance {min_distance:.3e})")
            }
            Error::RootAtPotentialPole => write!(f, "a root coincides with a pole of V'"),
            Error::ExactRootsNotCertified { residual } => write!(
                f,
                "exact backend requires an exactly-zero Bethe residual; got {residual}; \
                 use a floating-point backend for this system"
            ),
            Error::SingularHessian => write!(f, "singular Hessian of the Bethe action"),
            Error::BetheConsistencyViolation { root, residual } => write!(
                f,
                "kernel ODE order-1 matching failed at root {root} (residual {residual:.3e})"
            ),
            Error::SymmetryViolation { g, n, residual } => write!(
                f,
                "W_{n}^({g}) failed the symmetry post-condition (residual {residual:.3e})"
            ),
            Error::CapExceeded { requested, cap } => {
                write!(f, "kernel order {requested} exceeds the cap {cap}")
            }
            Error::NotLaurentPolynomial { heldout_residual, tolerance } => write!(
                f,
                "free-energy integrand is not a Laurent polynomial in hbar \
                 (held-out residual {heldout_residual:.3e} > {tolerance:.3e})"
            ),
            Error::ResonantTerm { coefficient, tolerance } => write!(
                f,
                "resonant hbar power has coefficient {coefficient:.3e} (tolerance {tolerance:.3e}); \
                 refusing to integrate"
            ),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
