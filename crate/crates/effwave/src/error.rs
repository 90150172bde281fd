use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid of {got} samples is too small for truncation order {k_max} (need at least {needed})")]
    GridTooSmall { got: usize, k_max: usize, needed: usize },

    #[error("length mismatch in {what}: {left} vs {right}")]
    LengthMismatch { what: &'static str, left: usize, right: usize },

    #[error("non-finite value encountered in {what}")]
    NonFinite { what: &'static str },

    #[error("coefficient {what} must be uniformly positive: min sample {min:.6e} is not > 0")]
    NotUniformlyPositive { what: &'static str, min: f64 },

    #[error("{what} must be real-valued (max imaginary magnitude {imag_max:.3e})")]
    NotRealValued { what: &'static str, imag_max: f64 },

    #[error("assembled cell operator is not Hermitian (max asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("eigensolver failed to converge after {iterations} iterations (offset {offset})")]
    EigenNoConvergence { iterations: usize, offset: usize },

    #[error("zero vector has no gauge")]
    ZeroVector,

    #[error("band index {n} out of range (have {available} bands)")]
    BandOutOfRange { n: usize, available: usize },

    #[error("band {n} at theta {theta} is degenerate: gap {gap:.3e} <= tolerance {tol:.3e}; a simple eigenvalue is required")]
    NotSimple { n: usize, theta: f64, gap: f64, tol: f64 },

    #[error("band crossing inside the finite-difference stencil at theta {theta} (gap {gap:.3e})")]
    BandCrossing { theta: f64, gap: f64 },

    #[error("no bracketing interval for a critical point of band {n} near theta {theta_init}")]
    NoBracket { n: usize, theta_init: f64 },

    #[error("right-hand side violates the solvability condition: |<rhs, psi>| = {residual:.3e} > {tol:.3e}")]
    CompatibilityViolated { residual: f64, tol: f64 },

    #[error("singular linear system in {what} (pivot ratio {pivot_ratio:.3e})")]
    SingularSystem { what: &'static str, pivot_ratio: f64 },

    #[error("post-solve residual {residual:.3e} exceeds tolerance {tol:.3e} in {what}")]
    ResidualTooLarge { what: &'static str, residual: f64, tol: f64 },

    #[error("effective coefficient has a non-negligible imaginary part {imag:.3e}; this indicates a gauge or conjugation error")]
    ImaginaryResidue { imag: f64 },

    #[error("epsilon {value} is not the reciprocal of a positive integer")]
    InvalidEpsilon { value: f64 },

    #[error("spatial grid is not commensurate with the fast period: {intervals} intervals over {cells} cells (need a whole number, at least {min_per_cell}, per cell)")]
    GridNotCommensurate { intervals: usize, cells: usize, min_per_cell: usize },

    #[error("invalid time grid: horizon {t_final} is not an integer multiple of dt {dt}")]
    InvalidTimeGrid { t_final: f64, dt: f64 },

    #[error("time step must be positive, got {dt}")]
    NonPositiveTimeStep { dt: f64 },

    #[error("numerical blow-up at step {step} (t = {t:.6})")]
    NumericalBlowup { step: usize, t: f64 },

    #[error("trajectories sample different time grids ({left} vs {right} instants)")]
    TimeGridMismatch { left: usize, right: usize },

    #[error("oscillation under-resolved: {points_per_cell} grid points per fast cell (need at least {min})")]
    UnderResolved { points_per_cell: usize, min: usize },

    #[error("initial macro profile does not vanish near the domain boundary")]
    BoundarySupport,

    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error("homogenized dispersion coefficient sigma_star = {sigma_star:.6e} is not positive")]
    NonPositiveSigmaStar { sigma_star: f64 },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
