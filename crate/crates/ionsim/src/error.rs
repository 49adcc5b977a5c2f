use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("ions {0} and {1} coincide; Coulomb energy diverges")]
    CoincidentIons(usize, usize),

    #[error("trap is rotationally degenerate: |omega_x - omega_y| = {0:.3e} rad/s")]
    DegenerateTrap(f64),

    #[error("no minimization start converged (best residual force {best_residual:.3e} N)")]
    Convergence { best_residual: f64 },

    #[error("configuration is a saddle point (lowest Hessian eigenvalue {lowest_eigenvalue:.3e} N/m)")]
    SaddlePoint { lowest_eigenvalue: f64 },

    #[error("geometry is not an equilibrium (residual force {residual:.3e} N above {threshold:.3e} N)")]
    NotEquilibrium { residual: f64, threshold: f64 },

    #[error("crystal is not planar (max |z| = {deviation:.3e} m)")]
    NotPlanar { deviation: f64 },

    #[error("unstable crystal: mode {mode} has negative stiffness {eigenvalue:.3e} N/m")]
    Instability { mode: usize, eigenvalue: f64 },

    #[error("detuning {mu_hz:.1} Hz lies within the guard band of mode {mode} at {mode_hz:.1} Hz")]
    Resonance { mode: usize, mode_hz: f64, mu_hz: f64 },

    #[error("index {index} out of range (size {len})")]
    Index { index: usize, len: usize },

    #[error("empty detuning range")]
    EmptyRange,

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("step size underflow at t = {t:.6e} s (h = {h:.3e} s)")]
    StepSize { t: f64, h: f64 },

    #[error("phonon cutoff n_cut = {n_cut} too small: top-level population {population:.3e}; increase phonon_cutoff")]
    Cutoff { n_cut: usize, population: f64 },

    #[error("basis or dimension mismatch: {0}")]
    Mismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    /// Exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 3,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
