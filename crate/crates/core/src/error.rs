use thiserror::Error;

/// Errors raised by the geometry, integration and I/O layers.
#[derive(Debug, Error)]
pub enum HmcfError {
    #[error("invalid immersion: {0}")]
    InvalidImmersion(String),

    #[error("non-finite value in field `{field}` at grid point {index}")]
    NonFiniteField { field: &'static str, index: usize },

    #[error("metric degenerate at grid point {index}: det = {det:e}")]
    MetricDegenerate { index: usize, det: f64 },

    #[error("degenerate tangent frame at grid point {index}")]
    DegenerateFrame { index: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("collapse detected at t = {t}: det g = {det:e}")]
    CollapseDetected { t: f64, det: f64 },

    #[error("curvature blow-up at t = {t}: max |H| = {h_max:e}")]
    BlowUpDetected { t: f64, h_max: f64 },

    #[error("diffeomorphism degenerate at grid point {index}: jacobian = {jacobian:e}")]
    DiffeoDegenerate { index: usize, jacobian: f64 },

    #[error("light cone violation at grid point {index}: |X_t|^2 = {speed_sq}")]
    LightConeViolation { index: usize, speed_sq: f64 },

    #[error("Gauss identity mismatch: |lap X - H n| = {residual:e} exceeds {bound:e}")]
    GaussMismatch { residual: f64, bound: f64 },

    #[error("mesh parse error at line {line}: {msg}")]
    MeshParse { line: usize, msg: String },

    #[error("invalid configuration:\n{0}")]
    Config(#[from] crate::config::ConfigErrors),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = HmcfError> = std::result::Result<T, E>;
