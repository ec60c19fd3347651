use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// `U` sits within the pole band of the Hill determinant.
    #[error("U = {u} lies within {tol:e} of the Hill determinant pole at r^2 = {pole}")]
    PoleProximity { u: f64, pole: f64, tol: f64 },

    #[error("V = {v} is outside the tabulated range [0, {v_max}]")]
    OutOfTabulation { v: f64, v_max: f64 },

    #[error("a0 slope {slope:e} is too small to locate the tangency point")]
    DegenerateSlope { slope: f64 },

    #[error("point lies outside the interpolation domain on the {axis} axis")]
    OutOfDomain { axis: char },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("grids do not share origin, spacing and dimensions")]
    GridMismatch,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no spectral peak found in the secular band")]
    NoPeak,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
