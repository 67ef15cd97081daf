use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("range error: {what} = {value} outside [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("structural error: {0}")]
    Structural(String),

    /// Leading samples are not strictly positive, so no power-law head can be fitted.
    #[error("head model unavailable: leading values are not strictly positive")]
    HeadUnavailable,

    #[error("no condensation: total mass {total_mass} does not exceed critical mass {critical_mass}")]
    NoCondensation { total_mass: f64, critical_mass: f64 },

    #[error("blow-up suspected at t = {t}, x = {x} (density {value})")]
    BlowUp { t: f64, x: f64, value: f64 },

    #[error("step size underflow at t = {t} (dt = {dt}); problem too stiff for the requested tolerances")]
    Stiffness { t: f64, dt: f64 },

    #[error("fit window error: {0}")]
    FitWindow(String),

    #[error("degenerate fit window: {0}")]
    DegenerateWindow(String),

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("oracle error: {0}")]
    Oracle(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
