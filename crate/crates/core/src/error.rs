use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("spectral density is singular at omega = 0 for sigma = {sigma}")]
    Singularity { sigma: f64 },

    #[error("kubo integrand is not integrable: {0}")]
    Divergent(String),

    #[error("near-degenerate adiabatic levels {n} and {m} (gap {gap:e})")]
    Degeneracy { n: usize, m: usize, gap: f64 },

    #[error("integration failed at t = {t}: norm drift {drift:e}")]
    IntegrationFailure { t: f64, drift: f64 },

    #[error("edge guard tripped at t = {t}: weight {weight:e} within the band of the matrix edge, enlarge N")]
    EdgeGuard { t: f64, weight: f64 },

    #[error("fit window error: {0}")]
    Window(String),

    #[error("non-diffusive data: fitted D = {d} with stderr {stderr}")]
    NonDiffusive { d: f64, stderr: f64 },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Degeneracy { .. }
                | Error::IntegrationFailure { .. }
                | Error::EdgeGuard { .. }
                | Error::NonDiffusive { .. }
                | Error::Divergent(_)
        )
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        if self.is_numerical() {
            3
        } else {
            2
        }
    }
}
