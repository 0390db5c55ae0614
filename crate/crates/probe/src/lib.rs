//! Workbench for the cavity-probed junction: JSON experiment configs,
//! figure presets, a runner dispatching to the core library, and CSV/JSON
//! result bundles.

pub mod config;
pub mod output;
pub mod presets;
pub mod run;

use std::path::PathBuf;

pub use config::ExperimentConfig;
pub use run::{run, validate, ResultBundle, ValidationReport};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "PROBE_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum ProbeError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("numerical fault in {module}: {source}")]
    Numerical {
        module: &'static str,
        #[source]
        source: bjj_probe::Error,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ProbeError {
    /// 1 schema, 2 numerical, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            ProbeError::Schema(_) => 1,
            ProbeError::Numerical { .. } => 2,
            ProbeError::Io { .. } => 3,
        }
    }

    pub(crate) fn numerical(module: &'static str) -> impl FnOnce(bjj_probe::Error) -> Self {
        move |source| ProbeError::Numerical { module, source }
    }
}

/// Configures the global thread pool from `PROBE_THREADS`, if set. Results
/// do not depend on the thread count.
pub fn init_threads() -> Result<usize, ProbeError> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| ProbeError::Schema(format!("{THREADS_ENV}: expected a positive integer, got `{v}`")))?;
        if n == 0 {
            return Err(ProbeError::Schema(format!("{THREADS_ENV}: must be >= 1")));
        }
        // a pool that is already built keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(rayon::current_num_threads())
}
