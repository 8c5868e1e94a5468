use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;
pub const EXIT_IO: i32 = 5;
/// Solver failures that are neither infeasibility nor bad input.
pub const EXIT_INTERNAL: i32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigErrorKind {
    /// Not valid TOML.
    Parse,
    /// Valid TOML with missing, unknown or mistyped keys.
    Schema,
    /// Well-formed values that break a model invariant.
    Invariant,
}

impl fmt::Display for ConfigErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Parse => "parse error",
            Self::Schema => "schema violation",
            Self::Invariant => "invariant violation",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{origin}{}: {kind}: {message}", line.map(|l| format!(":{l}")).unwrap_or_default())]
pub struct ConfigError {
    pub origin: String,
    /// 1-based line of the offending value, when known.
    pub line: Option<usize>,
    pub kind: ConfigErrorKind,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("verification failed: {0}")]
    Verify(String),

    #[error("sweep aborted: {0}")]
    Tradeoff(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Solver(#[from] linksched::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Infeasible(_) => EXIT_INFEASIBLE,
            Self::Verify(_) | Self::Tradeoff(_) => EXIT_VERIFY,
            Self::Io { .. } => EXIT_IO,
            Self::Solver(linksched::Error::Infeasible { .. }) => EXIT_INFEASIBLE,
            Self::Solver(_) => EXIT_INTERNAL,
        }
    }
}
