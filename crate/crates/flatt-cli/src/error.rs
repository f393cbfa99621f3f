//! CLI error categories and their exit codes:
//! 1 validation, 2 tolerance, 3 I/O, 4 numerical failure.

use serde::Serialize;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Tolerance(String),
    Io(String),
    Numerical(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> CliError {
        CliError::Validation(msg.into())
    }

    pub fn tolerance(msg: impl Into<String>) -> CliError {
        CliError::Tolerance(msg.into())
    }

    pub fn io(msg: impl Into<String>) -> CliError {
        CliError::Io(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> CliError {
        CliError::Numerical(msg.into())
    }

    /// Map a library error to a category: expression domain failures and
    /// singular matrices are numerical failures, everything else is a
    /// validation problem with the inputs.
    pub fn from_flatt(err: flatt::Error) -> CliError {
        match err {
            flatt::Error::Eval(_) | flatt::Error::Singular { .. } => {
                CliError::Numerical(err.to_string())
            }
            other => CliError::Validation(other.to_string()),
        }
    }

    /// Like [`CliError::from_flatt`] but for call sites that only produce
    /// validation-shaped errors.
    pub fn from_validation(err: flatt::Error) -> CliError {
        CliError::Validation(err.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Tolerance(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Tolerance(_) => "tolerance",
            CliError::Io(_) => "io",
            CliError::Numerical(_) => "numerical",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m)
            | CliError::Tolerance(m)
            | CliError::Io(m)
            | CliError::Numerical(m) => m,
        }
    }

    /// Machine-readable form printed to stderr.
    pub fn to_stderr_json(&self) -> String {
        #[derive(Serialize)]
        struct Wire<'a> {
            code: i32,
            kind: &'static str,
            message: &'a str,
        }
        #[derive(Serialize)]
        struct Envelope<'a> {
            error: Wire<'a>,
        }
        serde_json::to_string(&Envelope {
            error: Wire {
                code: self.exit_code(),
                kind: self.kind(),
                message: self.message(),
            },
        })
        .expect("error serialization cannot fail")
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

impl std::error::Error for CliError {}
