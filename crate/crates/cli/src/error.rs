use std::fmt;

use offtrack::Error as CoreError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const RANK: i32 = 2;
    pub const INSTABILITY: i32 = 3;
    pub const NON_CONVERGENCE: i32 = 4;
    pub const ASSUMPTION: i32 = 5;
    pub const NUMERICAL: i32 = 6;
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Assumption(Vec<String>),
    Core(CoreError),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Assumption(_) => exit::ASSUMPTION,
            CliError::Io(_) => exit::NUMERICAL,
            CliError::Core(e) => match e {
                CoreError::RankCondition { .. } | CoreError::InsufficientSamples { .. } => exit::RANK,
                CoreError::Instability { .. } => exit::INSTABILITY,
                CoreError::NonConvergence { .. } | CoreError::GradientNotConverged { .. } => {
                    exit::NON_CONVERGENCE
                }
                CoreError::Dimension(_)
                | CoreError::NotSquare { .. }
                | CoreError::NonMonicPolynomial { .. }
                | CoreError::UnstableFilter { .. }
                | CoreError::NotPositiveDefinite {
                    what: "Q" | "R", ..
                } => exit::CONFIG,
                _ => exit::NUMERICAL,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            exit::CONFIG => "config",
            exit::RANK => "rank_condition",
            exit::INSTABILITY => "instability",
            exit::NON_CONVERGENCE => "non_convergence",
            exit::ASSUMPTION => "assumption",
            _ => "numerical",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Assumption(d) => write!(f, "required conditions failed: {}", d.join("; ")),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
