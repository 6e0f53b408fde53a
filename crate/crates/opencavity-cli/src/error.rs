use std::fmt;

/// CLI failure, split by exit code: configuration problems exit 2 (with a
/// line/column diagnostic when the parser provides one), computational or
/// I/O failures exit 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Compute(msg) => write!(f, "error: {msg}"),
        }
    }
}

impl From<opencavity::Error> for CliError {
    fn from(e: opencavity::Error) -> Self {
        CliError::Compute(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Compute(format!("I/O failure: {e}"))
    }
}
