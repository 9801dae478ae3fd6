//! Orchestration behind the `coag` binary: configuration, the verification
//! suites, and the file formats of every subcommand.

pub mod commands;
pub mod config;
pub mod io;
pub mod verify;

use coag_core::error::CoagError;

#[derive(Debug)]
pub enum CliError {
    Core(CoagError),
    Io(String),
    /// A verification suite ran but missed a threshold.
    Verification(String),
    /// The solver stopped at `max_iter` without meeting its tolerances.
    NotConverged(String),
}

impl From<CoagError> for CliError {
    fn from(e: CoagError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Io(_) => "io",
            CliError::Verification(_) => "verification_failed",
            CliError::NotConverged(_) => "not_converged",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(CoagError::Config(_)) => 2,
            CliError::Core(CoagError::NonContraction { .. }) | CliError::NotConverged(_) => 3,
            CliError::Verification(_) => 4,
            _ => 1,
        }
    }

    /// `error code=<tag> reason=<message>` on one line.
    pub fn line(&self) -> String {
        let reason = match self {
            CliError::Core(e) => e.to_string(),
            CliError::Io(m) | CliError::Verification(m) | CliError::NotConverged(m) => m.clone(),
        };
        let reason = reason.split_whitespace().collect::<Vec<_>>().join(" ");
        format!("error code={} reason={reason}", self.code())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::from(CoagError::Config("x".into())).exit_code(), 2);
        let nc = CliError::from(CoagError::NonContraction { iterations: 4, ratio: 1.5 });
        assert_eq!(nc.exit_code(), 3);
        assert_eq!(CliError::Verification("x".into()).exit_code(), 4);
        assert_eq!(CliError::from(CoagError::Domain("x".into())).exit_code(), 1);
    }

    #[test]
    fn error_line_is_single_line() {
        let e = CliError::Io("bad\nfile  name".into());
        assert_eq!(e.line(), "error code=io reason=bad file name");
        let nc = CliError::from(CoagError::NonContraction { iterations: 4, ratio: 1.5 });
        assert!(nc.line().starts_with("error code=non_contraction reason="));
        assert!(nc.line().contains("1.5"));
    }
}
