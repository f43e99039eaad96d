//! Process exit codes and single-line error reporting.

use forchms_core::error::Error;

pub const EXIT_SOLVER: u8 = 1;
pub const EXIT_INPUT: u8 = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn solver(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_SOLVER,
            message: message.into(),
        }
    }

    /// `error[<kind>]: <message>` on one line.
    pub fn line(&self) -> String {
        let kind = if self.code == EXIT_INPUT { "input" } else { "solver" };
        let msg: String = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        format!("error[{kind}]: {msg}")
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::InvalidArgument(_)
            | Error::Format { .. }
            | Error::Domain(_)
            | Error::Configuration(_)
            | Error::Io { .. }
            | Error::DegenerateElement { .. }
            | Error::SingularCorner { .. } => Failure::input(message),
            _ => Failure::solver(message),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_and_single_line() {
        let f: Failure = Error::Io {
            path: "a/b.txt".into(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "gone\nreally"),
        }
        .into();
        assert_eq!(f.code, EXIT_INPUT);
        assert!(!f.line().contains('\n'));
        assert!(f.line().contains("a/b.txt"));
        let f: Failure = Error::Singular("x".into()).into();
        assert_eq!(f.code, EXIT_SOLVER);
    }
}
