use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Validation,
    Numerical,
    Io,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Validation => 2,
            Kind::Numerical => 3,
            Kind::Io => 1,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Validation,
            message: message.into(),
            path: None,
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Io,
            message: message.into(),
            path: None,
        }
    }

    pub fn at(mut self, path: &Path) -> Self {
        self.path = Some(path.to_path_buf());
        self
    }

    /// A failure to open an input, reported against its path.
    pub fn input(path: &Path, err: std::io::Error) -> Self {
        Self::validation(format!("cannot read input {}: {err}", path.display())).at(path)
    }

    /// A failure to write an output.
    pub fn output(path: &Path, err: impl fmt::Display) -> Self {
        Self::io(format!("cannot write {}: {err}", path.display())).at(path)
    }

    /// The error document printed to stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            schema: u32,
            error: &'a CliError,
        }
        serde_json::to_string(&Doc {
            schema: crate::output::SCHEMA,
            error: self,
        })
        .unwrap_or_else(|_| self.message.clone())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<daynmf::Error> for CliError {
    fn from(e: daynmf::Error) -> Self {
        let kind = if e.is_numerical() {
            Kind::Numerical
        } else if matches!(e, daynmf::Error::Io(_)) {
            Kind::Io
        } else {
            Kind::Validation
        };
        Self {
            kind,
            message: e.to_string(),
            path: None,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
