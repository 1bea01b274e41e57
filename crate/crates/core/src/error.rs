use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::model::GenderEncoding;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("DMP parameter {name} = {value} is outside [0, 1]")]
    DmpParamOutOfRange { name: &'static str, value: f64 },

    #[error("invalid {what} code {code:?}")]
    BadEncoding { what: &'static str, code: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{}: file contains no tokens", path.display())]
    EmptyFile { path: PathBuf },

    #[error("{}: blank line {line} inside column", path.display())]
    BlankLine { path: PathBuf, line: usize },

    #[error("column {variable}: expected {expected} tokens, found {actual}")]
    LengthMismatch {
        variable: String,
        expected: usize,
        actual: usize,
    },

    #[error("missing column {name:?}")]
    MissingColumn { name: String },

    #[error("line {line}: row has {actual} fields, header has {expected}")]
    RowArityMismatch {
        line: usize,
        expected: usize,
        actual: usize,
    },

    #[error("{}: {message}", path.display())]
    Table { path: PathBuf, message: String },

    #[error("empty {field} token")]
    EmptyToken { field: &'static str },

    #[error("{field} token {raw:?} contains a line break")]
    LineBreakInToken { field: &'static str, raw: String },

    #[error("bad age token {raw:?}")]
    BadAgeToken { raw: String },

    #[error("bad gender token {raw:?} under encoding {encoding}")]
    BadGenderToken {
        raw: String,
        encoding: GenderEncoding,
    },

    #[error("bad prefix scheme {scheme:?}: need four distinct uppercase ASCII letters")]
    BadPrefixScheme { scheme: String },

    #[error("token {token:?} contains prefix letter '{letter}'")]
    PrefixCollision { token: String, letter: char },

    #[error("malformed household key {key:?}")]
    MalformedKey { key: String },

    #[error("household has neither adults nor children")]
    EmptyHousehold,

    #[error("weights and incomes differ in length ({weights} vs {incomes}) or are empty")]
    WeightIncomeMismatch { weights: usize, incomes: usize },

    #[error("unknown income code {token:?}")]
    UnknownIncomeCode { token: String },

    #[error("bad income amount {raw:?}")]
    BadIncomeToken { raw: String },

    #[error("bad income map entry {letter:?} = {amount}")]
    BadIncomeMap { letter: String, amount: f64 },

    #[error("household key {key} reappears at line {line} after another household")]
    NonConsecutiveKey { key: String, line: usize },

    #[error("member has no income value")]
    MissingIncome,

    #[error("scale {scale} is not positive")]
    ZeroScale { scale: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("household {key}: {source}")]
    InHousehold {
        key: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn at_line(self, line: usize) -> Self {
        Error::AtLine {
            line,
            source: Box::new(self),
        }
    }

    pub fn in_household(self, key: impl Into<String>) -> Self {
        Error::InHousehold {
            key: key.into(),
            source: Box::new(self),
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, with line/household/stage annotations peeled off.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtLine { source, .. }
            | Error::InHousehold { source, .. }
            | Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// First line number found in the annotation chain.
    pub fn line(&self) -> Option<usize> {
        match self {
            Error::AtLine { line, .. } => Some(*line),
            Error::NonConsecutiveKey { line, .. } | Error::RowArityMismatch { line, .. } => {
                Some(*line)
            }
            Error::InHousehold { source, .. } | Error::Stage { source, .. } => source.line(),
            _ => None,
        }
    }

    /// Data errors exit with status 1, configuration and IO errors with status 2.
    pub fn is_data_error(&self) -> bool {
        !matches!(
            self.root(),
            Error::Io { .. }
                | Error::EmptyFile { .. }
                | Error::MissingColumn { .. }
                | Error::Config(_)
                | Error::BadEncoding { .. }
                | Error::BadPrefixScheme { .. }
                | Error::DmpParamOutOfRange { .. }
                | Error::BadIncomeMap { .. }
        )
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_data_error() {
            1
        } else {
            2
        }
    }
}
