use thiserror::Error;

/// Errors raised while parsing, validating or evaluating a model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("syntax error at offset {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("division is not supported in linear expressions (offset {position})")]
    Division { position: usize },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("expected exactly one relation symbol (<=, >=, =), found {0}")]
    MultipleRelations(usize),

    #[error("malformed document: {0}")]
    DocumentMalformed(String),

    #[error("duplicate name `{0}`")]
    DuplicateName(String),

    #[error("invalid variable `{name}`: {reason}")]
    InvalidVariable { name: String, reason: String },

    #[error("no value assigned to `{0}`")]
    MissingAssignment(String),

    #[error("{section}: {source}")]
    InSection {
        section: String,
        #[source]
        source: Box<ModelError>,
    },
}

impl ModelError {
    pub(crate) fn in_section(self, section: impl Into<String>) -> Self {
        ModelError::InSection {
            section: section.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with section wrappers removed.
    pub fn root(&self) -> &ModelError {
        match self {
            ModelError::InSection { source, .. } => source.root(),
            other => other,
        }
    }

    /// Document section (`constraints[1]`, `objective`, ...) the error was raised in.
    pub fn section(&self) -> Option<&str> {
        match self {
            ModelError::InSection { section, .. } => Some(section),
            _ => None,
        }
    }
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;
