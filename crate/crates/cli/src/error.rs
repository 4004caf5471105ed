//! Error categories and exit codes.

use std::fmt;

use kerrsim::sde::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Usage,
    Validation,
    Divergence,
    Io,
    Internal,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Usage => 2,
            Category::Validation => 3,
            Category::Divergence => 4,
            Category::Io | Category::Internal => 1,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Category::Usage => "usage",
            Category::Validation => "validation",
            Category::Divergence => "divergence",
            Category::Io => "io",
            Category::Internal => "internal",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub category: Category,
    pub detail: String,
}

impl CliError {
    pub fn new(category: Category, detail: impl Into<String>) -> Self {
        CliError {
            category,
            detail: detail.into(),
        }
    }

    pub fn usage(detail: impl Into<String>) -> Self {
        Self::new(Category::Usage, detail)
    }

    pub fn validation(detail: impl Into<String>) -> Self {
        Self::new(Category::Validation, detail)
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Self::new(Category::Io, format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.category.label(), self.detail)
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Divergence { .. } => CliError::new(Category::Divergence, e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
