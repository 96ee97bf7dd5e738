//! IO companion for the `fedcyte-core` simulation engine: CSV datasets,
//! TOML experiment configs, JSONL results, table reports, and the CLI.

pub mod config;
pub mod csv;
pub mod report;
pub mod run;

/// Process exit code for configuration errors.
pub const EXIT_CONFIG: i32 = 2;
/// Process exit code for runtime/data errors.
pub const EXIT_RUNTIME: i32 = 3;

/// Error carrying the intended process exit code.
#[derive(Debug)]
pub struct AppError {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for AppError {}

impl AppError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }
}

impl From<fedcyte_core::CoreError> for AppError {
    fn from(e: fedcyte_core::CoreError) -> Self {
        AppError::runtime(e.to_string())
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::runtime(e.to_string())
    }
}

pub type AppResult<T> = Result<T, AppError>;

/// Write a file atomically: temp file in the same directory, then rename.
pub fn atomic_write(path: &std::path::Path, contents: &[u8]) -> AppResult<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
