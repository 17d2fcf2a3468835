use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{}:{line}: {message}", path.display())]
    ConfigAt { path: PathBuf, line: usize, message: String },

    #[error("cannot read config {}: {source}", path.display())]
    ConfigFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cell {problem}/{method} (eps_f = {eps_f}, eps_g = {eps_g}) has no successful run")]
    EmptyCell { problem: String, method: String, eps_f: f64, eps_g: f64 },

    #[error("invalid experiment: {0}")]
    Invalid(String),

    #[error(transparent)]
    Core(#[from] spbfgs::Error),

    #[error("output error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
