use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("missing config key {0}")]
    MissingKey(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Run(_) => 1,
            _ => 2,
        }
    }

    /// One line of JSON for stderr.
    pub fn to_json(&self) -> String {
        let mut v = json!({
            "error": match self {
                CliError::MissingKey(_) => "missing-config-key",
                CliError::Config(_) => "invalid-config",
                CliError::Usage(_) => "usage",
                CliError::Run(_) => "run-failed",
            },
            "message": self.to_string(),
        });
        if let CliError::MissingKey(k) = self {
            v["key"] = json!(k);
        }
        v.to_string()
    }
}

/// Converts any displayable error into a runtime failure.
pub fn run_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Run(e.to_string())
}
