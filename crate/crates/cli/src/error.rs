use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] scobul::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Unsupported(String),
    #[error("incompatible inputs: {0}")]
    Mismatch(String),
    #[error("{0}")]
    Usage(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    pub fn class(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.class(),
            CliError::Json(_) | CliError::Csv(_) => "format",
            CliError::Unsupported(_) => "unsupported",
            CliError::Mismatch(_) => "mismatch",
            CliError::Usage(_) => "usage",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.class() {
            "usage" | "config" => 2,
            "format" => 3,
            "io" => 4,
            "signal" | "scene" | "calibration" => 5,
            "silent-network" => 6,
            "mismatch" => 7,
            "unsupported" => 8,
            _ => 1,
        }
    }

    /// `error class=<class>: <message>` on a single line.
    pub fn one_line(&self) -> String {
        let msg = self.to_string().split_whitespace().collect::<Vec<_>>().join(" ");
        format!("error class={}: {}", self.class(), msg)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
