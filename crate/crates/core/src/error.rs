use thiserror::Error;

/// Pipeline stage an error originated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Layout,
    Exponents,
    DiffPanel,
    Statistic,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Layout => "layout",
            Stage::Exponents => "exponents",
            Stage::DiffPanel => "diff_panel",
            Stage::Statistic => "statistic",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("invalid price path: {0}")]
    PricePath(String),

    #[error("{stage} stage: {msg}")]
    Pipeline { stage: Stage, msg: String },

    #[error("degenerate statistic: {0}")]
    DegenerateStatistic(String),

    #[error("ingest: {0}")]
    Ingest(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn pipeline(stage: Stage, msg: impl Into<String>) -> Self {
        Error::Pipeline {
            stage,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
