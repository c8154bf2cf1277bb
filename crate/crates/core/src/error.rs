use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tree shape or dimension problem. `item` names the offending edge/leaf/node.
    #[error("{item}: {msg}")]
    Structure { item: String, msg: String },

    #[error("unknown map kind `{kind}` (registered kinds: {})", registered.join(", "))]
    UnknownMapKind {
        kind: String,
        registered: Vec<&'static str>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite policy output at leaf {leaf}")]
    NonFinite { leaf: String },

    #[error("singular root metric (min eigenvalue {min_eigenvalue:e}); enable regularization to solve anyway")]
    SingularMetric { min_eigenvalue: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("domain error at leaf {leaf}: {msg}")]
    Domain { leaf: String, msg: String },

    #[error("demonstration data: {0}")]
    Demo(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn structure(item: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Structure {
            item: item.into(),
            msg: msg.into(),
        }
    }

    /// True for failures of the numerics (singular metric, non-finite values,
    /// policy domain violations) as opposed to malformed inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::SingularMetric { .. }
                | Error::Degenerate(_)
                | Error::Domain { .. }
        )
    }
}
