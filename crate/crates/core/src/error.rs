use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid space descriptor: {0}")]
    InvalidSpace(String),

    #[error("wind too strong: lambda = 1 - h(W,W) = {lambda} is not positive")]
    WindTooStrong { lambda: f64 },

    #[error("not a Randers metric: |beta|_alpha = {norm} >= 1")]
    NotRanders { norm: f64 },

    #[error("fundamental tensor is undefined for the zero direction")]
    UndefinedDirection,

    #[error("unsupported wind shape: {0}")]
    UnsupportedWind(String),

    #[error("no family member realises the direction (residual {residual:e})")]
    NoMatchingField { residual: f64 },

    #[error("distance root not bracketed up to t = {upper}")]
    RootNotBracketed { upper: f64 },

    #[error("family search failed, best residual {residual:e}")]
    SearchFailed { residual: f64 },

    #[error("net graph is not strongly connected ({components} components at k = {k})")]
    GraphDisconnected { components: usize, k: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
