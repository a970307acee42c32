use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("internal space mismatch: {0}")]
    DescriptorMismatch(String),
    #[error("invalid internal space: {0}")]
    InvalidDescriptor(String),
    #[error("invalid scheme: {0}")]
    InvalidScheme(String),
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("window is not precompact")]
    NotPrecompact,
    #[error("enumeration needs {candidates} candidates, limit is {limit}")]
    EnumerationOverflow { candidates: u128, limit: u128 },
    #[error("query outside the certified range: {0}")]
    OutOfCertifiedRange(String),
    #[error("the translation vector must be nonzero")]
    ZeroVector,
    #[error("commensurability undecided up to bound {bound}")]
    CommensurabilityUnknown { bound: u64 },
    #[error("certification failed: {reason}")]
    CertificationFailed { reason: String, witness: Option<String> },
    #[error("map is not injective on the lattice: kernel vector {kernel:?}")]
    NotInjective { kernel: Vec<i64> },
    #[error("scheme is not a translation extension")]
    NotTranslationExtension,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("witness violated: {0}")]
    WitnessViolated(String),
    #[error("box not covered after {iterations} substitution iterations")]
    NotCovered { iterations: usize },
    #[error("search exhausted: {0}")]
    Exhausted(String),
    #[error("box mismatch: {0}")]
    BoxMismatch(String),
}
