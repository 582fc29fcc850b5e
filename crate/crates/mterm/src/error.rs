//! Error type shared by all modules.

/// Everything that can go wrong while evaluating the exact formulas,
/// predictors or oracles. Divergence and regime mismatches are answers about
/// the mathematical instance, not internal failures, and carry enough text
/// to report the offending parameter.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("series diverges: {0}")]
    Divergent(String),

    #[error("weight family verification failed: {0}")]
    FamilyMismatch(String),

    #[error("predictor regime mismatch: {0}")]
    RegimeMismatch(String),

    #[error("scan cap exceeded (unconfirmed supremum): {0}")]
    ScanCap(String),

    #[error("combinatorial guard exceeded: {0}")]
    Guard(String),

    #[error("tail bound cannot be certified: {0}")]
    TailCertification(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
