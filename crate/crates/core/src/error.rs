use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("zero denominator")]
    ZeroDenominator,

    #[error("division by zero")]
    DivisionByZero,

    #[error("cannot parse rational {input:?} at position {position}: {reason}")]
    Parse {
        input: String,
        position: usize,
        reason: &'static str,
    },

    #[error("not a sub-multiset: {sub} is not contained in {sup}")]
    NotSubMultiset { sub: String, sup: String },

    #[error("⇀ domain clash on bidder {0}")]
    DomainClash(u64),

    #[error("rule undefined on this arity: {rule} needs at least {min} bids, got {got}")]
    ArityUndefined {
        rule: String,
        min: usize,
        got: usize,
    },

    #[error("rule undefined at this bid vector: {rule} at {bids}")]
    UndefinedAt { rule: String, bids: String },

    #[error("unknown rule name {0:?}")]
    UnknownRule(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("i1,i2 must be fresh and distinct (i1 = {i1}, i2 = {i2})")]
    BidderIds { i1: u64, i2: u64 },

    #[error("Lemma 1 hypotheses fail at member {member}: {reason}")]
    HypothesesFail { member: String, reason: String },

    #[error("iteration step {step} failed: {detail}")]
    Iteration { step: usize, detail: String },

    #[error("corollary precondition fails for bidder {bidder}: {reason}")]
    Corollary { bidder: u64, reason: String },

    #[error("missing payment value for multiset {0}")]
    MissingPayment(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid JSON: {0}")]
    Json(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
