use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty logits")]
    EmptyLogits,
    #[error("nonpositive class weight")]
    NonPositiveClassWeight,
    #[error("loss node must be scalar, got shape {0:?}")]
    NonScalarLoss(alloc::vec::Vec<usize>),
    #[error("non-finite function value")]
    NonFiniteValue,
    #[error("shape {shape:?} does not match {len} elements")]
    ShapeMismatch { shape: alloc::vec::Vec<usize>, len: usize },
    #[error("feature width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("stream not time-ordered")]
    StreamNotOrdered,
    #[error("too few minority samples: {have} available, need more than k = {k}")]
    TooFewMinority { have: usize, k: usize },
    #[error("both classes must be present")]
    SingleClass,
    #[error("class with {count} rows cannot be split into {k} folds")]
    ClassTooSmall { count: usize, k: usize },
    #[error("no positive labels")]
    NoPositives,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },
    #[error("expert {0} is untrained")]
    UntrainedExpert(&'static str),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
