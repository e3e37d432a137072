use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("glove line {line}: expected {expected} values, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("glove line {line}: field {field:?} is not a number")]
    NotANumber { line: usize, field: String },
    #[error("glove line {line}: non-finite value for {word:?}")]
    NonFiniteVector { line: usize, word: String },
    #[error("glove stream is empty")]
    EmptyEmbeddings,
    #[error("vocabulary word {0:?} has no pretrained vector")]
    MissingVector(String),
    #[error("token id {id} out of range for vocabulary of size {size}")]
    TokenOutOfRange { id: u32, size: usize },
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("empty sequence")]
    EmptySequence,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("length mismatch: {predictions} predictions vs {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("confusion counts total zero")]
    NoSamples,
    #[error("duplicate account id {0:?}")]
    DuplicateAccount(String),
    #[error("tweets reference unknown account ids: {}", .0.join(", "))]
    UnknownAccounts(Vec<String>),
    #[error("unknown label {value:?} on line {line}")]
    UnknownLabel { line: usize, value: String },
    #[error("requested {requested} accounts per class but only {available} available")]
    NotEnoughAccounts { requested: usize, available: usize },
}
