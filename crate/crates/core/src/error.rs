use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in {what} at row {row}, column {col}")]
    NonFiniteValue { what: &'static str, row: usize, col: usize },
    #[error("label {label} at row {row} outside of valid range for {classes} classes")]
    LabelOutOfRange { row: usize, label: i64, classes: usize },
    #[error("class {class} has no samples in the fitting split")]
    EmptyClass { class: usize },
    #[error("invalid bundle: {0}")]
    InvalidBundle(String),
    #[error("every class denominator is within epsilon of zero")]
    AllClassesDegenerate,
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("covariance matrix is singular")]
    SingularCovariance,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("training loss diverged at epoch {epoch}")]
    DivergedLoss { epoch: usize },
    #[error("sample {index}: {source}")]
    AtSample {
        index: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_sample(self, index: usize) -> Self {
        Error::AtSample {
            index,
            source: alloc::boxed::Box::new(self),
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// The innermost error, skipping sample-index wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtSample { source, .. } => source.root(),
            other => other,
        }
    }
}
