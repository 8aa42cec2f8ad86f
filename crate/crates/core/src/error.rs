use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("marginal must have at least 2 categories, got {0}")]
    TooFewCategories(usize),

    #[error("probability p_{index} = {value} is outside [0, 1]")]
    ProbabilityOutOfRange { index: usize, value: f64 },

    #[error("marginal sums to {sum}, expected 1 within {tolerance:e}")]
    NotNormalized { sum: f64, tolerance: f64 },

    #[error("dependency coefficient {0} is outside [0, 1]")]
    CoefficientOutOfRange(f64),

    #[error("category index {index} is outside 1..={categories}")]
    CategoryIndex { index: usize, categories: usize },

    #[error("position {index} is outside the domain {lower}..={upper}")]
    Domain { index: usize, lower: usize, upper: usize },

    #[error("generator table has no entry for n = {0}")]
    IncompleteGenerator(usize),

    #[error("generator violates 1 <= alpha(n) < n at n = {n} (alpha = {value})")]
    AxiomViolation { n: usize, value: i64 },

    #[error("enumeration of {categories}^{length} outcomes exceeds the cap of {cap}")]
    EnumerationTooLarge { categories: usize, length: usize, cap: u64 },

    #[error("positions must satisfy m < n, got m = {m}, n = {n}")]
    PositionOrder { m: usize, n: usize },

    #[error("sample batch is empty")]
    EmptyBatch,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
