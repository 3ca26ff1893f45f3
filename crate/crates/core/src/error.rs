use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}{}: {message}", name_hint(.name))]
    Parse { line: usize, name: Option<String>, message: String },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("parameter `{name}`: value {value} outside the distribution support")]
    OutOfSupport { name: String, value: f64 },

    #[error("sobol dimension {requested} exceeds the embedded direction numbers ({max})")]
    SobolDimension { requested: usize, max: usize },

    #[error("{samples} samples for {terms} unknowns; lower the order or add samples")]
    Underdetermined { samples: usize, terms: usize },

    #[error("rank-deficient regression matrix (condition estimate {condition:.3e})")]
    RankDeficient { condition: f64 },

    #[error("matrix is not positive definite (pivot {pivot}{})", duplicate_hint(.duplicate))]
    NotPositiveDefinite {
        pivot: usize,
        duplicate: Option<(usize, usize)>,
    },

    #[error("area-Mach inversion failed for area ratio {ratio}")]
    AreaMachNoRoot { ratio: f64 },

    #[error("likelihood optimisation failed: {0}")]
    Optimisation(String),
}

fn duplicate_hint(pair: &Option<(usize, usize)>) -> String {
    match pair {
        Some((i, j)) => alloc::format!(", duplicate design points {i} and {j}"),
        None => String::new(),
    }
}

fn name_hint(name: &Option<String>) -> String {
    match name {
        Some(n) => alloc::format!(" (parameter `{n}`)"),
        None => String::new(),
    }
}

pub type Result<T> = core::result::Result<T, Error>;
