use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("value {value} at year {year} is not positive")]
    NonPositiveValue { year: f64, value: f64 },
    #[error("year is not a finite number")]
    NonFiniteYear,
    #[error("duplicate year {year}")]
    DuplicateYear { year: f64 },
    #[error("years out of order at {year}")]
    UnorderedYears { year: f64 },
    #[error("hyperbolic parameters must be positive and finite (a = {a}, k = {k})")]
    InvalidParams { a: f64, k: f64 },
    #[error("year {year} is at or past the singularity at {singularity}")]
    Singularity { year: f64, singularity: f64 },
    #[error("scale factor must be positive, got {0}")]
    BadScale(f64),
    #[error("origin {origin} is at or past the singularity at {singularity}")]
    OriginPastSingularity { origin: f64, singularity: f64 },
    #[error("malformed window {0:?}, expected LO:HI with LO < HI")]
    BadWindow(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("entity {0:?} not found")]
    EntityNotFound(String),
    #[error("entity {entity:?} appears on {count} rows")]
    EntityAmbiguous { entity: String, count: usize },
    #[error("cannot parse {text:?} as a number at row {row}, column {column}")]
    BadCell {
        row: usize,
        column: usize,
        text: String,
    },
    #[error("malformed row at line {line}: {reason}")]
    BadRow { line: usize, reason: String },
    #[error("bad year label {text:?} in column {column}")]
    BadYearLabel { column: usize, text: String },
    #[error("duplicate year {year} at line {line}")]
    DuplicateYear { year: f64, line: usize },
    #[error("table is empty")]
    Empty,
    #[error("series has {count} points, at least 3 required")]
    TooSparse { count: usize },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("xs and ys (or weights) have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("{count} points available, at least 3 required")]
    TooSparse { count: usize },
    #[error("design is singular: all x values are identical")]
    SingularDesign,
    #[error("weights must be positive and finite")]
    BadWeights,
    #[error("non-finite input value")]
    NonFinite,
    #[error("not hyperbolic growth: {0}")]
    NotHyperbolic(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("{side} the candidate year {candidate} there are {count} points, at least 3 required")]
    SideTooSparse {
        side: Side,
        candidate: f64,
        count: usize,
    },
    #[error("tail window holds {0} points, at least 2 required")]
    TailTooShort(usize),
    #[error("no candidate in the grid is testable")]
    NoViableCandidate,
    #[error("significance level must lie in (0, 0.5), got {0}")]
    BadAlpha(f64),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Before,
    After,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Before => "before",
            Side::After => "after",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid trajectory spec: {0}")]
    Spec(String),
    #[error("year {year} is not covered by any segment")]
    Uncovered { year: f64 },
    #[error("year {year} crosses the hyperbolic singularity at {singularity}")]
    CrossesSingularity { year: f64, singularity: f64 },
    #[error("at least 100 trials required, got {0}")]
    TooFewTrials(usize),
    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}
