//! Hyperbolic growth fitting and slope-change diagnostics for sparse
//! historical GDP series.
//!
//! Hyperbolic growth `S(t) = 1 / (a - k t)` has a reciprocal that is a
//! straight line, so fitting, bending detection and takeoff tests all run
//! as ordinary line regressions on `1/S`.

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod fitting;
pub mod ingest;
pub mod report;
pub mod series;
pub mod synth;

pub use diagnostics::{
    breakpoint_scan, classify_bending, classify_model, deviation_profile, gradient_change_test,
    regime_overlay_report, relative_residuals, Bending, BreakClass, BreakpointResult,
    DeviationProfile, GrowthModel, ModelVerdict, OverallDeviation, RegimeAssessment, ScanEntry,
    ScanOutcome, Verdict, REGIME_BOUNDARIES,
};
pub use error::{DiagnosticsError, FitError, IngestError, SeriesError, SynthError};
pub use fitting::{
    fit_exponential, fit_hyperbolic, fit_line, fit_quality, ExponentialFit, HyperbolicFitReport,
    LinearFit, Weighting,
};
pub use ingest::{parse_long_table, parse_table, parse_wide_table, validate_series};
pub use series::{
    log_transform, reciprocal_transform, HyperbolicParams, Observation, ObservationSeries, Space,
    TransformedSeries, YearWindow, CANONICAL_UNIT,
};
pub use synth::{
    generate, monte_carlo_rates, MonteCarloRates, NoiseSpace, NoiseSpec, TestConfig,
    TrajectoryKind, TrajectorySpec,
};
