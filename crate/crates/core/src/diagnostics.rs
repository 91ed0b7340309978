//! Deviation profiles, bending classification, slope-change tests at
//! candidate years, breakpoint scans, linearization model choice and the
//! regime-boundary overlay.
//!
//! All tests work on the reciprocal series `1/S`, where hyperbolic growth is
//! a straight line. Upward bending of `1/S` marks a diversion to a slower
//! trajectory, downward bending a diversion to a faster one.

use std::fmt;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{DiagnosticsError, Side};
use crate::fitting::{fit_line, HyperbolicFitReport, LinearFit};
use crate::series::{
    log_transform, reciprocal_transform, HyperbolicParams, Observation, ObservationSeries,
    TransformedSeries, YearWindow,
};

/// Default significance level for slope-change tests.
pub const DEFAULT_ALPHA: f64 = 0.01;

/// Relative residuals within this band count as consistent with the model.
pub const DEFAULT_CONSISTENCY_BAND: f64 = 0.25;

/// A local change of reciprocal gradient larger than this fraction of the
/// model gradient `k` marks a bent segment.
pub const SEGMENT_BEND_BAND: f64 = 0.5;

/// Side residual-variance ratio above which Welch-Satterthwaite degrees of
/// freedom replace `n_before + n_after - 4`.
pub const WELCH_VARIANCE_RATIO: f64 = 4.0;

/// Slope standard errors are floored at this fraction of the slope magnitude,
/// which keeps round-off from masquerading as signal on noiseless input.
const STDERR_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bending {
    Upward,
    Downward,
    Straight,
}

impl fmt::Display for Bending {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bending::Upward => "upward",
            Bending::Downward => "downward",
            Bending::Straight => "none",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OverallDeviation {
    ConsistentHyperbolic,
    SlowerDiversion,
    FasterDiversion,
    Mixed,
}

impl fmt::Display for OverallDeviation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OverallDeviation::ConsistentHyperbolic => "consistent-hyperbolic",
            OverallDeviation::SlowerDiversion => "slower-diversion",
            OverallDeviation::FasterDiversion => "faster-diversion",
            OverallDeviation::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentBending {
    /// Year of the middle point of the three-point segment.
    pub year: f64,
    pub bending: Bending,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationProfile {
    pub residuals: Vec<(f64, f64)>,
    pub segments: Vec<SegmentBending>,
    pub overall: OverallDeviation,
    pub band: f64,
}

/// `(S - S_model) / S_model` for every point in `window`.
pub fn relative_residuals(
    series: &ObservationSeries,
    params: &HyperbolicParams,
    window: YearWindow,
) -> Result<Vec<(f64, f64)>, DiagnosticsError> {
    series
        .in_window(window)
        .iter()
        .map(|p| {
            let model = params.evaluate(p.year)?;
            Ok((p.year, (p.value - model) / model))
        })
        .collect()
}

/// Residuals plus per-segment and overall bending against `params`.
///
/// Points whose relative residual exceeds `band` in magnitude are excursions;
/// the overall class is decided by the signs of the excursions.
pub fn deviation_profile(
    series: &ObservationSeries,
    params: &HyperbolicParams,
    window: YearWindow,
    band: f64,
) -> Result<DeviationProfile, DiagnosticsError> {
    let residuals = relative_residuals(series, params, window)?;
    let pts = series.in_window(window);
    let recip = reciprocal_transform(&pts)?;

    let segments = recip
        .points
        .windows(3)
        .map(|w| {
            let left = (w[1].value - w[0].value) / (w[1].year - w[0].year);
            let right = (w[2].value - w[1].value) / (w[2].year - w[1].year);
            let change = (right - left) / params.k();
            let bending = if change > SEGMENT_BEND_BAND {
                Bending::Upward
            } else if change < -SEGMENT_BEND_BAND {
                Bending::Downward
            } else {
                Bending::Straight
            };
            SegmentBending {
                year: w[1].year,
                bending,
            }
        })
        .collect();

    let above = residuals.iter().any(|(_, r)| *r > band);
    let below = residuals.iter().any(|(_, r)| *r < -band);
    let overall = match (above, below) {
        (false, false) => OverallDeviation::ConsistentHyperbolic,
        (false, true) => OverallDeviation::SlowerDiversion,
        (true, false) => OverallDeviation::FasterDiversion,
        (true, true) => OverallDeviation::Mixed,
    };
    Ok(DeviationProfile {
        residuals,
        segments,
        overall,
        band,
    })
}

/// Classifies the reciprocal points in `tail` against a baseline line.
///
/// The signed mean deviation of the tail from the baseline is compared with
/// twice the prediction standard error of that mean.
pub fn classify_bending(
    reciprocal: &TransformedSeries,
    baseline: &LinearFit,
    tail: YearWindow,
) -> Result<Bending, DiagnosticsError> {
    let pts = reciprocal.in_window(tail);
    if pts.len() < 2 {
        return Err(DiagnosticsError::TailTooShort(pts.len()));
    }
    let m = pts.len() as f64;
    let mean_dev = pts
        .iter()
        .map(|p| p.value - baseline.predict(p.year))
        .sum::<f64>()
        / m;
    let mean_year = pts.iter().map(|p| p.year).sum::<f64>() / m;
    let se = (baseline.residual_variance / m + baseline.line_variance(mean_year)).sqrt();
    let scale = pts.iter().map(|p| p.value.abs()).sum::<f64>() / m;
    let band = (2.0 * se).max(1e-9 * scale);
    Ok(if mean_dev > band {
        Bending::Upward
    } else if mean_dev < -band {
        Bending::Downward
    } else {
        Bending::Straight
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BreakClass {
    /// Reciprocal gradient significantly steeper after the candidate.
    Takeoff,
    /// Reciprocal gradient significantly shallower after the candidate.
    Slowdown,
    NoChange,
}

impl fmt::Display for BreakClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BreakClass::Takeoff => "takeoff",
            BreakClass::Slowdown => "slowdown",
            BreakClass::NoChange => "no-change",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreakpointResult {
    pub candidate_year: f64,
    pub gradient_before: f64,
    pub gradient_after: f64,
    pub delta: f64,
    pub t_statistic: f64,
    pub dof: f64,
    /// Welch-Satterthwaite degrees of freedom were used.
    pub welch: bool,
    pub p_value: f64,
    pub alpha: f64,
    pub classification: BreakClass,
    pub n_before: usize,
    pub n_after: usize,
    pub fit_before: LinearFit,
    pub fit_after: LinearFit,
}

fn check_alpha(alpha: f64) -> Result<(), DiagnosticsError> {
    if alpha > 0.0 && alpha < 0.5 {
        Ok(())
    } else {
        Err(DiagnosticsError::BadAlpha(alpha))
    }
}

fn side_fit(
    pts: &[Observation],
    side: Side,
    candidate: f64,
) -> Result<LinearFit, DiagnosticsError> {
    if pts.len() < 3 {
        return Err(DiagnosticsError::SideTooSparse {
            side,
            candidate,
            count: pts.len(),
        });
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.year).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.value).collect();
    Ok(fit_line(&xs, &ys, None)?)
}

/// Two-sided p-value of `t` under Student's t with `dof` degrees of freedom.
fn two_sided_p(t: f64, dof: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

/// Tests whether the reciprocal gradient changes at `candidate_year`.
///
/// Separate lines are fitted to the in-window reciprocal points strictly
/// before and strictly after the candidate; a point exactly at the candidate
/// belongs to neither side.
pub fn gradient_change_test(
    series: &ObservationSeries,
    candidate_year: f64,
    window: YearWindow,
    alpha: f64,
) -> Result<BreakpointResult, DiagnosticsError> {
    check_alpha(alpha)?;
    let recip = reciprocal_transform(&series.in_window(window))?;
    let before: Vec<Observation> = recip
        .points
        .iter()
        .copied()
        .filter(|p| p.year < candidate_year)
        .collect();
    let after: Vec<Observation> = recip
        .points
        .iter()
        .copied()
        .filter(|p| p.year > candidate_year)
        .collect();
    let fit_before = side_fit(&before, Side::Before, candidate_year)?;
    let fit_after = side_fit(&after, Side::After, candidate_year)?;

    let delta = fit_after.slope - fit_before.slope;
    let v_before = fit_before.slope_stderr.powi(2);
    let v_after = fit_after.slope_stderr.powi(2);
    let floor = STDERR_FLOOR * fit_before.slope.abs().max(fit_after.slope.abs());
    let se = (v_before + v_after).sqrt().max(floor);

    let (s_lo, s_hi) = {
        let (a, b) = (fit_before.residual_variance, fit_after.residual_variance);
        (a.min(b), a.max(b))
    };
    let welch = s_hi > 0.0 && (s_lo == 0.0 || s_hi / s_lo > WELCH_VARIANCE_RATIO);
    let pooled_dof = (before.len() + after.len() - 4) as f64;
    let dof = if welch && v_before + v_after > 0.0 {
        let df_b = (before.len() - 2) as f64;
        let df_a = (after.len() - 2) as f64;
        let ws = (v_before + v_after).powi(2) / (v_before.powi(2) / df_b + v_after.powi(2) / df_a);
        ws.clamp(1.0, pooled_dof)
    } else {
        pooled_dof
    };

    let t_statistic = if se > 0.0 {
        delta / se
    } else if delta == 0.0 {
        0.0
    } else {
        delta.signum() * f64::INFINITY
    };
    let p_value = two_sided_p(t_statistic, dof);
    let classification = if p_value >= alpha {
        BreakClass::NoChange
    } else if fit_after.slope < fit_before.slope {
        BreakClass::Takeoff
    } else {
        BreakClass::Slowdown
    };
    Ok(BreakpointResult {
        candidate_year,
        gradient_before: fit_before.slope,
        gradient_after: fit_after.slope,
        delta,
        t_statistic,
        dof,
        welch,
        p_value,
        alpha,
        classification,
        n_before: before.len(),
        n_after: after.len(),
        fit_before,
        fit_after,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScanOutcome {
    Tested {
        result: BreakpointResult,
        /// Significant at `alpha / m`, `m` being the number of tested candidates.
        bonferroni_significant: bool,
    },
    Untestable {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanEntry {
    pub candidate_year: f64,
    pub outcome: ScanOutcome,
}

impl ScanEntry {
    pub fn result(&self) -> Option<&BreakpointResult> {
        match &self.outcome {
            ScanOutcome::Tested { result, .. } => Some(result),
            ScanOutcome::Untestable { .. } => None,
        }
    }
}

/// Runs [`gradient_change_test`] at every candidate, ordered by year.
///
/// Candidates without three points on each side are reported as untestable;
/// the scan fails only when no candidate is testable.
pub fn breakpoint_scan(
    series: &ObservationSeries,
    candidates: &[f64],
    window: YearWindow,
    alpha: f64,
) -> Result<Vec<ScanEntry>, DiagnosticsError> {
    check_alpha(alpha)?;
    let mut grid = candidates.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let outcomes: Vec<Result<BreakpointResult, DiagnosticsError>> = grid
        .par_iter()
        .map(|&year| gradient_change_test(series, year, window, alpha))
        .collect();

    let tested = outcomes.iter().filter(|o| o.is_ok()).count();
    if tested == 0 {
        return Err(DiagnosticsError::NoViableCandidate);
    }
    let adjusted = alpha / tested as f64;
    grid.into_iter()
        .zip(outcomes)
        .map(|(candidate_year, outcome)| {
            let outcome = match outcome {
                Ok(result) => ScanOutcome::Tested {
                    bonferroni_significant: result.p_value < adjusted,
                    result,
                },
                Err(e @ DiagnosticsError::SideTooSparse { .. }) => ScanOutcome::Untestable {
                    reason: e.to_string(),
                },
                Err(e) => return Err(e),
            };
            Ok(ScanEntry {
                candidate_year,
                outcome,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GrowthModel {
    Hyperbolic,
    Exponential,
}

impl fmt::Display for GrowthModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GrowthModel::Hyperbolic => "hyperbolic",
            GrowthModel::Exponential => "exponential",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelVerdict {
    pub choice: GrowthModel,
    pub r2_reciprocal: f64,
    pub r2_log: f64,
}

/// Picks the linearization (`1/S` or `ln S`) with the higher r².
/// Ties go to the exponential reading.
pub fn classify_model(
    series: &ObservationSeries,
    window: YearWindow,
) -> Result<ModelVerdict, DiagnosticsError> {
    let pts = series.in_window(window);
    let recip = reciprocal_transform(&pts)?;
    let logs = log_transform(&pts)?;
    let r2_reciprocal = fit_line(&recip.years(), &recip.values(), None)?.r2;
    let r2_log = fit_line(&logs.years(), &logs.values(), None)?.r2;
    let choice = if r2_reciprocal > r2_log {
        GrowthModel::Hyperbolic
    } else {
        GrowthModel::Exponential
    };
    Ok(ModelVerdict {
        choice,
        r2_reciprocal,
        r2_log,
    })
}

/// A postulated regime boundary whose claim is an acceleration of growth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeBoundary {
    pub year: f64,
    pub label: &'static str,
}

/// Regime boundary years of the three-regime account of long-run growth.
pub const REGIME_BOUNDARIES: [RegimeBoundary; 3] = [
    RegimeBoundary {
        year: 1750.0,
        label: "end of Malthusian stagnation (developed countries)",
    },
    RegimeBoundary {
        year: 1870.0,
        label: "onset of sustained growth (developed countries)",
    },
    RegimeBoundary {
        year: 1900.0,
        label: "onset of post-Malthusian growth (less-developed countries)",
    },
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Supported,
    Contradicted,
    Untestable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Supported => "Supported",
            Verdict::Contradicted => "Contradicted",
            Verdict::Untestable => "Untestable",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeEntry {
    pub boundary: RegimeBoundary,
    pub test: Option<BreakpointResult>,
    pub bending: Option<Bending>,
    pub verdict: Verdict,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeAssessment {
    pub window: YearWindow,
    pub alpha: f64,
    pub entries: Vec<RegimeEntry>,
}

/// Tests each regime boundary for a takeoff inside the fit's window.
///
/// A boundary is Supported only when the slope-change test reports a
/// significant takeoff and the post-boundary reciprocal values bend downward
/// from the pre-boundary line; otherwise it is Contradicted.
pub fn regime_overlay_report(
    series: &ObservationSeries,
    fit: &HyperbolicFitReport,
    alpha: f64,
) -> Result<RegimeAssessment, DiagnosticsError> {
    check_alpha(alpha)?;
    let window = fit.window;
    let recip = reciprocal_transform(&series.in_window(window))?;
    let entries = REGIME_BOUNDARIES
        .iter()
        .map(|&boundary| {
            let test = match gradient_change_test(series, boundary.year, window, alpha) {
                Ok(t) => t,
                Err(e @ DiagnosticsError::SideTooSparse { .. }) => {
                    return Ok(RegimeEntry {
                        boundary,
                        test: None,
                        bending: None,
                        verdict: Verdict::Untestable,
                        note: Some(e.to_string()),
                    })
                }
                Err(e) => return Err(e),
            };
            let tail = YearWindow {
                lo: Some(boundary.year),
                hi: window.hi,
            };
            let bending = classify_bending(&recip, &test.fit_before, tail)?;
            let verdict =
                if test.classification == BreakClass::Takeoff && bending == Bending::Downward {
                    Verdict::Supported
                } else {
                    Verdict::Contradicted
                };
            Ok(RegimeEntry {
                boundary,
                test: Some(test),
                bending: Some(bending),
                verdict,
                note: None,
            })
        })
        .collect::<Result<Vec<_>, DiagnosticsError>>()?;
    Ok(RegimeAssessment {
        window,
        alpha,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::{fit_hyperbolic, Weighting};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn asia() -> HyperbolicParams {
        HyperbolicParams::new(2.493e-2, 1.238e-5).unwrap()
    }

    fn model_series(
        p: &HyperbolicParams,
        years: impl IntoIterator<Item = f64>,
    ) -> ObservationSeries {
        ObservationSeries::from_pairs(
            "model",
            years.into_iter().map(|t| (t, p.evaluate(t).unwrap())),
        )
        .unwrap()
    }

    fn grid() -> Vec<f64> {
        (0..=95).map(|i| 1000.0 + 10.0 * i as f64).collect()
    }

    #[test]
    fn exact_model_has_zero_residuals() {
        let p = asia();
        let s = model_series(&p, grid());
        let prof = deviation_profile(&s, &p, YearWindow::ALL, DEFAULT_CONSISTENCY_BAND).unwrap();
        assert!(prof.residuals.iter().all(|(_, r)| r.abs() < 1e-12));
        assert_eq!(prof.overall, OverallDeviation::ConsistentHyperbolic);
        assert!(prof.segments.iter().all(|s| s.bending == Bending::Straight));
    }

    #[test]
    fn boosted_tail_residuals() {
        let p = asia();
        let years: Vec<f64> = (0..=40).map(|i| 1800.0 + 5.0 * i as f64).collect();
        let s = ObservationSeries::from_pairs(
            "boost",
            years.iter().map(|&t| {
                let bump = if t > 1950.0 { 1.5 } else { 1.0 };
                (t, p.evaluate(t).unwrap() * bump)
            }),
        )
        .unwrap();
        let r = relative_residuals(&s, &p, YearWindow::ALL).unwrap();
        for (t, res) in &r {
            let expected = if *t > 1950.0 { 0.5 } else { 0.0 };
            assert!((res - expected).abs() < 1e-12);
        }
        let prof = deviation_profile(&s, &p, YearWindow::ALL, DEFAULT_CONSISTENCY_BAND).unwrap();
        assert_eq!(prof.overall, OverallDeviation::FasterDiversion);
        // The jump at 1950 shows up as a downward kink of 1/S.
        assert!(prof
            .segments
            .iter()
            .any(|s| s.year == 1950.0 && s.bending == Bending::Downward));
    }

    #[test]
    fn residuals_fail_past_singularity() {
        let p = asia();
        let s = ObservationSeries::from_pairs("x", [(1000.0, 80.0), (2020.0, 5e4)]).unwrap();
        assert!(matches!(
            relative_residuals(&s, &p, YearWindow::ALL),
            Err(DiagnosticsError::Series(_))
        ));
    }

    fn baseline_and_recip(tail_factor: f64) -> (TransformedSeries, LinearFit) {
        let p = asia();
        let years = grid();
        let s = ObservationSeries::from_pairs(
            "x",
            years.iter().map(|&t| {
                let f = if t > 1800.0 { tail_factor } else { 1.0 };
                (t, p.evaluate(t).unwrap() * f)
            }),
        )
        .unwrap();
        let recip = reciprocal_transform(s.points()).unwrap();
        let base: Vec<_> = recip.points.iter().filter(|q| q.year <= 1800.0).collect();
        let xs: Vec<f64> = base.iter().map(|q| q.year).collect();
        let ys: Vec<f64> = base.iter().map(|q| q.value).collect();
        (recip, fit_line(&xs, &ys, None).unwrap())
    }

    #[test]
    fn bending_cases() {
        let tail = YearWindow {
            lo: Some(1801.0),
            hi: None,
        };
        let (recip, base) = baseline_and_recip(1.0);
        assert_eq!(
            classify_bending(&recip, &base, tail).unwrap(),
            Bending::Straight
        );
        // Slower trajectory: values below the hyperbola, reciprocals above.
        let (recip, base) = baseline_and_recip(0.9);
        assert_eq!(
            classify_bending(&recip, &base, tail).unwrap(),
            Bending::Upward
        );
        let (recip, base) = baseline_and_recip(1.1);
        assert_eq!(
            classify_bending(&recip, &base, tail).unwrap(),
            Bending::Downward
        );
        let empty = YearWindow {
            lo: Some(5000.0),
            hi: None,
        };
        assert_eq!(
            classify_bending(&recip, &base, empty),
            Err(DiagnosticsError::TailTooShort(0))
        );
    }

    #[test]
    fn noiseless_hyperbola_has_no_break() {
        let p = asia();
        let s = model_series(&p, grid());
        for cand in [1100.0, 1500.0, 1750.0, 1870.0, 1900.0] {
            let r = gradient_change_test(&s, cand, YearWindow::ALL, 0.01).unwrap();
            assert!(r.delta.abs() <= 1e-10, "{}", r.delta);
            assert!(r.delta.abs() <= 1e-10 * p.k());
            assert_eq!(r.classification, BreakClass::NoChange);
        }
    }

    #[test]
    fn doubled_slope_is_a_takeoff() {
        // Reciprocal slope doubles in magnitude after 1900, continuously.
        let p = asia();
        let years: Vec<f64> = (0..=100).map(|i| 1850.0 + i as f64).collect();
        let r1900 = p.reciprocal_line(1900.0);
        let s = ObservationSeries::from_pairs(
            "takeoff",
            years.iter().map(|&t| {
                let r = if t <= 1900.0 {
                    p.reciprocal_line(t)
                } else {
                    r1900 - 2.0 * p.k() * (t - 1900.0)
                };
                (t, 1.0 / r)
            }),
        )
        .unwrap();
        let r = gradient_change_test(&s, 1900.0, YearWindow::ALL, 0.01).unwrap();
        assert_eq!(r.classification, BreakClass::Takeoff);
        assert!((r.delta + p.k()).abs() < 1e-12);
        assert_eq!(r.p_value, 0.0);
    }

    #[test]
    fn sparse_side_is_named() {
        let p = asia();
        let s = model_series(&p, [1000.0, 1200.0, 1400.0, 1600.0, 1800.0, 1900.0]);
        match gradient_change_test(&s, 1850.0, YearWindow::ALL, 0.01) {
            Err(DiagnosticsError::SideTooSparse { side, count, .. }) => {
                assert_eq!(side, Side::After);
                assert_eq!(count, 1);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            gradient_change_test(&s, 1100.0, YearWindow::ALL, 0.01),
            Err(DiagnosticsError::SideTooSparse {
                side: Side::Before,
                ..
            })
        ));
        assert_eq!(
            gradient_change_test(&s, 1500.0, YearWindow::ALL, 0.7),
            Err(DiagnosticsError::BadAlpha(0.7))
        );
    }

    #[test]
    fn null_calibration_with_reciprocal_noise() {
        let p = asia();
        let years: Vec<f64> = (0..=80).map(|i| 1860.0 + i as f64).collect();
        let noise = Normal::new(0.0, 2e-5).unwrap();
        let trials = 2000;
        for alpha in [0.05, 0.01] {
            let mut rejections = 0;
            for seed in 0..trials {
                let mut rng = ChaCha8Rng::seed_from_u64(77 + seed);
                let s = ObservationSeries::from_pairs(
                    "null",
                    years
                        .iter()
                        .map(|&t| (t, 1.0 / (p.reciprocal_line(t) + noise.sample(&mut rng)))),
                )
                .unwrap();
                let r = gradient_change_test(&s, 1900.0, YearWindow::ALL, alpha).unwrap();
                if r.classification != BreakClass::NoChange {
                    rejections += 1;
                }
            }
            let rate = rejections as f64 / trials as f64;
            assert!(rate <= alpha + 0.01, "alpha {alpha}: {rate}");
        }
    }

    #[test]
    fn scan_orders_and_flags() {
        let p = asia();
        let s = model_series(&p, grid());
        let scan =
            breakpoint_scan(&s, &[1900.0, 1100.0, 1500.0, 1010.0], YearWindow::ALL, 0.01).unwrap();
        let years: Vec<f64> = scan.iter().map(|e| e.candidate_year).collect();
        assert_eq!(years, vec![1010.0, 1100.0, 1500.0, 1900.0]);
        assert!(matches!(scan[0].outcome, ScanOutcome::Untestable { .. }));
        for e in &scan[1..] {
            match &e.outcome {
                ScanOutcome::Tested {
                    result,
                    bonferroni_significant,
                } => {
                    assert_eq!(result.classification, BreakClass::NoChange);
                    assert!(!bonferroni_significant);
                }
                other => panic!("{other:?}"),
            }
        }
        assert_eq!(
            breakpoint_scan(&s, &[1001.0, 1935.0], YearWindow::ALL, 0.01),
            Err(DiagnosticsError::NoViableCandidate)
        );
    }

    #[test]
    fn model_choice_on_ten_fold_growth() {
        // Hyperbola from S = 100 to S = 1000 and exponential over the same
        // span and range.
        let p = HyperbolicParams::new(0.01, 0.009 / 900.0).unwrap();
        let years: Vec<f64> = (0..=30).map(|i| 30.0 * i as f64).collect();
        let h = model_series(&p, years.clone());
        assert!((h.points().last().unwrap().value - 1000.0).abs() < 1e-6);
        let v = classify_model(&h, YearWindow::ALL).unwrap();
        assert_eq!(v.choice, GrowthModel::Hyperbolic);
        assert!(v.r2_reciprocal > v.r2_log);

        let rate = 10.0f64.ln() / 900.0;
        let e = ObservationSeries::from_pairs(
            "exp",
            years.iter().map(|&t| (t, 100.0 * (rate * t).exp())),
        )
        .unwrap();
        let v = classify_model(&e, YearWindow::ALL).unwrap();
        assert_eq!(v.choice, GrowthModel::Exponential);
        assert!(v.r2_log > v.r2_reciprocal);
    }

    #[test]
    fn overlay_on_noiseless_hyperbola_contradicts_all() {
        let p = asia();
        let s = model_series(&p, grid());
        let fit = fit_hyperbolic(&s, YearWindow::new(1000.0, 1950.0), Weighting::Uniform).unwrap();
        let report = regime_overlay_report(&s, &fit, 0.01).unwrap();
        assert_eq!(report.entries.len(), 3);
        for e in &report.entries {
            assert_eq!(e.verdict, Verdict::Contradicted);
            assert_eq!(e.bending, Some(Bending::Straight));
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn slower_tail_never_bends_downward(
                factors in proptest::collection::vec(0.5f64..0.999, 2..10),
                wiggle in proptest::collection::vec(-0.02f64..0.02, 20),
            ) {
                let p = asia();
                let mut pts: Vec<(f64, f64)> = wiggle.iter().enumerate()
                    .map(|(i, w)| { let t = 1000.0 + 40.0 * i as f64; (t, p.evaluate(t).unwrap() * (1.0 + w)) })
                    .collect();
                for (j, f) in factors.iter().enumerate() {
                    let t = 1800.0 + 10.0 * (j + 1) as f64;
                    pts.push((t, p.evaluate(t).unwrap() * f));
                }
                let s = ObservationSeries::from_pairs("p", pts).unwrap();
                let recip = reciprocal_transform(s.points()).unwrap();
                let base: Vec<_> = recip.points.iter().filter(|q| q.year <= 1800.0).collect();
                let xs: Vec<f64> = base.iter().map(|q| q.year).collect();
                // Baseline is the true hyperbola's reciprocal line.
                let ys: Vec<f64> = xs.iter().map(|&t| p.reciprocal_line(t)).collect();
                let line = fit_line(&xs, &ys, None).unwrap();
                let tail = YearWindow { lo: Some(1801.0), hi: None };
                prop_assert_ne!(classify_bending(&recip, &line, tail).unwrap(), Bending::Downward);
            }

            #[test]
            fn model_choice_is_invariant(
                c in prop::sample::select(vec![1e-3, 1.0, 1e3]),
                t0 in prop::sample::select(vec![0.0, 1000.0, 1970.0]),
                wiggle in proptest::collection::vec(-0.1f64..0.1, 10..30),
            ) {
                let p = asia();
                let n = wiggle.len();
                let s = ObservationSeries::from_pairs("p", wiggle.iter().enumerate().map(|(i, w)| {
                    let t = 1000.0 + 950.0 * i as f64 / n as f64;
                    (t, p.evaluate(t).unwrap() * (1.0 + w))
                })).unwrap();
                let base = classify_model(&s, YearWindow::ALL).unwrap();
                let moved = classify_model(&s.scaled(c).unwrap().shifted(t0).unwrap(), YearWindow::ALL).unwrap();
                prop_assert_eq!(base.choice, moved.choice);
            }
        }
    }
}
