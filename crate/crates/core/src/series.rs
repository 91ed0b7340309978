//! Observation series, the hyperbolic model `S(t) = 1 / (a - k t)` and the
//! reciprocal / log transforms that linearize hyperbolic and exponential
//! growth respectively.

use std::fmt;

use crate::error::SeriesError;

/// Canonical unit for GDP values held in an [`ObservationSeries`].
pub const CANONICAL_UNIT: &str = "billions of 1990 International Geary-Khamis dollars";

/// One `(year, value)` pair. Years are calendar years AD as reals (AD 1 = 1.0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub year: f64,
    pub value: f64,
}

impl Observation {
    pub fn new(year: f64, value: f64) -> Self {
        Self { year, value }
    }
}

/// An ordered GDP series for a single entity.
///
/// Years are strictly increasing and every value is finite and positive.
/// Fitting operations additionally require at least three points, but the
/// series itself may be shorter.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    entity: String,
    unit: String,
    points: Vec<Observation>,
}

impl ObservationSeries {
    pub fn new(
        entity: impl Into<String>,
        unit: impl Into<String>,
        points: Vec<Observation>,
    ) -> Result<Self, SeriesError> {
        for p in &points {
            if !p.year.is_finite() {
                return Err(SeriesError::NonFiniteYear);
            }
            if !p.value.is_finite() || p.value <= 0.0 {
                return Err(SeriesError::NonPositiveValue {
                    year: p.year,
                    value: p.value,
                });
            }
        }
        for w in points.windows(2) {
            if w[1].year == w[0].year {
                return Err(SeriesError::DuplicateYear { year: w[1].year });
            }
            if w[1].year < w[0].year {
                return Err(SeriesError::UnorderedYears { year: w[1].year });
            }
        }
        Ok(Self {
            entity: entity.into(),
            unit: unit.into(),
            points,
        })
    }

    /// Builds a series in the canonical unit from `(year, value)` pairs.
    pub fn from_pairs(
        entity: impl Into<String>,
        pairs: impl IntoIterator<Item = (f64, f64)>,
    ) -> Result<Self, SeriesError> {
        let points = pairs
            .into_iter()
            .map(|(year, value)| Observation::new(year, value))
            .collect();
        Self::new(entity, CANONICAL_UNIT, points)
    }

    pub fn entity(&self) -> &str {
        &self.entity
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn points(&self) -> &[Observation] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn years(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.year).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    /// Points whose year lies in `window`, in order.
    pub fn in_window(&self, window: YearWindow) -> Vec<Observation> {
        self.points
            .iter()
            .copied()
            .filter(|p| window.contains(p.year))
            .collect()
    }

    /// The same series with every value multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self, SeriesError> {
        let points = self
            .points
            .iter()
            .map(|p| Observation::new(p.year, p.value * c))
            .collect();
        Self::new(self.entity.clone(), self.unit.clone(), points)
    }

    /// The same series with years re-indexed as `t - t0`.
    pub fn shifted(&self, t0: f64) -> Result<Self, SeriesError> {
        let points = self
            .points
            .iter()
            .map(|p| Observation::new(p.year - t0, p.value))
            .collect();
        Self::new(self.entity.clone(), self.unit.clone(), points)
    }

    /// Returns a series that only keeps points inside `window`.
    pub fn restricted(&self, window: YearWindow) -> Self {
        Self {
            entity: self.entity.clone(),
            unit: self.unit.clone(),
            points: self.in_window(window),
        }
    }
}

/// Inclusive year range; either end may be open.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct YearWindow {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

impl YearWindow {
    pub const ALL: YearWindow = YearWindow { lo: None, hi: None };

    pub fn new(lo: f64, hi: f64) -> Self {
        Self {
            lo: Some(lo),
            hi: Some(hi),
        }
    }

    pub fn contains(&self, year: f64) -> bool {
        self.lo.is_none_or(|lo| year >= lo) && self.hi.is_none_or(|hi| year <= hi)
    }

    /// Window bounds after shifting the time origin to `t0`.
    pub fn shifted(&self, t0: f64) -> Self {
        Self {
            lo: self.lo.map(|lo| lo - t0),
            hi: self.hi.map(|hi| hi - t0),
        }
    }
}

impl fmt::Display for YearWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(lo) = self.lo {
            write!(f, "{lo}")?;
        }
        f.write_str(":")?;
        if let Some(hi) = self.hi {
            write!(f, "{hi}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for YearWindow {
    type Err = SeriesError;

    /// Parses `LO:HI`, `LO:` or `:HI`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SeriesError::BadWindow(s.to_string());
        let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
        let parse = |part: &str| -> Result<Option<f64>, SeriesError> {
            let part = part.trim();
            if part.is_empty() {
                Ok(None)
            } else {
                part.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(Some)
                    .ok_or_else(bad)
            }
        };
        let window = YearWindow {
            lo: parse(lo)?,
            hi: parse(hi)?,
        };
        if let (Some(lo), Some(hi)) = (window.lo, window.hi) {
            if lo >= hi {
                return Err(bad());
            }
        }
        Ok(window)
    }
}

/// Positive constants `(a, k)` of the hyperbolic trajectory.
///
/// `a` is in 1/GDP and `k` in 1/(GDP * year). The trajectory diverges at the
/// singularity time `a / k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperbolicParams {
    a: f64,
    k: f64,
}

impl HyperbolicParams {
    pub fn new(a: f64, k: f64) -> Result<Self, SeriesError> {
        if !(a.is_finite() && k.is_finite() && a > 0.0 && k > 0.0) {
            return Err(SeriesError::InvalidParams { a, k });
        }
        Ok(Self { a, k })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn singularity_time(&self) -> f64 {
        self.a / self.k
    }

    /// Model value `1 / (a - k t)`; fails at or after the singularity.
    pub fn evaluate(&self, t: f64) -> Result<f64, SeriesError> {
        let denom = self.a - self.k * t;
        if denom <= 0.0 {
            return Err(SeriesError::Singularity {
                year: t,
                singularity: self.singularity_time(),
            });
        }
        Ok(1.0 / denom)
    }

    /// The straight line `a - k t` followed by the reciprocal of the model.
    pub fn reciprocal_line(&self, t: f64) -> f64 {
        self.a - self.k * t
    }

    /// Parameters of the trajectory `c * S(t)`.
    pub fn rescale(&self, c: f64) -> Result<Self, SeriesError> {
        if !(c.is_finite() && c > 0.0) {
            return Err(SeriesError::BadScale(c));
        }
        Self::new(self.a / c, self.k / c)
    }

    /// Parameters in the re-indexed frame `t' = t - t0`.
    pub fn shift_origin(&self, t0: f64) -> Result<Self, SeriesError> {
        let a = self.a - self.k * t0;
        if a <= 0.0 {
            return Err(SeriesError::OriginPastSingularity {
                origin: t0,
                singularity: self.singularity_time(),
            });
        }
        Self::new(a, self.k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Space {
    Reciprocal,
    Log,
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Space::Reciprocal => "reciprocal",
            Space::Log => "log",
        })
    }
}

/// A series mapped into a linearizing space.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedSeries {
    pub space: Space,
    pub points: Vec<Observation>,
}

impl TransformedSeries {
    pub fn years(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.year).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn in_window(&self, window: YearWindow) -> Vec<Observation> {
        self.points
            .iter()
            .copied()
            .filter(|p| window.contains(p.year))
            .collect()
    }
}

fn transform(
    points: &[Observation],
    space: Space,
    f: impl Fn(f64) -> f64,
) -> Result<TransformedSeries, SeriesError> {
    let points = points
        .iter()
        .map(|p| {
            if p.value > 0.0 && p.value.is_finite() {
                Ok(Observation::new(p.year, f(p.value)))
            } else {
                Err(SeriesError::NonPositiveValue {
                    year: p.year,
                    value: p.value,
                })
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(TransformedSeries { space, points })
}

/// Pointwise `1 / S`.
pub fn reciprocal_transform(points: &[Observation]) -> Result<TransformedSeries, SeriesError> {
    transform(points, Space::Reciprocal, |v| 1.0 / v)
}

/// Pointwise `ln S`.
pub fn log_transform(points: &[Observation]) -> Result<TransformedSeries, SeriesError> {
    transform(points, Space::Log, f64::ln)
}
