//! Closed-form weighted least squares for straight lines, and the hyperbolic
//! and exponential fits built on top of it.

use std::fmt;
use std::str::FromStr;

use crate::error::FitError;
use crate::series::{
    log_transform, reciprocal_transform, HyperbolicParams, Observation, ObservationSeries,
    YearWindow,
};

/// A fitted straight line `y = intercept + slope * x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    pub slope_intercept_covariance: f64,
    pub r2: f64,
    pub n: usize,
    /// `y_i - (intercept + slope * x_i)` in input order.
    pub residuals: Vec<f64>,
    /// Estimated variance of a unit-weight observation, `sum(w r^2) / (n - 2)`.
    pub residual_variance: f64,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    /// Variance of the fitted line's value at `x`.
    pub fn line_variance(&self, x: f64) -> f64 {
        (self.intercept_stderr.powi(2)
            + 2.0 * x * self.slope_intercept_covariance
            + x * x * self.slope_stderr.powi(2))
        .max(0.0)
    }

    pub fn dof(&self) -> usize {
        self.n - 2
    }
}

/// Weighted least-squares line through `(xs, ys)`.
///
/// Abscissae are centred on their weighted mean before solving, so
/// calendar-year magnitudes do not swamp small intercepts. With no weights
/// every point has weight one.
pub fn fit_line(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> Result<LinearFit, FitError> {
    let n = xs.len();
    if ys.len() != n {
        return Err(FitError::LengthMismatch(n, ys.len()));
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(FitError::LengthMismatch(n, w.len()));
        }
        if w.iter().any(|&w| !(w.is_finite() && w > 0.0)) {
            return Err(FitError::BadWeights);
        }
    }
    if n < 3 {
        return Err(FitError::TooSparse { count: n });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite);
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);

    let w_sum: f64 = (0..n).map(weight).sum();
    let x_mean = (0..n).map(|i| weight(i) * xs[i]).sum::<f64>() / w_sum;
    let y_mean = if ys.iter().all(|&y| y == ys[0]) {
        ys[0]
    } else {
        (0..n).map(|i| weight(i) * ys[i]).sum::<f64>() / w_sum
    };

    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = xs[i] - x_mean;
        let dy = ys[i] - y_mean;
        let w = weight(i);
        sxx += w * dx * dx;
        sxy += w * dx * dy;
        syy += w * dy * dy;
    }
    let x_scale = xs.iter().fold(0.0f64, |m, x| m.max((x - x_mean).abs()));
    if x_scale == 0.0 || sxx <= f64::EPSILON * x_scale * x_scale * w_sum {
        return Err(FitError::SingularDesign);
    }

    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let residuals: Vec<f64> = (0..n)
        .map(|i| (ys[i] - y_mean) - slope * (xs[i] - x_mean))
        .collect();
    let ss_res: f64 = (0..n).map(|i| weight(i) * residuals[i].powi(2)).sum();
    let residual_variance = ss_res / (n - 2) as f64;

    let r2 = if syy == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };

    let slope_var = residual_variance / sxx;
    let intercept_var = residual_variance * (1.0 / w_sum + x_mean * x_mean / sxx);
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr: slope_var.sqrt(),
        intercept_stderr: intercept_var.sqrt(),
        slope_intercept_covariance: -x_mean * slope_var,
        r2,
        n,
        residuals,
        residual_variance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// Plain least squares on `1/S`.
    #[default]
    Uniform,
    /// Weights proportional to `S^2`, so reciprocal-space residuals behave
    /// like relative residuals of `S`.
    RelativeError,
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::Uniform => "uniform",
            Weighting::RelativeError => "relative",
        })
    }
}

impl FromStr for Weighting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(Weighting::Uniform),
            "relative" | "relative-error" | "relativeerror" => Ok(Weighting::RelativeError),
            other => Err(format!(
                "unknown weighting {other:?} (expected uniform|relative)"
            )),
        }
    }
}

/// Natural-space relative residuals `(S - S_model) / S_model`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualStats {
    pub residuals: Vec<(f64, f64)>,
    pub mean_abs: f64,
    pub max_abs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicFitReport {
    pub params: HyperbolicParams,
    pub line: LinearFit,
    pub window: YearWindow,
    /// First and last observed years inside the window.
    pub span: (f64, f64),
    pub weighting: Weighting,
    pub r2_reciprocal: f64,
    pub natural_space_residual_stats: ResidualStats,
}

impl HyperbolicFitReport {
    pub fn singularity_time(&self) -> f64 {
        self.params.singularity_time()
    }

    /// Standard error of `a / k` by the delta method.
    pub fn singularity_stderr(&self) -> f64 {
        let a = self.params.a();
        let k = self.params.k();
        // t_s = -intercept / slope
        let d_a = 1.0 / k;
        let d_b = a / (k * k);
        let l = &self.line;
        (d_a * d_a * l.intercept_stderr.powi(2)
            + d_b * d_b * l.slope_stderr.powi(2)
            + 2.0 * d_a * d_b * l.slope_intercept_covariance)
            .max(0.0)
            .sqrt()
    }
}

fn windowed(series: &ObservationSeries, window: YearWindow) -> Result<Vec<Observation>, FitError> {
    let pts = series.in_window(window);
    if pts.len() < 3 {
        return Err(FitError::TooSparse { count: pts.len() });
    }
    Ok(pts)
}

/// Fits `1/S = a - k t` on the points inside `window`.
///
/// Rejects fits whose reciprocal slope is not negative, and fits whose
/// implied singularity does not lie beyond every fitted year.
pub fn fit_hyperbolic(
    series: &ObservationSeries,
    window: YearWindow,
    weighting: Weighting,
) -> Result<HyperbolicFitReport, FitError> {
    let pts = windowed(series, window)?;
    let recip = reciprocal_transform(&pts)?;
    let xs = recip.years();
    let ys = recip.values();
    let weights: Option<Vec<f64>> = match weighting {
        Weighting::Uniform => None,
        Weighting::RelativeError => {
            let raw: Vec<f64> = pts.iter().map(|p| p.value * p.value).collect();
            let mean = raw.iter().sum::<f64>() / raw.len() as f64;
            Some(raw.into_iter().map(|w| w / mean).collect())
        }
    };
    let line = fit_line(&xs, &ys, weights.as_deref())?;
    if line.slope >= 0.0 {
        return Err(FitError::NotHyperbolic(format!(
            "reciprocal slope {} is not negative",
            line.slope
        )));
    }
    let last = xs[xs.len() - 1];
    let params = HyperbolicParams::new(line.intercept, -line.slope).map_err(|_| {
        FitError::NotHyperbolic(format!(
            "fitted intercept {} is not positive",
            line.intercept
        ))
    })?;
    let ts = params.singularity_time();
    if ts <= last {
        return Err(FitError::NotHyperbolic(format!(
            "fitted singularity {ts} does not lie beyond the last fitted year {last}"
        )));
    }
    let stats = residual_stats(&pts, &params)?;
    Ok(HyperbolicFitReport {
        params,
        r2_reciprocal: line.r2,
        line,
        window,
        span: (xs[0], last),
        weighting,
        natural_space_residual_stats: stats,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialFit {
    /// Growth rate per year.
    pub rate: f64,
    /// Level at year 0, in GDP units.
    pub level: f64,
    pub line: LinearFit,
}

/// Fits `ln S = ln(level) + rate * t` on the points inside `window`.
pub fn fit_exponential(
    series: &ObservationSeries,
    window: YearWindow,
) -> Result<ExponentialFit, FitError> {
    let pts = windowed(series, window)?;
    let logs = log_transform(&pts)?;
    let line = fit_line(&logs.years(), &logs.values(), None)?;
    Ok(ExponentialFit {
        rate: line.slope,
        level: line.intercept.exp(),
        line,
    })
}

fn residual_stats(
    pts: &[Observation],
    params: &HyperbolicParams,
) -> Result<ResidualStats, FitError> {
    let residuals = pts
        .iter()
        .map(|p| {
            let model = params.evaluate(p.year)?;
            Ok((p.year, (p.value - model) / model))
        })
        .collect::<Result<Vec<_>, FitError>>()?;
    let n = residuals.len().max(1) as f64;
    let mean_abs = residuals.iter().map(|(_, r)| r.abs()).sum::<f64>() / n;
    let max_abs = residuals.iter().fold(0.0f64, |m, (_, r)| m.max(r.abs()));
    Ok(ResidualStats {
        residuals,
        mean_abs,
        max_abs,
    })
}

/// Relative residuals of the data against a given hyperbola.
pub fn fit_quality(
    series: &ObservationSeries,
    params: &HyperbolicParams,
    window: YearWindow,
) -> Result<ResidualStats, FitError> {
    residual_stats(&series.in_window(window), params)
}
