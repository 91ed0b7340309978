//! Flat text artifacts: key=value summaries, CSV tables, SVG figures and the
//! markdown report.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::diagnostics::{
    Bending, DeviationProfile, ModelVerdict, RegimeAssessment, ScanEntry, ScanOutcome,
    REGIME_BOUNDARIES,
};
use crate::fitting::HyperbolicFitReport;
use crate::series::{HyperbolicParams, ObservationSeries};
use crate::synth::{MonteCarloRates, SimulationConfig};

/// Prefix of the only line in `report.md` that changes between identical runs.
pub const TIMESTAMP_PREFIX: &str = "Generated: ";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Shortest round-trip decimal form, in exponent notation for very small or
/// large magnitudes; `nan` and `inf` spelled out.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else if x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e15) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn kv(out: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "{key}={value}");
}

pub fn fit_kv(series: &ObservationSeries, fit: &HyperbolicFitReport) -> String {
    let mut out = String::new();
    let p = &fit.params;
    kv(&mut out, "entity", series.entity());
    kv(&mut out, "unit", series.unit());
    kv(&mut out, "window", fit.window);
    kv(&mut out, "weighting", fit.weighting);
    kv(&mut out, "n", fit.line.n);
    kv(&mut out, "span_lo", num(fit.span.0));
    kv(&mut out, "span_hi", num(fit.span.1));
    kv(&mut out, "a", num(p.a()));
    kv(&mut out, "a_stderr", num(fit.line.intercept_stderr));
    kv(&mut out, "k", num(p.k()));
    kv(&mut out, "k_stderr", num(fit.line.slope_stderr));
    kv(
        &mut out,
        "a_k_covariance",
        num(-fit.line.slope_intercept_covariance),
    );
    kv(&mut out, "singularity_year", num(fit.singularity_time()));
    kv(
        &mut out,
        "singularity_stderr",
        num(fit.singularity_stderr()),
    );
    kv(&mut out, "r2_reciprocal", num(fit.r2_reciprocal));
    let stats = &fit.natural_space_residual_stats;
    kv(&mut out, "residual_mean_abs", num(stats.mean_abs));
    kv(&mut out, "residual_max_abs", num(stats.max_abs));
    out
}

/// Extra `alt.*` keys for the other weighting when the two disagree on `k`.
pub fn alternate_fit_kv(fit: &HyperbolicFitReport) -> String {
    let mut out = String::new();
    kv(&mut out, "alt.weighting", fit.weighting);
    kv(&mut out, "alt.a", num(fit.params.a()));
    kv(&mut out, "alt.a_stderr", num(fit.line.intercept_stderr));
    kv(&mut out, "alt.k", num(fit.params.k()));
    kv(&mut out, "alt.k_stderr", num(fit.line.slope_stderr));
    kv(
        &mut out,
        "alt.singularity_year",
        num(fit.singularity_time()),
    );
    kv(&mut out, "alt.r2_reciprocal", num(fit.r2_reciprocal));
    out
}

pub fn fit_text(series: &ObservationSeries, fit: &HyperbolicFitReport) -> String {
    let p = &fit.params;
    let stats = &fit.natural_space_residual_stats;
    let mut out = String::new();
    let _ = writeln!(out, "Hyperbolic fit for {}", series.entity());
    let _ = writeln!(
        out,
        "  window {} ({} points, {} to {}), {} weighting",
        fit.window,
        fit.line.n,
        num(fit.span.0),
        num(fit.span.1),
        fit.weighting
    );
    let _ = writeln!(out, "  S(t) = 1 / (a - k t)");
    let _ = writeln!(
        out,
        "  a   = {:.6e} +/- {:.2e}",
        p.a(),
        fit.line.intercept_stderr
    );
    let _ = writeln!(
        out,
        "  k   = {:.6e} +/- {:.2e}",
        p.k(),
        fit.line.slope_stderr
    );
    let _ = writeln!(
        out,
        "  t_s = {:.2} +/- {:.2}",
        fit.singularity_time(),
        fit.singularity_stderr()
    );
    let _ = writeln!(out, "  r2 (reciprocal) = {:.6}", fit.r2_reciprocal);
    let _ = writeln!(
        out,
        "  relative residuals: mean |r| = {:.4}, max |r| = {:.4}",
        stats.mean_abs, stats.max_abs
    );
    out
}

pub fn residuals_csv(
    series: &ObservationSeries,
    params: &HyperbolicParams,
    profile: &DeviationProfile,
) -> String {
    let mut out = String::from("year,gdp,model_gdp,relative_residual,segment_bending\n");
    for &(year, r) in &profile.residuals {
        let gdp = series
            .points()
            .iter()
            .find(|p| p.year == year)
            .map(|p| p.value)
            .unwrap_or(f64::NAN);
        let model = params.evaluate(year).map(num).unwrap_or_default();
        let bend = profile
            .segments
            .iter()
            .find(|s| s.year == year)
            .map(|s| s.bending.to_string())
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            num(year),
            num(gdp),
            model,
            num(r),
            bend
        );
    }
    out
}

/// `upward`, `downward`, `none` or `mixed`, from the local segment bends.
pub fn bending_summary(profile: &DeviationProfile) -> &'static str {
    let up = profile
        .segments
        .iter()
        .any(|s| s.bending == Bending::Upward);
    let down = profile
        .segments
        .iter()
        .any(|s| s.bending == Bending::Downward);
    match (up, down) {
        (false, false) => "none",
        (true, false) => "upward",
        (false, true) => "downward",
        (true, true) => "mixed",
    }
}

pub fn diagnose_kv(profile: &DeviationProfile, verdict: &ModelVerdict) -> String {
    let mut out = String::new();
    kv(&mut out, "overall_deviation", profile.overall);
    kv(&mut out, "consistency_band", num(profile.band));
    let max = profile
        .residuals
        .iter()
        .fold(0.0f64, |m, (_, r)| m.max(r.abs()));
    kv(&mut out, "residual_max_abs", num(max));
    let up = profile
        .segments
        .iter()
        .filter(|s| s.bending == Bending::Upward)
        .count();
    let down = profile
        .segments
        .iter()
        .filter(|s| s.bending == Bending::Downward)
        .count();
    kv(&mut out, "segments_upward", up);
    kv(&mut out, "segments_downward", down);
    kv(&mut out, "bending", bending_summary(profile));
    kv(&mut out, "model", verdict.choice);
    kv(&mut out, "r2_reciprocal", num(verdict.r2_reciprocal));
    kv(&mut out, "r2_log", num(verdict.r2_log));
    out
}

pub fn breakpoints_csv(scan: &[ScanEntry]) -> String {
    let mut out = String::from(
        "candidate_year,status,n_before,n_after,gradient_before,gradient_after,delta,\
         t_statistic,dof,welch,p_value,alpha,classification,bonferroni_significant,note\n",
    );
    for e in scan {
        match &e.outcome {
            ScanOutcome::Tested {
                result: r,
                bonferroni_significant,
            } => {
                let _ = writeln!(
                    out,
                    "{},tested,{},{},{},{},{},{},{},{},{},{},{},{},",
                    num(e.candidate_year),
                    r.n_before,
                    r.n_after,
                    num(r.gradient_before),
                    num(r.gradient_after),
                    num(r.delta),
                    num(r.t_statistic),
                    num(r.dof),
                    r.welch,
                    num(r.p_value),
                    num(r.alpha),
                    r.classification,
                    bonferroni_significant
                );
            }
            ScanOutcome::Untestable { reason } => {
                let _ = writeln!(
                    out,
                    "{},untestable,,,,,,,,,,,,,\"{}\"",
                    num(e.candidate_year),
                    reason.replace('"', "\"\"")
                );
            }
        }
    }
    out
}

pub fn regimes_csv(assessment: &RegimeAssessment) -> String {
    let mut out = String::from("boundary_year,label,classification,p_value,bending,verdict\n");
    for e in &assessment.entries {
        let (class, p) = match &e.test {
            Some(t) => (t.classification.to_string(), num(t.p_value)),
            None => (String::new(), String::new()),
        };
        let bend = e.bending.map(|b| b.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},\"{}\",{},{},{},{}",
            num(e.boundary.year),
            e.boundary.label,
            class,
            p,
            bend,
            e.verdict
        );
    }
    out
}

/// `year,gdp,model_gdp`; the model cell is empty at or past the singularity.
pub fn figure1_csv(series: &ObservationSeries, params: &HyperbolicParams) -> String {
    let mut out = String::from("year,gdp,model_gdp\n");
    for p in series.points() {
        let model = params.evaluate(p.year).map(num).unwrap_or_default();
        let _ = writeln!(out, "{},{},{}", num(p.year), num(p.value), model);
    }
    out
}

/// `year,reciprocal_gdp,model_line` with `model_line = a - k * year`.
pub fn figure2_csv(series: &ObservationSeries, params: &HyperbolicParams) -> String {
    let mut out = String::from("year,reciprocal_gdp,model_line\n");
    for p in series.points() {
        let _ = writeln!(
            out,
            "{},{},{}",
            num(p.year),
            num(1.0 / p.value),
            num(params.reciprocal_line(p.year))
        );
    }
    out
}

pub fn simulate_kv(config: &SimulationConfig, rates: &MonteCarloRates) -> String {
    let mut out = String::new();
    kv(&mut out, "trials", rates.trials);
    kv(&mut out, "seed", rates.master_seed);
    kv(&mut out, "candidate_year", num(config.test.candidate_year));
    kv(&mut out, "window", config.test.window);
    kv(&mut out, "alpha", num(config.test.alpha));
    kv(&mut out, "noise_space", config.null.noise.space);
    kv(&mut out, "noise_sigma", num(config.null.noise.sigma));
    kv(
        &mut out,
        "false_positive_rate",
        num(rates.false_positive_rate),
    );
    kv(
        &mut out,
        "false_positive_halfwidth",
        num(rates.false_positive_halfwidth),
    );
    kv(&mut out, "detection_rate", num(rates.detection_rate));
    kv(
        &mut out,
        "detection_halfwidth",
        num(rates.detection_halfwidth),
    );
    out
}

struct Frame {
    width: f64,
    height: f64,
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x0) / (self.x1 - self.x0) * (self.width - self.left - self.right)
    }

    fn py(&self, y: f64) -> f64 {
        self.height
            - self.bottom
            - (y - self.y0) / (self.y1 - self.y0) * (self.height - self.top - self.bottom)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.04 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let d = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        (lo - d, hi + d)
    }
}

fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn linear_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let step = nice_step(hi - lo, target);
    let mut t = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    while t <= hi + 1e-9 * step {
        ticks.push(t);
        t += step;
    }
    ticks
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn c(v: f64) -> String {
    format!("{v:.2}")
}

/// Where the y values are plotted: raw or base-10 log.
#[derive(Clone, Copy, PartialEq)]
enum Axis {
    Linear,
    Log10,
}

struct Plot<'a> {
    title: &'a str,
    x_label: &'a str,
    y_label: &'a str,
    axis: Axis,
    points: Vec<(f64, f64)>,
    model: Vec<(f64, f64)>,
}

fn render_svg(plot: &Plot) -> String {
    let tf = |y: f64| match plot.axis {
        Axis::Linear => y,
        Axis::Log10 => y.log10(),
    };
    let pts: Vec<(f64, f64)> = plot.points.iter().map(|&(x, y)| (x, tf(y))).collect();
    let model: Vec<(f64, f64)> = plot
        .model
        .iter()
        .map(|&(x, y)| (x, tf(y)))
        .filter(|(_, y)| y.is_finite())
        .collect();
    let xs = pts.iter().map(|p| p.0);
    let ys = pts.iter().chain(model.iter()).map(|p| p.1);
    let (xmin, xmax) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
        (a.min(x), b.max(x))
    });
    let (ymin, ymax) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| {
        (a.min(y), b.max(y))
    });
    let (x0, x1) = padded(xmin, xmax);
    let (y0, y1) = padded(ymin, ymax);
    let f = Frame {
        width: 720.0,
        height: 480.0,
        left: 80.0,
        right: 20.0,
        top: 40.0,
        bottom: 50.0,
        x0,
        x1,
        y0,
        y1,
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = f.width,
        h = f.height
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        c(f.width / 2.0),
        escape(plot.title)
    );
    let (bx, by) = (f.left, f.height - f.bottom);
    let _ = writeln!(
        s,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        c(bx),
        c(f.top),
        c(f.width - f.left - f.right),
        c(f.height - f.top - f.bottom)
    );

    for t in linear_ticks(x0, x1, 8) {
        let x = f.px(t);
        let _ = writeln!(
            s,
            r#"<line x1="{x}" y1="{y}" x2="{x}" y2="{y2}" stroke="black"/><text x="{x}" y="{ty}" text-anchor="middle">{label}</text>"#,
            x = c(x),
            y = c(by),
            y2 = c(by + 5.0),
            ty = c(by + 18.0),
            label = num(t)
        );
    }
    let yticks = match plot.axis {
        Axis::Linear => linear_ticks(y0, y1, 6),
        Axis::Log10 => {
            let lo = y0.ceil() as i32;
            let hi = y1.floor() as i32;
            let decades: Vec<f64> = (lo..=hi).map(f64::from).collect();
            if decades.len() >= 2 {
                decades
            } else {
                linear_ticks(y0, y1, 4)
            }
        }
    };
    for t in yticks {
        let y = f.py(t);
        let label = match plot.axis {
            Axis::Linear => format!("{t:.3e}"),
            Axis::Log10 => format!("{:.3e}", 10f64.powf(t)),
        };
        let _ = writeln!(
            s,
            r#"<line x1="{x}" y1="{y}" x2="{x2}" y2="{y}" stroke="black"/><text x="{tx}" y="{ty}" text-anchor="end">{label}</text>"#,
            x = c(bx - 5.0),
            x2 = c(bx),
            y = c(y),
            tx = c(bx - 8.0),
            ty = c(y + 4.0),
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        c(f.left + (f.width - f.left - f.right) / 2.0),
        c(f.height - 10.0),
        escape(plot.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">{}</text>"#,
        escape(plot.y_label),
        y = c(f.top + (f.height - f.top - f.bottom) / 2.0)
    );

    for b in REGIME_BOUNDARIES
        .iter()
        .filter(|b| b.year > x0 && b.year < x1)
    {
        let x = f.px(b.year);
        let _ = writeln!(
            s,
            r##"<line x1="{x}" y1="{t}" x2="{x}" y2="{by}" stroke="#888888" stroke-dasharray="4 3"/><text x="{tx}" y="{ty}" fill="#555555" transform="rotate(-90 {tx} {ty})" text-anchor="end">{label} ({year})</text>"##,
            x = c(x),
            t = c(f.top),
            by = c(by),
            tx = c(x - 4.0),
            ty = c(f.top + 6.0),
            label = escape(b.label),
            year = num(b.year)
        );
    }

    if model.len() >= 2 {
        let path: Vec<String> = model
            .iter()
            .map(|&(x, y)| format!("{},{}", c(f.px(x)), c(f.py(y))))
            .collect();
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#c0392b" stroke-width="1.5"/>"##,
            path.join(" ")
        );
    }
    for &(x, y) in &pts {
        let _ = writeln!(
            s,
            r##"<circle cx="{}" cy="{}" r="3" fill="#1f4e79"/>"##,
            c(f.px(x)),
            c(f.py(y))
        );
    }
    s.push_str("</svg>\n");
    s
}

fn model_samples(series: &ObservationSeries, f: impl Fn(f64) -> Option<f64>) -> Vec<(f64, f64)> {
    let years = series.years();
    let (lo, hi) = match (years.first(), years.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => return Vec::new(),
    };
    const N: usize = 240;
    (0..=N)
        .map(|i| lo + (hi - lo) * i as f64 / N as f64)
        .filter_map(|t| f(t).map(|v| (t, v)))
        .collect()
}

/// GDP and the fitted hyperbola on a log y-axis.
pub fn figure1_svg(series: &ObservationSeries, params: &HyperbolicParams) -> String {
    let ts = params.singularity_time();
    let model = model_samples(series, |t| {
        // Stop short of the pole so the curve stays on the canvas.
        if t < ts - 1.0 {
            params.evaluate(t).ok()
        } else {
            None
        }
    });
    let plot = Plot {
        title: &format!("GDP, {}", series.entity()),
        x_label: "Year",
        y_label: &format!("GDP [{}]", series.unit()),
        axis: Axis::Log10,
        points: series.points().iter().map(|p| (p.year, p.value)).collect(),
        model,
    };
    render_svg(&plot)
}

/// Reciprocal GDP and the fitted straight line.
pub fn figure2_svg(series: &ObservationSeries, params: &HyperbolicParams) -> String {
    let model = model_samples(series, |t| Some(params.reciprocal_line(t)));
    let plot = Plot {
        title: &format!("Reciprocal GDP, {}", series.entity()),
        x_label: "Year",
        y_label: "1 / GDP",
        axis: Axis::Linear,
        points: series
            .points()
            .iter()
            .map(|p| (p.year, 1.0 / p.value))
            .collect(),
        model,
    };
    render_svg(&plot)
}

/// Everything one CLI invocation produced, gathered for `report.md`.
#[derive(Debug, Default)]
pub struct ReportInputs<'a> {
    pub command: &'a str,
    pub input_path: Option<String>,
    pub input_sha256: Option<String>,
    pub seed: Option<u64>,
    pub timestamp: String,
    pub series: Option<&'a ObservationSeries>,
    pub fit: Option<&'a HyperbolicFitReport>,
    pub alternate_fit: Option<&'a HyperbolicFitReport>,
    pub profile: Option<&'a DeviationProfile>,
    pub model: Option<&'a ModelVerdict>,
    pub scan: Option<&'a [ScanEntry]>,
    pub regimes: Option<&'a RegimeAssessment>,
    pub simulation: Option<(&'a SimulationConfig, &'a MonteCarloRates)>,
}

pub fn render_report(r: &ReportInputs) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# growthlens report\n");
    let _ = writeln!(out, "## Provenance\n");
    let _ = writeln!(out, "- Command: `{}`", r.command);
    let _ = writeln!(out, "- Tool version: {}", env!("CARGO_PKG_VERSION"));
    if let Some(p) = &r.input_path {
        let _ = writeln!(out, "- Input: `{p}`");
    }
    if let Some(h) = &r.input_sha256 {
        let _ = writeln!(out, "- Input SHA-256: `{h}`");
    }
    match r.seed {
        Some(s) => {
            let _ = writeln!(out, "- Seed: {s}");
        }
        None => {
            let _ = writeln!(out, "- Seed: not used");
        }
    }
    let _ = writeln!(out, "- {TIMESTAMP_PREFIX}{}", r.timestamp);

    if let Some(s) = r.series {
        let _ = writeln!(out, "\n## Series\n");
        let _ = writeln!(out, "- Entity: {}", s.entity());
        let _ = writeln!(out, "- Unit: {}", s.unit());
        let _ = writeln!(out, "- Points: {}", s.len());
        if let (Some(f), Some(l)) = (s.points().first(), s.points().last()) {
            let _ = writeln!(out, "- Years: {} to {}", num(f.year), num(l.year));
        }
    }

    if let (Some(s), Some(fit)) = (r.series, r.fit) {
        let _ = writeln!(out, "\n## Hyperbolic fit\n");
        out.push_str("```text\n");
        out.push_str(&fit_text(s, fit));
        out.push_str("```\n");
        if let Some(alt) = r.alternate_fit {
            let _ = writeln!(
                out,
                "\nThe {} and {} weightings disagree on k by more than 5%:\n",
                fit.weighting, alt.weighting
            );
            out.push_str("```text\n");
            out.push_str(&fit_text(s, alt));
            out.push_str("```\n");
        }
    }

    if let Some(p) = r.profile {
        let _ = writeln!(out, "\n## Deviation from the hyperbola\n");
        let _ = writeln!(out, "- Overall: {}", p.overall);
        let _ = writeln!(out, "- Reciprocal bending: {}", bending_summary(p));
        let _ = writeln!(out, "- Consistency band: +/-{}", num(p.band));
        out.push_str("\n| Year | Relative residual |\n|---:|---:|\n");
        for &(year, res) in &p.residuals {
            let _ = writeln!(out, "| {} | {:+.1}% |", num(year), 100.0 * res);
        }
    }

    if let Some(m) = r.model {
        let _ = writeln!(out, "\n## Growth model\n");
        let _ = writeln!(out, "- Verdict: {}", m.choice);
        let _ = writeln!(out, "- r2 of 1/S against t: {:.6}", m.r2_reciprocal);
        let _ = writeln!(out, "- r2 of ln S against t: {:.6}", m.r2_log);
    }

    if let Some(scan) = r.scan {
        let _ = writeln!(out, "\n## Slope-change tests\n");
        out.push_str("| Year | Class | Slope before | Slope after | t | dof | p | Bonferroni |\n");
        out.push_str("|---:|---|---:|---:|---:|---:|---:|---|\n");
        for e in scan {
            match &e.outcome {
                ScanOutcome::Tested {
                    result: t,
                    bonferroni_significant,
                } => {
                    let _ = writeln!(
                        out,
                        "| {} | {} | {:.4e} | {:.4e} | {:.3} | {:.1}{} | {:.3e} | {} |",
                        num(e.candidate_year),
                        t.classification,
                        t.gradient_before,
                        t.gradient_after,
                        t.t_statistic,
                        t.dof,
                        if t.welch { " (Welch)" } else { "" },
                        t.p_value,
                        if *bonferroni_significant { "yes" } else { "no" }
                    );
                }
                ScanOutcome::Untestable { reason } => {
                    let _ = writeln!(
                        out,
                        "| {} | Untestable | | | | | | {} |",
                        num(e.candidate_year),
                        reason
                    );
                }
            }
        }
    }

    if let Some(reg) = r.regimes {
        let _ = writeln!(out, "\n## Regime boundaries\n");
        let _ = writeln!(out, "Window {}, alpha {}.\n", reg.window, num(reg.alpha));
        for e in &reg.entries {
            let detail = match (&e.test, e.bending, &e.note) {
                (Some(t), Some(b), _) => {
                    format!(
                        "{}, p = {:.3e}, tail bending {}",
                        t.classification, t.p_value, b
                    )
                }
                (_, _, Some(n)) => n.clone(),
                _ => String::new(),
            };
            let _ = writeln!(
                out,
                "- Regime {} ({}): {} ({})",
                num(e.boundary.year),
                e.boundary.label,
                e.verdict,
                detail
            );
        }
    }

    if let Some((cfg, rates)) = r.simulation {
        let _ = writeln!(out, "\n## Monte Carlo calibration\n");
        let _ = writeln!(
            out,
            "- Test: candidate {} in window {}, alpha {}",
            num(cfg.test.candidate_year),
            cfg.test.window,
            num(cfg.test.alpha)
        );
        let _ = writeln!(
            out,
            "- Noise: {} sigma {}",
            cfg.null.noise.space,
            num(cfg.null.noise.sigma)
        );
        let _ = writeln!(
            out,
            "- Trials: {} (master seed {})",
            rates.trials, rates.master_seed
        );
        let _ = writeln!(
            out,
            "- False-positive rate: {:.4} +/- {:.4} (95% Wilson)",
            rates.false_positive_rate, rates.false_positive_halfwidth
        );
        let _ = writeln!(
            out,
            "- Detection rate: {:.4} +/- {:.4} (95% Wilson)",
            rates.detection_rate, rates.detection_halfwidth
        );
    }
    out
}
