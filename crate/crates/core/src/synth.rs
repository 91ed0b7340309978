//! Synthetic trajectories and Monte Carlo calibration of the slope-change test.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), seeded with
//! `seed_from_u64`. A single series uses stream 0 of its seed. Monte Carlo
//! trial `i` under master seed `m` uses seed `m + i` (wrapping), stream 0 for
//! the null ensemble and stream 1 for the alternative, so aggregates do not
//! depend on thread scheduling.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::diagnostics::{gradient_change_test, BreakClass};
use crate::error::SynthError;
use crate::series::{HyperbolicParams, ObservationSeries, YearWindow};

/// A single closed-form growth curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Curve {
    Hyperbolic(HyperbolicParams),
    Exponential { rate: f64, level: f64 },
    Constant { level: f64 },
}

impl Curve {
    fn value(&self, t: f64) -> Result<f64, SynthError> {
        match *self {
            Curve::Hyperbolic(p) => p.evaluate(t).map_err(|_| SynthError::CrossesSingularity {
                year: t,
                singularity: p.singularity_time(),
            }),
            Curve::Exponential { rate, level } => Ok(level * (rate * t).exp()),
            Curve::Constant { level } => Ok(level),
        }
    }

    /// The same shape with its level solved so that `value(t) == v`.
    fn matched_to(&self, t: f64, v: f64) -> Result<Curve, SynthError> {
        Ok(match *self {
            Curve::Hyperbolic(p) => {
                let a = 1.0 / v + p.k() * t;
                Curve::Hyperbolic(HyperbolicParams::new(a, p.k()).map_err(|_| {
                    SynthError::Spec(format!("cannot join hyperbolic segment at year {t}"))
                })?)
            }
            Curve::Exponential { rate, .. } => Curve::Exponential {
                rate,
                level: v * (-rate * t).exp(),
            },
            Curve::Constant { .. } => Curve::Constant { level: v },
        })
    }

    fn check(&self) -> Result<(), SynthError> {
        let ok = match *self {
            Curve::Hyperbolic(_) => true,
            Curve::Exponential { rate, level } => {
                rate.is_finite() && level.is_finite() && level > 0.0
            }
            Curve::Constant { level } => level.is_finite() && level > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(SynthError::Spec(format!("invalid curve {self:?}")))
        }
    }
}

/// A curve active on `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub curve: Curve,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryKind {
    Hyperbolic(HyperbolicParams),
    Exponential {
        rate: f64,
        level: f64,
    },
    Constant {
        level: f64,
    },
    /// Contiguous segments. Every segment after the first has its level
    /// re-solved so the trajectory is continuous at each join.
    Piecewise(Vec<Segment>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseSpace {
    /// Mean-one log-normal factor `exp(sigma z - sigma^2 / 2)`.
    #[default]
    NaturalRelative,
    /// Additive Gaussian noise with standard deviation `sigma` on `1/S`.
    ReciprocalAdditive,
}

impl fmt::Display for NoiseSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseSpace::NaturalRelative => "natural-relative",
            NoiseSpace::ReciprocalAdditive => "reciprocal-additive",
        })
    }
}

impl FromStr for NoiseSpace {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "natural-relative" | "natural" | "relative" => Ok(NoiseSpace::NaturalRelative),
            "reciprocal-additive" | "reciprocal" => Ok(NoiseSpace::ReciprocalAdditive),
            other => Err(format!("unknown noise space {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseSpec {
    pub space: NoiseSpace,
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    pub years: Vec<f64>,
    pub noise: NoiseSpec,
}

impl TrajectorySpec {
    pub fn new(kind: TrajectoryKind, years: Vec<f64>, noise: NoiseSpec) -> Self {
        Self { kind, years, noise }
    }

    /// Resolves the spec into contiguous, continuously joined segments.
    fn segments(&self) -> Result<Vec<Segment>, SynthError> {
        let whole = |curve: Curve| {
            vec![Segment {
                start: f64::NEG_INFINITY,
                end: f64::INFINITY,
                curve,
            }]
        };
        let raw = match &self.kind {
            TrajectoryKind::Hyperbolic(p) => whole(Curve::Hyperbolic(*p)),
            TrajectoryKind::Exponential { rate, level } => whole(Curve::Exponential {
                rate: *rate,
                level: *level,
            }),
            TrajectoryKind::Constant { level } => whole(Curve::Constant { level: *level }),
            TrajectoryKind::Piecewise(segs) => {
                if segs.is_empty() {
                    return Err(SynthError::Spec(
                        "piecewise trajectory has no segments".into(),
                    ));
                }
                segs.clone()
            }
        };
        for s in &raw {
            s.curve.check()?;
            if !(s.start < s.end) {
                return Err(SynthError::Spec(format!(
                    "segment [{}, {}] is empty",
                    s.start, s.end
                )));
            }
        }
        let mut out: Vec<Segment> = Vec::with_capacity(raw.len());
        for s in raw {
            let seg = match out.last() {
                None => s,
                Some(prev) => {
                    if prev.end != s.start {
                        return Err(SynthError::Spec(format!(
                            "segments are not contiguous: {} then {}",
                            prev.end, s.start
                        )));
                    }
                    let join = prev.curve.value(s.start)?;
                    Segment {
                        curve: s.curve.matched_to(s.start, join)?,
                        ..s
                    }
                }
            };
            out.push(seg);
        }
        Ok(out)
    }

    fn noise_check(&self) -> Result<(), SynthError> {
        if self.noise.sigma.is_finite() && self.noise.sigma >= 0.0 {
            Ok(())
        } else {
            Err(SynthError::Spec(format!(
                "noise sigma {} must be >= 0",
                self.noise.sigma
            )))
        }
    }

    /// Noise-free values on the year grid.
    pub fn clean_values(&self) -> Result<Vec<f64>, SynthError> {
        let segs = self.segments()?;
        self.years
            .iter()
            .map(|&t| {
                // Boundary years belong to the later segment.
                let seg = segs
                    .iter()
                    .rev()
                    .find(|s| t >= s.start && t <= s.end)
                    .ok_or(SynthError::Uncovered { year: t })?;
                seg.curve.value(t)
            })
            .collect()
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn apply_noise(
    clean: &[f64],
    noise: &NoiseSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>, SynthError> {
    let sigma = noise.sigma;
    clean
        .iter()
        .map(|&v| {
            if sigma == 0.0 {
                return Ok(v);
            }
            match noise.space {
                NoiseSpace::NaturalRelative => {
                    let z: f64 = rng.sample(StandardNormal);
                    Ok(v * (sigma * z - 0.5 * sigma * sigma).exp())
                }
                NoiseSpace::ReciprocalAdditive => {
                    for _ in 0..10_000 {
                        let z: f64 = rng.sample(StandardNormal);
                        let r = 1.0 / v + sigma * z;
                        if r > 0.0 {
                            return Ok(1.0 / r);
                        }
                    }
                    Err(SynthError::Spec(format!(
                        "reciprocal noise sigma {sigma} keeps producing non-positive values"
                    )))
                }
            }
        })
        .collect()
}

fn generate_with(
    spec: &TrajectorySpec,
    seed: u64,
    stream: u64,
) -> Result<ObservationSeries, SynthError> {
    spec.noise_check()?;
    let clean = spec.clean_values()?;
    let mut rng = rng_for(seed, stream);
    let values = apply_noise(&clean, &spec.noise, &mut rng)?;
    Ok(ObservationSeries::from_pairs(
        "synthetic",
        spec.years.iter().copied().zip(values),
    )?)
}

/// Samples the trajectory on its year grid, applying seeded noise.
pub fn generate(spec: &TrajectorySpec) -> Result<ObservationSeries, SynthError> {
    generate_with(spec, spec.noise.seed, 0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestConfig {
    pub candidate_year: f64,
    pub window: YearWindow,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloRates {
    pub trials: usize,
    pub master_seed: u64,
    /// Fraction of null trials where the test rejects.
    pub false_positive_rate: f64,
    /// Fraction of alternative trials where the test rejects.
    pub detection_rate: f64,
    /// Wilson 95% half-widths.
    pub false_positive_halfwidth: f64,
    pub detection_halfwidth: f64,
}

/// Half-width of the Wilson score 95% interval for `successes / n`.
pub fn wilson_halfwidth(successes: usize, n: usize) -> f64 {
    let z = 1.959_963_984_540_054_f64;
    let n = n as f64;
    let p = successes as f64 / n;
    z / (1.0 + z * z / n) * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt()
}

fn count_rejections(
    spec: &TrajectorySpec,
    config: &TestConfig,
    trials: usize,
    master_seed: u64,
    stream: u64,
) -> Result<usize, SynthError> {
    let flags = (0..trials)
        .into_par_iter()
        .map(|i| {
            let series = generate_with(spec, master_seed.wrapping_add(i as u64), stream)?;
            let r =
                gradient_change_test(&series, config.candidate_year, config.window, config.alpha)?;
            Ok(r.classification != BreakClass::NoChange)
        })
        .collect::<Result<Vec<bool>, SynthError>>()?;
    Ok(flags.into_iter().filter(|&f| f).count())
}

/// Rejection rates of the slope-change test over seeded null and alternative
/// ensembles. The noise seeds inside the specs are ignored.
pub fn monte_carlo_rates(
    null: &TrajectorySpec,
    alt: &TrajectorySpec,
    config: &TestConfig,
    trials: usize,
    master_seed: u64,
) -> Result<MonteCarloRates, SynthError> {
    if trials < 100 {
        return Err(SynthError::TooFewTrials(trials));
    }
    let fp = count_rejections(null, config, trials, master_seed, 0)?;
    let det = count_rejections(alt, config, trials, master_seed, 1)?;
    Ok(MonteCarloRates {
        trials,
        master_seed,
        false_positive_rate: fp as f64 / trials as f64,
        detection_rate: det as f64 / trials as f64,
        false_positive_halfwidth: wilson_halfwidth(fp, trials),
        detection_halfwidth: wilson_halfwidth(det, trials),
    })
}

/// A simulation run as read from a `key = value` config file.
///
/// ```text
/// trials = 2000
/// seed = 7
/// alpha = 0.05
/// candidate = 1900
/// window = 1850:1950
/// years = 1850:1950:1
/// noise.space = natural-relative
/// noise.sigma = 0.01
/// null = hyperbolic a=0.02493 k=1.238e-5
/// alt = piecewise
/// alt.segment.1 = 1850:1900 hyperbolic a=0.02493 k=1.238e-5
/// alt.segment.2 = 1900:1950 hyperbolic k=2.476e-5
/// ```
///
/// `years` is either `start:end:step` or a comma-separated list. Segments
/// after the first may omit their level (`a` or `level`); it is solved for
/// continuity.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub trials: usize,
    pub seed: Option<u64>,
    pub test: TestConfig,
    pub null: TrajectorySpec,
    pub alt: TrajectorySpec,
}

fn parse_years(text: &str) -> Result<Vec<f64>, String> {
    let text = text.trim();
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("year range {text:?} must be start:end:step"));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("bad number {p:?}"))
            })
            .collect::<Result<_, _>>()?;
        let (start, end, step) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0 && end >= start) {
            return Err(format!("year range {text:?} is empty"));
        }
        let count = ((end - start) / step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| start + step * i as f64).collect())
    } else {
        text.split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("bad year {p:?}"))
            })
            .collect()
    }
}

/// `hyperbolic a=.. k=..`, `exponential rate=.. level=..`, `constant level=..`.
/// With `allow_free_level`, a missing level becomes a placeholder to be solved.
fn parse_curve(text: &str, allow_free_level: bool) -> Result<Curve, String> {
    let mut words = text.split_whitespace();
    let name = words.next().ok_or("missing curve kind")?;
    let mut a = None;
    let mut k = None;
    let mut rate = None;
    let mut level = None;
    for w in words {
        let (key, value) = w
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got {w:?}"))?;
        let value: f64 = value.parse().map_err(|_| format!("bad number in {w:?}"))?;
        match key {
            "a" => a = Some(value),
            "k" => k = Some(value),
            "rate" => rate = Some(value),
            "level" => level = Some(value),
            other => return Err(format!("unknown curve parameter {other:?}")),
        }
    }
    let level_or = |v: Option<f64>, what: &str| -> Result<f64, String> {
        match v {
            Some(v) => Ok(v),
            None if allow_free_level => Ok(1.0),
            None => Err(format!("{name} curve needs {what}")),
        }
    };
    match name {
        "hyperbolic" => {
            let k = k.ok_or("hyperbolic curve needs k")?;
            let a = match a {
                Some(a) => a,
                // Placeholder; replaced when the segment is joined.
                None if allow_free_level => 1.0 + k.abs() * 1e6,
                None => return Err("hyperbolic curve needs a".into()),
            };
            HyperbolicParams::new(a, k)
                .map(Curve::Hyperbolic)
                .map_err(|e| e.to_string())
        }
        "exponential" => Ok(Curve::Exponential {
            rate: rate.ok_or("exponential curve needs rate")?,
            level: level_or(level, "level")?,
        }),
        "constant" => Ok(Curve::Constant {
            level: level_or(level, "level")?,
        }),
        other => Err(format!("unknown curve kind {other:?}")),
    }
}

fn curve_to_kind(c: Curve) -> TrajectoryKind {
    match c {
        Curve::Hyperbolic(p) => TrajectoryKind::Hyperbolic(p),
        Curve::Exponential { rate, level } => TrajectoryKind::Exponential { rate, level },
        Curve::Constant { level } => TrajectoryKind::Constant { level },
    }
}

impl FromStr for SimulationConfig {
    type Err = SynthError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut entries: Vec<(usize, String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| SynthError::Config {
                line: i + 1,
                reason: "expected key = value".into(),
            })?;
            entries.push((i + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let find = |key: &str| entries.iter().find(|(_, k, _)| k == key);
        let err = |line: usize, reason: String| SynthError::Config { line, reason };
        let num = |key: &str, default: Option<f64>| -> Result<f64, SynthError> {
            match find(key) {
                Some((line, _, v)) => v
                    .parse::<f64>()
                    .map_err(|_| err(*line, format!("{key}: bad number {v:?}"))),
                None => default.ok_or_else(|| err(0, format!("missing key {key:?}"))),
            }
        };

        let trials = num("trials", Some(2000.0))?;
        if trials < 0.0 || trials.fract() != 0.0 {
            return Err(err(0, "trials must be a non-negative integer".into()));
        }
        let seed = match find("seed") {
            Some((line, _, v)) => Some(
                v.parse::<u64>()
                    .map_err(|_| err(*line, format!("seed: bad integer {v:?}")))?,
            ),
            None => None,
        };
        let alpha = num("alpha", Some(0.05))?;
        let candidate_year = num("candidate", None)?;
        let window = match find("window") {
            Some((line, _, v)) => v
                .parse::<YearWindow>()
                .map_err(|e| err(*line, e.to_string()))?,
            None => YearWindow::ALL,
        };
        let years = match find("years") {
            Some((line, _, v)) => parse_years(v).map_err(|e| err(*line, e))?,
            None => return Err(err(0, "missing key \"years\"".into())),
        };
        let space = match find("noise.space") {
            Some((line, _, v)) => v.parse::<NoiseSpace>().map_err(|e| err(*line, e))?,
            None => NoiseSpace::default(),
        };
        let sigma = num("noise.sigma", Some(0.0))?;
        let noise = NoiseSpec {
            space,
            sigma,
            seed: seed.unwrap_or(0),
        };

        let trajectory = |name: &str| -> Result<TrajectorySpec, SynthError> {
            let (line, _, v) = find(name).ok_or_else(|| err(0, format!("missing key {name:?}")))?;
            let kind = if v == "piecewise" {
                let prefix = format!("{name}.segment.");
                let mut segs: Vec<(u32, usize, &String)> = entries
                    .iter()
                    .filter_map(|(l, k, v)| {
                        k.strip_prefix(&prefix)
                            .and_then(|idx| idx.parse::<u32>().ok())
                            .map(|idx| (idx, *l, v))
                    })
                    .collect();
                segs.sort_by_key(|(idx, _, _)| *idx);
                if segs.is_empty() {
                    return Err(err(
                        *line,
                        format!("{name} is piecewise but has no segments"),
                    ));
                }
                let segments = segs
                    .iter()
                    .enumerate()
                    .map(|(pos, (_, l, v))| {
                        let (range, curve) = v
                            .split_once(char::is_whitespace)
                            .ok_or_else(|| err(*l, "segment needs LO:HI and a curve".into()))?;
                        let w: YearWindow = range
                            .parse()
                            .map_err(|e: crate::error::SeriesError| err(*l, e.to_string()))?;
                        let (start, end) = match (w.lo, w.hi) {
                            (Some(s), Some(e)) => (s, e),
                            _ => return Err(err(*l, "segment range needs both ends".into())),
                        };
                        let curve = parse_curve(curve, pos > 0).map_err(|e| err(*l, e))?;
                        Ok(Segment { start, end, curve })
                    })
                    .collect::<Result<Vec<_>, SynthError>>()?;
                TrajectoryKind::Piecewise(segments)
            } else {
                curve_to_kind(parse_curve(v, false).map_err(|e| err(*line, e))?)
            };
            Ok(TrajectorySpec::new(kind, years.clone(), noise))
        };

        Ok(SimulationConfig {
            trials: trials as usize,
            seed,
            test: TestConfig {
                candidate_year,
                window,
                alpha,
            },
            null: trajectory("null")?,
            alt: trajectory("alt")?,
        })
    }
}
