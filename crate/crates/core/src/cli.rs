//! The `growthlens` command line.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use clap::{Args, Parser, Subcommand};

use crate::diagnostics::{
    breakpoint_scan, classify_model, deviation_profile, regime_overlay_report, DeviationProfile,
    ModelVerdict, RegimeAssessment, ScanEntry, DEFAULT_CONSISTENCY_BAND,
};
use crate::error::{DiagnosticsError, FitError, IngestError, SeriesError, SynthError};
use crate::fitting::{fit_hyperbolic, HyperbolicFitReport, Weighting};
use crate::ingest::parse_table;
use crate::report::{self, ReportInputs};
use crate::series::{ObservationSeries, YearWindow};
use crate::synth::{monte_carlo_rates, SimulationConfig};

const EXIT_CODES: &str = "\
Exit codes:
   0  success
   2  usage error (bad flag, window or alpha)
   3  file could not be read or written
   4  input table could not be parsed
   5  entity not found
   6  entity appears on more than one row
   7  too few points (series, breakpoint side or tail)
   8  data are not hyperbolic (slope, intercept or singularity)
   9  year at or past a singularity
  10  invalid series (non-positive, non-finite, duplicate or unordered values)
  11  degenerate fit (identical years, bad weights, non-finite input)
  12  invalid simulation config";

#[derive(Debug, Parser)]
#[command(name = "growthlens", version, about = "Hyperbolic growth diagnostics for GDP series", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit S(t) = 1/(a - k t) by least squares on 1/S.
    #[command(after_help = EXIT_CODES)]
    Fit(RunArgs),
    /// Residuals against the fit, bending and hyperbolic-vs-exponential verdict.
    #[command(after_help = EXIT_CODES)]
    Diagnose(RunArgs),
    /// Slope-change tests at candidate years and the regime-boundary verdicts.
    #[command(after_help = EXIT_CODES)]
    Breakpoint(RunArgs),
    /// Monte Carlo calibration of the slope-change test; --input is a config file.
    #[command(after_help = EXIT_CODES)]
    Simulate(RunArgs),
    /// Every analysis plus figures and the markdown report.
    #[command(after_help = EXIT_CODES)]
    Report(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Input table (wide or long CSV), or the simulation config for `simulate`.
    #[arg(long)]
    pub input: PathBuf,
    /// Row label to extract from a wide table.
    #[arg(long)]
    pub entity: Option<String>,
    /// Fit window in calendar years; either end may be left open.
    #[arg(long, default_value = "1000:1950", allow_hyphen_values = true)]
    pub window: YearWindow,
    #[arg(long, default_value_t = 0.01, value_parser = parse_alpha)]
    pub alpha: f64,
    #[arg(long, value_delimiter = ',', default_value = "1750,1870,1900")]
    pub candidates: Vec<f64>,
    #[arg(long, default_value = "uniform")]
    pub weighting: Weighting,
    #[arg(long, default_value = "growthlens-out")]
    pub out: PathBuf,
    /// Also write figure1.svg and figure2.svg.
    #[arg(long)]
    pub svg: bool,
    #[arg(long, env = "GROWTHLENS_SEED")]
    pub seed: Option<u64>,
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let a: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if a > 0.0 && a < 0.5 {
        Ok(a)
    } else {
        Err(format!("alpha must lie in (0, 0.5), got {a}"))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

fn series_code(e: &SeriesError) -> i32 {
    match e {
        SeriesError::Singularity { .. } | SeriesError::OriginPastSingularity { .. } => 9,
        SeriesError::BadWindow(_) => 2,
        _ => 10,
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Ingest(e) => match e {
                IngestError::EntityNotFound(_) => 5,
                IngestError::EntityAmbiguous { .. } => 6,
                IngestError::TooSparse { .. } => 7,
                IngestError::Series(s) => series_code(s),
                _ => 4,
            },
            CliError::Fit(e) => fit_code(e),
            CliError::Diagnostics(e) => diag_code(e),
            CliError::Synth(e) => match e {
                SynthError::CrossesSingularity { .. } => 9,
                SynthError::Series(s) => series_code(s),
                SynthError::Diagnostics(d) => diag_code(d),
                _ => 12,
            },
            CliError::Series(s) => series_code(s),
        }
    }
}

fn fit_code(e: &FitError) -> i32 {
    match e {
        FitError::TooSparse { .. } => 7,
        FitError::NotHyperbolic(_) => 8,
        FitError::Series(s) => series_code(s),
        _ => 11,
    }
}

fn diag_code(e: &DiagnosticsError) -> i32 {
    match e {
        DiagnosticsError::SideTooSparse { .. }
        | DiagnosticsError::TailTooShort(_)
        | DiagnosticsError::NoViableCandidate => 7,
        DiagnosticsError::BadAlpha(_) => 2,
        DiagnosticsError::Fit(f) => fit_code(f),
        DiagnosticsError::Series(s) => series_code(s),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

struct Outputs {
    dir: PathBuf,
}

impl Outputs {
    fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
        })
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(io_err(&path))
    }
}

struct Input {
    path: PathBuf,
    text: String,
    sha256: String,
}

fn read_input(path: &Path) -> Result<Input, CliError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let sha256 = report::sha256_hex(&bytes);
    let text = String::from_utf8(bytes).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    })?;
    Ok(Input {
        path: path.to_path_buf(),
        text,
        sha256,
    })
}

fn timestamp() -> String {
    humantime::format_rfc3339_seconds(SystemTime::now()).to_string()
}

/// The fit under the requested weighting, plus the other weighting's fit when
/// the two disagree on `k` by more than 5%.
fn fit_both(
    series: &ObservationSeries,
    args: &RunArgs,
) -> Result<(HyperbolicFitReport, Option<HyperbolicFitReport>), CliError> {
    let fit = fit_hyperbolic(series, args.window, args.weighting)?;
    let other = match args.weighting {
        Weighting::Uniform => Weighting::RelativeError,
        Weighting::RelativeError => Weighting::Uniform,
    };
    let alt = fit_hyperbolic(series, args.window, other)
        .ok()
        .filter(|alt| ((alt.params.k() - fit.params.k()) / fit.params.k()).abs() > 0.05);
    Ok((fit, alt))
}

/// Every observation the fitted curve is defined at, inside the fit window or not.
fn before_singularity(series: &ObservationSeries, fit: &HyperbolicFitReport) -> YearWindow {
    let ts = fit.singularity_time();
    YearWindow {
        lo: None,
        hi: series.years().into_iter().rev().find(|&t| t < ts),
    }
}

#[derive(Default)]
struct Analysis {
    fit: Option<(HyperbolicFitReport, Option<HyperbolicFitReport>)>,
    profile: Option<DeviationProfile>,
    model: Option<ModelVerdict>,
    scan: Option<Vec<ScanEntry>>,
    regimes: Option<RegimeAssessment>,
}

fn write_fit(
    out: &Outputs,
    series: &ObservationSeries,
    fit: &HyperbolicFitReport,
    alt: Option<&HyperbolicFitReport>,
    svg: bool,
) -> Result<(), CliError> {
    let mut kv = report::fit_kv(series, fit);
    let mut text = report::fit_text(series, fit);
    if let Some(alt) = alt {
        kv.push_str(&report::alternate_fit_kv(alt));
        text.push('\n');
        text.push_str(&report::fit_text(series, alt));
    }
    out.write("fit.kv", &kv)?;
    out.write("fit.txt", &text)?;
    out.write("figure1.csv", &report::figure1_csv(series, &fit.params))?;
    out.write("figure2.csv", &report::figure2_csv(series, &fit.params))?;
    if svg {
        out.write("figure1.svg", &report::figure1_svg(series, &fit.params))?;
        out.write("figure2.svg", &report::figure2_svg(series, &fit.params))?;
    }
    print!("{text}");
    Ok(())
}

fn analyse(name: &str, args: &RunArgs) -> Result<(), CliError> {
    let input = read_input(&args.input)?;
    let series = parse_table(&input.text, args.entity.as_deref())?;
    let out = Outputs::create(&args.out)?;
    let mut a = Analysis::default();
    let wants = |cmds: &[&str]| cmds.contains(&name);

    if wants(&["fit", "diagnose", "report"]) {
        let (fit, alt) = fit_both(&series, args)?;
        write_fit(&out, &series, &fit, alt.as_ref(), args.svg)?;
        a.fit = Some((fit, alt));
    }

    if wants(&["diagnose", "report"]) {
        let fit = &a.fit.as_ref().expect("fit computed above").0;
        let profile = deviation_profile(
            &series,
            &fit.params,
            before_singularity(&series, fit),
            DEFAULT_CONSISTENCY_BAND,
        )?;
        let model = classify_model(&series, args.window)?;
        out.write(
            "residuals.csv",
            &report::residuals_csv(&series, &fit.params, &profile),
        )?;
        out.write("diagnose.kv", &report::diagnose_kv(&profile, &model))?;
        println!("deviation: {}", profile.overall);
        println!("bending: {}", report::bending_summary(&profile));
        println!(
            "model: {} (r2 reciprocal {:.6}, r2 log {:.6})",
            model.choice, model.r2_reciprocal, model.r2_log
        );
        a.profile = Some(profile);
        a.model = Some(model);
    }

    if wants(&["breakpoint", "report"]) {
        let scan = breakpoint_scan(&series, &args.candidates, args.window, args.alpha)?;
        out.write("breakpoints.csv", &report::breakpoints_csv(&scan))?;
        for e in &scan {
            match e.result() {
                Some(r) => println!(
                    "{}: {} (p = {:.3e})",
                    report::num(e.candidate_year),
                    r.classification,
                    r.p_value
                ),
                None => println!("{}: untestable", report::num(e.candidate_year)),
            }
        }
        a.scan = Some(scan);

        let fit = match a.fit.as_ref() {
            Some((f, _)) => Some(f.clone()),
            None => match fit_hyperbolic(&series, args.window, args.weighting) {
                Ok(f) => Some(f),
                Err(e) => {
                    eprintln!("regime verdicts skipped: {e}");
                    None
                }
            },
        };
        if let Some(fit) = fit {
            let regimes = regime_overlay_report(&series, &fit, args.alpha)?;
            out.write("regimes.csv", &report::regimes_csv(&regimes))?;
            for e in &regimes.entries {
                println!("regime {}: {}", report::num(e.boundary.year), e.verdict);
            }
            a.regimes = Some(regimes);
        }
    }

    let (fit, alt) = match &a.fit {
        Some((f, alt)) => (Some(f), alt.as_ref()),
        None => (None, None),
    };
    let inputs = ReportInputs {
        command: name,
        input_path: Some(input.path.display().to_string()),
        input_sha256: Some(input.sha256),
        seed: args.seed,
        timestamp: timestamp(),
        series: Some(&series),
        fit,
        alternate_fit: alt,
        profile: a.profile.as_ref(),
        model: a.model.as_ref(),
        scan: a.scan.as_deref(),
        regimes: a.regimes.as_ref(),
        simulation: None,
    };
    out.write("report.md", &report::render_report(&inputs))
}

fn simulate(args: &RunArgs) -> Result<(), CliError> {
    let input = read_input(&args.input)?;
    let config: SimulationConfig = input.text.parse()?;
    let seed = args.seed.or(config.seed).unwrap_or(0);
    let rates = monte_carlo_rates(&config.null, &config.alt, &config.test, config.trials, seed)?;
    let out = Outputs::create(&args.out)?;
    out.write("simulate.kv", &report::simulate_kv(&config, &rates))?;
    println!(
        "false positives {:.4} +/- {:.4}, detection {:.4} +/- {:.4} over {} trials",
        rates.false_positive_rate,
        rates.false_positive_halfwidth,
        rates.detection_rate,
        rates.detection_halfwidth,
        rates.trials
    );
    let inputs = ReportInputs {
        command: "simulate",
        input_path: Some(input.path.display().to_string()),
        input_sha256: Some(input.sha256),
        seed: Some(seed),
        timestamp: timestamp(),
        simulation: Some((&config, &rates)),
        ..Default::default()
    };
    out.write("report.md", &report::render_report(&inputs))
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Fit(a) => analyse("fit", a),
        Command::Diagnose(a) => analyse("diagnose", a),
        Command::Breakpoint(a) => analyse("breakpoint", a),
        Command::Report(a) => analyse("report", a),
        Command::Simulate(a) => simulate(a),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
