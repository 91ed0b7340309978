use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use growthlens::ingest::to_long_table;
use growthlens::synth::{Curve, Segment};
use growthlens::{
    generate, HyperbolicParams, NoiseSpace, NoiseSpec, ObservationSeries, TrajectoryKind,
    TrajectorySpec,
};
use tempfile::TempDir;

const EXIT_TOO_SPARSE: i32 = 7;
const EXIT_NOT_HYPERBOLIC: i32 = 8;

fn asia() -> HyperbolicParams {
    HyperbolicParams::new(2.493e-2, 1.238e-5).unwrap()
}

fn decades() -> Vec<f64> {
    (0..=95).map(|i| 1000.0 + 10.0 * f64::from(i)).collect()
}

fn write_series(dir: &TempDir, name: &str, s: &ObservationSeries) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, to_long_table(s)).unwrap();
    path
}

fn growthlens(args: &[&str], input: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_growthlens"))
        .args(args)
        .arg("--input")
        .arg(input)
        .arg("--out")
        .arg(out)
        .env_remove("GROWTHLENS_SEED")
        .output()
        .unwrap()
}

fn kv(path: &Path) -> Vec<(String, String)> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let (k, v) = l.split_once('=').unwrap();
            (k.to_string(), v.to_string())
        })
        .collect()
}

fn get<'a>(pairs: &'a [(String, String)], key: &str) -> &'a str {
    &pairs.iter().find(|(k, _)| k == key).unwrap().1
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn model_series(years: Vec<f64>) -> ObservationSeries {
    let spec = TrajectorySpec::new(TrajectoryKind::Hyperbolic(asia()), years, NoiseSpec::none());
    generate(&spec).unwrap()
}

#[test]
fn two_points_exit_too_sparse() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("two.csv");
    std::fs::write(&input, "year,gdp\n1000,79\n1500,154\n").unwrap();
    let out = growthlens(&["fit"], &input, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(EXIT_TOO_SPARSE));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least 3"));
}

#[test]
fn exponential_exit_not_hyperbolic() {
    let dir = TempDir::new().unwrap();
    let years: Vec<f64> = (0..=19).map(|i| 1000.0 + 50.0 * f64::from(i)).collect();
    let spec = TrajectorySpec::new(
        TrajectoryKind::Exponential {
            rate: 0.003,
            level: 2.0,
        },
        years,
        NoiseSpec::none(),
    );
    let input = write_series(&dir, "exp.csv", &generate(&spec).unwrap());
    let out = growthlens(&["fit"], &input, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(EXIT_NOT_HYPERBOLIC));
}

#[test]
fn model_input_has_zero_residuals() {
    let dir = TempDir::new().unwrap();
    let input = write_series(&dir, "model.csv", &model_series(decades()));
    let out_dir = dir.path().join("out");
    let out = growthlens(&["diagnose"], &input, &out_dir);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv_rows(&out_dir.join("residuals.csv"));
    assert_eq!(rows.len(), 96);
    for row in rows {
        let r: f64 = row[3].parse().unwrap();
        assert!(r.abs() < 1e-12, "{row:?}");
    }
    let d = kv(&out_dir.join("diagnose.kv"));
    assert_eq!(get(&d, "overall_deviation"), "consistent-hyperbolic");
    assert_eq!(get(&d, "bending"), "none");
    assert_eq!(get(&d, "model"), "hyperbolic");
}

#[test]
fn slower_tail_bends_upward() {
    let dir = TempDir::new().unwrap();
    let p = asia();
    let spec = TrajectorySpec::new(
        TrajectoryKind::Piecewise(vec![
            Segment {
                start: 1000.0,
                end: 1900.0,
                curve: Curve::Hyperbolic(p),
            },
            Segment {
                start: 1900.0,
                end: 1950.0,
                curve: Curve::Hyperbolic(HyperbolicParams::new(1.0, p.k() / 4.0).unwrap()),
            },
        ]),
        decades(),
        NoiseSpec::none(),
    );
    let input = write_series(&dir, "slower.csv", &generate(&spec).unwrap());
    let out_dir = dir.path().join("out");
    let out = growthlens(&["diagnose"], &input, &out_dir);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(get(&kv(&out_dir.join("diagnose.kv")), "bending"), "upward");
    let rows = csv_rows(&out_dir.join("residuals.csv"));
    let at_join = rows.iter().find(|r| r[0] == "1900").unwrap();
    assert_eq!(at_join[4], "upward");
}

#[test]
fn takeoff_fixture_is_flagged() {
    let dir = TempDir::new().unwrap();
    let p = asia();
    let years: Vec<f64> = (1850..=1950).map(f64::from).collect();
    let spec = TrajectorySpec::new(
        TrajectoryKind::Piecewise(vec![
            Segment {
                start: 1850.0,
                end: 1900.0,
                curve: Curve::Hyperbolic(p),
            },
            Segment {
                start: 1900.0,
                end: 1950.0,
                curve: Curve::Hyperbolic(HyperbolicParams::new(1.0, 2.0 * p.k()).unwrap()),
            },
        ]),
        years,
        NoiseSpec {
            space: NoiseSpace::NaturalRelative,
            sigma: 0.01,
            seed: 3,
        },
    );
    let input = write_series(&dir, "takeoff.csv", &generate(&spec).unwrap());
    let out_dir = dir.path().join("out");
    let out = growthlens(
        &[
            "breakpoint",
            "--window",
            "1850:1950",
            "--candidates",
            "1900",
        ],
        &input,
        &out_dir,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv_rows(&out_dir.join("breakpoints.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][12], "takeoff");
    assert!(rows[0][10].parse::<f64>().unwrap() < 0.01);
}

#[test]
fn noiseless_hyperbola_has_no_breaks() {
    let dir = TempDir::new().unwrap();
    let input = write_series(&dir, "model.csv", &model_series(decades()));
    let out_dir = dir.path().join("out");
    let out = growthlens(&["breakpoint"], &input, &out_dir);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv_rows(&out_dir.join("breakpoints.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[12] == "no-change"));
    let regimes = csv_rows(&out_dir.join("regimes.csv"));
    assert!(regimes.iter().all(|r| r[5] == "Contradicted"));
}

#[test]
fn untestable_candidates_are_reported_inline() {
    let dir = TempDir::new().unwrap();
    let input = write_series(&dir, "model.csv", &model_series(decades()));
    let out_dir = dir.path().join("out");
    let out = growthlens(
        &["breakpoint", "--candidates", "1010,1500"],
        &input,
        &out_dir,
    );
    assert!(out.status.success());
    let rows = csv_rows(&out_dir.join("breakpoints.csv"));
    assert_eq!(rows[0][1], "untestable");
    assert_eq!(rows[1][1], "tested");
}

#[test]
fn report_writes_every_artifact() {
    let dir = TempDir::new().unwrap();
    let input = write_series(&dir, "model.csv", &model_series(decades()));
    let out_dir = dir.path().join("out");
    let out = growthlens(&["report", "--svg"], &input, &out_dir);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in [
        "fit.kv",
        "fit.txt",
        "residuals.csv",
        "diagnose.kv",
        "breakpoints.csv",
        "regimes.csv",
        "figure1.csv",
        "figure2.csv",
        "figure1.svg",
        "figure2.svg",
        "report.md",
    ] {
        assert!(out_dir.join(name).is_file(), "{name} missing");
    }
    for name in ["figure1.svg", "figure2.svg"] {
        let text = std::fs::read_to_string(out_dir.join(name)).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap();
        assert!(doc.descendants().all(|n| n
            .attributes()
            .all(|a| !a.value().contains("url(") && a.name() != "href")));
    }
    let report = std::fs::read_to_string(out_dir.join("report.md")).unwrap();
    assert_eq!(
        report
            .lines()
            .filter(|l| l.starts_with("- Regime "))
            .count(),
        3
    );
    let sha = growthlens::report::sha256_hex(&std::fs::read(&input).unwrap());
    assert!(report.contains(&sha));
    assert_eq!(
        csv_rows(&out_dir.join("figure1.csv")).len(),
        96,
        "one figure row per observation"
    );
}

#[test]
fn simulate_reports_rates_with_halfwidths() {
    let dir = TempDir::new().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/takeoff.conf");
    let out_dir = dir.path().join("out");
    let out = growthlens(&["simulate", "--seed", "11"], &config, &out_dir);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = kv(&out_dir.join("simulate.kv"));
    assert_eq!(get(&s, "seed"), "11");
    assert_eq!(get(&s, "trials"), "2000");
    let fpr: f64 = get(&s, "false_positive_rate").parse().unwrap();
    let hw: f64 = get(&s, "false_positive_halfwidth").parse().unwrap();
    assert!(fpr <= 0.06 && hw > 0.0 && hw < 0.02);
    let report = std::fs::read_to_string(out_dir.join("report.md")).unwrap();
    assert!(report.contains("False-positive rate:") && report.contains("(95% Wilson)"));
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = TempDir::new().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/takeoff.conf");
    let out_dir = dir.path().join("out");
    let out = Command::new(env!("CARGO_BIN_EXE_growthlens"))
        .arg("simulate")
        .arg("--input")
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .env("GROWTHLENS_SEED", "99")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(get(&kv(&out_dir.join("simulate.kv")), "seed"), "99");
}

#[test]
fn error_paths_have_distinct_codes() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("out");
    let missing = dir.path().join("missing.csv");
    assert_eq!(
        growthlens(&["fit"], &missing, &out_dir).status.code(),
        Some(3)
    );

    let wide = dir.path().join("wide.csv");
    std::fs::write(&wide, "Region,1,1000,1500,1600\nAfrica,7,13.7,18.4,22\n").unwrap();
    assert_eq!(growthlens(&["fit"], &wide, &out_dir).status.code(), Some(5));
    assert_eq!(
        growthlens(&["fit", "--entity", "Asia"], &wide, &out_dir)
            .status
            .code(),
        Some(5)
    );

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "year,gdp\n1000,79\n1500,abc\n").unwrap();
    assert_eq!(growthlens(&["fit"], &bad, &out_dir).status.code(), Some(4));

    let negative = dir.path().join("neg.csv");
    std::fs::write(&negative, "year,gdp\n1000,79\n1500,-1\n1600,3\n").unwrap();
    assert_eq!(
        growthlens(&["fit"], &negative, &out_dir).status.code(),
        Some(10)
    );

    let input = write_series(&dir, "model.csv", &model_series(decades()));
    assert_eq!(
        growthlens(&["fit", "--alpha", "0.9"], &input, &out_dir)
            .status
            .code(),
        Some(2)
    );
    let file_as_dir = dir.path().join("blocker");
    std::fs::write(&file_as_dir, "").unwrap();
    assert_eq!(
        growthlens(&["fit"], &input, &file_as_dir).status.code(),
        Some(3)
    );

    let config = dir.path().join("bad.conf");
    std::fs::write(&config, "trials = 10\n").unwrap();
    assert_eq!(
        growthlens(&["simulate"], &config, &out_dir).status.code(),
        Some(12)
    );
}

#[test]
fn help_documents_exit_codes() {
    let out = Command::new(env!("CARGO_BIN_EXE_growthlens"))
        .arg("--help")
        .output()
        .unwrap();
    assert!(out.status.success());
    let help = String::from_utf8_lossy(&out.stdout);
    for code in [
        "2  usage",
        "7  too few",
        "8  data are not hyperbolic",
        "12  invalid simulation",
    ] {
        assert!(help.contains(code), "{code}");
    }
}

mod fuzz {
    use proptest::prelude::*;

    const DOCUMENTED: [i32; 12] = [0, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12];

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn malformed_tables_map_to_documented_codes(
            rows in prop::collection::vec("[0-9a-zA-Z ,.;:\"#\t-]{0,24}", 0..12),
            command in prop::sample::select(vec!["fit", "diagnose", "breakpoint", "report"]),
        ) {
            let dir = tempfile::TempDir::new().unwrap();
            let input = dir.path().join("in.csv");
            std::fs::write(&input, rows.join("\n")).unwrap();
            let out = dir.path().join("out");
            let code = growthlens::cli::run([
                "growthlens",
                command,
                "--input",
                input.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ]);
            prop_assert!(DOCUMENTED.contains(&code), "code {code}");
        }

        #[test]
        fn malformed_configs_map_to_documented_codes(
            lines in prop::collection::vec("[a-z.]{1,12} ?= ?[0-9a-z:=. -]{0,20}", 0..8),
        ) {
            let dir = tempfile::TempDir::new().unwrap();
            let input = dir.path().join("sim.conf");
            std::fs::write(&input, lines.join("\n")).unwrap();
            let out = dir.path().join("out");
            let code = growthlens::cli::run([
                "growthlens",
                "simulate",
                "--input",
                input.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ]);
            prop_assert!(DOCUMENTED.contains(&code), "code {code}");
        }
    }
}
