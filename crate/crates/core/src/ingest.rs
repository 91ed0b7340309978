//! Readers for Maddison-style statistical tables.
//!
//! Two layouts are understood, both UTF-8 and comma- or tab-delimited:
//!
//! * **wide**: the first row holds year labels after an entity column, one
//!   entity per row (the layout of Maddison's "horizontal" file);
//! * **long**: two columns, `year,value`, with an optional header.
//!
//! Lines starting with `#` are comments. In a long table the comments
//! `# entity: NAME` and `# unit: TEXT` set the series label and unit. Values
//! given in millions are converted to the canonical billions.
//!
//! Blank cells mean "no observation" and are skipped, never read as zero.

use csv::{ReaderBuilder, StringRecord, Trim};

use crate::error::IngestError;
use crate::series::{Observation, ObservationSeries, CANONICAL_UNIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Wide,
    Long,
}

/// Shape of a table as detected by [`sniff_layout`].
#[derive(Debug, Clone, PartialEq)]
pub struct TableLayout {
    pub layout: Layout,
    pub entity_column: String,
    /// Year labels of a wide table, in column order.
    pub year_labels: Vec<f64>,
    pub unit_hint: Option<String>,
}

struct Comments {
    entity: Option<String>,
    unit: Option<String>,
}

fn scan_comments(text: &str) -> Comments {
    let mut out = Comments {
        entity: None,
        unit: None,
    };
    for line in text.lines() {
        let Some(body) = line.trim_start().strip_prefix('#') else {
            continue;
        };
        if let Some((key, value)) = body.split_once(':') {
            let value = value.trim().to_string();
            match key.trim().to_ascii_lowercase().as_str() {
                "entity" => out.entity = Some(value),
                "unit" => out.unit = Some(value),
                _ => {}
            }
        }
    }
    out
}

fn delimiter(text: &str) -> u8 {
    let first = text
        .lines()
        .find(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .unwrap_or("");
    if first.contains('\t') && !first.contains(',') {
        b'\t'
    } else {
        b','
    }
}

/// Records with their 1-based physical line numbers.
fn records(text: &str) -> Result<Vec<(usize, StringRecord)>, IngestError> {
    let mut rdr = ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(Trim::All)
        .delimiter(delimiter(text))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| IngestError::BadRow {
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        out.push((line, rec));
    }
    Ok(out)
}

/// Parses a decimal number, tolerating thousands separators (commas,
/// spaces, non-breaking spaces, apostrophes).
pub fn parse_number(cell: &str) -> Option<f64> {
    let cleaned: String = cell
        .trim()
        .chars()
        .filter(|c| !matches!(c, ',' | ' ' | '\u{a0}' | '\u{202f}' | '\''))
        .collect();
    if cleaned.is_empty() {
        return None;
    }
    cleaned.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_year_label(label: &str, column: usize) -> Result<f64, IngestError> {
    let bad = || IngestError::BadYearLabel {
        column,
        text: label.to_string(),
    };
    let upper = label.trim().to_ascii_uppercase();
    let digits = upper.strip_prefix("AD").unwrap_or(&upper).trim();
    let year: f64 = digits.parse().map_err(|_| bad())?;
    if year.fract() != 0.0 || year < 1.0 {
        return Err(bad());
    }
    Ok(year)
}

/// Scale factor that converts values in `unit` to billions.
fn unit_scale(unit: Option<&str>) -> f64 {
    match unit.map(str::to_ascii_lowercase) {
        Some(u) if u.contains("million") => 1e-3,
        Some(u) if u.contains("thousand") => 1e-6,
        _ => 1.0,
    }
}

fn build_series(
    entity: String,
    mut points: Vec<(usize, Observation)>,
    unit: Option<&str>,
) -> Result<ObservationSeries, IngestError> {
    points.sort_by(|a, b| a.1.year.total_cmp(&b.1.year));
    for w in points.windows(2) {
        if w[0].1.year == w[1].1.year {
            return Err(IngestError::DuplicateYear {
                year: w[1].1.year,
                line: w[0].0.max(w[1].0),
            });
        }
    }
    let scale = unit_scale(unit);
    let obs = points
        .into_iter()
        .map(|(_, o)| Observation::new(o.year, o.value * scale))
        .collect();
    Ok(ObservationSeries::new(entity, CANONICAL_UNIT, obs)?)
}

/// Detects the layout of `text`: two columns means long, more means wide.
pub fn sniff_layout(text: &str) -> Result<TableLayout, IngestError> {
    let recs = records(text)?;
    let (_, header) = recs.first().ok_or(IngestError::Empty)?;
    let comments = scan_comments(text);
    if header.len() <= 2 {
        return Ok(TableLayout {
            layout: Layout::Long,
            entity_column: String::new(),
            year_labels: Vec::new(),
            unit_hint: comments.unit,
        });
    }
    let year_labels = header
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, c)| !c.is_empty())
        .map(|(i, c)| parse_year_label(c, i + 1))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TableLayout {
        layout: Layout::Wide,
        entity_column: header.get(0).unwrap_or("").to_string(),
        year_labels,
        unit_hint: comments.unit,
    })
}

/// Extracts one entity's row from a wide table.
///
/// Fails when the entity is missing or repeated, a cell is not a number, or
/// fewer than three observations remain.
pub fn parse_wide_table(text: &str, entity: &str) -> Result<ObservationSeries, IngestError> {
    let recs = records(text)?;
    let (_, header) = recs.first().ok_or(IngestError::Empty)?;
    let labels: Vec<Option<f64>> = header
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if i == 0 || c.is_empty() {
                Ok(None)
            } else {
                parse_year_label(c, i + 1).map(Some)
            }
        })
        .collect::<Result<_, _>>()?;
    if labels.iter().all(Option::is_none) {
        return Err(IngestError::BadYearLabel {
            column: 2,
            text: String::new(),
        });
    }

    let target = entity.trim();
    let matches: Vec<&(usize, StringRecord)> = recs[1..]
        .iter()
        .filter(|(_, r)| r.get(0).map(str::trim) == Some(target))
        .collect();
    let (line, row) = match matches.as_slice() {
        [] => return Err(IngestError::EntityNotFound(target.to_string())),
        [one] => *one,
        many => {
            return Err(IngestError::EntityAmbiguous {
                entity: target.to_string(),
                count: many.len(),
            })
        }
    };

    let mut points = Vec::new();
    for (col, cell) in row.iter().enumerate().skip(1) {
        if cell.trim().is_empty() {
            continue;
        }
        let Some(Some(year)) = labels.get(col) else {
            return Err(IngestError::BadCell {
                row: *line,
                column: col + 1,
                text: format!("{cell} (no year label for this column)"),
            });
        };
        let value = parse_number(cell).ok_or_else(|| IngestError::BadCell {
            row: *line,
            column: col + 1,
            text: cell.to_string(),
        })?;
        points.push((*line, Observation::new(*year, value)));
    }
    if points.len() < 3 {
        return Err(IngestError::TooSparse {
            count: points.len(),
        });
    }
    let comments = scan_comments(text);
    build_series(target.to_string(), points, comments.unit.as_deref())
}

/// Reads a two-column `year,value` table. Rows may be in any order; they are
/// sorted by year. Duplicate years are rejected.
pub fn parse_long_table(text: &str) -> Result<ObservationSeries, IngestError> {
    let recs = records(text)?;
    if recs.is_empty() {
        return Err(IngestError::Empty);
    }
    let comments = scan_comments(text);
    let mut points = Vec::new();
    for (idx, (line, rec)) in recs.iter().enumerate() {
        let year_cell = rec.get(0).unwrap_or("");
        if idx == 0 && parse_number(year_cell).is_none() {
            continue; // header
        }
        if rec.len() != 2 {
            return Err(IngestError::BadRow {
                line: *line,
                reason: format!("expected 2 columns, found {}", rec.len()),
            });
        }
        let year = parse_number(year_cell).ok_or_else(|| IngestError::BadRow {
            line: *line,
            reason: format!("bad year {year_cell:?}"),
        })?;
        let value_cell = rec.get(1).unwrap_or("");
        if value_cell.is_empty() {
            continue;
        }
        let value = parse_number(value_cell).ok_or_else(|| IngestError::BadRow {
            line: *line,
            reason: format!("bad value {value_cell:?}"),
        })?;
        points.push((*line, Observation::new(year, value)));
    }
    let entity = comments
        .entity
        .clone()
        .unwrap_or_else(|| "unnamed".to_string());
    build_series(entity, points, comments.unit.as_deref())
}

/// Writes a series as a long table readable by [`parse_long_table`].
pub fn to_long_table(series: &ObservationSeries) -> String {
    let mut out = format!(
        "# entity: {}\n# unit: {}\nyear,gdp\n",
        series.entity(),
        series.unit()
    );
    for p in series.points() {
        out.push_str(&format!("{},{}\n", p.year, p.value));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum Finding {
    NonPositive { year: f64, value: f64 },
    NonFinite { index: usize },
    Duplicate { year: f64 },
    OutOfOrder { year: f64 },
    TooSparse { count: usize },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Lists every violation of the series invariants in `points`.
pub fn validate_series(points: &[Observation]) -> ValidationReport {
    let mut findings = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if !p.year.is_finite() || !p.value.is_finite() {
            findings.push(Finding::NonFinite { index: i });
        } else if p.value <= 0.0 {
            findings.push(Finding::NonPositive {
                year: p.year,
                value: p.value,
            });
        }
    }
    for w in points.windows(2) {
        if w[1].year == w[0].year {
            findings.push(Finding::Duplicate { year: w[1].year });
        } else if w[1].year < w[0].year {
            findings.push(Finding::OutOfOrder { year: w[1].year });
        }
    }
    if points.len() < 3 {
        findings.push(Finding::TooSparse {
            count: points.len(),
        });
    }
    ValidationReport { findings }
}

/// Reads either layout. A wide table needs `entity`; a long table that names
/// its entity in a `# entity:` comment must name the same one.
pub fn parse_table(text: &str, entity: Option<&str>) -> Result<ObservationSeries, IngestError> {
    match (sniff_layout(text)?.layout, entity) {
        (Layout::Wide, Some(e)) => parse_wide_table(text, e),
        (Layout::Wide, None) => Err(IngestError::EntityNotFound(
            "(wide table given without an entity name)".to_string(),
        )),
        (Layout::Long, wanted) => {
            let series = parse_long_table(text)?;
            match (wanted, scan_comments(text).entity) {
                (Some(w), Some(declared)) if w.trim() != declared => {
                    Err(IngestError::EntityNotFound(w.trim().to_string()))
                }
                _ => Ok(series),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const WIDE: &str = "\
Region,1,1000,1500,1600,1700
Western Europe,11,10.2,44.2,65.6,83.3
Asia excl. Japan,77,79,154,,214
Africa,7,13.7,18.4,22,24.4
";

    #[test]
    fn wide_row_with_blank_cell() {
        let fixture = "Region,1,1000,1500,1600\nAsia excl. Japan,77,79,154,\n";
        let s = parse_wide_table(fixture, "Asia excl. Japan").unwrap();
        assert_eq!(s.years(), vec![1.0, 1000.0, 1500.0]);
        assert_eq!(s.values(), vec![77.0, 79.0, 154.0]);
        assert_eq!(s.unit(), CANONICAL_UNIT);
        assert_eq!(s.entity(), "Asia excl. Japan");
    }

    #[test]
    fn wide_errors() {
        assert_eq!(
            parse_wide_table(WIDE, "Atlantis"),
            Err(IngestError::EntityNotFound("Atlantis".into()))
        );
        let dup = format!("{WIDE}Africa,1,2,3,4,5\n");
        assert!(matches!(
            parse_wide_table(&dup, "Africa"),
            Err(IngestError::EntityAmbiguous { count: 2, .. })
        ));
        let bad = "Region,1,1000,1500\nX,1,two,3\n";
        assert_eq!(
            parse_wide_table(bad, "X"),
            Err(IngestError::BadCell {
                row: 2,
                column: 3,
                text: "two".into()
            })
        );
        let sparse = "Region,1,1000,1500\nX,1,,3\n";
        assert_eq!(
            parse_wide_table(sparse, "X"),
            Err(IngestError::TooSparse { count: 2 })
        );
        let bc = "Region,100 BC,1,1000\nX,1,2,3\n";
        assert!(matches!(
            parse_wide_table(bc, "X"),
            Err(IngestError::BadYearLabel { .. })
        ));
    }

    #[test]
    fn wide_thousands_and_millions() {
        let text =
            "# unit: million 1990 GK$\nRegion\t1\t1000\t1500\nAsia\t\"77 025\"\t78930\t153601\n";
        let s = parse_wide_table(text, "Asia").unwrap();
        assert!((s.values()[0] - 77.025).abs() < 1e-12);
        let csv = "Region,1,1000,1500\nAsia,\"77,025\",\"78,930\",\"153,601\"\n";
        let s = parse_wide_table(csv, "Asia").unwrap();
        assert_eq!(s.values(), vec![77025.0, 78930.0, 153601.0]);
    }

    #[test]
    fn sniffing() {
        let l = sniff_layout(WIDE).unwrap();
        assert_eq!(l.layout, Layout::Wide);
        assert_eq!(l.entity_column, "Region");
        assert_eq!(l.year_labels, vec![1.0, 1000.0, 1500.0, 1600.0, 1700.0]);
        assert_eq!(
            sniff_layout("year,gdp\n1,2\n").unwrap().layout,
            Layout::Long
        );
    }

    #[test]
    fn long_two_points_parse_but_do_not_fit() {
        let s = parse_long_table("year,gdp\n1,75.4\n1000,97.0").unwrap();
        assert_eq!(s.len(), 2);
        let fit = crate::fitting::fit_hyperbolic(
            &s,
            crate::series::YearWindow::ALL,
            crate::fitting::Weighting::Uniform,
        );
        assert_eq!(fit, Err(crate::error::FitError::TooSparse { count: 2 }));
    }

    #[test]
    fn long_sorts_rows() {
        let a = parse_long_table("1500,150\n1,75\n1000,97\n").unwrap();
        let b = parse_long_table("1,75\n1000,97\n1500,150\n").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn long_errors_carry_lines() {
        assert_eq!(
            parse_long_table("year,gdp\n1000,abc\n"),
            Err(IngestError::BadRow {
                line: 2,
                reason: "bad value \"abc\"".into()
            })
        );
        assert!(matches!(
            parse_long_table("year,gdp\n1,2\n1,3\n"),
            Err(IngestError::DuplicateYear { year, line: 3 }) if year == 1.0
        ));
        assert!(matches!(
            parse_long_table("year,gdp\n1,2,3\n"),
            Err(IngestError::BadRow { line: 2, .. })
        ));
        assert_eq!(
            parse_long_table("# only a comment\n"),
            Err(IngestError::Empty)
        );
        assert!(matches!(
            parse_long_table("year,gdp\n1,0\n2,3\n"),
            Err(IngestError::Series(_))
        ));
    }

    #[test]
    fn long_blank_values_are_skipped_and_comments_read() {
        let s = parse_long_table(
            "# entity: Asia excl. Japan\n# unit: billions\nyear,gdp\n1,75\n500,\n1000,97\n",
        )
        .unwrap();
        assert_eq!(s.entity(), "Asia excl. Japan");
        assert_eq!(s.years(), vec![1.0, 1000.0]);
    }

    #[test]
    fn validation() {
        let ok = [
            Observation::new(1.0, 1.0),
            Observation::new(2.0, 2.0),
            Observation::new(3.0, 3.0),
        ];
        assert!(validate_series(&ok).is_valid());
        let zero = [
            Observation::new(1.0, 1.0),
            Observation::new(2.0, 0.0),
            Observation::new(3.0, 3.0),
        ];
        assert_eq!(
            validate_series(&zero).findings,
            vec![Finding::NonPositive {
                year: 2.0,
                value: 0.0
            }]
        );
        assert_eq!(
            validate_series(&ok[..2]).findings,
            vec![Finding::TooSparse { count: 2 }]
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn long_table_round_trip(pairs in proptest::collection::btree_map(1i32..3000, 1e-3f64..1e6, 1..40)) {
                let s = ObservationSeries::from_pairs("e", pairs.iter().map(|(y, v)| (*y as f64, *v))).unwrap();
                let back = parse_long_table(&to_long_table(&s)).unwrap();
                prop_assert_eq!(back, s);
            }

            #[test]
            fn parsing_never_panics(text in "[0-9a-z,\\t\\n# .\"-]{0,200}") {
                let _ = parse_long_table(&text);
                let _ = parse_wide_table(&text, "a");
                let _ = sniff_layout(&text);
            }
        }
    }
}
