//! Input data: HURDAT2 best-track files, annual-maximum extraction and plain
//! CSV series.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gev::BlockMaxSample;
use crate::output::write_csv;

pub const KNOTS_TO_KMH: f64 = 1.852;
/// Wind value HURDAT2 uses for "not recorded".
pub const MISSING_WIND: i32 = -99;
pub const DEFAULT_YEAR_RANGE: (i32, i32) = (1915, 2020);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub storm_id: String,
    pub storm_name: String,
    pub year: i32,
    pub month: u32,
    pub day: u32,
    /// `hhmm` UTC.
    pub time: u32,
    pub status: String,
    pub lat: f64,
    pub lon: f64,
    /// Maximum sustained wind, in knots or km/h depending on the parse flag.
    pub max_wind: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HurdatParse {
    pub records: Vec<TrackRecord>,
    pub storms: usize,
    /// Per-storm count of data lines as declared by the header.
    pub storm_counts: Vec<(String, usize)>,
    /// Data lines skipped because the wind field held the missing sentinel.
    pub missing_wind: usize,
}

fn parse_coord(s: &str, line: usize) -> Result<f64> {
    let s = s.trim();
    let (num, hemi) = s.split_at(s.len().saturating_sub(1));
    let v: f64 = num.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad coordinate {s:?}"),
    })?;
    match hemi {
        "N" | "E" => Ok(v),
        "S" | "W" => Ok(-v),
        _ => Err(Error::Parse {
            line,
            message: format!("bad hemisphere in {s:?}"),
        }),
    }
}

fn parse_int<T: std::str::FromStr>(s: &str, what: &str, line: usize) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad {what} {s:?}"),
    })
}

/// Parses HURDAT2 text. Winds are converted from knots to km/h when
/// `knots_to_kmh` is set.
pub fn parse_hurdat_str(text: &str, knots_to_kmh: bool) -> Result<HurdatParse> {
    let mut out = HurdatParse::default();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    while let Some((hline, header)) = lines.next() {
        if header.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = header.split(',').map(str::trim).collect();
        if fields.len() < 3 || fields[0].len() != 8 {
            return Err(Error::Parse {
                line: hline,
                message: format!("expected storm header, found {header:?}"),
            });
        }
        let storm_id = fields[0].to_string();
        let storm_name = fields[1].to_string();
        let count: usize = parse_int(fields[2], "record count", hline)?;
        let mut seen = 0usize;
        for _ in 0..count {
            let Some((line, data)) = lines.next() else {
                break;
            };
            let f: Vec<&str> = data.split(',').map(str::trim).collect();
            if f.len() < 7 || f[0].len() != 8 {
                return Err(Error::Parse {
                    line,
                    message: format!(
                        "storm {storm_id} ({storm_name}) declares {count} records but line is not a data record: {data:?}"
                    ),
                });
            }
            seen += 1;
            let wind: i32 = parse_int(f[6], "max wind", line)?;
            if wind == MISSING_WIND || wind < 0 {
                out.missing_wind += 1;
                continue;
            }
            let date = f[0];
            out.records.push(TrackRecord {
                storm_id: storm_id.clone(),
                storm_name: storm_name.clone(),
                year: parse_int(&date[..4], "year", line)?,
                month: parse_int(&date[4..6], "month", line)?,
                day: parse_int(&date[6..], "day", line)?,
                time: parse_int(f[1], "time", line)?,
                status: f[3].to_string(),
                lat: parse_coord(f[4], line)?,
                lon: parse_coord(f[5], line)?,
                max_wind: if knots_to_kmh {
                    wind as f64 * KNOTS_TO_KMH
                } else {
                    wind as f64
                },
            });
        }
        if seen != count {
            return Err(Error::Parse {
                line: hline,
                message: format!(
                    "storm {storm_id} ({storm_name}) declares {count} records, found {seen}"
                ),
            });
        }
        out.storms += 1;
        out.storm_counts.push((storm_id, count));
    }
    Ok(out)
}

pub fn parse_hurdat(path: &Path, knots_to_kmh: bool) -> Result<HurdatParse> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_hurdat_str(&text, knots_to_kmh)
}

/// One maximum per year, years strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnualMaxSeries {
    pub years: Vec<i32>,
    pub values: Vec<f64>,
    pub source: String,
    /// Years inside the requested range with no record.
    pub missing_years: Vec<i32>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SeriesRow {
    year: i32,
    value: f64,
}

pub const SERIES_COLUMNS: [&str; 2] = ["year", "value"];

impl AnnualMaxSeries {
    pub fn new(years: Vec<i32>, values: Vec<f64>, source: impl Into<String>) -> Result<Self> {
        if years.len() != values.len() {
            return Err(Error::Domain(format!(
                "{} years but {} values",
                years.len(),
                values.len()
            )));
        }
        if years.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("years must be strictly increasing".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value {v}")));
        }
        Ok(AnnualMaxSeries {
            years,
            values,
            source: source.into(),
            missing_years: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Treats each value as the maximum of a block of `m` observations.
    pub fn to_sample(&self, m: usize) -> Result<BlockMaxSample> {
        BlockMaxSample::new(self.values.clone(), m, self.source.clone())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<SeriesRow> = self
            .years
            .iter()
            .zip(&self.values)
            .map(|(&year, &value)| SeriesRow { year, value })
            .collect();
        write_csv(path, &SERIES_COLUMNS, &rows)
    }
}

/// Per-year maximum wind over all records with year in `range` (inclusive).
pub fn annual_maxima(records: &[TrackRecord], range: (i32, i32)) -> Result<AnnualMaxSeries> {
    let (lo, hi) = range;
    if lo > hi {
        return Err(Error::Domain(format!("empty year range {lo}..={hi}")));
    }
    let mut best: BTreeMap<i32, f64> = BTreeMap::new();
    for r in records.iter().filter(|r| (lo..=hi).contains(&r.year)) {
        let e = best.entry(r.year).or_insert(f64::NEG_INFINITY);
        *e = e.max(r.max_wind);
    }
    if best.is_empty() {
        return Err(Error::Domain(format!("no records in {lo}..={hi}")));
    }
    let missing_years = (lo..=hi).filter(|y| !best.contains_key(y)).collect();
    let mut s = AnnualMaxSeries::new(
        best.keys().copied().collect(),
        best.values().copied().collect(),
        format!("annual maxima {lo}-{hi}"),
    )?;
    s.missing_years = missing_years;
    Ok(s)
}

/// Reads a series from CSV. Accepts a `year,value` header, or a single
/// column of values (years are then numbered from 1).
pub fn read_series_csv(path: &Path) -> Result<AnnualMaxSeries> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(bytes.as_slice());
    let mut years = Vec::new();
    let mut values = Vec::new();
    let mut two_col = None;
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 1;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        // a header row is any first row whose last field is not numeric
        if i == 0
            && rec
                .iter()
                .next_back()
                .is_some_and(|f| f.parse::<f64>().is_err())
        {
            two_col = Some(rec.len() >= 2);
            continue;
        }
        let two = *two_col.get_or_insert(rec.len() >= 2);
        let need = if two { 2 } else { 1 };
        if rec.len() != need {
            return Err(Error::Parse {
                line,
                message: format!("expected {need} fields, found {}", rec.len()),
            });
        }
        let value: f64 = parse_int(&rec[need - 1], "value", line)?;
        if !value.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("non-finite value {value}"),
            });
        }
        let year = if two {
            parse_int(&rec[0], "year", line)?
        } else {
            values.len() as i32 + 1
        };
        if years.last().is_some_and(|&p| p >= year) {
            return Err(Error::Parse {
                line,
                message: format!("year {year} is not strictly increasing"),
            });
        }
        years.push(year);
        values.push(value);
    }
    AnnualMaxSeries::new(years, values, path.display().to_string())
}
