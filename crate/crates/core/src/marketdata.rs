//! Price ingestion, calendar alignment and log-return panels.
//!
//! Crypto assets trade every calendar day, so a panel uses the full 7-day
//! calendar over the common date range. A conventional benchmark (5-day
//! calendar) is padded with zero returns on the days it does not trade;
//! crypto gaps are rejected as data errors rather than padded.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};

/// Dated close prices for one asset, strictly increasing dates, prices > 0.
#[derive(Debug, Clone)]
pub struct PriceSeries {
    pub asset_id: String,
    observations: Vec<(NaiveDate, f64)>,
}

impl PriceSeries {
    /// Builds a series from unordered observations; sorts by date and
    /// enforces the invariants.
    pub fn new(asset_id: impl Into<String>, mut obs: Vec<(NaiveDate, f64)>) -> Result<Self> {
        let asset_id = asset_id.into();
        obs.sort_by_key(|(d, _)| *d);
        for w in obs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateDate {
                    asset: asset_id,
                    date: w[0].0,
                });
            }
        }
        if let Some(&(date, price)) = obs.iter().find(|(_, p)| !crate::numerics::is_positive(*p)) {
            return Err(Error::NonPositivePrice {
                asset: asset_id,
                date,
                price,
            });
        }
        Ok(Self {
            asset_id,
            observations: obs,
        })
    }

    pub fn observations(&self) -> &[(NaiveDate, f64)] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.observations.first().map(|(d, _)| *d)
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.observations.last().map(|(d, _)| *d)
    }
}

/// Column mapping for a price CSV.
#[derive(Debug, Clone)]
pub struct CsvFormat {
    pub date_column: String,
    pub close_column: String,
}

impl Default for CsvFormat {
    fn default() -> Self {
        Self {
            date_column: "date".into(),
            close_column: "close".into(),
        }
    }
}

/// Loads a `date,close` CSV (ISO-8601 dates, header row) into a sorted series.
pub fn load_prices(path: impl AsRef<Path>, format: &CsvFormat, asset_id: &str) -> Result<PriceSeries> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io {
            path: path_str.clone(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
        },
        _ => Error::Parse {
            path: path_str.clone(),
            line: 0,
            message: e.to_string(),
        },
    })?;

    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: path_str.clone(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            path: path_str.clone(),
            line: 1,
            message: format!("missing column `{name}`"),
        })
    };
    let date_idx = col(&format.date_column)?;
    let close_idx = col(&format.close_column)?;

    let mut obs = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // header is line 1
        let record = record.map_err(|e| Error::Parse {
            path: path_str.clone(),
            line,
            message: e.to_string(),
        })?;
        let date_raw = record.get(date_idx).unwrap_or("");
        let close_raw = record.get(close_idx).unwrap_or("");
        let date = NaiveDate::parse_from_str(date_raw, "%Y-%m-%d").map_err(|e| Error::Parse {
            path: path_str.clone(),
            line,
            message: format!("bad date `{date_raw}`: {e}"),
        })?;
        let close: f64 = close_raw.trim().parse().map_err(|e| Error::Parse {
            path: path_str.clone(),
            line,
            message: format!("bad close `{close_raw}`: {e}"),
        })?;
        obs.push((date, close));
    }
    PriceSeries::new(asset_id, obs)
}

/// Log returns `ln(S_t / S_{t-1})`, one per consecutive observation pair.
pub fn log_returns(prices: &PriceSeries) -> Result<Vec<(NaiveDate, f64)>> {
    if prices.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 prices for {}, got {}",
            prices.asset_id,
            prices.len()
        )));
    }
    Ok(prices
        .observations
        .windows(2)
        .map(|w| (w[1].0, (w[1].1 / w[0].1).ln()))
        .collect())
}

/// Aligned log-return panel over a shared 7-day calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    pub assets: Vec<String>,
    pub dates: Vec<NaiveDate>,
    /// Row-major T x d matrix; `returns[t][i]` is asset i's return on `dates[t]`.
    pub returns: Vec<Vec<f64>>,
}

impl ReturnPanel {
    pub fn n_obs(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    /// Column view of one asset's return series.
    pub fn column(&self, asset_idx: usize) -> Vec<f64> {
        self.returns.iter().map(|row| row[asset_idx]).collect()
    }

    /// Contiguous sub-panel of rows `[start, end)`.
    pub fn slice_rows(&self, start: usize, end: usize) -> ReturnPanel {
        ReturnPanel {
            assets: self.assets.clone(),
            dates: self.dates[start..end].to_vec(),
            returns: self.returns[start..end].to_vec(),
        }
    }

    /// Writes the panel as CSV: `date` first, one column per asset.
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "date")?;
        for a in &self.assets {
            write!(w, ",{a}")?;
        }
        writeln!(w)?;
        for (date, row) in self.dates.iter().zip(&self.returns) {
            write!(w, "{date}")?;
            for r in row {
                write!(w, ",{r}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Reads a panel back from the CSV layout written by [`to_csv`].
    pub fn from_csv<R: std::io::Read>(r: R) -> Result<ReturnPanel> {
        let mut reader = csv::Reader::from_reader(r);
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse {
                path: "<panel>".into(),
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        let assets: Vec<String> = headers.iter().skip(1).map(|s| s.to_string()).collect();
        let mut dates = Vec::new();
        let mut returns = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Parse {
                path: "<panel>".into(),
                line: i + 2,
                message: e.to_string(),
            })?;
            let date = NaiveDate::parse_from_str(record.get(0).unwrap_or(""), "%Y-%m-%d")
                .map_err(|e| Error::Parse {
                    path: "<panel>".into(),
                    line: i + 2,
                    message: e.to_string(),
                })?;
            let row: std::result::Result<Vec<f64>, _> =
                record.iter().skip(1).map(|s| s.parse::<f64>()).collect();
            dates.push(date);
            returns.push(row.map_err(|e| Error::Parse {
                path: "<panel>".into(),
                line: i + 2,
                message: e.to_string(),
            })?);
        }
        Ok(ReturnPanel {
            assets,
            dates,
            returns,
        })
    }
}

/// Aligns crypto series (7-day calendar, gaps rejected) and an optional
/// benchmark (zero returns padded on its non-trading days) into one panel.
pub fn align_panel(series: &[PriceSeries], benchmark: Option<&PriceSeries>) -> Result<ReturnPanel> {
    if series.is_empty() && benchmark.is_none() {
        return Err(Error::Alignment("no input series".into()));
    }

    let mut start = NaiveDate::MIN;
    let mut end = NaiveDate::MAX;
    for s in series.iter().chain(benchmark) {
        let (Some(first), Some(last)) = (s.first_date(), s.last_date()) else {
            return Err(Error::Alignment(format!("series {} is empty", s.asset_id)));
        };
        start = start.max(first);
        end = end.min(last);
    }
    if start >= end {
        return Err(Error::Alignment(format!(
            "date ranges do not overlap: common range [{start}, {end}] has no returns"
        )));
    }

    // Return dates: every calendar day after the common start.
    let mut dates = Vec::new();
    let mut d = start.succ_opt().unwrap();
    while d <= end {
        dates.push(d);
        d = d.succ_opt().unwrap();
    }

    let mut assets = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();

    for s in series {
        let by_date: BTreeMap<NaiveDate, f64> = s.observations.iter().copied().collect();
        let mut col = Vec::with_capacity(dates.len());
        let mut prev_date = start;
        for &date in &dates {
            let (Some(&p0), Some(&p1)) = (by_date.get(&prev_date), by_date.get(&date)) else {
                return Err(Error::Alignment(format!(
                    "asset {} is missing a daily close near {date}; crypto gaps are not padded",
                    s.asset_id
                )));
            };
            col.push((p1 / p0).ln());
            prev_date = date;
        }
        assets.push(s.asset_id.clone());
        columns.push(col);
    }

    if let Some(b) = benchmark {
        let by_date: BTreeMap<NaiveDate, f64> = b.observations.iter().copied().collect();
        // Last benchmark close at or before the common start.
        let mut prev = by_date
            .range(..=start)
            .next_back()
            .map(|(_, &p)| p)
            .ok_or_else(|| {
                Error::Alignment(format!("benchmark {} has no close at or before {start}", b.asset_id))
            })?;
        let mut col = Vec::with_capacity(dates.len());
        for &date in &dates {
            match by_date.get(&date) {
                Some(&p) => {
                    col.push((p / prev).ln());
                    prev = p;
                }
                None => col.push(0.0), // weekend or holiday
            }
        }
        assets.push(b.asset_id.clone());
        columns.push(col);
    }

    let returns = (0..dates.len())
        .map(|t| columns.iter().map(|c| c[t]).collect())
        .collect();
    Ok(ReturnPanel {
        assets,
        dates,
        returns,
    })
}
