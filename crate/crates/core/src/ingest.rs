//! Dated price and return series: CSV loading, validation, log returns and
//! empirical quantiles.
//!
//! Files are CSV with the header `date,value`, ISO-8601 dates and a decimal
//! point. Rows must be in strictly increasing date order. Time is measured in
//! rows (trading days); calendar gaps are not imputed.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::{Datelike, Days, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("expected header `date,value`, found `{0}`")]
    BadHeader(String),
    #[error("row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("row {row}: price {value} is not positive")]
    NonPositivePrice { row: usize, value: f64 },
    #[error("row {row}: value is not finite")]
    NonFinite { row: usize },
    #[error("row {row}: date {date} does not follow the previous row's date")]
    NonMonotoneDate { row: usize, date: NaiveDate },
    #[error("dates and values differ in length ({dates} vs {values})")]
    LengthMismatch { dates: usize, values: usize },
    #[error("series too short: {len} rows, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("quantile level {0} outside (0, 1)")]
    QuantileOutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesFormat {
    Price,
    Return,
}

impl std::str::FromStr for SeriesFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "price" => Ok(SeriesFormat::Price),
            "return" => Ok(SeriesFormat::Return),
            other => Err(format!("unknown series format `{other}` (expected price|return)")),
        }
    }
}

/// Index levels I(t) on consecutive trading days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries<T> {
    dates: Vec<NaiveDate>,
    prices: Vec<T>,
}

/// Daily log returns r(t) = ln I(t) − ln I(t−1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries<T> {
    dates: Vec<NaiveDate>,
    returns: Vec<T>,
}

fn check_dates(dates: &[NaiveDate]) -> Result<(), IngestError> {
    for (i, w) in dates.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(IngestError::NonMonotoneDate { row: i + 2, date: w[1] });
        }
    }
    Ok(())
}

impl<T: Real> PriceSeries<T> {
    pub fn new(dates: Vec<NaiveDate>, prices: Vec<T>) -> Result<Self, IngestError> {
        if dates.len() != prices.len() {
            return Err(IngestError::LengthMismatch { dates: dates.len(), values: prices.len() });
        }
        check_dates(&dates)?;
        for (i, &p) in prices.iter().enumerate() {
            if !p.is_finite() {
                return Err(IngestError::NonFinite { row: i + 1 });
            }
            if p <= T::zero() {
                return Err(IngestError::NonPositivePrice { row: i + 1, value: p.to_f64_lossless() });
            }
        }
        Ok(Self { dates, prices })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn prices(&self) -> &[T] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    /// Log returns; the first date is consumed.
    pub fn to_returns(&self) -> Result<ReturnSeries<T>, IngestError> {
        if self.len() < 2 {
            return Err(IngestError::TooShort { len: self.len(), min: 2 });
        }
        let returns = self.prices.windows(2).map(|w| w[1].ln() - w[0].ln()).collect();
        Ok(ReturnSeries {
            dates: self.dates[1..].to_vec(),
            returns,
        })
    }
}

impl<T: Real> ReturnSeries<T> {
    pub fn new(dates: Vec<NaiveDate>, returns: Vec<T>) -> Result<Self, IngestError> {
        if dates.len() != returns.len() {
            return Err(IngestError::LengthMismatch { dates: dates.len(), values: returns.len() });
        }
        check_dates(&dates)?;
        if let Some(i) = returns.iter().position(|r| !r.is_finite()) {
            return Err(IngestError::NonFinite { row: i + 1 });
        }
        Ok(Self { dates, returns })
    }

    /// Attaches consecutive weekday dates starting 2000-01-03.
    pub fn with_synthetic_dates(returns: Vec<T>) -> Result<Self, IngestError> {
        Self::new(weekday_calendar(returns.len()), returns)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn returns(&self) -> &[T] {
        &self.returns
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    /// The first `len` observations.
    pub fn truncated(&self, len: usize) -> Self {
        let len = len.min(self.len());
        Self {
            dates: self.dates[..len].to_vec(),
            returns: self.returns[..len].to_vec(),
        }
    }

    pub fn quantile(&self, q: T) -> Result<T, IngestError> {
        quantile(&self.returns, q)
    }
}

/// `n` consecutive weekdays starting Monday 2000-01-03.
pub fn weekday_calendar(n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.checked_add_days(Days::new(1)).expect("date overflow");
    }
    out
}

/// Empirical quantile with linear interpolation between order statistics at
/// rank q(n−1)+1.
pub fn quantile<T: Real>(values: &[T], q: T) -> Result<T, IngestError> {
    if !(q > T::zero() && q < T::one()) {
        return Err(IngestError::QuantileOutOfRange(q.to_f64_lossless()));
    }
    if values.is_empty() {
        return Err(IngestError::TooShort { len: 0, min: 1 });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    Ok(quantile_sorted(&sorted, q))
}

pub(crate) fn quantile_sorted<T: Real>(sorted: &[T], q: T) -> T {
    let n = sorted.len();
    let h = q * T::from_count(n - 1);
    let lo = h.floor().to_usize().unwrap_or(0).min(n - 1);
    let frac = h - T::from_count(lo);
    if lo + 1 >= n || frac == T::zero() {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// A loaded file.
#[derive(Debug, Clone, PartialEq)]
pub enum Series<T> {
    Price(PriceSeries<T>),
    Return(ReturnSeries<T>),
}

impl<T: Real> Series<T> {
    /// Returns, deriving them from prices when needed.
    pub fn into_returns(self) -> Result<ReturnSeries<T>, IngestError> {
        match self {
            Series::Price(p) => p.to_returns(),
            Series::Return(r) => Ok(r),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Series::Price(p) => p.len(),
            Series::Return(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn load_series<T: Real>(path: impl AsRef<Path>, format: SeriesFormat) -> Result<Series<T>, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
    read_series(file, format)
}

/// Parses `date,value` CSV. Row numbers in errors count data rows from 1.
pub fn read_series<T: Real, R: Read>(reader: R, format: SeriesFormat) -> Result<Series<T>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() != 2 || &header[0] != "date" || &header[1] != "value" {
        return Err(IngestError::BadHeader(header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| IngestError::MalformedRow { row, reason: e.to_string() })?;
        if rec.len() != 2 {
            return Err(IngestError::MalformedRow { row, reason: format!("expected 2 fields, found {}", rec.len()) });
        }
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
            .map_err(|e| IngestError::MalformedRow { row, reason: format!("bad date `{}`: {e}", &rec[0]) })?;
        let value: f64 = rec[1]
            .parse()
            .map_err(|e| IngestError::MalformedRow { row, reason: format!("bad value `{}`: {e}", &rec[1]) })?;
        if let Some(&prev) = dates.last() {
            if date <= prev {
                return Err(IngestError::NonMonotoneDate { row, date });
            }
        }
        if !value.is_finite() {
            return Err(IngestError::NonFinite { row });
        }
        if format == SeriesFormat::Price && value <= 0.0 {
            return Err(IngestError::NonPositivePrice { row, value });
        }
        dates.push(date);
        values.push(T::lit(value));
    }
    Ok(match format {
        SeriesFormat::Price => Series::Price(PriceSeries::new(dates, values)?),
        SeriesFormat::Return => Series::Return(ReturnSeries::new(dates, values)?),
    })
}

/// Writes `date,value` CSV readable by [`read_series`].
pub fn write_series<T: Real, W: Write>(writer: W, dates: &[NaiveDate], values: &[T]) -> Result<(), IngestError> {
    if dates.len() != values.len() {
        return Err(IngestError::LengthMismatch { dates: dates.len(), values: values.len() });
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "value"])?;
    for (d, v) in dates.iter().zip(values) {
        w.write_record([d.format("%Y-%m-%d").to_string(), v.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn prices_csv(values: &[&str]) -> String {
        let mut s = String::from("date,value\n");
        for (d, v) in weekday_calendar(values.len()).iter().zip(values) {
            s.push_str(&format!("{d},{v}\n"));
        }
        s
    }

    #[test]
    fn loads_three_prices() {
        let csv = prices_csv(&["100", "110", "105"]);
        let s = read_series::<f64, _>(csv.as_bytes(), SeriesFormat::Price).unwrap();
        assert_eq!(s.len(), 3);
        let r = s.into_returns().unwrap();
        assert_eq!(r.len(), 2);
        assert!((r.returns()[0] - 1.1_f64.ln()).abs() < 1e-15);
        assert!((r.returns()[1] - (105.0_f64 / 110.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn zero_price_names_its_row() {
        let csv = prices_csv(&["1", "2", "3", "4", "5", "6", "0", "8"]);
        let err = read_series::<f64, _>(csv.as_bytes(), SeriesFormat::Price).unwrap_err();
        assert!(matches!(err, IngestError::NonPositivePrice { row: 7, .. }), "{err}");
        assert!(err.to_string().contains("row 7"));
    }

    #[test]
    fn loads_thousand_returns() {
        let vals: Vec<String> = (0..1000).map(|i| format!("{}", (i as f64 * 0.37).sin() * 0.01)).collect();
        let refs: Vec<&str> = vals.iter().map(|s| s.as_str()).collect();
        let csv = prices_csv(&refs);
        let s = read_series::<f64, _>(csv.as_bytes(), SeriesFormat::Return).unwrap();
        assert_eq!(s.len(), 1000);
    }

    #[test]
    fn rejects_duplicate_dates_and_bad_rows() {
        let csv = "date,value\n2020-01-02,1\n2020-01-02,2\n";
        let err = read_series::<f64, _>(csv.as_bytes(), SeriesFormat::Price).unwrap_err();
        assert!(matches!(err, IngestError::NonMonotoneDate { row: 2, .. }));
        let csv = "date,value\n2020-01-02,1\n2020-01-03,abc\n";
        let err = read_series::<f64, _>(csv.as_bytes(), SeriesFormat::Price).unwrap_err();
        assert!(matches!(err, IngestError::MalformedRow { row: 2, .. }));
        let csv = "when,value\n2020-01-02,1\n";
        assert!(matches!(
            read_series::<f64, _>(csv.as_bytes(), SeriesFormat::Price),
            Err(IngestError::BadHeader(_))
        ));
        assert!(matches!(
            load_series::<f64>("/nonexistent/prices.csv", SeriesFormat::Price),
            Err(IngestError::Io { .. })
        ));
    }

    #[test]
    fn flat_and_exponential_prices() {
        let d = weekday_calendar(2);
        let r = PriceSeries::new(d.clone(), vec![100.0, 100.0]).unwrap().to_returns().unwrap();
        assert_eq!(r.returns(), &[0.0]);
        let r = PriceSeries::new(d, vec![100.0, 100.0 * std::f64::consts::E]).unwrap().to_returns().unwrap();
        assert!((r.returns()[0] - 1.0).abs() < 1e-15);
        let short = PriceSeries::new(weekday_calendar(1), vec![1.0_f64]).unwrap();
        assert!(matches!(short.to_returns(), Err(IngestError::TooShort { .. })));
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(quantile(&[5.0, 1.0, 3.0, 2.0, 4.0], 0.5).unwrap(), 3.0);
        assert_eq!(quantile(&[-2.0, -1.0, 1.0, 2.0], 0.5).unwrap(), 0.0);
        assert!((quantile(&[1.0_f64, 2.0, 3.0, 4.0], 0.25).unwrap() - 1.75).abs() < 1e-15);
        assert!(quantile::<f64>(&[], 0.5).is_err());
        assert!(quantile(&[1.0], 1.0).is_err());
        assert!(quantile(&[1.0], 0.0).is_err());
    }

    #[test]
    fn normal_quantile_matches_sorted_sample_oracle() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let q = quantile(&xs, 0.9).unwrap();
        // oracle: order statistics around rank 0.9 n
        let mut s = xs.clone();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(q >= s[8998] && q <= s[9000]);
        assert!((q - 1.2816).abs() < 0.05);
    }

    #[test]
    fn write_then_read_round_trips() {
        let dates = weekday_calendar(4);
        let vals = vec![0.1_f64, -1.0 / 3.0, 2.5e-17, std::f64::consts::PI];
        let mut buf = Vec::new();
        write_series(&mut buf, &dates, &vals).unwrap();
        let back = read_series::<f64, _>(buf.as_slice(), SeriesFormat::Return).unwrap();
        assert_eq!(back, Series::Return(ReturnSeries::new(dates, vals).unwrap()));
    }

    proptest! {
        #[test]
        fn returns_invariant_to_price_scaling(
            prices in proptest::collection::vec(0.01f64..1e4, 2..50),
            k in 1e-3f64..1e3,
        ) {
            let d = weekday_calendar(prices.len());
            let a = PriceSeries::new(d.clone(), prices.clone()).unwrap().to_returns().unwrap();
            let scaled: Vec<f64> = prices.iter().map(|p| p * k).collect();
            let b = PriceSeries::new(d, scaled).unwrap().to_returns().unwrap();
            for (x, y) in a.returns().iter().zip(b.returns()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn quantile_is_monotone(
            xs in proptest::collection::vec(-1.0f64..1.0, 1..200),
            q1 in 0.001f64..0.999,
            q2 in 0.001f64..0.999,
        ) {
            let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
            prop_assert!(quantile(&xs, lo).unwrap() <= quantile(&xs, hi).unwrap());
        }
    }
}
