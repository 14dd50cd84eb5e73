//! Peaks-over-threshold extraction, recurrence intervals, exceeding sizes and
//! their descriptive and correlation statistics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{self, IngestError};
use crate::scalar::Real;
use crate::special;

#[derive(Debug, Error)]
pub enum EventsError {
    #[error("fewer than 2 events (found {0}); no recurrence interval can be formed")]
    TooFewEvents(usize),
    #[error("sample too short: {len} values, need at least {min}")]
    SampleTooShort { len: usize, min: usize },
    #[error("samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("zero variance in the {0} sample")]
    ZeroVariance(&'static str),
    #[error("{side:?} extremes need a quantile {expected}, got {quantile}")]
    QuantileSide { side: Side, quantile: f64, expected: &'static str },
    #[error("invalid event series: {0}")]
    Invalid(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("event csv row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Positive,
    Negative,
}

impl std::str::FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "positive" => Ok(Side::Positive),
            "negative" => Ok(Side::Negative),
            other => Err(format!("unknown side `{other}` (expected positive|negative)")),
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Positive => "positive",
            Side::Negative => "negative",
        })
    }
}

/// How recurrence intervals are matched with exceeding sizes when the two are
/// analysed jointly.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pairing {
    /// The interval that ends at an event goes with that event's size.
    #[default]
    End,
    /// The interval that starts at an event goes with that event's size.
    Start,
}

impl std::str::FromStr for Pairing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "end" => Ok(Pairing::End),
            "start" => Ok(Pairing::Start),
            other => Err(format!("unknown pairing `{other}` (expected end|start)")),
        }
    }
}

/// Which tail defines an extreme and at what quantile level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ExtremeSpec<T: Real> {
    pub quantile: T,
    pub side: Side,
}

impl<T: Real> ExtremeSpec<T> {
    pub fn new(quantile: T, side: Side) -> Result<Self, EventsError> {
        let spec = Self { quantile, side };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), EventsError> {
        let q = self.quantile;
        if !(q > T::zero() && q < T::one()) {
            return Err(IngestError::QuantileOutOfRange(q.to_f64_lossless()).into());
        }
        match self.side {
            Side::Positive if q <= T::half() => Err(EventsError::QuantileSide {
                side: self.side,
                quantile: q.to_f64_lossless(),
                expected: "above 0.5",
            }),
            Side::Negative if q >= T::half() => Err(EventsError::QuantileSide {
                side: self.side,
                quantile: q.to_f64_lossless(),
                expected: "below 0.5",
            }),
            _ => Ok(()),
        }
    }

    /// Empirical quantile of `returns` at this level.
    pub fn threshold(&self, returns: &[T]) -> Result<T, EventsError> {
        Ok(ingest::quantile(returns, self.quantile)?)
    }

    /// Strict exceedance of the threshold in the direction of `side`.
    #[inline]
    pub fn is_extreme(&self, r: T, threshold: T) -> bool {
        match self.side {
            Side::Positive => r > threshold,
            Side::Negative => r < threshold,
        }
    }

    #[inline]
    pub fn exceedance(&self, r: T, threshold: T) -> T {
        match self.side {
            Side::Positive => r - threshold,
            Side::Negative => threshold - r,
        }
    }

    /// Short tag such as `positive_90` or `negative_2.5`.
    pub fn label(&self) -> String {
        let pct = (self.quantile.to_f64_lossless() * 1e6).round() / 1e4;
        format!("{}_{}", self.side, pct)
    }
}

/// Extremes in day order with their recurrence intervals and exceeding sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EventSeries<T: Real> {
    threshold: T,
    indices: Vec<usize>,
    tau: Vec<usize>,
    y: Vec<T>,
}

impl<T: Real> EventSeries<T> {
    /// Builds a series from extreme-day indices and exceeding sizes.
    pub fn from_parts(threshold: T, indices: Vec<usize>, y: Vec<T>) -> Result<Self, EventsError> {
        if indices.len() != y.len() {
            return Err(EventsError::LengthMismatch(indices.len(), y.len()));
        }
        if indices.len() < 2 {
            return Err(EventsError::TooFewEvents(indices.len()));
        }
        if indices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(EventsError::Invalid("indices must be strictly increasing".into()));
        }
        if y.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return Err(EventsError::Invalid("exceeding sizes must be finite and non-negative".into()));
        }
        let tau = indices.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self { threshold, indices, tau, y })
    }

    pub fn threshold(&self) -> T {
        self.threshold
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Recurrence intervals in days; `tau()[k]` ends at event `k + 1`.
    pub fn tau(&self) -> &[usize] {
        &self.tau
    }

    pub fn tau_values(&self) -> Vec<T> {
        self.tau.iter().map(|&t| T::from_count(t)).collect()
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Aligned (τ, y) pairs.
    pub fn paired(&self, pairing: Pairing) -> (Vec<T>, Vec<T>) {
        let tau = self.tau_values();
        let y = match pairing {
            Pairing::End => self.y[1..].to_vec(),
            Pairing::Start => self.y[..self.y.len() - 1].to_vec(),
        };
        (tau, y)
    }
}

/// Writes `index,tau,y` CSV; the first event has an empty `tau`.
pub fn write_events<T: Real, W: std::io::Write>(writer: W, events: &EventSeries<T>) -> Result<(), EventsError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["index", "tau", "y"])?;
    for (k, (&i, y)) in events.indices.iter().zip(&events.y).enumerate() {
        let tau = if k == 0 { String::new() } else { events.tau[k - 1].to_string() };
        w.write_record([i.to_string(), tau, y.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads CSV written by [`write_events`]. The threshold is not stored in the
/// file and is set to `threshold`; `tau` is checked against the indices.
pub fn read_events<T: Real, R: std::io::Read>(reader: R, threshold: T) -> Result<EventSeries<T>, EventsError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["index", "tau", "y"] {
        let found = header.iter().collect::<Vec<_>>().join(",");
        return Err(EventsError::MalformedRow { row: 0, reason: format!("expected header `index,tau,y`, found `{found}`") });
    }
    let mut indices: Vec<usize> = Vec::new();
    let mut y = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let bad = |reason: String| EventsError::MalformedRow { row, reason };
        let rec = rec?;
        let index: usize = rec[0].parse().map_err(|e| bad(format!("bad index `{}`: {e}", &rec[0])))?;
        if let Some(&prev) = indices.last() {
            let tau: usize = rec[1].parse().map_err(|e| bad(format!("bad tau `{}`: {e}", &rec[1])))?;
            if index.checked_sub(prev) != Some(tau) {
                return Err(bad(format!("tau {tau} does not match indices {prev} and {index}")));
            }
        }
        let size: f64 = rec[2].parse().map_err(|e| bad(format!("bad size `{}`: {e}", &rec[2])))?;
        indices.push(index);
        y.push(T::lit(size));
    }
    EventSeries::from_parts(threshold, indices, y)
}

/// Days with r strictly beyond `threshold` on the side given by `spec`.
pub fn extract_events<T: Real>(returns: &[T], spec: &ExtremeSpec<T>, threshold: T) -> Result<EventSeries<T>, EventsError> {
    let mut indices = Vec::new();
    let mut y = Vec::new();
    for (i, &r) in returns.iter().enumerate() {
        if spec.is_extreme(r, threshold) {
            indices.push(i);
            y.push(spec.exceedance(r, threshold));
        }
    }
    if indices.len() < 2 {
        return Err(EventsError::TooFewEvents(indices.len()));
    }
    let tau = indices.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(EventSeries { threshold, indices, tau, y })
}

/// Moment statistics in the layout of a descriptive-statistics table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DescriptiveStats<T: Real> {
    pub obsv: usize,
    pub mean: T,
    pub max: T,
    pub min: T,
    pub median: T,
    /// Sample standard deviation (n − 1 divisor).
    pub stdev: T,
    pub skew: T,
    /// Non-excess kurtosis; a normal sample gives about 3.
    pub kurt: T,
    /// Set when the sample is constant and skew/kurt are reported as 0.
    pub degenerate: bool,
}

pub fn describe<T: Real>(x: &[T]) -> Result<DescriptiveStats<T>, EventsError> {
    let n = x.len();
    if n < 2 {
        return Err(EventsError::SampleTooShort { len: n, min: 2 });
    }
    let nf = T::from_count(n);
    let mean = x.iter().copied().sum::<T>() / nf;
    let (mut m2, mut m3, mut m4) = (T::zero(), T::zero(), T::zero());
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 = m2 + d2;
        m3 = m3 + d2 * d;
        m4 = m4 + d2 * d2;
    }
    let stdev = (m2 / T::from_count(n - 1)).sqrt();
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite sample"));
    let degenerate = m2 <= T::zero();
    let (skew, kurt) = if degenerate {
        (T::zero(), T::zero())
    } else {
        (m3 / m2.powf(T::lit(1.5)), m4 / (m2 * m2))
    };
    Ok(DescriptiveStats {
        obsv: n,
        mean,
        max: sorted[n - 1],
        min: sorted[0],
        median: ingest::quantile_sorted(&sorted, T::half()),
        stdev,
        skew,
        kurt,
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Correlation<T: Real> {
    pub rho: T,
    /// Two-sided p-value of the t test with n − 2 degrees of freedom.
    pub p_value: T,
    pub n: usize,
}

/// Pearson correlation with its t-test p-value.
pub fn pearson_test<T: Real>(x: &[T], y: &[T]) -> Result<Correlation<T>, EventsError> {
    if x.len() != y.len() {
        return Err(EventsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(EventsError::SampleTooShort { len: n, min: 3 });
    }
    let nf = T::from_count(n);
    let mx = x.iter().copied().sum::<T>() / nf;
    let my = y.iter().copied().sum::<T>() / nf;
    let (mut sxx, mut syy, mut sxy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxx = sxx + da * da;
        syy = syy + db * db;
        sxy = sxy + da * db;
    }
    if sxx <= T::zero() {
        return Err(EventsError::ZeroVariance("first"));
    }
    if syy <= T::zero() {
        return Err(EventsError::ZeroVariance("second"));
    }
    let rho = (sxy / (sxx.sqrt() * syy.sqrt())).max(-T::one()).min(T::one());
    let dof = T::from_count(n - 2);
    let one_minus = T::one() - rho * rho;
    let p_value = if one_minus <= T::zero() {
        T::zero()
    } else {
        let t = rho * (dof / one_minus).sqrt();
        special::student_t_two_sided(t, dof)
    };
    Ok(Correlation { rho, p_value, n })
}
