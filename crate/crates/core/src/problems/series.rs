use std::path::Path;

use crate::error::{Error, Result};

/// Options for [`load_series_csv`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SeriesOptions {
    /// Treat the first column as a timestamp rather than a sensor.
    pub timestamp_column: bool,
    /// Rescale each sensor column to `[0, 1]` by its min and max.
    pub normalize: bool,
}

/// A multi-sensor time series held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSource {
    sensors: Vec<String>,
    timestamps: Option<Vec<f64>>,
    rows: Vec<Vec<f64>>,
}

impl SeriesSource {
    pub fn from_rows(sensors: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            if r.len() != sensors.len() {
                return Err(Error::Parse {
                    line: i as u64 + 2,
                    message: format!("expected {} values, found {}", sensors.len(), r.len()),
                });
            }
        }
        Ok(Self {
            sensors,
            timestamps: None,
            rows,
        })
    }

    pub fn sensor_names(&self) -> &[String] {
        &self.sensors
    }

    pub fn num_sensors(&self) -> usize {
        self.sensors.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn timestamps(&self) -> Option<&[f64]> {
        self.timestamps.as_deref()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// `(timestamp, values)` per row; the timestamp is the row index when
    /// the file had none.
    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.rows.iter().enumerate().map(move |(i, r)| {
            let t = self.timestamps.as_ref().map_or(i as f64, |ts| ts[i]);
            (t, r.as_slice())
        })
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn normalize(&mut self) {
        for j in 0..self.sensors.len() {
            let (lo, hi) = self
                .rows
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[j]), hi.max(r[j])));
            let span = hi - lo;
            for r in &mut self.rows {
                r[j] = if span > 0.0 { (r[j] - lo) / span } else { 0.0 };
            }
        }
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
            line,
            message: format!("expected {expected_len} fields, found {len}"),
        },
        csv::ErrorKind::Io(io) => Error::Io(io.to_string()),
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Read a header line followed by rows of comma-separated decimals.
pub fn load_series_csv(path: impl AsRef<Path>, options: SeriesOptions) -> Result<SeriesSource> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(csv_error)?;
    let header: Vec<String> = reader.headers().map_err(csv_error)?.iter().map(str::to_owned).collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Parse {
            line: 1,
            message: "missing header".into(),
        });
    }
    let skip = usize::from(options.timestamp_column);
    if header.len() <= skip {
        return Err(Error::Parse {
            line: 1,
            message: "no sensor columns".into(),
        });
    }
    let mut rows = Vec::new();
    let mut timestamps = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let mut values = Vec::with_capacity(record.len());
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("not a number: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite value {field:?}"),
                });
            }
            values.push(v);
        }
        if skip == 1 {
            timestamps.push(values.remove(0));
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no data rows".into(),
        });
    }
    let mut source = SeriesSource {
        sensors: header[skip..].to_vec(),
        timestamps: (skip == 1).then_some(timestamps),
        rows,
    };
    if options.normalize {
        source.normalize();
    }
    Ok(source)
}

fn horizon(gamma: f64, tol: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("gamma must lie in [0, 1), got {gamma}")));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidParameter(format!("tolerance must lie in (0, 1), got {tol}")));
    }
    // smallest K with γ^(K+1) < tol (1 − γ), which bounds the dropped tail
    // by tol · max|x|
    let bound = tol * (1.0 - gamma);
    let mut k = 0usize;
    let mut p = gamma;
    while p >= bound {
        p *= gamma;
        k += 1;
    }
    Ok(k)
}

/// `Σ_{k=0}^{K} γ^k x[t+k+1]`, truncated at the first `K` for which the
/// neglected tail `γ^(K+1) / (1 − γ)` drops below `tol`. Terms past the end
/// of the series are dropped too.
pub fn ideal_discounted_return(series: &[f64], gamma: f64, t: usize, tol: f64) -> Result<f64> {
    let k = horizon(gamma, tol)?;
    if t + 1 >= series.len() {
        return Err(Error::InvalidParameter(format!(
            "no data after index {t} in a series of length {}",
            series.len()
        )));
    }
    let end = (t + k + 2).min(series.len());
    let mut g = 0.0;
    let mut p = 1.0;
    for x in &series[t + 1..end] {
        g += p * x;
        p *= gamma;
    }
    Ok(g)
}

/// [`ideal_discounted_return`] for every index but the last, in one
/// backward pass.
pub fn ideal_returns(series: &[f64], gamma: f64, tol: f64) -> Result<Vec<f64>> {
    let k = horizon(gamma, tol)?;
    let n = series.len();
    if n < 2 {
        return Ok(Vec::new());
    }
    let tail = gamma.powi(k as i32 + 1);
    let at = |i: usize| series.get(i).copied().unwrap_or(0.0);
    let mut out = vec![0.0; n - 1];
    let mut g = 0.0;
    for t in (0..n - 1).rev() {
        // window [t+1, t+k+1] slides back by one
        g = at(t + 1) + gamma * g - tail * at(t + k + 2);
        out[t] = g;
    }
    Ok(out)
}
