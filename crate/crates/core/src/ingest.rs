//! Measurement logs, channelization and coordinate normalization.
//!
//! The canonical measurement file is UTF-8, comma-delimited, with the mandatory
//! header `timestamp_s,site_id,lat_deg,lon_deg,freq_mhz,power_dbm`. Lines
//! starting with `#` are comments.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geostat::Sample2D;

/// Column order of the measurement file header.
pub const MEASUREMENT_HEADER: [&str; 6] = [
    "timestamp_s",
    "site_id",
    "lat_deg",
    "lon_deg",
    "freq_mhz",
    "power_dbm",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("line {line}: malformed value in column `{column}`: {message}")]
    Malformed {
        line: u64,
        column: String,
        message: String,
    },
    #[error("line {line}: column `{column}` violates invariant {invariant}")]
    Invalid {
        line: u64,
        column: String,
        invariant: String,
    },
    #[error("bad header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("frequency {freq_mhz} MHz outside channel grid [{lo}, {hi})")]
    FrequencyOutOfRange { freq_mhz: f64, lo: f64, hi: f64 },
    #[error("invalid channel grid: {0}")]
    InvalidGrid(String),
    #[error("degenerate coordinate frame: all {n} points are co-located")]
    DegenerateFrame { n: usize },
    #[error("coordinate frame needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("csv: {0}")]
    Csv(String),
}

/// One timestamped, geolocated received-power sample at one frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub timestamp_s: f64,
    pub site_id: String,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub freq_mhz: f64,
    pub power_dbm: f64,
}

impl Measurement {
    /// Checks every field invariant, returning the offending column and the
    /// violated invariant.
    pub fn check(&self) -> Result<(), (&'static str, &'static str)> {
        let finite_in = |v: f64, lo: f64, hi: f64| v.is_finite() && v >= lo && v <= hi;
        if !(self.timestamp_s.is_finite() && self.timestamp_s >= 0.0) {
            return Err(("timestamp_s", "timestamp_s >= 0"));
        }
        if self.site_id.is_empty() {
            return Err(("site_id", "site_id nonempty"));
        }
        if !finite_in(self.lat_deg, -90.0, 90.0) {
            return Err(("lat_deg", "lat_deg in [-90, 90]"));
        }
        if !finite_in(self.lon_deg, -180.0, 180.0) {
            return Err(("lon_deg", "lon_deg in [-180, 180]"));
        }
        if !(self.freq_mhz.is_finite() && self.freq_mhz > 0.0) {
            return Err(("freq_mhz", "freq_mhz > 0"));
        }
        if !finite_in(self.power_dbm, -200.0, 50.0) {
            return Err(("power_dbm", "power_dbm in [-200, 50]"));
        }
        Ok(())
    }
}

/// Parses a measurement stream. Input order is preserved.
pub fn parse_measurements(text: &str) -> Result<Vec<Measurement>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());

    let header = reader
        .headers()
        .map_err(|e| IngestError::Csv(e.to_string()))?
        .clone();
    let found: Vec<&str> = header.iter().collect();
    if found != MEASUREMENT_HEADER {
        return Err(IngestError::Header {
            expected: MEASUREMENT_HEADER.join(","),
            found: found.join(","),
        });
    }

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| IngestError::Csv(e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != MEASUREMENT_HEADER.len() {
            return Err(IngestError::Malformed {
                line,
                column: MEASUREMENT_HEADER
                    .get(record.len())
                    .unwrap_or(&"<extra>")
                    .to_string(),
                message: format!("expected 6 fields, found {}", record.len()),
            });
        }
        let num = |idx: usize| -> Result<f64, IngestError> {
            let raw = &record[idx];
            raw.parse::<f64>().map_err(|e| IngestError::Malformed {
                line,
                column: MEASUREMENT_HEADER[idx].to_string(),
                message: format!("`{raw}`: {e}"),
            })
        };
        let m = Measurement {
            timestamp_s: num(0)?,
            site_id: record[1].to_string(),
            lat_deg: num(2)?,
            lon_deg: num(3)?,
            freq_mhz: num(4)?,
            power_dbm: num(5)?,
        };
        if let Err((column, invariant)) = m.check() {
            return Err(IngestError::Invalid {
                line,
                column: column.to_string(),
                invariant: invariant.to_string(),
            });
        }
        out.push(m);
    }
    Ok(out)
}

/// Renders measurements in the canonical file format. Numbers use the
/// shortest representation that parses back to the identical `f64`.
pub fn write_measurements(measurements: &[Measurement]) -> String {
    let mut s = MEASUREMENT_HEADER.join(",");
    s.push('\n');
    for m in measurements {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            m.timestamp_s, m.site_id, m.lat_deg, m.lon_deg, m.freq_mhz, m.power_dbm
        ));
    }
    s
}

/// Equal-width channelization. Channel `k` spans
/// `[start_mhz + k*width, start_mhz + (k+1)*width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelGrid {
    pub start_mhz: f64,
    pub channel_width_mhz: f64,
    pub n_channels: usize,
}

impl ChannelGrid {
    pub const DEFAULT_WIDTH_MHZ: f64 = 6.0;

    pub fn new(start_mhz: f64, channel_width_mhz: f64, n_channels: usize) -> Result<Self, IngestError> {
        if !(start_mhz.is_finite() && channel_width_mhz.is_finite() && channel_width_mhz > 0.0) {
            return Err(IngestError::InvalidGrid(format!(
                "start {start_mhz} MHz, width {channel_width_mhz} MHz"
            )));
        }
        if n_channels == 0 {
            return Err(IngestError::InvalidGrid("n_channels must be >= 1".into()));
        }
        Ok(Self {
            start_mhz,
            channel_width_mhz,
            n_channels,
        })
    }

    /// The 470-608 MHz broadcast TV band as 23 channels of 6 MHz.
    pub fn tvws() -> Self {
        Self::new(470.0, 6.0, 23).expect("static grid")
    }

    /// Exclusive upper edge of the grid.
    pub fn end_mhz(&self) -> f64 {
        self.start_mhz + self.n_channels as f64 * self.channel_width_mhz
    }

    pub fn channel_span(&self, k: usize) -> (f64, f64) {
        let lo = self.start_mhz + k as f64 * self.channel_width_mhz;
        (lo, lo + self.channel_width_mhz)
    }

    pub fn contains(&self, freq_mhz: f64) -> bool {
        self.channel_index(freq_mhz).is_ok()
    }

    pub fn channel_index(&self, freq_mhz: f64) -> Result<usize, IngestError> {
        channel_index(freq_mhz, self)
    }
}

/// Index of the channel containing `freq_mhz`. Never clamps.
pub fn channel_index(freq_mhz: f64, grid: &ChannelGrid) -> Result<usize, IngestError> {
    let out_of_range = || IngestError::FrequencyOutOfRange {
        freq_mhz,
        lo: grid.start_mhz,
        hi: grid.end_mhz(),
    };
    if !freq_mhz.is_finite() || freq_mhz < grid.start_mhz {
        return Err(out_of_range());
    }
    let k = ((freq_mhz - grid.start_mhz) / grid.channel_width_mhz).floor();
    if k >= grid.n_channels as f64 {
        return Err(out_of_range());
    }
    Ok(k as usize)
}

/// Axis-aligned affine map from (lon, lat) degrees to the unit box `[-1, 1]^2`.
///
/// `x` is longitude, `y` is latitude. An axis with zero extent borrows the
/// other axis' scale so the map stays invertible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordFrame {
    /// Latitude of the box center.
    pub lat0_deg: f64,
    /// Longitude of the box center.
    pub lon0_deg: f64,
    /// Degrees of longitude per normalized unit.
    pub scale_x: f64,
    /// Degrees of latitude per normalized unit.
    pub scale_y: f64,
    lon_min: f64,
    lat_min: f64,
}

impl CoordFrame {
    pub fn normalize(&self, lat_deg: f64, lon_deg: f64) -> (f64, f64) {
        // Written against the box minimum so both corners land exactly on +-1.
        let x = (lon_deg - self.lon_min) / self.scale_x - 1.0;
        let y = (lat_deg - self.lat_min) / self.scale_y - 1.0;
        (x, y)
    }

    /// Inverse of [`normalize`](Self::normalize), returning `(lat, lon)`.
    pub fn denormalize(&self, x: f64, y: f64) -> (f64, f64) {
        let lon = self.lon_min + (x + 1.0) * self.scale_x;
        let lat = self.lat_min + (y + 1.0) * self.scale_y;
        (lat, lon)
    }
}

/// Fits the frame to the bounding box of the measurement locations.
pub fn fit_frame(measurements: &[Measurement]) -> Result<CoordFrame, IngestError> {
    fit_frame_points(measurements.iter().map(|m| (m.lat_deg, m.lon_deg)))
}

/// [`fit_frame`] over raw `(lat, lon)` pairs.
pub fn fit_frame_points(points: impl IntoIterator<Item = (f64, f64)>) -> Result<CoordFrame, IngestError> {
    let mut n = 0usize;
    let (mut lat_lo, mut lat_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut lon_lo, mut lon_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (lat, lon) in points {
        n += 1;
        lat_lo = lat_lo.min(lat);
        lat_hi = lat_hi.max(lat);
        lon_lo = lon_lo.min(lon);
        lon_hi = lon_hi.max(lon);
    }
    if n < 2 {
        return Err(IngestError::TooFewPoints(n));
    }
    let mut half_x = (lon_hi - lon_lo) / 2.0;
    let mut half_y = (lat_hi - lat_lo) / 2.0;
    match (half_x > 0.0, half_y > 0.0) {
        (false, false) => return Err(IngestError::DegenerateFrame { n }),
        (false, true) => half_x = half_y,
        (true, false) => half_y = half_x,
        (true, true) => {}
    }
    // Center the degenerate axis on its single value.
    let lon_min = if lon_hi > lon_lo { lon_lo } else { lon_lo - half_x };
    let lat_min = if lat_hi > lat_lo { lat_lo } else { lat_lo - half_y };
    Ok(CoordFrame {
        lat0_deg: lat_min + half_y,
        lon0_deg: lon_min + half_x,
        scale_x: half_x,
        scale_y: half_y,
        lon_min,
        lat_min,
    })
}

/// Projects measurements into normalized samples `(x, y, power_dbm)`.
pub fn to_samples(measurements: &[Measurement], frame: &CoordFrame) -> Vec<Sample2D> {
    measurements
        .iter()
        .map(|m| {
            let (x, y) = frame.normalize(m.lat_deg, m.lon_deg);
            Sample2D::new(x, y, m.power_dbm)
        })
        .collect()
}
