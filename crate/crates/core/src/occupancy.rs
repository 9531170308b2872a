//! Energy-detection occupancy statistics and two-site availability matrices.
//!
//! Occupancy is computed per time slot as the fraction of sampled channels
//! whose (channel, slot) cell holds at least one sample above the decision
//! threshold. Band summaries aggregate those per-slot fractions: the mean and
//! the nearest-rank 95th percentile. Slots without any sample are left out.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{ChannelGrid, Measurement};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OccupancyError {
    #[error("invalid occupancy config: {0}")]
    Config(String),
    #[error("measurements from more than one site: `{0}` and `{1}`")]
    MixedSites(String, String),
    #[error("no usable data for band `{0}`")]
    NoData(String),
    #[error("site windows do not overlap: [{a_lo}, {a_hi}] vs [{b_lo}, {b_hi}]")]
    DisjointWindows { a_lo: f64, a_hi: f64, b_lo: f64, b_hi: f64 },
}

/// Noise floor observed in the TV band, dBm.
pub const NOISE_FLOOR_DBM: f64 = -118.0;
/// Energy-detection margin above the noise floor, dB.
pub const DETECTION_MARGIN_DB: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupancyConfig {
    pub threshold_dbm: f64,
    pub slot_s: f64,
    pub window_s: f64,
    /// Start of the analysis window. `None` uses the earliest timestamp of
    /// the streams being analyzed.
    pub window_start_s: Option<f64>,
}

impl Default for OccupancyConfig {
    fn default() -> Self {
        Self {
            threshold_dbm: NOISE_FLOOR_DBM + DETECTION_MARGIN_DB,
            slot_s: 1.0,
            window_s: 900.0,
            window_start_s: None,
        }
    }
}

impl OccupancyConfig {
    pub fn validate(&self) -> Result<(), OccupancyError> {
        if !(self.slot_s.is_finite() && self.slot_s > 0.0) {
            return Err(OccupancyError::Config(format!("slot_s = {} must be > 0", self.slot_s)));
        }
        if !(self.window_s.is_finite() && self.window_s >= self.slot_s) {
            return Err(OccupancyError::Config(format!(
                "window_s = {} must be >= slot_s = {}",
                self.window_s, self.slot_s
            )));
        }
        if self.threshold_dbm.is_nan() {
            return Err(OccupancyError::Config("threshold_dbm is NaN".into()));
        }
        Ok(())
    }

    pub fn n_slots(&self) -> usize {
        (self.window_s / self.slot_s).ceil() as usize
    }

    fn slot_of(&self, start: f64, t: f64) -> Option<usize> {
        if t < start || t >= start + self.window_s {
            return None;
        }
        let s = ((t - start) / self.slot_s).floor() as usize;
        (s < self.n_slots()).then_some(s)
    }
}

/// Energy-detection decision: strictly above the threshold.
pub fn is_occupied(power_dbm: f64, threshold_dbm: f64) -> bool {
    power_dbm > threshold_dbm
}

/// Occupancy of one time slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotOccupancy {
    pub slot: usize,
    pub occupied_channels: usize,
    pub sampled_channels: usize,
    pub fraction: f64,
}

/// Per-(channel, slot) detection state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cell {
    Missing,
    Free,
    Occupied,
}

/// Detection grid of one site: `n_channels x n_slots`, row-major by channel.
struct CellGrid {
    n_slots: usize,
    cells: Vec<Cell>,
}

impl CellGrid {
    fn build(measurements: &[&Measurement], grid: &ChannelGrid, config: &OccupancyConfig, start: f64) -> Self {
        let n_slots = config.n_slots();
        let mut cells = vec![Cell::Missing; grid.n_channels * n_slots];
        for m in measurements {
            let (Ok(ch), Some(slot)) = (grid.channel_index(m.freq_mhz), config.slot_of(start, m.timestamp_s)) else {
                continue;
            };
            let cell = &mut cells[ch * n_slots + slot];
            if is_occupied(m.power_dbm, config.threshold_dbm) {
                *cell = Cell::Occupied;
            } else if *cell == Cell::Missing {
                *cell = Cell::Free;
            }
        }
        Self { n_slots, cells }
    }

    fn get(&self, ch: usize, slot: usize) -> Cell {
        self.cells[ch * self.n_slots + slot]
    }
}

fn single_site<'a>(measurements: &'a [Measurement]) -> Result<Vec<&'a Measurement>, OccupancyError> {
    if let Some(first) = measurements.first() {
        if let Some(other) = measurements.iter().find(|m| m.site_id != first.site_id) {
            return Err(OccupancyError::MixedSites(first.site_id.clone(), other.site_id.clone()));
        }
    }
    Ok(measurements.iter().collect())
}

fn earliest(measurements: &[&Measurement]) -> Option<f64> {
    measurements
        .iter()
        .map(|m| m.timestamp_s)
        .min_by(f64::total_cmp)
}

/// Per-slot occupied fractions for one site. Samples outside the grid span
/// or the analysis window are ignored; slots with no sample are omitted.
pub fn slot_occupancy(
    measurements: &[Measurement],
    grid: &ChannelGrid,
    config: &OccupancyConfig,
) -> Result<Vec<SlotOccupancy>, OccupancyError> {
    config.validate()?;
    let ms = single_site(measurements)?;
    let Some(start) = config.window_start_s.or_else(|| earliest(&ms)) else {
        return Ok(Vec::new());
    };
    let cells = CellGrid::build(&ms, grid, config, start);
    let mut out = Vec::new();
    for slot in 0..cells.n_slots {
        let (mut occupied, mut sampled) = (0usize, 0usize);
        for ch in 0..grid.n_channels {
            match cells.get(ch, slot) {
                Cell::Missing => {}
                Cell::Free => sampled += 1,
                Cell::Occupied => {
                    sampled += 1;
                    occupied += 1;
                }
            }
        }
        if sampled > 0 {
            out.push(SlotOccupancy {
                slot,
                occupied_channels: occupied,
                sampled_channels: sampled,
                fraction: occupied as f64 / sampled as f64,
            });
        }
    }
    Ok(out)
}

/// A named frequency band analyzed on its own channel grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub name: String,
    pub grid: ChannelGrid,
}

impl Band {
    pub fn new(name: impl Into<String>, grid: ChannelGrid) -> Self {
        Self { name: name.into(), grid }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    pub band_name: String,
    pub span_mhz: (f64, f64),
    pub avg_occupancy: f64,
    pub p95_occupancy: f64,
    pub n_slots: usize,
}

impl fmt::Display for BandSummary {
    /// Table row layout, e.g. `TVWS 470–698: avg 46.8%, p95 55.6%`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}–{}: avg {:.1}%, p95 {:.1}%",
            self.band_name,
            self.span_mhz.0,
            self.span_mhz.1,
            100.0 * self.avg_occupancy,
            100.0 * self.p95_occupancy
        )
    }
}

/// Nearest-rank percentile: the `ceil(p/100 * n)`-th smallest value.
/// `p` is an integer percentage so the rank is computed exactly.
pub fn nearest_rank_percentile(values: &[f64], p: u32) -> Option<f64> {
    if values.is_empty() || p > 100 {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = (p as usize * n).div_ceil(100).max(1);
    Some(sorted[rank - 1])
}

/// Mean with a fixed left-to-right summation order.
fn mean(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |acc, v| acc + v) / values.len() as f64
}

pub fn band_summary(
    measurements: &[Measurement],
    band: &Band,
    config: &OccupancyConfig,
) -> Result<BandSummary, OccupancyError> {
    let slots = slot_occupancy(measurements, &band.grid, config)?;
    if slots.is_empty() {
        return Err(OccupancyError::NoData(band.name.clone()));
    }
    let fractions: Vec<f64> = slots.iter().map(|s| s.fraction).collect();
    Ok(BandSummary {
        band_name: band.name.clone(),
        span_mhz: (band.grid.start_mhz, band.grid.end_mhz()),
        avg_occupancy: mean(&fractions),
        p95_occupancy: nearest_rank_percentile(&fractions, 95).expect("nonempty"),
        n_slots: fractions.len(),
    })
}

/// Cell state of an [`AvailabilityMatrix`].
///
/// In single-site mode only `Free` and `Occupied` appear. In two-site mode
/// `Free` means free at both sites, `FreeOne` free at exactly one, and
/// `Occupied` occupied at both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Availability {
    Free,
    FreeOne,
    Occupied,
}

impl Availability {
    /// CSV code: 0, 1 or 2.
    pub fn code(self) -> u8 {
        match self {
            Availability::Free => 0,
            Availability::FreeOne => 1,
            Availability::Occupied => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteMode {
    Single,
    Joint,
}

/// Cells with no sample at a site, counted per site.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageGaps {
    pub site_a: usize,
    pub site_b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityMatrix {
    pub grid: ChannelGrid,
    pub n_slots: usize,
    pub mode: SiteMode,
    /// Row-major, one row per channel.
    cells: Vec<Availability>,
    pub gaps: CoverageGaps,
}

impl AvailabilityMatrix {
    pub fn get(&self, channel: usize, slot: usize) -> Availability {
        self.cells[channel * self.n_slots + slot]
    }

    pub fn row(&self, channel: usize) -> &[Availability] {
        &self.cells[channel * self.n_slots..(channel + 1) * self.n_slots]
    }

    pub fn cells(&self) -> &[Availability] {
        &self.cells
    }

    /// Whether `channel` is free (free at both sites in joint mode) in every
    /// slot of `slots`.
    pub fn is_free_over(&self, channel: usize, slots: std::ops::Range<usize>) -> bool {
        let slots = slots.start.min(self.n_slots)..slots.end.min(self.n_slots);
        !slots.is_empty() && slots.into_iter().all(|s| self.get(channel, s) == Availability::Free)
    }

    /// One row per channel, one column per slot, cells 0/1/2.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.cells.len() * 2);
        for ch in 0..self.grid.n_channels {
            let row: Vec<String> = self.row(ch).iter().map(|c| c.code().to_string()).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    /// Sidecar legend documenting the CSV codes and orientation.
    pub fn legend(&self) -> serde_json::Value {
        let codes = match self.mode {
            SiteMode::Single => serde_json::json!({"0": "FREE", "2": "OCCUPIED"}),
            SiteMode::Joint => {
                serde_json::json!({"0": "FREE_BOTH", "1": "FREE_ONE", "2": "OCCUPIED_BOTH"})
            }
        };
        serde_json::json!({
            "mode": self.mode,
            "rows": "channel index, row 0 = lowest channel",
            "columns": "time slot index, column 0 = window start",
            "n_channels": self.grid.n_channels,
            "n_slots": self.n_slots,
            "channel_start_mhz": self.grid.start_mhz,
            "channel_width_mhz": self.grid.channel_width_mhz,
            "codes": codes,
            "missing_data": "treated as free at that site and counted in coverage_gaps",
            "coverage_gaps": self.gaps,
        })
    }
}

/// Availability of one site. Cells with no sample count as free and are
/// recorded in `gaps.site_a`.
pub fn single_availability(
    measurements: &[Measurement],
    grid: &ChannelGrid,
    config: &OccupancyConfig,
) -> Result<AvailabilityMatrix, OccupancyError> {
    config.validate()?;
    let ms = single_site(measurements)?;
    let start = config
        .window_start_s
        .or_else(|| earliest(&ms))
        .ok_or_else(|| OccupancyError::NoData("single-site availability".into()))?;
    let a = CellGrid::build(&ms, grid, config, start);
    let mut gaps = CoverageGaps::default();
    let cells = a
        .cells
        .iter()
        .map(|&c| match c {
            Cell::Occupied => Availability::Occupied,
            Cell::Free => Availability::Free,
            Cell::Missing => {
                gaps.site_a += 1;
                Availability::Free
            }
        })
        .collect();
    Ok(AvailabilityMatrix {
        grid: *grid,
        n_slots: a.n_slots,
        mode: SiteMode::Single,
        cells,
        gaps,
    })
}

fn time_span(ms: &[&Measurement]) -> Option<(f64, f64)> {
    let lo = ms.iter().map(|m| m.timestamp_s).min_by(f64::total_cmp)?;
    let hi = ms.iter().map(|m| m.timestamp_s).max_by(f64::total_cmp)?;
    Some((lo, hi))
}

/// Joint availability of two sites on a shared slot clock.
pub fn joint_availability(
    site_a: &[Measurement],
    site_b: &[Measurement],
    grid: &ChannelGrid,
    config: &OccupancyConfig,
) -> Result<AvailabilityMatrix, OccupancyError> {
    config.validate()?;
    let a = single_site(site_a)?;
    let b = single_site(site_b)?;
    let (Some((a_lo, a_hi)), Some((b_lo, b_hi))) = (time_span(&a), time_span(&b)) else {
        return Err(OccupancyError::NoData("joint availability".into()));
    };
    if a_hi < b_lo || b_hi < a_lo {
        return Err(OccupancyError::DisjointWindows { a_lo, a_hi, b_lo, b_hi });
    }
    let start = config.window_start_s.unwrap_or(a_lo.min(b_lo));
    let ga = CellGrid::build(&a, grid, config, start);
    let gb = CellGrid::build(&b, grid, config, start);
    let mut gaps = CoverageGaps::default();
    let cells = ga
        .cells
        .iter()
        .zip(&gb.cells)
        .map(|(&ca, &cb)| {
            gaps.site_a += usize::from(ca == Cell::Missing);
            gaps.site_b += usize::from(cb == Cell::Missing);
            match (ca == Cell::Occupied, cb == Cell::Occupied) {
                (true, true) => Availability::Occupied,
                (false, false) => Availability::Free,
                _ => Availability::FreeOne,
            }
        })
        .collect();
    Ok(AvailabilityMatrix {
        grid: *grid,
        n_slots: ga.n_slots,
        mode: SiteMode::Joint,
        cells,
        gaps,
    })
}

/// JSON-compatible occupancy report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyReport {
    pub definition: String,
    pub threshold_dbm: f64,
    pub slot_s: f64,
    pub window_s: f64,
    pub bands: Vec<BandReport>,
    pub coverage_gaps: Option<CoverageGaps>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub site_id: String,
    pub summary: BandSummary,
    pub row: String,
}

impl OccupancyReport {
    pub const DEFINITION: &'static str = "per-slot fraction of sampled channels with any sample above threshold; \
         avg = mean over sampled slots, p95 = nearest-rank 95th percentile over sampled slots";

    pub fn new(config: &OccupancyConfig) -> Self {
        Self {
            definition: Self::DEFINITION.to_string(),
            threshold_dbm: config.threshold_dbm,
            slot_s: config.slot_s,
            window_s: config.window_s,
            bands: Vec::new(),
            coverage_gaps: None,
        }
    }

    pub fn push(&mut self, site_id: impl Into<String>, summary: BandSummary) {
        let row = summary.to_string();
        self.bands.push(BandReport {
            site_id: site_id.into(),
            summary,
            row,
        });
    }
}
