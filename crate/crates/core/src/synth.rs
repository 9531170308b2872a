//! Seeded synthetic data: occupancy streams with planted duty cycles and the
//! harmonic benchmark field.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geostat::Sample2D;
use crate::ingest::{ChannelGrid, Measurement};
use crate::neural::TrainConfig;
use crate::pinn::PinnConfig;

/// A single-site spectrum sweep: one sample per (channel, slot) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DutyCycleStream {
    pub site_id: String,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub t0_s: f64,
    pub slot_s: f64,
    pub n_slots: usize,
    /// Probability that channel `c` is active in any slot.
    pub duty: Vec<f64>,
    /// Probability that a cell has no sample at all.
    pub missing: f64,
    pub hot_dbm: f64,
    pub cold_dbm: f64,
    pub seed: u64,
}

impl DutyCycleStream {
    pub fn new(site_id: &str, grid: &ChannelGrid, n_slots: usize, seed: u64) -> Self {
        Self {
            site_id: site_id.into(),
            lat_deg: 42.03,
            lon_deg: -93.62,
            t0_s: 1_700_000_000.0,
            slot_s: 1.0,
            n_slots,
            duty: (0..grid.n_channels).map(|c| (c as f64 * 0.37).fract()).collect(),
            missing: 0.0,
            hot_dbm: -80.0,
            cold_dbm: -125.0,
            seed,
        }
    }

    /// Measurements in time order. Power is drawn around `hot_dbm` or
    /// `cold_dbm` with 3 dB spread; frequencies are random within each
    /// channel; timestamps are random within each slot.
    pub fn generate(&self, grid: &ChannelGrid) -> Vec<Measurement> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let spread = Normal::new(0.0, 3.0).expect("valid sigma");
        let mut out = Vec::with_capacity(self.n_slots * grid.n_channels);
        for s in 0..self.n_slots {
            for c in 0..grid.n_channels {
                if rng.random_bool(self.missing) {
                    continue;
                }
                let active = rng.random_bool(self.duty[c].clamp(0.0, 1.0));
                let level = if active { self.hot_dbm } else { self.cold_dbm };
                let (lo, _) = grid.channel_span(c);
                out.push(Measurement {
                    timestamp_s: self.t0_s + (s as f64 + rng.random_range(0.0..0.999)) * self.slot_s,
                    site_id: self.site_id.clone(),
                    lat_deg: self.lat_deg,
                    lon_deg: self.lon_deg,
                    freq_mhz: lo + rng.random_range(0.001..0.999) * grid.channel_width_mhz,
                    power_dbm: (level + spread.sample(&mut rng)).clamp(-200.0, 50.0),
                });
            }
        }
        out
    }
}

/// The harmonic test field `10 (x^2 - y^2)`.
pub fn harmonic_field(x: f64, y: f64) -> f64 {
    10.0 * (x * x - y * y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicBenchmark {
    pub n_train: usize,
    pub n_test: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for HarmonicBenchmark {
    fn default() -> Self {
        Self {
            n_train: 64,
            n_test: 1024,
            noise_sigma: 0.1,
            seed: 0,
        }
    }
}

impl HarmonicBenchmark {
    /// Training samples (noisy, uniform over the unit box) and noise-free
    /// held-out samples.
    pub fn generate(&self) -> (Vec<Sample2D>, Vec<Sample2D>) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let noise = Normal::new(0.0, self.noise_sigma).expect("valid sigma");
        let point = |rng: &mut ChaCha8Rng| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let train = (0..self.n_train)
            .map(|_| {
                let (x, y) = point(&mut rng);
                Sample2D::new(x, y, harmonic_field(x, y) + noise.sample(&mut rng))
            })
            .collect();
        let test = (0..self.n_test)
            .map(|_| {
                let (x, y) = point(&mut rng);
                Sample2D::new(x, y, harmonic_field(x, y))
            })
            .collect();
        (train, test)
    }
}

/// Renders samples as measurements on a small box around a reference point,
/// so they can travel through the measurement file format.
pub fn samples_to_measurements(samples: &[Sample2D], site_id: &str, freq_mhz: f64) -> Vec<Measurement> {
    const LAT0: f64 = 42.03;
    const LON0: f64 = -93.62;
    const HALF_SPAN_DEG: f64 = 0.05;
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| Measurement {
            timestamp_s: 1_700_000_000.0 + i as f64,
            site_id: site_id.into(),
            lat_deg: LAT0 + s.y * HALF_SPAN_DEG,
            lon_deg: LON0 + s.x * HALF_SPAN_DEG,
            freq_mhz,
            power_dbm: s.z,
        })
        .collect()
}

/// Training setup for the harmonic benchmark, shared by the plain network
/// (`base`) and the physics-informed one. Three hidden layers of width 32,
/// 2000 Adam epochs at 3e-3 and 256 collocation points keep one run to a few
/// seconds. Initial weights use twice the default spread, so the untrained
/// network starts out curved and the residual term has something to remove.
pub fn benchmark_config(seed: u64) -> PinnConfig {
    PinnConfig {
        base: TrainConfig {
            layer_dims: vec![2, 32, 32, 32, 1],
            learning_rate: 3e-3,
            epochs: 2000,
            seed,
            init_scale: 2.0,
            ..TrainConfig::default()
        },
        lambda_pde: 1.0,
        n_collocation: 256,
        collocation_seed: seed,
        ..PinnConfig::default()
    }
}
