//! Radio environment maps and held-out evaluation of surrogate models.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geostat::{KrigingModel, Sample2D};
use crate::neural::MlpModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RemError {
    #[error("invalid map grid: {0}")]
    Grid(String),
    #[error("surrogate `{0}` has not been fitted")]
    Unfitted(String),
    #[error("empty held-out set")]
    EmptyHeldOut,
    #[error("non-finite prediction at ({x}, {y})")]
    NonFinite { x: f64, y: f64 },
    #[error("malformed map csv: {0}")]
    Csv(String),
}

/// Anything that predicts received power (dBm) from normalized coordinates.
pub trait Surrogate {
    fn predict(&self, x: f64, y: f64) -> f64;

    fn model_tag(&self) -> String;

    fn is_fitted(&self) -> bool {
        true
    }

    /// Batched prediction; the default evaluates point by point.
    fn predict_many(&self, points: &[(f64, f64)]) -> Vec<f64> {
        points.iter().map(|&(x, y)| self.predict(x, y)).collect()
    }
}

impl Surrogate for KrigingModel {
    fn predict(&self, x: f64, y: f64) -> f64 {
        KrigingModel::predict(self, x, y).value
    }

    fn model_tag(&self) -> String {
        "kriging".into()
    }
}

impl Surrogate for MlpModel {
    fn predict(&self, x: f64, y: f64) -> f64 {
        MlpModel::predict(self, x, y)
    }

    fn model_tag(&self) -> String {
        "mlp".into()
    }

    fn is_fitted(&self) -> bool {
        self.epochs_trained > 0
    }

    fn predict_many(&self, points: &[(f64, f64)]) -> Vec<f64> {
        self.predict_batch(points)
    }
}

/// An MLP surrogate carrying an explicit tag (`nn`, `pinn`).
#[derive(Debug, Clone, PartialEq)]
pub struct Tagged<S> {
    pub tag: String,
    pub inner: S,
}

impl<S: Surrogate> Surrogate for Tagged<S> {
    fn predict(&self, x: f64, y: f64) -> f64 {
        self.inner.predict(x, y)
    }

    fn model_tag(&self) -> String {
        self.tag.clone()
    }

    fn is_fitted(&self) -> bool {
        self.inner.is_fitted()
    }

    fn predict_many(&self, points: &[(f64, f64)]) -> Vec<f64> {
        self.inner.predict_many(points)
    }
}

/// Predicts the same value everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant(pub f64);

impl Surrogate for Constant {
    fn predict(&self, _x: f64, _y: f64) -> f64 {
        self.0
    }

    fn model_tag(&self) -> String {
        "constant".into()
    }
}

impl<F: Fn(f64, f64) -> f64> Surrogate for (&str, F) {
    fn predict(&self, x: f64, y: f64) -> f64 {
        (self.1)(x, y)
    }

    fn model_tag(&self) -> String {
        self.0.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for MapGrid {
    fn default() -> Self {
        Self {
            x_min: -1.0,
            x_max: 1.0,
            y_min: -1.0,
            y_max: 1.0,
            nx: 64,
            ny: 64,
        }
    }
}

impl MapGrid {
    pub fn new(bbox: (f64, f64, f64, f64), nx: usize, ny: usize) -> Result<Self, RemError> {
        let g = Self {
            x_min: bbox.0,
            x_max: bbox.1,
            y_min: bbox.2,
            y_max: bbox.3,
            nx,
            ny,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), RemError> {
        if self.nx < 2 || self.ny < 2 {
            return Err(RemError::Grid(format!("resolution {}x{} below 2x2", self.nx, self.ny)));
        }
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(RemError::Grid(format!(
                "degenerate bbox x [{}, {}], y [{}, {}]",
                self.x_min, self.x_max, self.y_min, self.y_max
            )));
        }
        Ok(())
    }

    /// Same box, resolution multiplied by `factor` on both axes.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            nx: self.nx * factor,
            ny: self.ny * factor,
            ..*self
        }
    }

    /// Center of column `i`. The fraction `(2i+1)/(2nx)` is formed from
    /// integers so that coincident centers of refined grids are bit-identical.
    pub fn cell_x(&self, i: usize) -> f64 {
        self.x_min + (self.x_max - self.x_min) * ((2 * i + 1) as f64 / (2 * self.nx) as f64)
    }

    pub fn cell_y(&self, j: usize) -> f64 {
        self.y_min + (self.y_max - self.y_min) * ((2 * j + 1) as f64 / (2 * self.ny) as f64)
    }

    /// Cell centers in row-major order, row 0 at minimum y.
    pub fn centers(&self) -> Vec<(f64, f64)> {
        (0..self.ny)
            .flat_map(|j| (0..self.nx).map(move |i| (self.cell_x(i), self.cell_y(j))))
            .collect()
    }
}

/// A predicted-power raster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rem {
    pub grid: MapGrid,
    /// `values[j][i]` is the prediction at `(cell_x(i), cell_y(j))`.
    pub values: Vec<Vec<f64>>,
    pub model_tag: String,
}

pub const ORIENTATION: &str = "row j holds cell centers y = y_min + (y_max - y_min)(2j+1)/(2 ny), row 0 = minimum y; \
     column i holds x = x_min + (x_max - x_min)(2i+1)/(2 nx), column 0 = minimum x";

impl Rem {
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for row in &self.values {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "bbox": {
                "x_min": self.grid.x_min,
                "x_max": self.grid.x_max,
                "y_min": self.grid.y_min,
                "y_max": self.grid.y_max,
            },
            "nx": self.grid.nx,
            "ny": self.grid.ny,
            "model_tag": self.model_tag,
            "units": "dBm",
            "coordinates": "normalized frame, x = longitude axis, y = latitude axis",
            "orientation": ORIENTATION,
        })
    }

    /// Parses a map CSV written by [`to_csv`](Self::to_csv).
    pub fn from_csv(text: &str, grid: MapGrid, model_tag: impl Into<String>) -> Result<Self, RemError> {
        let values: Vec<Vec<f64>> = text
            .lines()
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.split(',')
                    .map(|c| c.trim().parse::<f64>().map_err(|e| RemError::Csv(e.to_string())))
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        if values.len() != grid.ny || values.iter().any(|r| r.len() != grid.nx) {
            return Err(RemError::Csv(format!("expected {} rows of {} values", grid.ny, grid.nx)));
        }
        Ok(Self {
            grid,
            values,
            model_tag: model_tag.into(),
        })
    }
}

/// Evaluates `surrogate` at every cell center.
pub fn predict_map(surrogate: &dyn Surrogate, grid: &MapGrid) -> Result<Rem, RemError> {
    grid.validate()?;
    if !surrogate.is_fitted() {
        return Err(RemError::Unfitted(surrogate.model_tag()));
    }
    let centers = grid.centers();
    let flat = surrogate.predict_many(&centers);
    if let Some(k) = flat.iter().position(|v| !v.is_finite()) {
        return Err(RemError::NonFinite {
            x: centers[k].0,
            y: centers[k].1,
        });
    }
    Ok(Rem {
        grid: *grid,
        values: flat.chunks(grid.nx).map(<[f64]>::to_vec).collect(),
        model_tag: surrogate.model_tag(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseReport {
    pub model_tag: String,
    pub n: usize,
    /// Mean squared error in dBm^2.
    pub mse_dbm2: f64,
    /// `mse_dbm2` divided by the population variance of the held-out targets
    /// (equal to `mse_dbm2` when that variance is zero).
    pub mse_standardized: f64,
}

pub fn test_mse(surrogate: &dyn Surrogate, held_out: &[Sample2D]) -> Result<MseReport, RemError> {
    if held_out.is_empty() {
        return Err(RemError::EmptyHeldOut);
    }
    if !surrogate.is_fitted() {
        return Err(RemError::Unfitted(surrogate.model_tag()));
    }
    let pts: Vec<(f64, f64)> = held_out.iter().map(|s| (s.x, s.y)).collect();
    let pred = surrogate.predict_many(&pts);
    let n = held_out.len() as f64;
    let mse = pred
        .iter()
        .zip(held_out)
        .fold(0.0, |a, (p, s)| a + (p - s.z).powi(2))
        / n;
    let mean = held_out.iter().fold(0.0, |a, s| a + s.z) / n;
    let var = held_out.iter().fold(0.0, |a, s| a + (s.z - mean).powi(2)) / n;
    Ok(MseReport {
        model_tag: surrogate.model_tag(),
        n: held_out.len(),
        mse_dbm2: mse,
        mse_standardized: if var > 0.0 { mse / var } else { mse },
    })
}

/// Side-by-side evaluation in the order kriging, NN, PINN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<MseReport>,
}

impl Comparison {
    const ORDER: [&'static str; 3] = ["kriging", "nn", "pinn"];

    pub fn new(mut rows: Vec<MseReport>) -> Self {
        let rank = |tag: &str| Self::ORDER.iter().position(|t| *t == tag).unwrap_or(Self::ORDER.len());
        rows.sort_by_key(|r| rank(&r.model_tag));
        Self { rows }
    }

    pub fn best(&self) -> Option<&MseReport> {
        self.rows.iter().min_by(|a, b| a.mse_dbm2.total_cmp(&b.mse_dbm2))
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<10}{:>16}{:>18}\n", "method", "mse_dbm2", "mse_standardized");
        for r in &self.rows {
            s.push_str(&format!("{:<10}{:>16.6}{:>18.6}\n", r.model_tag, r.mse_dbm2, r.mse_standardized));
        }
        s
    }
}
