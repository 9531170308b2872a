//! Ordinary kriging: empirical semivariogram, parametric variogram fit, and
//! best linear unbiased prediction with kriging variance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Lu;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeostatError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("singular kriging system: samples {0} and {1} share a location and the nugget is 0")]
    DuplicateLocation(usize, usize),
    #[error("singular kriging system at pivot column {0}")]
    Singular(usize),
}

/// A point observation in normalized coordinates; `z` is received power, dBm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample2D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Sample2D {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    fn dist_to(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalVariogram {
    pub bin_centers: Vec<f64>,
    pub gamma: Vec<f64>,
    pub counts: Vec<usize>,
    pub max_lag: f64,
}

impl EmpiricalVariogram {
    pub fn nonempty_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

/// Half the largest pairwise distance.
pub fn default_max_lag(samples: &[Sample2D]) -> f64 {
    let mut max_d = 0.0f64;
    for (i, a) in samples.iter().enumerate() {
        for b in &samples[i + 1..] {
            max_d = max_d.max(a.dist_to(b.x, b.y));
        }
    }
    max_d / 2.0
}

/// Bins all sample pairs by separation into `n_bins` equal bins over
/// `[0, max_lag]`; pairs farther than `max_lag` are dropped.
pub fn empirical_variogram(
    samples: &[Sample2D],
    n_bins: usize,
    max_lag: f64,
) -> Result<EmpiricalVariogram, GeostatError> {
    if samples.len() < 2 {
        return Err(GeostatError::InsufficientData(format!(
            "variogram needs >= 2 samples, got {}",
            samples.len()
        )));
    }
    if n_bins == 0 || !(max_lag.is_finite() && max_lag > 0.0) {
        return Err(GeostatError::InvalidParameter(format!(
            "n_bins = {n_bins}, max_lag = {max_lag}"
        )));
    }
    let width = max_lag / n_bins as f64;
    let mut sums = vec![0.0; n_bins];
    let mut counts = vec![0usize; n_bins];
    for (i, a) in samples.iter().enumerate() {
        for b in &samples[i + 1..] {
            let d = a.dist_to(b.x, b.y);
            if d > max_lag {
                continue;
            }
            let bin = ((d / width) as usize).min(n_bins - 1);
            sums[bin] += (a.z - b.z).powi(2);
            counts[bin] += 1;
        }
    }
    let gamma = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c > 0 { s / (2.0 * c as f64) } else { 0.0 })
        .collect();
    Ok(EmpiricalVariogram {
        bin_centers: (0..n_bins).map(|b| (b as f64 + 0.5) * width).collect(),
        gamma,
        counts,
        max_lag,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariogramKind {
    Exponential,
    Spherical,
    Gaussian,
}

impl std::str::FromStr for VariogramKind {
    type Err = GeostatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exponential" => Ok(Self::Exponential),
            "spherical" => Ok(Self::Spherical),
            "gaussian" => Ok(Self::Gaussian),
            _ => Err(GeostatError::InvalidParameter(format!("unknown variogram kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramModel {
    pub kind: VariogramKind,
    pub nugget: f64,
    pub sill: f64,
    pub range_len: f64,
}

impl VariogramModel {
    pub fn new(kind: VariogramKind, nugget: f64, sill: f64, range_len: f64) -> Result<Self, GeostatError> {
        let m = Self {
            kind,
            nugget,
            sill,
            range_len,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), GeostatError> {
        if !(self.nugget.is_finite() && self.nugget >= 0.0)
            || !(self.sill.is_finite() && self.sill > 0.0)
            || !(self.range_len.is_finite() && self.range_len > 0.0)
        {
            return Err(GeostatError::InvalidParameter(format!(
                "nugget {} >= 0, sill {} > 0, range {} > 0 required",
                self.nugget, self.sill, self.range_len
            )));
        }
        Ok(())
    }

    /// Model semivariance at lag `h >= 0`. Equals the nugget at `h = 0`.
    pub fn gamma(&self, h: f64) -> f64 {
        let r = h / self.range_len;
        let structured = match self.kind {
            VariogramKind::Exponential => 1.0 - (-r).exp(),
            VariogramKind::Gaussian => 1.0 - (-r * r).exp(),
            VariogramKind::Spherical => {
                if r >= 1.0 {
                    1.0
                } else {
                    1.5 * r - 0.5 * r * r * r
                }
            }
        };
        self.nugget + self.sill * structured
    }

    /// Semivariance between two locations: zero for coincident points,
    /// `gamma(h)` otherwise.
    fn between(&self, h: f64) -> f64 {
        if h == 0.0 {
            0.0
        } else {
            self.gamma(h)
        }
    }
}

/// A fitted variogram and its count-weighted squared-error objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramFit {
    #[serde(flatten)]
    pub model: VariogramModel,
    pub objective: f64,
}

const GRID_POINTS: usize = 16;
const REFINE_STEPS: usize = 100;

fn log_space(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
}

/// Fits `kind` to the nonempty bins of `ev`.
///
/// The objective is `sum_b count_b * (gamma_model(h_b) - gamma_b)^2`. Search
/// is a 16x16x16 grid (nugget: zero plus 15 log-spaced values; sill and
/// range log-spaced) followed by 100 rounds of multiplicative coordinate
/// descent whose step halves whenever a round makes no progress.
pub fn fit_variogram(ev: &EmpiricalVariogram, kind: VariogramKind) -> Result<VariogramFit, GeostatError> {
    let bins: Vec<(f64, f64, f64)> = ev
        .bin_centers
        .iter()
        .zip(&ev.gamma)
        .zip(&ev.counts)
        .filter(|(_, &c)| c > 0)
        .map(|((&h, &g), &c)| (h, g, c as f64))
        .collect();
    if bins.len() < 3 {
        return Err(GeostatError::InsufficientData(format!(
            "variogram fit needs >= 3 nonempty bins, got {}",
            bins.len()
        )));
    }
    let objective = |nugget: f64, sill: f64, range_len: f64| -> f64 {
        let m = VariogramModel {
            kind,
            nugget,
            sill,
            range_len,
        };
        bins.iter().map(|&(h, g, c)| c * (m.gamma(h) - g).powi(2)).sum()
    };

    let g_max = bins.iter().map(|b| b.1).fold(0.0, f64::max).max(1e-12);
    let h_min = bins.iter().map(|b| b.0).fold(f64::INFINITY, f64::min);
    let h_max = bins.iter().map(|b| b.0).fold(0.0, f64::max);

    let nuggets: Vec<f64> = std::iter::once(0.0)
        .chain(log_space(1e-3 * g_max, g_max, GRID_POINTS - 1))
        .collect();
    let sills: Vec<f64> = log_space(1e-2 * g_max, 2.0 * g_max, GRID_POINTS).collect();
    let ranges: Vec<f64> = log_space(h_min / 10.0, 4.0 * h_max, GRID_POINTS).collect();

    let mut best = (nuggets[0], sills[0], ranges[0]);
    let mut best_obj = f64::INFINITY;
    for &n in &nuggets {
        for &s in &sills {
            for &r in &ranges {
                let o = objective(n, s, r);
                if o < best_obj {
                    best_obj = o;
                    best = (n, s, r);
                }
            }
        }
    }

    let mut step = 0.5;
    for _ in 0..REFINE_STEPS {
        let (n, s, r) = best;
        let nugget_moves = if n > 0.0 {
            [n * (1.0 + step), n * (1.0 - step), 0.0]
        } else {
            [step * 1e-2 * g_max, 0.0, 0.0]
        };
        let candidates = nugget_moves
            .into_iter()
            .map(|nn| (nn, s, r))
            .chain([(n, s * (1.0 + step), r), (n, s * (1.0 - step), r)])
            .chain([(n, s, r * (1.0 + step)), (n, s, r * (1.0 - step))]);
        let mut improved = false;
        for c in candidates {
            let o = objective(c.0, c.1, c.2);
            if o < best_obj {
                best_obj = o;
                best = c;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }

    Ok(VariogramFit {
        model: VariogramModel::new(kind, best.0, best.1, best.2)?,
        objective: best_obj,
    })
}

/// Kriging prediction at one query point.
#[derive(Debug, Clone, PartialEq)]
pub struct KrigingPrediction {
    pub value: f64,
    pub variance: f64,
    /// One weight per distinct sample location, in first-occurrence order.
    pub weights: Vec<f64>,
    pub lagrange: f64,
}

/// Ordinary kriging system factored once for repeated queries.
#[derive(Debug, Clone)]
pub struct KrigingModel {
    samples: Vec<Sample2D>,
    variogram: VariogramModel,
    lu: Lu,
}

/// Relative pivot size below which the system is treated as singular.
const PIVOT_TOL: f64 = 1e-13;

impl KrigingModel {
    /// Assembles and factors the `(n+1) x (n+1)` system. Samples sharing a
    /// location are averaged when the nugget is positive and rejected when
    /// it is zero.
    pub fn fit(samples: &[Sample2D], variogram: VariogramModel) -> Result<Self, GeostatError> {
        variogram.validate()?;
        if samples.is_empty() {
            return Err(GeostatError::InsufficientData("kriging needs >= 1 sample".into()));
        }
        if let Some((i, s)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !(s.x.is_finite() && s.y.is_finite() && s.z.is_finite()))
        {
            return Err(GeostatError::InvalidParameter(format!("sample {i} is not finite: {s:?}")));
        }
        let samples = merge_duplicates(samples, variogram.nugget > 0.0)?;

        let n = samples.len();
        let dim = n + 1;
        let mut a = vec![0.0; dim * dim];
        for i in 0..n {
            for j in 0..n {
                let h = samples[i].dist_to(samples[j].x, samples[j].y);
                a[i * dim + j] = variogram.between(h);
            }
            a[i * dim + n] = 1.0;
            a[n * dim + i] = 1.0;
        }
        let lu = Lu::factor(a, dim, PIVOT_TOL).map_err(|e| GeostatError::Singular(e.column))?;
        Ok(Self { samples, variogram, lu })
    }

    pub fn variogram(&self) -> &VariogramModel {
        &self.variogram
    }

    /// Distinct sample locations used in the system.
    pub fn samples(&self) -> &[Sample2D] {
        &self.samples
    }

    pub fn predict(&self, x: f64, y: f64) -> KrigingPrediction {
        let n = self.samples.len();
        let mut rhs: Vec<f64> = self
            .samples
            .iter()
            .map(|s| self.variogram.between(s.dist_to(x, y)))
            .collect();
        rhs.push(1.0);
        let sol = self.lu.solve(&rhs);
        let (weights, lagrange) = (sol[..n].to_vec(), sol[n]);
        let value = weights.iter().zip(&self.samples).map(|(w, s)| w * s.z).sum();
        let variance = weights.iter().zip(&rhs).map(|(w, g)| w * g).sum::<f64>() + lagrange;
        KrigingPrediction {
            value,
            variance: variance.max(0.0),
            weights,
            lagrange,
        }
    }
}

fn merge_duplicates(samples: &[Sample2D], allow: bool) -> Result<Vec<Sample2D>, GeostatError> {
    // (first index, sum of z, count)
    let mut groups: Vec<(usize, f64, usize)> = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        match groups
            .iter_mut()
            .find(|g| samples[g.0].x == s.x && samples[g.0].y == s.y)
        {
            Some(g) if allow => {
                g.1 += s.z;
                g.2 += 1;
            }
            Some(g) => return Err(GeostatError::DuplicateLocation(g.0, i)),
            None => groups.push((i, s.z, 1)),
        }
    }
    Ok(groups
        .into_iter()
        .map(|(i, sum, count)| Sample2D::new(samples[i].x, samples[i].y, sum / count as f64))
        .collect())
}

/// One-shot ordinary kriging at a single query point.
pub fn krige(
    samples: &[Sample2D],
    model: &VariogramModel,
    query: (f64, f64),
) -> Result<KrigingPrediction, GeostatError> {
    Ok(KrigingModel::fit(samples, *model)?.predict(query.0, query.1))
}
