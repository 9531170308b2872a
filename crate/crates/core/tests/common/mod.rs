//! Independent reference implementations used by the integration and
//! acceptance tests. None of them call into the library's algorithms; they
//! only read plain data out of its types.

#![allow(dead_code)]

use std::collections::HashMap;

use spectrum_rem::allocation::{AllocationRequest, PathLossModel, PriorityClass, ReasonCode, TransmitterSpec};
use spectrum_rem::ingest::Measurement;
use spectrum_rem::neural::MlpModel;

// ---------------------------------------------------------------- occupancy

/// Detection state per (channel, slot) computed by direct arithmetic.
pub struct BruteGrid {
    pub n_channels: usize,
    pub n_slots: usize,
    /// `None`: no sample. `Some(true)`: some sample above threshold.
    pub cells: HashMap<(usize, usize), bool>,
}

pub fn brute_grid(
    ms: &[Measurement],
    start_mhz: f64,
    width_mhz: f64,
    n_channels: usize,
    t0: f64,
    slot_s: f64,
    n_slots: usize,
    threshold: f64,
) -> BruteGrid {
    let mut cells = HashMap::new();
    for m in ms {
        let c = ((m.freq_mhz - start_mhz) / width_mhz).floor();
        let s = ((m.timestamp_s - t0) / slot_s).floor();
        if c < 0.0 || c >= n_channels as f64 || s < 0.0 || s >= n_slots as f64 {
            continue;
        }
        let hot = m.power_dbm > threshold;
        let e = cells.entry((c as usize, s as usize)).or_insert(false);
        *e = *e || hot;
    }
    BruteGrid {
        n_channels,
        n_slots,
        cells,
    }
}

/// Occupied fraction of every slot that has at least one sample, in slot order.
pub fn brute_fractions(g: &BruteGrid) -> Vec<f64> {
    let mut out = Vec::new();
    for s in 0..g.n_slots {
        let mut sampled = 0;
        let mut hot = 0;
        for c in 0..g.n_channels {
            if let Some(&h) = g.cells.get(&(c, s)) {
                sampled += 1;
                hot += h as usize;
            }
        }
        if sampled > 0 {
            out.push(hot as f64 / sampled as f64);
        }
    }
    out
}

/// Mean summed in slot order.
pub fn brute_mean(v: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in v {
        s += x;
    }
    s / v.len() as f64
}

/// Smallest value `v` with at least `p` percent of the values `<= v`.
pub fn brute_percentile(v: &[f64], p: usize) -> f64 {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for &cand in &sorted {
        let at_or_below = sorted.iter().filter(|&&x| x <= cand).count();
        if at_or_below * 100 >= p * sorted.len() {
            return cand;
        }
    }
    unreachable!()
}

/// Joint code per (channel, slot): 0 neither occupied, 2 both, 1 otherwise.
pub fn brute_joint(a: &BruteGrid, b: &BruteGrid) -> Vec<Vec<u8>> {
    (0..a.n_channels)
        .map(|c| {
            (0..a.n_slots)
                .map(|s| {
                    let ha = a.cells.get(&(c, s)).copied().unwrap_or(false);
                    let hb = b.cells.get(&(c, s)).copied().unwrap_or(false);
                    match (ha, hb) {
                        (true, true) => 2,
                        (false, false) => 0,
                        _ => 1,
                    }
                })
                .collect()
        })
        .collect()
}

// ------------------------------------------------------------------ kriging

/// Exponential semivariance, zero at zero separation.
pub fn exp_gamma(h: f64, nugget: f64, sill: f64, range: f64) -> f64 {
    if h == 0.0 {
        0.0
    } else {
        nugget + sill * (1.0 - (-h / range).exp())
    }
}

fn det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 1 {
        return m[0][0];
    }
    (0..n)
        .map(|j| {
            let minor: Vec<Vec<f64>> = m[1..]
                .iter()
                .map(|row| row.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, v)| *v).collect())
                .collect();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * m[0][j] * det(&minor)
        })
        .sum()
}

/// Solves `a x = b` by Cramer's rule with cofactor determinants.
pub fn cramer(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let d = det(a);
    (0..b.len())
        .map(|j| {
            let mut m = a.to_vec();
            for (row, bi) in m.iter_mut().zip(b) {
                row[j] = *bi;
            }
            det(&m) / d
        })
        .collect()
}

/// Ordinary kriging value and variance at `q` by Cramer's rule.
pub fn kriging_oracle(pts: &[(f64, f64, f64)], q: (f64, f64), nugget: f64, sill: f64, range: f64) -> (f64, f64) {
    let n = pts.len();
    let dist = |a: (f64, f64), b: (f64, f64)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
    let mut a = vec![vec![0.0; n + 1]; n + 1];
    let mut rhs = vec![1.0; n + 1];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = exp_gamma(dist((pts[i].0, pts[i].1), (pts[j].0, pts[j].1)), nugget, sill, range);
        }
        a[i][n] = 1.0;
        a[n][i] = 1.0;
        rhs[i] = exp_gamma(dist((pts[i].0, pts[i].1), q), nugget, sill, range);
    }
    let w = cramer(&a, &rhs);
    let value = (0..n).map(|i| w[i] * pts[i].2).sum();
    let var = (0..n).map(|i| w[i] * rhs[i]).sum::<f64>() + w[n];
    (value, var)
}

// ------------------------------------------------------------------ network

/// Analytic Laplacian of the standardized network output, by forward
/// propagation of first and second input derivatives through each layer.
pub fn analytic_laplacian(model: &MlpModel, x: f64, y: f64) -> f64 {
    let dims = model.layer_dims().to_vec();
    let mut a = vec![x, y];
    let mut da = [vec![1.0, 0.0], vec![0.0, 1.0]];
    let mut dda = [vec![0.0, 0.0], vec![0.0, 0.0]];
    let last = dims.len() - 2;
    for l in 0..=last {
        let w = model.weights(l);
        let b = model.biases(l);
        let out = dims[l + 1];
        let lin = |v: &[f64], bias: bool| -> Vec<f64> {
            (0..out)
                .map(|o| (0..v.len()).map(|i| w[[o, i]] * v[i]).sum::<f64>() + if bias { b[o] } else { 0.0 })
                .collect()
        };
        let z = lin(&a, true);
        let dz = [lin(&da[0], false), lin(&da[1], false)];
        let ddz = [lin(&dda[0], false), lin(&dda[1], false)];
        if l == last {
            a = z;
            da = dz;
            dda = ddz;
        } else {
            let t: Vec<f64> = z.iter().map(|v| v.tanh()).collect();
            let t1: Vec<f64> = t.iter().map(|t| 1.0 - t * t).collect();
            let t2: Vec<f64> = t.iter().zip(&t1).map(|(t, d)| -2.0 * t * d).collect();
            for d in 0..2 {
                dda[d] = (0..out).map(|o| t2[o] * dz[d][o] * dz[d][o] + t1[o] * ddz[d][o]).collect();
                da[d] = (0..out).map(|o| t1[o] * dz[d][o]).collect();
            }
            a = t;
        }
    }
    dda[0][0] + dda[1][0]
}

// --------------------------------------------------------------- allocation

/// Path loss written out from the model formulas.
pub fn loss_db(model: &PathLossModel, d_km: f64, f_mhz: f64) -> f64 {
    match *model {
        PathLossModel::FreeSpace => 20.0 * d_km.log10() + 20.0 * f_mhz.log10() + 32.44,
        PathLossModel::LogDistance { exponent, d0_km, pl0_db } => pl0_db + 10.0 * exponent * (d_km / d0_km).log10(),
    }
}

/// Distance at which the loss equals `budget_db`.
pub fn reach_km(model: &PathLossModel, budget_db: f64, f_mhz: f64) -> f64 {
    match *model {
        PathLossModel::FreeSpace => 10f64.powf((budget_db - 32.44 - 20.0 * f_mhz.log10()) / 20.0),
        PathLossModel::LogDistance { exponent, d0_km, pl0_db } => d0_km * 10f64.powf((budget_db - pl0_db) / (10.0 * exponent)),
    }
}

pub fn center_mhz(start: f64, width: f64, lo: usize, hi_incl: usize) -> f64 {
    (start + lo as f64 * width + start + (hi_incl + 1) as f64 * width) / 2.0
}

pub fn km(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Everything the allocation oracle needs, as plain data.
pub struct Scenario<'a> {
    pub start_mhz: f64,
    pub width_mhz: f64,
    pub n_channels: usize,
    pub free: Vec<bool>,
    pub sensing: bool,
    pub model: PathLossModel,
    pub requests: &'a [AllocationRequest],
    pub pus: &'a [TransmitterSpec],
    pub database_cap: f64,
    pub sensing_cap: f64,
    pub su_threshold: f64,
    pub pu_threshold: f64,
    pub min_su_eirp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Granted { channels: Vec<usize>, cap: f64, eirp: f64 },
    Rejected(ReasonCode),
}

struct Protected {
    site: (f64, f64),
    lo: usize,
    hi: usize,
    freq: f64,
    thr: f64,
}

impl Scenario<'_> {
    fn k(&self, r: &AllocationRequest) -> usize {
        let k = (r.bandwidth_mhz / self.width_mhz - 1e-9).ceil();
        k.max(1.0) as usize
    }

    fn order(&self) -> Vec<usize> {
        let mut pu: Vec<usize> = (0..self.requests.len()).filter(|&i| self.requests[i].class == PriorityClass::Pu).collect();
        pu.extend((0..self.requests.len()).filter(|&i| self.requests[i].class == PriorityClass::Su));
        pu
    }

    fn cap(&self, site: (f64, f64), lo: usize, hi: usize, protected: &[Protected]) -> f64 {
        let mut cap = self.sensing_cap;
        for p in protected {
            if p.hi < lo || p.lo > hi {
                continue;
            }
            let d = km(site, p.site);
            let limit = if d > 0.0 { p.thr + loss_db(&self.model, d, p.freq) } else { f64::NEG_INFINITY };
            cap = cap.min(limit);
        }
        cap
    }

    /// Enumerates every assignment of a start channel (or refusal) to each
    /// request, keeps the feasible ones and returns the lexicographically
    /// smallest in service order, refusals ranking last.
    pub fn exhaustive(&self) -> Vec<Outcome> {
        let order = self.order();
        let ks: Vec<usize> = order.iter().map(|&i| self.k(&self.requests[i])).collect();
        let choices: Vec<usize> = ks.iter().map(|&k| if k > self.n_channels { 1 } else { self.n_channels - k + 2 }).collect();
        let total: usize = choices.iter().product();
        let mut best: Option<(Vec<usize>, Vec<Option<(usize, f64, f64)>>)> = None;
        for code in 0..total {
            let mut rem = code;
            let mut pick = Vec::with_capacity(order.len());
            for &c in &choices {
                pick.push(rem % c);
                rem /= c;
            }
            // choice value c - 1 means refuse; 0..c-1 are starts (refuse ranks last)
            let starts: Vec<Option<usize>> = pick
                .iter()
                .zip(&choices)
                .map(|(&p, &c)| if p + 1 == c { None } else { Some(p) })
                .collect();
            if let Some(grants) = self.feasible(&order, &ks, &starts) {
                let key: Vec<usize> = starts.iter().map(|s| s.map_or(usize::MAX, |v| v)).collect();
                if best.as_ref().is_none_or(|(k, _)| key < *k) {
                    best = Some((key, grants));
                }
            }
        }
        let (_, grants) = best.expect("refusing everything is always feasible");
        let mut out = vec![Outcome::Rejected(ReasonCode::NoFreeRun); self.requests.len()];
        for (pos, &idx) in order.iter().enumerate() {
            out[idx] = match grants[pos] {
                Some((s, cap, eirp)) => Outcome::Granted {
                    channels: (s..s + ks[pos]).collect(),
                    cap,
                    eirp,
                },
                None => Outcome::Rejected(self.reason(&order, &ks, &grants, pos)),
            };
        }
        out
    }

    fn protected_before(&self, order: &[usize], ks: &[usize], grants: &[Option<(usize, f64, f64)>], upto: usize) -> Vec<Protected> {
        let mut p: Vec<Protected> = self
            .pus
            .iter()
            .filter_map(|t| {
                let c = ((t.freq_mhz - self.start_mhz) / self.width_mhz).floor();
                (c >= 0.0 && c < self.n_channels as f64).then(|| Protected {
                    site: t.site,
                    lo: c as usize,
                    hi: c as usize,
                    freq: t.freq_mhz,
                    thr: t.threshold_dbm,
                })
            })
            .collect();
        for pos in 0..upto {
            let r = &self.requests[order[pos]];
            if let (PriorityClass::Pu, Some((s, _, _))) = (r.class, grants[pos]) {
                let hi = s + ks[pos] - 1;
                p.push(Protected {
                    site: r.site,
                    lo: s,
                    hi,
                    freq: center_mhz(self.start_mhz, self.width_mhz, s, hi),
                    thr: self.pu_threshold,
                });
            }
        }
        p
    }

    fn su_clash(&self, a: (usize, usize, f64, (f64, f64)), b: (usize, usize, f64, (f64, f64))) -> bool {
        let lo = a.0.max(b.0);
        let hi = a.1.min(b.1);
        if lo > hi {
            return false;
        }
        let f = center_mhz(self.start_mhz, self.width_mhz, lo, hi);
        let range = reach_km(&self.model, a.2 - self.su_threshold, f).max(reach_km(&self.model, b.2 - self.su_threshold, f));
        km(a.3, b.3) < range
    }

    fn pu_held(&self, order: &[usize], ks: &[usize], grants: &[Option<(usize, f64, f64)>], upto: usize, lo: usize, hi: usize) -> bool {
        (0..upto).any(|pos| {
            self.requests[order[pos]].class == PriorityClass::Pu
                && grants[pos].is_some_and(|(s, _, _)| !(s + ks[pos] - 1 < lo || s > hi))
        })
    }

    fn feasible(&self, order: &[usize], ks: &[usize], starts: &[Option<usize>]) -> Option<Vec<Option<(usize, f64, f64)>>> {
        let mut grants: Vec<Option<(usize, f64, f64)>> = Vec::with_capacity(order.len());
        for (pos, &idx) in order.iter().enumerate() {
            let r = &self.requests[idx];
            let Some(s) = starts[pos] else {
                grants.push(None);
                continue;
            };
            let hi = s + ks[pos] - 1;
            if !(s..=hi).all(|c| self.free[c]) || self.pu_held(order, ks, &grants, pos, s, hi) {
                return None;
            }
            if r.class == PriorityClass::Pu {
                grants.push(Some((s, r.eirp_desired_dbm, r.eirp_desired_dbm)));
                continue;
            }
            if !self.sensing {
                grants.push(Some((s, self.database_cap, r.eirp_desired_dbm.min(self.database_cap))));
                continue;
            }
            let cap = self.cap(r.site, s, hi, &self.protected_before(order, ks, &grants, pos));
            if !(cap >= self.min_su_eirp) {
                return None;
            }
            let eirp = r.eirp_desired_dbm.min(cap);
            for q in 0..pos {
                let other = &self.requests[order[q]];
                if let (PriorityClass::Su, Some((qs, _, qe))) = (other.class, grants[q]) {
                    if self.su_clash((s, hi, eirp, r.site), (qs, qs + ks[q] - 1, qe, other.site)) {
                        return None;
                    }
                }
            }
            grants.push(Some((s, cap, eirp)));
        }
        Some(grants)
    }

    fn reason(&self, order: &[usize], ks: &[usize], grants: &[Option<(usize, f64, f64)>], pos: usize) -> ReasonCode {
        let k = ks[pos];
        if k > self.n_channels {
            return ReasonCode::BandwidthExceedsGrid;
        }
        let open: Vec<usize> = (0..=self.n_channels - k)
            .filter(|&s| (s..s + k).all(|c| self.free[c]) && !self.pu_held(order, ks, grants, pos, s, s + k - 1))
            .collect();
        if open.is_empty() {
            return ReasonCode::NoFreeRun;
        }
        let r = &self.requests[order[pos]];
        let protected = self.protected_before(order, ks, grants, pos);
        if self.sensing && open.iter().all(|&s| !(self.cap(r.site, s, s + k - 1, &protected) >= self.min_su_eirp)) {
            return ReasonCode::PuProtection;
        }
        ReasonCode::SuConflict
    }
}
