//! Propagation-based protection zones, EIRP-limited coverage, and white-space
//! channel allocation under a static-database policy and a sensing-driven
//! policy.
//!
//! Distances are kilometres in a local planar frame. Interference is
//! evaluated against the single dominant transmitter; power from several
//! secondary users is not summed.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::ChannelGrid;
use crate::occupancy::AvailabilityMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocationError {
    #[error("distance {0} km must be > 0")]
    Distance(f64),
    #[error("invalid path-loss model: {0}")]
    Model(String),
    #[error("invalid frequency {0} MHz")]
    Frequency(f64),
    #[error("invalid request `{id}`: {reason}")]
    Request { id: String, reason: String },
    #[error("channel {channel} outside grid of {n_channels}")]
    Channel { channel: usize, n_channels: usize },
    #[error("availability matrix grid does not match the allocation grid")]
    GridMismatch,
}

/// Free-space constant for distance in km and frequency in MHz.
pub const FSPL_CONSTANT_DB: f64 = 32.44;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathLossModel {
    /// `20 log10(d_km) + 20 log10(f_mhz) + 32.44`
    FreeSpace,
    /// `pl0_db + 10 n log10(d / d0)`, frequency independent.
    LogDistance { exponent: f64, d0_km: f64, pl0_db: f64 },
}

impl PathLossModel {
    pub fn validate(&self) -> Result<(), AllocationError> {
        match *self {
            PathLossModel::FreeSpace => Ok(()),
            PathLossModel::LogDistance { exponent, d0_km, pl0_db } => {
                if exponent > 0.0 && exponent.is_finite() && d0_km > 0.0 && d0_km.is_finite() && pl0_db.is_finite() {
                    Ok(())
                } else {
                    Err(AllocationError::Model(format!("exponent {exponent}, d0 {d0_km} km, PL0 {pl0_db} dB")))
                }
            }
        }
    }

    /// Distance at which the loss equals `loss_db`; the closed-form inverse
    /// of [`path_loss_db`].
    pub fn distance_for_loss(&self, loss_db: f64, freq_mhz: f64) -> f64 {
        match *self {
            PathLossModel::FreeSpace => 10f64.powf((loss_db - FSPL_CONSTANT_DB - 20.0 * freq_mhz.log10()) / 20.0),
            PathLossModel::LogDistance { exponent, d0_km, pl0_db } => {
                d0_km * 10f64.powf((loss_db - pl0_db) / (10.0 * exponent))
            }
        }
    }
}

pub fn path_loss_db(model: &PathLossModel, distance_km: f64, freq_mhz: f64) -> Result<f64, AllocationError> {
    model.validate()?;
    if !(distance_km > 0.0 && distance_km.is_finite()) {
        return Err(AllocationError::Distance(distance_km));
    }
    if !(freq_mhz > 0.0 && freq_mhz.is_finite()) {
        return Err(AllocationError::Frequency(freq_mhz));
    }
    Ok(match *model {
        PathLossModel::FreeSpace => 20.0 * distance_km.log10() + 20.0 * freq_mhz.log10() + FSPL_CONSTANT_DB,
        PathLossModel::LogDistance { exponent, d0_km, pl0_db } => {
            pl0_db + 10.0 * exponent * (distance_km / d0_km).log10()
        }
    })
}

/// A transmitter. `threshold_dbm` is the receiver sensitivity when used for
/// coverage and the tolerated interference level when the transmitter is a
/// protected incumbent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmitterSpec {
    pub id: String,
    pub site: (f64, f64),
    pub eirp_dbm: f64,
    pub freq_mhz: f64,
    pub threshold_dbm: f64,
}

/// Result of a radius computation. `zero_coverage` marks link budgets that
/// cannot be met at any distance (for example a switched-off transmitter).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Radius {
    pub km: f64,
    pub zero_coverage: bool,
}

impl Radius {
    const ZERO: Radius = Radius {
        km: 0.0,
        zero_coverage: true,
    };
}

/// Link budgets at or below this are treated as unsolvable, dB.
const MIN_BUDGET_DB: f64 = -200.0;

fn radius_for_budget(budget_db: f64, model: &PathLossModel, freq_mhz: f64) -> Result<Radius, AllocationError> {
    model.validate()?;
    if !(freq_mhz > 0.0 && freq_mhz.is_finite()) {
        return Err(AllocationError::Frequency(freq_mhz));
    }
    if budget_db.is_nan() || budget_db <= MIN_BUDGET_DB {
        return Ok(Radius::ZERO);
    }
    let km = model.distance_for_loss(budget_db, freq_mhz);
    Ok(if km > 0.0 {
        Radius {
            km,
            zero_coverage: false,
        }
    } else {
        Radius::ZERO
    })
}

/// Largest distance at which `eirp - path_loss >= sensitivity`.
pub fn coverage_radius_km(tx: &TransmitterSpec, model: &PathLossModel) -> Result<Radius, AllocationError> {
    radius_for_budget(tx.eirp_dbm - tx.threshold_dbm, model, tx.freq_mhz)
}

/// Minimum separation keeping a secondary transmitter at `su_eirp_dbm` at or
/// below the incumbent's interference threshold.
pub fn protection_radius_km(
    pu: &TransmitterSpec,
    su_eirp_dbm: f64,
    model: &PathLossModel,
) -> Result<Radius, AllocationError> {
    radius_for_budget(su_eirp_dbm - pu.threshold_dbm, model, pu.freq_mhz)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    DatabaseConservative,
    SensingDynamic,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "database_conservative" | "database" => Ok(Mode::DatabaseConservative),
            "sensing_dynamic" | "sensing" => Ok(Mode::SensingDynamic),
            _ => Err(format!("unknown allocation mode `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PriorityClass {
    Pu,
    Su,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRequest {
    pub requester_id: String,
    pub bandwidth_mhz: f64,
    pub site: (f64, f64),
    pub eirp_desired_dbm: f64,
    pub class: PriorityClass,
}

/// The channels a policy may hand out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    pub grid: ChannelGrid,
    free: Vec<bool>,
}

impl ChannelSet {
    /// A static list such as a white-space database returns.
    pub fn from_database(grid: ChannelGrid, channels: &[usize]) -> Result<Self, AllocationError> {
        let mut free = vec![false; grid.n_channels];
        for &c in channels {
            *free.get_mut(c).ok_or(AllocationError::Channel {
                channel: c,
                n_channels: grid.n_channels,
            })? = true;
        }
        Ok(Self { grid, free })
    }

    /// Channels free in every slot of `slots`. In a two-site matrix only
    /// cells free at both sites count.
    pub fn from_availability(matrix: &AvailabilityMatrix, slots: Range<usize>) -> Self {
        let free = (0..matrix.grid.n_channels)
            .map(|c| matrix.is_free_over(c, slots.clone()))
            .collect();
        Self {
            grid: matrix.grid,
            free,
        }
    }

    pub fn all_free(grid: ChannelGrid) -> Self {
        Self {
            free: vec![true; grid.n_channels],
            grid,
        }
    }

    pub fn is_free(&self, channel: usize) -> bool {
        self.free.get(channel).copied().unwrap_or(false)
    }

    pub fn free_channels(&self) -> Vec<usize> {
        (0..self.free.len()).filter(|&c| self.free[c]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationConfig {
    pub database_cap_dbm: f64,
    pub sensing_cap_dbm: f64,
    /// Interference threshold of secondary receivers, used for SU-vs-SU range.
    pub su_threshold_dbm: f64,
    /// Interference threshold assigned to PU requests granted in the plan.
    pub pu_threshold_dbm: f64,
    /// A sensing-mode grant whose protection-derived cap falls below this is
    /// refused with `PU_PROTECTION`.
    pub min_su_eirp_dbm: f64,
}

impl Default for AllocationConfig {
    fn default() -> Self {
        Self {
            database_cap_dbm: 16.0,
            sensing_cap_dbm: 42.0,
            su_threshold_dbm: -118.0,
            pu_threshold_dbm: -118.0,
            min_su_eirp_dbm: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReasonCode {
    NoFreeRun,
    PuProtection,
    SuConflict,
    BandwidthExceedsGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grant {
    pub requester_id: String,
    pub request_index: usize,
    pub class: PriorityClass,
    /// Contiguous, ascending.
    pub channels: Vec<usize>,
    pub eirp_cap_dbm: f64,
    /// Granted power, `min(desired, cap)`.
    pub eirp_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub requester_id: String,
    pub request_index: usize,
    pub reason: ReasonCode,
}

/// Two co-channel grants closer than their mutual interference range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conflict {
    pub a: String,
    pub b: String,
    pub shared_channels: Vec<usize>,
    pub separation_km: f64,
    pub interference_range_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub mode: Mode,
    pub grants: Vec<Grant>,
    pub rejections: Vec<Rejection>,
    pub conflicts: Vec<Conflict>,
}

/// Number of channels needed for `bandwidth_mhz`.
pub fn channels_needed(bandwidth_mhz: f64, grid: &ChannelGrid) -> usize {
    ((bandwidth_mhz / grid.channel_width_mhz) - 1e-9).ceil().max(1.0) as usize
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

fn overlap(a: &[usize], b: &Range<usize>) -> bool {
    a.iter().any(|c| b.contains(c))
}

/// A transmitter whose co-channel signal must stay below `threshold_dbm`.
struct Protected {
    site: (f64, f64),
    channels: Vec<usize>,
    freq_mhz: f64,
    threshold_dbm: f64,
}

/// Mutual interference range of two secondary transmitters.
pub fn su_interference_range_km(
    eirp_a: f64,
    eirp_b: f64,
    freq_mhz: f64,
    su_threshold_dbm: f64,
    model: &PathLossModel,
) -> Result<f64, AllocationError> {
    let victim = |eirp: f64| radius_for_budget(eirp - su_threshold_dbm, model, freq_mhz).map(|r| r.km);
    Ok(victim(eirp_a)?.max(victim(eirp_b)?))
}

/// Highest EIRP at `site` on `run` keeping every co-channel incumbent at or
/// below its threshold, bounded by `cap`.
fn protection_cap(site: (f64, f64), run: &Range<usize>, protected: &[Protected], cap: f64, model: &PathLossModel) -> f64 {
    protected
        .iter()
        .filter(|p| overlap(&p.channels, run))
        .fold(cap, |acc, p| {
            let d = distance(site, p.site);
            match path_loss_db(model, d, p.freq_mhz) {
                Ok(pl) => acc.min(p.threshold_dbm + pl),
                Err(_) => f64::NEG_INFINITY,
            }
        })
}

/// Plans channel grants for `requests`.
///
/// Requests are served PU before SU, then in arrival order. Each receives the
/// lowest-index contiguous run of channels covering its bandwidth.
///
/// * `DatabaseConservative`: runs come from the static list in `channels`;
///   every SU is capped at `database_cap_dbm`; co-channel SU pairs within
///   interference range are granted anyway and reported in `conflicts`.
/// * `SensingDynamic`: runs come from the sensed-free channels; the SU cap is
///   the highest EIRP that keeps every co-channel PU (the `pus` incumbents
///   and PU grants of this plan) at or below its threshold, bounded by
///   `sensing_cap_dbm`; a run that would put two SUs within interference
///   range on a shared channel is skipped.
pub fn allocate(
    requests: &[AllocationRequest],
    channels: &ChannelSet,
    mode: Mode,
    model: &PathLossModel,
    pus: &[TransmitterSpec],
    config: &AllocationConfig,
) -> Result<AllocationPlan, AllocationError> {
    model.validate()?;
    let grid = channels.grid;
    for r in requests {
        if !(r.bandwidth_mhz > 0.0 && r.bandwidth_mhz.is_finite()) {
            return Err(AllocationError::Request {
                id: r.requester_id.clone(),
                reason: format!("bandwidth_mhz = {}", r.bandwidth_mhz),
            });
        }
        if !(r.site.0.is_finite() && r.site.1.is_finite()) || r.eirp_desired_dbm.is_nan() {
            return Err(AllocationError::Request {
                id: r.requester_id.clone(),
                reason: "non-finite site or EIRP".into(),
            });
        }
    }

    let mut protected: Vec<Protected> = pus
        .iter()
        .filter_map(|p| {
            grid.channel_index(p.freq_mhz).ok().map(|c| Protected {
                site: p.site,
                channels: vec![c],
                freq_mhz: p.freq_mhz,
                threshold_dbm: p.threshold_dbm,
            })
        })
        .collect();

    let mut order: Vec<usize> = (0..requests.len()).collect();
    order.sort_by_key(|&i| (requests[i].class == PriorityClass::Su, i));

    let mut plan = AllocationPlan {
        mode,
        grants: Vec::new(),
        rejections: Vec::new(),
        conflicts: Vec::new(),
    };
    let mut pu_held = vec![false; grid.n_channels];

    for idx in order {
        let req = &requests[idx];
        let k = channels_needed(req.bandwidth_mhz, &grid);
        let reject = |plan: &mut AllocationPlan, reason| {
            plan.rejections.push(Rejection {
                requester_id: req.requester_id.clone(),
                request_index: idx,
                reason,
            })
        };
        if k > grid.n_channels {
            reject(&mut plan, ReasonCode::BandwidthExceedsGrid);
            continue;
        }
        let runs: Vec<Range<usize>> = (0..=grid.n_channels - k)
            .map(|s| s..s + k)
            .filter(|run| run.clone().all(|c| channels.is_free(c) && !pu_held[c]))
            .collect();
        if runs.is_empty() {
            reject(&mut plan, ReasonCode::NoFreeRun);
            continue;
        }

        if req.class == PriorityClass::Pu {
            let run = runs[0].clone();
            run.clone().for_each(|c| pu_held[c] = true);
            let (lo, hi) = (grid.channel_span(run.start).0, grid.channel_span(run.end - 1).1);
            protected.push(Protected {
                site: req.site,
                channels: run.clone().collect(),
                freq_mhz: (lo + hi) / 2.0,
                threshold_dbm: config.pu_threshold_dbm,
            });
            plan.grants.push(Grant {
                requester_id: req.requester_id.clone(),
                request_index: idx,
                class: PriorityClass::Pu,
                channels: run.collect(),
                eirp_cap_dbm: req.eirp_desired_dbm,
                eirp_dbm: req.eirp_desired_dbm,
            });
            continue;
        }

        match mode {
            Mode::DatabaseConservative => {
                let cap = config.database_cap_dbm;
                plan.grants.push(Grant {
                    requester_id: req.requester_id.clone(),
                    request_index: idx,
                    class: PriorityClass::Su,
                    channels: runs[0].clone().collect(),
                    eirp_cap_dbm: cap,
                    eirp_dbm: req.eirp_desired_dbm.min(cap),
                });
            }
            Mode::SensingDynamic => {
                let mut any_pu_ok = false;
                let mut chosen = None;
                for run in &runs {
                    let cap = protection_cap(req.site, run, &protected, config.sensing_cap_dbm, model);
                    if !(cap >= config.min_su_eirp_dbm) {
                        continue;
                    }
                    any_pu_ok = true;
                    let eirp = req.eirp_desired_dbm.min(cap);
                    let mut clash = false;
                    for g in plan.grants.iter().filter(|g| g.class == PriorityClass::Su) {
                        let Some(freq) = shared_center_mhz(&grid, &g.channels, run) else {
                            continue;
                        };
                        let range = su_interference_range_km(eirp, g.eirp_dbm, freq, config.su_threshold_dbm, model)?;
                        if distance(req.site, requests[g.request_index].site) < range {
                            clash = true;
                            break;
                        }
                    }
                    if !clash {
                        chosen = Some((run.clone(), cap, eirp));
                        break;
                    }
                }
                match chosen {
                    Some((run, cap, eirp)) => plan.grants.push(Grant {
                        requester_id: req.requester_id.clone(),
                        request_index: idx,
                        class: PriorityClass::Su,
                        channels: run.collect(),
                        eirp_cap_dbm: cap,
                        eirp_dbm: eirp,
                    }),
                    None if any_pu_ok => reject(&mut plan, ReasonCode::SuConflict),
                    None => reject(&mut plan, ReasonCode::PuProtection),
                }
            }
        }
    }

    plan.conflicts = find_conflicts(&plan.grants, requests, &grid, model, config.su_threshold_dbm)?;
    Ok(plan)
}

fn run_center_mhz(grid: &ChannelGrid, run: &Range<usize>) -> f64 {
    (grid.channel_span(run.start).0 + grid.channel_span(run.end - 1).1) / 2.0
}

/// Center frequency of the channels `granted` shares with `run`, if any.
fn shared_center_mhz(grid: &ChannelGrid, granted: &[usize], run: &Range<usize>) -> Option<f64> {
    let lo = granted.iter().copied().filter(|c| run.contains(c)).min()?;
    let hi = granted.iter().copied().filter(|c| run.contains(c)).max()?;
    Some(run_center_mhz(grid, &(lo..hi + 1)))
}

/// All co-channel SU grant pairs separated by less than their mutual
/// interference range.
pub fn find_conflicts(
    grants: &[Grant],
    requests: &[AllocationRequest],
    grid: &ChannelGrid,
    model: &PathLossModel,
    su_threshold_dbm: f64,
) -> Result<Vec<Conflict>, AllocationError> {
    let sus: Vec<&Grant> = grants.iter().filter(|g| g.class == PriorityClass::Su).collect();
    let mut out = Vec::new();
    for (i, a) in sus.iter().enumerate() {
        for b in &sus[i + 1..] {
            let shared: Vec<usize> = a.channels.iter().copied().filter(|c| b.channels.contains(c)).collect();
            let Some(freq) = shared_center_mhz(grid, &a.channels, &(b.channels[0]..b.channels[b.channels.len() - 1] + 1)) else {
                continue;
            };
            let range = su_interference_range_km(a.eirp_dbm, b.eirp_dbm, freq, su_threshold_dbm, model)?;
            let sep = distance(requests[a.request_index].site, requests[b.request_index].site);
            if sep < range {
                out.push(Conflict {
                    a: a.requester_id.clone(),
                    b: b.requester_id.clone(),
                    shared_channels: shared,
                    separation_km: sep,
                    interference_range_km: range,
                });
            }
        }
    }
    Ok(out)
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn model() -> impl Strategy<Value = PathLossModel> {
        prop_oneof![
            Just(PathLossModel::FreeSpace),
            (2.0..4.5f64, 60.0..100.0f64).prop_map(|(exponent, pl0_db)| PathLossModel::LogDistance {
                exponent,
                d0_km: 1.0,
                pl0_db
            }),
        ]
    }

    fn request() -> impl Strategy<Value = AllocationRequest> {
        (1.0..20.0f64, 0.0..200.0f64, 0.0..200.0f64, 0.0..45.0f64, prop::bool::weighted(0.2)).prop_map(|(bw, x, y, eirp, pu)| {
            AllocationRequest {
                requester_id: String::new(),
                bandwidth_mhz: bw,
                site: (x, y),
                eirp_desired_dbm: eirp,
                class: if pu { PriorityClass::Pu } else { PriorityClass::Su },
            }
        })
    }

    proptest! {
        #[test]
        fn radius_inverts_path_loss(m in model(), budget in 40.0..180.0f64, f in 50.0..6000.0f64) {
            let d = m.distance_for_loss(budget, f);
            let back = path_loss_db(&m, d, f).unwrap();
            prop_assert!((back - budget).abs() <= 1e-9 * budget.abs());
        }

        #[test]
        fn coverage_grows_with_power(m in model(), lo in -10.0..40.0f64, step in 0.1..20.0f64) {
            let tx = |eirp| TransmitterSpec { id: String::new(), site: (0.0, 0.0), eirp_dbm: eirp, freq_mhz: 600.0, threshold_dbm: -95.0 };
            let a = coverage_radius_km(&tx(lo), &m).unwrap().km;
            let b = coverage_radius_km(&tx(lo + step), &m).unwrap().km;
            prop_assert!(b > a);
        }

        #[test]
        fn plans_are_well_formed(
            reqs in prop::collection::vec(request(), 0..8),
            free in prop::collection::vec(prop::bool::weighted(0.7), 6),
            m in model(),
            sensing in any::<bool>(),
        ) {
            let reqs: Vec<AllocationRequest> = reqs.into_iter().enumerate()
                .map(|(i, r)| AllocationRequest { requester_id: format!("r{i}"), ..r }).collect();
            let grid = ChannelGrid::new(470.0, 6.0, 6).unwrap();
            let list: Vec<usize> = (0..6).filter(|&c| free[c]).collect();
            let channels = ChannelSet::from_database(grid, &list).unwrap();
            let mode = if sensing { Mode::SensingDynamic } else { Mode::DatabaseConservative };
            let plan = allocate(&reqs, &channels, mode, &m, &[], &AllocationConfig::default()).unwrap();

            let mut seen = vec![0; reqs.len()];
            plan.grants.iter().for_each(|g| seen[g.request_index] += 1);
            plan.rejections.iter().for_each(|r| seen[r.request_index] += 1);
            prop_assert!(seen.iter().all(|&n| n == 1));

            let pu_channels: Vec<usize> = plan.grants.iter().filter(|g| g.class == PriorityClass::Pu).flat_map(|g| g.channels.clone()).collect();
            for g in &plan.grants {
                prop_assert!(g.channels.windows(2).all(|w| w[1] == w[0] + 1));
                prop_assert!(g.channels.iter().all(|&c| channels.is_free(c)));
                prop_assert_eq!(g.channels.len(), channels_needed(reqs[g.request_index].bandwidth_mhz, &grid));
                prop_assert!(g.eirp_dbm <= g.eirp_cap_dbm);
                if g.class == PriorityClass::Su {
                    prop_assert!(g.channels.iter().all(|c| !pu_channels.contains(c)));
                }
            }
            let mut sorted = pu_channels.clone();
            sorted.sort_unstable();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), pu_channels.len());
            if sensing {
                prop_assert!(plan.conflicts.is_empty());
            }
        }
    }
}
