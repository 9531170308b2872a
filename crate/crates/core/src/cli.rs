//! The `spectrum-rem` command pipeline.
//!
//! Every subcommand reads a flat key-value TOML config (plus `--set key=value`
//! overrides), writes its artifacts into `output_dir`, writes a config echo
//! next to them, and appends timing to `run.log`. Artifacts depend only on
//! the echoed config and the input files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::allocation::{self, AllocationConfig, AllocationRequest, ChannelSet, Mode, PathLossModel, PriorityClass, TransmitterSpec};
use crate::geostat::{self, GeostatError, KrigingModel, Sample2D, VariogramFit, VariogramKind, VariogramModel};
use crate::ingest::{self, ChannelGrid, CoordFrame, IngestError, Measurement};
use crate::neural::{self, MlpModel, NeuralError, TrainConfig};
use crate::occupancy::{self, Band, OccupancyConfig, OccupancyError, OccupancyReport};
use crate::pinn::{self, Domain, PinnConfig};
use crate::rem::{self, Comparison, MapGrid, RemError, Surrogate, Tagged};
use crate::synth::{self, DutyCycleStream, HarmonicBenchmark};

/// Environment variable that overrides `seed`; its use is recorded in the echo.
pub const SEED_ENV: &str = "SPECTRUM_REM_SEED";

#[derive(Debug)]
pub enum CliError {
    /// Bad config, bad input file, or a missing path. Exit code 2.
    Validation(String),
    /// Not enough data to compute anything. Exit code 3.
    InsufficientData(String),
    /// Divergence, singular systems, non-finite predictions. Exit code 4.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::InsufficientData(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::InsufficientData(m) => write!(f, "insufficient data: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::DegenerateFrame { .. } | IngestError::TooFewPoints(_) => CliError::InsufficientData(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<OccupancyError> for CliError {
    fn from(e: OccupancyError) -> Self {
        match e {
            OccupancyError::NoData(_) | OccupancyError::DisjointWindows { .. } => CliError::InsufficientData(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<GeostatError> for CliError {
    fn from(e: GeostatError) -> Self {
        match e {
            GeostatError::InsufficientData(_) => CliError::InsufficientData(format!("kriging: {e}")),
            GeostatError::InvalidParameter(_) => CliError::Validation(format!("kriging: {e}")),
            _ => CliError::Numeric(format!("kriging: {e}")),
        }
    }
}

impl From<NeuralError> for CliError {
    fn from(e: NeuralError) -> Self {
        match e {
            NeuralError::Config(_) => CliError::Validation(format!("training: {e}")),
            NeuralError::EmptyBatch => CliError::InsufficientData(format!("training: {e}")),
            NeuralError::Divergence { .. } => CliError::Numeric(format!("training: {e}")),
        }
    }
}

impl From<RemError> for CliError {
    fn from(e: RemError) -> Self {
        match e {
            RemError::EmptyHeldOut => CliError::InsufficientData(e.to_string()),
            RemError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<allocation::AllocationError> for CliError {
    fn from(e: allocation::AllocationError) -> Self {
        CliError::Validation(format!("allocation: {e}"))
    }
}

/// Flat run configuration. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<String>,
    pub input_b: Option<String>,
    pub test_input: Option<String>,
    pub model: Option<String>,
    pub models: Vec<String>,
    pub requests: Option<String>,
    pub pus: Option<String>,
    pub output_dir: String,

    pub band_name: String,
    pub grid_start_mhz: f64,
    pub channel_width_mhz: f64,
    pub n_channels: usize,
    pub threshold_dbm: f64,
    pub slot_s: f64,
    pub window_s: f64,
    pub window_start_s: Option<f64>,

    pub method: Option<String>,
    /// Restrict model fitting to measurements in the channel containing this frequency.
    pub freq_mhz: Option<f64>,
    pub variogram_kind: String,
    pub n_bins: usize,
    pub max_lag: Option<f64>,
    /// When all three are set, the variogram is used as given instead of fitted.
    pub variogram_nugget: Option<f64>,
    pub variogram_sill: Option<f64>,
    pub variogram_range: Option<f64>,

    pub layer_dims: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub init_scale: f64,
    pub standardize: bool,

    pub lambda_pde: f64,
    pub n_collocation: usize,
    pub collocation_seed: u64,
    pub stencil_h: f64,
    pub resample_each_epoch: bool,

    pub map_nx: usize,
    pub map_ny: usize,
    pub map_bbox: [f64; 4],

    pub mode: String,
    pub path_loss: String,
    pub pl_exponent: f64,
    pub pl_d0_km: f64,
    pub pl0_db: f64,
    pub database_channels: Vec<usize>,
    pub slot_start: usize,
    pub slot_end: Option<usize>,
    pub database_cap_dbm: f64,
    pub sensing_cap_dbm: f64,
    pub su_threshold_dbm: f64,
    pub pu_threshold_dbm: f64,
    pub min_su_eirp_dbm: f64,

    pub synth_n_slots: usize,
    pub synth_n_train: usize,
    pub synth_n_test: usize,
    pub synth_noise_sigma: f64,

    /// Set when the seed came from the environment override.
    pub seed_override_env: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let occ = OccupancyConfig::default();
        let train = TrainConfig::default();
        let pinn = PinnConfig::default();
        let alloc = AllocationConfig::default();
        let grid = ChannelGrid::tvws();
        let map = MapGrid::default();
        Self {
            input: None,
            input_b: None,
            test_input: None,
            model: None,
            models: Vec::new(),
            requests: None,
            pus: None,
            output_dir: "out".into(),
            band_name: "TVWS".into(),
            grid_start_mhz: grid.start_mhz,
            channel_width_mhz: grid.channel_width_mhz,
            n_channels: grid.n_channels,
            threshold_dbm: occ.threshold_dbm,
            slot_s: occ.slot_s,
            window_s: occ.window_s,
            window_start_s: None,
            method: None,
            freq_mhz: None,
            variogram_kind: "exponential".into(),
            n_bins: 12,
            max_lag: None,
            variogram_nugget: None,
            variogram_sill: None,
            variogram_range: None,
            layer_dims: train.layer_dims,
            learning_rate: train.learning_rate,
            epochs: train.epochs,
            seed: train.seed,
            init_scale: train.init_scale,
            standardize: train.standardize,
            lambda_pde: pinn.lambda_pde,
            n_collocation: pinn.n_collocation,
            collocation_seed: pinn.collocation_seed,
            stencil_h: pinn.stencil_h,
            resample_each_epoch: pinn.resample_each_epoch,
            map_nx: map.nx,
            map_ny: map.ny,
            map_bbox: [map.x_min, map.x_max, map.y_min, map.y_max],
            mode: "sensing_dynamic".into(),
            path_loss: "free_space".into(),
            pl_exponent: 2.0,
            pl_d0_km: 1.0,
            pl0_db: 88.0,
            database_channels: Vec::new(),
            slot_start: 0,
            slot_end: None,
            database_cap_dbm: alloc.database_cap_dbm,
            sensing_cap_dbm: alloc.sensing_cap_dbm,
            su_threshold_dbm: alloc.su_threshold_dbm,
            pu_threshold_dbm: alloc.pu_threshold_dbm,
            min_su_eirp_dbm: alloc.min_su_eirp_dbm,
            synth_n_slots: 900,
            synth_n_train: 64,
            synth_n_test: 1024,
            synth_noise_sigma: 0.1,
            seed_override_env: None,
        }
    }
}

impl RunConfig {
    /// Builds a config from optional TOML text and `key=value` overrides.
    /// Override values are parsed as TOML and fall back to plain strings.
    pub fn load(text: Option<&str>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table = match text {
            Some(t) => t.parse().map_err(|e| CliError::Validation(format!("config: {e}")))?,
            None => toml::Table::new(),
        };
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| CliError::Validation(format!("override `{o}` is not key=value")))?;
            let (key, raw) = (key.trim(), raw.trim());
            let value = format!("v = {raw}")
                .parse::<toml::Table>()
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_string()));
            table.insert(key.to_string(), value);
        }
        table
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Validation(format!("config: {}", e.message())))
    }

    /// Applies the seed override variable, if set.
    pub fn apply_env(&mut self, env_seed: Option<String>) -> Result<(), CliError> {
        if let Some(raw) = env_seed {
            self.seed = raw
                .trim()
                .parse()
                .map_err(|_| CliError::Validation(format!("{SEED_ENV}=`{raw}` is not an unsigned integer")))?;
            self.seed_override_env = Some(raw);
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<ChannelGrid, CliError> {
        Ok(ChannelGrid::new(self.grid_start_mhz, self.channel_width_mhz, self.n_channels)?)
    }

    pub fn occupancy(&self) -> OccupancyConfig {
        OccupancyConfig {
            threshold_dbm: self.threshold_dbm,
            slot_s: self.slot_s,
            window_s: self.window_s,
            window_start_s: self.window_start_s,
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            layer_dims: self.layer_dims.clone(),
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            seed: self.seed,
            init_scale: self.init_scale,
            standardize: self.standardize,
            ..TrainConfig::default()
        }
    }

    pub fn pinn(&self) -> PinnConfig {
        PinnConfig {
            base: self.train(),
            lambda_pde: self.lambda_pde,
            n_collocation: self.n_collocation,
            collocation_seed: self.collocation_seed,
            stencil_h: self.stencil_h,
            domain: Domain::UNIT,
            resample_each_epoch: self.resample_each_epoch,
        }
    }

    pub fn map_grid(&self) -> Result<MapGrid, CliError> {
        let b = self.map_bbox;
        Ok(MapGrid::new((b[0], b[1], b[2], b[3]), self.map_nx, self.map_ny)?)
    }

    pub fn path_loss_model(&self) -> Result<PathLossModel, CliError> {
        let m = match self.path_loss.as_str() {
            "free_space" => PathLossModel::FreeSpace,
            "log_distance" => PathLossModel::LogDistance {
                exponent: self.pl_exponent,
                d0_km: self.pl_d0_km,
                pl0_db: self.pl0_db,
            },
            other => return Err(CliError::Validation(format!("unknown path_loss `{other}`"))),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn allocation(&self) -> AllocationConfig {
        AllocationConfig {
            database_cap_dbm: self.database_cap_dbm,
            sensing_cap_dbm: self.sensing_cap_dbm,
            su_threshold_dbm: self.su_threshold_dbm,
            pu_threshold_dbm: self.pu_threshold_dbm,
            min_su_eirp_dbm: self.min_su_eirp_dbm,
        }
    }

    fn variogram_override(&self) -> Result<Option<VariogramModel>, CliError> {
        match (self.variogram_nugget, self.variogram_sill, self.variogram_range) {
            (Some(n), Some(s), Some(r)) => Ok(Some(VariogramModel::new(self.variogram_kind()?, n, s, r)?)),
            (None, None, None) => Ok(None),
            _ => Err(CliError::Validation(
                "variogram_nugget, variogram_sill and variogram_range must be set together".into(),
            )),
        }
    }

    fn variogram_kind(&self) -> Result<VariogramKind, CliError> {
        Ok(self.variogram_kind.parse::<VariogramKind>()?)
    }

    fn require<'a>(&self, v: &'a Option<String>, key: &str) -> Result<&'a str, CliError> {
        v.as_deref()
            .ok_or_else(|| CliError::Validation(format!("config key `{key}` is required")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Kriging,
    Nn,
    Pinn,
}

impl std::str::FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kriging" => Ok(Method::Kriging),
            "nn" => Ok(Method::Nn),
            "pinn" => Ok(Method::Pinn),
            _ => Err(CliError::Validation(format!("unknown method `{s}` (kriging, nn, pinn)"))),
        }
    }
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Kriging => "kriging",
            Method::Nn => "nn",
            Method::Pinn => "pinn",
        }
    }
}

/// Serialized kriging surrogate: the variogram and the conditioning data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrigingFile {
    pub variogram: VariogramModel,
    pub samples: Vec<Sample2D>,
}

/// A fitted surrogate with the coordinate frame it was trained in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub method: Method,
    pub frame: CoordFrame,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kriging: Option<KrigingFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub network: Option<MlpModel>,
}

impl ModelFile {
    pub fn surrogate(&self) -> Result<Box<dyn Surrogate>, CliError> {
        let tag = self.method.tag().to_string();
        match (&self.kriging, &self.network) {
            (Some(k), _) if self.method == Method::Kriging => Ok(Box::new(Tagged {
                tag,
                inner: KrigingModel::fit(&k.samples, k.variogram)?,
            })),
            (_, Some(n)) if self.method != Method::Kriging => Ok(Box::new(Tagged { tag, inner: n.clone() })),
            _ => Err(CliError::Validation(format!("model file for `{tag}` lacks its parameters"))),
        }
    }
}

fn read(path: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read `{path}`: {e}")))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Validation(format!("cannot write `{}`: {e}", path.display())))?;
    Ok(path)
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn load_measurements(path: &str) -> Result<Vec<Measurement>, CliError> {
    ingest::parse_measurements(&read(path)?).map_err(|e| match e {
        IngestError::Csv(_) | IngestError::Header { .. } | IngestError::Malformed { .. } | IngestError::Invalid { .. } => {
            CliError::Validation(format!("`{path}`: {e}"))
        }
        other => other.into(),
    })
}

/// Subcommands of the pipeline.
#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Band summary report and availability matrix CSV.
    Occupancy,
    /// Fit a kriging, NN or PINN surrogate; writes the model file and a report.
    Fit {
        #[arg(long)]
        method: Option<String>,
    },
    /// Predict a radio environment map from a model file.
    Map,
    /// Held-out MSE of one or more model files.
    Eval,
    /// Channel allocation plan.
    Allocate,
    /// Write synthetic fixtures (two-site duty-cycle streams and the harmonic benchmark).
    Synth,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Occupancy => "occupancy",
            Command::Fit { .. } => "fit",
            Command::Map => "map",
            Command::Eval => "eval",
            Command::Allocate => "allocate",
            Command::Synth => "synth",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "spectrum-rem", version, about = "Spectrum occupancy, radio environment maps and white-space allocation")]
pub struct Cli {
    /// Flat TOML config file.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Config override, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

/// Parses arguments, runs the subcommand, and returns the process exit code.
pub fn main_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli, std::env::var(SEED_ENV).ok()) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("spectrum-rem {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}

/// Resolves the config for `cli` and runs it.
pub fn execute(cli: &Cli, env_seed: Option<String>) -> Result<Vec<PathBuf>, CliError> {
    let text = match &cli.config {
        Some(p) => Some(read(&p.to_string_lossy())?),
        None => None,
    };
    let mut overrides = cli.overrides.clone();
    if let Command::Fit { method: Some(m) } = &cli.command {
        overrides.push(format!("method = \"{m}\""));
    }
    let mut cfg = RunConfig::load(text.as_deref(), &overrides)?;
    cfg.apply_env(env_seed)?;
    run(&cli.command, &cfg)
}

/// Runs one subcommand and returns the artifact paths written.
pub fn run(command: &Command, cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let started = Instant::now();
    let dir = PathBuf::from(&cfg.output_dir);
    fs::create_dir_all(&dir).map_err(|e| CliError::Validation(format!("cannot create `{}`: {e}", dir.display())))?;
    let (mut written, label) = match command {
        Command::Occupancy => (cmd_occupancy(cfg, &dir)?, "occupancy".to_string()),
        Command::Fit { .. } => {
            let method: Method = cfg.require(&cfg.method, "method")?.parse()?;
            (cmd_fit(cfg, method, &dir)?, format!("fit_{}", method.tag()))
        }
        Command::Map => {
            let stem = Path::new(cfg.require(&cfg.model, "model")?)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            (cmd_map(cfg, &dir)?, format!("map_{stem}"))
        }
        Command::Eval => (cmd_eval(cfg, &dir)?, "eval".to_string()),
        Command::Allocate => (cmd_allocate(cfg, &dir)?, format!("allocate_{}", cfg.mode)),
        Command::Synth => (cmd_synth(cfg, &dir)?, "synth".to_string()),
    };
    written.push(write(&dir, &format!("config_echo_{label}.json"), &to_json(cfg))?);
    let log = format!(
        "{} {} wall_clock_s={:.3} artifacts={}\n",
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        command.name(),
        started.elapsed().as_secs_f64(),
        written.len()
    );
    use std::io::Write;
    fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(dir.join("run.log"))
        .and_then(|mut f| f.write_all(log.as_bytes()))
        .map_err(|e| CliError::Validation(format!("run.log: {e}")))?;
    Ok(written)
}

/// Band summary per site plus the availability matrix (joint when `input_b`
/// is given).
pub fn cmd_occupancy(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let grid = cfg.grid()?;
    let occ = cfg.occupancy();
    occ.validate()?;
    let a = load_measurements(cfg.require(&cfg.input, "input")?)?;
    let b = match &cfg.input_b {
        Some(p) => Some(load_measurements(p)?),
        None => None,
    };
    let band = Band::new(cfg.band_name.clone(), grid);
    let mut report = OccupancyReport::new(&occ);
    for stream in std::iter::once(&a).chain(b.as_ref()) {
        let site = stream.first().map(|m| m.site_id.clone()).unwrap_or_default();
        report.push(site, occupancy::band_summary(stream, &band, &occ)?);
    }
    let matrix = match &b {
        Some(b) => occupancy::joint_availability(&a, b, &grid, &occ)?,
        None => occupancy::single_availability(&a, &grid, &occ)?,
    };
    report.coverage_gaps = Some(matrix.gaps);
    Ok(vec![
        write(dir, "occupancy_report.json", &to_json(&report))?,
        write(dir, "availability.csv", &matrix.to_csv())?,
        write(dir, "availability_legend.json", &to_json(&matrix.legend()))?,
    ])
}

/// Samples for model fitting, optionally restricted to one channel.
fn fitting_measurements(cfg: &RunConfig, path: &str) -> Result<Vec<Measurement>, CliError> {
    let ms = load_measurements(path)?;
    let Some(f) = cfg.freq_mhz else {
        return Ok(ms);
    };
    let grid = cfg.grid()?;
    let ch = grid.channel_index(f)?;
    Ok(ms
        .into_iter()
        .filter(|m| grid.channel_index(m.freq_mhz).ok() == Some(ch))
        .collect())
}

#[derive(Debug, Serialize)]
struct FitReport {
    method: Method,
    n_samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    empirical_variogram: Option<geostat::EmpiricalVariogram>,
    #[serde(skip_serializing_if = "Option::is_none")]
    variogram: Option<VariogramModel>,
    /// Weighted least-squares objective; absent when the variogram was given.
    #[serde(skip_serializing_if = "Option::is_none")]
    variogram_objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    train_config: Option<TrainConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pinn_config: Option<PinnConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<neural::LossTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    test: Option<rem::MseReport>,
}

pub fn cmd_fit(cfg: &RunConfig, method: Method, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let ms = fitting_measurements(cfg, cfg.require(&cfg.input, "input")?)?;
    if ms.is_empty() {
        return Err(CliError::InsufficientData("no measurements to fit".into()));
    }
    let frame = ingest::fit_frame(&ms)?;
    let samples = ingest::to_samples(&ms, &frame);
    let mut report = FitReport {
        method,
        n_samples: samples.len(),
        empirical_variogram: None,
        variogram: None,
        variogram_objective: None,
        train_config: None,
        pinn_config: None,
        trace: None,
        test: None,
    };
    let model_file = match method {
        Method::Kriging => {
            let model = match cfg.variogram_override()? {
                Some(model) => model,
                None => {
                    let max_lag = cfg.max_lag.unwrap_or_else(|| geostat::default_max_lag(&samples));
                    let ev = geostat::empirical_variogram(&samples, cfg.n_bins, max_lag)?;
                    let fit: VariogramFit = geostat::fit_variogram(&ev, cfg.variogram_kind()?)?;
                    report.empirical_variogram = Some(ev);
                    report.variogram_objective = Some(fit.objective);
                    fit.model
                }
            };
            report.variogram = Some(model);
            let kf = KrigingFile {
                variogram: model,
                samples: samples.clone(),
            };
            KrigingModel::fit(&kf.samples, model)?;
            ModelFile {
                method,
                frame,
                kriging: Some(kf),
                network: None,
            }
        }
        Method::Nn => {
            let tc = cfg.train();
            let trained = neural::train_mlp(&samples, &tc)?;
            report.train_config = Some(tc);
            report.trace = Some(trained.trace);
            ModelFile {
                method,
                frame,
                kriging: None,
                network: Some(trained.model),
            }
        }
        Method::Pinn => {
            let pc = cfg.pinn();
            let trained = pinn::train_pinn(&samples, &pc)?;
            report.pinn_config = Some(pc);
            report.trace = Some(trained.trace);
            ModelFile {
                method,
                frame,
                kriging: None,
                network: Some(trained.model),
            }
        }
    };
    if let Some(path) = &cfg.test_input {
        let held = held_out(path, &model_file.frame)?;
        report.test = Some(rem::test_mse(model_file.surrogate()?.as_ref(), &held)?);
    }
    Ok(vec![
        write(dir, &format!("model_{}.json", method.tag()), &to_json(&model_file))?,
        write(dir, &format!("report_{}.json", method.tag()), &to_json(&report))?,
    ])
}

fn held_out(path: &str, frame: &CoordFrame) -> Result<Vec<Sample2D>, CliError> {
    Ok(ingest::to_samples(&load_measurements(path)?, frame))
}

pub fn load_model(path: &str) -> Result<ModelFile, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Validation(format!("model file `{path}`: {e}")))
}

pub fn cmd_map(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mf = load_model(cfg.require(&cfg.model, "model")?)?;
    let grid = cfg.map_grid()?;
    let rem = rem::predict_map(mf.surrogate()?.as_ref(), &grid)?;
    let mut sidecar = rem.sidecar();
    sidecar["frame"] = serde_json::to_value(mf.frame).expect("serializable");
    let tag = &rem.model_tag;
    Ok(vec![
        write(dir, &format!("rem_{tag}.csv"), &rem.to_csv())?,
        write(dir, &format!("rem_{tag}.json"), &to_json(&sidecar))?,
    ])
}

pub fn cmd_eval(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let test_path = cfg.require(&cfg.test_input, "test_input")?;
    let mut paths = cfg.models.clone();
    paths.extend(cfg.model.clone());
    if paths.is_empty() {
        return Err(CliError::Validation("config key `models` is required".into()));
    }
    let mut rows = Vec::new();
    for p in &paths {
        let mf = load_model(p)?;
        let held = held_out(test_path, &mf.frame)?;
        rows.push(rem::test_mse(mf.surrogate()?.as_ref(), &held)?);
    }
    let cmp = Comparison::new(rows);
    Ok(vec![
        write(dir, "eval_report.json", &to_json(&cmp))?,
        write(dir, "eval_table.txt", &cmp.table())?,
    ])
}

#[derive(Debug, Deserialize)]
struct RequestRow {
    requester_id: String,
    bandwidth_mhz: f64,
    x_km: f64,
    y_km: f64,
    eirp_desired_dbm: f64,
    class: String,
}

#[derive(Debug, Deserialize)]
struct PuRow {
    id: String,
    x_km: f64,
    y_km: f64,
    eirp_dbm: f64,
    freq_mhz: f64,
    threshold_dbm: f64,
}

fn read_rows<T: serde::de::DeserializeOwned>(path: &str) -> Result<Vec<T>, CliError> {
    let text = read(path)?;
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| CliError::Validation(format!("`{path}`: {e}")))
}

/// Request file header: `requester_id,bandwidth_mhz,x_km,y_km,eirp_desired_dbm,class`.
pub fn load_requests(path: &str) -> Result<Vec<AllocationRequest>, CliError> {
    read_rows::<RequestRow>(path)?
        .into_iter()
        .map(|r| {
            let class = match r.class.as_str() {
                "PU" | "pu" => PriorityClass::Pu,
                "SU" | "su" => PriorityClass::Su,
                other => return Err(CliError::Validation(format!("request `{}`: class `{other}`", r.requester_id))),
            };
            Ok(AllocationRequest {
                requester_id: r.requester_id,
                bandwidth_mhz: r.bandwidth_mhz,
                site: (r.x_km, r.y_km),
                eirp_desired_dbm: r.eirp_desired_dbm,
                class,
            })
        })
        .collect()
}

/// Incumbent file header: `id,x_km,y_km,eirp_dbm,freq_mhz,threshold_dbm`.
pub fn load_pus(path: &str) -> Result<Vec<TransmitterSpec>, CliError> {
    Ok(read_rows::<PuRow>(path)?
        .into_iter()
        .map(|r| TransmitterSpec {
            id: r.id,
            site: (r.x_km, r.y_km),
            eirp_dbm: r.eirp_dbm,
            freq_mhz: r.freq_mhz,
            threshold_dbm: r.threshold_dbm,
        })
        .collect())
}

pub fn cmd_allocate(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let grid = cfg.grid()?;
    let mode: Mode = cfg.mode.parse().map_err(CliError::Validation)?;
    let model = cfg.path_loss_model()?;
    let requests = load_requests(cfg.require(&cfg.requests, "requests")?)?;
    let pus = match &cfg.pus {
        Some(p) => load_pus(p)?,
        None => Vec::new(),
    };
    let channels = match mode {
        Mode::DatabaseConservative => ChannelSet::from_database(grid, &cfg.database_channels)?,
        Mode::SensingDynamic => {
            let occ = cfg.occupancy();
            let a = load_measurements(cfg.require(&cfg.input, "input")?)?;
            let matrix = match &cfg.input_b {
                Some(p) => occupancy::joint_availability(&a, &load_measurements(p)?, &grid, &occ)?,
                None => occupancy::single_availability(&a, &grid, &occ)?,
            };
            let end = cfg.slot_end.unwrap_or(matrix.n_slots);
            if cfg.slot_start >= end {
                return Err(CliError::Validation(format!("empty slot window {}..{end}", cfg.slot_start)));
            }
            ChannelSet::from_availability(&matrix, cfg.slot_start..end)
        }
    };
    let plan = allocation::allocate(&requests, &channels, mode, &model, &pus, &cfg.allocation())?;
    Ok(vec![write(dir, &format!("allocation_plan_{}.json", cfg.mode), &to_json(&plan))?])
}

/// Writes `site_a.csv`, `site_b.csv` (two correlated duty-cycle streams),
/// `train.csv` and `test.csv` (harmonic benchmark).
pub fn cmd_synth(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let grid = cfg.grid()?;
    let mut a = DutyCycleStream::new("wilson", &grid, cfg.synth_n_slots, cfg.seed);
    a.slot_s = cfg.slot_s;
    let mut b = DutyCycleStream::new("agronomy", &grid, cfg.synth_n_slots, cfg.seed.wrapping_add(1));
    b.slot_s = cfg.slot_s;
    b.lat_deg -= 0.08;
    b.duty = a.duty.iter().map(|d| (d * 0.8).min(1.0)).collect();
    b.missing = 0.01;
    let bench = HarmonicBenchmark {
        n_train: cfg.synth_n_train,
        n_test: cfg.synth_n_test,
        noise_sigma: cfg.synth_noise_sigma,
        seed: cfg.seed,
    };
    let (train, test) = bench.generate();
    let f = grid.channel_span(0).0 + grid.channel_width_mhz / 2.0;
    Ok(vec![
        write(dir, "site_a.csv", &ingest::write_measurements(&a.generate(&grid)))?,
        write(dir, "site_b.csv", &ingest::write_measurements(&b.generate(&grid)))?,
        write(dir, "train.csv", &ingest::write_measurements(&synth::samples_to_measurements(&train, "bench", f)))?,
        write(dir, "test.csv", &ingest::write_measurements(&synth::samples_to_measurements(&test, "bench", f)))?,
    ])
}
