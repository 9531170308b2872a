mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::kriging_oracle;
use spectrum_rem::cli::{self, ModelFile, RunConfig, SEED_ENV};
use spectrum_rem::ingest;
use spectrum_rem::rem::{MapGrid, Rem};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn bin(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_spectrum-rem"));
    cmd.args(args).env_remove(SEED_ENV);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn set(key: &str, path: &Path) -> String {
    format!("{key}=\"{}\"", path.display())
}

#[test]
fn kriging_checkpoint_matches_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture("kriging3.toml");
    let out = bin(
        &["fit", "--config", cfg.to_str().unwrap(), "--set", &set("input", &fixture("three_points.csv")), "--set", &set("output_dir", tmp.path())],
        &[],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let model: ModelFile = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("model_kriging.json")).unwrap()).unwrap();
    let ms = ingest::parse_measurements(&std::fs::read_to_string(fixture("three_points.csv")).unwrap()).unwrap();
    let pts: Vec<(f64, f64, f64)> = ms
        .iter()
        .map(|m| {
            let (x, y) = model.frame.normalize(m.lat_deg, m.lon_deg);
            (x, y, m.power_dbm)
        })
        .collect();
    let surrogate = model.surrogate().unwrap();
    for q in [(0.0, 0.0), (-0.9, 0.4), (0.7, 0.7), (pts[1].0, pts[1].1)] {
        let (want, _) = kriging_oracle(&pts, q, 0.0, 40.0, 0.8);
        assert!((surrogate.predict(q.0, q.1) - want).abs() <= 1e-8);
    }

    let out = bin(
        &["map", "--config", cfg.to_str().unwrap(), "--set", &set("model", &tmp.path().join("model_kriging.json")), "--set", &set("output_dir", tmp.path())],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let grid = MapGrid::new((-1.0, 1.0, -1.0, 1.0), 5, 4).unwrap();
    let rem = Rem::from_csv(&std::fs::read_to_string(tmp.path().join("rem_kriging.csv")).unwrap(), grid, "kriging").unwrap();
    let (x, y) = (grid.cell_x(3), grid.cell_y(1));
    let (want, _) = kriging_oracle(&pts, (x, y), 0.0, 40.0, 0.8);
    assert!((rem.values[1][3] - want).abs() <= 1e-8);
    let sidecar: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("rem_kriging.json")).unwrap()).unwrap();
    assert!(sidecar["frame"]["scale_x"].as_f64().unwrap() > 0.0);
}

#[test]
fn eval_of_interpolating_model_is_exact_at_its_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture("kriging3.toml");
    let input = set("input", &fixture("three_points.csv"));
    let out_dir = set("output_dir", tmp.path());
    assert_eq!(bin(&["fit", "-c", cfg.to_str().unwrap(), "--set", &input, "--set", &out_dir], &[]).status.code(), Some(0));
    let model = set("model", &tmp.path().join("model_kriging.json"));
    let test = set("test_input", &fixture("three_points.csv"));
    let out = bin(&["eval", "-c", cfg.to_str().unwrap(), "--set", &model, "--set", &test, "--set", &out_dir], &[]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("eval_report.json")).unwrap()).unwrap();
    let mse = report["rows"][0]["mse_dbm2"].as_f64().unwrap();
    assert!(mse <= 1e-20, "mse {mse}");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = set("output_dir", tmp.path());
    let code = |args: &[&str]| bin(args, &[]).status.code();

    assert_eq!(code(&["occupancy", "--set", &out_dir, "--set", &set("input", &fixture("malformed.csv"))]), Some(2));
    assert_eq!(code(&["occupancy", "--set", &out_dir, "--set", "no_such_key=1"]), Some(2));
    assert_eq!(code(&["occupancy", "--set", &out_dir]), Some(2));
    assert_eq!(code(&["fit", "--method", "svm", "--set", &out_dir]), Some(2));
    assert_eq!(code(&["occupancy", "--set", &out_dir, "--set", &set("input", &fixture("header_only.csv"))]), Some(3));
    assert_eq!(
        code(&["fit", "-c", fixture("kriging3.toml").to_str().unwrap(), "--set", &out_dir, "--set", &set("input", &fixture("duplicate_site.csv"))]),
        Some(4)
    );
    assert_eq!(code(&["no-such-subcommand"]), Some(2));
}

#[test]
fn malformed_row_is_reported_with_its_line() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin(&["occupancy", "--set", &set("output_dir", tmp.path()), "--set", &set("input", &fixture("malformed.csv"))], &[]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("power_dbm"), "{err}");
}

#[test]
fn seed_override_is_echoed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin(&["synth", "--set", &set("output_dir", tmp.path()), "--set", "synth_n_slots=5"], &[(SEED_ENV, "99")]);
    assert_eq!(out.status.code(), Some(0));
    let echo: RunConfig = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("config_echo_synth.json")).unwrap()).unwrap();
    assert_eq!(echo.seed, 99);
    assert_eq!(echo.seed_override_env.as_deref(), Some("99"));
    let log = std::fs::read_to_string(tmp.path().join("run.log")).unwrap();
    assert!(log.contains("synth wall_clock_s="));
}

#[test]
fn database_allocation_caps_every_secondary_grant() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::load(Some(&std::fs::read_to_string(fixture("pipeline.toml")).unwrap()), &[]).unwrap();
    cfg.output_dir = tmp.path().display().to_string();
    cfg.mode = "database_conservative".into();
    cfg.requests = Some(fixture("requests.csv").display().to_string());
    cfg.pus = Some(fixture("pus.csv").display().to_string());
    cli::run(&cli::Command::Allocate, &cfg).unwrap();
    let plan: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("allocation_plan_database_conservative.json")).unwrap()).unwrap();
    let grants = plan["grants"].as_array().unwrap();
    assert!(grants.iter().filter(|g| g["class"] == "SU").all(|g| g["eirp_cap_dbm"] == 16.0));
    assert!(grants.iter().any(|g| g["class"] == "PU"));
    assert!(!plan["conflicts"].as_array().unwrap().is_empty());
}

#[test]
fn occupancy_artifacts_and_legend() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::load(Some(&std::fs::read_to_string(fixture("pipeline.toml")).unwrap()), &[]).unwrap();
    cfg.output_dir = tmp.path().display().to_string();
    cli::run(&cli::Command::Synth, &cfg).unwrap();
    cfg.input = Some(tmp.path().join("site_a.csv").display().to_string());
    cfg.input_b = Some(tmp.path().join("site_b.csv").display().to_string());
    cli::run(&cli::Command::Occupancy, &cfg).unwrap();
    let csv = std::fs::read_to_string(tmp.path().join("availability.csv")).unwrap();
    assert_eq!(csv.lines().count(), 23);
    assert!(csv.lines().all(|l| l.split(',').count() == 300));
    let legend: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("availability_legend.json")).unwrap()).unwrap();
    assert_eq!(legend["codes"]["1"], "FREE_ONE");
    let report = std::fs::read_to_string(tmp.path().join("occupancy_report.json")).unwrap();
    assert!(report.contains("TVWS 470–608: avg"));
}

#[test]
fn missing_input_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin(&["occupancy", "--set", &set("output_dir", tmp.path()), "--set", "input=\"/nonexistent/sweep.csv\""], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/sweep.csv"));
}

#[test]
fn zero_epochs_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin(
        &["fit", "--method", "nn", "--set", &set("output_dir", tmp.path()), "--set", &set("input", &fixture("three_points.csv")), "--set", "epochs=0"],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pinn_without_residual_weight_matches_nn_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::load(Some(&std::fs::read_to_string(fixture("pipeline.toml")).unwrap()), &["epochs=200".into(), "lambda_pde=0.0".into()]).unwrap();
    cfg.output_dir = tmp.path().display().to_string();
    cli::run(&cli::Command::Synth, &cfg).unwrap();
    cfg.input = Some(tmp.path().join("train.csv").display().to_string());
    cli::run(&cli::Command::Fit { method: None }, &RunConfig { method: Some("nn".into()), ..cfg.clone() }).unwrap();
    cli::run(&cli::Command::Fit { method: None }, &RunConfig { method: Some("pinn".into()), ..cfg.clone() }).unwrap();
    let network = |name: &str| {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join(name)).unwrap()).unwrap();
        serde_json::to_string(&v["network"]).unwrap()
    };
    assert_eq!(network("model_nn.json"), network("model_pinn.json"));
}

#[test]
fn constant_surrogate_maps_uniformly() {
    let tmp = tempfile::tempdir().unwrap();
    let mut net = spectrum_rem::neural::init_model(&[2, 4, 1], 0).unwrap();
    net.params_mut().iter_mut().for_each(|p| *p = 0.0);
    net.z_mean = -97.25;
    net.epochs_trained = 1;
    let frame = ingest::fit_frame_points([(42.0, -93.7), (42.1, -93.6)]).unwrap();
    let model = ModelFile {
        method: cli::Method::Nn,
        frame,
        kriging: None,
        network: Some(net),
    };
    let path = tmp.path().join("flat.json");
    std::fs::write(&path, serde_json::to_string(&model).unwrap()).unwrap();
    let out = bin(&["map", "--set", &set("model", &path), "--set", &set("output_dir", tmp.path()), "--set", "map_nx=7", "--set", "map_ny=3"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(tmp.path().join("rem_nn.csv")).unwrap();
    let cells: Vec<&str> = csv.lines().flat_map(|l| l.split(',')).collect();
    assert_eq!(cells.len(), 21);
    assert!(cells.iter().all(|c| c.parse::<f64>().unwrap() == -97.25), "{csv}");
}

#[test]
fn occupancy_outputs_match_brute_force_oracle() {
    use common::{brute_fractions, brute_grid, brute_joint, brute_mean, brute_percentile};
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::load(Some(&std::fs::read_to_string(fixture("pipeline.toml")).unwrap()), &[]).unwrap();
    cfg.output_dir = tmp.path().display().to_string();
    cli::run(&cli::Command::Synth, &cfg).unwrap();
    cfg.input = Some(tmp.path().join("site_a.csv").display().to_string());
    cfg.input_b = Some(tmp.path().join("site_b.csv").display().to_string());
    cli::run(&cli::Command::Occupancy, &cfg).unwrap();

    let load = |name: &str| ingest::parse_measurements(&std::fs::read_to_string(tmp.path().join(name)).unwrap()).unwrap();
    let t0 = cfg.window_start_s.unwrap();
    let ga = brute_grid(&load("site_a.csv"), 470.0, 6.0, 23, t0, 1.0, 300, -108.0);
    let gb = brute_grid(&load("site_b.csv"), 470.0, 6.0, 23, t0, 1.0, 300, -108.0);
    let golden: String = brute_joint(&ga, &gb)
        .iter()
        .map(|row| row.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    assert_eq!(std::fs::read_to_string(tmp.path().join("availability.csv")).unwrap(), golden);

    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("occupancy_report.json")).unwrap()).unwrap();
    for (k, g) in [ga, gb].iter().enumerate() {
        let f = brute_fractions(g);
        let s = &report["bands"][k]["summary"];
        assert_eq!(s["avg_occupancy"].as_f64().unwrap(), brute_mean(&f));
        assert_eq!(s["p95_occupancy"].as_f64().unwrap(), brute_percentile(&f, 95));
    }
}

#[test]
fn harmonic_pipeline_ranks_pinn_first() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::load(Some(&std::fs::read_to_string(fixture("pipeline.toml")).unwrap()), &[]).unwrap();
    cfg.output_dir = tmp.path().display().to_string();
    cli::run(&cli::Command::Synth, &cfg).unwrap();
    cfg.input = Some(tmp.path().join("train.csv").display().to_string());
    cfg.test_input = Some(tmp.path().join("test.csv").display().to_string());
    for m in ["kriging", "nn", "pinn"] {
        cli::run(&cli::Command::Fit { method: None }, &RunConfig { method: Some(m.into()), ..cfg.clone() }).unwrap();
        cfg.models.push(tmp.path().join(format!("model_{m}.json")).display().to_string());
    }
    cli::run(&cli::Command::Eval, &cfg).unwrap();
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("eval_report.json")).unwrap()).unwrap();
    let mse: Vec<(String, f64)> = report["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| (r["model_tag"].as_str().unwrap().to_string(), r["mse_dbm2"].as_f64().unwrap()))
        .collect();
    assert_eq!(mse.len(), 3);
    let best = mse.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert_eq!(best.0, "pinn", "{mse:?}");
}
