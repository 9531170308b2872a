mod occupancy_report {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/occupancy_report.rs"));
}

#[test]
fn occupancy_report_runs() {
    occupancy_report::run_example().expect("occupancy_report example should run");
}

mod kriging_map {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/kriging_map.rs"));
}

#[test]
fn kriging_map_runs() {
    kriging_map::run_example().expect("kriging_map example should run");
}

mod pinn_vs_nn {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/pinn_vs_nn.rs"));
}

#[test]
fn pinn_vs_nn_runs() {
    pinn_vs_nn::run_example().expect("pinn_vs_nn example should run");
}

mod coverage_radius {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/coverage_radius.rs"));
}

#[test]
fn coverage_radius_runs() {
    coverage_radius::run_example().expect("coverage_radius example should run");
}

mod allocation_policies {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/allocation_policies.rs"));
}

#[test]
fn allocation_policies_runs() {
    allocation_policies::run_example().expect("allocation_policies example should run");
}

mod ingest_frame {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/ingest_frame.rs"));
}

#[test]
fn ingest_frame_runs() {
    ingest_frame::run_example().expect("ingest_frame example should run");
}

mod gradient_check {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/gradient_check.rs"));
}

#[test]
fn gradient_check_runs() {
    gradient_check::run_example().expect("gradient_check example should run");
}
