// How far a white-space device reaches at the database power limit and at
// the sensing-mode limit, and how wide a protection zone each needs.

use spectrum_rem::allocation::{self, PathLossModel, TransmitterSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let model = PathLossModel::FreeSpace;
    let device = |eirp_dbm: f64| TransmitterSpec {
        id: format!("su@{eirp_dbm}"),
        site: (0.0, 0.0),
        eirp_dbm,
        freq_mhz: 600.0,
        threshold_dbm: -90.0,
    };
    let low = allocation::coverage_radius_km(&device(16.0), &model)?;
    let high = allocation::coverage_radius_km(&device(42.0), &model)?;
    println!("coverage at 16 dBm: {:.3} km", low.km);
    println!("coverage at 42 dBm: {:.3} km", high.km);
    println!(
        "radius ratio {:.3}, area ratio {:.1}",
        high.km / low.km,
        (high.km / low.km).powi(2)
    );

    let incumbent = TransmitterSpec {
        id: "tv-station".into(),
        site: (0.0, 0.0),
        eirp_dbm: 80.0,
        freq_mhz: 600.0,
        threshold_dbm: -118.0,
    };
    for su in [16.0, 42.0] {
        let r = allocation::protection_radius_km(&incumbent, su, &model)?;
        println!("keep-out for a {su} dBm device: {:.1} km", r.km);
    }
    let urban = PathLossModel::LogDistance {
        exponent: 3.5,
        d0_km: 1.0,
        pl0_db: 88.0,
    };
    let r = allocation::protection_radius_km(&incumbent, 42.0, &urban)?;
    println!("keep-out for a 42 dBm device with exponent 3.5: {:.1} km", r.km);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
