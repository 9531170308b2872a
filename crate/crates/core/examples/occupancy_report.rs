// Band occupancy for two synthetic sites over a 15-minute window, and the
// joint availability matrix they share.

use spectrum_rem::ingest::ChannelGrid;
use spectrum_rem::occupancy::{self, Availability, Band, OccupancyConfig};
use spectrum_rem::synth::DutyCycleStream;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let grid = ChannelGrid::tvws();
    let config = OccupancyConfig::default();
    let band = Band::new("TVWS", grid);

    let site_a = DutyCycleStream::new("wilson", &grid, 900, 1).generate(&grid);
    let mut b = DutyCycleStream::new("agronomy", &grid, 900, 2);
    b.duty = b.duty.iter().map(|d| d * 0.5).collect();
    b.missing = 0.02;
    let site_b = b.generate(&grid);

    for (name, stream) in [("wilson", &site_a), ("agronomy", &site_b)] {
        let summary = occupancy::band_summary(stream, &band, &config)?;
        println!("{name:>9}  {summary}");
    }

    let joint = occupancy::joint_availability(&site_a, &site_b, &grid, &config)?;
    let count = |want: Availability| joint.cells().iter().filter(|&&c| c == want).count();
    println!(
        "joint cells: {} free at both, {} free at one, {} occupied at both ({} missing at the second site)",
        count(Availability::Free),
        count(Availability::FreeOne),
        count(Availability::Occupied),
        joint.gaps.site_b
    );
    let always_free: Vec<usize> = (0..grid.n_channels)
        .filter(|&c| joint.is_free_over(c, 0..joint.n_slots))
        .collect();
    println!("channels free at both sites for the whole window: {always_free:?}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
