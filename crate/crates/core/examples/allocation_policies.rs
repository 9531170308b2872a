// The same three requests planned by a conservative database and by a
// sensing-driven allocator, next to one protected broadcaster.

use spectrum_rem::allocation::{
    self, AllocationConfig, AllocationRequest, ChannelSet, Mode, PathLossModel, PriorityClass, TransmitterSpec,
};
use spectrum_rem::ingest::ChannelGrid;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let grid = ChannelGrid::new(470.0, 6.0, 6)?;
    let su = |id: &str, x_km: f64, eirp: f64| AllocationRequest {
        requester_id: id.into(),
        bandwidth_mhz: 6.0,
        site: (x_km, 0.0),
        eirp_desired_dbm: eirp,
        class: PriorityClass::Su,
    };
    let requests = [su("farm-a", 0.0, 36.0), su("farm-b", 3.0, 36.0), su("school", 60.0, 20.0)];
    let broadcaster = TransmitterSpec {
        id: "ktv".into(),
        site: (200.0, 0.0),
        eirp_dbm: 80.0,
        freq_mhz: grid.channel_span(0).0 + 3.0,
        threshold_dbm: -118.0,
    };
    let config = AllocationConfig::default();
    let model = PathLossModel::FreeSpace;

    let database = ChannelSet::from_database(grid, &[0, 1])?;
    let sensed = ChannelSet::all_free(grid);
    for (mode, channels) in [(Mode::DatabaseConservative, &database), (Mode::SensingDynamic, &sensed)] {
        let plan = allocation::allocate(&requests, channels, mode, &model, std::slice::from_ref(&broadcaster), &config)?;
        println!("{mode:?}");
        for g in &plan.grants {
            println!("  {:<7} channels {:?} at {:.1} dBm (cap {:.1})", g.requester_id, g.channels, g.eirp_dbm, g.eirp_cap_dbm);
        }
        for r in &plan.rejections {
            println!("  {:<7} refused: {:?}", r.requester_id, r.reason);
        }
        for c in &plan.conflicts {
            println!("  conflict {} / {} on {:?}, {:.1} km apart", c.a, c.b, c.shared_channels, c.separation_km);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
