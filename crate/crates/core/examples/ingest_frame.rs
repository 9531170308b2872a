// Parse a measurement file, bin frequencies onto the TV channel grid and map
// positions into the normalized modeling frame.

use spectrum_rem::ingest::{self, ChannelGrid};

const SWEEP: &str = "\
timestamp_s,site_id,lat_deg,lon_deg,freq_mhz,power_dbm
# rooftop survey, first pass
1700000000.0,ames,42.0300,-93.6500,473.1,-97.5
1700000001.5,ames,42.0450,-93.6200,521.9,-110.2
1700000003.0,ames,42.0600,-93.5900,587.0,-84.0
1700000004.5,ames,42.0380,-93.6050,607.9,-119.6
";

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let grid = ChannelGrid::tvws();
    let measurements = ingest::parse_measurements(SWEEP)?;
    let frame = ingest::fit_frame(&measurements)?;
    for (m, s) in measurements.iter().zip(ingest::to_samples(&measurements, &frame)) {
        println!(
            "channel {:>2}  ({:+.3}, {:+.3})  {:.1} dBm",
            grid.channel_index(m.freq_mhz)?,
            s.x,
            s.y,
            s.z
        );
    }
    match ingest::parse_measurements("timestamp_s,site_id,lat_deg,lon_deg,freq_mhz,power_dbm\n0,a,95.0,0,500,-90\n") {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => println!("unexpectedly accepted"),
    }
    print!("{}", ingest::write_measurements(&measurements[..1]));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
