//! Sparse spectrum measurements to occupancy statistics, radio environment
//! maps and white-space channel allocations.
//!
//! * [`ingest`]: measurement files, channel grids, coordinate frames.
//! * [`occupancy`]: per-slot occupancy, band summaries, availability matrices.
//! * [`geostat`]: empirical variogram, variogram fitting, ordinary kriging.
//! * [`neural`]: tanh MLP with reverse-mode gradients and Adam training.
//! * [`pinn`]: Laplace-residual regularized training.
//! * [`rem`]: map rasters and held-out evaluation.
//! * [`allocation`]: path loss, coverage and protection radii, channel plans.
//! * [`cli`]: the `spectrum-rem` command pipeline.

pub mod allocation;
pub mod cli;
pub mod geostat;
pub mod ingest;
mod linalg;
pub mod neural;
pub mod occupancy;
pub mod pinn;
pub mod rem;
pub mod synth;

pub use allocation::{allocate, coverage_radius_km, path_loss_db, protection_radius_km, AllocationPlan};
pub use geostat::{empirical_variogram, fit_variogram, krige, KrigingModel, Sample2D, VariogramModel};
pub use ingest::{channel_index, fit_frame, parse_measurements, ChannelGrid, CoordFrame, Measurement};
pub use neural::{init_model, train_mlp, MlpModel, TrainConfig};
pub use occupancy::{band_summary, joint_availability, slot_occupancy, AvailabilityMatrix, OccupancyConfig};
pub use pinn::{train_pinn, PinnConfig};
pub use rem::{predict_map, test_mse, MapGrid, Rem, Surrogate};
