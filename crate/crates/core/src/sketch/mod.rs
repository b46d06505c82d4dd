//! Bounded-memory profile structures used on the master side.

mod burst;
mod histogram;
mod smoothing;
mod space_saving;

pub use burst::{burst_record, BurstFilter, Measurement};
pub use histogram::{histogram_partition, SizeHistogram};
pub use smoothing::{smooth_insert, SmoothedPoint, SmoothedPointSet};
pub use space_saving::{sketch_heavy, sketch_offer, Counter, SpaceSaving};
