//! Stacker crane routing on random Euclidean instances.
//!
//! The crate covers the static problem (SPLICE tours, exact small-instance
//! tours, bipartite matching), grid transport bounds on the Wasserstein
//! distance between pickup and delivery densities, randomized shadow-site
//! matching, and an event-driven simulator for the dynamic pickup and
//! delivery problem with unit-capacity vehicles.

pub mod distributions;
pub mod dpdp;
pub mod error;
pub mod geometry;
pub mod instance;
pub mod matching;
pub mod permutation;
pub mod randmatch;
pub mod rng;
pub mod scp;
pub mod transport;

pub use error::{CraneError, Result};
pub use geometry::{Aabb, Point};
pub use instance::{instance_from_samples, read_instance, write_instance, Demand, Instance};
pub use rng::RngStream;
