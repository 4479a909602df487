pub mod classifier;
pub mod delta_kin;
pub mod geometry;
pub mod harness;
pub mod search;
pub mod seed;
pub mod tactile;
pub mod world;
