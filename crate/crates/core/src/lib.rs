pub mod bench;
pub mod codesign;
pub mod error;
pub mod landscape;
pub mod optimizers;
pub mod rng;
pub mod sim;
pub mod tasks;
