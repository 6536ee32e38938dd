pub mod geometry;
pub mod harness;
pub mod matching;
pub mod refiner;
pub mod simulator;
