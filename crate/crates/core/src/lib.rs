pub mod cli;
pub mod divergence;
pub mod engine;
pub mod error;
pub mod io;
pub mod matrix;
pub mod model;
pub mod montecarlo;
pub mod regions;
pub mod rng;
