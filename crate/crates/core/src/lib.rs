pub mod atmosphere;
pub mod cli;
pub mod config;
pub mod gaussian_teleport;
pub mod specfun;
pub mod stats;
pub mod strategies;
