pub mod error;
pub mod model;
pub mod spectral;
pub mod dynamics;
pub mod analysis;
pub mod cli;
