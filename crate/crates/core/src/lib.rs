pub mod config;
pub mod data;
pub mod dispersion;
pub mod error;
pub mod kinematics;
pub mod models;
pub mod optimize;
pub mod pipeline;
pub mod presets;
pub mod quality;
pub mod stress;
