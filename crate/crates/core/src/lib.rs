pub mod assess;
pub mod config;
pub mod enhance;
pub mod error;
pub mod geometry;
pub mod io;
pub mod mapproc;
pub mod metrics;
pub mod pipeline;
pub mod quadrature;
pub mod selection;
pub mod synth;
pub mod track;
pub mod wavelet;

pub use error::{Error, Result};
