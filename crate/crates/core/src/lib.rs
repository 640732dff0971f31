pub mod cam;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod events;
pub mod features;
pub mod hsic;
pub mod io;
pub mod matrix;
pub mod model;
pub mod nn;
pub mod signal;
pub mod synth;

pub use error::{Error, Result};
