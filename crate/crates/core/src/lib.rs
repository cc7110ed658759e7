//! Frequency-domain acoustic full-waveform inversion with Gauss-Newton steps
//! solved either in the reduced model space or in the full KKT space.

pub mod commands;
pub mod driver;
pub mod error;
pub mod forward;
pub mod grid;
pub mod helmholtz;
pub mod io;
pub mod kkt;
pub mod models;
pub mod reduced;
pub mod sparse;

pub use error::{Error, ErrorCategory, Result};
pub use num_complex::Complex64 as C64;
