//! Multi-level Hermite-Padé approximation for Nikishin systems of measures.

pub mod asymptotics;
pub mod error;
pub mod hermite_pade;
pub mod exact;
pub mod linalg;
pub mod measures;
pub mod poly;
pub mod precision;
pub mod riemann;
pub mod zeros;

pub use error::{Error, Result};
pub use precision::PrecisionPolicy;
