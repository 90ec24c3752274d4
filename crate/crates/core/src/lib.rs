pub mod domain;
pub mod error;
pub mod hermitian;
pub mod metrics;
pub mod projection;
pub mod quadrature;
pub mod report;
pub mod sufficient;
pub mod tabulated;
pub mod transform;
pub mod verdict;
pub mod weight;

pub use error::{Error, Result};
