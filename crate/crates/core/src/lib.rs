//! Joint trajectory, power and scheduling optimization for multi-UAV
//! downlink networks under a max-min average-rate objective.

pub mod assignment;
pub mod bcd;
pub mod error;
pub mod initializer;
pub mod lp;
pub mod oracle;
pub mod sca;
pub mod scenario;
pub mod simplex;
pub mod validate;

pub use error::{Error, Result};
