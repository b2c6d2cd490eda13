//! Reference designs available through [`crate::design::DesignRegistry`].

pub mod alu;
pub mod crc;
pub mod delta_sigma;
pub mod i2c;
pub mod sine;
