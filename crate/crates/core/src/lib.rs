//! Wrap discrete-event RTL designs behind the FMI 3.0 co-simulation
//! lifecycle.
//!
//! The flow mirrors a typical export pipeline: [`parser`] extracts the top
//! module's ports from SystemC-syntax source, [`descriptor`] builds the
//! `modelDescription.xml`, [`package`] writes the `.fmu` archive, and
//! [`slave`] / [`master`] run one or more wrapped designs on top of the
//! [`kernel`].

pub mod bench;
pub mod config;
pub mod descriptor;
pub mod design;
pub mod designs;
pub mod kernel;
pub mod master;
pub mod package;
pub mod parser;
pub mod pipeline;
pub mod slave;
pub mod time;
pub mod trace;
pub mod types;

pub use kernel::{Edge, Kernel, KernelError, RunOutcome, Sensitivity, SignalId};
pub use time::{Duration, SimTime};
pub use types::{fmi_to_rtl, map_rtl_to_fmi, rtl_to_fmi, BitVector, FmiType, FmiValue, RtlType, RtlValue};
