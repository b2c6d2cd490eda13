//! 4-bit ALU sampled on an internal 1 ms clock.
//!
//! | op | result        |
//! |----|---------------|
//! | 0  | a + b         |
//! | 1  | a - b         |
//! | 2  | a & b         |
//! | 3  | a \| b        |
//! | 4  | a ^ b         |
//! | 5  | !a            |
//! | 6  | a << 1        |
//! | 7  | a >> 1        |
//!
//! All results are taken modulo 16.

use std::sync::Arc;

use crate::config::Params;
use crate::design::{reject_unknown, Design, DesignError, PortDecl, PortMap};
use crate::kernel::{Kernel, KernelError, Sensitivity};
use crate::time::Duration;
use crate::types::RtlType;

pub const CLOCK_PERIOD: Duration = Duration(crate::time::PS_PER_MS);

pub fn alu_step(a: u8, b: u8, op: u8) -> u8 {
    let (a, b) = (a & 0xF, b & 0xF);
    let r = match op & 7 {
        0 => a.wrapping_add(b),
        1 => a.wrapping_sub(b),
        2 => a & b,
        3 => a | b,
        4 => a ^ b,
        5 => !a,
        6 => a << 1,
        _ => a >> 1,
    };
    r & 0xF
}

#[derive(Debug)]
pub struct Alu;

pub fn factory(params: &Params) -> Result<Arc<dyn Design>, DesignError> {
    reject_unknown(params, &[])?;
    Ok(Arc::new(Alu))
}

impl Design for Alu {
    fn key(&self) -> &'static str {
        "alu"
    }

    fn top_module(&self) -> &'static str {
        "alu"
    }

    fn source(&self) -> &'static str {
        include_str!("../../designs/alu.h")
    }

    fn ports(&self) -> Vec<PortDecl> {
        vec![
            PortDecl::input("a", RtlType::UnsignedInt(4)),
            PortDecl::input("b", RtlType::UnsignedInt(4)),
            PortDecl::input("op", RtlType::UnsignedInt(3)),
            PortDecl::output("result", RtlType::UnsignedInt(4)),
        ]
    }

    fn elaborate(&self, k: &mut Kernel, ports: &PortMap) -> Result<(), KernelError> {
        let (a, b, op, result) = (ports.get("a")?, ports.get("b")?, ports.get("op")?, ports.get("result")?);
        let clk = k.create_clock_named(&ports.internal("clk"), CLOCK_PERIOD, false)?;
        k.spawn_process(
            Box::new(move |act| {
                let r = alu_step(act.read_u64(a) as u8, act.read_u64(b) as u8, act.read_u64(op) as u8);
                act.write_u64(result, r as u64);
            }),
            Sensitivity::new().rising(clk),
        )?;
        Ok(())
    }
}
