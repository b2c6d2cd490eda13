//! Sixteen-context CRC-16/CRC-32 unit, one byte per clock.
//!
//! `ctrl` bits: 0 selects CRC-32 (else CRC-16), 1 reflects input bytes and
//! the output, 2 inverts the output, 3 byte-swaps the output, 4 (re)initialises
//! the selected context from bits 0..=3. CRC-32 uses polynomial 0x04C11DB7
//! with initial value 0xFFFFFFFF; CRC-16 uses 0x8005 with initial value 0.

use std::sync::Arc;

use crate::config::Params;
use crate::design::{param_period, reject_unknown, Design, DesignError, PortDecl, PortMap};
use crate::kernel::{Kernel, KernelError, Sensitivity};
use crate::time::Duration;
use crate::types::RtlType;

pub const CTRL_CRC32: u8 = 1 << 0;
pub const CTRL_REFLECT: u8 = 1 << 1;
pub const CTRL_INVERT: u8 = 1 << 2;
pub const CTRL_SWAP: u8 = 1 << 3;
pub const CTRL_INIT: u8 = 1 << 4;

pub const POLY32: u32 = 0x04C1_1DB7;
pub const POLY16: u32 = 0x8005;
pub const CONTEXTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Context {
    pub state: u32,
    pub config: u8,
}

/// MSB-first lookup tables for both polynomials.
#[derive(Debug, Clone)]
pub struct CrcEngine {
    t16: [u32; 256],
    t32: [u32; 256],
}

impl Default for CrcEngine {
    fn default() -> Self {
        Self::new()
    }
}

impl CrcEngine {
    pub fn new() -> Self {
        let mut t16 = [0u32; 256];
        let mut t32 = [0u32; 256];
        for i in 0..256u32 {
            let mut c32 = i << 24;
            let mut c16 = i << 8;
            for _ in 0..8 {
                c32 = if c32 & 0x8000_0000 != 0 { (c32 << 1) ^ POLY32 } else { c32 << 1 };
                c16 = if c16 & 0x8000 != 0 { ((c16 << 1) ^ POLY16) & 0xFFFF } else { (c16 << 1) & 0xFFFF };
            }
            t32[i as usize] = c32;
            t16[i as usize] = c16;
        }
        CrcEngine { t16, t32 }
    }

    pub fn init(config: u8) -> Context {
        let config = config & 0x0F;
        Context {
            state: if config & CTRL_CRC32 != 0 { 0xFFFF_FFFF } else { 0 },
            config,
        }
    }

    pub fn update(&self, c: &mut Context, byte: u8) {
        let d = if c.config & CTRL_REFLECT != 0 { byte.reverse_bits() } else { byte };
        if c.config & CTRL_CRC32 != 0 {
            c.state = (c.state << 8) ^ self.t32[((c.state >> 24) as u8 ^ d) as usize];
        } else {
            c.state = ((c.state << 8) ^ self.t16[((c.state >> 8) as u8 ^ d) as usize]) & 0xFFFF;
        }
    }

    pub fn finalize(c: &Context) -> u32 {
        let wide = c.config & CTRL_CRC32 != 0;
        let mut v = c.state;
        if c.config & CTRL_REFLECT != 0 {
            v = if wide { v.reverse_bits() } else { (v as u16).reverse_bits() as u32 };
        }
        if c.config & CTRL_INVERT != 0 {
            v ^= if wide { 0xFFFF_FFFF } else { 0xFFFF };
        }
        if c.config & CTRL_SWAP != 0 {
            v = if wide { v.swap_bytes() } else { (v as u16).swap_bytes() as u32 };
        }
        v
    }

    /// Whole-message convenience used by tests and the bench harness.
    pub fn compute(&self, config: u8, bytes: &[u8]) -> u32 {
        let mut c = Self::init(config);
        for &b in bytes {
            self.update(&mut c, b);
        }
        Self::finalize(&c)
    }
}

#[derive(Debug)]
pub struct Crc {
    pub period: Duration,
}

pub fn factory(params: &Params) -> Result<Arc<dyn Design>, DesignError> {
    reject_unknown(params, &["clock_period_us"])?;
    Ok(Arc::new(Crc {
        period: param_period(params, 1000)?,
    }))
}

impl Design for Crc {
    fn key(&self) -> &'static str {
        "crc"
    }

    fn top_module(&self) -> &'static str {
        "crc"
    }

    fn source(&self) -> &'static str {
        include_str!("../../designs/crc.h")
    }

    fn ports(&self) -> Vec<PortDecl> {
        vec![
            PortDecl::clock("clock", self.period),
            PortDecl::input("reset", RtlType::Logic),
            PortDecl::input("data_in", RtlType::UnsignedInt(8)),
            PortDecl::input("context_sel", RtlType::UnsignedInt(4)),
            PortDecl::input("ctrl", RtlType::UnsignedInt(8)),
            PortDecl::input("data_valid", RtlType::Logic),
            PortDecl::output("crc_out", RtlType::UnsignedInt(32)),
        ]
    }

    fn elaborate(&self, k: &mut Kernel, ports: &PortMap) -> Result<(), KernelError> {
        let clock = ports.get("clock")?;
        let reset = ports.get("reset")?;
        let data_in = ports.get("data_in")?;
        let sel = ports.get("context_sel")?;
        let ctrl = ports.get("ctrl")?;
        let valid = ports.get("data_valid")?;
        let out = ports.get("crc_out")?;
        let engine = CrcEngine::new();
        let mut ctx = [Context::default(); CONTEXTS];
        k.spawn_process(
            Box::new(move |act| {
                let s = act.read_u64(sel) as usize & 0xF;
                if act.read_bool(reset) {
                    ctx = [Context::default(); CONTEXTS];
                } else {
                    let k = act.read_u64(ctrl) as u8;
                    if k & CTRL_INIT != 0 {
                        ctx[s] = CrcEngine::init(k);
                    } else if act.read_bool(valid) {
                        engine.update(&mut ctx[s], act.read_u64(data_in) as u8);
                    }
                }
                act.write_u64(out, CrcEngine::finalize(&ctx[s]) as u64);
            }),
            Sensitivity::new().rising(clock),
        )?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Bitwise reflected CRC-32 (polynomial 0xEDB88320), no tables.
    fn crc32_reflected(bytes: &[u8]) -> u32 {
        let mut c = 0xFFFF_FFFFu32;
        for &b in bytes {
            c ^= b as u32;
            for _ in 0..8 {
                c = if c & 1 != 0 { (c >> 1) ^ 0xEDB8_8320 } else { c >> 1 };
            }
        }
        !c
    }

    #[test]
    fn standard_check_value() {
        let e = CrcEngine::new();
        let cfg = CTRL_CRC32 | CTRL_REFLECT | CTRL_INVERT;
        assert_eq!(crc32_reflected(b"123456789"), 0xCBF4_3926);
        assert_eq!(e.compute(cfg, b"123456789"), crc32_reflected(b"123456789"));
    }

    #[test]
    fn empty_message_is_transformed_init() {
        let e = CrcEngine::new();
        assert_eq!(e.compute(CTRL_CRC32, b""), 0xFFFF_FFFF);
        assert_eq!(e.compute(CTRL_CRC32 | CTRL_INVERT, b""), 0);
        assert_eq!(e.compute(0, b""), 0);
        assert_eq!(e.compute(CTRL_INVERT | CTRL_SWAP, b""), 0xFFFF);
    }
}
