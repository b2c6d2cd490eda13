//! Command-level I2C master and a single-register slave at address 0x2A.
//!
//! A rising `start` launches one transaction: START, `addr`+W, `cmd`,
//! repeated START, `addr`+R, one read byte, NACK, STOP. The slave stores
//! `cmd` and answers reads with its complement. An unacknowledged address
//! raises `nack`, sends STOP and ends the transaction. Each bit spans four
//! clock phases; SDA is the wired AND of both drivers.

use std::sync::Arc;

use crate::config::Params;
use crate::design::{param_period, reject_unknown, Design, DesignError, PortDecl, PortMap};
use crate::kernel::{Kernel, KernelError, Sensitivity, SignalId};
use crate::time::Duration;
use crate::types::{RtlType, RtlValue};

pub const SLAVE_ADDRESS: u8 = 0x2A;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sample {
    None,
    AddrAck,
    DataAck,
    ReadBit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Phase {
    scl: bool,
    sda: bool,
    sample: Sample,
}

const fn ph(scl: bool, sda: bool) -> Phase {
    Phase {
        scl,
        sda,
        sample: Sample::None,
    }
}

fn start_cond(p: &mut Vec<Phase>) {
    p.extend([ph(true, true), ph(true, false), ph(false, false)]);
}

fn repeated_start(p: &mut Vec<Phase>) {
    p.extend([ph(false, true), ph(true, true), ph(true, false), ph(false, false)]);
}

fn stop_cond(p: &mut Vec<Phase>) {
    p.extend([ph(false, false), ph(true, false), ph(true, true)]);
}

fn bit(p: &mut Vec<Phase>, b: bool, sample: Sample) {
    p.extend([
        ph(false, b),
        ph(true, b),
        Phase {
            scl: true,
            sda: b,
            sample,
        },
        ph(false, b),
    ]);
}

fn byte(p: &mut Vec<Phase>, v: u8, ack: Sample) {
    for i in (0..8).rev() {
        bit(p, v >> i & 1 != 0, Sample::None);
    }
    bit(p, true, ack);
}

fn transaction(addr: u8, cmd: u8) -> Vec<Phase> {
    let mut p = Vec::with_capacity(160);
    start_cond(&mut p);
    byte(&mut p, addr << 1, Sample::AddrAck);
    byte(&mut p, cmd, Sample::DataAck);
    repeated_start(&mut p);
    byte(&mut p, addr << 1 | 1, Sample::AddrAck);
    for _ in 0..8 {
        bit(&mut p, true, Sample::ReadBit);
    }
    bit(&mut p, true, Sample::None); // master NACK ends the read
    stop_cond(&mut p);
    p
}

struct MasterPorts {
    reset: SignalId,
    start: SignalId,
    addr: SignalId,
    cmd: SignalId,
    busy: SignalId,
    rdata: SignalId,
    nack: SignalId,
    scl: SignalId,
    sda_drive: SignalId,
    sda: SignalId,
}

struct Master {
    io: MasterPorts,
    program: Vec<Phase>,
    pc: usize,
    prev_start: bool,
    shift: u8,
    failed: bool,
}

impl Master {
    fn drive(&self, act: &mut crate::kernel::Activation<'_>, scl: bool, sda: bool) {
        act.write_bool(self.io.scl, scl);
        act.write_bool(self.io.sda_drive, sda);
    }

    fn tick(&mut self, act: &mut crate::kernel::Activation<'_>) {
        let io = &self.io;
        if act.read_bool(io.reset) {
            self.program.clear();
            self.pc = 0;
            self.prev_start = false;
            act.write_bool(io.busy, false);
            act.write_bool(io.nack, false);
            act.write_u64(io.rdata, 0);
            self.drive(act, true, true);
            return;
        }
        let start = act.read_bool(io.start);
        let rising = start && !self.prev_start;
        self.prev_start = start;
        if self.pc >= self.program.len() {
            if rising {
                let addr = act.read_u64(io.addr) as u8;
                let cmd = act.read_u64(io.cmd) as u8;
                self.program = transaction(addr, cmd);
                self.pc = 0;
                self.shift = 0;
                self.failed = false;
                act.write_bool(io.busy, true);
                act.write_bool(io.nack, false);
            }
            return;
        }
        let phase = self.program[self.pc];
        self.pc += 1;
        self.drive(act, phase.scl, phase.sda);
        let line = act.read_bool(self.io.sda);
        match phase.sample {
            Sample::None => {}
            Sample::ReadBit => self.shift = self.shift << 1 | line as u8,
            Sample::AddrAck | Sample::DataAck => {
                if line {
                    // not acknowledged: finish the bit, then STOP
                    self.failed = true;
                    act.write_bool(self.io.nack, true);
                    let mut rest = vec![ph(false, true)];
                    stop_cond(&mut rest);
                    self.program = rest;
                    self.pc = 0;
                }
            }
        }
        if self.pc == self.program.len() {
            act.write_bool(self.io.busy, false);
            if !self.failed {
                act.write_u64(self.io.rdata, self.shift as u64);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SlaveState {
    Idle,
    RecvAddr,
    AckAddr { read: bool },
    RecvData,
    AckData,
    Send,
    WaitMasterAck,
}

struct Slave {
    scl: SignalId,
    sda: SignalId,
    drive: SignalId,
    prev_scl: bool,
    prev_sda: bool,
    state: SlaveState,
    shift: u8,
    bits: u8,
    reg: u8,
    out: u8,
}

impl Slave {
    fn on_lines(&mut self, act: &mut crate::kernel::Activation<'_>) {
        let scl = act.read_bool(self.scl);
        let sda = act.read_bool(self.sda);
        let (pscl, psda) = (self.prev_scl, self.prev_sda);
        self.prev_scl = scl;
        self.prev_sda = sda;
        if scl && pscl && sda != psda {
            // START (falling SDA) or STOP (rising SDA) while SCL is high
            self.state = if sda { SlaveState::Idle } else { SlaveState::RecvAddr };
            self.shift = 0;
            self.bits = 0;
            act.write_bool(self.drive, true);
            return;
        }
        if scl && !pscl {
            match self.state {
                SlaveState::RecvAddr | SlaveState::RecvData => {
                    self.shift = self.shift << 1 | sda as u8;
                    self.bits += 1;
                }
                SlaveState::Send => self.bits += 1,
                SlaveState::WaitMasterAck => {
                    if sda {
                        self.state = SlaveState::Idle;
                    } else {
                        self.state = SlaveState::Send;
                        self.bits = 0;
                    }
                }
                _ => {}
            }
        } else if !scl && pscl {
            match self.state {
                SlaveState::RecvAddr if self.bits == 8 => {
                    if self.shift >> 1 == SLAVE_ADDRESS {
                        self.state = SlaveState::AckAddr {
                            read: self.shift & 1 == 1,
                        };
                        act.write_bool(self.drive, false);
                    } else {
                        self.state = SlaveState::Idle;
                    }
                }
                SlaveState::RecvData if self.bits == 8 => {
                    self.reg = self.shift;
                    self.state = SlaveState::AckData;
                    act.write_bool(self.drive, false);
                }
                SlaveState::AckAddr { read: true } => {
                    self.state = SlaveState::Send;
                    self.bits = 0;
                    self.out = !self.reg;
                    act.write_bool(self.drive, self.out & 0x80 != 0);
                }
                SlaveState::AckAddr { read: false } | SlaveState::AckData => {
                    self.state = SlaveState::RecvData;
                    self.bits = 0;
                    self.shift = 0;
                    act.write_bool(self.drive, true);
                }
                SlaveState::Send if self.bits == 8 => {
                    self.state = SlaveState::WaitMasterAck;
                    act.write_bool(self.drive, true);
                }
                SlaveState::Send => {
                    act.write_bool(self.drive, self.out >> (7 - self.bits) & 1 != 0);
                }
                _ => {}
            }
        }
    }
}

#[derive(Debug)]
pub struct I2c {
    pub period: Duration,
}

pub fn factory(params: &Params) -> Result<Arc<dyn Design>, DesignError> {
    reject_unknown(params, &["clock_period_us"])?;
    Ok(Arc::new(I2c {
        period: param_period(params, 100)?,
    }))
}

impl Design for I2c {
    fn key(&self) -> &'static str {
        "i2c"
    }

    fn top_module(&self) -> &'static str {
        "i2c"
    }

    fn source(&self) -> &'static str {
        include_str!("../../designs/i2c.h")
    }

    fn ports(&self) -> Vec<PortDecl> {
        vec![
            PortDecl::clock("clock", self.period),
            PortDecl::input("reset", RtlType::Logic),
            PortDecl::input("start", RtlType::Logic),
            PortDecl::input("addr", RtlType::UnsignedInt(7)),
            PortDecl::input("cmd", RtlType::UnsignedInt(8)),
            PortDecl::output("busy", RtlType::Logic),
            PortDecl::output("rdata", RtlType::UnsignedInt(8)),
            PortDecl::output("nack", RtlType::Logic),
        ]
    }

    fn elaborate(&self, k: &mut Kernel, ports: &PortMap) -> Result<(), KernelError> {
        let high = RtlValue::Logic(true);
        let scl = k.create_signal(&ports.internal("scl"), RtlType::Logic, high.clone())?;
        let sda = k.create_signal(&ports.internal("sda"), RtlType::Logic, high.clone())?;
        let m_sda = k.create_signal(&ports.internal("m_sda"), RtlType::Logic, high.clone())?;
        let s_sda = k.create_signal(&ports.internal("s_sda"), RtlType::Logic, high)?;

        let mut master = Master {
            io: MasterPorts {
                reset: ports.get("reset")?,
                start: ports.get("start")?,
                addr: ports.get("addr")?,
                cmd: ports.get("cmd")?,
                busy: ports.get("busy")?,
                rdata: ports.get("rdata")?,
                nack: ports.get("nack")?,
                scl,
                sda_drive: m_sda,
                sda,
            },
            program: Vec::new(),
            pc: 0,
            prev_start: false,
            shift: 0,
            failed: false,
        };
        k.spawn_process(
            Box::new(move |act| master.tick(act)),
            Sensitivity::new().rising(ports.get("clock")?),
        )?;

        let mut slave = Slave {
            scl,
            sda,
            drive: s_sda,
            prev_scl: true,
            prev_sda: true,
            state: SlaveState::Idle,
            shift: 0,
            bits: 0,
            reg: 0,
            out: 0,
        };
        k.spawn_process(
            Box::new(move |act| slave.on_lines(act)),
            Sensitivity::new().change(scl).change(sda),
        )?;

        k.spawn_process(
            Box::new(move |act| {
                let v = act.read_bool(m_sda) && act.read_bool(s_sda);
                act.write_bool(sda, v);
            }),
            Sensitivity::new().change(m_sda).change(s_sda),
        )?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::NativeBench;

    fn run_transaction(addr: u8, cmd: u8) -> (bool, u8) {
        let d = I2c {
            period: Duration::from_us(100),
        };
        let mut b = NativeBench::new(&d).unwrap();
        b.set("addr", RtlValue::uint(7, addr as u64)).unwrap();
        b.set("cmd", RtlValue::uint(8, cmd as u64)).unwrap();
        b.set("start", RtlValue::Logic(true)).unwrap();
        b.run(Duration::from_ms(1)).unwrap();
        assert_eq!(b.get("busy").unwrap(), RtlValue::Logic(true));
        b.set("start", RtlValue::Logic(false)).unwrap();
        b.run(Duration::from_ms(19)).unwrap();
        assert_eq!(b.get("busy").unwrap(), RtlValue::Logic(false));
        let nack = b.get("nack").unwrap().is_truthy();
        let rdata = match b.get("rdata").unwrap() {
            RtlValue::UInt { value, .. } => value as u8,
            v => panic!("{v:?}"),
        };
        (nack, rdata)
    }

    #[test]
    fn valid_address_reads_complement() {
        assert_eq!(run_transaction(SLAVE_ADDRESS, 0x5C), (false, !0x5C));
        assert_eq!(run_transaction(SLAVE_ADDRESS, 0x00), (false, 0xFF));
    }

    #[test]
    fn invalid_address_nacks() {
        assert_eq!(run_transaction(0x10, 0x5C), (true, 0));
        assert_eq!(run_transaction(0x2B, 0x5C), (true, 0));
    }
}
