#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rtlfmi::bench::descriptor_for;
use rtlfmi::config::{InterruptEdge, InterruptMode, InterruptSpec, IntermediateUpdate, IsrAction, Params};
use rtlfmi::descriptor::{derive_token, Causality, ModelDescriptor};
use rtlfmi::design::{bind_ports, Design, DesignError, DesignRegistry, NativeBench, PortDecl, PortMap};
use rtlfmi::designs::crc::{CrcEngine, CTRL_CRC32, CTRL_INIT, CTRL_INVERT, CTRL_REFLECT};
use rtlfmi::designs::i2c::SLAVE_ADDRESS;
use rtlfmi::designs::sine::SineSchedule;
use rtlfmi::kernel::{Kernel, KernelError};
use rtlfmi::master::{isr_from_action, Master};
use rtlfmi::package::{load_bytes, package_bytes, FmuArchive, ModelResources};
use rtlfmi::parser::{parse_interface, Direction};
use rtlfmi::slave::{SlaveInstance, StepResult};
use rtlfmi::types::{fmi_to_rtl, rtl_to_fmi, BitVector, FmiValue, RtlType, RtlValue};
use rtlfmi::{Duration, SimTime};

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)*) => {
        if !$cond {
            return Err(format!($($arg)*));
        }
    };
}
#[allow(unused_imports)]
pub(crate) use ensure;

pub fn ms(v: u64) -> Duration {
    Duration::from_ms(v)
}

// ---------------------------------------------------------------------------
// Test-only designs

/// Drives `irq` high at `rise_us` for `width_us`, `count` times every
/// `period_us`.
#[derive(Debug)]
pub struct PulseGen {
    pub rise: SimTime,
    pub width: Duration,
    pub period: Duration,
    pub count: u64,
}

const PULSE_SRC: &str = "SC_MODULE(pulse_gen) {\n    sc_out<bool> irq;\n    SC_CTOR(pulse_gen) {}\n};\n";

fn param(params: &Params, name: &str, default: u64) -> Result<u64, DesignError> {
    match params.get(name) {
        None => Ok(default),
        Some(v) => v.as_u64().ok_or_else(|| DesignError::BadParam {
            name: name.into(),
            message: "expected an integer".into(),
        }),
    }
}

fn pulse_factory(params: &Params) -> Result<Arc<dyn Design>, DesignError> {
    Ok(Arc::new(PulseGen {
        rise: SimTime(Duration::from_us(param(params, "rise_us", 12_000)?).ticks()),
        width: Duration::from_us(param(params, "width_us", 5_000)?),
        period: Duration::from_us(param(params, "period_us", 0)?),
        count: param(params, "count", 1)?,
    }))
}

impl Design for PulseGen {
    fn key(&self) -> &'static str {
        "pulse_gen"
    }
    fn top_module(&self) -> &'static str {
        "pulse_gen"
    }
    fn source(&self) -> &'static str {
        PULSE_SRC
    }
    fn ports(&self) -> Vec<PortDecl> {
        vec![PortDecl::output("irq", RtlType::Logic)]
    }
    fn elaborate(&self, k: &mut Kernel, ports: &PortMap) -> Result<(), KernelError> {
        let irq = ports.get("irq")?;
        for i in 0..self.count {
            let rise = SimTime(self.rise.ticks() + i * self.period.ticks());
            k.schedule_write(rise, irq, RtlValue::Logic(true))?;
            let fall = rise.checked_add(self.width).map_err(KernelError::Time)?;
            k.schedule_write(fall, irq, RtlValue::Logic(false))?;
        }
        Ok(())
    }
}

/// Interface-only design whose ports come from the `source`/`top` params.
#[derive(Debug)]
pub struct Passive {
    source: &'static str,
    top: &'static str,
    ports: Vec<PortDecl>,
}

fn passive_factory(params: &Params) -> Result<Arc<dyn Design>, DesignError> {
    let text = |k: &str| {
        params.get(k).and_then(|v| v.as_str()).map(str::to_string).ok_or_else(|| DesignError::BadParam {
            name: k.into(),
            message: "expected a string".into(),
        })
    };
    let (source, top) = (text("source")?, text("top")?);
    let iface = parse_interface(&source, &top).map_err(|e| DesignError::BadParam {
        name: "source".into(),
        message: e.to_string(),
    })?;
    let ports = iface
        .ports
        .into_iter()
        .map(|spec| PortDecl {
            spec,
            clock: None,
            init: None,
        })
        .collect();
    Ok(Arc::new(Passive {
        source: Box::leak(source.into_boxed_str()),
        top: Box::leak(top.into_boxed_str()),
        ports,
    }))
}

impl Design for Passive {
    fn key(&self) -> &'static str {
        "passive"
    }
    fn top_module(&self) -> &'static str {
        self.top
    }
    fn source(&self) -> &'static str {
        self.source
    }
    fn ports(&self) -> Vec<PortDecl> {
        self.ports.clone()
    }
    fn elaborate(&self, _: &mut Kernel, _: &PortMap) -> Result<(), KernelError> {
        Ok(())
    }
}

pub fn registry() -> DesignRegistry {
    let mut r = DesignRegistry::builtin();
    r.register("pulse_gen", pulse_factory);
    r.register("passive", passive_factory);
    r
}

/// Packages `key` with every port exposed and loads it back.
pub fn archive(key: &str, model: ModelResources) -> FmuArchive {
    let reg = registry();
    let design = reg.create(key, &model.params).expect("design");
    let d = descriptor_for(design.as_ref(), ms(1)).expect("descriptor");
    load_bytes(&package_bytes(&d, &model).expect("package"), &reg).expect("load")
}

pub fn ready(archive: &FmuArchive, name: &str) -> SlaveInstance {
    let mut s = SlaveInstance::instantiate(archive, name).unwrap();
    s.enter_initialization(SimTime::ZERO).unwrap();
    s.exit_initialization().unwrap();
    s
}

// ---------------------------------------------------------------------------
// Wrapped versus native

fn random_value(rng: &mut ChaCha8Rng, key: &str, port: &str, ty: RtlType) -> RtlValue {
    match (key, port) {
        ("delta_sigma", "reset_n") => return RtlValue::Logic(rng.gen_bool(0.97)),
        ("delta_sigma", "x_in") => return RtlValue::Float64(rng.gen_range(-1.0..=1.0)),
        ("crc", "reset") => return RtlValue::Logic(rng.gen_bool(0.01)),
        ("i2c", "reset") => return RtlValue::Logic(rng.gen_bool(0.005)),
        ("i2c", "start") => return RtlValue::Logic(rng.gen_bool(0.1)),
        _ => {}
    }
    match ty {
        RtlType::Logic => RtlValue::Logic(rng.gen()),
        RtlType::UnsignedInt(w) => RtlValue::uint(w, rng.gen::<u64>() & mask(w)),
        RtlType::SignedInt(w) => RtlValue::int(w, ((rng.gen::<u64>() << (64 - w)) as i64) >> (64 - w)),
        RtlType::BitVector(w) => {
            let mut bv = BitVector::zero(w);
            for i in 0..w as usize {
                bv.set_bit(i, rng.gen());
            }
            RtlValue::Bits(bv)
        }
        RtlType::Float32 => RtlValue::Float32(rng.gen_range(-1.0..=1.0)),
        RtlType::Float64 => RtlValue::Float64(rng.gen_range(-1.0..=1.0)),
    }
}

fn mask(w: u8) -> u64 {
    if w == 64 {
        u64::MAX
    } else {
        (1 << w) - 1
    }
}

/// Drives the same random input schedule through a bare kernel and through
/// the packaged slave and compares every output at every communication point.
pub fn equivalence(key: &str, steps: u64, seed: u64) -> Check {
    let reg = registry();
    let design = reg.create(key, &Params::new()).map_err(|e| e.to_string())?;
    let mut native = NativeBench::new(design.as_ref()).map_err(|e| e.to_string())?;
    let mut slave = ready(&archive(key, ModelResources::new(key)), "dut");
    let ports = design.ports();
    let inputs: Vec<_> = ports
        .iter()
        .filter(|p| p.spec.direction == Direction::In && p.clock.is_none())
        .map(|p| (p.spec.name.clone(), p.spec.rtl_type, slave.vr(&p.spec.name).unwrap()))
        .collect();
    let outputs: Vec<_> = ports
        .iter()
        .filter(|p| p.spec.direction == Direction::Out)
        .map(|p| (p.spec.name.clone(), slave.vr(&p.spec.name).unwrap()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut toggles = 0u64;
    let mut last: Vec<FmiValue> = Vec::new();
    for k in 0..steps {
        for (name, ty, vr) in &inputs {
            let v = random_value(&mut rng, key, name, *ty);
            native.set(name, v.clone()).map_err(|e| e.to_string())?;
            slave.set_value(*vr, &rtl_to_fmi(&v).unwrap()).map_err(|e| e.to_string())?;
        }
        native.run(ms(1)).map_err(|e| e.to_string())?;
        match slave.do_step(ms(1)).map_err(|e| e.to_string())? {
            StepResult::Done(t) => ensure!(t == SimTime::from_ms(k + 1), "{key}: step {k} ended at {t}"),
            other => return Err(format!("{key}: unexpected {other:?}")),
        }
        let mut now = Vec::new();
        for (name, vr) in &outputs {
            let n = rtl_to_fmi(&native.get(name).unwrap()).unwrap();
            let w = slave.get_value(*vr).unwrap();
            ensure!(n == w, "{key}: `{name}` differs at {} ms: native {n:?}, wrapped {w:?}", k + 1);
            now.push(w);
        }
        if !last.is_empty() && last != now {
            toggles += 1;
        }
        last = now;
    }
    ensure!(toggles > steps / 100, "{key}: outputs barely moved ({toggles} changes)");
    Ok(format!("{key}: {steps} steps, {toggles} output changes"))
}

// ---------------------------------------------------------------------------
// Interrupt detectability

pub fn pulse_archive(rise_us: u64, width_us: u64, mode: InterruptMode) -> FmuArchive {
    let mut model = ModelResources::new("pulse_gen");
    model.params.insert("rise_us".into(), rise_us.into());
    model.params.insert("width_us".into(), width_us.into());
    model.interrupts.push(InterruptSpec {
        signal: "irq".into(),
        edge: InterruptEdge::Rising,
        mode,
        isr: None,
    });
    archive("pulse_gen", model)
}

/// Runs a pulse generator under the master and returns each event time.
pub fn detections(rise_us: u64, width_us: u64, mode: InterruptMode, step: Duration, stop: Duration) -> Vec<SimTime> {
    let a = pulse_archive(rise_us, width_us, mode);
    let mut m = Master::new(step, stop).unwrap();
    m.add_instance(SlaveInstance::instantiate(&a, "p").unwrap()).unwrap();
    m.on_interrupt("p", "irq", isr_from_action(IsrAction::Log)).unwrap();
    let t = m.run().unwrap();
    assert_eq!(t.isr_invocations as usize, t.events.len());
    t.events.iter().map(|e| e.at).collect()
}

pub fn detectability_matrix() -> Check {
    let stop = ms(40);
    let poll5 = detections(12_000, 5_000, InterruptMode::PostStepPoll, ms(5), stop);
    let poll20 = detections(12_000, 5_000, InterruptMode::PostStepPoll, ms(20), stop);
    let async5 = detections(12_000, 5_000, InterruptMode::AsyncMonitor, ms(5), stop);
    let async20 = detections(12_000, 5_000, InterruptMode::AsyncMonitor, ms(20), stop);
    ensure!(poll5 == [SimTime::from_ms(15)], "poll @5ms: {poll5:?}");
    ensure!(poll20.is_empty(), "poll @20ms: {poll20:?}");
    ensure!(async5 == [SimTime::from_ms(12)], "async @5ms: {async5:?}");
    ensure!(async20 == [SimTime::from_ms(12)], "async @20ms: {async20:?}");
    Ok("poll 5ms→15ms, poll 20ms→missed, async→12ms at both steps".into())
}

// ---------------------------------------------------------------------------
// Step-mode semantics

pub fn fifteen_ms_step() -> Check {
    let a = archive("alu", ModelResources::new("alu"));
    let mut s = ready(&a, "alu");
    let big = s.do_step(ms(15)).map_err(|e| e.to_string())?;
    ensure!(big == StepResult::Done(SimTime::from_ms(15)), "plain step: {big:?}");
    ensure!(s.kernel().unwrap().now() == SimTime::from_ms(15), "kernel time");

    let mut s = ready(&a, "alu");
    s.set_intermediate_update(Some(IntermediateUpdate {
        window_start: SimTime::ZERO,
        window_end: SimTime::from_ms(15),
        fine_step: ms(1),
    }));
    let seen = Arc::new(std::sync::Mutex::new(Vec::new()));
    let sink = seen.clone();
    s.set_intermediate_callback(Some(Box::new(move |t| sink.lock().unwrap().push(t))));
    let r = s.do_step(ms(15)).map_err(|e| e.to_string())?;
    ensure!(r == StepResult::Done(SimTime::from_ms(15)), "windowed step: {r:?}");
    let seen = seen.lock().unwrap().clone();
    let want: Vec<_> = (1..=15).map(SimTime::from_ms).collect();
    ensure!(s.intermediate_count() == 15, "count {}", s.intermediate_count());
    ensure!(seen == want, "sub-activation times {seen:?}");
    Ok("do_step(15ms) advanced 15ms; 15 sub-activations at 1..15ms".into())
}

// ---------------------------------------------------------------------------
// Sine stimulus into the modulator, three topologies

/// One kernel, shared clock and a shared sine/x_in signal.
pub fn fig5_monolithic(steps: u64) -> Vec<bool> {
    let reg = registry();
    let sine = reg.create("sine_stim", &Params::new()).unwrap();
    let ds = reg.create("delta_sigma", &Params::new()).unwrap();
    let mut k = Kernel::new();
    let dut = bind_ports(ds.as_ref(), &mut k, "").unwrap();
    let mut stim = PortMap::new("stim");
    stim.insert("y", dut.get("x_in").unwrap());
    stim.insert("clock", dut.get("clock").unwrap());
    k.write_signal(dut.get("reset_n").unwrap(), RtlValue::Logic(true)).unwrap();
    sine.elaborate(&mut k, &stim).unwrap();
    ds.elaborate(&mut k, &dut).unwrap();
    let y = dut.get("y_out").unwrap();
    let mut out = vec![k.read_bool(y)];
    for _ in 0..steps {
        k.run_for(ms(1)).unwrap();
        out.push(k.read_bool(y));
    }
    out
}

fn ds_archive() -> FmuArchive {
    archive("delta_sigma", ModelResources::new("delta_sigma"))
}

/// Modulator archive, stimulus computed by the master.
pub fn fig5_master_stimulus(steps: u64) -> Vec<bool> {
    let mut dut = SlaveInstance::instantiate(&ds_archive(), "dut").unwrap();
    dut.enter_initialization(SimTime::ZERO).unwrap();
    dut.set_by_name("reset_n", &FmiValue::Bool(true)).unwrap();
    let mut m = Master::new(ms(1), ms(steps)).unwrap();
    m.add_instance(dut).unwrap();
    m.trace("dut.y_out").unwrap();
    let schedule = SineSchedule::default();
    m.set_stimulus(Box::new(move |t, inst| {
        // the stimulus archive's last clock edge before `t` is at t - 0.5 ms
        let x = if t == SimTime::ZERO {
            0.0
        } else {
            schedule.sample(SimTime(t.ticks() - Duration::from_us(500).ticks()))
        };
        inst.set("dut", "x_in", &FmiValue::Float64(x))
    }));
    bools(&m.run().unwrap().series("dut.y_out").unwrap())
}

/// Stimulus archive connected to the modulator archive.
pub fn fig5_two_archives(steps: u64) -> Vec<bool> {
    let stim = archive("sine_stim", ModelResources::new("sine_stim"));
    let mut dut = SlaveInstance::instantiate(&ds_archive(), "dut").unwrap();
    dut.enter_initialization(SimTime::ZERO).unwrap();
    dut.set_by_name("reset_n", &FmiValue::Bool(true)).unwrap();
    let mut m = Master::new(ms(1), ms(steps)).unwrap();
    m.add_instance(SlaveInstance::instantiate(&stim, "stim").unwrap()).unwrap();
    m.add_instance(dut).unwrap();
    m.connect("stim.y", "dut.x_in").unwrap();
    m.trace("dut.y_out").unwrap();
    bools(&m.run().unwrap().series("dut.y_out").unwrap())
}

fn bools(v: &[&FmiValue]) -> Vec<bool> {
    v.iter()
        .map(|x| match x {
            FmiValue::Bool(b) => *b,
            other => panic!("not a bool: {other:?}"),
        })
        .collect()
}

pub fn topology_invariance(steps: u64) -> Check {
    let c1 = fig5_monolithic(steps);
    let c2 = fig5_master_stimulus(steps);
    let c3 = fig5_two_archives(steps);
    ensure!(c1.len() as u64 == steps + 1, "config 1 has {} samples", c1.len());
    let first_diff = |a: &[bool], b: &[bool]| a.iter().zip(b).position(|(x, y)| x != y);
    ensure!(c1 == c2, "config 2 diverges at sample {:?}", first_diff(&c1, &c2));
    ensure!(c1 == c3, "config 3 diverges at sample {:?}", first_diff(&c1, &c3));
    let ones = c1.iter().filter(|b| **b).count();
    ensure!(ones > steps as usize / 4 && ones < 3 * steps as usize / 4, "degenerate bitstream ({ones} ones)");
    Ok(format!("{} identical samples, {ones} ones", c1.len()))
}

// ---------------------------------------------------------------------------
// CRC

/// Bit-at-a-time reflected CRC-32 (polynomial 0xEDB88320), init and final
/// XOR 0xFFFFFFFF.
pub fn crc32_bitwise(data: &[u8]) -> u32 {
    let mut crc = 0xFFFF_FFFFu32;
    for &b in data {
        crc ^= b as u32;
        for _ in 0..8 {
            crc = if crc & 1 != 0 { (crc >> 1) ^ 0xEDB8_8320 } else { crc >> 1 };
        }
    }
    !crc
}

pub const CRC32_CONFIG: u8 = CTRL_CRC32 | CTRL_REFLECT | CTRL_INVERT;

/// Runs `msg` through a wrapped CRC instance on context `ctx`.
pub fn crc_via_slave(s: &mut SlaveInstance, ctx: u8, msg: &[u8]) -> u32 {
    s.set_by_name("context_sel", &FmiValue::UInt8(ctx)).unwrap();
    s.set_by_name("ctrl", &FmiValue::UInt8(CRC32_CONFIG | CTRL_INIT)).unwrap();
    s.set_by_name("data_valid", &FmiValue::Bool(false)).unwrap();
    s.do_step(ms(1)).unwrap();
    s.set_by_name("ctrl", &FmiValue::UInt8(0)).unwrap();
    s.set_by_name("data_valid", &FmiValue::Bool(true)).unwrap();
    for &b in msg {
        s.set_by_name("data_in", &FmiValue::UInt8(b)).unwrap();
        s.do_step(ms(1)).unwrap();
    }
    s.set_by_name("data_valid", &FmiValue::Bool(false)).unwrap();
    match s.get_by_name("crc_out").unwrap() {
        FmiValue::UInt32(v) => v,
        other => panic!("crc_out is {other:?}"),
    }
}

pub const CRC_ALPHABET: [u8; 8] = [0x00, 0x01, 0x31, 0x5A, 0x7F, 0x80, 0xA5, 0xFF];

pub fn all_messages(max_len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for m in &frontier {
            for &b in &CRC_ALPHABET {
                let mut m2: Vec<u8> = m.clone();
                m2.push(b);
                next.push(m2);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

pub fn crc_oracle() -> Check {
    let oracle = crc32_bitwise(b"123456789");
    ensure!(oracle == 0xCBF4_3926, "oracle itself gives {oracle:#010x}");
    let engine = CrcEngine::new();
    let mut s = ready(&archive("crc", ModelResources::new("crc")), "crc");
    let check = crc_via_slave(&mut s, 3, b"123456789");
    ensure!(check == oracle, "wrapped design gives {check:#010x}");
    let msgs = all_messages(3);
    for (i, m) in msgs.iter().enumerate() {
        let want = crc32_bitwise(m);
        let e = engine.compute(CRC32_CONFIG, m);
        ensure!(e == want, "engine {m:02x?}: {e:#010x} != {want:#010x}");
        let w = crc_via_slave(&mut s, (i % 16) as u8, m);
        ensure!(w == want, "wrapped {m:02x?}: {w:#010x} != {want:#010x}");
    }
    Ok(format!("check value {oracle:#010x}; {} messages agree", msgs.len()))
}

// ---------------------------------------------------------------------------
// I2C

pub fn i2c_archive(mode: InterruptMode) -> FmuArchive {
    let mut model = ModelResources::new("i2c");
    model.interrupts.push(InterruptSpec {
        signal: "nack".into(),
        edge: InterruptEdge::Rising,
        mode,
        isr: None,
    });
    archive("i2c", model)
}

/// One transaction to `addr`; returns (nack, rdata, ISR invocations).
pub fn i2c_transaction(a: &FmuArchive, addr: u8, cmd: u8) -> (bool, u8, u64) {
    let mut m = Master::new(ms(1), ms(20)).unwrap();
    m.add_instance(SlaveInstance::instantiate(a, "bus").unwrap()).unwrap();
    m.trace("bus.nack").unwrap();
    m.trace("bus.rdata").unwrap();
    m.trace("bus.busy").unwrap();
    m.set_stimulus(Box::new(move |t, inst| {
        if t == SimTime::ZERO {
            inst.set("bus", "addr", &FmiValue::UInt8(addr))?;
            inst.set("bus", "cmd", &FmiValue::UInt8(cmd))?;
            inst.set("bus", "start", &FmiValue::Bool(true))?;
        }
        Ok(())
    }));
    m.on_interrupt(
        "bus",
        "nack",
        isr_from_action(IsrAction::Set {
            variable: "start".into(),
            value: 0.into(),
        }),
    )
    .unwrap();
    let t = m.run().unwrap();
    let last = &t.rows.last().unwrap().1;
    let busy = last[2] == FmiValue::Bool(true);
    assert!(!busy, "transaction to {addr:#04x} still busy at 20 ms");
    let rdata = match last[1] {
        FmiValue::UInt8(v) => v,
        ref other => panic!("{other:?}"),
    };
    (last[0] == FmiValue::Bool(true), rdata, t.isr_invocations)
}

pub fn i2c_property() -> Check {
    let a = i2c_archive(InterruptMode::AsyncMonitor);
    let mut invalid = 0;
    for addr in 0u8..128 {
        let cmd = addr.wrapping_mul(37) ^ 0x5C;
        let (nack, rdata, isr) = i2c_transaction(&a, addr, cmd);
        let valid = addr == SLAVE_ADDRESS;
        ensure!(nack == !valid, "addr {addr:#04x}: nack={nack}");
        ensure!(isr == !valid as u64, "addr {addr:#04x}: {isr} ISR invocations");
        if valid {
            ensure!(rdata == !cmd, "addr {addr:#04x}: read {rdata:#04x}, want {:#04x}", !cmd);
        } else {
            invalid += 1;
        }
    }
    Ok(format!("128 addresses, {invalid} NACKs with one ISR each"))
}

// ---------------------------------------------------------------------------
// Random descriptors

pub fn type_text(t: RtlType) -> String {
    match t {
        RtlType::Logic => "sc_logic".into(),
        RtlType::BitVector(w) => format!("sc_bv<{w}>"),
        RtlType::SignedInt(w) => format!("sc_int<{w}>"),
        RtlType::UnsignedInt(w) => format!("sc_uint<{w}>"),
        RtlType::Float32 => "float".into(),
        RtlType::Float64 => "double".into(),
    }
}

pub fn random_type(rng: &mut impl Rng) -> RtlType {
    match rng.gen_range(0..6) {
        0 => RtlType::Logic,
        1 => RtlType::BitVector(rng.gen_range(1..=200)),
        2 => RtlType::SignedInt(rng.gen_range(1..=64)),
        3 => RtlType::UnsignedInt(rng.gen_range(1..=64)),
        4 => RtlType::Float32,
        _ => RtlType::Float64,
    }
}

/// A random module source and the descriptor a passive wrapper of it has.
pub fn random_module(rng: &mut impl Rng) -> (String, ModelResources, ModelDescriptor) {
    let n = rng.gen_range(1..=12);
    let mut src = String::from("SC_MODULE(rand_top) {\n");
    for i in 0..n {
        let dir = if rng.gen_bool(0.5) { "sc_in" } else { "sc_out" };
        let ty = random_type(rng);
        src.push_str(&format!("    {dir}<{}> p{i}_{};\n", type_text(ty), rng.gen_range(0..1000)));
    }
    src.push_str("    SC_CTOR(rand_top) {}\n};\n");
    let mut model = ModelResources::new("passive");
    model.params.insert("source".into(), src.clone().into());
    model.params.insert("top".into(), "rand_top".into());
    let design = registry().create("passive", &model.params).unwrap();
    let mut d = descriptor_for(design.as_ref(), Duration::from_us(rng.gen_range(1..=50_000))).unwrap();
    d.cosim.can_return_early_after_intermediate_update = rng.gen();
    for v in &mut d.variables {
        if v.causality == Causality::Input {
            let p = design.ports().into_iter().find(|p| p.spec.name == v.name).unwrap();
            let rv = random_value(&mut ChaCha8Rng::seed_from_u64(rng.gen()), "", "", p.spec.rtl_type);
            v.start = Some(rtl_to_fmi(&rv).unwrap());
            assert!(fmi_to_rtl(v.start.as_ref().unwrap(), p.spec.rtl_type).is_ok());
        }
    }
    d.instantiation_token = derive_token(&d.model_name, &d.variables);
    (src, model, d)
}
