//! Native versus wrapped wall-clock comparison.
//!
//! Both sides run the same design under the same per-millisecond input
//! schedule. The native side elaborates the design on a bare kernel; the
//! wrapped side loads the packaged archive, instantiates and initialises a
//! slave (the "init" phase) and then steps it at 1 ms (the "sim" phase).

use std::fmt::Write as _;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use thiserror::Error;

use crate::config::Params;
use crate::descriptor::{derive_token, CoSimAttrs, DescriptorError, ModelDescriptor, VariableDescriptor};
use crate::design::{Design, DesignError, DesignRegistry, NativeBench};
use crate::designs::crc::{CTRL_CRC32, CTRL_INIT, CTRL_INVERT, CTRL_REFLECT};
use crate::descriptor::Causality;
use crate::kernel::KernelError;
use crate::package::{load_bytes, package_bytes, ModelResources, PackageError};
use crate::parser::Direction;
use crate::slave::{SlaveError, SlaveInstance};
use crate::time::{Duration, SimTime};
use crate::types::{map_rtl_to_fmi, rtl_to_fmi, RtlValue, ValueError};

pub const STEP: Duration = Duration(crate::time::PS_PER_MS);

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error(transparent)]
    Package(#[from] PackageError),
    #[error(transparent)]
    Slave(#[from] SlaveError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Value(#[from] ValueError),
    #[error("no workload for design `{0}`")]
    NoWorkload(String),
}

/// Inputs applied at communication point `k` (time k ms).
pub type Workload = fn(u64) -> Vec<(&'static str, RtlValue)>;

fn lcg(k: u64) -> u64 {
    k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407) >> 33
}

fn alu_inputs(k: u64) -> Vec<(&'static str, RtlValue)> {
    let r = lcg(k);
    vec![
        ("a", RtlValue::uint(4, r & 0xF)),
        ("b", RtlValue::uint(4, r >> 4 & 0xF)),
        ("op", RtlValue::uint(3, r >> 8 & 7)),
    ]
}

fn crc_inputs(k: u64) -> Vec<(&'static str, RtlValue)> {
    let init = k % 64 == 0;
    let ctrl = if init { CTRL_INIT | CTRL_CRC32 | CTRL_REFLECT | CTRL_INVERT } else { 0 };
    vec![
        ("data_in", RtlValue::uint(8, lcg(k) & 0xFF)),
        ("context_sel", RtlValue::uint(4, k / 64 % 16)),
        ("ctrl", RtlValue::uint(8, ctrl as u64)),
        ("data_valid", RtlValue::Logic(!init)),
    ]
}

fn i2c_inputs(k: u64) -> Vec<(&'static str, RtlValue)> {
    let n = k / 20;
    let addr = if n % 2 == 0 { crate::designs::i2c::SLAVE_ADDRESS as u64 } else { lcg(n) & 0x7F };
    vec![
        ("start", RtlValue::Logic(k % 20 == 0)),
        ("addr", RtlValue::uint(7, addr)),
        ("cmd", RtlValue::uint(8, lcg(n + 7) & 0xFF)),
    ]
}

fn delta_sigma_inputs(k: u64) -> Vec<(&'static str, RtlValue)> {
    let x = 0.8 * (2.0 * std::f64::consts::PI * 3.0 * k as f64 / 1000.0).sin();
    vec![("x_in", RtlValue::Float64(x)), ("reset_n", RtlValue::Logic(true))]
}

pub fn workload(key: &str) -> Option<Workload> {
    Some(match key {
        "alu" => alu_inputs,
        "crc" => crc_inputs,
        "i2c" => i2c_inputs,
        "delta_sigma" => delta_sigma_inputs,
        _ => return None,
    })
}

/// Descriptor that exposes every port of `design`, inputs starting at zero.
pub fn descriptor_for(design: &dyn Design, step: Duration) -> Result<ModelDescriptor, BenchError> {
    let mut variables = Vec::new();
    for (i, p) in design.ports().iter().enumerate() {
        let causality = Causality::from(p.spec.direction);
        variables.push(VariableDescriptor {
            name: p.spec.name.clone(),
            value_reference: i as u32 + 1,
            fmi_type: map_rtl_to_fmi(p.spec.rtl_type)?,
            causality,
            start: match causality {
                Causality::Input => Some(rtl_to_fmi(&p.spec.rtl_type.zero())?),
                Causality::Output => None,
            },
        });
    }
    let name = design.key().to_string();
    Ok(ModelDescriptor {
        fmi_version: crate::descriptor::FMI_VERSION.into(),
        instantiation_token: derive_token(&name, &variables),
        model_name: name.clone(),
        variables,
        cosim: CoSimAttrs {
            model_identifier: name,
            can_handle_variable_step: true,
            fixed_step: step,
            can_return_early_after_intermediate_update: false,
        },
    })
}

/// Archive bytes for a registered design with default parameters.
pub fn archive_bytes(key: &str, registry: &DesignRegistry) -> Result<Vec<u8>, BenchError> {
    let design = registry.create(key, &Params::new())?;
    let d = descriptor_for(design.as_ref(), STEP)?;
    Ok(package_bytes(&d, &ModelResources::new(key))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Timing {
    pub native_s: f64,
    pub wrapped_s: f64,
    pub init_s: f64,
    pub sim_s: f64,
}

pub fn run_native(design: &dyn Design, inputs: Workload, steps: u64) -> Result<f64, BenchError> {
    let t0 = Instant::now();
    let mut b = NativeBench::new(design)?;
    let outs: Vec<_> = design
        .ports()
        .iter()
        .filter(|p| p.spec.direction == Direction::Out)
        .map(|p| b.ports.get(&p.spec.name))
        .collect::<Result<_, _>>()?;
    let mut sink = 0usize;
    for k in 0..steps {
        for (port, v) in inputs(k) {
            b.set(port, v)?;
        }
        b.run(STEP)?;
        for id in &outs {
            sink = sink.wrapping_add(b.kernel.read_signal(*id)?.is_truthy() as usize);
        }
    }
    std::hint::black_box(sink);
    Ok(t0.elapsed().as_secs_f64())
}

/// Returns (init seconds, simulation seconds).
pub fn run_wrapped(
    bytes: &[u8],
    registry: &DesignRegistry,
    inputs: Workload,
    steps: u64,
) -> Result<(f64, f64), BenchError> {
    let t0 = Instant::now();
    let archive = load_bytes(bytes, registry)?;
    let mut s = SlaveInstance::instantiate(&archive, "bench")?;
    s.enter_initialization(SimTime::ZERO)?;
    s.exit_initialization()?;
    let t1 = Instant::now();
    let mut vrs = Vec::new();
    for (port, _) in inputs(0) {
        vrs.push(s.vr(port).expect("workload port exists"));
    }
    let outs: Vec<u32> = s
        .descriptor()
        .variables
        .iter()
        .filter(|v| v.causality == Causality::Output)
        .map(|v| v.value_reference)
        .collect();
    let mut sink = 0usize;
    for k in 0..steps {
        for (vr, (_, v)) in vrs.iter().zip(inputs(k)) {
            s.set_value(*vr, &rtl_to_fmi(&v)?)?;
        }
        s.do_step(STEP)?;
        for vr in &outs {
            sink = sink.wrapping_add(s.get_value(*vr)?.as_i128().unwrap_or(0) as usize);
        }
    }
    std::hint::black_box(sink);
    s.free_instance()?;
    let t2 = Instant::now();
    Ok(((t1 - t0).as_secs_f64(), (t2 - t1).as_secs_f64()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub design: String,
    pub length: Duration,
    pub runs: usize,
    /// `None` when the cell could not be measured.
    pub timing: Option<Timing>,
}

impl BenchRow {
    pub fn slowdown(&self) -> Option<f64> {
        self.timing.map(|t| t.wrapped_s / t.native_s)
    }
}

/// Mean of `runs` measurements of one cell after a discarded warm-up pair.
pub fn measure(key: &str, length: Duration, runs: usize, registry: &DesignRegistry) -> Result<BenchRow, BenchError> {
    let (row, err) = bench(&[key.to_string()], &[length], runs, registry).remove(0);
    err.map_or(Ok(row), Err)
}

struct Cell {
    design: std::sync::Arc<dyn Design>,
    bytes: Vec<u8>,
    inputs: Workload,
    steps: u64,
    sum: Timing,
}

fn prepare(key: &str, length: Duration, registry: &DesignRegistry) -> Result<Cell, BenchError> {
    let inputs = workload(key).ok_or_else(|| BenchError::NoWorkload(key.into()))?;
    let design = registry.create(key, &Params::new())?;
    let bytes = archive_bytes(key, registry)?;
    let steps = length.ticks() / STEP.ticks();
    run_native(design.as_ref(), inputs, steps)?;
    run_wrapped(&bytes, registry, inputs, steps)?;
    Ok(Cell { design, bytes, inputs, steps, sum: Timing::default() })
}

/// Every (design, length) cell. Failed cells carry no timing.
///
/// Runs are sequential. Each repetition visits the cells in a freshly
/// shuffled order (fixed seed) and alternates which side of a pair runs
/// first, so whatever state one measurement leaves behind is spread over all
/// cells instead of always preceding the same one.
pub fn bench(
    designs: &[String],
    lengths: &[Duration],
    runs: usize,
    registry: &DesignRegistry,
) -> Vec<(BenchRow, Option<BenchError>)> {
    let runs = runs.max(1);
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for d in designs {
        for &len in lengths {
            rows.push(BenchRow { design: d.clone(), length: len, runs: 0, timing: None });
            cells.push(prepare(d, len, registry));
        }
    }
    let mut order: Vec<usize> = (0..cells.len()).collect();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    for r in 0..runs {
        order.shuffle(&mut rng);
        for &idx in &order {
            let Ok(cell) = &mut cells[idx] else { continue };
            let pair = |c: &mut Cell| -> Result<(), BenchError> {
                let mut t = Timing::default();
                if r % 2 == 0 {
                    t.native_s = run_native(c.design.as_ref(), c.inputs, c.steps)?;
                }
                (t.init_s, t.sim_s) = run_wrapped(&c.bytes, registry, c.inputs, c.steps)?;
                if r % 2 == 1 {
                    t.native_s = run_native(c.design.as_ref(), c.inputs, c.steps)?;
                }
                c.sum.native_s += t.native_s;
                c.sum.init_s += t.init_s;
                c.sum.sim_s += t.sim_s;
                c.sum.wrapped_s += t.init_s + t.sim_s;
                Ok(())
            };
            if let Err(e) = pair(cell) {
                cells[idx] = Err(e);
            }
        }
    }
    rows.into_iter()
        .zip(cells)
        .map(|(mut row, cell)| match cell {
            Ok(c) => {
                let k = runs as f64;
                row.runs = runs;
                row.timing = Some(Timing {
                    native_s: c.sum.native_s / k,
                    wrapped_s: c.sum.wrapped_s / k,
                    init_s: c.sum.init_s / k,
                    sim_s: c.sum.sim_s / k,
                });
                (row, None)
            }
            Err(e) => (row, Some(e)),
        })
        .collect()
}

pub const CSV_HEADER: &str = "design,length_ms,runs,native_s,wrapped_s,slowdown,init_s,sim_s";

pub fn report_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = write!(s, "{},{},{},", r.design, r.length.ms_text(), r.runs);
        match r.timing {
            Some(t) => {
                let _ = writeln!(
                    s,
                    "{:.6},{:.6},{:.3},{:.6},{:.6}",
                    t.native_s,
                    t.wrapped_s,
                    t.wrapped_s / t.native_s,
                    t.init_s,
                    t.sim_s
                );
            }
            None => s.push_str("NA,NA,NA,NA,NA\n"),
        }
    }
    s
}

pub fn report_table(rows: &[BenchRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<12} {:>9} {:>11} {:>11} {:>9} {:>11} {:>11}",
        "design", "length", "native [s]", "wrapped [s]", "slowdown", "init [s]", "sim [s]"
    );
    for r in rows {
        let len = format!("{} ms", r.length.ms_text());
        match r.timing {
            Some(t) => {
                let _ = writeln!(
                    s,
                    "{:<12} {:>9} {:>11.6} {:>11.6} {:>8.2}x {:>11.6} {:>11.6}",
                    r.design,
                    len,
                    t.native_s,
                    t.wrapped_s,
                    t.wrapped_s / t.native_s,
                    t.init_s,
                    t.sim_s
                );
            }
            None => {
                let _ = writeln!(s, "{:<12} {:>9} {:>11}", r.design, len, "unmeasurable");
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_bench_design_has_a_workload_over_real_inputs() {
        let reg = DesignRegistry::builtin();
        for key in ["alu", "crc", "i2c", "delta_sigma"] {
            let d = reg.create(key, &Params::new()).unwrap();
            let inputs = workload(key).unwrap()(0);
            for (port, v) in inputs {
                let p = d.ports().into_iter().find(|p| p.spec.name == port).unwrap();
                assert_eq!(p.spec.direction, Direction::In);
                v.check(p.spec.rtl_type).unwrap();
            }
        }
        assert!(workload("sine_stim").is_none());
    }

    #[test]
    fn short_measurement() {
        let reg = DesignRegistry::builtin();
        let row = measure("crc", Duration::from_ms(20), 2, &reg).unwrap();
        assert_eq!(row.runs, 2);
        let t = row.timing.unwrap();
        assert!(t.native_s > 0.0 && t.wrapped_s > 0.0);
        assert!((t.init_s + t.sim_s - t.wrapped_s).abs() < 1e-9);
        let csv = report_csv(&[row]);
        assert!(csv.starts_with(CSV_HEADER));
        assert!(csv.lines().nth(1).unwrap().starts_with("crc,20,2,"));
    }

    #[test]
    fn failed_cells_are_marked() {
        let reg = DesignRegistry::builtin();
        let cells = bench(&["nope".into()], &[Duration::from_ms(5)], 1, &reg);
        assert!(matches!(cells[0].1, Some(BenchError::NoWorkload(_))));
        let rows: Vec<_> = cells.into_iter().map(|c| c.0).collect();
        assert_eq!(report_csv(&rows).lines().nth(1).unwrap(), "nope,5,0,NA,NA,NA,NA,NA");
        assert!(report_table(&rows).contains("unmeasurable"));
    }
}
