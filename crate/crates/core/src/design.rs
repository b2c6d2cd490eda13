//! Kernel-resident designs and the registry that constructs them by key.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::config::Params;
use crate::kernel::{Kernel, KernelError, RunOutcome, SignalId};
use crate::parser::{parse_interface, Direction, ModuleInterface, ParseError, PortSpec};
use crate::time::Duration;
use crate::types::{RtlType, RtlValue};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("parameter `{name}`: {message}")]
    BadParam { name: String, message: String },
}

/// A port driven by a free-running kernel clock instead of the outside world.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClockSpec {
    pub period: Duration,
    pub start_high: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortDecl {
    pub spec: PortSpec,
    pub clock: Option<ClockSpec>,
    /// Power-on value; zero if absent.
    pub init: Option<RtlValue>,
}

impl PortDecl {
    pub fn input(name: &str, ty: RtlType) -> Self {
        PortDecl {
            spec: PortSpec::new(name, Direction::In, ty, 0),
            clock: None,
            init: None,
        }
    }

    pub fn output(name: &str, ty: RtlType) -> Self {
        PortDecl {
            spec: PortSpec::new(name, Direction::Out, ty, 0),
            clock: None,
            init: None,
        }
    }

    pub fn clock(name: &str, period: Duration) -> Self {
        PortDecl {
            spec: PortSpec::new(name, Direction::In, RtlType::Logic, 0),
            clock: Some(ClockSpec {
                period,
                start_high: false,
            }),
            init: None,
        }
    }

    pub fn with_init(mut self, v: RtlValue) -> Self {
        self.init = Some(v);
        self
    }

    pub fn initial_value(&self) -> RtlValue {
        self.init.clone().unwrap_or_else(|| self.spec.rtl_type.zero())
    }
}

/// Signals a design instance is attached to. `scope` prefixes the names of
/// the design's internal signals so several designs can share one kernel.
#[derive(Debug, Clone, Default)]
pub struct PortMap {
    pub scope: String,
    signals: BTreeMap<String, SignalId>,
}

impl PortMap {
    pub fn new(scope: &str) -> Self {
        PortMap {
            scope: scope.to_string(),
            signals: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, port: &str, id: SignalId) {
        self.signals.insert(port.to_string(), id);
    }

    pub fn get(&self, port: &str) -> Result<SignalId, KernelError> {
        self.signals
            .get(port)
            .copied()
            .ok_or_else(|| KernelError::InvalidArgument(format!("port `{port}` is not bound")))
    }

    pub fn internal(&self, name: &str) -> String {
        format!("{}.{name}", self.scope)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, SignalId)> {
        self.signals.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

pub trait Design: Send + Sync + fmt::Debug {
    fn key(&self) -> &'static str;
    fn top_module(&self) -> &'static str;
    /// SystemC-syntax source of the design.
    fn source(&self) -> &'static str;
    /// Ports in declaration order.
    fn ports(&self) -> Vec<PortDecl>;
    /// Creates internal signals and processes on `kernel`.
    fn elaborate(&self, kernel: &mut Kernel, ports: &PortMap) -> Result<(), KernelError>;

    fn interface(&self) -> ModuleInterface {
        ModuleInterface {
            module_name: self.top_module().to_string(),
            ports: self
                .ports()
                .into_iter()
                .enumerate()
                .map(|(i, p)| PortSpec {
                    declaration_index: i,
                    ..p.spec
                })
                .collect(),
            source_file: format!("{}.h", self.key()).into(),
        }
    }

    fn parse_source(&self) -> Result<ModuleInterface, ParseError> {
        parse_interface(self.source(), self.top_module())
    }
}

/// Creates one signal per port, named `prefix + port`. Clock ports become
/// kernel clocks.
pub fn bind_ports(design: &dyn Design, kernel: &mut Kernel, prefix: &str) -> Result<PortMap, KernelError> {
    let mut map = PortMap::new(&format!("{prefix}{}", design.top_module()));
    for p in design.ports() {
        let name = format!("{prefix}{}", p.spec.name);
        let id = match p.clock {
            Some(c) => kernel.create_clock_named(&name, c.period, c.start_high)?,
            None => kernel.create_signal(&name, p.spec.rtl_type, p.initial_value())?,
        };
        map.insert(&p.spec.name, id);
    }
    Ok(map)
}

/// A design running directly on a kernel, with ports named as declared.
pub struct NativeBench {
    pub kernel: Kernel,
    pub ports: PortMap,
}

impl NativeBench {
    pub fn new(design: &dyn Design) -> Result<Self, KernelError> {
        let mut kernel = Kernel::new();
        let ports = bind_ports(design, &mut kernel, "")?;
        design.elaborate(&mut kernel, &ports)?;
        Ok(NativeBench { kernel, ports })
    }

    pub fn set(&mut self, port: &str, v: RtlValue) -> Result<(), KernelError> {
        let id = self.ports.get(port)?;
        self.kernel.write_signal(id, v)
    }

    pub fn get(&self, port: &str) -> Result<RtlValue, KernelError> {
        self.kernel.read_signal(self.ports.get(port)?)
    }

    pub fn run(&mut self, d: Duration) -> Result<RunOutcome, KernelError> {
        self.kernel.run_for(d)
    }
}

pub type Factory = fn(&Params) -> Result<Arc<dyn Design>, DesignError>;

/// Maps registry keys to design constructors.
#[derive(Clone)]
pub struct DesignRegistry {
    factories: BTreeMap<String, Factory>,
}

impl fmt::Debug for DesignRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

impl Default for DesignRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl DesignRegistry {
    pub fn empty() -> Self {
        DesignRegistry {
            factories: BTreeMap::new(),
        }
    }

    /// Registry holding `alu`, `crc`, `i2c`, `delta_sigma` and `sine_stim`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("alu", crate::designs::alu::factory);
        r.register("crc", crate::designs::crc::factory);
        r.register("i2c", crate::designs::i2c::factory);
        r.register("delta_sigma", crate::designs::delta_sigma::factory);
        r.register("sine_stim", crate::designs::sine::factory);
        r
    }

    pub fn register(&mut self, key: &str, factory: Factory) {
        self.factories.insert(key.to_string(), factory);
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.factories.contains_key(key)
    }

    pub fn create(&self, key: &str, params: &Params) -> Result<Arc<dyn Design>, DesignError> {
        let f = self
            .factories
            .get(key)
            .ok_or_else(|| DesignError::UnknownModel(key.to_string()))?;
        f(params)
    }
}

fn bad(name: &str, message: impl Into<String>) -> DesignError {
    DesignError::BadParam {
        name: name.to_string(),
        message: message.into(),
    }
}

pub(crate) fn param_u64(params: &Params, name: &str, default: u64) -> Result<u64, DesignError> {
    match params.get(name) {
        None => Ok(default),
        Some(v) => v.as_u64().ok_or_else(|| bad(name, "expected a non-negative integer")),
    }
}

/// Clock period from `clock_period_us`.
pub(crate) fn param_period(params: &Params, default_us: u64) -> Result<Duration, DesignError> {
    let us = param_u64(params, "clock_period_us", default_us)?;
    if us == 0 {
        return Err(bad("clock_period_us", "must be positive"));
    }
    Ok(Duration::from_us(us))
}

pub(crate) fn reject_unknown(params: &Params, known: &[&str]) -> Result<(), DesignError> {
    match params.keys().find(|k| !known.contains(&k.as_str())) {
        Some(k) => Err(bad(k, format!("unknown parameter (expected one of: {})", known.join(", ")))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_sources_match_declared_ports() {
        let reg = DesignRegistry::builtin();
        let keys: Vec<_> = reg.keys().map(String::from).collect();
        assert_eq!(keys, ["alu", "crc", "delta_sigma", "i2c", "sine_stim"]);
        for key in keys {
            let d = reg.create(&key, &Params::new()).unwrap();
            let mut parsed = d.parse_source().unwrap();
            parsed.source_file = d.interface().source_file;
            assert_eq!(parsed, d.interface(), "{key}");
        }
    }

    #[test]
    fn unknown_key_and_params() {
        let reg = DesignRegistry::builtin();
        assert_eq!(
            reg.create("riscv99", &Params::new()).unwrap_err(),
            DesignError::UnknownModel("riscv99".into())
        );
        let mut p = Params::new();
        p.insert("colour".into(), serde_yaml::Value::from(3));
        assert!(matches!(reg.create("alu", &p), Err(DesignError::BadParam { .. })));
    }

    #[test]
    fn clock_ports_become_kernel_clocks() {
        let reg = DesignRegistry::builtin();
        let d = reg.create("crc", &Params::new()).unwrap();
        let mut bench = NativeBench::new(d.as_ref()).unwrap();
        assert_eq!(bench.get("clock").unwrap(), RtlValue::Logic(false));
        bench.run(Duration::from_us(600)).unwrap();
        assert_eq!(bench.get("clock").unwrap(), RtlValue::Logic(true));
    }
}
