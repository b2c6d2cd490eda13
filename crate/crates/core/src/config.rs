//! YAML project configuration.
//!
//! ```yaml
//! sources: [alu.h]            # required, relative to this file
//! top_module: alu             # required
//! model_name: alu             # default: top_module
//! registry_key: alu           # default: top_module
//! params: {}                  # design construction parameters
//! step_size_ms: 1             # default 1
//! stop_time_ms: 100           # default 100
//! start_values: {a: 9}        # default: zeros
//! interrupts:
//!   - {signal: nack, edge: rising, mode: async_monitor, isr: log}
//! intermediate_update: {from_ms: 0, to_ms: 50, fine_step_ms: 1}
//! output_dir: ./build_fmu     # default, relative to this file
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parser::{parse_interface, Direction, ModuleInterface, ParseError};
use crate::time::{Duration, SimTime};
use crate::types::{map_rtl_to_fmi, FmiValue};

/// Design construction parameters, kept sorted for reproducible output.
pub type Params = BTreeMap<String, serde_yaml::Value>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("unknown port `{name}`{}", hint.as_ref().map(|h| format!(" (did you mean `{h}`?)")).unwrap_or_default())]
    UnknownPort { name: String, hint: Option<String> },
    #[error("malformed YAML: {0}")]
    Yaml(String),
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

impl ConfigError {
    fn invalid(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterruptEdge {
    Rising,
    Falling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterruptMode {
    /// Spawned kernel process that pauses the step at the exact edge.
    AsyncMonitor,
    /// Level check on the signal after every completed step.
    PostStepPoll,
}

/// What a master-side interrupt service routine does.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IsrRepr", into = "IsrRepr")]
pub enum IsrAction {
    /// Only record the invocation.
    Log,
    /// Write an input variable while in event mode.
    Set { variable: String, value: serde_yaml::Value },
}

// serde_yaml 0.9 wants `!tags` for externally tagged enums; accept plain
// `log` and `{set: {...}}` instead.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum IsrRepr {
    Word(String),
    Set { set: SetRepr },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetRepr {
    variable: String,
    value: serde_yaml::Value,
}

impl TryFrom<IsrRepr> for IsrAction {
    type Error = String;
    fn try_from(r: IsrRepr) -> Result<Self, String> {
        match r {
            IsrRepr::Word(w) if w == "log" => Ok(IsrAction::Log),
            IsrRepr::Word(w) => Err(format!("unknown isr action `{w}`")),
            IsrRepr::Set { set } => Ok(IsrAction::Set {
                variable: set.variable,
                value: set.value,
            }),
        }
    }
}

impl From<IsrAction> for IsrRepr {
    fn from(a: IsrAction) -> Self {
        match a {
            IsrAction::Log => IsrRepr::Word("log".into()),
            IsrAction::Set { variable, value } => IsrRepr::Set {
                set: SetRepr { variable, value },
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterruptSpec {
    pub signal: String,
    pub edge: InterruptEdge,
    pub mode: InterruptMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isr: Option<IsrAction>,
}

/// Window in which a communication step is subdivided into fine steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntermediateUpdate {
    pub window_start: SimTime,
    pub window_end: SimTime,
    pub fine_step: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntermediateUpdateYaml {
    pub from_ms: f64,
    pub to_ms: f64,
    pub fine_step_ms: f64,
}

impl IntermediateUpdateYaml {
    pub fn resolve(&self) -> Result<IntermediateUpdate, ConfigError> {
        let key = "intermediate_update";
        let ms = |v: f64, what: &str| {
            Duration::from_ms_f64(v).ok_or_else(|| ConfigError::invalid(key, format!("{what} must be a non-negative time")))
        };
        let from = ms(self.from_ms, "from_ms")?;
        let to = ms(self.to_ms, "to_ms")?;
        let fine = ms(self.fine_step_ms, "fine_step_ms")?;
        if to <= from {
            return Err(ConfigError::invalid(key, "to_ms must be greater than from_ms"));
        }
        if fine.is_zero() {
            return Err(ConfigError::invalid(key, "fine_step_ms must be positive"));
        }
        Ok(IntermediateUpdate {
            window_start: SimTime(from.ticks()),
            window_end: SimTime(to.ticks()),
            fine_step: fine,
        })
    }
}

impl From<IntermediateUpdate> for IntermediateUpdateYaml {
    fn from(u: IntermediateUpdate) -> Self {
        let ms = |ps: u64| ps as f64 / crate::time::PS_PER_MS as f64;
        IntermediateUpdateYaml {
            from_ms: ms(u.window_start.ticks()),
            to_ms: ms(u.window_end.ticks()),
            fine_step_ms: ms(u.fine_step.ticks()),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    sources: Option<Vec<PathBuf>>,
    top_module: Option<String>,
    model_name: Option<String>,
    registry_key: Option<String>,
    #[serde(default)]
    params: Params,
    step_size_ms: Option<f64>,
    stop_time_ms: Option<f64>,
    #[serde(default)]
    start_values: BTreeMap<String, serde_yaml::Value>,
    #[serde(default)]
    interrupts: Vec<InterruptSpec>,
    intermediate_update: Option<IntermediateUpdateYaml>,
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectConfig {
    pub sources: Vec<PathBuf>,
    pub top_module: String,
    pub model_name: String,
    pub registry_key: String,
    pub params: Params,
    pub step_size: Duration,
    pub stop_time: Duration,
    pub start_values: BTreeMap<String, FmiValue>,
    pub interrupts: Vec<InterruptSpec>,
    pub intermediate_update: Option<IntermediateUpdate>,
    pub output_dir: PathBuf,
    /// Interface of `top_module`, parsed while validating.
    pub interface: ModuleInterface,
}

/// Renders a YAML scalar as text for typed parsing.
pub fn scalar_text(v: &serde_yaml::Value) -> Option<String> {
    match v {
        serde_yaml::Value::Bool(b) => Some(b.to_string()),
        serde_yaml::Value::Number(n) => Some(n.to_string()),
        serde_yaml::Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

/// Closest port name for "did you mean" hints.
pub fn suggest<'a>(name: &str, candidates: impl IntoIterator<Item = &'a str>) -> Option<String> {
    candidates
        .into_iter()
        .map(|c| (strsim::levenshtein(name, c), c))
        .filter(|(d, _)| *d <= 2)
        .min()
        .map(|(_, c)| c.to_string())
}

fn unknown_port(name: &str, iface: &ModuleInterface) -> ConfigError {
    ConfigError::UnknownPort {
        name: name.to_string(),
        hint: suggest(name, iface.ports.iter().map(|p| p.name.as_str())),
    }
}

/// Reads the sources and extracts the top module interface.
fn interface_from_sources(sources: &[PathBuf], top: &str) -> Result<ModuleInterface, ConfigError> {
    let mut last = ParseError::ModuleNotFound(top.to_string());
    for path in sources {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.clone(),
            message: e.to_string(),
        })?;
        match parse_interface(&text, top) {
            Ok(mut iface) => {
                iface.source_file = path.clone();
                return Ok(iface);
            }
            Err(ParseError::ModuleNotFound(_)) => continue,
            Err(e) => last = e,
        }
    }
    Err(ConfigError::Parse(last))
}

/// Loads and validates a project configuration. Relative paths resolve
/// against the directory holding the config file.
pub fn load_config(path: &Path) -> Result<ProjectConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config(&text, &base)
}

pub fn parse_config(text: &str, base_dir: &Path) -> Result<ProjectConfig, ConfigError> {
    let raw: RawConfig = serde_yaml::from_str(text).map_err(|e| ConfigError::Yaml(e.to_string()))?;
    let sources = raw.sources.ok_or_else(|| ConfigError::MissingKey("sources".into()))?;
    if sources.is_empty() {
        return Err(ConfigError::invalid("sources", "at least one source file is required"));
    }
    let sources: Vec<PathBuf> = sources.into_iter().map(|p| base_dir.join(p)).collect();
    let top_module = raw.top_module.ok_or_else(|| ConfigError::MissingKey("top_module".into()))?;

    let step_size = Duration::from_ms_f64(raw.step_size_ms.unwrap_or(1.0))
        .ok_or_else(|| ConfigError::invalid("step_size_ms", "must be a non-negative time"))?;
    let stop_time = Duration::from_ms_f64(raw.stop_time_ms.unwrap_or(100.0))
        .ok_or_else(|| ConfigError::invalid("stop_time_ms", "must be a non-negative time"))?;
    if step_size.is_zero() {
        return Err(ConfigError::invalid("step_size_ms", "must be positive"));
    }
    if stop_time < step_size {
        return Err(ConfigError::invalid("stop_time_ms", "must be at least step_size_ms"));
    }
    let intermediate_update = raw.intermediate_update.as_ref().map(|u| u.resolve()).transpose()?;
    if let Some(u) = &intermediate_update {
        if u.fine_step >= step_size {
            return Err(ConfigError::invalid(
                "intermediate_update",
                "fine_step_ms must be smaller than step_size_ms",
            ));
        }
    }

    let interface = interface_from_sources(&sources, &top_module)?;

    for irq in &raw.interrupts {
        if interface.port(&irq.signal).is_none() {
            return Err(unknown_port(&irq.signal, &interface));
        }
        if let Some(IsrAction::Set { variable, value }) = &irq.isr {
            check_input_value(&interface, variable, value)?;
        }
    }
    let mut start_values = BTreeMap::new();
    for (name, value) in &raw.start_values {
        start_values.insert(name.clone(), check_input_value(&interface, name, value)?);
    }

    Ok(ProjectConfig {
        sources,
        model_name: raw.model_name.unwrap_or_else(|| top_module.clone()),
        registry_key: raw.registry_key.unwrap_or_else(|| top_module.clone()),
        top_module,
        params: raw.params,
        step_size,
        stop_time,
        start_values,
        interrupts: raw.interrupts,
        intermediate_update,
        output_dir: base_dir.join(raw.output_dir.unwrap_or_else(|| PathBuf::from("build_fmu"))),
        interface,
    })
}

/// Converts a YAML scalar into the FMI value of input port `name`.
fn check_input_value(
    iface: &ModuleInterface,
    name: &str,
    value: &serde_yaml::Value,
) -> Result<FmiValue, ConfigError> {
    let port = iface.port(name).ok_or_else(|| unknown_port(name, iface))?;
    if port.direction != Direction::In {
        return Err(ConfigError::invalid(name, "only input ports take values"));
    }
    let ty = map_rtl_to_fmi(port.rtl_type).map_err(|e| ConfigError::invalid(name, e.to_string()))?;
    let text = scalar_text(value).ok_or_else(|| ConfigError::invalid(name, "expected a scalar"))?;
    let v = FmiValue::parse_text(ty, &text).map_err(|e| ConfigError::invalid(name, e.to_string()))?;
    crate::types::fmi_to_rtl(&v, port.rtl_type).map_err(|e| ConfigError::invalid(name, e.to_string()))?;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SRC: &str = "SC_MODULE(i2c) { sc_in_clk clock; sc_in<bool> start; sc_in<sc_uint<7>> addr; sc_out<bool> nack; };";

    fn dir() -> tempfile::TempDir {
        let d = tempfile::tempdir().unwrap();
        fs::write(d.path().join("i2c.h"), SRC).unwrap();
        d
    }

    #[test]
    fn minimal_defaults() {
        let d = dir();
        let cfg = parse_config("sources: [i2c.h]\ntop_module: i2c\n", d.path()).unwrap();
        assert_eq!(cfg.step_size, Duration::from_ms(1));
        assert_eq!(cfg.stop_time, Duration::from_ms(100));
        assert_eq!(cfg.model_name, "i2c");
        assert_eq!(cfg.registry_key, "i2c");
        assert!(cfg.start_values.is_empty());
        assert_eq!(cfg.output_dir, d.path().join("build_fmu"));
        assert_eq!(cfg.interface.ports.len(), 4);
    }

    #[test]
    fn missing_keys() {
        let d = dir();
        assert_eq!(
            parse_config("top_module: i2c\n", d.path()).unwrap_err(),
            ConfigError::MissingKey("sources".into())
        );
        assert_eq!(
            parse_config("sources: [i2c.h]\n", d.path()).unwrap_err(),
            ConfigError::MissingKey("top_module".into())
        );
    }

    #[test]
    fn step_constraints() {
        let d = dir();
        let base = "sources: [i2c.h]\ntop_module: i2c\n";
        let bad = [
            "step_size_ms: 0\n",
            "step_size_ms: 10\nstop_time_ms: 5\n",
            "intermediate_update: {from_ms: 0, to_ms: 10, fine_step_ms: 1}\n",
            "step_size_ms: 5\nintermediate_update: {from_ms: 3, to_ms: 2, fine_step_ms: 1}\n",
        ];
        for extra in bad {
            assert!(
                matches!(parse_config(&format!("{base}{extra}"), d.path()), Err(ConfigError::Invalid { .. })),
                "{extra}"
            );
        }
        let ok = parse_config(
            &format!("{base}step_size_ms: 15\nintermediate_update: {{from_ms: 0, to_ms: 30, fine_step_ms: 1}}\n"),
            d.path(),
        )
        .unwrap();
        assert_eq!(ok.intermediate_update.unwrap().fine_step, Duration::from_ms(1));
    }

    #[test]
    fn interrupt_on_unknown_port_hints() {
        let d = dir();
        let text = "sources: [i2c.h]\ntop_module: i2c\ninterrupts:\n  - {signal: nackk, edge: rising, mode: async_monitor}\n";
        assert_eq!(
            parse_config(text, d.path()).unwrap_err(),
            ConfigError::UnknownPort {
                name: "nackk".into(),
                hint: Some("nack".into())
            }
        );
        let msg = parse_config(text, d.path()).unwrap_err().to_string();
        assert!(msg.contains("did you mean `nack`"), "{msg}");
    }

    #[test]
    fn start_values_and_isr_actions() {
        let d = dir();
        let text = "sources: [i2c.h]\ntop_module: i2c\nstart_values: {addr: 42, start: 1}\ninterrupts:\n  - signal: nack\n    edge: rising\n    mode: post_step_poll\n    isr: {set: {variable: start, value: 0}}\n";
        let cfg = parse_config(text, d.path()).unwrap();
        assert_eq!(cfg.start_values["addr"], FmiValue::UInt8(42));
        assert_eq!(cfg.start_values["start"], FmiValue::Bool(true));
        assert_eq!(cfg.interrupts[0].mode, InterruptMode::PostStepPoll);
        let bad = "sources: [i2c.h]\ntop_module: i2c\nstart_values: {addr: 200}\n";
        assert!(matches!(parse_config(bad, d.path()), Err(ConfigError::Invalid { .. })));
        let out = "sources: [i2c.h]\ntop_module: i2c\nstart_values: {nack: 1}\n";
        assert!(matches!(parse_config(out, d.path()), Err(ConfigError::Invalid { .. })));
    }

    #[test]
    fn bad_top_module_is_a_parse_error() {
        let d = dir();
        assert_eq!(
            parse_config("sources: [i2c.h]\ntop_module: spi\n", d.path()).unwrap_err(),
            ConfigError::Parse(ParseError::ModuleNotFound("spi".into()))
        );
    }

    #[test]
    fn unknown_keys_rejected() {
        let d = dir();
        assert!(matches!(
            parse_config("sources: [i2c.h]\ntop_module: i2c\nstep: 3\n", d.path()),
            Err(ConfigError::Yaml(_))
        ));
    }
}
