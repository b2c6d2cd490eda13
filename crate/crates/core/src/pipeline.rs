//! End-to-end flows: config → archive, archive → trace, plan → trace.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::config::{load_config, ConfigError, IntermediateUpdateYaml, IsrAction, ProjectConfig};
use crate::descriptor::{build_descriptor, DescriptorError};
use crate::design::DesignRegistry;
use crate::master::{isr_from_action, Master, MasterError};
use crate::package::{load, package, FmuArchive, ModelResources, PackageError};
use crate::slave::{SlaveError, SlaveInstance};
use crate::time::{Duration, SimTime};
use crate::trace::TraceTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Parse,
    Descriptor,
    Package,
    Load,
    Plan,
    Simulate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Parse => "parse",
            Stage::Descriptor => "descriptor",
            Stage::Package => "package",
            Stage::Load => "load",
            Stage::Plan => "plan",
            Stage::Simulate => "simulate",
        })
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("[{stage}] {source}")]
    Config {
        stage: Stage,
        #[source]
        source: ConfigError,
    },
    #[error("[descriptor] {0}")]
    Descriptor(#[from] DescriptorError),
    #[error("[{stage}] {source}")]
    Package {
        stage: Stage,
        #[source]
        source: PackageError,
    },
    #[error("[plan] {0}")]
    Plan(String),
    #[error("[{stage}] {0}", stage = master_stage(.0))]
    Master(#[from] MasterError),
    #[error("[simulate] {0}")]
    Slave(#[from] SlaveError),
    #[error("[{stage}] {}: {message}", path.display())]
    Io { stage: Stage, path: PathBuf, message: String },
}

fn master_stage(e: &MasterError) -> Stage {
    match e {
        MasterError::Plan(_) => Stage::Plan,
        MasterError::Slave { .. } => Stage::Simulate,
    }
}

/// Coarse failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Io,
    Validation,
    Runtime,
}

impl PipelineError {
    pub fn stage(&self) -> Stage {
        match self {
            PipelineError::Config { stage, .. } | PipelineError::Package { stage, .. } | PipelineError::Io { stage, .. } => {
                *stage
            }
            PipelineError::Descriptor(_) => Stage::Descriptor,
            PipelineError::Plan(_) => Stage::Plan,
            PipelineError::Master(e) => master_stage(e),
            PipelineError::Slave(_) => Stage::Simulate,
        }
    }

    pub fn kind(&self) -> FailureKind {
        match self {
            PipelineError::Io { .. }
            | PipelineError::Config {
                source: ConfigError::Io { .. },
                ..
            }
            | PipelineError::Package {
                source: PackageError::Io { .. },
                ..
            } => FailureKind::Io,
            PipelineError::Master(MasterError::Slave { .. }) | PipelineError::Slave(_) => FailureKind::Runtime,
            _ => FailureKind::Validation,
        }
    }
}

fn config_err(e: ConfigError) -> PipelineError {
    let stage = match e {
        ConfigError::Parse(_) => Stage::Parse,
        _ => Stage::Config,
    };
    PipelineError::Config { stage, source: e }
}

fn package_err(stage: Stage) -> impl Fn(PackageError) -> PipelineError {
    move |source| PipelineError::Package { stage, source }
}

pub fn load_project(config_path: &Path) -> Result<ProjectConfig, PipelineError> {
    load_config(config_path).map_err(config_err)
}

/// Archive resources derived from a project config.
pub fn model_resources(cfg: &ProjectConfig) -> ModelResources {
    ModelResources {
        registry_key: cfg.registry_key.clone(),
        params: cfg.params.clone(),
        interrupts: cfg.interrupts.clone(),
        intermediate_update: cfg.intermediate_update.map(IntermediateUpdateYaml::from),
    }
}

pub fn fmu_path(cfg: &ProjectConfig) -> PathBuf {
    cfg.output_dir.join(format!("{}.fmu", cfg.model_name))
}

/// parse → descriptor → glue → package. Returns the archive path.
pub fn build(config_path: &Path) -> Result<PathBuf, PipelineError> {
    let cfg = load_project(config_path)?;
    build_from_config(&cfg)
}

pub fn build_from_config(cfg: &ProjectConfig) -> Result<PathBuf, PipelineError> {
    let d = build_descriptor(&cfg.interface, cfg)?;
    package(&d, &model_resources(cfg), &fmu_path(cfg)).map_err(package_err(Stage::Package))
}

pub fn load_fmu(path: &Path, registry: &DesignRegistry) -> Result<FmuArchive, PipelineError> {
    load(path, registry).map_err(package_err(Stage::Load))
}

fn register_isrs(master: &mut Master, instance: &str, cfg: &ProjectConfig) -> Result<(), PipelineError> {
    for irq in &cfg.interrupts {
        let action = irq.isr.clone().unwrap_or(IsrAction::Log);
        master.on_interrupt(instance, &irq.signal, isr_from_action(action))?;
    }
    Ok(())
}

/// Runs one archive under the step/stop/start values of `cfg`.
pub fn simulate(archive: &FmuArchive, cfg: &ProjectConfig) -> Result<TraceTable, PipelineError> {
    let name = cfg.model_name.clone();
    let mut slave = SlaveInstance::instantiate(archive, &name)?;
    slave.enter_initialization(SimTime::ZERO)?;
    for (var, v) in &cfg.start_values {
        slave.set_by_name(var, v)?;
    }
    let mut master = Master::new(cfg.step_size, cfg.stop_time)?;
    master.add_instance(slave)?;
    master.trace_all();
    register_isrs(&mut master, &name, cfg)?;
    Ok(master.run()?)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConnection {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanIsr {
    pub instance: String,
    pub signal: String,
    #[serde(default = "default_action")]
    pub action: IsrAction,
}

fn default_action() -> IsrAction {
    IsrAction::Log
}

/// Multi-archive co-simulation plan.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosimPlan {
    /// Instance name → archive path (relative to the plan file).
    pub instances: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub connections: Vec<PlanConnection>,
    #[serde(default = "one")]
    pub step_ms: f64,
    #[serde(default = "hundred")]
    pub stop_ms: f64,
    #[serde(default)]
    pub isr: Vec<PlanIsr>,
    /// Variables to record; all of them if empty.
    #[serde(default)]
    pub trace: Vec<String>,
    /// Registration order; defaults to the sorted instance names.
    #[serde(default)]
    pub order: Vec<String>,
}

fn one() -> f64 {
    1.0
}

fn hundred() -> f64 {
    100.0
}

pub fn load_plan(path: &Path) -> Result<(CosimPlan, PathBuf), PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::Io {
        stage: Stage::Plan,
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let plan: CosimPlan = serde_yaml::from_str(&text).map_err(|e| PipelineError::Plan(e.to_string()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((plan, base))
}

/// Instantiates every archive of `plan` and wires the master.
pub fn prepare_cosim(plan: &CosimPlan, base_dir: &Path, registry: &DesignRegistry) -> Result<Master, PipelineError> {
    let ms = |v: f64, key: &str| Duration::from_ms_f64(v).ok_or_else(|| PipelineError::Plan(format!("bad {key}")));
    let mut master = Master::new(ms(plan.step_ms, "step_ms")?, ms(plan.stop_ms, "stop_ms")?)?;
    let order: Vec<&String> = if plan.order.is_empty() {
        plan.instances.keys().collect()
    } else {
        if plan.order.len() != plan.instances.len() || plan.order.iter().any(|n| !plan.instances.contains_key(n)) {
            return Err(PipelineError::Plan("`order` must list every instance exactly once".into()));
        }
        plan.order.iter().collect()
    };
    for name in order {
        let archive = load_fmu(&base_dir.join(&plan.instances[name]), registry)?;
        master.add_instance(SlaveInstance::instantiate(&archive, name)?)?;
    }
    for c in &plan.connections {
        master.connect(&c.from, &c.to)?;
    }
    for h in &plan.isr {
        master.on_interrupt(&h.instance, &h.signal, isr_from_action(h.action.clone()))?;
    }
    if plan.trace.is_empty() {
        master.trace_all();
    } else {
        for v in &plan.trace {
            master.trace(v)?;
        }
    }
    Ok(master)
}

pub fn cosim(plan_path: &Path, registry: &DesignRegistry) -> Result<TraceTable, PipelineError> {
    let (plan, base) = load_plan(plan_path)?;
    let mut master = prepare_cosim(&plan, &base, registry)?;
    Ok(master.run()?)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| PipelineError::Io {
            stage: Stage::Simulate,
            path: dir.to_path_buf(),
            message: e.to_string(),
        })?;
    }
    fs::write(path, text).map_err(|e| PipelineError::Io {
        stage: Stage::Simulate,
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
