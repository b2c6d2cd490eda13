//! Co-simulation slave: one design instance behind the FMI 3.0 lifecycle.
//!
//! ```text
//! Instantiated --enter_initialization--> InitializationMode
//! InitializationMode --exit_initialization--> StepMode
//! StepMode --do_step: Done--> StepMode
//! StepMode --do_step: EventHalt--> EventMode
//! EventMode --exit_event_mode--> StepMode
//! any live state --terminate--> Terminated
//! ```
//!
//! `free_instance` drops the kernel from any state and may be called once.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::config::{IntermediateUpdate, InterruptEdge, InterruptMode};
use crate::descriptor::{Causality, ModelDescriptor};
use crate::design::bind_ports;
use crate::kernel::{Edge, Kernel, KernelError, RunOutcome, Sensitivity, SignalId};
use crate::package::{check_interface, FmuArchive, PackageError};
use crate::time::{Duration, SimTime};
use crate::types::{fmi_to_rtl, rtl_to_fmi, FmiType, FmiValue, RtlType, RtlValue, ValueError};

/// Prefix of the signals that bind FMI variables to design ports.
pub const BINDING_PREFIX: &str = "s_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlaveState {
    Instantiated,
    InitializationMode,
    StepMode,
    EventMode,
    Terminated,
}

impl fmt::Display for SlaveState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SlaveError {
    #[error("{op} is illegal in state {state}")]
    IllegalState { op: &'static str, state: SlaveState },
    #[error("instance has been freed")]
    Freed,
    #[error("unknown value reference {0}")]
    UnknownReference(u32),
    #[error("value reference {vr} is {expected}, got {found}")]
    TypeError { vr: u32, expected: FmiType, found: FmiType },
    #[error("causality: {0}")]
    CausalityError(String),
    #[error(transparent)]
    Range(#[from] ValueError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("interface mismatch: {0}")]
    InterfaceMismatch(String),
    #[error("kernel: {0}")]
    Kernel(#[from] KernelError),
}

impl SlaveError {
    /// True for every error raised because the state machine forbids the call.
    pub fn is_state_error(&self) -> bool {
        matches!(self, SlaveError::IllegalState { .. } | SlaveError::Freed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepResult {
    Done(SimTime),
    EventHalt { at: SimTime, signal: String },
}

impl StepResult {
    pub fn time(&self) -> SimTime {
        match self {
            StepResult::Done(t) | StepResult::EventHalt { at: t, .. } => *t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingEvent {
    pub signal: String,
    pub at: SimTime,
    pub mode: InterruptMode,
}

#[derive(Debug, Clone)]
struct Binding {
    vr: u32,
    name: String,
    signal: SignalId,
    rtl_type: RtlType,
    fmi_type: FmiType,
    causality: Causality,
    clock: bool,
    start: Option<RtlValue>,
}

#[derive(Debug, Clone)]
struct Rule {
    signal_name: String,
    signal: SignalId,
    edge: InterruptEdge,
}

struct Core {
    kernel: Kernel,
    bindings: Vec<Binding>,
    monitors: Vec<Rule>,
    polls: Vec<Rule>,
}

pub type IntermediateCallback = Box<dyn FnMut(SimTime) + Send>;

pub struct SlaveInstance {
    name: String,
    descriptor: ModelDescriptor,
    state: SlaveState,
    core: Option<Core>,
    now: SimTime,
    pending: Option<PendingEvent>,
    event_entered: bool,
    queue: VecDeque<PendingEvent>,
    intermediate: Option<IntermediateUpdate>,
    callback: Option<IntermediateCallback>,
    intermediate_count: u64,
}

impl fmt::Debug for SlaveInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SlaveInstance")
            .field("name", &self.name)
            .field("state", &self.state)
            .field("now", &self.now)
            .field("freed", &self.core.is_none())
            .finish()
    }
}

impl SlaveInstance {
    pub fn instantiate(archive: &FmuArchive, instance_name: &str) -> Result<Self, SlaveError> {
        if instance_name.is_empty() {
            return Err(SlaveError::InvalidArgument("instance name must not be empty".into()));
        }
        let design = archive.design.as_ref();
        check_interface(&archive.descriptor, design).map_err(|e| match e {
            PackageError::InterfaceMismatch(m) => SlaveError::InterfaceMismatch(m),
            e => SlaveError::InvalidArgument(e.to_string()),
        })?;
        let mut kernel = Kernel::new();
        let ports = bind_ports(design, &mut kernel, BINDING_PREFIX)?;
        design.elaborate(&mut kernel, &ports)?;

        let decls = design.ports();
        let mut bindings = Vec::with_capacity(archive.descriptor.variables.len());
        for v in &archive.descriptor.variables {
            let decl = decls
                .iter()
                .find(|p| p.spec.name == v.name)
                .expect("interface checked above");
            let start = match &v.start {
                Some(s) if decl.clock.is_none() => Some(fmi_to_rtl(s, decl.spec.rtl_type)?),
                _ => None,
            };
            bindings.push(Binding {
                vr: v.value_reference,
                name: v.name.clone(),
                signal: ports.get(&v.name)?,
                rtl_type: decl.spec.rtl_type,
                fmi_type: v.fmi_type,
                causality: v.causality,
                clock: decl.clock.is_some(),
                start,
            });
        }

        let mut monitors = Vec::new();
        let mut polls = Vec::new();
        for irq in &archive.model.interrupts {
            let rule = Rule {
                signal_name: irq.signal.clone(),
                signal: ports.get(&irq.signal)?,
                edge: irq.edge,
            };
            match irq.mode {
                InterruptMode::AsyncMonitor => {
                    let tag = monitors.len() as u64;
                    let edge = match irq.edge {
                        InterruptEdge::Rising => Edge::Rising,
                        InterruptEdge::Falling => Edge::Falling,
                    };
                    kernel.spawn_process(
                        Box::new(move |act| {
                            act.notify(tag);
                            act.request_pause();
                        }),
                        Sensitivity::new().on(rule.signal, edge),
                    )?;
                    monitors.push(rule);
                }
                InterruptMode::PostStepPoll => polls.push(rule),
            }
        }
        let intermediate = archive
            .model
            .intermediate_update
            .as_ref()
            .map(|u| u.resolve())
            .transpose()
            .map_err(|e| SlaveError::InvalidArgument(e.to_string()))?;

        Ok(SlaveInstance {
            name: instance_name.to_string(),
            descriptor: archive.descriptor.clone(),
            state: SlaveState::Instantiated,
            core: Some(Core {
                kernel,
                bindings,
                monitors,
                polls,
            }),
            now: SimTime::ZERO,
            pending: None,
            event_entered: false,
            queue: VecDeque::new(),
            intermediate,
            callback: None,
            intermediate_count: 0,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state(&self) -> SlaveState {
        self.state
    }

    pub fn is_freed(&self) -> bool {
        self.core.is_none()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn descriptor(&self) -> &ModelDescriptor {
        &self.descriptor
    }

    pub fn vr(&self, name: &str) -> Option<u32> {
        self.descriptor.variable(name).map(|v| v.value_reference)
    }

    pub fn pending_event(&self) -> Option<&PendingEvent> {
        self.pending.as_ref()
    }

    /// Names of the binding signals, in value-reference order.
    pub fn binding_names(&self) -> Vec<String> {
        match &self.core {
            Some(c) => c
                .bindings
                .iter()
                .map(|b| c.kernel.signal_name(b.signal).unwrap_or_default().to_string())
                .collect(),
            None => Vec::new(),
        }
    }

    /// Read-only access to the underlying kernel, e.g. for internal signals.
    pub fn kernel(&self) -> Option<&Kernel> {
        self.core.as_ref().map(|c| &c.kernel)
    }

    pub fn intermediate_update(&self) -> Option<IntermediateUpdate> {
        self.intermediate
    }

    pub fn set_intermediate_update(&mut self, u: Option<IntermediateUpdate>) {
        self.intermediate = u;
    }

    /// Called with the current time after every sub-step inside the
    /// intermediate-update window.
    pub fn set_intermediate_callback(&mut self, cb: Option<IntermediateCallback>) {
        self.callback = cb;
    }

    pub fn intermediate_count(&self) -> u64 {
        self.intermediate_count
    }

    fn core(&mut self) -> Result<&mut Core, SlaveError> {
        self.core.as_mut().ok_or(SlaveError::Freed)
    }

    fn expect(&self, op: &'static str, allowed: &[SlaveState]) -> Result<(), SlaveError> {
        if self.core.is_none() {
            return Err(SlaveError::Freed);
        }
        if allowed.contains(&self.state) {
            Ok(())
        } else {
            Err(SlaveError::IllegalState { op, state: self.state })
        }
    }

    pub fn enter_initialization(&mut self, start_time: SimTime) -> Result<(), SlaveError> {
        self.expect("enter_initialization", &[SlaveState::Instantiated])?;
        if start_time != SimTime::ZERO {
            return Err(SlaveError::InvalidArgument("start time must be 0".into()));
        }
        let core = self.core()?;
        for b in &core.bindings {
            if let Some(v) = &b.start {
                core.kernel.write_signal(b.signal, v.clone())?;
            }
        }
        core.kernel.run_for(Duration::ZERO)?;
        self.state = SlaveState::InitializationMode;
        Ok(())
    }

    pub fn exit_initialization(&mut self) -> Result<(), SlaveError> {
        self.expect("exit_initialization", &[SlaveState::InitializationMode])?;
        self.core()?.kernel.run_for(Duration::ZERO)?;
        self.state = SlaveState::StepMode;
        Ok(())
    }

    fn binding(&self, vr: u32) -> Result<&Binding, SlaveError> {
        self.core
            .as_ref()
            .ok_or(SlaveError::Freed)?
            .bindings
            .iter()
            .find(|b| b.vr == vr)
            .ok_or(SlaveError::UnknownReference(vr))
    }

    const DATA_STATES: [SlaveState; 3] = [
        SlaveState::InitializationMode,
        SlaveState::StepMode,
        SlaveState::EventMode,
    ];

    pub fn set_value(&mut self, vr: u32, v: &FmiValue) -> Result<(), SlaveError> {
        self.expect("set_value", &Self::DATA_STATES)?;
        let b = self.binding(vr)?;
        if v.ty() != b.fmi_type {
            return Err(SlaveError::TypeError {
                vr,
                expected: b.fmi_type,
                found: v.ty(),
            });
        }
        if b.causality == Causality::Output {
            return Err(SlaveError::CausalityError(format!("`{}` is an output", b.name)));
        }
        if b.clock {
            return Err(SlaveError::CausalityError(format!("`{}` is driven by the internal clock", b.name)));
        }
        let rv = fmi_to_rtl(v, b.rtl_type)?;
        let sig = b.signal;
        self.core()?.kernel.write_signal(sig, rv)?;
        Ok(())
    }

    pub fn get_value(&self, vr: u32) -> Result<FmiValue, SlaveError> {
        self.expect("get_value", &Self::DATA_STATES)?;
        let b = self.binding(vr)?;
        let core = self.core.as_ref().ok_or(SlaveError::Freed)?;
        Ok(rtl_to_fmi(&core.kernel.read_signal(b.signal)?)?)
    }

    pub fn set_by_name(&mut self, name: &str, v: &FmiValue) -> Result<(), SlaveError> {
        let vr = self
            .vr(name)
            .ok_or_else(|| SlaveError::InvalidArgument(format!("no variable `{name}`")))?;
        self.set_value(vr, v)
    }

    pub fn get_by_name(&self, name: &str) -> Result<FmiValue, SlaveError> {
        let vr = self
            .vr(name)
            .ok_or_else(|| SlaveError::InvalidArgument(format!("no variable `{name}`")))?;
        self.get_value(vr)
    }

    /// Next sub-step boundary after `t` on the intermediate-update grid.
    fn next_cut(&self, t: SimTime, end: SimTime) -> (SimTime, bool) {
        let Some(w) = self.intermediate else {
            return (end, false);
        };
        let (ws, we, f) = (w.window_start.ticks(), w.window_end.ticks(), w.fine_step.ticks());
        let t = t.ticks();
        if t < ws {
            (SimTime(ws.min(end.ticks())), false)
        } else if t >= we {
            (end, false)
        } else {
            let k = (t - ws) / f + 1;
            let grid = ws.saturating_add(k.saturating_mul(f));
            (SimTime(grid.min(we).min(end.ticks())), true)
        }
    }

    fn halt(&mut self, ev: PendingEvent) -> StepResult {
        self.state = SlaveState::EventMode;
        self.event_entered = false;
        let r = StepResult::EventHalt {
            at: ev.at,
            signal: ev.signal.clone(),
        };
        self.pending = Some(ev);
        r
    }

    pub fn do_step(&mut self, step: Duration) -> Result<StepResult, SlaveError> {
        self.expect("do_step", &[SlaveState::StepMode])?;
        if step.is_zero() {
            return Err(SlaveError::InvalidArgument("step must be positive".into()));
        }
        if let Some(ev) = self.queue.pop_front() {
            return Ok(self.halt(ev));
        }
        let end = self
            .now
            .checked_add(step)
            .map_err(|e| SlaveError::Kernel(KernelError::Time(e)))?;
        while self.now < end {
            let (cut, in_window) = self.next_cut(self.now, end);
            let core = self.core.as_mut().ok_or(SlaveError::Freed)?;
            let outcome = core.kernel.run_for(cut.since(self.now))?;
            self.now = core.kernel.now();
            if let RunOutcome::Paused(t) = outcome {
                for n in core.kernel.drain_notifications() {
                    let rule = &core.monitors[n.tag as usize];
                    self.queue.push_back(PendingEvent {
                        signal: rule.signal_name.clone(),
                        at: t,
                        mode: InterruptMode::AsyncMonitor,
                    });
                }
                // an empty queue means a stale pause flag; keep going
                if let Some(ev) = self.queue.pop_front() {
                    return Ok(self.halt(ev));
                }
                continue;
            }
            if in_window {
                self.intermediate_count += 1;
                if let Some(cb) = self.callback.as_mut() {
                    cb(self.now);
                }
            }
        }
        let core = self.core.as_ref().ok_or(SlaveError::Freed)?;
        for rule in &core.polls {
            let level = core.kernel.read_signal(rule.signal)?.is_truthy();
            let hit = match rule.edge {
                InterruptEdge::Rising => level,
                InterruptEdge::Falling => !level,
            };
            if hit {
                self.queue.push_back(PendingEvent {
                    signal: rule.signal_name.clone(),
                    at: self.now,
                    mode: InterruptMode::PostStepPoll,
                });
            }
        }
        Ok(match self.queue.pop_front() {
            Some(ev) => self.halt(ev),
            None => StepResult::Done(self.now),
        })
    }

    pub fn enter_event_mode(&mut self) -> Result<(), SlaveError> {
        self.expect("enter_event_mode", &[SlaveState::EventMode])?;
        if self.pending.is_none() || self.event_entered {
            return Err(SlaveError::IllegalState {
                op: "enter_event_mode",
                state: self.state,
            });
        }
        self.event_entered = true;
        Ok(())
    }

    pub fn exit_event_mode(&mut self) -> Result<(), SlaveError> {
        self.expect("exit_event_mode", &[SlaveState::EventMode])?;
        if self.pending.take().is_none() {
            return Err(SlaveError::IllegalState {
                op: "exit_event_mode",
                state: self.state,
            });
        }
        self.event_entered = false;
        self.state = SlaveState::StepMode;
        Ok(())
    }

    /// Delivers an event queued behind the last `EventHalt` without
    /// advancing time. Returns `None` if nothing is queued.
    pub fn poll_event(&mut self) -> Result<Option<StepResult>, SlaveError> {
        self.expect("poll_event", &[SlaveState::StepMode])?;
        Ok(self.queue.pop_front().map(|ev| self.halt(ev)))
    }

    /// Events detected but not yet delivered through `do_step`.
    pub fn queued_events(&self) -> usize {
        self.queue.len()
    }

    pub fn terminate(&mut self) -> Result<(), SlaveError> {
        self.expect(
            "terminate",
            &[
                SlaveState::Instantiated,
                SlaveState::InitializationMode,
                SlaveState::StepMode,
                SlaveState::EventMode,
            ],
        )?;
        self.state = SlaveState::Terminated;
        self.pending = None;
        self.queue.clear();
        Ok(())
    }

    pub fn free_instance(&mut self) -> Result<(), SlaveError> {
        if self.core.take().is_none() {
            return Err(SlaveError::IllegalState {
                op: "free_instance",
                state: self.state,
            });
        }
        self.state = SlaveState::Terminated;
        self.pending = None;
        self.queue.clear();
        self.callback = None;
        Ok(())
    }
}
