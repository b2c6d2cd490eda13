//! Deterministic discrete-event kernel with delta cycles and two-phase
//! signal update.
//!
//! A run alternates evaluation and update phases. During evaluation every
//! runnable process executes once, reading the `current` value of signals and
//! writing into their `pending` slot. The update phase then promotes pending
//! values in signal-creation order and wakes processes sensitive to the
//! signals that actually changed. When no delta work is left, time advances
//! to the next timed event.
//!
//! `run_for(d)` executes timed events strictly before `now + d`, then settles
//! at the horizon. Events landing exactly on the horizon fire at the start of
//! the following run, so splitting a run at any point gives the same result
//! as a single run.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::time::{Duration, SimTime, TimeOverflow};
use crate::types::{RtlType, RtlValue, ValueError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("illegal state: {0}")]
    IllegalState(String),
    #[error("unknown signal {0}")]
    UnknownSignal(SignalId),
    #[error(transparent)]
    Value(#[from] ValueError),
    #[error(transparent)]
    Time(#[from] TimeOverflow),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignalId(u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProcessId(u32);

impl SignalId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ProcessId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for SignalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    /// Any value change.
    Change,
    /// Transition from zero to nonzero.
    Rising,
    /// Transition from nonzero to zero.
    Falling,
}

impl Edge {
    fn matches(self, old: bool, new: bool) -> bool {
        match self {
            Edge::Change => true,
            Edge::Rising => !old && new,
            Edge::Falling => old && !new,
        }
    }
}

/// What wakes a process: signal events and/or a one-shot timed trigger.
#[derive(Debug, Clone, Default)]
pub struct Sensitivity {
    signals: Vec<(SignalId, Edge)>,
    at: Option<SimTime>,
}

impl Sensitivity {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn on(mut self, signal: SignalId, edge: Edge) -> Self {
        self.signals.push((signal, edge));
        self
    }

    pub fn change(self, signal: SignalId) -> Self {
        self.on(signal, Edge::Change)
    }

    pub fn rising(self, signal: SignalId) -> Self {
        self.on(signal, Edge::Rising)
    }

    pub fn falling(self, signal: SignalId) -> Self {
        self.on(signal, Edge::Falling)
    }

    /// Wakes the process once at absolute time `t`.
    pub fn at(mut self, t: SimTime) -> Self {
        self.at = Some(t);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty() && self.at.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessKind {
    /// Registered before the first run (elaboration).
    Static,
    /// Created after simulation started.
    Spawned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelPhase {
    Idle,
    Running,
    Paused,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    Completed(SimTime),
    Paused(SimTime),
}

impl RunOutcome {
    pub fn time(self) -> SimTime {
        match self {
            RunOutcome::Completed(t) | RunOutcome::Paused(t) => t,
        }
    }
}

/// Tagged message emitted by a process through [`Activation::notify`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Notification {
    pub tag: u64,
    pub at: SimTime,
    pub process: ProcessId,
}

pub type ProcessBody = Box<dyn FnMut(&mut Activation<'_>) + Send>;

struct SignalSlot {
    name: String,
    ty: RtlType,
    current: RtlValue,
    pending: Option<RtlValue>,
    queued_for_update: bool,
    sensitive: Vec<(ProcessId, Edge)>,
}

struct ProcessSlot {
    kind: ProcessKind,
    body: Option<ProcessBody>,
    alive: bool,
    queued: bool,
    activations: u64,
    last_delta: u64,
}

#[derive(Debug)]
enum TimedAction {
    Toggle { signal: SignalId, low: Duration, high: Duration },
    Wake(ProcessId),
    Write(SignalId, RtlValue),
}

#[derive(Debug)]
struct TimedEntry {
    at: SimTime,
    seq: u64,
    action: TimedAction,
}

impl PartialEq for TimedEntry {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}
impl Eq for TimedEntry {}
impl PartialOrd for TimedEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for TimedEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

pub struct Kernel {
    signals: Vec<SignalSlot>,
    by_name: HashMap<String, SignalId>,
    processes: Vec<ProcessSlot>,
    timed: BinaryHeap<Reverse<TimedEntry>>,
    seq: u64,
    runnable: Vec<ProcessId>,
    update_list: Vec<SignalId>,
    now: SimTime,
    phase: KernelPhase,
    pause_requested: bool,
    started: bool,
    deltas: u64,
    notifications: Vec<Notification>,
}

impl Default for Kernel {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("now", &self.now)
            .field("phase", &self.phase)
            .field("signals", &self.signals.len())
            .field("processes", &self.processes.len())
            .field("deltas", &self.deltas)
            .finish()
    }
}

impl Kernel {
    pub fn new() -> Self {
        Kernel {
            signals: Vec::new(),
            by_name: HashMap::new(),
            processes: Vec::new(),
            timed: BinaryHeap::new(),
            seq: 0,
            runnable: Vec::new(),
            update_list: Vec::new(),
            now: SimTime::ZERO,
            phase: KernelPhase::Idle,
            pause_requested: false,
            started: false,
            deltas: 0,
            notifications: Vec::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn phase(&self) -> KernelPhase {
        self.phase
    }

    /// Number of completed delta cycles since creation.
    pub fn delta_count(&self) -> u64 {
        self.deltas
    }

    pub fn pause_requested(&self) -> bool {
        self.pause_requested
    }

    pub fn create_signal(
        &mut self,
        name: &str,
        ty: RtlType,
        init: RtlValue,
    ) -> Result<SignalId, KernelError> {
        ty.validate()?;
        init.check(ty)?;
        if self.by_name.contains_key(name) {
            return Err(KernelError::InvalidArgument(format!(
                "signal `{name}` already exists"
            )));
        }
        let id = SignalId(self.signals.len() as u32);
        self.signals.push(SignalSlot {
            name: name.to_string(),
            ty,
            current: init,
            pending: None,
            queued_for_update: false,
            sensitive: Vec::new(),
        });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    /// 50% duty clock: `start_high` for the first half period, then toggling
    /// every half period.
    pub fn create_clock(&mut self, period: Duration, start_high: bool) -> Result<SignalId, KernelError> {
        let name = format!("clock{}", self.signals.len());
        self.create_clock_named(&name, period, start_high)
    }

    pub fn create_clock_named(
        &mut self,
        name: &str,
        period: Duration,
        start_high: bool,
    ) -> Result<SignalId, KernelError> {
        if period.ticks() < 2 {
            return Err(KernelError::InvalidArgument(format!(
                "clock period must be at least 2 ps, got {} ps",
                period.ticks()
            )));
        }
        let id = self.create_signal(name, RtlType::Logic, RtlValue::Logic(start_high))?;
        let first = Duration(period.ticks() / 2);
        let other = Duration(period.ticks() - first.ticks());
        let (low, high) = if start_high { (other, first) } else { (first, other) };
        let at = self.now.checked_add(first)?;
        self.schedule(at, TimedAction::Toggle { signal: id, low, high });
        Ok(id)
    }

    pub fn signal_name(&self, id: SignalId) -> Result<&str, KernelError> {
        self.slot(id).map(|s| s.name.as_str())
    }

    pub fn signal_type(&self, id: SignalId) -> Result<RtlType, KernelError> {
        self.slot(id).map(|s| s.ty)
    }

    pub fn find_signal(&self, name: &str) -> Option<SignalId> {
        self.by_name.get(name).copied()
    }

    pub fn signal_count(&self) -> usize {
        self.signals.len()
    }

    /// Registers a process. Before the first run it is a static process;
    /// afterwards it is a spawned one that participates from the next delta.
    pub fn spawn_process(
        &mut self,
        body: ProcessBody,
        sensitivity: Sensitivity,
    ) -> Result<ProcessId, KernelError> {
        if sensitivity.is_empty() {
            return Err(KernelError::InvalidArgument(
                "process needs at least one signal or timed trigger".into(),
            ));
        }
        for (sig, _) in &sensitivity.signals {
            self.slot(*sig)?;
        }
        if let Some(t) = sensitivity.at {
            if t < self.now {
                return Err(KernelError::InvalidArgument(format!(
                    "timed trigger at {t} lies in the past (now {})",
                    self.now
                )));
            }
        }
        let pid = ProcessId(self.processes.len() as u32);
        self.processes.push(ProcessSlot {
            kind: if self.started { ProcessKind::Spawned } else { ProcessKind::Static },
            body: Some(body),
            alive: true,
            queued: false,
            activations: 0,
            last_delta: u64::MAX,
        });
        for (sig, edge) in sensitivity.signals {
            self.signals[sig.index()].sensitive.push((pid, edge));
        }
        if let Some(t) = sensitivity.at {
            self.schedule(t, TimedAction::Wake(pid));
        }
        Ok(pid)
    }

    /// Stops a process from ever activating again.
    pub fn kill_process(&mut self, pid: ProcessId) -> Result<(), KernelError> {
        let p = self
            .processes
            .get_mut(pid.index())
            .ok_or_else(|| KernelError::InvalidArgument(format!("unknown process {pid:?}")))?;
        p.alive = false;
        p.body = None;
        Ok(())
    }

    pub fn process_kind(&self, pid: ProcessId) -> Option<ProcessKind> {
        self.processes.get(pid.index()).map(|p| p.kind)
    }

    pub fn activation_count(&self, pid: ProcessId) -> u64 {
        self.processes.get(pid.index()).map_or(0, |p| p.activations)
    }

    pub fn read_signal(&self, id: SignalId) -> Result<RtlValue, KernelError> {
        self.slot(id).map(|s| s.current.clone())
    }

    /// Stages `v` into the pending slot; it becomes visible after the next
    /// update phase.
    pub fn write_signal(&mut self, id: SignalId, v: RtlValue) -> Result<(), KernelError> {
        let ty = self.slot(id)?.ty;
        v.check(ty)?;
        self.stage(id, v);
        Ok(())
    }

    /// Schedules a write at absolute time `at` (testbench stimulus).
    pub fn schedule_write(&mut self, at: SimTime, id: SignalId, v: RtlValue) -> Result<(), KernelError> {
        let ty = self.slot(id)?.ty;
        v.check(ty)?;
        if at < self.now {
            return Err(KernelError::InvalidArgument(format!(
                "write at {at} lies in the past (now {})",
                self.now
            )));
        }
        self.schedule(at, TimedAction::Write(id, v));
        Ok(())
    }

    pub fn read_bool(&self, id: SignalId) -> bool {
        self.signals[id.index()].current.is_truthy()
    }

    pub fn read_u64(&self, id: SignalId) -> u64 {
        match &self.signals[id.index()].current {
            RtlValue::UInt { value, .. } => *value,
            RtlValue::Int { value, .. } => *value as u64,
            RtlValue::Logic(b) => *b as u64,
            RtlValue::Bits(b) => b.low_u64(),
            RtlValue::Float32(x) => *x as u64,
            RtlValue::Float64(x) => *x as u64,
        }
    }

    pub fn read_f64(&self, id: SignalId) -> f64 {
        match &self.signals[id.index()].current {
            RtlValue::Float64(x) => *x,
            RtlValue::Float32(x) => *x as f64,
            RtlValue::UInt { value, .. } => *value as f64,
            RtlValue::Int { value, .. } => *value as f64,
            RtlValue::Logic(b) => *b as u8 as f64,
            RtlValue::Bits(b) => b.low_u64() as f64,
        }
    }

    /// Typed write for `Logic` signals.
    pub fn write_bool(&mut self, id: SignalId, v: bool) -> Result<(), KernelError> {
        self.write_signal(id, RtlValue::Logic(v))
    }

    /// Typed write for unsigned integer signals; range-checked.
    pub fn write_u64(&mut self, id: SignalId, v: u64) -> Result<(), KernelError> {
        let ty = self.slot(id)?.ty;
        let value = match ty {
            RtlType::UnsignedInt(width) => RtlValue::UInt { width, value: v },
            RtlType::Logic => RtlValue::Logic(v != 0),
            other => {
                return Err(ValueError::Type {
                    expected: other.to_string(),
                    found: "unsigned integer".into(),
                }
                .into())
            }
        };
        self.write_signal(id, value)
    }

    pub fn write_f64(&mut self, id: SignalId, v: f64) -> Result<(), KernelError> {
        let value = match self.slot(id)?.ty {
            RtlType::Float32 => RtlValue::Float32(v as f32),
            _ => RtlValue::Float64(v),
        };
        self.write_signal(id, value)
    }

    /// Asks the running simulation to stop at the end of the current delta
    /// cycle. Between runs, makes the next `run_for` return immediately.
    pub fn request_pause(&mut self) {
        self.pause_requested = true;
    }

    /// Drops a pending pause request without running.
    pub fn clear_pause(&mut self) {
        self.pause_requested = false;
    }

    pub fn drain_notifications(&mut self) -> Vec<Notification> {
        std::mem::take(&mut self.notifications)
    }

    pub fn run_for(&mut self, duration: Duration) -> Result<RunOutcome, KernelError> {
        if self.phase == KernelPhase::Running {
            return Err(KernelError::IllegalState("run_for called while running".into()));
        }
        let horizon = self.now.checked_add(duration)?;
        self.started = true;
        if self.pause_requested {
            self.pause_requested = false;
            self.phase = KernelPhase::Paused;
            return Ok(RunOutcome::Paused(self.now));
        }
        self.phase = KernelPhase::Running;
        loop {
            while self.has_delta_work() {
                self.delta_cycle();
                if self.pause_requested && self.now < horizon {
                    self.pause_requested = false;
                    self.phase = KernelPhase::Paused;
                    return Ok(RunOutcome::Paused(self.now));
                }
            }
            match self.timed.peek() {
                Some(Reverse(e)) if e.at < horizon => {
                    let t = e.at;
                    self.now = t;
                    self.fire_timed(t)?;
                }
                _ => {
                    self.now = horizon;
                    break;
                }
            }
        }
        self.phase = KernelPhase::Idle;
        Ok(RunOutcome::Completed(self.now))
    }

    fn slot(&self, id: SignalId) -> Result<&SignalSlot, KernelError> {
        self.signals.get(id.index()).ok_or(KernelError::UnknownSignal(id))
    }

    fn schedule(&mut self, at: SimTime, action: TimedAction) {
        self.seq += 1;
        self.timed.push(Reverse(TimedEntry {
            at,
            seq: self.seq,
            action,
        }));
    }

    fn stage(&mut self, id: SignalId, v: RtlValue) {
        let slot = &mut self.signals[id.index()];
        slot.pending = Some(v);
        if !slot.queued_for_update {
            slot.queued_for_update = true;
            self.update_list.push(id);
        }
    }

    fn make_runnable(&mut self, pid: ProcessId) {
        let p = &mut self.processes[pid.index()];
        if p.alive && !p.queued {
            p.queued = true;
            self.runnable.push(pid);
        }
    }

    fn has_delta_work(&self) -> bool {
        !self.runnable.is_empty() || !self.update_list.is_empty()
    }

    fn fire_timed(&mut self, t: SimTime) -> Result<(), KernelError> {
        while let Some(Reverse(e)) = self.timed.peek() {
            if e.at != t {
                break;
            }
            let Reverse(entry) = self.timed.pop().expect("peeked");
            match entry.action {
                TimedAction::Toggle { signal, low, high } => {
                    let next = !self.signals[signal.index()].current.is_truthy();
                    self.stage(signal, RtlValue::Logic(next));
                    let wait = if next { high } else { low };
                    let at = t.checked_add(wait)?;
                    self.schedule(at, TimedAction::Toggle { signal, low, high });
                }
                TimedAction::Wake(pid) => self.make_runnable(pid),
                TimedAction::Write(sig, v) => self.stage(sig, v),
            }
        }
        Ok(())
    }

    fn delta_cycle(&mut self) {
        // evaluation
        let mut batch = std::mem::take(&mut self.runnable);
        batch.sort_unstable();
        for &pid in &batch {
            let slot = &mut self.processes[pid.index()];
            slot.queued = false;
            if !slot.alive {
                continue;
            }
            assert_ne!(slot.last_delta, self.deltas, "process {pid:?} activated twice in one delta");
            slot.last_delta = self.deltas;
            slot.activations += 1;
            let Some(mut body) = slot.body.take() else {
                continue;
            };
            body(&mut Activation { kernel: self, pid });
            let slot = &mut self.processes[pid.index()];
            if slot.alive {
                slot.body = Some(body);
            }
        }
        batch.clear();
        // keep the allocation around for the next cycle
        if self.runnable.is_empty() {
            self.runnable = batch;
        }

        // update
        let mut updates = std::mem::take(&mut self.update_list);
        updates.sort_unstable();
        for &sid in &updates {
            let slot = &mut self.signals[sid.index()];
            slot.queued_for_update = false;
            let Some(new) = slot.pending.take() else {
                continue;
            };
            if new == slot.current {
                continue;
            }
            let old_level = slot.current.is_truthy();
            let new_level = new.is_truthy();
            slot.current = new;
            for k in 0..self.signals[sid.index()].sensitive.len() {
                let (pid, edge) = self.signals[sid.index()].sensitive[k];
                if edge.matches(old_level, new_level) {
                    self.make_runnable(pid);
                }
            }
        }
        updates.clear();
        if self.update_list.is_empty() {
            self.update_list = updates;
        }
        self.deltas += 1;
    }
}

/// Handle given to a process body for the duration of one activation.
pub struct Activation<'a> {
    kernel: &'a mut Kernel,
    pid: ProcessId,
}

impl Activation<'_> {
    pub fn process(&self) -> ProcessId {
        self.pid
    }

    pub fn now(&self) -> SimTime {
        self.kernel.now
    }

    pub fn read(&self, id: SignalId) -> RtlValue {
        self.kernel.signals[id.index()].current.clone()
    }

    pub fn read_bool(&self, id: SignalId) -> bool {
        self.kernel.read_bool(id)
    }

    pub fn read_u64(&self, id: SignalId) -> u64 {
        self.kernel.read_u64(id)
    }

    pub fn read_f64(&self, id: SignalId) -> f64 {
        self.kernel.read_f64(id)
    }

    pub fn write(&mut self, id: SignalId, v: RtlValue) -> Result<(), KernelError> {
        self.kernel.write_signal(id, v)
    }

    /// Writes a `Logic` signal; panics on a type mismatch, which is a design bug.
    pub fn write_bool(&mut self, id: SignalId, v: bool) {
        self.kernel.write_bool(id, v).expect("logic signal write");
    }

    /// Writes an unsigned signal; panics if the value does not fit.
    pub fn write_u64(&mut self, id: SignalId, v: u64) {
        self.kernel.write_u64(id, v).expect("unsigned signal write");
    }

    pub fn write_f64(&mut self, id: SignalId, v: f64) {
        self.kernel.write_f64(id, v).expect("float signal write");
    }

    pub fn request_pause(&mut self) {
        self.kernel.request_pause();
    }

    pub fn notify(&mut self, tag: u64) {
        let at = self.kernel.now;
        self.kernel.notifications.push(Notification {
            tag,
            at,
            process: self.pid,
        });
    }

    /// Re-activates this process after `d`.
    pub fn wake_after(&mut self, d: Duration) -> Result<(), KernelError> {
        let at = self.kernel.now.checked_add(d)?;
        self.kernel.schedule(at, TimedAction::Wake(self.pid));
        Ok(())
    }

    pub fn spawn(&mut self, body: ProcessBody, sensitivity: Sensitivity) -> Result<ProcessId, KernelError> {
        self.kernel.spawn_process(body, sensitivity)
    }

    /// Nested runs are illegal; exposed so callers get the proper error.
    pub fn run_for(&mut self, d: Duration) -> Result<RunOutcome, KernelError> {
        self.kernel.run_for(d)
    }
}
