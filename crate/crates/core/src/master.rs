//! Fixed-step co-simulation master.
//!
//! Per communication point: copy connected outputs to inputs, run the
//! stimulus hook, then step every instance in registration order. An
//! `EventHalt` runs the interrupt handler in event mode and the halted
//! instance then finishes the remainder of the interval.

use std::collections::{BTreeMap, HashSet};

use thiserror::Error;

use crate::config::{scalar_text, InterruptMode, IsrAction};
use crate::descriptor::Causality;
use crate::slave::{PendingEvent, SlaveError, SlaveInstance, SlaveState, StepResult};
use crate::time::{Duration, SimTime};
use crate::trace::{EventRecord, TraceTable};
use crate::types::FmiValue;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MasterError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("instance `{instance}` at {at}: {source}")]
    Slave {
        instance: String,
        at: SimTime,
        #[source]
        source: SlaveError,
    },
}

fn plan<T>(msg: impl Into<String>) -> Result<T, MasterError> {
    Err(MasterError::Plan(msg.into()))
}

/// Interrupt service routine, run while the instance is in event mode.
pub type IsrHandler = Box<dyn FnMut(&mut SlaveInstance, &PendingEvent) -> Result<(), SlaveError> + Send>;

/// Master-side hook run at every communication point after the connection
/// exchange and before stepping.
pub type Stimulus = Box<dyn FnMut(SimTime, &mut Instances<'_>) -> Result<(), SlaveError> + Send>;

/// Access to the instances by name from within a stimulus hook.
pub struct Instances<'a>(&'a mut [SlaveInstance]);

impl Instances<'_> {
    pub fn get(&mut self, name: &str) -> Option<&mut SlaveInstance> {
        self.0.iter_mut().find(|s| s.name() == name)
    }

    pub fn set(&mut self, instance: &str, variable: &str, v: &FmiValue) -> Result<(), SlaveError> {
        self.get(instance)
            .ok_or_else(|| SlaveError::InvalidArgument(format!("no instance `{instance}`")))?
            .set_by_name(variable, v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Connection {
    pub from: (usize, u32),
    pub to: (usize, u32),
    pub label: String,
}

/// Splits `instance.variable`.
pub fn split_ref(text: &str) -> Result<(&str, &str), MasterError> {
    match text.split_once('.') {
        Some((i, v)) if !i.is_empty() && !v.is_empty() => Ok((i, v)),
        _ => plan(format!("`{text}` is not of the form instance.variable")),
    }
}

/// Builds a handler from a declarative action.
pub fn isr_from_action(action: IsrAction) -> IsrHandler {
    match action {
        IsrAction::Log => Box::new(|_, _| Ok(())),
        IsrAction::Set { variable, value } => Box::new(move |slave, _| {
            let var = slave
                .descriptor()
                .variable(&variable)
                .ok_or_else(|| SlaveError::InvalidArgument(format!("no variable `{variable}`")))?;
            let (vr, ty) = (var.value_reference, var.fmi_type);
            let text = scalar_text(&value).ok_or_else(|| SlaveError::InvalidArgument("ISR value must be a scalar".into()))?;
            slave.set_value(vr, &FmiValue::parse_text(ty, &text)?)
        }),
    }
}

pub struct Master {
    instances: Vec<SlaveInstance>,
    connections: Vec<Connection>,
    isr: BTreeMap<(usize, String), IsrHandler>,
    stimulus: Option<Stimulus>,
    traced: Vec<(usize, u32, String)>,
    step: Duration,
    stop: Duration,
}

impl Master {
    pub fn new(step: Duration, stop: Duration) -> Result<Self, MasterError> {
        if step.is_zero() {
            return plan("step must be positive");
        }
        Ok(Master {
            instances: Vec::new(),
            connections: Vec::new(),
            isr: BTreeMap::new(),
            stimulus: None,
            traced: Vec::new(),
            step,
            stop,
        })
    }

    pub fn add_instance(&mut self, slave: SlaveInstance) -> Result<usize, MasterError> {
        if self.index(slave.name()).is_some() {
            return plan(format!("duplicate instance name `{}`", slave.name()));
        }
        self.instances.push(slave);
        Ok(self.instances.len() - 1)
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.instances.iter().position(|s| s.name() == name)
    }

    pub fn instance(&self, name: &str) -> Option<&SlaveInstance> {
        self.instances.iter().find(|s| s.name() == name)
    }

    pub fn instance_mut(&mut self, name: &str) -> Option<&mut SlaveInstance> {
        self.instances.iter_mut().find(|s| s.name() == name)
    }

    pub fn instances(&self) -> &[SlaveInstance] {
        &self.instances
    }

    fn resolve(&self, text: &str) -> Result<(usize, u32, Causality, crate::types::FmiType), MasterError> {
        let (inst, var) = split_ref(text)?;
        let Some(i) = self.index(inst) else {
            return plan(format!("unknown instance `{inst}`"));
        };
        let Some(v) = self.instances[i].descriptor().variable(var) else {
            return plan(format!("instance `{inst}` has no variable `{var}`"));
        };
        Ok((i, v.value_reference, v.causality, v.fmi_type))
    }

    /// Connects an output to an input (`instance.variable` on both sides).
    pub fn connect(&mut self, from: &str, to: &str) -> Result<(), MasterError> {
        let (fi, fvr, fc, ft) = self.resolve(from)?;
        let (ti, tvr, tc, tt) = self.resolve(to)?;
        if fc != Causality::Output {
            return plan(format!("`{from}` is not an output"));
        }
        if tc != Causality::Input {
            return plan(format!("`{to}` is not an input"));
        }
        if ft != tt {
            return plan(format!("type mismatch: `{from}` is {ft}, `{to}` is {tt}"));
        }
        if self.connections.iter().any(|c| c.to == (ti, tvr)) {
            return plan(format!("`{to}` already has a driver"));
        }
        self.connections.push(Connection {
            from: (fi, fvr),
            to: (ti, tvr),
            label: format!("{from} -> {to}"),
        });
        Ok(())
    }

    pub fn on_interrupt(&mut self, instance: &str, signal: &str, handler: IsrHandler) -> Result<(), MasterError> {
        let Some(i) = self.index(instance) else {
            return plan(format!("unknown instance `{instance}`"));
        };
        if self.instances[i].descriptor().variable(signal).is_none() {
            return plan(format!("instance `{instance}` has no variable `{signal}`"));
        }
        self.isr.insert((i, signal.to_string()), handler);
        Ok(())
    }

    pub fn set_stimulus(&mut self, s: Stimulus) {
        self.stimulus = Some(s);
    }

    pub fn trace(&mut self, var: &str) -> Result<(), MasterError> {
        let (i, vr, _, _) = self.resolve(var)?;
        self.traced.push((i, vr, var.to_string()));
        Ok(())
    }

    /// Traces every variable of every instance in declaration order.
    pub fn trace_all(&mut self) {
        for (i, s) in self.instances.iter().enumerate() {
            for v in &s.descriptor().variables {
                self.traced
                    .push((i, v.value_reference, format!("{}.{}", s.name(), v.name)));
            }
        }
    }

    fn slave_err(&self, i: usize, source: SlaveError) -> MasterError {
        MasterError::Slave {
            instance: self.instances[i].name().to_string(),
            at: self.instances[i].now(),
            source,
        }
    }

    fn sample(&self, t: SimTime) -> Result<(SimTime, Vec<FmiValue>), MasterError> {
        let mut row = Vec::with_capacity(self.traced.len());
        for (i, vr, _) in &self.traced {
            row.push(self.instances[*i].get_value(*vr).map_err(|e| self.slave_err(*i, e))?);
        }
        Ok((t, row))
    }

    fn handle_event(&mut self, i: usize, table: &mut TraceTable) -> Result<(), MasterError> {
        let ev = self.instances[i]
            .pending_event()
            .cloned()
            .expect("EventHalt leaves a pending event");
        let s = &mut self.instances[i];
        let r = (|| {
            s.enter_event_mode()?;
            if let Some(h) = self.isr.get_mut(&(i, ev.signal.clone())) {
                h(s, &ev)?;
            }
            s.exit_event_mode()
        })();
        r.map_err(|e| self.slave_err(i, e))?;
        table.isr_invocations += 1;
        table.events.push(EventRecord {
            instance: self.instances[i].name().to_string(),
            signal: ev.signal,
            at: ev.at,
            mode: ev.mode,
        });
        Ok(())
    }

    fn step_instance(&mut self, i: usize, target: SimTime, table: &mut TraceTable) -> Result<(), MasterError> {
        loop {
            let now = self.instances[i].now();
            let r = if now < target {
                self.instances[i].do_step(target.since(now))
            } else {
                match self.instances[i].poll_event() {
                    Ok(Some(r)) => Ok(r),
                    Ok(None) => return Ok(()),
                    Err(e) => Err(e),
                }
            };
            match r.map_err(|e| self.slave_err(i, e))? {
                StepResult::Done(_) => {
                    // poll rules may have queued more than one event
                    while let Some(StepResult::EventHalt { .. }) =
                        self.instances[i].poll_event().map_err(|e| self.slave_err(i, e))?
                    {
                        self.handle_event(i, table)?;
                    }
                    return Ok(());
                }
                StepResult::EventHalt { .. } => self.handle_event(i, table)?,
            }
        }
    }

    /// Initialises any instance still in `Instantiated`, then runs to `stop`.
    pub fn run(&mut self) -> Result<TraceTable, MasterError> {
        for i in 0..self.instances.len() {
            let s = &mut self.instances[i];
            let r = match s.state() {
                SlaveState::Instantiated => s
                    .enter_initialization(SimTime::ZERO)
                    .and_then(|_| s.exit_initialization()),
                SlaveState::InitializationMode => s.exit_initialization(),
                SlaveState::StepMode => Ok(()),
                state => Err(SlaveError::IllegalState { op: "run", state }),
            };
            r.map_err(|e| self.slave_err(i, e))?;
        }
        let starts: HashSet<SimTime> = self.instances.iter().map(|s| s.now()).collect();
        if starts.len() > 1 {
            return plan("instances are not at a common time");
        }
        let mut t = starts.into_iter().next().unwrap_or(SimTime::ZERO);
        let stop = t
            .checked_add(self.stop)
            .map_err(|_| MasterError::Plan("stop time overflows".into()))?;

        let mut table = TraceTable {
            columns: self.traced.iter().map(|(_, _, n)| n.clone()).collect(),
            ..Default::default()
        };
        table.rows.push(self.sample(t)?);
        let mut stim = self.stimulus.take();
        let result = (|| {
            while t < stop {
                let h = Duration(self.step.ticks().min(stop.since(t).ticks()));
                for c in self.connections.clone() {
                    let v = self.instances[c.from.0]
                        .get_value(c.from.1)
                        .map_err(|e| self.slave_err(c.from.0, e))?;
                    self.instances[c.to.0]
                        .set_value(c.to.1, &v)
                        .map_err(|e| self.slave_err(c.to.0, e))?;
                }
                if let Some(f) = stim.as_mut() {
                    f(t, &mut Instances(&mut self.instances)).map_err(|e| MasterError::Slave {
                        instance: "<stimulus>".into(),
                        at: t,
                        source: e,
                    })?;
                }
                let target = t.checked_add(h).map_err(|_| MasterError::Plan("time overflow".into()))?;
                for i in 0..self.instances.len() {
                    self.step_instance(i, target, &mut table)?;
                }
                t = target;
                table.rows.push(self.sample(t)?);
            }
            Ok(())
        })();
        self.stimulus = stim;
        result.map(|_| table)
    }

    pub fn events_by_mode(table: &TraceTable, mode: InterruptMode) -> usize {
        table.events.iter().filter(|e| e.mode == mode).count()
    }
}
