//! Sine source with piecewise-constant amplitude and frequency.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::Params;
use crate::design::{param_period, reject_unknown, Design, DesignError, PortDecl, PortMap};
use crate::kernel::{Kernel, KernelError, Sensitivity};
use crate::time::{Duration, SimTime, PS_PER_MS};
use crate::types::RtlType;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub from_ms: u64,
    pub amplitude: f64,
    pub frequency_hz: f64,
}

/// Segments sorted by start time; the first one covers t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SineSchedule {
    segments: Vec<Segment>,
}

impl Default for SineSchedule {
    fn default() -> Self {
        SineSchedule {
            segments: vec![
                Segment {
                    from_ms: 0,
                    amplitude: 0.5,
                    frequency_hz: 5.0,
                },
                Segment {
                    from_ms: 4000,
                    amplitude: 0.9,
                    frequency_hz: 2.0,
                },
                Segment {
                    from_ms: 7000,
                    amplitude: 0.25,
                    frequency_hz: 11.0,
                },
            ],
        }
    }
}

impl SineSchedule {
    pub fn new(mut segments: Vec<Segment>) -> Result<Self, DesignError> {
        let bad = |m: &str| DesignError::BadParam {
            name: "segments".into(),
            message: m.into(),
        };
        segments.sort_by_key(|s| s.from_ms);
        match segments.first() {
            None => return Err(bad("at least one segment is required")),
            Some(s) if s.from_ms != 0 => return Err(bad("the first segment must start at 0")),
            _ => {}
        }
        if segments.iter().any(|s| !(s.amplitude.abs() <= 1.0) || !s.frequency_hz.is_finite()) {
            return Err(bad("amplitude must lie in [-1, 1] and frequency must be finite"));
        }
        Ok(SineSchedule { segments })
    }

    pub fn from_params(params: &Params) -> Result<Self, DesignError> {
        match params.get("segments") {
            None => Ok(Self::default()),
            Some(v) => {
                let segs: Vec<Segment> = serde_yaml::from_value(v.clone()).map_err(|e| DesignError::BadParam {
                    name: "segments".into(),
                    message: e.to_string(),
                })?;
                Self::new(segs)
            }
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// amplitude(t) * sin(2 pi frequency(t) t).
    pub fn sample(&self, t: SimTime) -> f64 {
        let ms = t.ticks() / PS_PER_MS;
        let seg = self
            .segments
            .iter()
            .rev()
            .find(|s| s.from_ms <= ms)
            .unwrap_or(&self.segments[0]);
        seg.amplitude * (2.0 * PI * seg.frequency_hz * t.as_secs_f64()).sin()
    }
}

#[derive(Debug)]
pub struct SineStim {
    pub schedule: SineSchedule,
    pub period: Duration,
}

pub fn factory(params: &Params) -> Result<Arc<dyn Design>, DesignError> {
    reject_unknown(params, &["segments", "clock_period_us"])?;
    Ok(Arc::new(SineStim {
        schedule: SineSchedule::from_params(params)?,
        period: param_period(params, 1000)?,
    }))
}

impl Design for SineStim {
    fn key(&self) -> &'static str {
        "sine_stim"
    }

    fn top_module(&self) -> &'static str {
        "sine_stim"
    }

    fn source(&self) -> &'static str {
        include_str!("../../designs/sine_stim.h")
    }

    fn ports(&self) -> Vec<PortDecl> {
        vec![
            PortDecl::output("y", RtlType::Float64),
            PortDecl::clock("clock", self.period),
        ]
    }

    fn elaborate(&self, k: &mut Kernel, ports: &PortMap) -> Result<(), KernelError> {
        let (y, clock) = (ports.get("y")?, ports.get("clock")?);
        let schedule = self.schedule.clone();
        k.spawn_process(
            Box::new(move |act| {
                let v = schedule.sample(act.now());
                act.write_f64(y, v);
            }),
            Sensitivity::new().rising(clock),
        )?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_switches_segments() {
        let s = SineSchedule::default();
        let t = SimTime::from_ms(50); // quarter period of 5 Hz
        assert!((s.sample(t) - 0.5).abs() < 1e-12);
        let t = SimTime::from_ms(4125); // 2 Hz: 4.125 s is a quarter period past 4 s
        assert!((s.sample(t) - 0.9).abs() < 1e-9);
        assert_eq!(s.sample(SimTime::ZERO), 0.0);
    }

    #[test]
    fn schedule_validation() {
        assert!(SineSchedule::new(vec![]).is_err());
        let seg = |from_ms, amplitude| Segment {
            from_ms,
            amplitude,
            frequency_hz: 1.0,
        };
        assert!(SineSchedule::new(vec![seg(5, 0.1)]).is_err());
        assert!(SineSchedule::new(vec![seg(0, 1.5)]).is_err());
        assert!(SineSchedule::new(vec![seg(10, 0.2), seg(0, 0.1)]).is_ok());
    }
}
