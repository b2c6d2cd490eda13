//! N-th order delta-sigma modulator.
//!
//! Per rising clock edge with feedback `v = +1` if the previous output was
//! high, else `-1`:
//!
//! ```text
//! i[0] += x - v
//! i[k] += i[k-1] - v      (k = 1..n, using the freshly updated i[k-1])
//! y     = i[n-1] >= 0
//! ```
//!
//! An active-low reset zeroes every integrator and forces `y = 1`.

use std::sync::Arc;

use crate::config::Params;
use crate::design::{param_period, param_u64, reject_unknown, Design, DesignError, PortDecl, PortMap};
use crate::kernel::{Kernel, KernelError, Sensitivity};
use crate::time::Duration;
use crate::types::{RtlType, RtlValue};

/// Difference-equation state shared by the kernel process and by offline
/// reference runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Modulator {
    pub integrators: Vec<f64>,
    pub y: bool,
}

impl Modulator {
    pub fn new(order: usize) -> Self {
        Modulator {
            integrators: vec![0.0; order],
            y: true,
        }
    }

    pub fn reset(&mut self) {
        self.integrators.iter_mut().for_each(|i| *i = 0.0);
        self.y = true;
    }

    pub fn step(&mut self, x: f64) -> bool {
        let v = if self.y { 1.0 } else { -1.0 };
        let mut prev = x;
        for i in self.integrators.iter_mut() {
            *i += prev - v;
            prev = *i;
        }
        self.y = prev >= 0.0;
        self.y
    }
}

#[derive(Debug)]
pub struct DeltaSigma {
    pub order: usize,
    pub period: Duration,
}

pub fn factory(params: &Params) -> Result<Arc<dyn Design>, DesignError> {
    reject_unknown(params, &["order", "clock_period_us"])?;
    let order = param_u64(params, "order", 2)?;
    if !(1..=8).contains(&order) {
        return Err(DesignError::BadParam {
            name: "order".into(),
            message: "must be between 1 and 8".into(),
        });
    }
    Ok(Arc::new(DeltaSigma {
        order: order as usize,
        period: param_period(params, 1000)?,
    }))
}

impl Design for DeltaSigma {
    fn key(&self) -> &'static str {
        "delta_sigma"
    }

    fn top_module(&self) -> &'static str {
        "delta_sigma"
    }

    fn source(&self) -> &'static str {
        include_str!("../../designs/delta_sigma.h")
    }

    fn ports(&self) -> Vec<PortDecl> {
        vec![
            PortDecl::input("x_in", RtlType::Float64),
            PortDecl::input("reset_n", RtlType::Logic),
            PortDecl::output("y_out", RtlType::Logic).with_init(RtlValue::Logic(true)),
            PortDecl::clock("clock", self.period),
        ]
    }

    fn elaborate(&self, k: &mut Kernel, ports: &PortMap) -> Result<(), KernelError> {
        let (x_in, reset_n, y_out, clock) = (
            ports.get("x_in")?,
            ports.get("reset_n")?,
            ports.get("y_out")?,
            ports.get("clock")?,
        );
        let integ = (0..self.order)
            .map(|i| k.create_signal(&ports.internal(&format!("integ{i}")), RtlType::Float64, RtlValue::Float64(0.0)))
            .collect::<Result<Vec<_>, _>>()?;
        let mut m = Modulator::new(self.order);
        k.spawn_process(
            Box::new(move |act| {
                if act.read_bool(reset_n) {
                    m.y = act.read_bool(y_out);
                    m.step(act.read_f64(x_in));
                } else {
                    m.reset();
                }
                act.write_bool(y_out, m.y);
                for (sig, v) in integ.iter().zip(&m.integrators) {
                    act.write_f64(*sig, *v);
                }
            }),
            Sensitivity::new().rising(clock),
        )?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::NativeBench;

    fn density(order: usize, x: f64, cycles: usize) -> f64 {
        let mut m = Modulator::new(order);
        (0..cycles).filter(|_| m.step(x)).count() as f64 / cycles as f64
    }

    #[test]
    fn second_order_densities() {
        assert!((density(2, 0.0, 10_000) - 0.5).abs() <= 0.02);
        assert!((density(2, 0.5, 10_000) - 0.75).abs() <= 0.02);
        assert!((density(2, 1.0, 10_000) - 1.0).abs() <= 0.01);
    }

    #[test]
    fn held_reset_keeps_output_and_integrators() {
        let d = DeltaSigma {
            order: 3,
            period: Duration::from_ms(1),
        };
        let mut bench = NativeBench::new(&d).unwrap();
        bench.set("x_in", RtlValue::Float64(0.7)).unwrap();
        for _ in 0..50 {
            bench.run(Duration::from_ms(1)).unwrap();
            assert_eq!(bench.get("y_out").unwrap(), RtlValue::Logic(true));
            for i in 0..3 {
                let id = bench.kernel.find_signal(&format!("delta_sigma.integ{i}")).unwrap();
                assert_eq!(bench.kernel.read_f64(id), 0.0);
            }
        }
    }
}
