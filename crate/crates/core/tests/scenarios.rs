mod common;

use common::*;
use rtlfmi::config::InterruptMode;
use rtlfmi::package::ModelResources;
use rtlfmi::slave::{SlaveError, SlaveState, StepResult};
use rtlfmi::types::FmiValue;
use rtlfmi::SimTime;

#[test]
fn one_cycle_pulse_is_polled_at_fine_steps_only() {
    // high from 10 ms to 15 ms
    let fine = detections(10_000, 5_000, InterruptMode::PostStepPoll, ms(5), ms(30));
    assert_eq!(fine, [SimTime::from_ms(15)]);
    let coarse = detections(10_000, 5_000, InterruptMode::PostStepPoll, ms(20), ms(40));
    assert!(coarse.is_empty());
}

#[test]
fn async_monitor_halts_mid_step_and_resumes() {
    let a = pulse_archive(12_000, 5_000, InterruptMode::AsyncMonitor);
    let mut s = ready(&a, "p");
    let r = s.do_step(ms(20)).unwrap();
    assert_eq!(
        r,
        StepResult::EventHalt {
            at: SimTime::from_ms(12),
            signal: "irq".into()
        }
    );
    assert_eq!(s.state(), SlaveState::EventMode);
    assert_eq!(s.now(), SimTime::from_ms(12));
    assert_eq!(s.get_by_name("irq").unwrap(), FmiValue::Bool(true));
    s.enter_event_mode().unwrap();
    s.exit_event_mode().unwrap();
    assert_eq!(s.do_step(ms(8)).unwrap(), StepResult::Done(SimTime::from_ms(20)));
    assert_eq!(s.get_by_name("irq").unwrap(), FmiValue::Bool(false));
}

#[test]
fn event_mode_is_entered_once_per_halt() {
    let a = pulse_archive(2_000, 1_000, InterruptMode::AsyncMonitor);
    let mut s = ready(&a, "p");
    assert!(matches!(s.do_step(ms(5)).unwrap(), StepResult::EventHalt { .. }));
    assert!(matches!(s.do_step(ms(1)), Err(SlaveError::IllegalState { .. })));
    s.enter_event_mode().unwrap();
    assert!(s.enter_event_mode().unwrap_err().is_state_error());
    s.exit_event_mode().unwrap();
    assert!(s.exit_event_mode().unwrap_err().is_state_error());
}

#[test]
fn fifteen_ms_step_with_fine_window() {
    fifteen_ms_step().unwrap();
}

#[test]
fn topologies_agree_over_two_seconds() {
    topology_invariance(2_000).unwrap();
}

#[test]
fn crc_check_value_through_the_archive() {
    assert_eq!(crc32_bitwise(b"123456789"), 0xCBF4_3926);
    let mut s = ready(&archive("crc", ModelResources::new("crc")), "crc");
    assert_eq!(crc_via_slave(&mut s, 0, b"123456789"), 0xCBF4_3926);
    // contexts are independent: interleave two messages
    assert_eq!(crc_via_slave(&mut s, 1, b"abc"), crc32_bitwise(b"abc"));
    assert_eq!(crc_via_slave(&mut s, 0, b""), 0);
}

#[test]
fn i2c_valid_and_invalid_transactions() {
    let a = i2c_archive(InterruptMode::AsyncMonitor);
    assert_eq!(i2c_transaction(&a, 0x2A, 0x5C), (false, !0x5C, 0));
    let (nack, _, isr) = i2c_transaction(&a, 0x13, 0x5C);
    assert!(nack);
    assert_eq!(isr, 1);
}

#[test]
fn equivalence_short_runs() {
    for key in ["alu", "crc", "i2c", "delta_sigma"] {
        equivalence(key, 1_000, 7).unwrap();
    }
}
