mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use rtlfmi::config::InterruptMode;
use rtlfmi::descriptor::{parse_descriptor, serialize_descriptor};
use rtlfmi::package::{load_bytes, package_bytes, ModelResources};
use rtlfmi::slave::StepResult;
use rtlfmi::types::FmiValue;
use rtlfmi::{Duration, SimTime};

fn input_values(key: &str, seed: u64) -> Vec<(&'static str, FmiValue)> {
    let x = (seed % 2001) as f64 / 1000.0 - 1.0;
    let b = |bit: u64| FmiValue::Bool(seed >> bit & 1 == 1);
    let u = |shift: u64, m: u64| FmiValue::UInt8((seed >> shift & m) as u8);
    match key {
        "alu" => vec![("a", u(0, 15)), ("b", u(4, 15)), ("op", u(8, 7))],
        "crc" => vec![("data_in", u(0, 255)), ("ctrl", u(8, 31)), ("data_valid", b(16)), ("context_sel", u(20, 15))],
        "i2c" => vec![("start", b(0)), ("addr", u(1, 127)), ("cmd", u(8, 255))],
        _ => vec![("x_in", FmiValue::Float64(x)), ("reset_n", FmiValue::Bool(true))],
    }
}

fn outputs(s: &rtlfmi::slave::SlaveInstance) -> Vec<FmiValue> {
    s.descriptor()
        .variables
        .iter()
        .map(|v| s.get_value(v.value_reference).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn step_additivity(
        key in prop::sample::select(vec!["alu", "crc", "i2c", "delta_sigma"]),
        seed in any::<u64>(),
        a_us in 1u64..8_000,
        b_us in 1u64..8_000,
    ) {
        let arc = archive(key, ModelResources::new(key));
        let mut one = ready(&arc, "one");
        let mut two = ready(&arc, "two");
        for (name, v) in input_values(key, seed) {
            one.set_by_name(name, &v).unwrap();
            two.set_by_name(name, &v).unwrap();
        }
        let (a, b) = (Duration::from_us(a_us), Duration::from_us(b_us));
        let end = SimTime(a.ticks() + b.ticks());
        prop_assert_eq!(one.do_step(Duration::from_ps(a.ticks() + b.ticks())).unwrap(), StepResult::Done(end));
        two.do_step(a).unwrap();
        prop_assert_eq!(two.do_step(b).unwrap(), StepResult::Done(end));
        prop_assert_eq!(outputs(&one), outputs(&two));
    }

    #[test]
    fn detectability_law(
        rise_us in 500u64..30_000,
        width_us in 100u64..12_000,
        step_ms in 1u64..=10,
    ) {
        let stop = 50u64;
        let step = step_ms * 1000;
        let fall = rise_us + width_us;
        // communication points c with rise < c <= fall see the level high
        let polled: Vec<SimTime> = (1..)
            .map(|k| k * step)
            .take_while(|c| *c <= stop * 1000)
            .filter(|c| rise_us < *c && *c <= fall)
            .map(|c| SimTime::from_ms(c / 1000))
            .collect();
        let got = detections(rise_us, width_us, InterruptMode::PostStepPoll, ms(step_ms), ms(stop));
        prop_assert_eq!(got, polled);
        let inside_one_step = rise_us / step == fall / step && fall % step != 0;
        let got = detections(rise_us, width_us, InterruptMode::AsyncMonitor, ms(step_ms), ms(stop));
        prop_assert_eq!(got, vec![SimTime(Duration::from_us(rise_us).ticks())]);
        if inside_one_step {
            prop_assert!(detections(rise_us, width_us, InterruptMode::PostStepPoll, ms(step_ms), ms(stop)).is_empty());
        }
    }

    #[test]
    fn descriptor_and_package_round_trip(seed in any::<u64>()) {
        let (_, model, d) = random_module(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(parse_descriptor(&serialize_descriptor(&d)).unwrap(), d.clone());
        let bytes = package_bytes(&d, &model).unwrap();
        prop_assert_eq!(&bytes, &package_bytes(&d, &model).unwrap());
        let a = load_bytes(&bytes, &registry()).unwrap();
        prop_assert_eq!(a.descriptor, d);
        prop_assert_eq!(a.model, model);
    }
}
