//! Communication-point trace tables and their CSV form.

use std::fmt::Write as _;

use crate::config::InterruptMode;
use crate::time::SimTime;
use crate::types::FmiValue;

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub instance: String,
    pub signal: String,
    pub at: SimTime,
    pub mode: InterruptMode,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceTable {
    /// `instance.variable` column names.
    pub columns: Vec<String>,
    pub rows: Vec<(SimTime, Vec<FmiValue>)>,
    pub events: Vec<EventRecord>,
    pub isr_invocations: u64,
}

impl TraceTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// All values of one column.
    pub fn series(&self, name: &str) -> Option<Vec<&FmiValue>> {
        let i = self.column(name)?;
        Some(self.rows.iter().map(|(_, r)| &r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("time_ms");
        for c in &self.columns {
            s.push(',');
            s.push_str(c);
        }
        s.push('\n');
        for (t, vals) in &self.rows {
            s.push_str(&t.ms_text());
            for v in vals {
                s.push(',');
                s.push_str(&csv_value(v));
            }
            s.push('\n');
        }
        s
    }
}

pub fn csv_value(v: &FmiValue) -> String {
    match v {
        FmiValue::Bool(b) => (*b as u8).to_string(),
        FmiValue::Binary(_) => format!("0x{}", v.to_text()),
        FmiValue::Float32(x) => format_g9(*x as f64),
        FmiValue::Float64(x) => format_g9(*x),
        other => other.to_text(),
    }
}

/// C `%.9g`.
pub fn format_g9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.8e}");
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let mant = strip_zeros(mant);
        let mut out = String::new();
        let _ = write!(out, "{mant}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
        out
    } else {
        let decimals = (8 - exp) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g9_matches_c() {
        // expected strings from printf("%.9g")
        let cases = [
            (0.1, "0.1"),
            (1.0 / 3.0, "0.333333333"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (-2.5, "-2.5"),
            (0.999999999_7, "1"),
            (1e100, "1e+100"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g9(x), want, "{x}");
        }
    }

    #[test]
    fn csv_layout() {
        let t = TraceTable {
            columns: vec!["u.a".into(), "u.f".into(), "u.d".into()],
            rows: vec![
                (SimTime::ZERO, vec![FmiValue::Bool(false), FmiValue::Float64(0.5), FmiValue::Binary(vec![0x0A, 0x53])]),
                (SimTime(1_500_000_000), vec![FmiValue::Bool(true), FmiValue::Float64(-1.0), FmiValue::Binary(vec![0xff])]),
            ],
            ..Default::default()
        };
        assert_eq!(t.to_csv(), "time_ms,u.a,u.f,u.d\n0,0,0.5,0x0a53\n1.5,1,-1,0xff\n");
    }
}
