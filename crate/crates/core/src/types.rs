//! RTL and FMI value model, and the port-type mapping between the two.
//!
//! RTL integers are transported inside the smallest FMI integer bucket that
//! holds their width (1..=8, 9..=16, 17..=32, 33..=64). Bit vectors travel as
//! `Binary`, packed most-significant bit first and left-padded with zero
//! bits to a whole number of bytes.

use std::fmt;

use thiserror::Error;

/// Largest supported bit-vector width.
pub const MAX_BITVECTOR_WIDTH: u16 = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValueError {
    #[error("type mismatch: expected {expected}, found {found}")]
    Type { expected: String, found: String },
    #[error("value {value} does not fit {target}")]
    Range { value: String, target: String },
    #[error("unsupported type {0}")]
    UnsupportedType(String),
}

/// Hardware-side port type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RtlType {
    /// Two-valued logic bit (`bool`, `sc_bit`, `sc_logic`).
    Logic,
    BitVector(u16),
    SignedInt(u8),
    UnsignedInt(u8),
    Float32,
    Float64,
}

impl RtlType {
    pub fn validate(self) -> Result<Self, ValueError> {
        let ok = match self {
            RtlType::BitVector(w) => (1..=MAX_BITVECTOR_WIDTH).contains(&w),
            RtlType::SignedInt(w) | RtlType::UnsignedInt(w) => (1..=64).contains(&w),
            _ => true,
        };
        if ok {
            Ok(self)
        } else {
            Err(ValueError::UnsupportedType(self.to_string()))
        }
    }

    /// The value every signal of this type holds before it is first written.
    pub fn zero(self) -> RtlValue {
        match self {
            RtlType::Logic => RtlValue::Logic(false),
            RtlType::BitVector(w) => RtlValue::Bits(BitVector::zero(w)),
            RtlType::SignedInt(width) => RtlValue::Int { width, value: 0 },
            RtlType::UnsignedInt(width) => RtlValue::UInt { width, value: 0 },
            RtlType::Float32 => RtlValue::Float32(0.0),
            RtlType::Float64 => RtlValue::Float64(0.0),
        }
    }
}

impl fmt::Display for RtlType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RtlType::Logic => write!(f, "sc_logic"),
            RtlType::BitVector(w) => write!(f, "sc_bv<{w}>"),
            RtlType::SignedInt(w) => write!(f, "sc_int<{w}>"),
            RtlType::UnsignedInt(w) => write!(f, "sc_uint<{w}>"),
            RtlType::Float32 => write!(f, "float"),
            RtlType::Float64 => write!(f, "double"),
        }
    }
}

/// FMI 3.0 variable type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FmiType {
    Bool,
    Binary,
    Int8,
    Int16,
    Int32,
    Int64,
    UInt8,
    UInt16,
    UInt32,
    UInt64,
    Float32,
    Float64,
}

impl FmiType {
    pub const ALL: [FmiType; 12] = [
        FmiType::Bool,
        FmiType::Binary,
        FmiType::Int8,
        FmiType::Int16,
        FmiType::Int32,
        FmiType::Int64,
        FmiType::UInt8,
        FmiType::UInt16,
        FmiType::UInt32,
        FmiType::UInt64,
        FmiType::Float32,
        FmiType::Float64,
    ];

    /// Element name used in `modelDescription.xml`.
    pub fn xml_name(self) -> &'static str {
        match self {
            FmiType::Bool => "Boolean",
            FmiType::Binary => "Binary",
            FmiType::Int8 => "Int8",
            FmiType::Int16 => "Int16",
            FmiType::Int32 => "Int32",
            FmiType::Int64 => "Int64",
            FmiType::UInt8 => "UInt8",
            FmiType::UInt16 => "UInt16",
            FmiType::UInt32 => "UInt32",
            FmiType::UInt64 => "UInt64",
            FmiType::Float32 => "Float32",
            FmiType::Float64 => "Float64",
        }
    }

    pub fn from_xml_name(name: &str) -> Option<FmiType> {
        FmiType::ALL.into_iter().find(|t| t.xml_name() == name)
    }

    pub fn zero(self) -> FmiValue {
        match self {
            FmiType::Bool => FmiValue::Bool(false),
            FmiType::Binary => FmiValue::Binary(Vec::new()),
            FmiType::Int8 => FmiValue::Int8(0),
            FmiType::Int16 => FmiValue::Int16(0),
            FmiType::Int32 => FmiValue::Int32(0),
            FmiType::Int64 => FmiValue::Int64(0),
            FmiType::UInt8 => FmiValue::UInt8(0),
            FmiType::UInt16 => FmiValue::UInt16(0),
            FmiType::UInt32 => FmiValue::UInt32(0),
            FmiType::UInt64 => FmiValue::UInt64(0),
            FmiType::Float32 => FmiValue::Float32(0.0),
            FmiType::Float64 => FmiValue::Float64(0.0),
        }
    }
}

impl fmt::Display for FmiType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "fmi3{}", self.xml_name())
    }
}

/// Fixed-width bit vector, stored as little-endian 64-bit words.
///
/// Bits above `width` in the top word are always zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    width: u16,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zero(width: u16) -> Self {
        let n = (width as usize).div_ceil(64);
        BitVector {
            width,
            words: vec![0; n],
        }
    }

    /// Builds a vector from the low `width` bits of `value`; errors if
    /// `value` has bits set above `width`.
    pub fn from_u64(width: u16, value: u64) -> Result<Self, ValueError> {
        let mut bv = BitVector::zero(width);
        if width < 64 && value >> width != 0 {
            return Err(ValueError::Range {
                value: value.to_string(),
                target: format!("sc_bv<{width}>"),
            });
        }
        if let Some(w) = bv.words.first_mut() {
            *w = value;
        }
        Ok(bv)
    }

    /// Parses a string of `0`/`1` characters, most significant bit first.
    pub fn from_bit_str(bits: &str) -> Result<Self, ValueError> {
        let width = u16::try_from(bits.len())
            .ok()
            .filter(|w| (1..=MAX_BITVECTOR_WIDTH).contains(w))
            .ok_or_else(|| ValueError::UnsupportedType(format!("sc_bv<{}>", bits.len())))?;
        let mut bv = BitVector::zero(width);
        for (i, c) in bits.chars().rev().enumerate() {
            match c {
                '0' => {}
                '1' => bv.set_bit(i, true),
                other => {
                    return Err(ValueError::Range {
                        value: other.to_string(),
                        target: "two-valued bit".into(),
                    })
                }
            }
        }
        Ok(bv)
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn bit(&self, i: usize) -> bool {
        i < self.width as usize && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set_bit(&mut self, i: usize, v: bool) {
        assert!(i < self.width as usize, "bit index {i} out of range");
        let mask = 1u64 << (i % 64);
        if v {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    /// Low 64 bits of the vector.
    pub fn low_u64(&self) -> u64 {
        self.words.first().copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// MSB-first packing into `ceil(width / 8)` bytes, zero-padded on the left.
    pub fn to_bytes(&self) -> Vec<u8> {
        let nbytes = (self.width as usize).div_ceil(8);
        (0..nbytes)
            .map(|k| {
                // byte k (from the front) holds bits [8*(nbytes-1-k) .. +8)
                let base = 8 * (nbytes - 1 - k);
                let word = self.words[base / 64];
                (word >> (base % 64)) as u8
            })
            .collect()
    }

    pub fn from_bytes(width: u16, bytes: &[u8]) -> Result<Self, ValueError> {
        let nbytes = (width as usize).div_ceil(8);
        if bytes.len() != nbytes {
            return Err(ValueError::Range {
                value: format!("{} bytes", bytes.len()),
                target: format!("sc_bv<{width}> ({nbytes} bytes)"),
            });
        }
        let pad = nbytes * 8 - width as usize;
        if pad > 0 && bytes[0] >> (8 - pad) != 0 {
            return Err(ValueError::Range {
                value: hex(bytes),
                target: format!("sc_bv<{width}>"),
            });
        }
        let mut bv = BitVector::zero(width);
        for (k, &b) in bytes.iter().enumerate() {
            let base = 8 * (nbytes - 1 - k);
            bv.words[base / 64] |= (b as u64) << (base % 64);
        }
        Ok(bv)
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in (0..self.width as usize).rev() {
            f.write_str(if self.bit(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// A value living on a kernel signal.
#[derive(Debug, Clone, PartialEq)]
pub enum RtlValue {
    Logic(bool),
    Bits(BitVector),
    Int { width: u8, value: i64 },
    UInt { width: u8, value: u64 },
    Float32(f32),
    Float64(f64),
}

impl RtlValue {
    pub fn uint(width: u8, value: u64) -> RtlValue {
        RtlValue::UInt { width, value }
    }

    pub fn int(width: u8, value: i64) -> RtlValue {
        RtlValue::Int { width, value }
    }

    pub fn ty(&self) -> RtlType {
        match self {
            RtlValue::Logic(_) => RtlType::Logic,
            RtlValue::Bits(b) => RtlType::BitVector(b.width()),
            RtlValue::Int { width, .. } => RtlType::SignedInt(*width),
            RtlValue::UInt { width, .. } => RtlType::UnsignedInt(*width),
            RtlValue::Float32(_) => RtlType::Float32,
            RtlValue::Float64(_) => RtlType::Float64,
        }
    }

    /// Nonzero test used for edge detection.
    pub fn is_truthy(&self) -> bool {
        match self {
            RtlValue::Logic(b) => *b,
            RtlValue::Bits(b) => !b.is_zero(),
            RtlValue::Int { value, .. } => *value != 0,
            RtlValue::UInt { value, .. } => *value != 0,
            RtlValue::Float32(v) => *v != 0.0,
            RtlValue::Float64(v) => *v != 0.0,
        }
    }

    /// Checks that this value can be stored in a signal of type `ty`.
    pub fn check(&self, ty: RtlType) -> Result<(), ValueError> {
        let mismatch = || ValueError::Type {
            expected: ty.to_string(),
            found: self.ty().to_string(),
        };
        match (self, ty) {
            (RtlValue::Logic(_), RtlType::Logic)
            | (RtlValue::Float32(_), RtlType::Float32)
            | (RtlValue::Float64(_), RtlType::Float64) => Ok(()),
            (RtlValue::Bits(b), RtlType::BitVector(w)) if b.width() == w => Ok(()),
            (RtlValue::Int { value, .. }, RtlType::SignedInt(w)) => check_signed(*value, w),
            (RtlValue::UInt { value, .. }, RtlType::UnsignedInt(w)) => check_unsigned(*value, w),
            _ => Err(mismatch()),
        }
    }
}

impl fmt::Display for RtlValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RtlValue::Logic(b) => write!(f, "{}", *b as u8),
            RtlValue::Bits(b) => write!(f, "{b}"),
            RtlValue::Int { value, .. } => write!(f, "{value}"),
            RtlValue::UInt { value, .. } => write!(f, "{value}"),
            RtlValue::Float32(v) => write!(f, "{v}"),
            RtlValue::Float64(v) => write!(f, "{v}"),
        }
    }
}

fn check_signed(value: i64, width: u8) -> Result<(), ValueError> {
    let ok = width >= 64 || {
        let lo = -(1i64 << (width - 1));
        let hi = (1i64 << (width - 1)) - 1;
        (lo..=hi).contains(&value)
    };
    if ok {
        Ok(())
    } else {
        Err(ValueError::Range {
            value: value.to_string(),
            target: format!("sc_int<{width}>"),
        })
    }
}

fn check_unsigned(value: u64, width: u8) -> Result<(), ValueError> {
    if width >= 64 || value >> width == 0 {
        Ok(())
    } else {
        Err(ValueError::Range {
            value: value.to_string(),
            target: format!("sc_uint<{width}>"),
        })
    }
}

/// A value crossing the FMI boundary.
#[derive(Debug, Clone, PartialEq)]
pub enum FmiValue {
    Bool(bool),
    Binary(Vec<u8>),
    Int8(i8),
    Int16(i16),
    Int32(i32),
    Int64(i64),
    UInt8(u8),
    UInt16(u16),
    UInt32(u32),
    UInt64(u64),
    Float32(f32),
    Float64(f64),
}

impl FmiValue {
    pub fn ty(&self) -> FmiType {
        match self {
            FmiValue::Bool(_) => FmiType::Bool,
            FmiValue::Binary(_) => FmiType::Binary,
            FmiValue::Int8(_) => FmiType::Int8,
            FmiValue::Int16(_) => FmiType::Int16,
            FmiValue::Int32(_) => FmiType::Int32,
            FmiValue::Int64(_) => FmiType::Int64,
            FmiValue::UInt8(_) => FmiType::UInt8,
            FmiValue::UInt16(_) => FmiType::UInt16,
            FmiValue::UInt32(_) => FmiType::UInt32,
            FmiValue::UInt64(_) => FmiType::UInt64,
            FmiValue::Float32(_) => FmiType::Float32,
            FmiValue::Float64(_) => FmiType::Float64,
        }
    }

    /// Textual form used for XML `start` attributes and YAML scalars.
    pub fn to_text(&self) -> String {
        match self {
            FmiValue::Bool(b) => b.to_string(),
            FmiValue::Binary(bytes) => hex(bytes),
            FmiValue::Int8(v) => v.to_string(),
            FmiValue::Int16(v) => v.to_string(),
            FmiValue::Int32(v) => v.to_string(),
            FmiValue::Int64(v) => v.to_string(),
            FmiValue::UInt8(v) => v.to_string(),
            FmiValue::UInt16(v) => v.to_string(),
            FmiValue::UInt32(v) => v.to_string(),
            FmiValue::UInt64(v) => v.to_string(),
            FmiValue::Float32(v) => v.to_string(),
            FmiValue::Float64(v) => v.to_string(),
        }
    }

    /// Inverse of [`FmiValue::to_text`]. Booleans also accept `0`/`1`;
    /// binaries accept an optional `0x` prefix.
    pub fn parse_text(ty: FmiType, text: &str) -> Result<FmiValue, ValueError> {
        let text = text.trim();
        let bad = || ValueError::Range {
            value: text.to_string(),
            target: ty.to_string(),
        };
        Ok(match ty {
            FmiType::Bool => match text {
                "true" | "1" => FmiValue::Bool(true),
                "false" | "0" => FmiValue::Bool(false),
                _ => return Err(bad()),
            },
            FmiType::Binary => FmiValue::Binary(parse_hex(text).ok_or_else(bad)?),
            FmiType::Int8 => FmiValue::Int8(text.parse().map_err(|_| bad())?),
            FmiType::Int16 => FmiValue::Int16(text.parse().map_err(|_| bad())?),
            FmiType::Int32 => FmiValue::Int32(text.parse().map_err(|_| bad())?),
            FmiType::Int64 => FmiValue::Int64(text.parse().map_err(|_| bad())?),
            FmiType::UInt8 => FmiValue::UInt8(text.parse().map_err(|_| bad())?),
            FmiType::UInt16 => FmiValue::UInt16(text.parse().map_err(|_| bad())?),
            FmiType::UInt32 => FmiValue::UInt32(text.parse().map_err(|_| bad())?),
            FmiType::UInt64 => FmiValue::UInt64(text.parse().map_err(|_| bad())?),
            FmiType::Float32 => FmiValue::Float32(text.parse().map_err(|_| bad())?),
            FmiType::Float64 => FmiValue::Float64(text.parse().map_err(|_| bad())?),
        })
    }

    /// Widens integer and boolean values to `i128` (for display and scripting).
    pub fn as_i128(&self) -> Option<i128> {
        Some(match self {
            FmiValue::Bool(b) => *b as i128,
            FmiValue::Int8(v) => *v as i128,
            FmiValue::Int16(v) => *v as i128,
            FmiValue::Int32(v) => *v as i128,
            FmiValue::Int64(v) => *v as i128,
            FmiValue::UInt8(v) => *v as i128,
            FmiValue::UInt16(v) => *v as i128,
            FmiValue::UInt32(v) => *v as i128,
            FmiValue::UInt64(v) => *v as i128,
            _ => return None,
        })
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            FmiValue::Float32(v) => Some(*v as f64),
            FmiValue::Float64(v) => Some(*v),
            other => other.as_i128().map(|v| v as f64),
        }
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn parse_hex(text: &str) -> Option<Vec<u8>> {
    let t = text.strip_prefix("0x").unwrap_or(text);
    if t.len() % 2 != 0 || !t.is_ascii() {
        return None;
    }
    (0..t.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&t[i..i + 2], 16).ok())
        .collect()
}

/// Port-type mapping between the RTL and FMI domains.
pub fn map_rtl_to_fmi(t: RtlType) -> Result<FmiType, ValueError> {
    let bucket = |w: u8| match w {
        1..=8 => 0,
        9..=16 => 1,
        17..=32 => 2,
        _ => 3,
    };
    Ok(match t.validate()? {
        RtlType::Logic => FmiType::Bool,
        RtlType::BitVector(_) => FmiType::Binary,
        RtlType::SignedInt(w) => {
            [FmiType::Int8, FmiType::Int16, FmiType::Int32, FmiType::Int64][bucket(w)]
        }
        RtlType::UnsignedInt(w) => {
            [FmiType::UInt8, FmiType::UInt16, FmiType::UInt32, FmiType::UInt64][bucket(w)]
        }
        RtlType::Float32 => FmiType::Float32,
        RtlType::Float64 => FmiType::Float64,
    })
}

pub fn rtl_to_fmi(v: &RtlValue) -> Result<FmiValue, ValueError> {
    let ty = v.ty();
    v.check(ty)?;
    Ok(match (v, map_rtl_to_fmi(ty)?) {
        (RtlValue::Logic(b), _) => FmiValue::Bool(*b),
        (RtlValue::Bits(b), _) => FmiValue::Binary(b.to_bytes()),
        (RtlValue::Int { value, .. }, FmiType::Int8) => FmiValue::Int8(*value as i8),
        (RtlValue::Int { value, .. }, FmiType::Int16) => FmiValue::Int16(*value as i16),
        (RtlValue::Int { value, .. }, FmiType::Int32) => FmiValue::Int32(*value as i32),
        (RtlValue::Int { value, .. }, _) => FmiValue::Int64(*value),
        (RtlValue::UInt { value, .. }, FmiType::UInt8) => FmiValue::UInt8(*value as u8),
        (RtlValue::UInt { value, .. }, FmiType::UInt16) => FmiValue::UInt16(*value as u16),
        (RtlValue::UInt { value, .. }, FmiType::UInt32) => FmiValue::UInt32(*value as u32),
        (RtlValue::UInt { value, .. }, _) => FmiValue::UInt64(*value),
        (RtlValue::Float32(x), _) => FmiValue::Float32(*x),
        (RtlValue::Float64(x), _) => FmiValue::Float64(*x),
    })
}

pub fn fmi_to_rtl(v: &FmiValue, target: RtlType) -> Result<RtlValue, ValueError> {
    let expected = map_rtl_to_fmi(target)?;
    if v.ty() != expected {
        return Err(ValueError::Type {
            expected: expected.to_string(),
            found: v.ty().to_string(),
        });
    }
    let out = match (v, target) {
        (FmiValue::Bool(b), RtlType::Logic) => RtlValue::Logic(*b),
        (FmiValue::Binary(bytes), RtlType::BitVector(w)) => {
            RtlValue::Bits(BitVector::from_bytes(w, bytes)?)
        }
        (FmiValue::Float32(x), RtlType::Float32) => RtlValue::Float32(*x),
        (FmiValue::Float64(x), RtlType::Float64) => RtlValue::Float64(*x),
        (_, RtlType::SignedInt(width)) => RtlValue::Int {
            width,
            value: v.as_i128().expect("integer bucket") as i64,
        },
        (_, RtlType::UnsignedInt(width)) => RtlValue::UInt {
            width,
            value: v.as_i128().expect("integer bucket") as u64,
        },
        _ => unreachable!("bucket mapping checked above"),
    };
    out.check(target)?;
    Ok(out)
}
