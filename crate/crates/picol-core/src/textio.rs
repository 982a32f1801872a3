//! Small helpers shared by the CSV readers and writers.
//!
//! Floats are written with `{}` (shortest round-trip representation) so that
//! write-then-parse recovers the exact same bits.

use std::fmt::Write as _;

pub(crate) fn write_float_row(out: &mut String, t: u32, values: &[f64]) {
    let _ = write!(out, "{t}");
    for v in values {
        let _ = write!(out, ",{v}");
    }
    out.push('\n');
}

pub(crate) fn parse_f64(field: &str, line_no: usize) -> Result<f64, String> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| format!("line {line_no}: not a number: {field:?}"))
}

pub(crate) fn parse_u32(field: &str, line_no: usize) -> Result<u32, String> {
    field
        .trim()
        .parse::<u32>()
        .map_err(|_| format!("line {line_no}: not an integer: {field:?}"))
}

/// FNV-1a over a byte slice; used for stable config fingerprints.
pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
