//! Text rendering of 64-bit floats with 17 significant digits.
//!
//! Seventeen digits round-trip every finite `f64` exactly, so the wire
//! protocol and the CSV telemetry stay bit-exact across encode/decode.

/// Renders `x` as `d.dddddddddddddddde±XX` (17 significant digits, signed
/// two-digit-minimum exponent).
pub fn sci17(x: f64) -> String {
    let s = format!("{x:.16e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent in float format");
    let (sign, digits) = match exp.strip_prefix('-') {
        Some(d) => ('-', d),
        None => ('+', exp),
    };
    if digits.len() >= 2 {
        format!("{mantissa}e{sign}{digits}")
    } else {
        format!("{mantissa}e{sign}0{digits}")
    }
}

/// Parses a finite float, rejecting NaN and infinities.
pub fn parse_finite(text: &str) -> Option<f64> {
    let v: f64 = text.parse().ok()?;
    v.is_finite().then_some(v)
}
