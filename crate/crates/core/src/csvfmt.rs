//! C-style float formatting for the CSV surfaces.

/// Format like C's `%.12e`: 12 fractional digits, two-digit signed exponent
/// (e.g. `1.234567890123e+00`). NaN renders as `nan` (used for infeasible
/// entries in sweep tables).
pub fn fmt_e12(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    // negative zero is a float artifact, not a measurement; print it unsigned
    let x = if x == 0.0 { 0.0 } else { x };
    let s = format!("{:.12e}", x);
    let (mantissa, exp) = s.split_once('e').expect("exponential format");
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
