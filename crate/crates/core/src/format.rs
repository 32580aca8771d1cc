//! Decimal output at 17 significant digits, enough to round-trip any `f64`.

/// Formats like C's `%#.17g`: fixed notation for moderate exponents,
/// scientific otherwise, always 17 significant digits.
pub fn fmt_sig17(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.16e}");
    let exp: i32 = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .expect("scientific format always carries an exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp) as usize;
        format!("{x:.decimals$}")
    } else {
        sci
    }
}

/// Integer-valued reals print as integers, everything else at 17 digits.
pub fn fmt_label(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        fmt_sig17(x)
    }
}
