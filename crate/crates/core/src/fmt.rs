//! Numeric formatting shared by every CSV writer.

/// Formats like C's `%.17g`: 17 significant digits, trailing zeros trimmed,
/// exponent notation outside `1e-5 <= |v| < 1e17`.
pub fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let m = trim_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    t.to_string()
}

#[cfg(test)]
mod tests {
    use super::fmt_num;
    use proptest::prelude::*;

    #[test]
    fn matches_printf_g17() {
        assert_eq!(fmt_num(2.0), "2");
        assert_eq!(fmt_num(0.1), "0.10000000000000001");
        assert_eq!(fmt_num(-1.5), "-1.5");
        assert_eq!(fmt_num(1e20), "1e+20");
        assert_eq!(fmt_num(1.25e-7), "1.2499999999999999e-07");
        assert_eq!(fmt_num(123456.0), "123456");
        assert_eq!(fmt_num(0.0), "0");
    }

    proptest! {
        #[test]
        fn round_trips(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            let s = fmt_num(v);
            prop_assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }
}
