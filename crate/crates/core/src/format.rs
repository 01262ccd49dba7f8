//! Number rendering shared by the CSV and JSON emitters.
//!
//! CSV cells carry 12 significant digits with a `.` decimal separator. JSON
//! values are plain numbers when 12 significant digits reproduce the `f64`
//! exactly and decimal strings (shortest round-trip form) otherwise, so dumps
//! can be read back bit-for-bit.

use serde::{Deserialize, Deserializer, Serializer};

/// Renders `x` with `digits` significant digits, positional notation for
/// moderate exponents and scientific notation otherwise.
pub fn sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-5..15).contains(&exp) {
        return format!("{}e{}", trim_zeros(mantissa), exp);
    }
    let negative = mantissa.starts_with('-');
    let mut body: String = mantissa.chars().filter(|ch| ch.is_ascii_digit()).collect();
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if exp >= 0 {
        let int_len = exp as usize + 1;
        while body.len() < int_len {
            body.push('0');
        }
        out.push_str(&body[..int_len]);
        if body.len() > int_len {
            out.push('.');
            out.push_str(&body[int_len..]);
        }
    } else {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
        out.push_str(&body);
    }
    trim_zeros(&out).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// 12 significant digits, the CSV convention.
pub fn csv_num(x: f64) -> String {
    sig(x, 12)
}

/// JSON value for `x` under the 12-digit rule.
pub fn json_num(x: f64) -> serde_json::Value {
    let short = sig(x, 12);
    if x.is_finite() && short.parse::<f64>().ok() == Some(x) {
        match serde_json::from_str(&short) {
            Ok(v) => v,
            Err(_) => serde_json::Value::String(short),
        }
    } else {
        serde_json::Value::String(format!("{x:?}"))
    }
}

/// `#[serde(with = "cbond_core::format::num")]` adapter for `f64` fields.
pub mod num {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        serde::Serialize::serialize(&json_num(*x), s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum NumOrStr {
            Num(f64),
            Str(String),
        }
        match NumOrStr::deserialize(d)? {
            NumOrStr::Num(x) => Ok(x),
            NumOrStr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }

    /// Same rule for `Option<f64>`; `None` is `null`.
    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match x {
                Some(v) => super::serialize(v, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            #[derive(Deserialize)]
            struct Wrap(#[serde(with = "super")] f64);
            Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn significant_digits() {
        assert_eq!(sig(0.293213456789123, 12), "0.293213456789");
        assert_eq!(sig(1.25, 12), "1.25");
        assert_eq!(sig(-0.025, 12), "-0.025");
        assert_eq!(sig(1234567.0, 4), "1235000");
        assert_eq!(sig(1.0e-9, 12), "1e-9");
        assert_eq!(sig(6.02214076e23, 5), "6.0221e23");
        assert_eq!(sig(0.0, 12), "0");
        assert_eq!(sig(f64::INFINITY, 12), "inf");
    }

    #[test]
    fn json_rule() {
        assert_eq!(json_num(1.25), serde_json::json!(1.25));
        let v = json_num(1.0 / 3.0);
        assert!(v.is_string());
        assert_eq!(v.as_str().unwrap().parse::<f64>().unwrap(), 1.0 / 3.0);
    }

    proptest! {
        #[test]
        fn json_round_trip(x in prop::num::f64::NORMAL) {
            #[derive(serde::Serialize, serde::Deserialize)]
            struct W(#[serde(with = "num")] f64);
            let text = serde_json::to_string(&W(x)).unwrap();
            let back: W = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back.0.to_bits(), x.to_bits());
        }

        #[test]
        fn csv_cells_parse_close(x in -1e12f64..1e12) {
            let back: f64 = csv_num(x).parse().unwrap();
            prop_assert!((back - x).abs() <= 1e-11 * x.abs().max(1e-300));
        }
    }
}
