//! Canonical text form: sorted object keys, no whitespace, reals at six
//! significant digits. Equal values always produce equal bytes.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Canon {
    Null,
    Bool(bool),
    Int(i64),
    Real(f64),
    Str(String),
    Array(Vec<Canon>),
    Object(BTreeMap<String, Canon>),
}

/// Types with a canonical form.
pub trait Canonical {
    fn canon(&self) -> Canon;
}

impl Canon {
    pub fn object<K: Into<String>>(fields: impl IntoIterator<Item = (K, Canon)>) -> Canon {
        Canon::Object(fields.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn ints<T: Copy + Into<i64>>(values: &[T]) -> Canon {
        Canon::Array(values.iter().map(|&v| Canon::Int(v.into())).collect())
    }

    pub fn reals(values: &[f64]) -> Canon {
        Canon::Array(values.iter().map(|&v| Canon::Real(v)).collect())
    }

    pub fn str(s: impl Into<String>) -> Canon {
        Canon::Str(s.into())
    }

    /// Parses JSON text into a canonical value. Numbers without a fraction or
    /// exponent that fit in `i64` become `Int`.
    pub fn parse(bytes: &[u8]) -> Result<Canon> {
        let v: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| Error::Decode {
            artifact: "canonical".into(),
            msg: e.to_string(),
        })?;
        Ok(from_json(v))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        write_value(self, &mut out)?;
        Ok(out)
    }
}

fn from_json(v: serde_json::Value) -> Canon {
    use serde_json::Value;
    match v {
        Value::Null => Canon::Null,
        Value::Bool(b) => Canon::Bool(b),
        Value::Number(n) => match n.as_i64() {
            Some(i) => Canon::Int(i),
            None => Canon::Real(n.as_f64().unwrap_or(f64::NAN)),
        },
        Value::String(s) => Canon::Str(s),
        Value::Array(a) => Canon::Array(a.into_iter().map(from_json).collect()),
        Value::Object(o) => Canon::Object(o.into_iter().map(|(k, v)| (k, from_json(v))).collect()),
    }
}

fn write_value(v: &Canon, out: &mut Vec<u8>) -> Result<()> {
    match v {
        Canon::Null => out.extend_from_slice(b"null"),
        Canon::Bool(b) => out.extend_from_slice(if *b { b"true" } else { b"false" }),
        Canon::Int(i) => out.extend_from_slice(i.to_string().as_bytes()),
        Canon::Real(r) => out.extend_from_slice(format_real(*r)?.as_bytes()),
        Canon::Str(s) => write_str(s, out),
        Canon::Array(items) => {
            out.push(b'[');
            for (n, item) in items.iter().enumerate() {
                if n > 0 {
                    out.push(b',');
                }
                write_value(item, out)?;
            }
            out.push(b']');
        }
        Canon::Object(fields) => {
            out.push(b'{');
            for (n, (k, item)) in fields.iter().enumerate() {
                if n > 0 {
                    out.push(b',');
                }
                write_str(k, out);
                out.push(b':');
                write_value(item, out)?;
            }
            out.push(b'}');
        }
    }
    Ok(())
}

fn write_str(s: &str, out: &mut Vec<u8>) {
    // serde_json escaping is already minimal and stable
    out.extend_from_slice(serde_json::to_string(s).expect("string serialization").as_bytes());
}

/// Shortest rendering of `x` rounded to six significant digits. Plain
/// positional notation for decimal exponents in [-6, 21), otherwise `d.ddde±x`.
pub fn format_real(x: f64) -> Result<String> {
    if !x.is_finite() {
        return Err(Error::NonFinite);
    }
    if x == 0.0 {
        return Ok("0".into());
    }
    let sci = format!("{:.5e}", x.abs());
    let (mantissa, exp) = sci.split_once('e').expect("exponent in scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let mut s = String::new();
    if x < 0.0 {
        s.push('-');
    }
    let len = digits.len() as i32;
    if (-6..21).contains(&exp) {
        if exp < 0 {
            s.push_str("0.");
            s.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
            s.push_str(digits);
        } else if exp + 1 >= len {
            s.push_str(digits);
            s.extend(std::iter::repeat_n('0', (exp + 1 - len) as usize));
        } else {
            let (int, frac) = digits.split_at((exp + 1) as usize);
            s.push_str(int);
            s.push('.');
            s.push_str(frac);
        }
    } else {
        let (first, rest) = digits.split_at(1);
        s.push_str(first);
        if !rest.is_empty() {
            s.push('.');
            s.push_str(rest);
        }
        s.push('e');
        s.push_str(&exp.to_string());
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_list_two_bytes() {
        assert_eq!(Canon::Array(vec![]).to_bytes().unwrap(), b"[]");
        assert_eq!(Canon::object::<&str>([]).to_bytes().unwrap(), b"{}");
    }

    #[test]
    fn reals() {
        let cases = [
            (1.0, "1"),
            (-2.5, "-2.5"),
            (0.1, "0.1"),
            (1.0 / 3.0, "0.333333"),
            (123456.7, "123457"),
            (1234567.0, "1234570"),
            (1e21, "1e21"),
            (1.5e-7, "1.5e-7"),
            (0.000123456789, "0.000123457"),
            (-0.0, "0"),
            (999999.5, "1000000"),
        ];
        for (x, want) in cases {
            assert_eq!(format_real(x).unwrap(), want, "{x}");
        }
        assert!(format_real(f64::NAN).is_err());
        assert!(format_real(f64::INFINITY).is_err());
        assert!(Canon::Array(vec![Canon::Real(f64::NEG_INFINITY)]).to_bytes().is_err());
    }

    #[test]
    fn keys_sorted_no_whitespace() {
        let a = Canon::object([("b", Canon::Int(1)), ("a", Canon::str("x y")), ("ab", Canon::Null)]);
        let b = Canon::object([("ab", Canon::Null), ("b", Canon::Int(1)), ("a", Canon::str("x y"))]);
        assert_eq!(a.to_bytes().unwrap(), br#"{"a":"x y","ab":null,"b":1}"#);
        assert_eq!(a.to_bytes().unwrap(), b.to_bytes().unwrap());
    }

    #[test]
    fn string_escapes() {
        let v = Canon::str("q\"\n\\é");
        assert_eq!(v.to_bytes().unwrap(), "\"q\\\"\\n\\\\é\"".as_bytes());
    }

    fn arb_canon() -> impl Strategy<Value = Canon> {
        let leaf = prop_oneof![
            Just(Canon::Null),
            any::<bool>().prop_map(Canon::Bool),
            any::<i64>().prop_map(Canon::Int),
            (-1e30f64..1e30).prop_map(Canon::Real),
            "[a-z\\\\\"]{0,6}".prop_map(Canon::Str),
        ];
        leaf.prop_recursive(3, 32, 6, |inner| {
            prop_oneof![
                proptest::collection::vec(inner.clone(), 0..6).prop_map(Canon::Array),
                proptest::collection::btree_map("[a-z]{0,4}", inner, 0..6).prop_map(Canon::Object),
            ]
        })
    }

    proptest! {
        #[test]
        fn serialize_parse_serialize_is_stable(v in arb_canon()) {
            let once = v.to_bytes().unwrap();
            let twice = Canon::parse(&once).unwrap().to_bytes().unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn six_digit_rounding_is_close(x in -1e12f64..1e12) {
            let s = format_real(x).unwrap();
            let back: f64 = s.parse().unwrap();
            prop_assert!((back - x).abs() <= x.abs() * 5e-6 + 1e-300);
            prop_assert_eq!(format_real(back).unwrap(), s);
        }
    }
}
