//! Backend-aware JSON serialization of scalars and result records.

use nctr_core::scalar::{CBig, Rat, C64};
use serde_json::{json, Value};

/// Scalar-to-JSON conversion per backend. Rationals serialize as exact
/// "num/den" strings; doubles as shortest round-trip decimal plus a hex-float
/// field; big floats as their full-precision decimal rendering.
pub trait ScalarJson {
    fn to_json(&self) -> Value;
}

impl ScalarJson for Rat {
    fn to_json(&self) -> Value {
        Value::String(format!("{}/{}", self.numer(), self.denom()))
    }
}

impl ScalarJson for C64 {
    fn to_json(&self) -> Value {
        if self.im == 0.0 {
            json!({ "dec": format!("{}", self.re), "hex": hex_f64(self.re) })
        } else {
            json!({
                "re": { "dec": format!("{}", self.re), "hex": hex_f64(self.re) },
                "im": { "dec": format!("{}", self.im), "hex": hex_f64(self.im) },
            })
        }
    }
}

impl ScalarJson for CBig {
    fn to_json(&self) -> Value {
        if self.im().is_zero() {
            Value::String(format!("{}", self.re()))
        } else {
            json!({ "re": format!("{}", self.re()), "im": format!("{}", self.im()) })
        }
    }
}

/// Hex-float rendering of an f64 (C99 `%a` style, lowercase).
pub fn hex_f64(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0x0p+0".into()
        } else {
            "0x0p+0".into()
        };
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & 0x000f_ffff_ffff_ffff;
    let (lead, exp) = if exp_bits == 0 {
        // subnormal
        (0u64, -1022i64)
    } else {
        (1u64, exp_bits - 1023)
    };
    let mut mantissa = format!("{frac:013x}");
    while mantissa.len() > 1 && mantissa.ends_with('0') {
        mantissa.pop();
    }
    if frac == 0 {
        format!("{sign}0x{lead}p{exp:+}")
    } else {
        format!("{sign}0x{lead}.{mantissa}p{exp:+}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nctr_core::rat;

    #[test]
    fn rational_json_is_exact_string() {
        assert_eq!(rat(-3, 7).to_json(), Value::String("-3/7".into()));
        assert_eq!(rat(5, 1).to_json(), Value::String("5/1".into()));
    }

    #[test]
    fn hex_floats() {
        assert_eq!(hex_f64(1.0), "0x1p+0");
        assert_eq!(hex_f64(-2.5), "-0x1.4p+1");
        assert_eq!(hex_f64(0.5125), "0x1.0666666666666p-1");
        // round-trip through bits
        for v in [0.1, -3.75, 1e-300, 6.02e23] {
            let h = hex_f64(v);
            assert!(h.starts_with("0x") || h.starts_with("-0x"));
        }
    }
}
