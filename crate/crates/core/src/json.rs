//! JSON output with floats written at 17 significant digits, which is
//! enough for every `f64` to parse back bit-exactly.

use std::io::{self, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, Serializer};

use crate::error::Result;

#[derive(Debug, Clone, Copy, Default)]
pub struct SigDigits17;

impl Formatter for SigDigits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }
}

pub fn to_vec<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, SigDigits17);
    value.serialize(&mut ser)?;
    Ok(out)
}

pub fn to_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    Ok(String::from_utf8(to_vec(value)?).expect("serde_json emits UTF-8"))
}

pub fn write_file<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut bytes = to_vec(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn read_file<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let bytes = std::fs::read(path)?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Reads `null` (how non-finite floats are written) back as NaN.
pub fn f64_or_nan<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// Formats a float at 17 significant digits, for CSV output.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn floats_roundtrip_bit_exactly(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let s = to_string(&vec![v]).unwrap();
            let back: Vec<f64> = serde_json::from_str(&s).unwrap();
            prop_assert_eq!(back[0].to_bits(), v.to_bits());
        }
    }

    #[test]
    fn null_reads_as_nan() {
        #[derive(serde::Deserialize)]
        struct W {
            #[serde(deserialize_with = "f64_or_nan")]
            v: f64,
        }
        let w: W = serde_json::from_str(&to_string(&serde_json::json!({"v": null})).unwrap()).unwrap();
        assert!(w.v.is_nan());
        let w: W = serde_json::from_str(r#"{"v": 2.5}"#).unwrap();
        assert_eq!(w.v, 2.5);
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(to_string(&0.1f64).unwrap(), "1.0000000000000001e-1");
    }
}
