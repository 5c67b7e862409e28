//! Byte-stable JSON: sorted keys, floats with 17 significant digits.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};
use serde_json::Value;

struct Fixed17;

impl Formatter for Fixed17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value == 0.0 {
            // keep -0.0 and 0.0 identical
            return writer.write_all(b"0.0000000000000000e0");
        }
        write!(writer, "{value:.16e}")
    }
}

/// Canonical text of any serializable value.
///
/// Going through `Value` sorts object keys. Non-finite floats become `null`.
pub fn to_canonical_string<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let v: Value = serde_json::to_value(value)?;
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, Fixed17);
    v.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json emits utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_sorted_and_floats_fixed() {
        let s = to_canonical_string(&json!({"b": 0.1, "a": [1, 2.5]})).unwrap();
        assert_eq!(s, r#"{"a":[1,2.5000000000000000e0],"b":1.0000000000000001e-1}"#);
    }

    #[test]
    fn floats_round_trip() {
        for x in [std::f64::consts::PI, 1e-300, -7.25e12, 0.1 + 0.2] {
            let s = to_canonical_string(&x).unwrap();
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }
}
