//! JSON with every float printed to 17 significant digits.

use std::io;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter};

/// Compact formatter whose floats round-trip exactly and print the same
/// digits on every platform.
struct Sig17;

impl Formatter for Sig17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(sig17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        CompactFormatter.begin_array(w)
    }
}

/// `d.dddddddddddddddde±x`; zero prints as `0.0000000000000000e0`.
pub fn sig17(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

/// One JSON document followed by a newline.
pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    value.serialize(&mut serde_json::Serializer::with_formatter(&mut buf, Sig17))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_use_seventeen_digits() {
        assert_eq!(sig17(1.0), "1.0000000000000000e0");
        assert_eq!(sig17(-0.0), "0.0000000000000000e0");
        assert_eq!(sig17(0.1), "1.0000000000000001e-1");
        let x = std::f64::consts::PI;
        assert_eq!(sig17(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn documents_parse_back() {
        let s = to_json(&serde_json::json!({"a": [1.5, 2], "b": null, "c": f64::NAN})).unwrap();
        assert_eq!(s, "{\"a\":[1.5000000000000000e0,2],\"b\":null,\"c\":null}\n");
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["a"][0].as_f64(), Some(1.5));
    }
}
