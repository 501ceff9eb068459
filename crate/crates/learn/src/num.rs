//! Serde helpers that write floats with 17 significant digits.

use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;
use serde_json::value::RawValue;

fn raw(v: f64) -> Box<RawValue> {
    let text = if v.is_finite() { format!("{v:.16e}") } else { "null".to_string() };
    RawValue::from_string(text).expect("formatted float is valid JSON")
}

struct Num(f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        raw(self.0).serialize(s)
    }
}

struct Row<'a>(&'a [f64]);

impl Serialize for Row<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.0.len()))?;
        for &v in self.0 {
            seq.serialize_element(&Num(v))?;
        }
        seq.end()
    }
}

pub fn f64<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    Num(*v).serialize(s)
}

pub fn vec<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
    Row(v).serialize(s)
}

pub fn pair<S: Serializer>(v: &(f64, f64), s: S) -> Result<S::Ok, S::Error> {
    Row(&[v.0, v.1]).serialize(s)
}

pub fn matrix<S: Serializer>(v: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for row in v {
        seq.serialize_element(&Row(row))?;
    }
    seq.end()
}
