//! Serialization of extended reals: infinities and NaN become strings.

use serde::Serializer;

/// Writes finite values as numbers and `±∞` as `"inf"` / `"-inf"`.
pub fn ext<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

/// [`ext`] applied elementwise.
pub fn ext_vec<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        seq.serialize_element(&Ext(*x))?;
    }
    seq.end()
}

/// [`ext`] applied to an optional value.
pub fn ext_opt<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => ext(x, s),
        None => s.serialize_none(),
    }
}

/// A float serialized through [`ext`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ext(pub f64);

impl serde::Serialize for Ext {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ext(&self.0, s)
    }
}
