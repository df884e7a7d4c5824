use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One named tensor inside a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub shape: Vec<usize>,
}

impl ParamBlock {
    pub fn new(name: impl Into<String>, shape: Vec<usize>) -> Self {
        Self {
            name: name.into(),
            shape,
        }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Flat `f64` storage plus the block layout that gives it structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub layout: Vec<ParamBlock>,
    #[serde(with = "precise")]
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(layout: Vec<ParamBlock>) -> Self {
        let n = layout.iter().map(ParamBlock::numel).sum();
        Self {
            layout,
            values: vec![0.0; n],
        }
    }

    pub fn from_parts(layout: Vec<ParamBlock>, values: Vec<f64>) -> Result<Self> {
        let n: usize = layout.iter().map(ParamBlock::numel).sum();
        if n != values.len() {
            return Err(Error::Shape {
                what: "parameter vector",
                expected: n,
                got: values.len(),
            });
        }
        Ok(Self { layout, values })
    }

    /// A zero vector with the same layout, used for gradients and optimizer moments.
    pub fn zeros_like(&self) -> Self {
        Self {
            layout: self.layout.clone(),
            values: vec![0.0; self.values.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_layout(&self, other: &ParamVector) -> bool {
        self.layout == other.layout && self.values.len() == other.values.len()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Offset of block `i` within `values`.
    pub fn offset(&self, i: usize) -> usize {
        self.layout[..i].iter().map(ParamBlock::numel).sum()
    }

    pub fn block(&self, i: usize) -> &[f64] {
        let start = self.offset(i);
        &self.values[start..start + self.layout[i].numel()]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        let start = self.offset(i);
        let n = self.layout[i].numel();
        &mut self.values[start..start + n]
    }

    pub fn add_assign(&mut self, other: &ParamVector) {
        debug_assert!(self.same_layout(other));
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            *v *= s;
        }
    }
}

/// Serializes `f64` slices as JSON numbers with 17 significant digits.
pub mod precise {
    use serde::de::Deserializer;
    use serde::ser::{Error as _, SerializeSeq, Serializer};
    use serde::Deserialize;
    use serde_json::value::RawValue;

    pub fn format(v: f64) -> String {
        format!("{v:.16e}")
    }

    pub fn serialize<S: Serializer>(values: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(values.len()))?;
        for &v in values {
            if !v.is_finite() {
                return Err(S::Error::custom("cannot serialize a non-finite value"));
            }
            let raw = RawValue::from_string(format(v)).map_err(S::Error::custom)?;
            seq.serialize_element(&raw)?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<f64>::deserialize(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_length_checked() {
        let layout = vec![
            ParamBlock::new("w", vec![2, 3]),
            ParamBlock::new("b", vec![2]),
        ];
        assert!(ParamVector::from_parts(layout.clone(), vec![0.0; 8]).is_ok());
        assert!(matches!(
            ParamVector::from_parts(layout, vec![0.0; 7]),
            Err(Error::Shape {
                expected: 8,
                got: 7,
                ..
            })
        ));
    }

    #[test]
    fn seventeen_significant_digits() {
        let s = precise::format(0.1);
        let mantissa = s.split('e').next().unwrap().replace(['.', '-'], "");
        assert_eq!(mantissa.len(), 17);
    }

    proptest! {
        #[test]
        fn json_round_trip_is_exact(values in proptest::collection::vec(-1e300f64..1e300, 1..40)) {
            let n = values.len();
            let pv = ParamVector::from_parts(vec![ParamBlock::new("v", vec![n])], values).unwrap();
            let text = serde_json::to_string(&pv).unwrap();
            let back: ParamVector = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(pv, back);
        }
    }
}
