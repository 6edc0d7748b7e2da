//! Flat parameter vectors with named block layouts.

use std::ops::{Deref, DerefMut, Range};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{MpfError, Result};

/// One named contiguous block of a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterBlock {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

impl ParameterBlock {
    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.len
    }
}

/// Maps model parameter groups (pair couplings, biases, filters) onto index ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterLayout {
    blocks: Vec<ParameterBlock>,
}

impl ParameterLayout {
    pub fn new<S: Into<String>>(blocks: impl IntoIterator<Item = (S, usize)>) -> Self {
        let mut start = 0;
        let blocks = blocks
            .into_iter()
            .map(|(name, len)| {
                let b = ParameterBlock {
                    name: name.into(),
                    start,
                    len,
                };
                start += len;
                b
            })
            .collect();
        Self { blocks }
    }

    pub fn len(&self) -> usize {
        self.blocks.last().map(|b| b.start + b.len).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn blocks(&self) -> &[ParameterBlock] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Option<&ParameterBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }
}

/// A flat real vector tagged with the layout it was packed under.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    values: Vec<f64>,
    layout: Arc<ParameterLayout>,
}

impl ParameterVector {
    pub fn new(values: Vec<f64>, layout: Arc<ParameterLayout>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(MpfError::DimensionMismatch {
                what: "parameter vector",
                expected: layout.len(),
                got: values.len(),
            });
        }
        Ok(Self { values, layout })
    }

    pub fn zeros(layout: Arc<ParameterLayout>) -> Self {
        Self {
            values: vec![0.0; layout.len()],
            layout,
        }
    }

    pub fn layout(&self) -> &Arc<ParameterLayout> {
        &self.layout
    }

    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.layout.block(name).map(|b| &self.values[b.range()])
    }

    /// Splits into (name, values) pairs in layout order.
    pub fn unpack(&self) -> Vec<(String, Vec<f64>)> {
        self.layout
            .blocks()
            .iter()
            .map(|b| (b.name.clone(), self.values[b.range()].to_vec()))
            .collect()
    }

    /// Inverse of [`ParameterVector::unpack`]; block order and lengths must match the layout.
    pub fn pack(layout: Arc<ParameterLayout>, blocks: &[(String, Vec<f64>)]) -> Result<Self> {
        if blocks.len() != layout.blocks().len() {
            return Err(MpfError::InvalidArgument(format!(
                "expected {} blocks, got {}",
                layout.blocks().len(),
                blocks.len()
            )));
        }
        let mut values = Vec::with_capacity(layout.len());
        for (spec, (name, vals)) in layout.blocks().iter().zip(blocks) {
            if &spec.name != name || spec.len != vals.len() {
                return Err(MpfError::InvalidArgument(format!(
                    "block {name} does not match layout block {}",
                    spec.name
                )));
            }
            values.extend_from_slice(vals);
        }
        Ok(Self { values, layout })
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

impl Deref for ParameterVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl DerefMut for ParameterVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn pack_unpack_round_trip(a in proptest::collection::vec(-1e6f64..1e6, 0..8),
                                  b in proptest::collection::vec(-1e6f64..1e6, 0..8)) {
            let layout = Arc::new(ParameterLayout::new([("pairs", a.len()), ("bias", b.len())]));
            let mut vals = a.clone();
            vals.extend_from_slice(&b);
            let v = ParameterVector::new(vals.clone(), layout.clone()).unwrap();
            let back = ParameterVector::pack(layout, &v.unpack()).unwrap();
            prop_assert_eq!(&back[..], &vals[..]);
        }
    }

    #[test]
    fn rejects_wrong_length() {
        let layout = Arc::new(ParameterLayout::new([("x", 3)]));
        assert!(ParameterVector::new(vec![1.0], layout).is_err());
    }
}
