use super::tensor::{Scalar, Tensor2};
use crate::error::{Error, Result};

/// Variable-length sequences stored back to back: item `i` occupies rows
/// `offsets[i] .. offsets[i] + lengths[i]` of `data`. Only valid frames are
/// stored, so masked positions never enter any computation.
#[derive(Debug, Clone, PartialEq)]
pub struct Packed<T> {
    pub lengths: Vec<usize>,
    pub offsets: Vec<usize>,
    pub data: Tensor2<T>,
}

impl<T: Scalar> Packed<T> {
    pub fn from_rows(lengths: Vec<usize>, data: Tensor2<T>) -> Result<Self> {
        if lengths.iter().any(|&l| l == 0) {
            return Err(Error::Validation("every sequence needs a valid frame".into()));
        }
        let total: usize = lengths.iter().sum();
        if total != data.rows {
            return Err(Error::Shape(format!(
                "lengths sum to {total} but data has {} rows",
                data.rows
            )));
        }
        let offsets = lengths
            .iter()
            .scan(0, |acc, &l| {
                let o = *acc;
                *acc += l;
                Some(o)
            })
            .collect();
        Ok(Self {
            lengths,
            offsets,
            data,
        })
    }

    /// Packs a padded `B × L × d` tensor with a true-prefix `B × L` mask.
    pub fn from_padded(values: &[T], mask: &[bool], batch: usize, len: usize, dim: usize) -> Result<Self> {
        if values.len() != batch * len * dim || mask.len() != batch * len {
            return Err(Error::Shape(format!(
                "padded batch expects {}x{}x{} values and {}x{} mask entries",
                batch, len, dim, batch, len
            )));
        }
        let mut lengths = Vec::with_capacity(batch);
        let mut data = Vec::new();
        for b in 0..batch {
            let m = &mask[b * len..(b + 1) * len];
            let valid = m.iter().take_while(|&&v| v).count();
            if m[valid..].iter().any(|&v| v) {
                return Err(Error::Validation(format!("mask of item {b} is not a true prefix")));
            }
            lengths.push(valid);
            data.extend_from_slice(&values[b * len * dim..(b * len + valid) * dim]);
        }
        let rows = data.len() / dim.max(1);
        Self::from_rows(lengths, Tensor2::from_vec(rows, dim, data)?)
    }

    pub fn batch(&self) -> usize {
        self.lengths.len()
    }

    pub fn dim(&self) -> usize {
        self.data.cols
    }

    pub fn max_len(&self) -> usize {
        self.lengths.iter().copied().max().unwrap_or(0)
    }

    pub fn frame(&self, item: usize, t: usize) -> &[T] {
        self.data.row(self.offsets[item] + t)
    }

    pub fn with_data(&self, data: Tensor2<T>) -> Self {
        Self {
            lengths: self.lengths.clone(),
            offsets: self.offsets.clone(),
            data,
        }
    }

    pub fn cast<U: Scalar>(&self) -> Packed<U> {
        Packed {
            lengths: self.lengths.clone(),
            offsets: self.offsets.clone(),
            data: self.data.cast(),
        }
    }

    /// Expands back to `B × len × d`, repeating each item's last valid frame
    /// over its padded tail (the frozen-state view of recurrent outputs).
    pub fn to_padded_frozen(&self, len: usize) -> Vec<T> {
        let d = self.dim();
        let mut out = Vec::with_capacity(self.batch() * len * d);
        for i in 0..self.batch() {
            for t in 0..len {
                out.extend_from_slice(self.frame(i, t.min(self.lengths[i] - 1)));
            }
        }
        out
    }
}
