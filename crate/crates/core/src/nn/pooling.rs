use serde::{Deserialize, Serialize};

use super::params::{Grads, ParamId, ParamStore};
use super::sequence::Packed;
use super::tensor::{Scalar, Tensor2};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolingScheme {
    Last,
    Mean,
    Attention,
}

impl std::str::FromStr for PoolingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "last" => Ok(Self::Last),
            "mean" => Ok(Self::Mean),
            "attention" => Ok(Self::Attention),
            _ => Err(Error::Usage(format!(
                "unknown pooling scheme '{s}' (expected last, mean or attention)"
            ))),
        }
    }
}

impl std::fmt::Display for PoolingScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Last => "last",
            Self::Mean => "mean",
            Self::Attention => "attention",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttentionMode {
    /// `α = softmax(u·y)`.
    #[default]
    SingleSoftmax,
    /// `α = softmax(softmax(u·y))`.
    LiteralDoubleSoftmax,
}

/// Weighted pooling `z = Σ_t α_t y_t` over the valid frames of each item.
#[derive(Debug, Clone)]
pub struct Pooling {
    pub scheme: PoolingScheme,
    pub mode: AttentionMode,
    /// Attention vector, present only for [`PoolingScheme::Attention`].
    pub u: Option<ParamId>,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct PoolCache<T> {
    input: Packed<T>,
    /// Packed per-frame weights α.
    alpha: Vec<T>,
    /// First softmax of the literal mode.
    inner: Option<Vec<T>>,
}

impl<T> PoolCache<T> {
    pub fn weights(&self) -> &[T] {
        &self.alpha
    }
}

fn softmax_in_place<T: Scalar>(x: &mut [T]) {
    let max = x.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in x.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    x.iter_mut().for_each(|v| *v /= sum);
}

/// Softmax backward: `dx = p ⊙ (dp − ⟨p, dp⟩)`.
fn softmax_backward<T: Scalar>(p: &[T], dp: &[T], dx: &mut [T]) {
    let dot: T = p.iter().zip(dp).map(|(&a, &b)| a * b).sum();
    for ((d, &pi), &g) in dx.iter_mut().zip(p).zip(dp) {
        *d = pi * (g - dot);
    }
}

impl Pooling {
    /// Attention vector initialized to the constant `1/len`.
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        scheme: PoolingScheme,
        mode: AttentionMode,
        dim: usize,
        len: usize,
    ) -> Self {
        let u = (scheme == PoolingScheme::Attention)
            .then(|| store.constant(format!("{name}.u"), dim, 1, T::of(1.0 / len.max(1) as f64)));
        Self { scheme, mode, u, dim }
    }

    pub fn param_count(&self) -> usize {
        if self.u.is_some() {
            self.dim
        } else {
            0
        }
    }

    /// Returns the pooled `B × n` matrix and a cache holding the weights.
    pub fn forward<T: Scalar>(&self, store: &ParamStore<T>, y: Packed<T>) -> Result<(Tensor2<T>, PoolCache<T>)> {
        if y.dim() != self.dim {
            return Err(Error::Shape(format!(
                "pooling expects {} features, got {}",
                self.dim,
                y.dim()
            )));
        }
        let n = self.dim;
        let rows = y.data.rows;
        let mut alpha = vec![T::zero(); rows];
        let mut inner = None;
        match self.scheme {
            PoolingScheme::Last => {
                for (i, &len) in y.lengths.iter().enumerate() {
                    alpha[y.offsets[i] + len - 1] = T::one();
                }
            }
            PoolingScheme::Mean => {
                for (i, &len) in y.lengths.iter().enumerate() {
                    let w = T::one() / T::of(len as f64);
                    alpha[y.offsets[i]..y.offsets[i] + len].iter_mut().for_each(|a| *a = w);
                }
            }
            PoolingScheme::Attention => {
                let u = store.value(self.u.expect("attention pooling owns u"));
                for (r, a) in alpha.iter_mut().enumerate() {
                    *a = y.data.row(r).iter().zip(u).map(|(&h, &w)| h * w).sum();
                }
                let mut first = Vec::new();
                for (i, &len) in y.lengths.iter().enumerate() {
                    let seg = &mut alpha[y.offsets[i]..y.offsets[i] + len];
                    softmax_in_place(seg);
                    if self.mode == AttentionMode::LiteralDoubleSoftmax {
                        first.extend_from_slice(seg);
                        softmax_in_place(seg);
                    }
                }
                if self.mode == AttentionMode::LiteralDoubleSoftmax {
                    inner = Some(first);
                }
            }
        }
        let mut z = Tensor2::zeros(y.batch(), n);
        for (i, &len) in y.lengths.iter().enumerate() {
            let zr = z.row_mut(i);
            for r in y.offsets[i]..y.offsets[i] + len {
                let a = alpha[r];
                for (o, &h) in zr.iter_mut().zip(y.data.row(r)) {
                    *o += a * h;
                }
            }
        }
        Ok((z, PoolCache { input: y, alpha, inner }))
    }

    /// Returns `dY` (packed) and accumulates `du`.
    pub fn backward<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        cache: &PoolCache<T>,
        dz: &Tensor2<T>,
        grads: &mut Grads<T>,
    ) -> Tensor2<T> {
        let y = &cache.input;
        let n = self.dim;
        let mut dy = Tensor2::zeros(y.data.rows, n);
        for (i, &len) in y.lengths.iter().enumerate() {
            let dzr = dz.row(i);
            for r in y.offsets[i]..y.offsets[i] + len {
                let a = cache.alpha[r];
                for (d, &g) in dy.row_mut(r).iter_mut().zip(dzr) {
                    *d = a * g;
                }
            }
        }
        if let (PoolingScheme::Attention, Some(uid)) = (self.scheme, self.u) {
            let u = store.value(uid).to_vec();
            let mut du = vec![T::zero(); n];
            for (i, &len) in y.lengths.iter().enumerate() {
                let range = y.offsets[i]..y.offsets[i] + len;
                let dzr = dz.row(i);
                let dalpha: Vec<T> = range
                    .clone()
                    .map(|r| y.data.row(r).iter().zip(dzr).map(|(&h, &g)| h * g).sum())
                    .collect();
                let mut ds = vec![T::zero(); len];
                softmax_backward(&cache.alpha[range.clone()], &dalpha, &mut ds);
                if let Some(first) = &cache.inner {
                    let da = ds.clone();
                    softmax_backward(&first[range.clone()], &da, &mut ds);
                }
                for (k, r) in range.enumerate() {
                    let s = ds[k];
                    let h = y.data.row(r);
                    for j in 0..n {
                        du[j] += s * h[j];
                    }
                    for (d, &w) in dy.row_mut(r).iter_mut().zip(&u) {
                        *d += s * w;
                    }
                }
            }
            for (g, d) in grads.get_mut(uid).iter_mut().zip(du) {
                *g += d;
            }
        }
        dy
    }
}

/// Padded-layout pooling: `outputs` is `B × L × n` with a true-prefix `B × L`
/// mask. Returns `z` (`B × n`) and the weights (`B × L`, zero on masked frames).
pub fn pool<T: Scalar>(
    outputs: &[T],
    mask: &[bool],
    batch: usize,
    len: usize,
    pooling: &Pooling,
    store: &ParamStore<T>,
) -> Result<(Tensor2<T>, Vec<T>)> {
    let packed = Packed::from_padded(outputs, mask, batch, len, pooling.dim)
        .map_err(|e| Error::Invariant(format!("pooling precondition: {e}")))?;
    let (z, cache) = pooling.forward(store, packed)?;
    let mut weights = vec![T::zero(); batch * len];
    for (i, &l) in cache.input.lengths.iter().enumerate() {
        let off = cache.input.offsets[i];
        weights[i * len..i * len + l].copy_from_slice(&cache.alpha[off..off + l]);
    }
    Ok((z, weights))
}
