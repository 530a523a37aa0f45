use rand::Rng;

use super::tensor::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub value: Vec<T>,
}

impl<T> Param<T> {
    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Every trainable tensor of a model, addressed by [`ParamId`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, rows: usize, cols: usize, value: Vec<T>) -> ParamId {
        assert_eq!(value.len(), rows * cols);
        self.params.push(Param {
            name: name.into(),
            rows,
            cols,
            value,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        self.add(name, rows, cols, vec![T::zero(); rows * cols])
    }

    pub fn constant(&mut self, name: impl Into<String>, rows: usize, cols: usize, v: T) -> ParamId {
        self.add(name, rows, cols, vec![v; rows * cols])
    }

    /// Glorot-uniform `fan_in × fan_out` weight.
    pub fn glorot<R: Rng>(&mut self, name: impl Into<String>, rows: usize, cols: usize, rng: &mut R) -> ParamId {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let v = (0..rows * cols)
            .map(|_| T::of(rng.gen_range(-limit..limit)))
            .collect();
        self.add(name, rows, cols, v)
    }

    pub fn get(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &[T] {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut [T] {
        &mut self.params[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total trainable scalars.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(Param::len).sum()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn grads(&self) -> Grads<T> {
        Grads {
            data: self.params.iter().map(|p| vec![T::zero(); p.len()]).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    rows: p.rows,
                    cols: p.cols,
                    value: p.value.iter().map(|v| U::of(v.f64())).collect(),
                })
                .collect(),
        }
    }
}

/// Gradient buffers shaped like a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads<T> {
    pub data: Vec<Vec<T>>,
}

impl<T: Scalar> Grads<T> {
    pub fn get(&self, id: ParamId) -> &[T] {
        &self.data[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [T] {
        &mut self.data[id.0]
    }

    pub fn global_norm(&self) -> f64 {
        self.data
            .iter()
            .flatten()
            .map(|g| g.f64() * g.f64())
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales so the global L2 norm is at most `max_norm`; returns the
    /// pre-clip norm.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm.is_finite() {
            let s = T::of(max_norm / norm);
            self.data.iter_mut().flatten().for_each(|g| *g *= s);
        }
        norm
    }
}
