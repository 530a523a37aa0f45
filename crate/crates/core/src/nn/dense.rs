use rand::Rng;

use super::params::{Grads, ParamId, ParamStore};
use super::tensor::{gemm, sigmoid, Scalar, Tensor2};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

/// Fully connected layer `y = act(x·W + b)`, `W` stored `in × out`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct DenseCache<T> {
    input: Tensor2<T>,
    output: Tensor2<T>,
}

impl Dense {
    pub fn new<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let w = store.glorot(format!("{name}.W"), inputs, outputs, rng);
        let b = store.zeros(format!("{name}.b"), 1, outputs);
        Self {
            w,
            b,
            inputs,
            outputs,
            activation,
        }
    }

    pub fn param_count(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }

    pub fn forward<T: Scalar>(&self, store: &ParamStore<T>, x: &Tensor2<T>) -> Result<Tensor2<T>> {
        if x.cols != self.inputs {
            return Err(Error::Shape(format!(
                "dense layer expects {} inputs, got {}",
                self.inputs, x.cols
            )));
        }
        let mut y = Tensor2::zeros(x.rows, self.outputs);
        let b = store.value(self.b);
        for r in 0..x.rows {
            y.row_mut(r).copy_from_slice(b);
        }
        gemm(
            false,
            false,
            x.rows,
            self.outputs,
            self.inputs,
            T::one(),
            &x.data,
            self.inputs,
            store.value(self.w),
            self.outputs,
            T::one(),
            &mut y.data,
            self.outputs,
        );
        match self.activation {
            Activation::Identity => {}
            Activation::Relu => y.data.iter_mut().for_each(|v| *v = v.max(T::zero())),
            Activation::Sigmoid => y.data.iter_mut().for_each(|v| *v = sigmoid(*v)),
        }
        Ok(y)
    }

    pub fn forward_cached<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        x: Tensor2<T>,
    ) -> Result<(Tensor2<T>, DenseCache<T>)> {
        let y = self.forward(store, &x)?;
        Ok((
            y.clone(),
            DenseCache {
                input: x,
                output: y,
            },
        ))
    }

    /// Accumulates `dW`, `db` and returns `dx`.
    pub fn backward<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        cache: &DenseCache<T>,
        mut dy: Tensor2<T>,
        grads: &mut Grads<T>,
    ) -> Tensor2<T> {
        let out = &cache.output;
        match self.activation {
            Activation::Identity => {}
            Activation::Relu => dy
                .data
                .iter_mut()
                .zip(&out.data)
                .for_each(|(d, &y)| {
                    if y <= T::zero() {
                        *d = T::zero()
                    }
                }),
            Activation::Sigmoid => dy
                .data
                .iter_mut()
                .zip(&out.data)
                .for_each(|(d, &y)| *d *= y * (T::one() - y)),
        }
        let x = &cache.input;
        gemm(
            true,
            false,
            self.inputs,
            self.outputs,
            x.rows,
            T::one(),
            &x.data,
            self.inputs,
            &dy.data,
            self.outputs,
            T::one(),
            grads.get_mut(self.w),
            self.outputs,
        );
        let db = grads.get_mut(self.b);
        for r in 0..dy.rows {
            for (g, &d) in db.iter_mut().zip(dy.row(r)) {
                *g += d;
            }
        }
        let mut dx = Tensor2::zeros(x.rows, self.inputs);
        gemm(
            false,
            true,
            x.rows,
            self.inputs,
            self.outputs,
            T::one(),
            &dy.data,
            self.outputs,
            store.value(self.w),
            self.outputs,
            T::zero(),
            &mut dx.data,
            self.inputs,
        );
        dx
    }
}
