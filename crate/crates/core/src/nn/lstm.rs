use rand::Rng;

use super::params::{Grads, ParamId, ParamStore};
use super::sequence::Packed;
use super::tensor::{gemm, sigmoid, Scalar, Tensor2};
use crate::error::{Error, Result};

/// Single-layer LSTM with gate blocks ordered input, forget, cell, output.
///
/// `W` is `input × 4n`, `U` is `n × 4n`, `b` is `1 × 4n`. Masked timesteps
/// carry the hidden and cell state through unchanged, so only valid frames are
/// computed and the output at a padded position equals the last valid output.
#[derive(Debug, Clone)]
pub struct Lstm {
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
    pub inputs: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone)]
pub struct LstmCache<T> {
    input: Packed<T>,
    /// Item indices sorted by decreasing length; the active items at step t
    /// are always a prefix of this order.
    order: Vec<usize>,
    /// Post-activation gates `[i f g o]`, packed `N × 4n`.
    gates: Tensor2<T>,
    cell: Tensor2<T>,
    output: Tensor2<T>,
}

/// Parameter count of an LSTM block: `4·(n·(d + n) + n)`.
pub fn lstm_param_count(inputs: usize, hidden: usize) -> usize {
    4 * (hidden * (inputs + hidden) + hidden)
}

impl Lstm {
    pub fn new<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        inputs: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let w = store.glorot(format!("{name}.W"), inputs, 4 * hidden, rng);
        let u = store.glorot(format!("{name}.U"), hidden, 4 * hidden, rng);
        let mut bias = vec![T::zero(); 4 * hidden];
        bias[hidden..2 * hidden].iter_mut().for_each(|v| *v = T::one());
        let b = store.add(format!("{name}.b"), 1, 4 * hidden, bias);
        Self {
            w,
            u,
            b,
            inputs,
            hidden,
        }
    }

    pub fn param_count(&self) -> usize {
        lstm_param_count(self.inputs, self.hidden)
    }

    pub fn forward<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        x: Packed<T>,
    ) -> Result<(Packed<T>, LstmCache<T>)> {
        if x.dim() != self.inputs {
            return Err(Error::Shape(format!(
                "LSTM expects {} inputs, got {}",
                self.inputs,
                x.dim()
            )));
        }
        let n = self.hidden;
        let g4 = 4 * n;
        let rows = x.data.rows;
        let batch = x.batch();

        // Input projections for every valid frame in one product.
        let mut gates = Tensor2::zeros(rows, g4);
        let bias = store.value(self.b);
        for r in 0..rows {
            gates.row_mut(r).copy_from_slice(bias);
        }
        gemm(
            false,
            false,
            rows,
            g4,
            self.inputs,
            T::one(),
            &x.data.data,
            self.inputs,
            store.value(self.w),
            g4,
            T::one(),
            &mut gates.data,
            g4,
        );

        let mut order: Vec<usize> = (0..batch).collect();
        order.sort_by(|&a, &b| x.lengths[b].cmp(&x.lengths[a]));
        let mut cell = Tensor2::zeros(rows, n);
        let mut output = Tensor2::zeros(rows, n);
        let mut h_prev = vec![T::zero(); batch * n];
        let mut c_prev = vec![T::zero(); batch * n];
        let mut z = vec![T::zero(); batch * g4];
        let u = store.value(self.u);

        for t in 0..x.max_len() {
            let active = order.iter().take_while(|&&i| x.lengths[i] > t).count();
            for (r, &item) in order[..active].iter().enumerate() {
                z[r * g4..(r + 1) * g4].copy_from_slice(gates.row(x.offsets[item] + t));
            }
            if t > 0 {
                gemm(
                    false,
                    false,
                    active,
                    g4,
                    n,
                    T::one(),
                    &h_prev,
                    n,
                    u,
                    g4,
                    T::one(),
                    &mut z,
                    g4,
                );
            }
            for (r, &item) in order[..active].iter().enumerate() {
                let row = x.offsets[item] + t;
                let zr = &mut z[r * g4..(r + 1) * g4];
                for j in 0..n {
                    let i_g = sigmoid(zr[j]);
                    let f_g = sigmoid(zr[n + j]);
                    let g_g = zr[2 * n + j].tanh();
                    let o_g = sigmoid(zr[3 * n + j]);
                    zr[j] = i_g;
                    zr[n + j] = f_g;
                    zr[2 * n + j] = g_g;
                    zr[3 * n + j] = o_g;
                    let c = f_g * c_prev[r * n + j] + i_g * g_g;
                    let h = o_g * c.tanh();
                    c_prev[r * n + j] = c;
                    h_prev[r * n + j] = h;
                }
                gates.row_mut(row).copy_from_slice(zr);
                cell.row_mut(row).copy_from_slice(&c_prev[r * n..(r + 1) * n]);
                output.row_mut(row).copy_from_slice(&h_prev[r * n..(r + 1) * n]);
            }
        }
        let y = x.with_data(output.clone());
        Ok((
            y,
            LstmCache {
                input: x,
                order,
                gates,
                cell,
                output,
            },
        ))
    }

    /// Backpropagation through time. `dy` holds the loss gradient w.r.t. every
    /// packed output; returns the gradient w.r.t. the packed input.
    pub fn backward<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        cache: &LstmCache<T>,
        dy: &Tensor2<T>,
        grads: &mut Grads<T>,
    ) -> Tensor2<T> {
        let n = self.hidden;
        let g4 = 4 * n;
        let x = &cache.input;
        let batch = x.batch();
        let rows = x.data.rows;
        let u = store.value(self.u);

        let mut dz_all = Tensor2::zeros(rows, g4);
        let mut dh_next = vec![T::zero(); batch * n];
        let mut dc_next = vec![T::zero(); batch * n];
        let mut dz = vec![T::zero(); batch * g4];
        let mut h_prev = vec![T::zero(); batch * n];
        let mut du = vec![T::zero(); n * g4];

        for t in (0..x.max_len()).rev() {
            let active = cache
                .order
                .iter()
                .take_while(|&&i| x.lengths[i] > t)
                .count();
            for (r, &item) in cache.order[..active].iter().enumerate() {
                let row = x.offsets[item] + t;
                let gate = cache.gates.row(row);
                let c = cache.cell.row(row);
                let c_prev = (t > 0).then(|| cache.cell.row(row - 1));
                let dyr = dy.row(row);
                for j in 0..n {
                    let (i_g, f_g, g_g, o_g) = (gate[j], gate[n + j], gate[2 * n + j], gate[3 * n + j]);
                    let tc = c[j].tanh();
                    let dh = dyr[j] + dh_next[r * n + j];
                    let d_o = dh * tc;
                    let dc = dc_next[r * n + j] + dh * o_g * (T::one() - tc * tc);
                    let cp = c_prev.map_or(T::zero(), |p| p[j]);
                    dz[r * g4 + j] = dc * g_g * i_g * (T::one() - i_g);
                    dz[r * g4 + n + j] = dc * cp * f_g * (T::one() - f_g);
                    dz[r * g4 + 2 * n + j] = dc * i_g * (T::one() - g_g * g_g);
                    dz[r * g4 + 3 * n + j] = d_o * o_g * (T::one() - o_g);
                    dc_next[r * n + j] = dc * f_g;
                }
                dz_all.row_mut(row).copy_from_slice(&dz[r * g4..(r + 1) * g4]);
            }
            if t > 0 {
                for (r, &item) in cache.order[..active].iter().enumerate() {
                    let row = x.offsets[item] + t - 1;
                    h_prev[r * n..(r + 1) * n].copy_from_slice(cache.output.row(row));
                }
                // dU += h_{t-1}^T dz_t
                gemm(
                    true, false, n, g4, active, T::one(), &h_prev, n, &dz, g4, T::one(), &mut du, g4,
                );
                // dh_{t-1} = dz_t U^T
                gemm(
                    false,
                    true,
                    active,
                    n,
                    g4,
                    T::one(),
                    &dz,
                    g4,
                    u,
                    g4,
                    T::zero(),
                    &mut dh_next,
                    n,
                );
            }
        }
        for (g, d) in grads.get_mut(self.u).iter_mut().zip(&du) {
            *g += *d;
        }
        gemm(
            true,
            false,
            self.inputs,
            g4,
            rows,
            T::one(),
            &x.data.data,
            self.inputs,
            &dz_all.data,
            g4,
            T::one(),
            grads.get_mut(self.w),
            g4,
        );
        let db = grads.get_mut(self.b);
        for r in 0..rows {
            for (g, &d) in db.iter_mut().zip(dz_all.row(r)) {
                *g += d;
            }
        }
        let mut dx = Tensor2::zeros(rows, self.inputs);
        gemm(
            false,
            true,
            rows,
            self.inputs,
            g4,
            T::one(),
            &dz_all.data,
            g4,
            store.value(self.w),
            g4,
            T::zero(),
            &mut dx.data,
            self.inputs,
        );
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn counts_match_reference_blocks() {
        assert_eq!(lstm_param_count(32, 64), 24832);
        assert_eq!(lstm_param_count(100, 64), 42240);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = ParamStore::<f32>::new();
        let l = Lstm::new(&mut s, "lstm", 32, 64, &mut rng);
        assert_eq!(s.scalar_count(), l.param_count());
    }

    #[test]
    fn zero_weights_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = ParamStore::<f64>::new();
        let l = Lstm::new(&mut s, "lstm", 3, 4, &mut rng);
        for p in s.iter_mut() {
            p.value.iter_mut().for_each(|v| *v = 0.0);
        }
        let x = Packed::from_rows(vec![5, 2], Tensor2::zeros(7, 3)).unwrap();
        let (y, _) = l.forward(&s, x).unwrap();
        assert!(y.data.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_gate_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = ParamStore::<f64>::new();
        let l = Lstm::new(&mut s, "lstm", 1, 1, &mut rng);
        s.value_mut(l.w).copy_from_slice(&[0.5, -0.3, 0.8, 1.2]);
        s.value_mut(l.u).copy_from_slice(&[0.1, 0.2, 0.3, 0.4]);
        s.value_mut(l.b).copy_from_slice(&[0.05, 1.0, -0.1, 0.2]);
        let x = 0.7;
        let (y, _) = l
            .forward(&s, Packed::from_rows(vec![1], Tensor2::from_vec(1, 1, vec![x]).unwrap()).unwrap())
            .unwrap();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let i = sig(0.5 * x + 0.05);
        let g = (0.8 * x - 0.1).tanh();
        let o = sig(1.2 * x + 0.2);
        let c = i * g; // zero initial cell state
        let h = o * c.tanh();
        assert!((y.data.data[0] - h).abs() < 1e-12);
    }

    fn toy(seed: u64) -> (ParamStore<f64>, Lstm, Packed<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ParamStore::<f64>::new();
        let l = Lstm::new(&mut s, "lstm", 3, 4, &mut rng);
        let lengths = vec![6, 2, 4];
        let rows: usize = lengths.iter().sum();
        let x: Vec<f64> = (0..rows * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let probe: Vec<f64> = (0..rows * 4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = Packed::from_rows(lengths, Tensor2::from_vec(rows, 3, x).unwrap()).unwrap();
        (s, l, x, probe)
    }

    #[test]
    fn bptt_matches_finite_differences() {
        let (s, l, x, probe) = toy(3);
        let (_, cache) = l.forward(&s, x.clone()).unwrap();
        let mut g = s.grads();
        let dy = Tensor2::from_vec(x.data.rows, 4, probe.clone()).unwrap();
        let dx = l.backward(&s, &cache, &dy, &mut g);
        let loss = |st: &ParamStore<f64>, xx: &Packed<f64>| {
            let (y, _) = l.forward(st, xx.clone()).unwrap();
            y.data.data.iter().zip(&probe).map(|(a, b)| a * b).sum::<f64>()
        };
        let rep = crate::nn::check_gradients(&s, &g, 1e-5, |st| loss(st, &x));
        assert!(rep.max_rel_error < 1e-6, "{rep:?}");
        for k in 0..x.data.data.len() {
            let mut up = x.clone();
            up.data.data[k] += 1e-5;
            let mut down = x.clone();
            down.data.data[k] -= 1e-5;
            let num = (loss(&s, &up) - loss(&s, &down)) / 2e-5;
            assert!(crate::nn::relative_error(dx.data[k], num, 1e-6) < 1e-6);
        }
    }

    #[test]
    fn masked_tail_is_bit_exact() {
        let (s, l, x, _) = toy(5);
        let (y, _) = l.forward(&s, x.clone()).unwrap();
        // Same items in a padded layout with ten extra masked frames.
        let len = x.max_len() + 10;
        let mut values = vec![f64::NAN; x.batch() * len * 3];
        let mut mask = vec![false; x.batch() * len];
        for i in 0..x.batch() {
            for t in 0..x.lengths[i] {
                values[(i * len + t) * 3..(i * len + t + 1) * 3].copy_from_slice(x.frame(i, t));
                mask[i * len + t] = true;
            }
        }
        let packed = Packed::from_padded(&values, &mask, x.batch(), len, 3).unwrap();
        let (y2, _) = l.forward(&s, packed).unwrap();
        assert_eq!(y.data, y2.data);
        let frozen = y2.to_padded_frozen(len);
        for i in 0..x.batch() {
            let last = y2.frame(i, x.lengths[i] - 1);
            assert_eq!(&frozen[(i * len + len - 1) * 4..(i * len + len) * 4], last);
        }
    }
}
