//! The single-feature LSTM classifiers and the late and weighted-pooling
//! fusion architectures.

mod checkpoint;
mod config;
pub mod toy;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{BranchConfig, ModelConfig, ModelKind, PoolingConfig};

use crate::error::{Error, Result};
use crate::features::FeatureKind;
use crate::nn::{
    loss, Activation, Dense, DenseCache, Dropout, Grads, LstmCache, Lstm, Packed, ParamId,
    ParamStore, PoolCache, Pooling, Scalar, Tensor2,
};

/// A mini-batch: packed sequences for each branch the model consumes, in
/// clip order, plus the class labels (empty for inference).
#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub logmel: Option<Packed<T>>,
    pub modspec: Option<Packed<T>>,
    pub labels: Vec<usize>,
}

impl<T: Scalar> Batch<T> {
    pub fn input(&self, kind: FeatureKind) -> Option<&Packed<T>> {
        match kind {
            FeatureKind::Logmel => self.logmel.as_ref(),
            FeatureKind::Modulation => self.modspec.as_ref(),
        }
    }

    pub fn len(&self) -> usize {
        self.logmel
            .as_ref()
            .or(self.modspec.as_ref())
            .map_or(0, |p| p.batch())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cast<U: Scalar>(&self) -> Batch<U> {
        let c = |p: &Packed<T>| p.cast();
        Batch {
            logmel: self.logmel.as_ref().map(c),
            modspec: self.modspec.as_ref().map(c),
            labels: self.labels.clone(),
        }
    }
}

#[derive(Debug, Clone)]
struct Trunk {
    kind: FeatureKind,
    input: Dense,
    lstm: Lstm,
    pool: Pooling,
}

#[derive(Debug, Clone)]
struct TrunkCache<T> {
    input: DenseCache<T>,
    lstm: LstmCache<T>,
    pool: PoolCache<T>,
}

impl Trunk {
    fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        kind: FeatureKind,
        cfg: &ModelConfig,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let b = cfg.branch(kind);
        let name = kind.name();
        let input = Dense::new(store, &format!("{name}.dense1"), b.n_features, b.n_dense1, Activation::Relu, rng);
        let lstm = Lstm::new(store, &format!("{name}.lstm"), b.n_dense1, b.n_lstm, rng);
        let pool = Pooling::new(
            store,
            &format!("{name}.pool"),
            cfg.pooling.scheme,
            cfg.pooling.mode,
            b.n_lstm,
            b.len,
        );
        Self { kind, input, lstm, pool }
    }

    fn forward<T: Scalar>(&self, store: &ParamStore<T>, x: &Packed<T>) -> Result<(Tensor2<T>, TrunkCache<T>)> {
        let (h, input) = self.input.forward_cached(store, x.data.clone())?;
        let (y, lstm) = self.lstm.forward(store, x.with_data(h))?;
        let (z, pool) = self.pool.forward(store, y)?;
        Ok((z, TrunkCache { input, lstm, pool }))
    }

    fn backward<T: Scalar>(&self, store: &ParamStore<T>, c: &TrunkCache<T>, dz: &Tensor2<T>, g: &mut Grads<T>) {
        let dy = self.pool.backward(store, &c.pool, dz, g);
        let dh = self.lstm.backward(store, &c.lstm, &dy, g);
        self.input.backward(store, &c.input, dh, g);
    }
}

#[derive(Debug, Clone)]
struct Head {
    hidden: Dense,
    dropout: Dropout,
    out: Dense,
}

#[derive(Debug, Clone)]
struct HeadCache<T> {
    hidden: DenseCache<T>,
    mask: Option<Vec<T>>,
    out: DenseCache<T>,
}

impl Head {
    fn forward<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        z: Tensor2<T>,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Tensor2<T>, HeadCache<T>)> {
        let (h, hidden) = self.hidden.forward_cached(store, z)?;
        let (h, mask) = self.dropout.forward(h, rng);
        let (o, out) = self.out.forward_cached(store, h)?;
        Ok((o, HeadCache { hidden, mask, out }))
    }

    fn backward<T: Scalar>(&self, store: &ParamStore<T>, c: &HeadCache<T>, d: Tensor2<T>, g: &mut Grads<T>) -> Tensor2<T> {
        let dh = self.out.backward(store, &c.out, d, g);
        let dh = Dropout::backward(c.mask.as_deref(), dh);
        self.hidden.backward(store, &c.hidden, dh, g)
    }
}

#[derive(Debug, Clone)]
enum Net {
    Single { trunk: Trunk, head: Head },
    Late { branches: Vec<(Trunk, Head)>, fuse: Dense },
    Wp { trunks: Vec<Trunk>, head: Head },
}

#[derive(Debug, Clone)]
enum NetCache<T> {
    Single {
        trunk: TrunkCache<T>,
        head: HeadCache<T>,
    },
    Late {
        branches: Vec<(TrunkCache<T>, HeadCache<T>, Tensor2<T>)>,
        fuse: DenseCache<T>,
    },
    Wp {
        trunks: Vec<TrunkCache<T>>,
        head: HeadCache<T>,
    },
}

#[derive(Debug, Clone)]
struct ForwardCache<T> {
    net: NetCache<T>,
    output: Tensor2<T>,
    labels: Vec<usize>,
}

/// Frame weights of one branch for every item of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchWeights {
    pub kind: FeatureKind,
    /// Per item, the weight of each valid frame.
    pub weights: Vec<Vec<f64>>,
}

/// A model instance: its configuration, parameters and the cache of the
/// last training forward pass.
#[derive(Debug, Clone)]
pub struct Model<T> {
    config: ModelConfig,
    pub store: ParamStore<T>,
    net: Net,
    frozen: Vec<ParamId>,
    cache: Option<ForwardCache<T>>,
}

impl<T: Scalar> Model<T> {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let head = |store: &mut ParamStore<T>, name: &str, inputs: usize, hidden: usize, act: Activation, rng: &mut ChaCha8Rng| Head {
            hidden: Dense::new(store, &format!("{name}.dense2"), inputs, hidden, Activation::Relu, rng),
            dropout: Dropout::new(config.dropout),
            out: Dense::new(store, &format!("{name}.out"), hidden, config.n_classes, act, rng),
        };
        let net = match config.kind {
            ModelKind::SingleLogmel | ModelKind::SingleModspec => {
                let kind = config.kind.branches()[0];
                let trunk = Trunk::new(&mut store, kind, &config, &mut rng);
                let b = config.branch(kind);
                let head = head(&mut store, kind.name(), b.n_lstm, b.n_dense2, Activation::Identity, &mut rng);
                Net::Single { trunk, head }
            }
            ModelKind::LateFusion => {
                let mut branches = Vec::new();
                for &kind in config.kind.branches() {
                    let trunk = Trunk::new(&mut store, kind, &config, &mut rng);
                    let b = config.branch(kind);
                    let h = head(&mut store, kind.name(), b.n_lstm, b.n_dense2, Activation::Identity, &mut rng);
                    branches.push((trunk, h));
                }
                let n = config.n_classes;
                let fuse = Dense::new(&mut store, "fusion.out", 2 * n, n, Activation::Sigmoid, &mut rng);
                Net::Late { branches, fuse }
            }
            ModelKind::WpFusion => {
                let trunks: Vec<Trunk> = config
                    .kind
                    .branches()
                    .iter()
                    .map(|&k| Trunk::new(&mut store, k, &config, &mut rng))
                    .collect();
                let width: usize = config.kind.branches().iter().map(|&k| config.branch(k).n_lstm).sum();
                let hidden: usize = config.kind.branches().iter().map(|&k| config.branch(k).n_dense2).sum();
                let head = head(&mut store, "fusion", width, hidden, Activation::Sigmoid, &mut rng);
                Net::Wp { trunks, head }
            }
        };
        let frozen = if config.freeze_branches {
            store
                .iter()
                .enumerate()
                .filter(|(_, p)| !p.name.starts_with("fusion."))
                .map(|(i, _)| ParamId(i))
                .collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            config,
            store,
            net,
            frozen,
            cache: None,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Total trainable scalars.
    pub fn count_params(&self) -> usize {
        self.store.scalar_count()
    }

    /// Scalars in the LSTM blocks only.
    pub fn lstm_param_count(&self) -> usize {
        self.store
            .iter()
            .filter(|p| p.name.contains(".lstm."))
            .map(|p| p.len())
            .sum()
    }

    /// Whether the output layer is a sigmoid (fusion) head.
    pub fn sigmoid_head(&self) -> bool {
        self.config.kind.is_fusion()
    }

    fn check_batch(&self, batch: &Batch<T>) -> Result<usize> {
        let mut size = None;
        for &k in self.config.kind.branches() {
            let p = batch.input(k).ok_or_else(|| {
                Error::Validation(format!("{} model needs {} inputs", self.config.kind, k.name()))
            })?;
            let want = self.config.branch(k).n_features;
            if p.dim() != want {
                return Err(Error::Shape(format!(
                    "{} input has {} features, expected {want}",
                    k.name(),
                    p.dim()
                )));
            }
            if *size.get_or_insert(p.batch()) != p.batch() {
                return Err(Error::Validation("branch inputs hold different clip counts".into()));
            }
        }
        Ok(size.unwrap_or(0))
    }

    fn run(&self, batch: &Batch<T>, mut rng: Option<&mut ChaCha8Rng>) -> Result<(Tensor2<T>, NetCache<T>)> {
        self.check_batch(batch)?;
        let s = &self.store;
        let input = |t: &Trunk| batch.input(t.kind).expect("checked");
        Ok(match &self.net {
            Net::Single { trunk, head } => {
                let (z, tc) = trunk.forward(s, input(trunk))?;
                let (logits, hc) = head.forward(s, z, rng)?;
                (
                    loss::softmax(&logits),
                    NetCache::Single { trunk: tc, head: hc },
                )
            }
            Net::Late { branches, fuse } => {
                let mut caches = Vec::new();
                let mut cat: Option<Tensor2<T>> = None;
                for (trunk, head) in branches {
                    let (z, tc) = trunk.forward(s, input(trunk))?;
                    let (logits, hc) = head.forward(s, z, rng.as_deref_mut())?;
                    let p = loss::softmax(&logits);
                    cat = Some(match cat {
                        None => p.clone(),
                        Some(c) => c.hcat(&p)?,
                    });
                    caches.push((tc, hc, p));
                }
                let (out, fc) = fuse.forward_cached(s, cat.expect("two branches"))?;
                (
                    out,
                    NetCache::Late {
                        branches: caches,
                        fuse: fc,
                    },
                )
            }
            Net::Wp { trunks, head } => {
                let mut caches = Vec::new();
                let mut cat: Option<Tensor2<T>> = None;
                for trunk in trunks {
                    let (z, tc) = trunk.forward(s, input(trunk))?;
                    cat = Some(match cat {
                        None => z,
                        Some(c) => c.hcat(&z)?,
                    });
                    caches.push(tc);
                }
                let (out, hc) = head.forward(s, cat.expect("two branches"), rng)?;
                (out, NetCache::Wp { trunks: caches, head: hc })
            }
        })
    }

    /// Inference forward pass: class probabilities (single models) or sigmoid
    /// scores (fusion models), `B × n_classes`.
    pub fn predict(&self, batch: &Batch<T>) -> Result<Tensor2<T>> {
        Ok(self.run(batch, None)?.0)
    }

    /// Predicted class per clip (argmax of the raw outputs).
    pub fn classify(&self, batch: &Batch<T>) -> Result<Vec<usize>> {
        Ok(loss::argmax_rows(&self.predict(batch)?))
    }

    /// Mean cross-entropy of `batch` without dropout.
    pub fn loss(&self, batch: &Batch<T>) -> Result<f64> {
        let out = self.predict(batch)?;
        if self.sigmoid_head() {
            loss::cross_entropy(&loss::renormalize(&out), &batch.labels)
        } else {
            loss::cross_entropy(&out, &batch.labels)
        }
    }

    /// Training forward pass. Dropout is active when `rng` is given. The
    /// cache is kept for [`Model::backward`]. Returns outputs and loss.
    pub fn forward_train(&mut self, batch: &Batch<T>, rng: Option<&mut ChaCha8Rng>) -> Result<(Tensor2<T>, f64)> {
        let (output, net) = self.run(batch, rng)?;
        let loss = if self.sigmoid_head() {
            loss::cross_entropy(&loss::renormalize(&output), &batch.labels)?
        } else {
            loss::cross_entropy(&output, &batch.labels)?
        };
        self.cache = Some(ForwardCache {
            net,
            output: output.clone(),
            labels: batch.labels.clone(),
        });
        Ok((output, loss))
    }

    /// Gradients of the loss of the last [`Model::forward_train`] call.
    pub fn backward(&mut self) -> Result<Grads<T>> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::State("backward called before forward".into()))?;
        let s = &self.store;
        let mut g = s.grads();
        match (&self.net, &cache.net) {
            (Net::Single { trunk, head }, NetCache::Single { trunk: tc, head: hc }) => {
                let (_, dlogits) = loss::softmax_ce_grad(&cache.output, &cache.labels)?;
                let dz = head.backward(s, hc, dlogits, &mut g);
                trunk.backward(s, tc, &dz, &mut g);
            }
            (Net::Late { branches, fuse }, NetCache::Late { branches: bc, fuse: fc }) => {
                let (_, ds) = loss::sigmoid_ce_grad(&cache.output, &cache.labels)?;
                let dcat = fuse.backward(s, fc, ds, &mut g);
                let n = self.config.n_classes;
                let (da, db) = dcat.hsplit(n);
                for ((trunk, head), ((tc, hc, p), dp)) in branches.iter().zip(bc.iter().zip([da, db])) {
                    let dlogits = softmax_rows_backward(p, &dp);
                    let dz = head.backward(s, hc, dlogits, &mut g);
                    trunk.backward(s, tc, &dz, &mut g);
                }
            }
            (Net::Wp { trunks, head }, NetCache::Wp { trunks: tcs, head: hc }) => {
                let (_, ds) = loss::sigmoid_ce_grad(&cache.output, &cache.labels)?;
                let dcat = head.backward(s, hc, ds, &mut g);
                let mut at = 0;
                for (trunk, tc) in trunks.iter().zip(tcs) {
                    let w = trunk.pool.dim;
                    let (_, rest) = dcat.hsplit(at);
                    let (dz, _) = rest.hsplit(w);
                    trunk.backward(s, tc, &dz, &mut g);
                    at += w;
                }
            }
            _ => return Err(Error::Invariant("forward cache does not match the network".into())),
        }
        for &id in &self.frozen {
            g.get_mut(id).iter_mut().for_each(|v| *v = T::zero());
        }
        Ok(g)
    }

    /// Forward and backward in one call.
    pub fn loss_and_grads(&mut self, batch: &Batch<T>, rng: Option<&mut ChaCha8Rng>) -> Result<(f64, Grads<T>)> {
        let (_, loss) = self.forward_train(batch, rng)?;
        Ok((loss, self.backward()?))
    }

    /// Pooling weights of every branch for every clip in `batch`.
    pub fn frame_weights(&self, batch: &Batch<T>) -> Result<Vec<BranchWeights>> {
        let (_, cache) = self.run(batch, None)?;
        let trunk_caches: Vec<(FeatureKind, &TrunkCache<T>)> = match (&self.net, &cache) {
            (Net::Single { trunk, .. }, NetCache::Single { trunk: tc, .. }) => vec![(trunk.kind, tc)],
            (Net::Late { branches, .. }, NetCache::Late { branches: bc, .. }) => branches
                .iter()
                .zip(bc)
                .map(|((t, _), (c, _, _))| (t.kind, c))
                .collect(),
            (Net::Wp { trunks, .. }, NetCache::Wp { trunks: tc, .. }) => {
                trunks.iter().zip(tc).map(|(t, c)| (t.kind, c)).collect()
            }
            _ => return Err(Error::Invariant("forward cache does not match the network".into())),
        };
        Ok(trunk_caches
            .into_iter()
            .map(|(kind, c)| {
                let x = batch.input(kind).expect("checked");
                let w = c.pool.weights();
                BranchWeights {
                    kind,
                    weights: (0..x.batch())
                        .map(|i| {
                            w[x.offsets[i]..x.offsets[i] + x.lengths[i]]
                                .iter()
                                .map(|v| v.f64())
                                .collect()
                        })
                        .collect(),
                }
            })
            .collect())
    }

    /// Copies every parameter whose name and shape also occur in `other`,
    /// e.g. pretrained single-feature branches into a fusion model. Returns
    /// the number of tensors copied.
    pub fn init_from(&mut self, other: &Model<T>) -> usize {
        let mut copied = 0;
        for p in self.store.iter_mut() {
            if let Some(id) = other.store.find(&p.name) {
                let q = other.store.get(id);
                if q.rows == p.rows && q.cols == p.cols {
                    p.value.copy_from_slice(&q.value);
                    copied += 1;
                }
            }
        }
        copied
    }

    /// The same model at another precision.
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            store: self.store.cast(),
            net: self.net.clone(),
            frozen: self.frozen.clone(),
            cache: None,
        }
    }
}

/// Row-wise softmax backward given the probabilities.
fn softmax_rows_backward<T: Scalar>(p: &Tensor2<T>, dp: &Tensor2<T>) -> Tensor2<T> {
    let mut d = Tensor2::zeros(p.rows, p.cols);
    for r in 0..p.rows {
        let (pr, gr) = (p.row(r), dp.row(r));
        let dot: T = pr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
        for (o, (&a, &b)) in d.row_mut(r).iter_mut().zip(pr.iter().zip(gr)) {
            *o = a * (b - dot);
        }
    }
    d
}
