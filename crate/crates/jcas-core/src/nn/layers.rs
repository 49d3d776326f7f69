use rand::Rng;

use super::blocks::{
    AttentionA, AttentionACache, AttentionB, AttentionBCache, MbConv, MbConvCache, SeBlock,
    SeCache, Sequential,
};
use super::init::Init;
use super::ops;
use super::params::{Grads, Param, ParamStore};
use super::tensor::{Scalar, Tensor4};
use super::NnError;

pub const BN_MOMENTUM: f64 = 0.99;
pub const BN_EPS: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// 2D convolution, stride (1,1), same padding, no bias.
#[derive(Clone, Debug)]
pub struct Conv2d {
    pub name: String,
    pub kernel: (usize, usize),
    pub in_ch: usize,
    pub out_ch: usize,
}

impl Conv2d {
    pub fn new(name: impl Into<String>, kernel: (usize, usize), in_ch: usize, out_ch: usize) -> Self {
        Conv2d {
            name: name.into(),
            kernel,
            in_ch,
            out_ch,
        }
    }

    fn weight_name(&self) -> String {
        format!("{}.weight", self.name)
    }
}

#[derive(Clone, Debug)]
pub struct DepthwiseConv2d {
    pub name: String,
    pub kernel: (usize, usize),
    pub ch: usize,
}

impl DepthwiseConv2d {
    pub fn new(name: impl Into<String>, kernel: (usize, usize), ch: usize) -> Self {
        DepthwiseConv2d {
            name: name.into(),
            kernel,
            ch,
        }
    }

    fn weight_name(&self) -> String {
        format!("{}.weight", self.name)
    }
}

/// Fully connected layer on `[b,1,1,in]` activations.
#[derive(Clone, Debug)]
pub struct Dense {
    pub name: String,
    pub in_dim: usize,
    pub out_dim: usize,
    pub bias: bool,
}

impl Dense {
    pub fn new(name: impl Into<String>, in_dim: usize, out_dim: usize, bias: bool) -> Self {
        Dense {
            name: name.into(),
            in_dim,
            out_dim,
            bias,
        }
    }

    fn weight_name(&self) -> String {
        format!("{}.weight", self.name)
    }

    fn bias_name(&self) -> String {
        format!("{}.bias", self.name)
    }
}

/// Per-channel batch normalization with EMA running statistics.
#[derive(Clone, Debug)]
pub struct BatchNorm {
    pub name: String,
    pub ch: usize,
}

impl BatchNorm {
    pub fn new(name: impl Into<String>, ch: usize) -> Self {
        BatchNorm {
            name: name.into(),
            ch,
        }
    }

    fn param(&self, part: &str) -> String {
        format!("{}.{part}", self.name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Swish,
    Sigmoid,
}

#[derive(Clone, Debug)]
pub enum Layer {
    Conv2d(Conv2d),
    Depthwise(DepthwiseConv2d),
    Dense(Dense),
    BatchNorm(BatchNorm),
    Act(Activation),
    Softmax,
    MaxPool {
        pool: (usize, usize),
        stride: (usize, usize),
    },
    AvgPool {
        pool: (usize, usize),
        stride: (usize, usize),
    },
    GlobalMaxPool,
    Flatten,
    /// Doubles both spatial dims by nearest-neighbor replication.
    Upsample2x,
    Se(SeBlock),
    MbConv(Box<MbConv>),
    AttentionA(Box<AttentionA>),
    AttentionB(Box<AttentionB>),
    Seq(Sequential),
}

/// Per-layer forward state needed by the matching backward pass.
#[derive(Clone, Debug)]
pub enum Cache<S> {
    Conv {
        x: Tensor4<S>,
    },
    Depthwise {
        x: Tensor4<S>,
    },
    Dense {
        x: Tensor4<S>,
    },
    BnTrain {
        x_hat: Tensor4<S>,
        inv_std: Vec<S>,
        /// `(running_mean name prefix, new running mean, new running var)`
        /// staged here so the forward pass never mutates the store.
        pending: (String, Vec<S>, Vec<S>),
    },
    BnInfer {
        scale: Vec<S>,
    },
    Act {
        /// Input for relu/swish, output for sigmoid.
        saved: Tensor4<S>,
    },
    Softmax {
        y: Tensor4<S>,
    },
    MaxPool {
        x_dims: [usize; 4],
        argmax: Vec<usize>,
    },
    AvgPool {
        x_dims: [usize; 4],
    },
    GlobalMaxPool {
        x_dims: [usize; 4],
        argmax: Vec<usize>,
    },
    Flatten {
        x_dims: [usize; 4],
    },
    Upsample {
        x_dims: [usize; 4],
    },
    Se(Box<SeCache<S>>),
    MbConv(Box<MbConvCache<S>>),
    AttentionA(Box<AttentionACache<S>>),
    AttentionB(Box<AttentionBCache<S>>),
    Seq(Vec<Cache<S>>),
}

impl Layer {
    /// Registers this layer's parameters, drawing initial values from `rng`.
    /// Traversal order is fixed by construction order, so a given seed always
    /// produces the same weights.
    pub fn init<S: Scalar, R: Rng>(&self, store: &mut ParamStore<S>, rng: &mut R) {
        match self {
            Layer::Conv2d(c) => {
                let (kh, kw) = c.kernel;
                let fan_out = kh * kw * c.out_ch;
                let n = kh * kw * c.in_ch * c.out_ch;
                let w = Init::conv_default().draw(n, fan_out, rng);
                store.insert(c.weight_name(), Param::new([kh, kw, c.in_ch, c.out_ch], w, true));
            }
            Layer::Depthwise(c) => {
                let (kh, kw) = c.kernel;
                let fan_out = kh * kw;
                let w = Init::conv_default().draw(kh * kw * c.ch, fan_out, rng);
                store.insert(c.weight_name(), Param::new([kh, kw, c.ch, 1], w, true));
            }
            Layer::Dense(d) => {
                let w = Init::dense_default().draw(d.in_dim * d.out_dim, d.out_dim, rng);
                store.insert(d.weight_name(), Param::new([1, 1, d.in_dim, d.out_dim], w, true));
                if d.bias {
                    // Biases use the same scaled-uniform draw as the weights.
                    let b = Init::dense_default().draw(d.out_dim, d.out_dim, rng);
                    store.insert(d.bias_name(), Param::new([1, 1, 1, d.out_dim], b, true));
                }
            }
            Layer::BatchNorm(bn) => {
                let c = bn.ch;
                store.insert(
                    bn.param("gamma"),
                    Param::new([1, 1, 1, c], Init::Ones.draw(c, c, rng), true),
                );
                store.insert(
                    bn.param("beta"),
                    Param::new([1, 1, 1, c], Init::Zeros.draw(c, c, rng), true),
                );
                store.insert(
                    bn.param("running_mean"),
                    Param::new([1, 1, 1, c], Init::Zeros.draw(c, c, rng), false),
                );
                store.insert(
                    bn.param("running_var"),
                    Param::new([1, 1, 1, c], Init::Ones.draw(c, c, rng), false),
                );
            }
            Layer::Se(b) => b.init(store, rng),
            Layer::MbConv(b) => b.init(store, rng),
            Layer::AttentionA(b) => b.init(store, rng),
            Layer::AttentionB(b) => b.init(store, rng),
            Layer::Seq(s) => {
                for l in &s.layers {
                    l.init(store, rng);
                }
            }
            _ => {}
        }
    }

    /// Appends the names of this layer's trainable parameters.
    pub fn param_names(&self, out: &mut Vec<String>) {
        match self {
            Layer::Conv2d(c) => out.push(c.weight_name()),
            Layer::Depthwise(c) => out.push(c.weight_name()),
            Layer::Dense(d) => {
                out.push(d.weight_name());
                if d.bias {
                    out.push(d.bias_name());
                }
            }
            Layer::BatchNorm(bn) => {
                out.push(bn.param("gamma"));
                out.push(bn.param("beta"));
            }
            Layer::Se(b) => b.param_names(out),
            Layer::MbConv(b) => b.param_names(out),
            Layer::AttentionA(b) => b.param_names(out),
            Layer::AttentionB(b) => b.param_names(out),
            Layer::Seq(s) => {
                for l in &s.layers {
                    l.param_names(out);
                }
            }
            _ => {}
        }
    }

    /// Output dims for a given input, or a configuration error.
    pub fn out_dims(&self, d: [usize; 4]) -> Result<[usize; 4], NnError> {
        let [b, h, w, c] = d;
        match self {
            Layer::Conv2d(l) => {
                if c != l.in_ch {
                    return Err(NnError::Shape(format!(
                        "{} expects {} channels, got {c}",
                        l.name, l.in_ch
                    )));
                }
                Ok([b, h, w, l.out_ch])
            }
            Layer::Depthwise(l) => {
                if c != l.ch {
                    return Err(NnError::Shape(format!(
                        "{} expects {} channels, got {c}",
                        l.name, l.ch
                    )));
                }
                Ok(d)
            }
            Layer::Dense(l) => {
                if (h, w) != (1, 1) || c != l.in_dim {
                    return Err(NnError::Shape(format!(
                        "{} expects [b,1,1,{}], got {:?}",
                        l.name, l.in_dim, d
                    )));
                }
                Ok([b, 1, 1, l.out_dim])
            }
            Layer::BatchNorm(l) => {
                if c != l.ch {
                    return Err(NnError::Shape(format!(
                        "{} expects {} channels, got {c}",
                        l.name, l.ch
                    )));
                }
                Ok(d)
            }
            Layer::Act(_) | Layer::Softmax => Ok(d),
            Layer::MaxPool { stride, .. } | Layer::AvgPool { stride, .. } => {
                Ok([b, h.div_ceil(stride.0), w.div_ceil(stride.1), c])
            }
            Layer::GlobalMaxPool => Ok([b, 1, 1, c]),
            Layer::Flatten => Ok([b, 1, 1, h * w * c]),
            Layer::Upsample2x => Ok([b, h * 2, w * 2, c]),
            Layer::Se(l) => l.out_dims(d),
            Layer::MbConv(l) => l.out_dims(d),
            Layer::AttentionA(l) => l.out_dims(d),
            Layer::AttentionB(l) => l.out_dims(d),
            Layer::Seq(s) => {
                let mut cur = d;
                for l in &s.layers {
                    cur = l.out_dims(cur)?;
                }
                Ok(cur)
            }
        }
    }

    pub fn forward<S: Scalar>(
        &self,
        x: &Tensor4<S>,
        store: &ParamStore<S>,
        mode: Mode,
    ) -> Result<(Tensor4<S>, Cache<S>), NnError> {
        self.out_dims(x.dims())?;
        match self {
            Layer::Conv2d(l) => {
                let w = &store.get(&l.weight_name()).value;
                let y = ops::conv2d_same(x, w, l.kernel.0, l.kernel.1, l.out_ch);
                Ok((y, Cache::Conv { x: x.clone() }))
            }
            Layer::Depthwise(l) => {
                let w = &store.get(&l.weight_name()).value;
                let y = ops::depthwise_conv2d_same(x, w, l.kernel.0, l.kernel.1);
                Ok((y, Cache::Depthwise { x: x.clone() }))
            }
            Layer::Dense(l) => {
                let w = &store.get(&l.weight_name()).value;
                let bias_store;
                let bias = if l.bias {
                    bias_store = store.get(&l.bias_name()).value.clone();
                    Some(bias_store.as_slice())
                } else {
                    None
                };
                let y = ops::dense(x, w, bias, l.out_dim);
                Ok((y, Cache::Dense { x: x.clone() }))
            }
            Layer::BatchNorm(l) => batchnorm_forward(l, x, store, mode),
            Layer::Act(a) => {
                let (y, saved) = match a {
                    Activation::Relu => (ops::relu_forward(x), x.clone()),
                    Activation::Swish => (ops::swish_forward(x), x.clone()),
                    Activation::Sigmoid => {
                        let y = ops::sigmoid_forward(x);
                        (y.clone(), y)
                    }
                };
                Ok((y, Cache::Act { saved }))
            }
            Layer::Softmax => {
                let y = ops::softmax_channels(x);
                Ok((y.clone(), Cache::Softmax { y }))
            }
            Layer::MaxPool { pool, stride } => {
                let (y, argmax) = ops::maxpool_same(x, *pool, *stride);
                Ok((
                    y,
                    Cache::MaxPool {
                        x_dims: x.dims(),
                        argmax,
                    },
                ))
            }
            Layer::AvgPool { pool, stride } => {
                let y = ops::avgpool_same(x, *pool, *stride);
                Ok((y, Cache::AvgPool { x_dims: x.dims() }))
            }
            Layer::GlobalMaxPool => {
                let (y, argmax) = ops::global_max_pool(x);
                Ok((
                    y,
                    Cache::GlobalMaxPool {
                        x_dims: x.dims(),
                        argmax,
                    },
                ))
            }
            Layer::Flatten => {
                let d = x.dims();
                let y = x.clone().reshape([d[0], 1, 1, d[1] * d[2] * d[3]])?;
                Ok((y, Cache::Flatten { x_dims: d }))
            }
            Layer::Upsample2x => {
                let [_, h, w, _] = x.dims();
                let y = ops::resize_nearest(x, h * 2, w * 2);
                Ok((y, Cache::Upsample { x_dims: x.dims() }))
            }
            Layer::Se(l) => l.forward(x, store, mode),
            Layer::MbConv(l) => l.forward(x, store, mode),
            Layer::AttentionA(l) => l.forward(x, store, mode),
            Layer::AttentionB(l) => l.forward(x, store, mode),
            Layer::Seq(s) => s.forward(x, store, mode),
        }
    }

    pub fn backward<S: Scalar>(
        &self,
        dy: &Tensor4<S>,
        cache: &Cache<S>,
        store: &ParamStore<S>,
        grads: &mut Grads<S>,
    ) -> Result<Tensor4<S>, NnError> {
        match (self, cache) {
            (Layer::Conv2d(l), Cache::Conv { x }) => {
                let w = &store.get(&l.weight_name()).value;
                let (dx, dw) = ops::conv2d_same_backward(x, w, l.kernel.0, l.kernel.1, l.out_ch, dy);
                grads.accumulate(&l.weight_name(), &dw);
                Ok(dx)
            }
            (Layer::Depthwise(l), Cache::Depthwise { x }) => {
                let w = &store.get(&l.weight_name()).value;
                let (dx, dw) = ops::depthwise_conv2d_same_backward(x, w, l.kernel.0, l.kernel.1, dy);
                grads.accumulate(&l.weight_name(), &dw);
                Ok(dx)
            }
            (Layer::Dense(l), Cache::Dense { x }) => {
                let w = &store.get(&l.weight_name()).value;
                let (dx, dw, db) = ops::dense_backward(x, w, l.out_dim, l.bias, dy);
                grads.accumulate(&l.weight_name(), &dw);
                if let Some(db) = db {
                    grads.accumulate(&l.bias_name(), &db);
                }
                Ok(dx)
            }
            (Layer::BatchNorm(l), cache) => batchnorm_backward(l, dy, cache, store, grads),
            (Layer::Act(a), Cache::Act { saved }) => Ok(match a {
                Activation::Relu => ops::relu_backward(saved, dy),
                Activation::Swish => ops::swish_backward(saved, dy),
                Activation::Sigmoid => ops::sigmoid_backward(saved, dy),
            }),
            (Layer::Softmax, Cache::Softmax { y }) => Ok(ops::softmax_backward(y, dy)),
            (Layer::MaxPool { .. }, Cache::MaxPool { x_dims, argmax }) => {
                Ok(ops::maxpool_backward(dy, argmax, *x_dims))
            }
            (Layer::AvgPool { pool, stride }, Cache::AvgPool { x_dims }) => {
                Ok(ops::avgpool_backward(dy, *x_dims, *pool, *stride))
            }
            (Layer::GlobalMaxPool, Cache::GlobalMaxPool { x_dims, argmax }) => {
                Ok(ops::global_max_pool_backward(dy, argmax, *x_dims))
            }
            (Layer::Flatten, Cache::Flatten { x_dims }) => Ok(dy.clone().reshape(*x_dims)?),
            (Layer::Upsample2x, Cache::Upsample { x_dims }) => {
                Ok(ops::resize_nearest_backward(dy, *x_dims))
            }
            (Layer::Se(l), Cache::Se(c)) => l.backward(dy, c, store, grads),
            (Layer::MbConv(l), Cache::MbConv(c)) => l.backward(dy, c, store, grads),
            (Layer::AttentionA(l), Cache::AttentionA(c)) => l.backward(dy, c, store, grads),
            (Layer::AttentionB(l), Cache::AttentionB(c)) => l.backward(dy, c, store, grads),
            (Layer::Seq(s), Cache::Seq(c)) => s.backward(dy, c, store, grads),
            _ => Err(NnError::Config("cache does not match layer".into())),
        }
    }
}

impl<S: Scalar> Cache<S> {
    /// Writes the running-statistic updates staged by train-mode batch norm
    /// forwards into the store. Called once per optimization step, after the
    /// backward pass, so forwards stay pure.
    pub fn apply_bn_updates(&self, store: &mut ParamStore<S>) {
        match self {
            Cache::BnTrain {
                pending: (prefix, mean, var),
                ..
            } => {
                store
                    .get_mut(&format!("{prefix}.running_mean"))
                    .value
                    .clone_from(mean);
                store
                    .get_mut(&format!("{prefix}.running_var"))
                    .value
                    .clone_from(var);
            }
            Cache::Se(c) => c.apply_bn_updates(store),
            Cache::MbConv(c) => c.apply_bn_updates(store),
            Cache::AttentionA(c) => c.apply_bn_updates(store),
            Cache::AttentionB(c) => c.apply_bn_updates(store),
            Cache::Seq(cs) => {
                for c in cs {
                    c.apply_bn_updates(store);
                }
            }
            _ => {}
        }
    }
}

fn batchnorm_forward<S: Scalar>(
    l: &BatchNorm,
    x: &Tensor4<S>,
    store: &ParamStore<S>,
    mode: Mode,
) -> Result<(Tensor4<S>, Cache<S>), NnError> {
    let [b, h, w, c] = x.dims();
    let gamma = &store.get(&l.param("gamma")).value;
    let beta = &store.get(&l.param("beta")).value;
    let eps = S::from_f64(BN_EPS);
    let xd = x.data();
    match mode {
        Mode::Train => {
            let n = b * h * w;
            let inv_n = S::one() / S::from_f64(n as f64);
            let mut mean = vec![S::zero(); c];
            let mut var = vec![S::zero(); c];
            for row in 0..n {
                for ci in 0..c {
                    mean[ci] += xd[row * c + ci];
                }
            }
            for m in mean.iter_mut() {
                *m *= inv_n;
            }
            for row in 0..n {
                for ci in 0..c {
                    let d = xd[row * c + ci] - mean[ci];
                    var[ci] += d * d;
                }
            }
            for v in var.iter_mut() {
                *v *= inv_n;
            }
            let inv_std: Vec<S> = var.iter().map(|&v| S::one() / (v + eps).sqrt()).collect();
            let mut x_hat = Tensor4::zeros(x.dims());
            let mut y = Tensor4::zeros(x.dims());
            {
                let xh = x_hat.data_mut();
                let yd = y.data_mut();
                for row in 0..n {
                    for ci in 0..c {
                        let v = (xd[row * c + ci] - mean[ci]) * inv_std[ci];
                        xh[row * c + ci] = v;
                        yd[row * c + ci] = gamma[ci] * v + beta[ci];
                    }
                }
            }
            let mom = S::from_f64(BN_MOMENTUM);
            let one_m = S::one() - mom;
            let old_mean = &store.get(&l.param("running_mean")).value;
            let old_var = &store.get(&l.param("running_var")).value;
            let new_mean: Vec<S> = old_mean
                .iter()
                .zip(&mean)
                .map(|(&o, &m)| mom * o + one_m * m)
                .collect();
            let new_var: Vec<S> = old_var
                .iter()
                .zip(&var)
                .map(|(&o, &v)| mom * o + one_m * v)
                .collect();
            Ok((
                y,
                Cache::BnTrain {
                    x_hat,
                    inv_std,
                    pending: (l.name.clone(), new_mean, new_var),
                },
            ))
        }
        Mode::Infer => {
            let rm = &store.get(&l.param("running_mean")).value;
            let rv = &store.get(&l.param("running_var")).value;
            let scale: Vec<S> = (0..c)
                .map(|ci| gamma[ci] / (rv[ci] + eps).sqrt())
                .collect();
            let shift: Vec<S> = (0..c).map(|ci| beta[ci] - scale[ci] * rm[ci]).collect();
            let mut y = Tensor4::zeros(x.dims());
            let yd = y.data_mut();
            for row in 0..b * h * w {
                for ci in 0..c {
                    yd[row * c + ci] = scale[ci] * xd[row * c + ci] + shift[ci];
                }
            }
            Ok((y, Cache::BnInfer { scale }))
        }
    }
}

fn batchnorm_backward<S: Scalar>(
    l: &BatchNorm,
    dy: &Tensor4<S>,
    cache: &Cache<S>,
    _store: &ParamStore<S>,
    grads: &mut Grads<S>,
) -> Result<Tensor4<S>, NnError> {
    let [b, h, w, c] = dy.dims();
    let n = b * h * w;
    match cache {
        Cache::BnTrain {
            x_hat,
            inv_std,
            pending: _,
        } => {
            let gamma_name = l.param("gamma");
            let gamma = &_store.get(&gamma_name).value;
            let dyd = dy.data();
            let xh = x_hat.data();
            let mut dgamma = vec![S::zero(); c];
            let mut dbeta = vec![S::zero(); c];
            for row in 0..n {
                for ci in 0..c {
                    dgamma[ci] += dyd[row * c + ci] * xh[row * c + ci];
                    dbeta[ci] += dyd[row * c + ci];
                }
            }
            // dx = inv_std/N * gamma * (N*dy - sum(dy) - x_hat * sum(dy*x_hat))
            let inv_n = S::one() / S::from_f64(n as f64);
            let nn = S::from_f64(n as f64);
            let mut dx = Tensor4::zeros(dy.dims());
            let dxd = dx.data_mut();
            for row in 0..n {
                for ci in 0..c {
                    let g = dyd[row * c + ci];
                    dxd[row * c + ci] = gamma[ci]
                        * inv_std[ci]
                        * inv_n
                        * (nn * g - dbeta[ci] - xh[row * c + ci] * dgamma[ci]);
                }
            }
            grads.accumulate(&gamma_name, &dgamma);
            grads.accumulate(&l.param("beta"), &dbeta);
            Ok(dx)
        }
        Cache::BnInfer { scale } => {
            // Running statistics are constants here; the affine map is the
            // only thing gradients flow through, and parameter gradients are
            // not needed on inference paths.
            let mut dx = dy.clone();
            let dxd = dx.data_mut();
            for row in 0..n {
                for ci in 0..c {
                    dxd[row * c + ci] *= scale[ci];
                }
            }
            Ok(dx)
        }
        _ => Err(NnError::Config("cache does not match batch norm".into())),
    }
}
