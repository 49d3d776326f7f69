//! Composite layers: squeeze-excitation, inverted-bottleneck convolution
//! blocks, and the two attention modules used by the recognition networks.

use rand::Rng;

use super::layers::{Activation, BatchNorm, Cache, Conv2d, Dense, DepthwiseConv2d, Layer, Mode};
use super::ops;
use super::params::{Grads, ParamStore};
use super::tensor::{Scalar, Tensor4};
use super::NnError;

/// Ordered layer chain; the cache is the per-layer cache vector.
#[derive(Clone, Debug, Default)]
pub struct Sequential {
    pub layers: Vec<Layer>,
}

impl Sequential {
    pub fn new(layers: Vec<Layer>) -> Self {
        Sequential { layers }
    }

    pub fn init<S: Scalar, R: Rng>(&self, store: &mut ParamStore<S>, rng: &mut R) {
        for l in &self.layers {
            l.init(store, rng);
        }
    }

    pub fn param_names(&self, out: &mut Vec<String>) {
        for l in &self.layers {
            l.param_names(out);
        }
    }

    pub fn out_dims(&self, mut d: [usize; 4]) -> Result<[usize; 4], NnError> {
        for l in &self.layers {
            d = l.out_dims(d)?;
        }
        Ok(d)
    }

    pub fn forward<S: Scalar>(
        &self,
        x: &Tensor4<S>,
        store: &ParamStore<S>,
        mode: Mode,
    ) -> Result<(Tensor4<S>, Cache<S>), NnError> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for l in &self.layers {
            let (y, c) = l.forward(&cur, store, mode)?;
            caches.push(c);
            cur = y;
        }
        Ok((cur, Cache::Seq(caches)))
    }

    pub fn backward<S: Scalar>(
        &self,
        dy: &Tensor4<S>,
        caches: &[Cache<S>],
        store: &ParamStore<S>,
        grads: &mut Grads<S>,
    ) -> Result<Tensor4<S>, NnError> {
        debug_assert_eq!(caches.len(), self.layers.len());
        let mut cur = dy.clone();
        for (l, c) in self.layers.iter().zip(caches.iter()).rev() {
            cur = l.backward(&cur, c, store, grads)?;
        }
        Ok(cur)
    }
}

// ── squeeze-excitation ──────────────────────────────────────────────────────

/// Channel gating block: global average squeeze, two dense layers, sigmoid
/// gate multiplied back onto the input.
#[derive(Clone, Debug)]
pub struct SeBlock {
    pub name: String,
    pub ch: usize,
    pub squeezed: usize,
    reduce: Dense,
    expand: Dense,
}

#[derive(Clone, Debug)]
pub struct SeCache<S> {
    x: Tensor4<S>,
    s: Tensor4<S>,
    a1: Tensor4<S>,
    h1: Tensor4<S>,
    gate: Tensor4<S>,
}

impl SeBlock {
    /// Squeezed width rule: `max(1, round(se_rate * channels))`.
    pub fn squeezed_width(se_rate: f64, ch: usize) -> usize {
        ((se_rate * ch as f64).round() as usize).max(1)
    }

    pub fn new(name: impl Into<String>, ch: usize, se_rate: f64) -> Self {
        let name = name.into();
        let squeezed = Self::squeezed_width(se_rate, ch);
        SeBlock {
            reduce: Dense::new(format!("{name}.reduce"), ch, squeezed, true),
            expand: Dense::new(format!("{name}.expand"), squeezed, ch, true),
            name,
            ch,
            squeezed,
        }
    }

    pub fn init<S: Scalar, R: Rng>(&self, store: &mut ParamStore<S>, rng: &mut R) {
        Layer::Dense(self.reduce.clone()).init(store, rng);
        Layer::Dense(self.expand.clone()).init(store, rng);
    }

    pub fn param_names(&self, out: &mut Vec<String>) {
        Layer::Dense(self.reduce.clone()).param_names(out);
        Layer::Dense(self.expand.clone()).param_names(out);
    }

    pub fn out_dims(&self, d: [usize; 4]) -> Result<[usize; 4], NnError> {
        if d[3] != self.ch {
            return Err(NnError::Shape(format!(
                "{} expects {} channels, got {}",
                self.name, self.ch, d[3]
            )));
        }
        Ok(d)
    }

    pub fn forward<S: Scalar>(
        &self,
        x: &Tensor4<S>,
        store: &ParamStore<S>,
        _mode: Mode,
    ) -> Result<(Tensor4<S>, Cache<S>), NnError> {
        let [b, h, w, c] = x.dims();
        self.out_dims(x.dims())?;
        // Squeeze: spatial mean per channel.
        let mut s = Tensor4::zeros([b, 1, 1, c]);
        {
            let xd = x.data();
            let sd = s.data_mut();
            for bi in 0..b {
                for row in 0..h * w {
                    let base = (bi * h * w + row) * c;
                    for ci in 0..c {
                        sd[bi * c + ci] += xd[base + ci];
                    }
                }
            }
            let inv = S::one() / S::from_f64((h * w) as f64);
            for v in sd.iter_mut() {
                *v *= inv;
            }
        }
        let rw = &store.get(&format!("{}.weight", self.reduce.name)).value;
        let rb = store.get(&format!("{}.bias", self.reduce.name)).value.clone();
        let a1 = ops::dense(&s, rw, Some(&rb), self.squeezed);
        let h1 = ops::swish_forward(&a1);
        let ew = &store.get(&format!("{}.weight", self.expand.name)).value;
        let eb = store.get(&format!("{}.bias", self.expand.name)).value.clone();
        let a2 = ops::dense(&h1, ew, Some(&eb), self.ch);
        let gate = ops::sigmoid_forward(&a2);
        let mut y = x.clone();
        {
            let yd = y.data_mut();
            let gd = gate.data();
            for bi in 0..b {
                for row in 0..h * w {
                    let base = (bi * h * w + row) * c;
                    for ci in 0..c {
                        yd[base + ci] *= gd[bi * c + ci];
                    }
                }
            }
        }
        Ok((
            y,
            Cache::Se(Box::new(SeCache {
                x: x.clone(),
                s,
                a1,
                h1,
                gate,
            })),
        ))
    }

    pub fn backward<S: Scalar>(
        &self,
        dy: &Tensor4<S>,
        cache: &SeCache<S>,
        store: &ParamStore<S>,
        grads: &mut Grads<S>,
    ) -> Result<Tensor4<S>, NnError> {
        let [b, h, w, c] = cache.x.dims();
        let hw = h * w;
        // Direct path: dx = dy * gate; gate path: dgate = sum_hw dy * x.
        let mut dx = dy.clone();
        let mut dgate = Tensor4::zeros([b, 1, 1, c]);
        {
            let dxd = dx.data_mut();
            let dgd = dgate.data_mut();
            let xd = cache.x.data();
            let gd = cache.gate.data();
            let dyd = dy.data();
            for bi in 0..b {
                for row in 0..hw {
                    let base = (bi * hw + row) * c;
                    for ci in 0..c {
                        dgd[bi * c + ci] += dyd[base + ci] * xd[base + ci];
                        dxd[base + ci] *= gd[bi * c + ci];
                    }
                }
            }
        }
        let da2 = ops::sigmoid_backward(&cache.gate, &dgate);
        let ew = &store.get(&format!("{}.weight", self.expand.name)).value;
        let (dh1, dew, deb) = ops::dense_backward(&cache.h1, ew, self.ch, true, &da2);
        grads.accumulate(&format!("{}.weight", self.expand.name), &dew);
        grads.accumulate(&format!("{}.bias", self.expand.name), &deb.unwrap());
        let da1 = ops::swish_backward(&cache.a1, &dh1);
        let rw = &store.get(&format!("{}.weight", self.reduce.name)).value;
        let (ds, drw, drb) = ops::dense_backward(&cache.s, rw, self.squeezed, true, &da1);
        grads.accumulate(&format!("{}.weight", self.reduce.name), &drw);
        grads.accumulate(&format!("{}.bias", self.reduce.name), &drb.unwrap());
        // Squeeze was a spatial mean: spread ds uniformly.
        {
            let dxd = dx.data_mut();
            let dsd = ds.data();
            let inv = S::one() / S::from_f64(hw as f64);
            for bi in 0..b {
                for row in 0..hw {
                    let base = (bi * hw + row) * c;
                    for ci in 0..c {
                        dxd[base + ci] += dsd[bi * c + ci] * inv;
                    }
                }
            }
        }
        Ok(dx)
    }
}

impl<S: Scalar> SeCache<S> {
    pub fn apply_bn_updates(&self, _store: &mut ParamStore<S>) {}
}

// ── inverted bottleneck block ───────────────────────────────────────────────

/// Expansion convolution, depthwise convolution, squeeze-excitation, linear
/// projection; optional skip connection when input and output channel counts
/// agree. Swish activations after the two convolutions, none after the
/// projection.
#[derive(Clone, Debug)]
pub struct MbConv {
    pub name: String,
    pub in_ch: usize,
    pub out_ch: usize,
    pub expansion: usize,
    /// Skip connection as configured.
    pub residual_requested: bool,
    /// Skip connection actually applied; false when the block changes its
    /// channel count, regardless of the request.
    pub residual: bool,
    chain: Sequential,
}

#[derive(Clone, Debug)]
pub struct MbConvCache<S> {
    chain: Cache<S>,
    residual: bool,
    phantom: std::marker::PhantomData<S>,
}

impl MbConv {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        in_ch: usize,
        out_ch: usize,
        expansion: usize,
        se_rate: f64,
        residual_requested: bool,
        batch_norm: bool,
    ) -> Self {
        let name = name.into();
        let mid = in_ch * expansion;
        let mut layers = Vec::new();
        if batch_norm {
            layers.push(Layer::BatchNorm(BatchNorm::new(format!("{name}.bn"), in_ch)));
        }
        layers.push(Layer::Conv2d(Conv2d::new(
            format!("{name}.expand"),
            (1, 1),
            in_ch,
            mid,
        )));
        layers.push(Layer::Act(Activation::Swish));
        layers.push(Layer::Depthwise(DepthwiseConv2d::new(
            format!("{name}.dw"),
            (3, 3),
            mid,
        )));
        layers.push(Layer::Act(Activation::Swish));
        layers.push(Layer::Se(SeBlock::new(format!("{name}.se"), mid, se_rate)));
        layers.push(Layer::Conv2d(Conv2d::new(
            format!("{name}.project"),
            (1, 1),
            mid,
            out_ch,
        )));
        MbConv {
            residual: residual_requested && in_ch == out_ch,
            name,
            in_ch,
            out_ch,
            expansion,
            residual_requested,
            chain: Sequential::new(layers),
        }
    }

    pub fn init<S: Scalar, R: Rng>(&self, store: &mut ParamStore<S>, rng: &mut R) {
        self.chain.init(store, rng);
    }

    pub fn param_names(&self, out: &mut Vec<String>) {
        self.chain.param_names(out);
    }

    pub fn out_dims(&self, d: [usize; 4]) -> Result<[usize; 4], NnError> {
        self.chain.out_dims(d)
    }

    pub fn forward<S: Scalar>(
        &self,
        x: &Tensor4<S>,
        store: &ParamStore<S>,
        mode: Mode,
    ) -> Result<(Tensor4<S>, Cache<S>), NnError> {
        let (mut y, chain) = self.chain.forward(x, store, mode)?;
        if self.residual {
            if y.dims() != x.dims() {
                return Err(NnError::ResidualShape(format!(
                    "{}: {:?} vs {:?}",
                    self.name,
                    y.dims(),
                    x.dims()
                )));
            }
            y = y.add(x)?;
        }
        Ok((
            y,
            Cache::MbConv(Box::new(MbConvCache {
                chain,
                residual: self.residual,
                phantom: std::marker::PhantomData,
            })),
        ))
    }

    pub fn backward<S: Scalar>(
        &self,
        dy: &Tensor4<S>,
        cache: &MbConvCache<S>,
        store: &ParamStore<S>,
        grads: &mut Grads<S>,
    ) -> Result<Tensor4<S>, NnError> {
        let Cache::Seq(chain) = &cache.chain else {
            return Err(NnError::Config("cache does not match block".into()));
        };
        let mut dx = self.chain.backward(dy, chain, store, grads)?;
        if cache.residual {
            dx = dx.add(dy)?;
        }
        Ok(dx)
    }
}

impl<S: Scalar> MbConvCache<S> {
    pub fn apply_bn_updates(&self, store: &mut ParamStore<S>) {
        self.chain.apply_bn_updates(store);
    }
}

// ── attention module A ──────────────────────────────────────────────────────

/// Input-side attention: `y = x + x * sigmoid(conv(bn(x)))` with a single
/// convolution filter whose gate is broadcast over channels.
#[derive(Clone, Debug)]
pub struct AttentionA {
    pub name: String,
    pub ch: usize,
    bn: Layer,
    conv: Layer,
}

#[derive(Clone, Debug)]
pub struct AttentionACache<S> {
    x: Tensor4<S>,
    bn: Cache<S>,
    conv: Cache<S>,
    gate: Tensor4<S>,
}

impl AttentionA {
    pub fn new(name: impl Into<String>, kernel: (usize, usize), ch: usize) -> Self {
        let name = name.into();
        AttentionA {
            bn: Layer::BatchNorm(BatchNorm::new(format!("{name}.bn"), ch)),
            conv: Layer::Conv2d(Conv2d::new(format!("{name}.conv"), kernel, ch, 1)),
            name,
            ch,
        }
    }

    pub fn init<S: Scalar, R: Rng>(&self, store: &mut ParamStore<S>, rng: &mut R) {
        self.bn.init(store, rng);
        self.conv.init(store, rng);
    }

    pub fn param_names(&self, out: &mut Vec<String>) {
        self.bn.param_names(out);
        self.conv.param_names(out);
    }

    pub fn out_dims(&self, d: [usize; 4]) -> Result<[usize; 4], NnError> {
        self.bn.out_dims(d)?;
        Ok(d)
    }

    pub fn forward<S: Scalar>(
        &self,
        x: &Tensor4<S>,
        store: &ParamStore<S>,
        mode: Mode,
    ) -> Result<(Tensor4<S>, Cache<S>), NnError> {
        let [b, h, w, c] = x.dims();
        let (n, bn_cache) = self.bn.forward(x, store, mode)?;
        let (pre, conv_cache) = self.conv.forward(&n, store, mode)?;
        let gate = ops::sigmoid_forward(&pre);
        let mut y = x.clone();
        {
            let yd = y.data_mut();
            let gd = gate.data();
            for bi in 0..b {
                for row in 0..h * w {
                    let g = gd[bi * h * w + row];
                    let base = (bi * h * w + row) * c;
                    for ci in 0..c {
                        yd[base + ci] += yd[base + ci] * g;
                    }
                }
            }
        }
        Ok((
            y,
            Cache::AttentionA(Box::new(AttentionACache {
                x: x.clone(),
                bn: bn_cache,
                conv: conv_cache,
                gate,
            })),
        ))
    }

    pub fn backward<S: Scalar>(
        &self,
        dy: &Tensor4<S>,
        cache: &AttentionACache<S>,
        store: &ParamStore<S>,
        grads: &mut Grads<S>,
    ) -> Result<Tensor4<S>, NnError> {
        let [b, h, w, c] = cache.x.dims();
        let mut dx = dy.clone();
        let mut dgate = Tensor4::zeros([b, h, w, 1]);
        {
            let dxd = dx.data_mut();
            let dgd = dgate.data_mut();
            let xd = cache.x.data();
            let gd = cache.gate.data();
            let dyd = dy.data();
            for bi in 0..b {
                for row in 0..h * w {
                    let pos = bi * h * w + row;
                    let base = pos * c;
                    let g = gd[pos];
                    let mut acc = S::zero();
                    for ci in 0..c {
                        acc += dyd[base + ci] * xd[base + ci];
                        dxd[base + ci] = dyd[base + ci] * (S::one() + g);
                    }
                    dgd[pos] = acc;
                }
            }
        }
        let dpre = ops::sigmoid_backward(&cache.gate, &dgate);
        let dn = self.conv.backward(&dpre, &cache.conv, store, grads)?;
        let dx_bn = self.bn.backward(&dn, &cache.bn, store, grads)?;
        dx.add(&dx_bn)
    }
}

impl<S: Scalar> AttentionACache<S> {
    pub fn apply_bn_updates(&self, store: &mut ParamStore<S>) {
        self.bn.apply_bn_updates(store);
    }
}

// ── attention module B ──────────────────────────────────────────────────────

/// Latent-side attention: average and max pooling forks feed one shared
/// all-ReLU dense stack; the fork sums pass through a sigmoid, are resized
/// back to the feature map's spatial dims, and gate it multiplicatively.
#[derive(Clone, Debug)]
pub struct AttentionB {
    pub name: String,
    pub pool: (usize, usize),
    pub stride: (usize, usize),
    /// Input feature dims `(h, w, c)` the module was built for.
    pub input: (usize, usize, usize),
    /// Pooled dims `(ph, pw)`.
    pub pooled: (usize, usize),
    mlp: Sequential,
}

#[derive(Clone, Debug)]
pub struct AttentionBCache<S> {
    x: Tensor4<S>,
    avg_fork: Cache<S>,
    max_fork: Cache<S>,
    max_argmax: Vec<usize>,
    gate_small: Tensor4<S>,
    gate: Tensor4<S>,
}

impl AttentionB {
    pub fn new(
        name: impl Into<String>,
        input: (usize, usize, usize),
        pool: (usize, usize),
        stride: (usize, usize),
        hidden: &[usize],
    ) -> Self {
        let name = name.into();
        let (h, w, c) = input;
        let (_, ph) = ops::same_padding(h, pool.0, stride.0);
        let (_, pw) = ops::same_padding(w, pool.1, stride.1);
        let flat = ph * pw * c;
        let mut layers = vec![Layer::Flatten];
        let mut prev = flat;
        for (i, &width) in hidden.iter().enumerate() {
            layers.push(Layer::Dense(Dense::new(
                format!("{name}.mlp{i}"),
                prev,
                width,
                true,
            )));
            layers.push(Layer::Act(Activation::Relu));
            prev = width;
        }
        layers.push(Layer::Dense(Dense::new(
            format!("{name}.mlp{}", hidden.len()),
            prev,
            flat,
            true,
        )));
        layers.push(Layer::Act(Activation::Relu));
        AttentionB {
            name,
            pool,
            stride,
            input,
            pooled: (ph, pw),
            mlp: Sequential::new(layers),
        }
    }

    pub fn init<S: Scalar, R: Rng>(&self, store: &mut ParamStore<S>, rng: &mut R) {
        self.mlp.init(store, rng);
    }

    pub fn param_names(&self, out: &mut Vec<String>) {
        self.mlp.param_names(out);
    }

    pub fn out_dims(&self, d: [usize; 4]) -> Result<[usize; 4], NnError> {
        let (h, w, c) = self.input;
        if (d[1], d[2], d[3]) != (h, w, c) {
            return Err(NnError::Shape(format!(
                "{} built for {:?}, got {:?}",
                self.name,
                (h, w, c),
                (d[1], d[2], d[3])
            )));
        }
        Ok(d)
    }

    pub fn forward<S: Scalar>(
        &self,
        x: &Tensor4<S>,
        store: &ParamStore<S>,
        mode: Mode,
    ) -> Result<(Tensor4<S>, Cache<S>), NnError> {
        self.out_dims(x.dims())?;
        let [_, h, w, _] = x.dims();
        let a = ops::avgpool_same(x, self.pool, self.stride);
        let (m, max_argmax) = ops::maxpool_same(x, self.pool, self.stride);
        let pooled_dims = a.dims();
        let (ua, avg_fork) = self.mlp.forward(&a, store, mode)?;
        let (um, max_fork) = self.mlp.forward(&m, store, mode)?;
        let u = ua.add(&um)?;
        let gate_small = ops::sigmoid_forward(&u).reshape(pooled_dims)?;
        let gate = ops::resize_nearest(&gate_small, h, w);
        let mut y = x.clone();
        for (v, &g) in y.data_mut().iter_mut().zip(gate.data()) {
            *v *= g;
        }
        Ok((
            y,
            Cache::AttentionB(Box::new(AttentionBCache {
                x: x.clone(),
                avg_fork,
                max_fork,
                max_argmax,
                gate_small,
                gate,
            })),
        ))
    }

    pub fn backward<S: Scalar>(
        &self,
        dy: &Tensor4<S>,
        cache: &AttentionBCache<S>,
        store: &ParamStore<S>,
        grads: &mut Grads<S>,
    ) -> Result<Tensor4<S>, NnError> {
        let x_dims = cache.x.dims();
        let pooled_dims = cache.gate_small.dims();
        let mut dx = dy.clone();
        let mut dgate = dy.clone();
        {
            let dxd = dx.data_mut();
            let dgd = dgate.data_mut();
            let xd = cache.x.data();
            let gd = cache.gate.data();
            for i in 0..dxd.len() {
                dgd[i] *= xd[i];
                dxd[i] *= gd[i];
            }
        }
        let dg_small = ops::resize_nearest_backward(&dgate, pooled_dims);
        let du = ops::sigmoid_backward(&cache.gate_small, &dg_small)
            .reshape([pooled_dims[0], 1, 1, pooled_dims[1] * pooled_dims[2] * pooled_dims[3]])?;
        let (Cache::Seq(ac), Cache::Seq(mc)) = (&cache.avg_fork, &cache.max_fork) else {
            return Err(NnError::Config("cache does not match attention".into()));
        };
        let da = self.mlp.backward(&du, ac, store, grads)?;
        let dm = self.mlp.backward(&du, mc, store, grads)?;
        let dxa = ops::avgpool_backward(&da, x_dims, self.pool, self.stride);
        let dxm = ops::maxpool_backward(&dm, &cache.max_argmax, x_dims);
        dx.add(&dxa)?.add(&dxm)
    }
}

impl<S: Scalar> AttentionBCache<S> {
    pub fn apply_bn_updates(&self, _store: &mut ParamStore<S>) {}
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_params(store: &mut ParamStore<f64>) {
        let names: Vec<String> = store.iter().map(|(n, _)| n.clone()).collect();
        for n in names {
            let p = store.get_mut(&n);
            if p.trainable {
                p.value.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }

    #[test]
    fn squeezed_width_rounds_with_floor_of_one() {
        assert_eq!(SeBlock::squeezed_width(0.05, 8), 1);
        assert_eq!(SeBlock::squeezed_width(0.25, 16), 4);
        assert_eq!(SeBlock::squeezed_width(0.7, 10), 7);
        assert_eq!(SeBlock::squeezed_width(0.05, 40), 2);
    }

    #[test]
    fn se_with_zero_weights_gates_at_half() {
        let se = SeBlock::new("se", 3, 0.5);
        let mut store = ParamStore::<f64>::new();
        se.init(&mut store, &mut ChaCha8Rng::seed_from_u64(0));
        zero_params(&mut store);
        let x = Tensor4::filled([2, 2, 2, 3], 4.0);
        let (y, _) = se.forward(&x, &store, Mode::Train).unwrap();
        assert!(y.data().iter().all(|&v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn mbconv_zero_weights_with_residual_is_identity() {
        let block = MbConv::new("m", 4, 4, 2, 0.25, true, false);
        assert!(block.residual);
        let mut store = ParamStore::<f64>::new();
        block.init(&mut store, &mut ChaCha8Rng::seed_from_u64(0));
        zero_params(&mut store);
        let x = Tensor4::from_vec([1, 3, 3, 4], (0..36).map(f64::from).collect()).unwrap();
        let (y, _) = block.forward(&x, &store, Mode::Train).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn mbconv_channel_change_disables_residual_silently() {
        let block = MbConv::new("m", 4, 8, 2, 0.25, true, false);
        assert!(block.residual_requested);
        assert!(!block.residual);
        assert_eq!(block.out_dims([1, 4, 4, 4]).unwrap(), [1, 4, 4, 8]);
    }

    #[test]
    fn attention_a_zero_conv_scales_by_one_point_five() {
        let att = AttentionA::new("a", (3, 3), 2);
        let mut store = ParamStore::<f64>::new();
        att.init(&mut store, &mut ChaCha8Rng::seed_from_u64(0));
        zero_params(&mut store);
        // Zeroing gamma kills the conv input; gate = sigmoid(0) = 0.5.
        let x = Tensor4::filled([1, 4, 4, 2], 2.0);
        let (y, _) = att.forward(&x, &store, Mode::Infer).unwrap();
        assert!(y.data().iter().all(|&v| (v - 3.0).abs() < 1e-12));
        // Output stays between x and 2x for positive x with any weights.
        let mut store2 = ParamStore::<f64>::new();
        att.init(&mut store2, &mut ChaCha8Rng::seed_from_u64(5));
        let (y2, _) = att.forward(&x, &store2, Mode::Infer).unwrap();
        for &v in y2.data() {
            assert!(v > 2.0 && v < 4.0);
        }
    }

    #[test]
    fn attention_a_preserves_zero_input() {
        let att = AttentionA::new("a", (5, 5), 3);
        let mut store = ParamStore::<f64>::new();
        att.init(&mut store, &mut ChaCha8Rng::seed_from_u64(1));
        let x = Tensor4::zeros([2, 4, 4, 3]);
        let (y, _) = att.forward(&x, &store, Mode::Infer).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn attention_b_zero_mlp_gates_at_half() {
        let att = AttentionB::new("b", (4, 4, 2), (2, 2), (2, 2), &[8]);
        let mut store = ParamStore::<f64>::new();
        att.init(&mut store, &mut ChaCha8Rng::seed_from_u64(0));
        zero_params(&mut store);
        let x = Tensor4::filled([1, 4, 4, 2], 6.0);
        let (y, _) = att.forward(&x, &store, Mode::Infer).unwrap();
        assert!(y.data().iter().all(|&v| (v - 3.0).abs() < 1e-12));
    }

    #[test]
    fn attention_b_pooled_dims_follow_same_padding() {
        let att = AttentionB::new("b", (32, 64, 8), (8, 8), (16, 32), &[]);
        assert_eq!(att.pooled, (2, 2));
        let att2 = AttentionB::new("b", (32, 64, 8), (48, 8), (16, 16), &[16, 16]);
        assert_eq!(att2.pooled, (2, 4));
    }

    #[test]
    fn attention_b_rejects_mismatched_input() {
        let att = AttentionB::new("b", (4, 4, 2), (2, 2), (2, 2), &[]);
        assert!(att.out_dims([1, 4, 4, 2]).is_ok());
        assert!(att.out_dims([1, 8, 4, 2]).is_err());
    }
}
