//! Assembles networks from a [`ModelConfig`]: the shared convolutional
//! backbone, the dense classifier, and per-family extras (input and feature
//! attention gates, or a mirrored reconstruction decoder).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::nn::{
    Activation, AttentionA, AttentionB, BatchNorm, Cache, Conv2d, Dense, Grads, Layer, MbConv,
    Mode, NnError, ParamStore, Scalar, Sequential, Tensor4,
};

use super::config::{ModelConfig, ModelFamily};

/// Feature extractor split at the decoder attachment point: `stem` is the
/// first conv block plus the inverted-bottleneck stages, `head` the final
/// widening convolution. The decoder mirrors `stem` only.
#[derive(Clone, Debug)]
pub struct Backbone {
    pub stem: Sequential,
    pub head: Sequential,
    /// Channel count entering each stage; the last entry is the stem output
    /// width.
    pub stage_channels: Vec<usize>,
    /// Stem output dims for a batch of one.
    pub stem_dims: [usize; 4],
    /// Head output dims for a batch of one.
    pub feature_dims: [usize; 4],
    /// Feature width after the head, i.e. the pooled descriptor length.
    pub latent: usize,
}

fn validate(cfg: &ModelConfig) -> Result<(), NnError> {
    let err = |msg: String| Err(NnError::Config(msg));
    let pair_pos = |name: &str, (a, b): (usize, usize)| -> Result<(), NnError> {
        if a == 0 || b == 0 {
            Err(NnError::Config(format!("{name} must be positive, got ({a}, {b})")))
        } else {
            Ok(())
        }
    };
    if cfg.input.iter().any(|&d| d == 0) {
        return err(format!("input dims must be positive, got {:?}", cfg.input));
    }
    if cfg.classes < 2 {
        return err(format!("need at least 2 classes, got {}", cfg.classes));
    }
    if cfg.first_filters == 0 {
        return err("first_filters must be positive".into());
    }
    if cfg.depth == 0 {
        return err("depth must be positive".into());
    }
    if cfg.expansion == 0 {
        return err("expansion must be positive".into());
    }
    if !(cfg.se_rate > 0.0 && cfg.se_rate.is_finite()) {
        return err(format!("se_rate must be positive and finite, got {}", cfg.se_rate));
    }
    if cfg.classifier_depth == 0 || cfg.classifier_width == 0 {
        return err("classifier depth and width must be positive".into());
    }
    pair_pos("first_kernel", cfg.first_kernel)?;
    pair_pos("first_pool", cfg.first_pool)?;
    pair_pos("block_pool", cfg.block_pool)?;
    pair_pos("final_kernel", cfg.final_kernel)?;
    match cfg.family {
        ModelFamily::Standard => {}
        ModelFamily::DomainIndependent => {
            pair_pos("attn_a_kernel", cfg.attn_a_kernel)?;
            pair_pos("attn_b_pool", cfg.attn_b_pool)?;
            pair_pos("attn_b_stride", cfg.attn_b_stride)?;
            if cfg.attn_b_depth == 0 || cfg.attn_b_width == 0 {
                return err("attention MLP depth and width must be positive".into());
            }
        }
        ModelFamily::DomainAdaptation => {
            pair_pos("decoder_kernel", cfg.decoder_kernel)?;
            // One stride-2 pool per stage plus the stem pool; the mirrored
            // upsamples restore the input size only when it divides evenly.
            let div = 1usize << (cfg.depth + 1);
            if cfg.input[0] % div != 0 || cfg.input[1] % div != 0 {
                return err(format!(
                    "reconstruction needs input dims divisible by {div} (2^(depth+1)), got {}x{}",
                    cfg.input[0], cfg.input[1]
                ));
            }
        }
    }
    Ok(())
}

/// Builds the backbone and reports its intermediate widths and shapes.
pub fn build_backbone(cfg: &ModelConfig) -> Result<Backbone, NnError> {
    validate(cfg)?;
    let [h, w, c] = cfg.input;
    let f0 = cfg.first_filters;

    let mut stem = Vec::new();
    if cfg.batch_norm {
        stem.push(Layer::BatchNorm(BatchNorm::new("backbone.stem.bn", c)));
    }
    stem.push(Layer::Conv2d(Conv2d::new("backbone.stem.conv", cfg.first_kernel, c, f0)));
    stem.push(Layer::Act(Activation::Swish));
    stem.push(Layer::MaxPool { pool: cfg.first_pool, stride: (2, 2) });

    let mut stage_channels = vec![f0];
    let mut ch = f0;
    for i in 0..cfg.depth {
        let out = ch * 2;
        stem.push(Layer::MbConv(Box::new(MbConv::new(
            format!("backbone.b{i}"),
            ch,
            out,
            cfg.expansion,
            cfg.se_rate,
            cfg.residual,
            cfg.batch_norm,
        ))));
        for r in 0..cfg.repetitions {
            stem.push(Layer::MbConv(Box::new(MbConv::new(
                format!("backbone.b{i}r{r}"),
                out,
                out,
                cfg.expansion,
                cfg.se_rate,
                cfg.residual,
                cfg.batch_norm,
            ))));
        }
        stem.push(Layer::MaxPool { pool: cfg.block_pool, stride: (2, 2) });
        ch = out;
        stage_channels.push(ch);
    }
    let stem = Sequential::new(stem);
    let stem_dims = stem.out_dims([1, h, w, c])?;

    let mut head = Vec::new();
    if cfg.batch_norm {
        head.push(Layer::BatchNorm(BatchNorm::new("backbone.head.bn", ch)));
    }
    head.push(Layer::Conv2d(Conv2d::new("backbone.head.conv", cfg.final_kernel, ch, 2 * ch)));
    head.push(Layer::Act(Activation::Swish));
    let head = Sequential::new(head);
    let feature_dims = head.out_dims(stem_dims)?;

    Ok(Backbone {
        latent: feature_dims[3],
        stem,
        head,
        stage_channels,
        stem_dims,
        feature_dims,
    })
}

/// Dense head on the pooled descriptor: `classifier_depth` hidden layers of
/// one shared width with ReLU, then a softmax output layer.
pub fn build_classifier(cfg: &ModelConfig, latent: usize) -> Sequential {
    let mut layers = Vec::new();
    let mut prev = latent;
    for i in 0..cfg.classifier_depth {
        layers.push(Layer::Dense(Dense::new(
            format!("classifier.fc{i}"),
            prev,
            cfg.classifier_width,
            true,
        )));
        layers.push(Layer::Act(Activation::Relu));
        prev = cfg.classifier_width;
    }
    layers.push(Layer::Dense(Dense::new("classifier.out", prev, cfg.classes, true)));
    layers.push(Layer::Softmax);
    Sequential::new(layers)
}

/// Mirror of the stem: stages in reverse order with each stride-2 pool
/// replaced by 2x nearest-neighbor upsampling, then a conv block back at the
/// first-stage width, a final upsample, and a conv block onto the input
/// channel count.
pub fn build_decoder(cfg: &ModelConfig, backbone: &Backbone) -> Sequential {
    let f0 = cfg.first_filters;
    let mut layers = Vec::new();
    for i in (0..cfg.depth).rev() {
        let c_in = backbone.stage_channels[i];
        let c_out = backbone.stage_channels[i + 1];
        layers.push(Layer::Upsample2x);
        for r in 0..cfg.repetitions {
            layers.push(Layer::MbConv(Box::new(MbConv::new(
                format!("decoder.b{i}r{r}"),
                c_out,
                c_out,
                cfg.expansion,
                cfg.se_rate,
                cfg.residual,
                cfg.batch_norm,
            ))));
        }
        layers.push(Layer::MbConv(Box::new(MbConv::new(
            format!("decoder.b{i}"),
            c_out,
            c_in,
            cfg.expansion,
            cfg.se_rate,
            cfg.residual,
            cfg.batch_norm,
        ))));
    }
    if cfg.batch_norm {
        layers.push(Layer::BatchNorm(BatchNorm::new("decoder.c1.bn", f0)));
    }
    layers.push(Layer::Conv2d(Conv2d::new("decoder.c1.conv", cfg.decoder_kernel, f0, f0)));
    layers.push(Layer::Act(Activation::Swish));
    layers.push(Layer::Upsample2x);
    if cfg.batch_norm {
        layers.push(Layer::BatchNorm(BatchNorm::new("decoder.c2.bn", f0)));
    }
    layers.push(Layer::Conv2d(Conv2d::new(
        "decoder.c2.conv",
        cfg.decoder_kernel,
        f0,
        cfg.input[2],
    )));
    layers.push(Layer::Act(Activation::Swish));
    Sequential::new(layers)
}

/// A built network. `classify` maps input frames to class probabilities for
/// every family; `recon` maps input frames to reconstructions and exists
/// only for the adaptation family. The two paths share the stem layers, so
/// they read and update the same stem parameters.
#[derive(Clone, Debug)]
pub struct Model {
    pub cfg: ModelConfig,
    pub classify: Sequential,
    pub recon: Option<Sequential>,
    /// Leading layers of `recon` that alias the backbone stem.
    stem_len: usize,
    /// Backbone output dims (batch of one), before pooling.
    pub feature_dims: [usize; 4],
    /// Pooled descriptor length entering the classifier.
    pub latent: usize,
}

impl Model {
    pub fn build(cfg: &ModelConfig) -> Result<Model, NnError> {
        let backbone = build_backbone(cfg)?;
        let classifier = build_classifier(cfg, backbone.latent);

        let mut layers = Vec::new();
        if cfg.family == ModelFamily::DomainIndependent {
            layers.push(Layer::AttentionA(Box::new(AttentionA::new(
                "attn_a",
                cfg.attn_a_kernel,
                cfg.input[2],
            ))));
        }
        layers.extend(backbone.stem.layers.iter().cloned());
        layers.extend(backbone.head.layers.iter().cloned());
        if cfg.family == ModelFamily::DomainIndependent {
            let [_, fh, fw, fc] = backbone.feature_dims;
            let hidden = vec![cfg.attn_b_width; cfg.attn_b_depth];
            layers.push(Layer::AttentionB(Box::new(AttentionB::new(
                "attn_b",
                (fh, fw, fc),
                cfg.attn_b_pool,
                cfg.attn_b_stride,
                &hidden,
            ))));
        }
        layers.push(Layer::GlobalMaxPool);
        layers.extend(classifier.layers.iter().cloned());
        let classify = Sequential::new(layers);

        let recon = match cfg.family {
            ModelFamily::DomainAdaptation => {
                let decoder = build_decoder(cfg, &backbone);
                let mut r = backbone.stem.layers.clone();
                r.extend(decoder.layers);
                Some(Sequential::new(r))
            }
            _ => None,
        };

        Ok(Model {
            cfg: cfg.clone(),
            classify,
            recon,
            stem_len: backbone.stem.layers.len(),
            feature_dims: backbone.feature_dims,
            latent: backbone.latent,
        })
    }

    /// Fresh deterministic parameter store covering both paths. Stem
    /// parameters are inserted once, by the classification path.
    pub fn init_params<S: Scalar>(&self, seed: u64) -> ParamStore<S> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        self.classify.init(&mut store, &mut rng);
        if let Some(recon) = &self.recon {
            for l in &recon.layers[self.stem_len..] {
                l.init(&mut store, &mut rng);
            }
        }
        store
    }

    /// Trainable parameter names, classification path first, then decoder.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        self.classify.param_names(&mut names);
        if let Some(recon) = &self.recon {
            for l in &recon.layers[self.stem_len..] {
                l.param_names(&mut names);
            }
        }
        names
    }

    pub fn forward_classify<S: Scalar>(
        &self,
        x: &Tensor4<S>,
        store: &ParamStore<S>,
        mode: Mode,
    ) -> Result<(Tensor4<S>, Cache<S>), NnError> {
        self.classify.forward(x, store, mode)
    }

    pub fn backward_classify<S: Scalar>(
        &self,
        dy: &Tensor4<S>,
        cache: &Cache<S>,
        store: &ParamStore<S>,
        grads: &mut Grads<S>,
    ) -> Result<Tensor4<S>, NnError> {
        let Cache::Seq(caches) = cache else {
            return Err(NnError::Config("cache does not match classification path".into()));
        };
        self.classify.backward(dy, caches, store, grads)
    }

    pub fn forward_recon<S: Scalar>(
        &self,
        x: &Tensor4<S>,
        store: &ParamStore<S>,
        mode: Mode,
    ) -> Result<(Tensor4<S>, Cache<S>), NnError> {
        self.recon_path()?.forward(x, store, mode)
    }

    pub fn backward_recon<S: Scalar>(
        &self,
        dy: &Tensor4<S>,
        cache: &Cache<S>,
        store: &ParamStore<S>,
        grads: &mut Grads<S>,
    ) -> Result<Tensor4<S>, NnError> {
        let Cache::Seq(caches) = cache else {
            return Err(NnError::Config("cache does not match reconstruction path".into()));
        };
        self.recon_path()?.backward(dy, caches, store, grads)
    }

    fn recon_path(&self) -> Result<&Sequential, NnError> {
        self.recon.as_ref().ok_or_else(|| {
            NnError::Config(format!(
                "{} family has no reconstruction path",
                self.cfg.family.as_str()
            ))
        })
    }

    /// Class probabilities in inference mode.
    pub fn predict<S: Scalar>(
        &self,
        x: &Tensor4<S>,
        store: &ParamStore<S>,
    ) -> Result<Tensor4<S>, NnError> {
        Ok(self.forward_classify(x, store, Mode::Infer)?.0)
    }

    /// The classification path as one layer, for gradient checking.
    pub fn classify_layer(&self) -> Layer {
        Layer::Seq(self.classify.clone())
    }

    /// The reconstruction path as one layer, for gradient checking.
    pub fn recon_layer(&self) -> Option<Layer> {
        self.recon.as_ref().map(|r| Layer::Seq(r.clone()))
    }

    /// `(block name, skip connection actually applied)` for every
    /// inverted-bottleneck block, classification path then decoder.
    pub fn effective_residuals(&self) -> Vec<(String, bool)> {
        fn walk(layers: &[Layer], out: &mut Vec<(String, bool)>) {
            for l in layers {
                match l {
                    Layer::MbConv(b) => out.push((b.name.clone(), b.residual)),
                    Layer::Seq(s) => walk(&s.layers, out),
                    _ => {}
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.classify.layers, &mut out);
        if let Some(recon) = &self.recon {
            walk(&recon.layers[self.stem_len..], &mut out);
        }
        out
    }
}
