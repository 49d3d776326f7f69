//! Architecture hyperparameter vocabulary: the search intervals, one
//! concrete choice per interval, and a flat text serialization for run
//! directories.

use rand::Rng;

use crate::nn::NnError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelFamily {
    /// Backbone plus classifier.
    Standard,
    /// Adds the input-gating and feature-gating attention modules.
    DomainIndependent,
    /// Adds a reconstruction decoder fed by source and target flows.
    DomainAdaptation,
}

impl ModelFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelFamily::Standard => "standard",
            ModelFamily::DomainIndependent => "domain_independent",
            ModelFamily::DomainAdaptation => "domain_adaptation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "standard" => Some(ModelFamily::Standard),
            "domain_independent" => Some(ModelFamily::DomainIndependent),
            "domain_adaptation" => Some(ModelFamily::DomainAdaptation),
            _ => None,
        }
    }

    pub const ALL: [ModelFamily; 3] = [
        ModelFamily::Standard,
        ModelFamily::DomainIndependent,
        ModelFamily::DomainAdaptation,
    ];
}

/// Inclusive per-hyperparameter intervals. Two-dimensional quantities
/// (kernels, pools, strides) use one interval applied to each axis
/// independently.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchSpace {
    pub first_filters: (usize, usize),
    pub first_kernel: (usize, usize),
    pub first_pool: (usize, usize),
    pub depth: (usize, usize),
    pub expansion: (usize, usize),
    pub se_rate: (f64, f64),
    pub repetitions: (usize, usize),
    pub block_pool: (usize, usize),
    pub final_kernel: (usize, usize),
    pub classifier_depth: (usize, usize),
    pub classifier_width: (usize, usize),
    pub attn_a_kernel: (usize, usize),
    pub attn_b_pool: (usize, usize),
    pub attn_b_stride: (usize, usize),
    pub attn_b_depth: (usize, usize),
    pub attn_b_width: (usize, usize),
    pub decoder_kernel: (usize, usize),
}

impl SearchSpace {
    /// The published intervals. The first convolution's filter floor is the
    /// input channel count, so the space depends on whether frames arrive
    /// stacked (16 channels) or unstacked (1 channel).
    pub fn for_input_channels(a: usize) -> Self {
        SearchSpace {
            first_filters: (a, a.max(24)),
            first_kernel: (12, 48),
            first_pool: (2, 48),
            depth: (2, 5),
            expansion: (2, 8),
            se_rate: (0.05, 0.7),
            repetitions: (0, 2),
            block_pool: (2, 48),
            final_kernel: (4, 16),
            classifier_depth: (1, 6),
            classifier_width: (16, 1024),
            attn_a_kernel: (16, 88),
            attn_b_pool: (8, 48),
            attn_b_stride: (16, 32),
            attn_b_depth: (1, 6),
            attn_b_width: (16, 2048),
            decoder_kernel: (12, 48),
        }
    }

    /// Draws one configuration, every field an independent uniform sample
    /// from its interval (integers inclusive, the gating rate continuous).
    /// Residual and batch-norm flags are fair coin flips. Draw order is
    /// fixed, so a seeded rng yields a reproducible config sequence.
    pub fn sample<R: Rng>(
        &self,
        family: ModelFamily,
        classes: usize,
        input: [usize; 3],
        rng: &mut R,
    ) -> ModelConfig {
        let int = |rng: &mut R, (lo, hi): (usize, usize)| rng.random_range(lo..=hi);
        let pair = |rng: &mut R, iv: (usize, usize)| (int(rng, iv), int(rng, iv));
        ModelConfig {
            family,
            classes,
            input,
            first_filters: int(rng, self.first_filters),
            first_kernel: pair(rng, self.first_kernel),
            first_pool: pair(rng, self.first_pool),
            depth: int(rng, self.depth),
            expansion: int(rng, self.expansion),
            residual: rng.random_range(0..=1u8) == 1,
            se_rate: self.se_rate.0 + (self.se_rate.1 - self.se_rate.0) * rng.random::<f64>(),
            repetitions: int(rng, self.repetitions),
            block_pool: pair(rng, self.block_pool),
            final_kernel: pair(rng, self.final_kernel),
            classifier_depth: int(rng, self.classifier_depth),
            classifier_width: int(rng, self.classifier_width),
            attn_a_kernel: pair(rng, self.attn_a_kernel),
            attn_b_pool: pair(rng, self.attn_b_pool),
            attn_b_stride: pair(rng, self.attn_b_stride),
            attn_b_depth: int(rng, self.attn_b_depth),
            attn_b_width: int(rng, self.attn_b_width),
            decoder_kernel: pair(rng, self.decoder_kernel),
            batch_norm: rng.random_range(0..=1u8) == 1,
        }
    }
}

/// One concrete architecture choice. Attention and decoder fields are always
/// present; the family decides which of them the builder consumes.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub family: ModelFamily,
    pub classes: usize,
    /// Input frame dims `[doppler bins, time steps, antenna channels]`.
    pub input: [usize; 3],
    pub first_filters: usize,
    pub first_kernel: (usize, usize),
    pub first_pool: (usize, usize),
    pub depth: usize,
    pub expansion: usize,
    pub residual: bool,
    pub se_rate: f64,
    pub repetitions: usize,
    pub block_pool: (usize, usize),
    pub final_kernel: (usize, usize),
    pub classifier_depth: usize,
    pub classifier_width: usize,
    pub attn_a_kernel: (usize, usize),
    pub attn_b_pool: (usize, usize),
    pub attn_b_stride: (usize, usize),
    pub attn_b_depth: usize,
    pub attn_b_width: usize,
    pub decoder_kernel: (usize, usize),
    pub batch_norm: bool,
}

impl ModelConfig {
    /// Serializes as `name = value` lines in a fixed key order, one key per
    /// line, so two configs with equal fields produce byte-identical text.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("family", self.family.as_str().to_string());
        kv("classes", self.classes.to_string());
        kv("input_h", self.input[0].to_string());
        kv("input_w", self.input[1].to_string());
        kv("input_c", self.input[2].to_string());
        kv("first_filters", self.first_filters.to_string());
        kv("first_kernel_h", self.first_kernel.0.to_string());
        kv("first_kernel_w", self.first_kernel.1.to_string());
        kv("first_pool_h", self.first_pool.0.to_string());
        kv("first_pool_w", self.first_pool.1.to_string());
        kv("depth", self.depth.to_string());
        kv("expansion", self.expansion.to_string());
        kv("residual", self.residual.to_string());
        kv("se_rate", format!("{:?}", self.se_rate));
        kv("repetitions", self.repetitions.to_string());
        kv("block_pool_h", self.block_pool.0.to_string());
        kv("block_pool_w", self.block_pool.1.to_string());
        kv("final_kernel_h", self.final_kernel.0.to_string());
        kv("final_kernel_w", self.final_kernel.1.to_string());
        kv("classifier_depth", self.classifier_depth.to_string());
        kv("classifier_width", self.classifier_width.to_string());
        kv("attn_a_kernel_h", self.attn_a_kernel.0.to_string());
        kv("attn_a_kernel_w", self.attn_a_kernel.1.to_string());
        kv("attn_b_pool_h", self.attn_b_pool.0.to_string());
        kv("attn_b_pool_w", self.attn_b_pool.1.to_string());
        kv("attn_b_stride_h", self.attn_b_stride.0.to_string());
        kv("attn_b_stride_w", self.attn_b_stride.1.to_string());
        kv("attn_b_depth", self.attn_b_depth.to_string());
        kv("attn_b_width", self.attn_b_width.to_string());
        kv("decoder_kernel_h", self.decoder_kernel.0.to_string());
        kv("decoder_kernel_w", self.decoder_kernel.1.to_string());
        kv("batch_norm", self.batch_norm.to_string());
        s
    }

    /// Parses the `to_text` format. Blank lines and `#` comments are
    /// ignored; every key must appear exactly once. Errors carry 1-based
    /// line numbers.
    pub fn from_text(text: &str) -> Result<ModelConfig, NnError> {
        use std::collections::HashMap;
        let mut seen: HashMap<&str, (usize, &str)> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(NnError::Config(format!(
                    "line {}: expected `name = value`, got {raw:?}",
                    i + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            if let Some((first, _)) = seen.insert(key, (i + 1, value)) {
                return Err(NnError::Config(format!(
                    "line {}: duplicate key {key:?} (first on line {first})",
                    i + 1
                )));
            }
        }

        let mut take = |key: &'static str| -> Result<(usize, &str), NnError> {
            seen.remove(key)
                .ok_or_else(|| NnError::Config(format!("missing key {key:?}")))
        };
        fn usize_of((line, v): (usize, &str), key: &str) -> Result<usize, NnError> {
            v.parse()
                .map_err(|_| NnError::Config(format!("line {line}: {key} = {v:?} is not an integer")))
        }
        fn bool_of((line, v): (usize, &str), key: &str) -> Result<bool, NnError> {
            v.parse()
                .map_err(|_| NnError::Config(format!("line {line}: {key} = {v:?} is not a boolean")))
        }

        let (fam_line, fam) = take("family")?;
        let family = ModelFamily::parse(fam).ok_or_else(|| {
            NnError::Config(format!("line {fam_line}: unknown family {fam:?}"))
        })?;
        let (se_line, se) = take("se_rate")?;
        let se_rate: f64 = se.parse().map_err(|_| {
            NnError::Config(format!("line {se_line}: se_rate = {se:?} is not a number"))
        })?;

        let mut int = |key: &'static str| take(key).and_then(|lv| usize_of(lv, key));
        let mut cfg = ModelConfig {
            family,
            classes: int("classes")?,
            input: [int("input_h")?, int("input_w")?, int("input_c")?],
            first_filters: int("first_filters")?,
            first_kernel: (int("first_kernel_h")?, int("first_kernel_w")?),
            first_pool: (int("first_pool_h")?, int("first_pool_w")?),
            depth: int("depth")?,
            expansion: int("expansion")?,
            residual: false,
            se_rate,
            repetitions: int("repetitions")?,
            block_pool: (int("block_pool_h")?, int("block_pool_w")?),
            final_kernel: (int("final_kernel_h")?, int("final_kernel_w")?),
            classifier_depth: int("classifier_depth")?,
            classifier_width: int("classifier_width")?,
            attn_a_kernel: (int("attn_a_kernel_h")?, int("attn_a_kernel_w")?),
            attn_b_pool: (int("attn_b_pool_h")?, int("attn_b_pool_w")?),
            attn_b_stride: (int("attn_b_stride_h")?, int("attn_b_stride_w")?),
            attn_b_depth: int("attn_b_depth")?,
            attn_b_width: int("attn_b_width")?,
            decoder_kernel: (int("decoder_kernel_h")?, int("decoder_kernel_w")?),
            batch_norm: false,
        };
        cfg.residual = take("residual").and_then(|lv| bool_of(lv, "residual"))?;
        cfg.batch_norm = take("batch_norm").and_then(|lv| bool_of(lv, "batch_norm"))?;

        if let Some((&key, &(line, _))) = seen.iter().min_by_key(|(_, (line, _))| *line) {
            return Err(NnError::Config(format!("line {line}: unknown key {key:?}")));
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_one(seed: u64) -> ModelConfig {
        let space = SearchSpace::for_input_channels(16);
        space.sample(
            ModelFamily::DomainAdaptation,
            4,
            [64, 128, 16],
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
    }

    #[test]
    fn text_round_trip_is_lossless() {
        for seed in 0..20 {
            let cfg = sample_one(seed);
            let parsed = ModelConfig::from_text(&cfg.to_text()).unwrap();
            assert_eq!(parsed, cfg);
        }
    }

    #[test]
    fn serialization_key_order_is_stable() {
        let a = sample_one(1).to_text();
        let b = sample_one(2).to_text();
        let keys = |s: &str| -> Vec<String> {
            s.lines()
                .map(|l| l.split('=').next().unwrap().trim().to_string())
                .collect()
        };
        assert_eq!(keys(&a), keys(&b));
        assert_eq!(keys(&a)[0], "family");
        assert_eq!(keys(&a).len(), 32);
    }

    #[test]
    fn parser_reports_line_numbers_and_rejects_malformed_input() {
        let cfg = sample_one(3);
        let text = cfg.to_text();

        let broken = text.replacen("depth = ", "depth ", 1);
        let err = ModelConfig::from_text(&broken).unwrap_err().to_string();
        assert!(err.contains("line 11"), "{err}");

        let unknown = format!("{text}mystery = 5\n");
        let err = ModelConfig::from_text(&unknown).unwrap_err().to_string();
        assert!(err.contains("unknown key") && err.contains("mystery"), "{err}");

        let missing = text.replacen("classes = 4\n", "", 1);
        let err = ModelConfig::from_text(&missing).unwrap_err().to_string();
        assert!(err.contains("missing key") && err.contains("classes"), "{err}");

        let dup = format!("{text}depth = 3\n");
        let err = ModelConfig::from_text(&dup).unwrap_err().to_string();
        assert!(err.contains("duplicate"), "{err}");

        let bad_family = text.replacen("domain_adaptation", "mystery", 1);
        let err = ModelConfig::from_text(&bad_family).unwrap_err().to_string();
        assert!(err.contains("unknown family"), "{err}");
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = sample_one(4);
        let text = format!("# architecture\n\n{}\n# end\n", cfg.to_text());
        assert_eq!(ModelConfig::from_text(&text).unwrap(), cfg);
    }

    #[test]
    fn sampling_respects_every_interval() {
        let space = SearchSpace::for_input_channels(16);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let in_iv = |v: usize, (lo, hi): (usize, usize)| v >= lo && v <= hi;
        let pair_in = |p: (usize, usize), iv| in_iv(p.0, iv) && in_iv(p.1, iv);
        for i in 0..200 {
            let family = ModelFamily::ALL[i % 3];
            let cfg = space.sample(family, 4, [64, 128, 16], &mut rng);
            assert!(in_iv(cfg.first_filters, space.first_filters));
            assert!(pair_in(cfg.first_kernel, space.first_kernel));
            assert!(pair_in(cfg.first_pool, space.first_pool));
            assert!(in_iv(cfg.depth, space.depth));
            assert!(in_iv(cfg.expansion, space.expansion));
            assert!(cfg.se_rate >= space.se_rate.0 && cfg.se_rate <= space.se_rate.1);
            assert!(in_iv(cfg.repetitions, space.repetitions));
            assert!(pair_in(cfg.block_pool, space.block_pool));
            assert!(pair_in(cfg.final_kernel, space.final_kernel));
            assert!(in_iv(cfg.classifier_depth, space.classifier_depth));
            assert!(in_iv(cfg.classifier_width, space.classifier_width));
            assert!(pair_in(cfg.attn_a_kernel, space.attn_a_kernel));
            assert!(pair_in(cfg.attn_b_pool, space.attn_b_pool));
            assert!(pair_in(cfg.attn_b_stride, space.attn_b_stride));
            assert!(in_iv(cfg.attn_b_depth, space.attn_b_depth));
            assert!(in_iv(cfg.attn_b_width, space.attn_b_width));
            assert!(pair_in(cfg.decoder_kernel, space.decoder_kernel));
            assert_eq!(cfg.classes, 4);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let space = SearchSpace::for_input_channels(1);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..5)
                .map(|_| space.sample(ModelFamily::Standard, 4, [64, 128, 1], &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
        assert_ne!(draw(7), draw(8));
    }

    #[test]
    fn filter_floor_tracks_input_channels() {
        assert_eq!(SearchSpace::for_input_channels(16).first_filters, (16, 24));
        assert_eq!(SearchSpace::for_input_channels(1).first_filters, (1, 24));
        assert_eq!(SearchSpace::for_input_channels(32).first_filters, (32, 32));
    }
}
