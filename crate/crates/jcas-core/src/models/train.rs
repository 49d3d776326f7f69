//! Single optimization steps. The adaptation family takes two of them per
//! batch: a cross-entropy step on the labeled source flow, then a summed
//! reconstruction step over the source and target flows.

use crate::nn::{adam_step, mse_loss, softmax_cross_entropy, AdamConfig, Grads, Mode, NnError,
    ParamStore, Scalar, Tensor4};

use super::build::Model;

/// One cross-entropy step over the classification path. Returns the batch
/// loss measured before the update.
pub fn train_step_standard<S: Scalar>(
    model: &Model,
    store: &mut ParamStore<S>,
    x: &Tensor4<S>,
    targets: &Tensor4<S>,
    adam: &AdamConfig,
) -> Result<S, NnError> {
    let (probs, cache) = model.forward_classify(x, store, Mode::Train)?;
    let (loss, dprobs) = softmax_cross_entropy(&probs, targets)?;
    if !loss.is_finite() {
        return Err(NnError::Numerical("classification loss is not finite".into()));
    }
    let mut grads = Grads::new();
    model.backward_classify(&dprobs, &cache, store, &mut grads)?;
    adam_step(store, &grads, adam)?;
    cache.apply_bn_updates(store);
    Ok(loss)
}

/// One adaptation update: first the standard step on the labeled source
/// batch, then a second optimizer application on the summed source and
/// target reconstruction losses, which touches only the stem and decoder.
/// Target labels are never read. Returns `(classification loss,
/// reconstruction loss)`, each measured before its own update.
pub fn train_step_adaptation<S: Scalar>(
    model: &Model,
    store: &mut ParamStore<S>,
    source_x: &Tensor4<S>,
    source_targets: &Tensor4<S>,
    target_x: &Tensor4<S>,
    adam: &AdamConfig,
) -> Result<(S, S), NnError> {
    let class_loss = train_step_standard(model, store, source_x, source_targets, adam)?;

    let (recon_s, cache_s) = model.forward_recon(source_x, store, Mode::Train)?;
    let (recon_t, cache_t) = model.forward_recon(target_x, store, Mode::Train)?;
    let (loss_s, dls) = mse_loss(&recon_s, source_x)?;
    let (loss_t, dlt) = mse_loss(&recon_t, target_x)?;
    let recon_loss = loss_s + loss_t;
    if !recon_loss.is_finite() {
        return Err(NnError::Numerical("reconstruction loss is not finite".into()));
    }
    let mut grads = Grads::new();
    model.backward_recon(&dls, &cache_s, store, &mut grads)?;
    model.backward_recon(&dlt, &cache_t, store, &mut grads)?;
    adam_step(store, &grads, adam)?;
    // Both flows staged running statistics against the same pre-step values;
    // the target flow's stats are written last and win.
    cache_s.apply_bn_updates(store);
    cache_t.apply_bn_updates(store);
    Ok((class_loss, recon_loss))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::config::{ModelConfig, ModelFamily};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(family: ModelFamily, batch_norm: bool) -> ModelConfig {
        ModelConfig {
            family,
            classes: 4,
            input: [8, 8, 2],
            first_filters: 2,
            first_kernel: (3, 3),
            first_pool: (2, 2),
            depth: 2,
            expansion: 2,
            residual: true,
            se_rate: 0.5,
            repetitions: 0,
            block_pool: (2, 2),
            final_kernel: (2, 2),
            classifier_depth: 1,
            classifier_width: 8,
            attn_a_kernel: (3, 3),
            attn_b_pool: (2, 2),
            attn_b_stride: (2, 2),
            attn_b_depth: 1,
            attn_b_width: 8,
            decoder_kernel: (3, 3),
            batch_norm,
        }
    }

    fn random_batch(n: usize, seed: u64) -> (Tensor4<f64>, Tensor4<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = [n, 8, 8, 2];
        let len: usize = dims.iter().product();
        let x = Tensor4::from_vec(dims, (0..len).map(|_| rng.random::<f64>() - 0.5).collect())
            .unwrap();
        let mut y = Tensor4::zeros([n, 1, 1, 4]);
        for b in 0..n {
            y.set(b, 0, 0, rng.random_range(0..4), 1.0);
        }
        (x, y)
    }

    #[test]
    fn repeated_steps_on_one_batch_reduce_the_loss() {
        let model = Model::build(&cfg(ModelFamily::Standard, false)).unwrap();
        let mut store = model.init_params::<f64>(0);
        let (x, y) = random_batch(12, 1);
        let adam = AdamConfig::default();
        let mut losses = Vec::new();
        for _ in 0..10 {
            losses.push(train_step_standard(&model, &mut store, &x, &y, &adam).unwrap());
        }
        for pair in losses.windows(2) {
            assert!(pair[1] < pair[0], "loss went up: {losses:?}");
        }
    }

    #[test]
    fn steps_are_deterministic() {
        let run = || {
            let model = Model::build(&cfg(ModelFamily::DomainAdaptation, true)).unwrap();
            let mut store = model.init_params::<f64>(3);
            let (sx, sy) = random_batch(4, 2);
            let (tx, _) = random_batch(4, 5);
            let adam = AdamConfig::default();
            (0..3)
                .map(|_| train_step_adaptation(&model, &mut store, &sx, &sy, &tx, &adam).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn classification_step_leaves_decoder_untouched() {
        let model = Model::build(&cfg(ModelFamily::DomainAdaptation, false)).unwrap();
        let mut store = model.init_params::<f64>(4);
        let before = store.snapshot();
        let (x, y) = random_batch(4, 3);
        train_step_standard(&model, &mut store, &x, &y, &AdamConfig::default()).unwrap();
        let after = store.snapshot();
        for (name, old) in &before {
            let moved = after[name] != *old;
            if name.starts_with("decoder.") {
                assert!(!moved, "{name} changed during the classification step");
            }
        }
        assert_ne!(before["classifier.out.weight"], after["classifier.out.weight"]);
        assert_ne!(
            before["backbone.stem.conv.weight"],
            after["backbone.stem.conv.weight"]
        );
    }

    #[test]
    fn adaptation_step_matches_a_manual_two_phase_replay() {
        let model = Model::build(&cfg(ModelFamily::DomainAdaptation, true)).unwrap();
        let adam = AdamConfig::default();
        let (sx, sy) = random_batch(4, 7);
        let (tx, _) = random_batch(4, 8);

        let mut combined = model.init_params::<f64>(11);
        let (cls, rec) =
            train_step_adaptation(&model, &mut combined, &sx, &sy, &tx, &adam).unwrap();

        // Phase 1 alone, then the reconstruction phase spelled out by hand.
        let mut manual = model.init_params::<f64>(11);
        let cls2 = train_step_standard(&model, &mut manual, &sx, &sy, &adam).unwrap();
        let (rs, cs) = model.forward_recon(&sx, &manual, Mode::Train).unwrap();
        let (rt, ct) = model.forward_recon(&tx, &manual, Mode::Train).unwrap();
        let (ls, dls) = mse_loss(&rs, &sx).unwrap();
        let (lt, dlt) = mse_loss(&rt, &tx).unwrap();
        let mut grads = Grads::new();
        model.backward_recon(&dls, &cs, &manual, &mut grads).unwrap();
        model.backward_recon(&dlt, &ct, &manual, &mut grads).unwrap();
        adam_step(&mut manual, &grads, &adam).unwrap();
        cs.apply_bn_updates(&mut manual);
        ct.apply_bn_updates(&mut manual);

        assert_eq!(cls, cls2);
        assert_eq!(rec, ls + lt);
        assert_eq!(combined.snapshot(), manual.snapshot());

        // The reconstruction phase must see the phase-1 stem update: replaying
        // it against untouched parameters yields a different loss.
        let fresh = model.init_params::<f64>(11);
        let (r0, _) = model.forward_recon(&sx, &fresh, Mode::Train).unwrap();
        let (l0, _) = mse_loss(&r0, &sx).unwrap();
        assert_ne!(l0, ls);
    }

    #[test]
    fn fusing_both_phases_into_one_update_is_observably_different() {
        let model = Model::build(&cfg(ModelFamily::DomainAdaptation, false)).unwrap();
        let adam = AdamConfig::default();
        let (sx, sy) = random_batch(4, 17);
        let (tx, _) = random_batch(4, 18);

        let mut two_phase = model.init_params::<f64>(19);
        train_step_adaptation(&model, &mut two_phase, &sx, &sy, &tx, &adam).unwrap();

        // Single fused update: every loss backward accumulated into one
        // gradient set, one optimizer application.
        let mut fused = model.init_params::<f64>(19);
        let (probs, cache) = model.forward_classify(&sx, &fused, Mode::Train).unwrap();
        let (_, dprobs) = softmax_cross_entropy(&probs, &sy).unwrap();
        let (rs, cs) = model.forward_recon(&sx, &fused, Mode::Train).unwrap();
        let (rt, ct) = model.forward_recon(&tx, &fused, Mode::Train).unwrap();
        let (_, dls) = mse_loss(&rs, &sx).unwrap();
        let (_, dlt) = mse_loss(&rt, &tx).unwrap();
        let mut grads = Grads::new();
        model.backward_classify(&dprobs, &cache, &fused, &mut grads).unwrap();
        model.backward_recon(&dls, &cs, &fused, &mut grads).unwrap();
        model.backward_recon(&dlt, &ct, &fused, &mut grads).unwrap();
        adam_step(&mut fused, &grads, &adam).unwrap();
        cache.apply_bn_updates(&mut fused);
        cs.apply_bn_updates(&mut fused);
        ct.apply_bn_updates(&mut fused);

        assert_ne!(two_phase.snapshot(), fused.snapshot());
    }

    #[test]
    fn identical_flows_double_the_single_flow_reconstruction_loss() {
        let model = Model::build(&cfg(ModelFamily::DomainAdaptation, false)).unwrap();
        let adam = AdamConfig::default();
        let (sx, sy) = random_batch(4, 23);

        let mut store = model.init_params::<f64>(29);
        let (_, rec) = train_step_adaptation(&model, &mut store, &sx, &sy, &sx, &adam).unwrap();

        let mut replay = model.init_params::<f64>(29);
        train_step_standard(&model, &mut replay, &sx, &sy, &adam).unwrap();
        let (rs, _) = model.forward_recon(&sx, &replay, Mode::Train).unwrap();
        let (single, _) = mse_loss(&rs, &sx).unwrap();
        assert_eq!(rec, 2.0 * single);
    }

    #[test]
    fn adaptation_step_requires_the_decoder_family() {
        let model = Model::build(&cfg(ModelFamily::Standard, false)).unwrap();
        let mut store = model.init_params::<f64>(0);
        let (x, y) = random_batch(2, 31);
        let err = train_step_adaptation(&model, &mut store, &x, &y, &x, &AdamConfig::default());
        assert!(matches!(err, Err(NnError::Config(_))), "{err:?}");
    }

    #[test]
    fn poisoned_parameters_surface_as_numerical_errors_without_updating() {
        let model = Model::build(&cfg(ModelFamily::Standard, false)).unwrap();
        let mut store = model.init_params::<f64>(0);
        for v in &mut store.get_mut("classifier.out.weight").value {
            *v = f64::NAN;
        }
        let before = store.snapshot();
        let (x, y) = random_batch(2, 37);
        let err = train_step_standard(&model, &mut store, &x, &y, &AdamConfig::default());
        assert!(matches!(err, Err(NnError::Numerical(_))), "{err:?}");
        // The failed step must not have touched any parameter.
        let after = store.snapshot();
        for (name, old) in &before {
            if name != "classifier.out.weight" {
                assert_eq!(&after[name], old, "{name} moved during a failed step");
            }
        }
    }
}
