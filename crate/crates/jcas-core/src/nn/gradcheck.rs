//! Finite-difference verification of analytic gradients. Central differences
//! in `f64` give roughly ten significant digits, so any structural mistake in
//! a backward pass shows up orders of magnitude above the tolerance.

use rand::seq::SliceRandom;
use rand::Rng;

use super::layers::{Layer, Mode};
use super::params::{Grads, ParamStore};
use super::tensor::Tensor4;

#[derive(Clone, Copy, Debug)]
pub struct GradCheckSpec {
    /// Minimum number of parameter coordinates to probe.
    pub param_coords: usize,
    /// Minimum number of input coordinates to probe.
    pub input_coords: usize,
    pub epsilon: f64,
}

impl Default for GradCheckSpec {
    fn default() -> Self {
        GradCheckSpec {
            param_coords: 50,
            input_coords: 20,
            epsilon: 1e-5,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub coords_checked: usize,
    pub worst: String,
}

impl GradCheckReport {
    fn update(&mut self, rel: f64, what: String) {
        self.coords_checked += 1;
        if rel > self.max_rel_err {
            self.max_rel_err = rel;
            self.worst = what;
        }
    }
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / denom
}

/// Checks a layer's parameter and input gradients against central finite
/// differences of the scalar loss `sum(dy * forward(x))`, where `dy` is a
/// fixed random cotangent. Runs in train mode so batch-norm statistics paths
/// are exercised.
pub fn gradcheck<R: Rng>(
    layer: &Layer,
    store: &mut ParamStore<f64>,
    x: &Tensor4<f64>,
    spec: &GradCheckSpec,
    rng: &mut R,
) -> GradCheckReport {
    let (y0, cache) = layer
        .forward(x, store, Mode::Train)
        .expect("gradcheck forward");
    let dy = Tensor4::from_vec(
        y0.dims(),
        (0..y0.len()).map(|_| rng.random::<f64>() - 0.5).collect(),
    )
    .unwrap();
    let mut grads = Grads::new();
    let dx = layer
        .backward(&dy, &cache, store, &mut grads)
        .expect("gradcheck backward");

    let loss = |layer: &Layer, store: &ParamStore<f64>, x: &Tensor4<f64>| -> f64 {
        let (y, _) = layer.forward(x, store, Mode::Train).unwrap();
        y.data().iter().zip(dy.data()).map(|(a, b)| a * b).sum()
    };

    let mut report = GradCheckReport::default();

    // Parameter coordinates: sample uniformly over all trainable elements.
    let mut names = Vec::new();
    layer.param_names(&mut names);
    let mut coords: Vec<(usize, usize)> = Vec::new();
    for (ni, name) in names.iter().enumerate() {
        for i in 0..store.get(name).value.len() {
            coords.push((ni, i));
        }
    }
    coords.shuffle(rng);
    coords.truncate(spec.param_coords.max(1).min(coords.len()));
    for (ni, i) in coords {
        let name = &names[ni];
        let orig = store.get(name).value[i];
        let eps = spec.epsilon * orig.abs().max(1.0);
        store.get_mut(name).value[i] = orig + eps;
        let lp = loss(layer, store, x);
        store.get_mut(name).value[i] = orig - eps;
        let lm = loss(layer, store, x);
        store.get_mut(name).value[i] = orig;
        let numeric = (lp - lm) / (2.0 * eps);
        let analytic = grads.get(name).map(|g| g[i]).unwrap_or(0.0);
        report.update(rel_err(analytic, numeric), format!("{name}[{i}]"));
    }

    // Input coordinates.
    let mut xs = x.clone();
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.shuffle(rng);
    idx.truncate(spec.input_coords.max(1).min(x.len()));
    for i in idx {
        let orig = xs.data()[i];
        let eps = spec.epsilon * orig.abs().max(1.0);
        xs.data_mut()[i] = orig + eps;
        let lp = loss(layer, store, &xs);
        xs.data_mut()[i] = orig - eps;
        let lm = loss(layer, store, &xs);
        xs.data_mut()[i] = orig;
        let numeric = (lp - lm) / (2.0 * eps);
        report.update(rel_err(dx.data()[i], numeric), format!("input[{i}]"));
    }

    report
}
