use std::collections::BTreeMap;

use super::tensor::Scalar;
use super::NnError;

/// One named tensor: weights, biases or a non-trainable buffer such as a
/// batch-norm running statistic. ADAM state lives next to the values so a
/// cloned store checkpoints the optimizer along with the weights.
#[derive(Clone, Debug)]
pub struct Param<S> {
    pub dims: [usize; 4],
    pub value: Vec<S>,
    pub trainable: bool,
    m: Vec<S>,
    v: Vec<S>,
    step: u64,
}

impl<S: Scalar> Param<S> {
    pub fn new(dims: [usize; 4], value: Vec<S>, trainable: bool) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), value.len());
        let n = value.len();
        Param {
            dims,
            value,
            trainable,
            m: vec![S::zero(); n],
            v: vec![S::zero(); n],
            step: 0,
        }
    }
}

/// Name-keyed parameter collection. A `BTreeMap` keeps every iteration in
/// sorted name order, which makes optimizer sweeps and checkpoints
/// deterministic without extra bookkeeping.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<S> {
    entries: BTreeMap<String, Param<S>>,
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        ParamStore {
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, param: Param<S>) {
        let name = name.into();
        debug_assert!(
            !self.entries.contains_key(&name),
            "duplicate parameter {name}"
        );
        self.entries.insert(name, param);
    }

    pub fn get(&self, name: &str) -> &Param<S> {
        self.entries
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Param<S> {
        self.entries
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Param<S>)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total element count over trainable tensors.
    pub fn trainable_len(&self) -> usize {
        self.entries
            .values()
            .filter(|p| p.trainable)
            .map(|p| p.value.len())
            .sum()
    }

    /// Copies current values, for best-epoch restoration.
    pub fn snapshot(&self) -> BTreeMap<String, Vec<S>> {
        self.entries
            .iter()
            .map(|(k, p)| (k.clone(), p.value.clone()))
            .collect()
    }

    pub fn restore(&mut self, snapshot: &BTreeMap<String, Vec<S>>) {
        for (name, value) in snapshot {
            let p = self.get_mut(name);
            debug_assert_eq!(p.value.len(), value.len());
            p.value.clone_from(value);
        }
    }
}

/// Gradient accumulator keyed by parameter name. Layers add into it during
/// the backward pass; keys absent from the map are simply not updated, which
/// is how partial-network optimization steps are expressed.
#[derive(Clone, Debug, Default)]
pub struct Grads<S> {
    entries: BTreeMap<String, Vec<S>>,
}

impl<S: Scalar> Grads<S> {
    pub fn new() -> Self {
        Grads {
            entries: BTreeMap::new(),
        }
    }

    /// Adds `g` elementwise into the accumulator for `name`.
    pub fn accumulate(&mut self, name: &str, g: &[S]) {
        match self.entries.get_mut(name) {
            Some(acc) => {
                debug_assert_eq!(acc.len(), g.len());
                for (a, &b) in acc.iter_mut().zip(g) {
                    *a += b;
                }
            }
            None => {
                self.entries.insert(name.to_string(), g.to_vec());
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&[S]> {
        self.entries.get(name).map(|v| v.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<S>)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One ADAM update with bias correction over every name present in `grads`.
/// Each parameter keeps its own step counter, so sub-networks trained at
/// different cadences stay correctly bias-corrected.
pub fn adam_step<S: Scalar>(
    store: &mut ParamStore<S>,
    grads: &Grads<S>,
    cfg: &AdamConfig,
) -> Result<(), NnError> {
    for (name, g) in grads.iter() {
        if !g.iter().all(|v| v.is_finite()) {
            return Err(NnError::Numerical(format!(
                "non-finite gradient for {name}"
            )));
        }
    }
    let b1 = S::from_f64(cfg.beta1);
    let b2 = S::from_f64(cfg.beta2);
    let one = S::one();
    let eps = S::from_f64(cfg.eps);
    for (name, g) in grads.iter() {
        let p = match store.entries.get_mut(name) {
            Some(p) => p,
            None => {
                return Err(NnError::Config(format!(
                    "gradient for unknown parameter {name}"
                )))
            }
        };
        if !p.trainable {
            return Err(NnError::Config(format!(
                "gradient for non-trainable parameter {name}"
            )));
        }
        if p.value.len() != g.len() {
            return Err(NnError::Shape(format!(
                "gradient length {} for parameter {name} of length {}",
                g.len(),
                p.value.len()
            )));
        }
        p.step += 1;
        let corr1 = S::from_f64(1.0 - cfg.beta1.powi(p.step as i32));
        let corr2 = S::from_f64(1.0 - cfg.beta2.powi(p.step as i32));
        let lr = S::from_f64(cfg.lr);
        for i in 0..g.len() {
            let gi = g[i];
            p.m[i] = b1 * p.m[i] + (one - b1) * gi;
            p.v[i] = b2 * p.v[i] + (one - b2) * gi * gi;
            let m_hat = p.m[i] / corr1;
            let v_hat = p.v[i] / corr2;
            p.value[i] = p.value[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
