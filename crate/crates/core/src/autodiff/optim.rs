//! Named parameter storage and first-order optimizers.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Matrix, Tape, Var};
use crate::error::{Error, Result};

/// Ordered map of named trainable matrices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    params: BTreeMap<String, Matrix>,
}

/// Handles of a [`ParamSet`] registered on one tape.
#[derive(Clone, Debug, Default)]
pub struct Bound {
    vars: BTreeMap<String, Var>,
}

impl Bound {
    /// Binds names to variables already on a tape.
    pub fn from_vars(vars: impl IntoIterator<Item = (String, Var)>) -> Self {
        Self {
            vars: vars.into_iter().collect(),
        }
    }

    pub fn get(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter `{name}`")))
    }

    /// Collects the gradient of every bound parameter (zeros if unreached).
    pub fn gradients(&self, tape: &Tape) -> BTreeMap<String, Matrix> {
        self.vars
            .iter()
            .map(|(name, &v)| {
                let g = tape.grad(v).cloned().unwrap_or_else(|| {
                    let (r, c) = tape.value(v).shape();
                    Matrix::zeros(r, c)
                });
                (name.clone(), g)
            })
            .collect()
    }
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Matrix) {
        self.params.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.params.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Matrix)> {
        self.params.iter()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Registers every parameter as a trainable leaf on `tape`.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        let vars = self
            .params
            .iter()
            .map(|(name, m)| (name.clone(), tape.param(m.clone())))
            .collect();
        Bound { vars }
    }

    /// Uniform Glorot initialization in ±√(6/(fan_in+fan_out)).
    pub fn glorot<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
        let bound = (6.0 / (rows + cols).max(1) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        Matrix::from_vec(rows, cols, data).expect("glorot shape")
    }

    pub fn to_json(&self) -> serde_json::Value {
        let doc: BTreeMap<&String, ParamDoc> = self
            .params
            .iter()
            .map(|(name, m)| {
                (
                    name,
                    ParamDoc {
                        shape: [m.rows(), m.cols()],
                        values: m.as_slice().to_vec(),
                    },
                )
            })
            .collect();
        serde_json::to_value(doc).expect("parameter map serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let doc: BTreeMap<String, ParamDoc> =
            serde_path_to_error::deserialize(value).map_err(Error::from_json_path)?;
        let mut params = BTreeMap::new();
        for (name, p) in doc {
            let m = Matrix::from_vec(p.shape[0], p.shape[1], p.values).map_err(|e| {
                Error::Schema {
                    path: format!("{name}.values"),
                    message: e.to_string(),
                }
            })?;
            params.insert(name, m);
        }
        Ok(Self { params })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamDoc {
    shape: [usize; 2],
    values: Vec<f64>,
}

/// Plain gradient descent: `w ← w − lr·g`.
pub fn sgd_step(params: &mut ParamSet, grads: &BTreeMap<String, Matrix>, lr: f64) {
    for (name, g) in grads {
        if let Some(w) = params.get_mut(name) {
            for (x, d) in w.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *x -= lr * d;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction; moment estimates persist per parameter name.
#[derive(Clone, Debug, Default)]
pub struct Adam {
    pub config: AdamConfig,
    t: u64,
    first: BTreeMap<String, Vec<f64>>,
    second: BTreeMap<String, Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            ..Self::default()
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &BTreeMap<String, Matrix>) {
        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.t as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (name, g) in grads {
            let Some(w) = params.get_mut(name) else {
                continue;
            };
            let n = g.as_slice().len();
            let m = self
                .first
                .entry(name.clone())
                .or_insert_with(|| vec![0.0; n]);
            let v = self
                .second
                .entry(name.clone())
                .or_insert_with(|| vec![0.0; n]);
            for (i, (x, &d)) in w.as_mut_slice().iter_mut().zip(g.as_slice()).enumerate() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * d;
                v[i] = beta2 * v[i] + (1.0 - beta2) * d * d;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                *x -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_grad(w: f64) -> (f64, f64) {
        let mut tape = Tape::new();
        let x = tape.param(Matrix::scalar(w));
        let y = tape.mul(x, x).unwrap();
        tape.backward(y).unwrap();
        (tape.value(y).item(), tape.grad(x).unwrap().item())
    }

    #[test]
    fn square_gradient_and_sgd_step() {
        let (_, g) = square_grad(3.0);
        assert_eq!(g, 6.0);
        let mut params = ParamSet::new();
        params.insert("w", Matrix::scalar(3.0));
        let grads = BTreeMap::from([("w".to_string(), Matrix::scalar(g))]);
        sgd_step(&mut params, &grads, 0.1);
        assert!((params.get("w").unwrap().item() - 2.4).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_lr_regardless_of_scale() {
        for scale in [1e-3, 1.0, 1e6] {
            let mut params = ParamSet::new();
            params.insert("w", Matrix::scalar(0.0));
            let mut adam = Adam::new(AdamConfig {
                lr: 0.05,
                ..AdamConfig::default()
            });
            let grads = BTreeMap::from([("w".to_string(), Matrix::scalar(scale))]);
            adam.step(&mut params, &grads);
            let step = params.get("w").unwrap().item().abs();
            assert!((step - 0.05).abs() < 1e-3 * 0.05, "scale {scale}: step {step}");
        }
    }

    #[test]
    fn adam_moments_persist_between_steps() {
        let mut params = ParamSet::new();
        params.insert("w", Matrix::scalar(0.0));
        let mut adam = Adam::new(AdamConfig::default());
        let grads = BTreeMap::from([("w".to_string(), Matrix::scalar(1.0))]);
        adam.step(&mut params, &grads);
        adam.step(&mut params, &grads);
        assert_eq!(adam.steps_taken(), 2);
        // constant gradient: every bias-corrected step has magnitude ≈ lr
        assert!((params.get("w").unwrap().item() + 0.02).abs() < 1e-6);
    }

    #[test]
    fn param_json_round_trip() {
        let mut params = ParamSet::new();
        params.insert("a", Matrix::from_vec(1, 2, vec![0.1, -3.5e-300]).unwrap());
        let back = ParamSet::from_json(&params.to_json()).unwrap();
        assert_eq!(back, params);
    }

    #[test]
    fn param_json_rejects_bad_length() {
        let v = serde_json::json!({"a": {"shape": [2, 2], "values": [1.0]}});
        assert!(matches!(ParamSet::from_json(&v), Err(Error::Schema { .. })));
    }
}
