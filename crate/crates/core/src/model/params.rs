use super::ModelConfig;
use crate::autodiff::{Gradients, Tape, Tensor, Var};
use crate::error::{config_err, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Named weight tensors, iterated in name order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    tensors: BTreeMap<String, Tensor>,
}

/// Names and shapes of every weight the model owns.
pub fn param_layout(cfg: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let mut out = Vec::new();
    let mut cin = cfg.mel_bands();
    for (i, &cout) in cfg.encoder_channels.iter().enumerate() {
        out.push((format!("enc.conv{i}.weight"), vec![cout, cin, cfg.encoder_kernel]));
        out.push((format!("enc.conv{i}.bias"), vec![cout]));
        out.push((format!("enc.norm{i}.scale"), vec![cout, 1]));
        out.push((format!("enc.norm{i}.shift"), vec![cout, 1]));
        cin = cout;
    }
    out.push(("enc.out.weight".into(), vec![cin, 2]));
    out.push(("enc.out.bias".into(), vec![2]));
    let p = cfg.projection_units;
    for feat in DECODER_INPUTS {
        out.push((format!("dec.proj.{feat}.weight"), vec![1, p]));
        out.push((format!("dec.proj.{feat}.bias"), vec![p]));
    }
    let h = cfg.hidden_units;
    out.push(("dec.gru.w_ih".into(), vec![DECODER_INPUTS.len() * p, 3 * h]));
    out.push(("dec.gru.b_ih".into(), vec![3 * h]));
    out.push(("dec.gru.w_hh".into(), vec![h, 3 * h]));
    out.push(("dec.gru.b_hh".into(), vec![3 * h]));
    out.push(("dec.out.weight".into(), vec![h, cfg.head_width()]));
    out.push(("dec.out.bias".into(), vec![cfg.head_width()]));
    out
}

pub(crate) const DECODER_INPUTS: [&str; 4] = ["f0", "loudness", "onset", "z"];

impl ParamStore {
    /// Weights uniform in `±1/sqrt(fan_in)`, biases and shifts zero, scales one.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = BTreeMap::new();
        for (name, shape) in param_layout(cfg) {
            let n: usize = shape.iter().product();
            let data = if name.ends_with(".scale") {
                vec![1.0; n]
            } else if name.ends_with("weight") || name.contains(".w_") {
                let fan_in: usize = match shape.as_slice() {
                    [_, cin, k] => cin * k,
                    [rows, _] => *rows,
                    _ => 1,
                };
                let bound = 1.0 / (fan_in as f64).sqrt();
                (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
            } else {
                vec![0.0; n]
            };
            tensors.insert(name, Tensor::new(shape, data)?);
        }
        Ok(Self { tensors })
    }

    pub fn from_tensors(tensors: BTreeMap<String, Tensor>) -> Self {
        Self { tensors }
    }

    /// Fails unless names and shapes match `cfg` exactly.
    pub fn check_layout(&self, cfg: &ModelConfig) -> Result<()> {
        let layout = param_layout(cfg);
        if layout.len() != self.tensors.len() {
            return config_err(format!(
                "expected {} tensors, found {}",
                layout.len(),
                self.tensors.len()
            ));
        }
        for (name, shape) in layout {
            match self.tensors.get(&name) {
                Some(t) if t.shape() == shape.as_slice() => {}
                Some(t) => {
                    return config_err(format!("{name} has shape {:?}, expected {shape:?}", t.shape()))
                }
                None => return config_err(format!("missing tensor {name}")),
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Config(format!("missing tensor {name}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    /// Records every tensor on `tape`, as trainable leaves or as constants.
    pub fn bind<'t>(&self, tape: &'t Tape, trainable: bool) -> BoundParams<'t> {
        let vars = self
            .tensors
            .iter()
            .map(|(k, t)| {
                let v = if trainable {
                    tape.var(t.clone())
                } else {
                    tape.constant(t.clone())
                };
                (k.clone(), v)
            })
            .collect();
        BoundParams { vars }
    }
}

/// Parameters recorded on one tape.
pub struct BoundParams<'t> {
    vars: BTreeMap<String, Var<'t>>,
}

impl<'t> BoundParams<'t> {
    pub fn from_vars(vars: BTreeMap<String, Var<'t>>) -> Self {
        Self { vars }
    }

    pub fn get(&self, name: &str) -> Result<Var<'t>> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::Config(format!("missing tensor {name}")))
    }

    /// Gradient per parameter name; zeros where nothing flowed.
    pub fn gradients(&self, grads: &Gradients) -> BTreeMap<String, Tensor> {
        self.vars
            .iter()
            .map(|(k, v)| (k.clone(), grads.get_or_zeros(*v)))
            .collect()
    }
}
