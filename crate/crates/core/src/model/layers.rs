use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Fully connected layer, row-major `out x in` weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn random(inputs: usize, outputs: usize, std: f64, rng: &mut ChaCha8Rng) -> Self {
        let weights = (0..inputs * outputs)
            .map(|_| std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Dense {
            inputs,
            outputs,
            weights,
            bias: vec![0.0; outputs],
        }
    }

    pub fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(x.len(), self.inputs);
        out.clear();
        for (o, b) in self.bias.iter().enumerate() {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            out.push(row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b);
        }
    }

    pub fn is_well_formed(&self) -> bool {
        self.weights.len() == self.inputs * self.outputs && self.bias.len() == self.outputs
    }
}

/// ReLU between layers, linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    pub fn random(inputs: usize, hidden: &[usize], outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(inputs);
        widths.extend_from_slice(hidden);
        widths.push(outputs);
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let fan_in = w[0].max(1) as f64;
                let gain = if i + 2 == widths.len() { 1.0 } else { 2.0 };
                Dense::random(w[0], w[1], (gain / fan_in).sqrt(), rng)
            })
            .collect();
        Mlp { layers }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward(&cur, &mut next);
            if i != last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn outputs(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn is_well_formed(&self) -> bool {
        !self.layers.is_empty()
            && self.layers.iter().all(Dense::is_well_formed)
            && self.layers.windows(2).all(|w| w[0].outputs == w[1].inputs)
    }
}

/// Normalize to zero mean and unit variance with a variance floor.
/// The zero vector maps to itself.
pub(crate) fn layer_norm(v: &mut [f64], var_floor: f64) {
    if v.is_empty() {
        return;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let inv = 1.0 / var.max(var_floor).sqrt();
    v.iter_mut().for_each(|x| *x = (*x - mean) * inv);
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_norm_zero_vector_is_fixed_point() {
        let mut v = vec![0.0; 5];
        layer_norm(&mut v, 1e-5);
        assert_eq!(v, vec![0.0; 5]);
    }

    #[test]
    fn layer_norm_moments() {
        let mut v = vec![1.0, 2.0, 3.0, 10.0];
        layer_norm(&mut v, 1e-5);
        let mean = v.iter().sum::<f64>() / 4.0;
        let var = v.iter().map(|x| x * x).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
    }

    #[test]
    fn dense_with_no_inputs_emits_bias() {
        let mut d = Dense {
            inputs: 0,
            outputs: 2,
            weights: vec![],
            bias: vec![0.5, -1.0],
        };
        let mut out = Vec::new();
        d.forward(&[], &mut out);
        assert_eq!(out, vec![0.5, -1.0]);
        d.bias[0] = 0.0;
        d.forward(&[], &mut out);
        assert_eq!(out, vec![0.0, -1.0]);
    }
}
