//! Fully-connected network with tanh hidden layers and a linear output layer.
//!
//! Parameters live in one flat vector, layer by layer: the weight matrix
//! (row-major, `out × in`) followed by the bias.

use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations of one forward pass, kept for backprop.
#[derive(Debug, Clone)]
pub struct Cache {
    /// `layers[0]` is the input, `layers[l + 1]` the output of layer `l`.
    layers: Vec<Vec<f64>>,
}

impl Cache {
    pub fn output(&self) -> &[f64] {
        self.layers.last().expect("cache has an output")
    }
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        }
    }

    /// Uniform fan-in initialization with variance `1/fan_in`; the last
    /// layer is left at zero when `zero_last` is set.
    pub fn init(sizes: &[usize], zero_last: bool, rng: &mut impl Rng) -> Self {
        let mut mlp = Self::zeros(sizes);
        let layers = sizes.len() - 1;
        let mut offset = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let w_len = fan_in * fan_out;
            if !(zero_last && l == layers - 1) {
                let bound = (3.0 / fan_in as f64).sqrt();
                for p in &mut mlp.params[offset..offset + w_len] {
                    *p = rng.gen_range(-bound..bound);
                }
            }
            offset += w_len + fan_out;
        }
        mlp
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Option<Self> {
        (sizes.len() >= 2 && params.len() == param_count(sizes)).then(|| Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.forward_cached(input).layers.pop().unwrap()
    }

    pub fn forward_cached(&self, input: &[f64]) -> Cache {
        debug_assert_eq!(input.len(), self.input_dim());
        let layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(input.to_vec());
        let mut offset = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offset..offset + fan_in * fan_out];
            let b = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            let x = &acts[l];
            let mut y: Vec<f64> = (0..fan_out)
                .map(|o| {
                    let row = &w[o * fan_in..(o + 1) * fan_in];
                    b[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect();
            if l + 1 < layers {
                y.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(y);
            offset += fan_in * fan_out + fan_out;
        }
        Cache { layers: acts }
    }

    /// Accumulate `∂L/∂θ` into `grad` given `∂L/∂output`.
    pub fn backward(&self, cache: &Cache, d_output: &[f64], grad: &mut [f64]) {
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut offset = 0;
        for l in 0..layers {
            offsets.push(offset);
            offset += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        let mut delta = d_output.to_vec();
        for l in (0..layers).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            if l + 1 < layers {
                // through tanh: d/dz = (1 - a²)
                let a = &cache.layers[l + 1];
                for (d, a) in delta.iter_mut().zip(a) {
                    *d *= 1.0 - a * a;
                }
            }
            let x = &cache.layers[l];
            for o in 0..fan_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let g = &mut grad[off + o * fan_in..off + (o + 1) * fan_in];
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi += d * xi;
                }
                grad[off + fan_in * fan_out + o] += d;
            }
            if l > 0 {
                let w = &self.params[off..off + fan_in * fan_out];
                let mut prev = vec![0.0; fan_in];
                for o in 0..fan_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    for (p, wi) in prev.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                        *p += d * wi;
                    }
                }
                delta = prev;
            }
        }
    }
}
