use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Multilayer perceptron: tanh on every hidden layer, linear output.
///
/// Layer `k` maps `sizes[k]` inputs to `sizes[k + 1]` outputs. Its
/// parameters are stored contiguously as the row-major `out x in` weight
/// matrix followed by the `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Inputs seen by each layer during a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layer_inputs: Vec<Vec<f64>>,
}

fn layer_param_count(n_in: usize, n_out: usize) -> usize {
    n_out * n_in + n_out
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::Dimension(format!("invalid layer sizes {sizes:?}")));
        }
        let n = sizes.windows(2).map(|w| layer_param_count(w[0], w[1])).sum();
        Ok(Self { sizes: sizes.to_vec(), params: vec![0.0; n] })
    }

    /// Orthogonal initialization: each weight matrix is the orthonormal
    /// factor of a QR decomposition of a standard-normal draw (so entries
    /// have variance about `1 / fan_in`), multiplied by `gain` for hidden
    /// layers and by `output_gain` for the last one. Biases start at zero.
    pub fn orthogonal<R: Rng + ?Sized>(sizes: &[usize], gain: f64, output_gain: f64, rng: &mut R) -> Result<Self> {
        let mut mlp = Self::zeros(sizes)?;
        let n_layers = mlp.n_layers();
        let mut offset = 0;
        for k in 0..n_layers {
            let (n_in, n_out) = (sizes[k], sizes[k + 1]);
            let g = if k + 1 == n_layers { output_gain } else { gain };
            let w = orthogonal_matrix(n_out, n_in, rng);
            for r in 0..n_out {
                for c in 0..n_in {
                    mlp.params[offset + r * n_in + c] = g * w[(r, c)];
                }
            }
            offset += layer_param_count(n_in, n_out);
        }
        Ok(mlp)
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut mlp = Self::zeros(sizes)?;
        if params.len() != mlp.params.len() {
            return Err(Error::Dimension(format!(
                "{} parameters for sizes {sizes:?}, expected {}",
                params.len(),
                mlp.params.len()
            )));
        }
        mlp.params = params;
        Ok(mlp)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// `(offset, n_in, n_out)` of every layer.
    fn layout(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut offset = 0;
        self.sizes.windows(2).map(move |w| {
            let here = offset;
            offset += layer_param_count(w[0], w[1]);
            (here, w[0], w[1])
        })
    }

    /// Weight matrix (row-major) and bias of layer `k`.
    pub fn layer(&self, k: usize) -> (&[f64], &[f64]) {
        let (offset, n_in, n_out) = self.layout().nth(k).expect("layer index in range");
        let w = &self.params[offset..offset + n_out * n_in];
        let b = &self.params[offset + n_out * n_in..offset + n_out * n_in + n_out];
        (w, b)
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if input.len() != self.input_len() {
            return Err(Error::Dimension(format!(
                "network expects {} inputs, got {}",
                self.input_len(),
                input.len()
            )));
        }
        let n_layers = self.n_layers();
        let mut layer_inputs = Vec::with_capacity(n_layers);
        let mut x = input.to_vec();
        for (k, (offset, n_in, n_out)) in self.layout().enumerate() {
            let w = &self.params[offset..offset + n_out * n_in];
            let b = &self.params[offset + n_out * n_in..offset + n_out * n_in + n_out];
            let mut z = b.to_vec();
            for (r, zr) in z.iter_mut().enumerate() {
                let row = &w[r * n_in..(r + 1) * n_in];
                *zr += row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
            }
            if k + 1 < n_layers {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            layer_inputs.push(std::mem::replace(&mut x, z));
        }
        Ok((x, ForwardCache { layer_inputs }))
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.0)
    }

    /// Gradient of a scalar loss with respect to the parameters, given the
    /// loss gradient at the output.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &[f64]) -> Result<Vec<f64>> {
        let mut grads = vec![0.0; self.n_params()];
        self.backward_accumulate(cache, grad_output, &mut grads)?;
        Ok(grads)
    }

    /// Adds the parameter gradient into `grads` and returns the gradient
    /// with respect to the input.
    pub fn backward_accumulate(
        &self,
        cache: &ForwardCache,
        grad_output: &[f64],
        grads: &mut [f64],
    ) -> Result<Vec<f64>> {
        let n_layers = self.n_layers();
        let stale = cache.layer_inputs.len() != n_layers
            || cache
                .layer_inputs
                .iter()
                .zip(&self.sizes)
                .any(|(x, &n)| x.len() != n);
        if stale {
            return Err(Error::Dimension("forward cache does not match this network".into()));
        }
        if grad_output.len() != self.output_len() || grads.len() != self.n_params() {
            return Err(Error::Dimension("gradient buffer shape mismatch".into()));
        }
        let layout: Vec<_> = self.layout().collect();
        let mut grad_z = grad_output.to_vec();
        for k in (0..n_layers).rev() {
            let (offset, n_in, n_out) = layout[k];
            let x = &cache.layer_inputs[k];
            let w = &self.params[offset..offset + n_out * n_in];
            {
                let (gw, gb) = grads[offset..offset + n_out * n_in + n_out].split_at_mut(n_out * n_in);
                for r in 0..n_out {
                    let g = grad_z[r];
                    if g == 0.0 {
                        continue;
                    }
                    gb[r] += g;
                    for (gwc, xc) in gw[r * n_in..(r + 1) * n_in].iter_mut().zip(x) {
                        *gwc += g * xc;
                    }
                }
            }
            let mut grad_x = vec![0.0; n_in];
            for r in 0..n_out {
                let g = grad_z[r];
                if g == 0.0 {
                    continue;
                }
                for (gx, wc) in grad_x.iter_mut().zip(&w[r * n_in..(r + 1) * n_in]) {
                    *gx += g * wc;
                }
            }
            if k > 0 {
                // x = tanh(z_{k-1})
                for (gx, a) in grad_x.iter_mut().zip(x) {
                    *gx *= 1.0 - a * a;
                }
            }
            grad_z = grad_x;
        }
        Ok(grad_z)
    }
}

fn orthogonal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let (tall, short) = (rows.max(cols), rows.min(cols));
    let draw = DMatrix::<f64>::from_fn(tall, short, |_, _| rng.sample(StandardNormal));
    let q = draw.qr().q();
    if rows >= cols {
        q
    } else {
        q.transpose()
    }
}
