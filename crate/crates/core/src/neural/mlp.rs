//! Dense baseline network: tanh hidden layers, scalar linear output.

use rand::Rng;

use crate::mat::Mat;
use crate::scalar::Scalar;

use super::NeuralError;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    /// `[out × in]` weight matrix.
    pub w: Mat<T>,
    pub b: Vec<T>,
}

/// Feed-forward parameters over a flattened `n·d` window. Hidden layers use
/// tanh; the final layer is linear with a single output. An empty hidden
/// list degenerates to ordinary linear regression.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<T> {
    pub layers: Vec<DenseLayer<T>>,
    pub input_dim: usize,
}

impl<T: Scalar> MlpParams<T> {
    pub fn zeros(input_dim: usize, hidden: &[usize]) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = input_dim;
        for &width in hidden {
            layers.push(DenseLayer { w: Mat::zeros(width, fan_in), b: vec![T::zero(); width] });
            fan_in = width;
        }
        layers.push(DenseLayer { w: Mat::zeros(1, fan_in), b: vec![T::zero(); 1] });
        Self { layers, input_dim }
    }

    /// Uniform init in `[-1/√fan_in, 1/√fan_in]`, zero biases.
    pub fn init(input_dim: usize, hidden: &[usize], rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(input_dim, hidden);
        for layer in &mut p.layers {
            let scale = 1.0 / (layer.w.cols() as f64).sqrt();
            for w in layer.w.as_mut_slice() {
                *w = T::from_f64_lossy((2.0 * rng.gen::<f64>() - 1.0) * scale);
            }
        }
        p
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.rows() * l.w.cols() + l.b.len()).sum()
    }

    /// Flat order: per layer, row-major weights then biases.
    pub fn to_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            out.extend_from_slice(layer.w.as_slice());
            out.extend_from_slice(&layer.b);
        }
        out
    }

    pub fn load_flat(&mut self, flat: &[T]) -> Result<(), NeuralError> {
        if flat.len() != self.num_params() {
            return Err(NeuralError::ShapeMismatch(format!(
                "flat vector has {} entries, expected {}",
                flat.len(),
                self.num_params()
            )));
        }
        let mut cursor = 0;
        for layer in &mut self.layers {
            let wn = layer.w.rows() * layer.w.cols();
            layer.w.as_mut_slice().copy_from_slice(&flat[cursor..cursor + wn]);
            cursor += wn;
            let bn = layer.b.len();
            layer.b.copy_from_slice(&flat[cursor..cursor + bn]);
            cursor += bn;
        }
        Ok(())
    }

    /// Layer output widths, final entry always 1.
    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.w.rows()).collect()
    }
}

/// Per-layer activations cached for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpTape<T> {
    /// Input to each layer (position 0 is the network input).
    pub inputs: Vec<Vec<T>>,
    /// Post-activation output of each layer.
    pub outputs: Vec<Vec<T>>,
}

/// Forward pass over a flattened window vector.
pub fn mlp_forward<T: Scalar>(
    x: &[T],
    p: &MlpParams<T>,
) -> Result<(T, MlpTape<T>), NeuralError> {
    if x.len() != p.input_dim {
        return Err(NeuralError::ShapeMismatch(format!(
            "input length {} does not match model input_dim {}",
            x.len(),
            p.input_dim
        )));
    }
    let last = p.layers.len() - 1;
    let mut tape = MlpTape { inputs: Vec::with_capacity(p.layers.len()), outputs: Vec::new() };
    let mut current = x.to_vec();
    for (k, layer) in p.layers.iter().enumerate() {
        tape.inputs.push(current.clone());
        let mut z = layer.b.clone();
        layer.w.matvec_add(&current, &mut z);
        if k < last {
            z.iter_mut().for_each(|v| *v = v.tanh());
        }
        tape.outputs.push(z.clone());
        current = z;
    }
    let out = current[0];
    if !out.is_finite() {
        return Err(NeuralError::NonFiniteActivation { step: last });
    }
    Ok((out, tape))
}

/// Accumulates exact gradients for one sample into `grads`.
pub fn mlp_backward<T: Scalar>(
    tape: &MlpTape<T>,
    upstream: T,
    p: &MlpParams<T>,
    grads: &mut MlpParams<T>,
) -> Result<(), NeuralError> {
    if tape.inputs.len() != p.layers.len() || grads.layers.len() != p.layers.len() {
        return Err(NeuralError::TapeMismatch);
    }
    let mut dz = vec![upstream];
    for k in (0..p.layers.len()).rev() {
        grads.layers[k].w.add_outer(&dz, &tape.inputs[k]);
        for (gb, d) in grads.layers[k].b.iter_mut().zip(&dz) {
            *gb += *d;
        }
        if k == 0 {
            break;
        }
        let mut dx = vec![T::zero(); p.layers[k].w.cols()];
        p.layers[k].w.matvec_transpose_add(&dz, &mut dx);
        // through the tanh of the previous layer's output
        dz = dx
            .iter()
            .zip(&tape.outputs[k - 1])
            .map(|(d, a)| *d * (T::one() - *a * *a))
            .collect();
    }
    Ok(())
}
