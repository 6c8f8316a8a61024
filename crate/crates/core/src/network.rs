//! Dense feed-forward hashing networks with hand-written backpropagation.
//!
//! Every network here is a chain of affine layers with relu hidden
//! activations and a final tanh layer producing a length-`k` code in (−1, 1).
//! Batches are row-major `batch × features` matrices. Parameter gradients
//! are summed over the rows of a batch.
//!
//! Checkpoint layout (`PXW1`, all little-endian):
//!
//! ```text
//! b"PXW1" | layers: u32
//! per layer: in: u32 | out: u32 | activation: u8 (0 = relu, 1 = tanh)
//!            | out × in f64 weights, row-major | out f64 biases
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::codespace::ContinuousCode;
use crate::error::{check_dim, Error, Result};

const WEIGHTS_MAGIC: &[u8; 4] = b"PXW1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            _ => None,
        }
    }

    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
        }
    }

    /// Multiplies `grad` by the activation derivative, expressed through the
    /// activation output. relu'(0) is taken as 0.
    fn backprop(self, out: &Array2<f64>, grad: &mut Array2<f64>) {
        match self {
            Activation::Relu => ndarray::Zip::from(grad).and(out).for_each(|g, &a| {
                if a <= 0.0 {
                    *g = 0.0;
                }
            }),
            Activation::Tanh => {
                ndarray::Zip::from(grad).and(out).for_each(|g, &a| *g *= 1.0 - a * a)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    /// `out × in`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }
}

/// Uniform Xavier initialization on ±sqrt(6 / (in + out)) with zero bias.
pub fn xavier_init<R: Rng + ?Sized>(
    input: usize,
    output: usize,
    activation: Activation,
    rng: &mut R,
) -> Result<DenseLayer> {
    if input == 0 || output == 0 {
        return Err(Error::Config(format!(
            "layer dimensions must be positive, got {input}x{output}"
        )));
    }
    let bound = (6.0 / (input + output) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    let weights = Array2::from_shape_simple_fn((output, input), || dist.sample(rng));
    Ok(DenseLayer {
        weights,
        bias: Array1::zeros(output),
        activation,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

/// Per-layer parameter gradients, shaped like the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradient {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Activations saved by a forward pass for the matching backward pass.
#[derive(Clone, Debug)]
pub struct Trace {
    /// `outputs[0]` is the input batch; `outputs[l + 1]` is layer `l`'s output.
    outputs: Vec<Array2<f64>>,
}

impl Trace {
    pub fn output(&self) -> &Array2<f64> {
        self.outputs.last().expect("trace holds at least the input")
    }
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        let last = layers
            .last()
            .ok_or_else(|| Error::Config("network needs at least one layer".into()))?;
        if last.activation != Activation::Tanh {
            return Err(Error::Config("final layer must use tanh".into()));
        }
        for pair in layers.windows(2) {
            check_dim(pair[0].output_dim(), pair[1].input_dim())?;
        }
        for layer in &layers {
            check_dim(layer.output_dim(), layer.bias.len())?;
            if layer.weights.iter().chain(&layer.bias).any(|v| !v.is_finite()) {
                return Err(Error::Config("non-finite parameter".into()));
            }
        }
        Ok(Self { layers })
    }

    /// Relu hidden layers of the given widths followed by a `bits`-wide tanh
    /// layer, all Xavier-initialized.
    pub fn xavier<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        bits: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut prev = input_dim;
        for &width in hidden {
            layers.push(xavier_init(prev, width, Activation::Relu, rng)?);
            prev = width;
        }
        layers.push(xavier_init(prev, bits, Activation::Tanh, rng)?);
        Self::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn forward(&self, x: &[f64]) -> Result<ContinuousCode> {
        check_dim(self.input_dim(), x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite network input".into()));
        }
        let batch = ArrayView2::from_shape((1, x.len()), x).expect("contiguous row");
        let out = self.forward_batch(batch)?;
        ContinuousCode::new(out.into_raw_vec_and_offset().0)
    }

    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_dim(self.input_dim(), x.ncols())?;
        let mut a = x.to_owned();
        for layer in &self.layers {
            a = affine(layer, &a);
            layer.activation.apply(&mut a);
        }
        Ok(a)
    }

    pub fn forward_trace(&self, x: ArrayView2<'_, f64>) -> Result<Trace> {
        check_dim(self.input_dim(), x.ncols())?;
        let mut outputs = Vec::with_capacity(self.layers.len() + 1);
        outputs.push(x.to_owned());
        for layer in &self.layers {
            let mut a = affine(layer, outputs.last().unwrap());
            layer.activation.apply(&mut a);
            outputs.push(a);
        }
        Ok(Trace { outputs })
    }

    /// Reverse-mode pass. `upstream` is dL/d(output), `batch × k`. Returns
    /// parameter gradients summed over the batch and dL/d(input).
    pub fn backward(&self, trace: &Trace, upstream: ArrayView2<'_, f64>) -> Result<(Gradients, Array2<f64>)> {
        let out = trace.output();
        check_dim(out.nrows(), upstream.nrows())?;
        check_dim(out.ncols(), upstream.ncols())?;
        let mut grad = upstream.to_owned();
        let mut layers = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate().rev() {
            layer.activation.backprop(&trace.outputs[l + 1], &mut grad);
            let input = &trace.outputs[l];
            layers.push(LayerGradient {
                weights: grad.t().dot(input),
                bias: grad.sum_axis(Axis(0)),
            });
            grad = grad.dot(&layer.weights);
        }
        layers.reverse();
        Ok((Gradients { layers }, grad))
    }

    /// θ ← θ − lr·grad.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        check_dim(self.layers.len(), grads.layers.len())?;
        for (layer, g) in self.layers.iter().zip(&grads.layers) {
            if layer.weights.dim() != g.weights.dim() {
                return Err(Error::Dimension {
                    expected: layer.weights.len(),
                    got: g.weights.len(),
                });
            }
            check_dim(layer.bias.len(), g.bias.len())?;
        }
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            layer.weights.scaled_add(-lr, &g.weights);
            layer.bias.scaled_add(-lr, &g.bias);
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(WEIGHTS_MAGIC)?;
        w.write_all(&(self.layers.len() as u32).to_le_bytes())?;
        for layer in &self.layers {
            w.write_all(&(layer.input_dim() as u32).to_le_bytes())?;
            w.write_all(&(layer.output_dim() as u32).to_le_bytes())?;
            w.write_all(&[layer.activation.tag()])?;
            for v in layer.weights.iter().chain(&layer.bias) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R, path: &Path) -> Result<Self> {
        let fmt = |msg: String| Error::Format { path: path.to_path_buf(), msg };
        let mut buf4 = [0u8; 4];
        r.read_exact(&mut buf4).map_err(|_| fmt("truncated header".into()))?;
        if &buf4 != WEIGHTS_MAGIC {
            return Err(fmt("bad magic, expected PXW1".into()));
        }
        let mut read_u32 = |r: &mut R, what: &str| -> Result<usize> {
            r.read_exact(&mut buf4).map_err(|_| fmt(format!("truncated reading {what}")))?;
            Ok(u32::from_le_bytes(buf4) as usize)
        };
        let count = read_u32(&mut r, "layer count")?;
        let mut layers = Vec::with_capacity(count.min(1024));
        for l in 0..count {
            let input = read_u32(&mut r, "layer input size")?;
            let output = read_u32(&mut r, "layer output size")?;
            let mut tag = [0u8; 1];
            r.read_exact(&mut tag).map_err(|_| fmt(format!("truncated at layer {l}")))?;
            let activation = Activation::from_tag(tag[0])
                .ok_or_else(|| fmt(format!("layer {l}: unknown activation tag {}", tag[0])))?;
            let mut read_f64s = |len: usize| -> Result<Vec<f64>> {
                let mut bytes = vec![0u8; len * 8];
                r.read_exact(&mut bytes)
                    .map_err(|_| fmt(format!("truncated parameters in layer {l}")))?;
                Ok(bytes
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect())
            };
            let weights = Array2::from_shape_vec((output, input), read_f64s(input * output)?)
                .map_err(|e| fmt(e.to_string()))?;
            let bias = Array1::from_vec(read_f64s(output)?);
            layers.push(DenseLayer { weights, bias, activation });
        }
        let mut extra = [0u8; 1];
        if r.read(&mut extra)? != 0 {
            return Err(fmt("trailing bytes after last layer".into()));
        }
        Self::new(layers).map_err(|e| fmt(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        Self::read_from(BufReader::new(file), path)
    }
}

fn affine(layer: &DenseLayer, input: &Array2<f64>) -> Array2<f64> {
    let mut z = input.dot(&layer.weights.t());
    z += &layer.bias;
    z
}

/// Optimizer settings for one training phase.
#[derive(Clone, Debug, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(format!(
                "learning rate {} outside [0, 1]",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        Ok(())
    }
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 128,
            epochs: 150,
            seed: 0,
        }
    }
}
