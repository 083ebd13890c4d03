//! Dense autoencoder (784-128-64-32 encoder, mirrored decoder) trained with
//! Adam on mean squared reconstruction error. Gradients are computed by hand
//! with reverse-mode accumulation.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write as _};
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use crate::data::{EmbeddingDataset, SeededRng};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Sigmoid => z.mapv_inplace(|v| 1.0 / (1.0 + (-v).exp())),
            Activation::Identity => {}
        }
    }

    /// Multiplies `grad` by the derivative, expressed through the output `a`.
    fn backprop(self, a: &Array2<f64>, grad: &mut Array2<f64>) {
        match self {
            Activation::Relu => grad.zip_mut_with(a, |g, &a| {
                if a <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::Sigmoid => grad.zip_mut_with(a, |g, &a| *g *= a * (1.0 - a)),
            Activation::Identity => {}
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "sigmoid" => Some(Activation::Sigmoid),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Fully connected layer `a = f(W x + b)` with `W` stored out×in.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        DenseLayer {
            weights: Array2::zeros((outputs, inputs)),
            biases: Array1::zeros(outputs),
            activation,
        }
    }

    /// Glorot-uniform weights in ±√(6/(in+out)), zero biases.
    pub fn glorot(inputs: usize, outputs: usize, activation: Activation, rng: &mut SeededRng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = Array2::from_shape_simple_fn((outputs, inputs), || limit * (2.0 * rng.uniform() - 1.0));
        DenseLayer {
            weights,
            biases: Array1::zeros(outputs),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.outputs() * (self.inputs() + 1)
    }

    fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights.t());
        z += &self.biases;
        self.activation.apply(&mut z);
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AeModel {
    pub encoder: Vec<DenseLayer>,
    pub decoder: Vec<DenseLayer>,
}

pub const MNIST_DIM: usize = 784;
pub const CODE_DIM: usize = 32;

impl AeModel {
    /// 784→128→64→32 encoder and 32→64→128→784 decoder. Every layer uses
    /// ReLU except the sigmoid output layer.
    pub fn mnist(seed: u64) -> Self {
        let mut rng = SeededRng::new(seed);
        let mut layer = |i, o, a| DenseLayer::glorot(i, o, a, &mut rng);
        let encoder = vec![
            layer(MNIST_DIM, 128, Activation::Relu),
            layer(128, 64, Activation::Relu),
            layer(64, CODE_DIM, Activation::Relu),
        ];
        let decoder = vec![
            layer(CODE_DIM, 64, Activation::Relu),
            layer(64, 128, Activation::Relu),
            layer(128, MNIST_DIM, Activation::Sigmoid),
        ];
        AeModel { encoder, decoder }
    }

    pub fn from_layers(encoder: Vec<DenseLayer>, decoder: Vec<DenseLayer>) -> Result<Self> {
        if encoder.is_empty() || decoder.is_empty() {
            return Err(Error::invalid("encoder and decoder need at least one layer each"));
        }
        let all: Vec<&DenseLayer> = encoder.iter().chain(&decoder).collect();
        for pair in all.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].outputs(),
                    actual: pair[1].inputs(),
                });
            }
        }
        for l in &all {
            if l.biases.len() != l.outputs() {
                return Err(Error::LengthMismatch {
                    what: "biases",
                    expected: l.outputs(),
                    actual: l.biases.len(),
                });
            }
        }
        Ok(AeModel { encoder, decoder })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].inputs()
    }

    pub fn code_dim(&self) -> usize {
        self.encoder.last().expect("nonempty").outputs()
    }

    pub fn output_dim(&self) -> usize {
        self.decoder.last().expect("nonempty").outputs()
    }

    pub fn encoder_params(&self) -> usize {
        self.encoder.iter().map(DenseLayer::param_count).sum()
    }

    pub fn decoder_params(&self) -> usize {
        self.decoder.iter().map(DenseLayer::param_count).sum()
    }

    pub fn layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.encoder.iter().chain(&self.decoder)
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut DenseLayer> {
        self.encoder.iter_mut().chain(self.decoder.iter_mut())
    }

    fn check_input(&self, batch: &ArrayView2<f64>) -> Result<()> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: batch.ncols(),
            });
        }
        Ok(())
    }

    pub fn encode(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&batch)?;
        let mut a = batch.to_owned();
        for l in &self.encoder {
            a = l.forward(a.view());
        }
        Ok(a)
    }

    pub fn forward(&self, batch: ArrayView2<f64>) -> Result<Forward> {
        let code = self.encode(batch)?;
        let mut a = code.clone();
        for l in &self.decoder {
            a = l.forward(a.view());
        }
        Ok(Forward {
            code,
            reconstruction: a,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub code: Array2<f64>,
    pub reconstruction: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

/// Gradients in layer order, encoder first.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

/// Mean squared reconstruction error over every pixel of the batch and its
/// gradient with respect to every parameter.
pub fn loss_and_gradients(model: &AeModel, batch: ArrayView2<f64>) -> Result<(f64, Gradients)> {
    model.check_input(&batch)?;
    if model.output_dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            actual: model.output_dim(),
        });
    }
    let layers: Vec<&DenseLayer> = model.layers().collect();
    let mut acts: Vec<Array2<f64>> = Vec::with_capacity(layers.len() + 1);
    acts.push(batch.to_owned());
    for l in &layers {
        let next = l.forward(acts.last().expect("nonempty").view());
        acts.push(next);
    }

    let output = acts.last().expect("nonempty");
    let scale = 1.0 / (batch.nrows() * batch.ncols()) as f64;
    let diff = output - &batch;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() * scale;

    let mut grad = diff * (2.0 * scale);
    let mut grads = Vec::with_capacity(layers.len());
    for (i, l) in layers.iter().enumerate().rev() {
        l.activation.backprop(&acts[i + 1], &mut grad);
        let gw = grad.t().dot(&acts[i]);
        let gb = grad.sum_axis(Axis(0));
        if i > 0 {
            grad = grad.dot(&l.weights);
        }
        grads.push(LayerGrad { weights: gw, biases: gb });
    }
    grads.reverse();
    Ok((loss, Gradients { layers: grads }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one buffer pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, tensor_sizes: &[usize]) -> Self {
        AdamState {
            config,
            t: 0,
            m: tensor_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: tensor_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_model(config: AdamConfig, model: &AeModel) -> Self {
        let sizes: Vec<usize> = model
            .layers()
            .flat_map(|l| [l.weights.len(), l.biases.len()])
            .collect();
        Self::new(config, &sizes)
    }

    /// Advances the step counter. Call once per update, before the
    /// per-tensor `apply` calls.
    pub fn begin_step(&mut self) {
        self.t += 1;
    }

    /// Bias-corrected Adam update of tensor `slot`.
    pub fn apply(&mut self, slot: usize, params: &mut [f64], grads: &[f64]) {
        assert!(self.t > 0, "begin_step must precede apply");
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        let (m, v) = (&mut self.m[slot], &mut self.v[slot]);
        assert_eq!(params.len(), m.len(), "parameter shape changed");
        assert_eq!(grads.len(), m.len(), "gradient shape mismatch");
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }

    pub fn step(&mut self, model: &mut AeModel, grads: &Gradients) {
        self.begin_step();
        for (i, (layer, g)) in model.layers_mut().zip(&grads.layers).enumerate() {
            let w = layer.weights.as_slice_mut().expect("standard layout");
            self.apply(2 * i, w, g.weights.as_slice().expect("standard layout"));
            let b = layer.biases.as_slice_mut().expect("standard layout");
            self.apply(2 * i + 1, b, g.biases.as_slice().expect("standard layout"));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    Mse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub rng_seed: u64,
    pub loss: Loss,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 256,
            rng_seed: 0,
            loss: Loss::Mse,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: AeModel,
    /// Mean training loss of each epoch.
    pub loss_curve: Vec<f64>,
}

fn batch_from(dataset: &EmbeddingDataset, idx: &[usize]) -> Array2<f64> {
    let d = dataset.dim();
    let mut out = Array2::zeros((idx.len(), d));
    for (mut row, &i) in out.rows_mut().into_iter().zip(idx) {
        row.assign(&ndarray::ArrayView1::from(dataset.row(i)));
    }
    out
}

/// Mini-batch training with a seeded reshuffle every epoch.
pub fn train(model: AeModel, dataset: &EmbeddingDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(model, dataset, config, |_, _| {})
}

/// Like [`train`], calling `on_epoch(epoch, mean_loss)` after each epoch.
pub fn train_with(
    mut model: AeModel,
    dataset: &EmbeddingDataset,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    if config.epochs == 0 {
        return Err(Error::invalid("epochs must be at least 1"));
    }
    if config.batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    if dataset.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            actual: dataset.dim(),
        });
    }
    if dataset.values().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::invalid("training inputs must lie in [0, 1]"));
    }

    let n = dataset.len();
    let mut rng = SeededRng::new(config.rng_seed);
    let mut adam = AdamState::for_model(config.adam, &model);
    let mut order: Vec<usize> = (0..n).collect();
    let mut loss_curve = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        for i in (1..n).rev() {
            let j = rng.index(i + 1);
            order.swap(i, j);
        }
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch = batch_from(dataset, chunk);
            let (loss, grads) = loss_and_gradients(&model, batch.view())?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss diverged in epoch {epoch}")));
            }
            total += loss * chunk.len() as f64;
            adam.step(&mut model, &grads);
        }
        let mean = total / n as f64;
        on_epoch(epoch, mean);
        loss_curve.push(mean);
    }
    Ok(TrainOutcome { model, loss_curve })
}

/// Encodes every datum; labels carry over.
pub fn embed(model: &AeModel, dataset: &EmbeddingDataset) -> Result<EmbeddingDataset> {
    if dataset.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            actual: dataset.dim(),
        });
    }
    let d = dataset.dim();
    let mut values = Vec::with_capacity(dataset.len() * model.code_dim());
    for chunk in dataset.values().chunks(1024 * d) {
        let batch = ArrayView2::from_shape((chunk.len() / d, d), chunk).expect("row-major chunk");
        let code = model.encode(batch)?;
        values.extend(code.iter().copied());
    }
    EmbeddingDataset::from_flat(
        format!("{}-ae{}", dataset.name(), model.code_dim()),
        model.code_dim(),
        values,
        dataset.labels().map(<[usize]>::to_vec),
    )
}

const CHECKPOINT_MAGIC: &str = "pocs-cluster autoencoder checkpoint v1";

/// Writes a checkpoint: an ASCII manifest followed by the parameters as
/// little-endian `f64`, layer by layer (weights row-major, then biases).
///
/// ```text
/// pocs-cluster autoencoder checkpoint v1
/// seed 42
/// layers 3 3
/// layer 784 128 relu
/// ...
/// params 222384
/// <222384 × 8 bytes>
/// ```
pub fn save_checkpoint(model: &AeModel, seed: u64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    let count: usize = model.layers().map(DenseLayer::param_count).sum();
    let mut header = format!(
        "{CHECKPOINT_MAGIC}\nseed {seed}\nlayers {} {}\n",
        model.encoder.len(),
        model.decoder.len()
    );
    for l in model.layers() {
        header.push_str(&format!("layer {} {} {}\n", l.inputs(), l.outputs(), l.activation.name()));
    }
    header.push_str(&format!("params {count}\n"));
    buf.extend_from_slice(header.as_bytes());
    for l in model.layers() {
        for v in l.weights.iter().chain(l.biases.iter()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&buf))
        .map_err(|e| Error::io(path, e))
}

/// Reads a checkpoint written by [`save_checkpoint`]; returns the model and
/// the recorded seed.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(AeModel, u64)> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let bad = |msg: &str| Error::format(path, msg.to_string());
    let mut line = String::new();
    let mut next_line = |reader: &mut BufReader<fs::File>| -> Result<String> {
        line.clear();
        reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        Ok(line.trim_end().to_string())
    };

    if next_line(&mut reader)? != CHECKPOINT_MAGIC {
        return Err(bad("not an autoencoder checkpoint"));
    }
    let seed: u64 = next_line(&mut reader)?
        .strip_prefix("seed ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("missing seed line"))?;
    let counts = next_line(&mut reader)?;
    let mut it = counts.strip_prefix("layers ").unwrap_or("").split(' ');
    let (n_enc, n_dec): (usize, usize) = match (it.next().and_then(|s| s.parse().ok()), it.next().and_then(|s| s.parse().ok())) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(bad("missing layers line")),
    };
    let mut shapes: Vec<(usize, usize, Activation)> = Vec::new();
    for _ in 0..n_enc + n_dec {
        let l = next_line(&mut reader)?;
        let parts: Vec<&str> = l.split(' ').collect();
        match parts.as_slice() {
            ["layer", i, o, a] => {
                let i = i.parse().map_err(|_| bad("bad layer input size"))?;
                let o = o.parse().map_err(|_| bad("bad layer output size"))?;
                let a = Activation::parse(a).ok_or_else(|| bad("unknown activation"))?;
                shapes.push((i, o, a));
            }
            _ => return Err(bad("malformed layer line")),
        }
    }
    let count: usize = next_line(&mut reader)?
        .strip_prefix("params ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("missing params line"))?;
    let expected: usize = shapes.iter().map(|(i, o, _)| o * (i + 1)).sum();
    if count != expected {
        return Err(bad("parameter count does not match layer shapes"));
    }
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload).map_err(|e| Error::io(path, e))?;
    if payload.len() != count * 8 {
        return Err(bad("truncated parameter payload"));
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut layers: Vec<DenseLayer> = shapes
        .into_iter()
        .map(|(i, o, a)| {
            let w: Vec<f64> = values.by_ref().take(o * i).collect();
            let b: Vec<f64> = values.by_ref().take(o).collect();
            DenseLayer {
                weights: Array2::from_shape_vec((o, i), w).expect("sized above"),
                biases: Array1::from(b),
                activation: a,
            }
        })
        .collect();
    if layers.iter().any(|l| l.weights.iter().chain(l.biases.iter()).any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("checkpoint contains non-finite parameters".into()));
    }
    let decoder = layers.split_off(n_enc);
    Ok((AeModel::from_layers(layers, decoder)?, seed))
}

/// Reconstruction of each row of a dataset slice, for inspection.
pub fn reconstruct(model: &AeModel, dataset: &EmbeddingDataset, rows: std::ops::Range<usize>) -> Result<Array2<f64>> {
    let d = dataset.dim();
    let end = rows.end.min(dataset.len());
    let view = ArrayView2::from_shape((dataset.len(), d), dataset.values()).expect("row-major");
    let slice = view.slice(s![rows.start..end, ..]);
    Ok(model.forward(slice)?.reconstruction)
}
