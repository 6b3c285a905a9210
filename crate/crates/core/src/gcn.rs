//! Supervised graph convolutional classifier and graph-embedding
//! extraction.
//!
//! Each labeled graph carries a weighted adjacency Z and node features X.
//! Layers compute H^(l+1) = relu(F H^(l) W^(l)) on the self-loop
//! normalized adjacency F; a mean readout over the final node
//! representations yields the graph embedding, and a single linear layer
//! maps it to class logits. Training is full-batch softmax cross-entropy
//! with Adam, early-stopped when the loss stops improving.
//!
//! Backpropagation is written out by hand; the analytic gradients are
//! validated against central finite differences in the test suites.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::matio::{MatrixBlock, MatrixCodecError};
use crate::zoo::AlgorithmId;

#[derive(Debug, Error)]
pub enum GcnError {
    #[error("node feature matrix has {got} columns, model expects {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("training corpus has fewer than 2 distinct labels")]
    SingleClassCorpus,
    #[error("malformed model checkpoint: {0}")]
    Codec(String),
}

impl From<MatrixCodecError> for GcnError {
    fn from(e: MatrixCodecError) -> Self {
        GcnError::Codec(e.to_string())
    }
}

/// A dataset-graph with its node features and best-algorithm label.
#[derive(Debug, Clone)]
pub struct LabeledGraph {
    pub name: String,
    /// Symmetric weighted adjacency with zero diagonal.
    pub z: Array2<f64>,
    /// Node features, one row per node.
    pub x: Array2<f64>,
    pub label: AlgorithmId,
    /// Cached normalized adjacency with self-loops.
    f: Array2<f64>,
}

impl LabeledGraph {
    pub fn new(name: &str, z: Array2<f64>, x: Array2<f64>, label: AlgorithmId) -> Self {
        assert_eq!(z.nrows(), z.ncols(), "adjacency must be square");
        assert_eq!(z.nrows(), x.nrows(), "X row count must equal node count");
        let f = normalize_adjacency(&z);
        LabeledGraph {
            name: name.to_string(),
            z,
            x,
            label,
            f,
        }
    }

    pub fn node_count(&self) -> usize {
        self.z.nrows()
    }

    pub fn normalized_adjacency(&self) -> &Array2<f64> {
        &self.f
    }
}

/// F = B^(-1/2) (Z + I) B^(-1/2) where B is the degree matrix of Z + I.
/// Self-loops keep every degree >= 1, so the entries are always finite.
pub fn normalize_adjacency(z: &Array2<f64>) -> Array2<f64> {
    let n = z.nrows();
    assert_eq!(n, z.ncols(), "adjacency must be square");
    let mut z_tilde = z.clone();
    for i in 0..n {
        z_tilde[[i, i]] += 1.0;
    }
    let degrees: Vec<f64> = (0..n).map(|i| z_tilde.row(i).sum()).collect();
    let mut f = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            // literal form of the definition; b_i * b_j commutes, so the
            // result is exactly symmetric
            f[[i, j]] = z_tilde[[i, j]] / (degrees[i] * degrees[j]).sqrt();
        }
    }
    f
}

/// Architecture and training hyperparameters; immutable once a model is
/// constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnConfig {
    pub layers: usize,
    pub input_dim: usize,
    pub embedding_dim: usize,
    pub classes: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for GcnConfig {
    fn default() -> Self {
        GcnConfig {
            layers: 4,
            input_dim: 64,
            embedding_dim: 300,
            classes: 15,
            learning_rate: 0.006,
            max_epochs: 60,
            patience: 10,
            seed: 0,
        }
    }
}

/// Trained (or freshly initialized) model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    pub config: GcnConfig,
    /// One weight matrix per conv layer: input_dim x emb, then emb x emb.
    pub conv_weights: Vec<Array2<f64>>,
    pub classifier_weight: Array2<f64>,
    pub classifier_bias: Array1<f64>,
}

/// Per-dataset meta-feature vector extracted from the readout layer.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphEmbedding {
    pub dataset: String,
    pub measure: String,
    pub vector: Vec<f64>,
}

/// Everything a forward pass produces; `pre_activations` and `inputs`
/// are kept for backpropagation.
pub struct Forward {
    pub node_reps: Array2<f64>,
    pub embedding: Array1<f64>,
    pub logits: Array1<f64>,
    inputs: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
}

/// Gradients with the same shapes as the model parameters.
#[derive(Debug, Clone)]
pub struct GcnGradients {
    pub conv_weights: Vec<Array2<f64>>,
    pub classifier_weight: Array2<f64>,
    pub classifier_bias: Array1<f64>,
}

impl GcnModel {
    /// Seeded symmetric-uniform initialization with Glorot scaling.
    pub fn init(config: &GcnConfig) -> GcnModel {
        assert!(config.layers >= 1, "at least one conv layer");
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut dims = vec![config.input_dim];
        for _ in 0..config.layers {
            dims.push(config.embedding_dim);
        }
        let glorot = |rows: usize, cols: usize, rng: &mut ChaCha8Rng| -> Array2<f64> {
            let scale = (6.0 / (rows + cols) as f64).sqrt();
            let mut w = Array2::<f64>::zeros((rows, cols));
            for v in w.iter_mut() {
                *v = (rng.random::<f64>() * 2.0 - 1.0) * scale;
            }
            w
        };
        let conv_weights: Vec<Array2<f64>> = (0..config.layers)
            .map(|l| glorot(dims[l], dims[l + 1], &mut rng))
            .collect();
        let classifier_weight = glorot(config.embedding_dim, config.classes, &mut rng);
        let classifier_bias = Array1::<f64>::zeros(config.classes);
        GcnModel {
            config: config.clone(),
            conv_weights,
            classifier_weight,
            classifier_bias,
        }
    }

    /// Forward pass: L conv layers with ReLU, mean readout, linear
    /// classifier.
    pub fn forward(&self, g: &LabeledGraph) -> Result<Forward, GcnError> {
        if g.x.ncols() != self.config.input_dim {
            return Err(GcnError::DimensionMismatch {
                got: g.x.ncols(),
                want: self.config.input_dim,
            });
        }
        let f = g.normalized_adjacency();
        let mut h = g.x.clone();
        let mut inputs = Vec::with_capacity(self.conv_weights.len());
        let mut pre_activations = Vec::with_capacity(self.conv_weights.len());
        for w in &self.conv_weights {
            inputs.push(h.clone());
            let pre = f.dot(&h).dot(w);
            h = pre.mapv(|v| v.max(0.0));
            pre_activations.push(pre);
        }
        let n = g.node_count() as f64;
        let embedding = h.sum_axis(ndarray::Axis(0)) / n;
        let logits = embedding.dot(&self.classifier_weight) + &self.classifier_bias;
        Ok(Forward {
            node_reps: h,
            embedding,
            logits,
            inputs,
            pre_activations,
        })
    }

    /// Cross-entropy loss and analytic gradients for one graph.
    fn graph_loss_and_grads(&self, g: &LabeledGraph) -> Result<(f64, GcnGradients), GcnError> {
        let fwd = self.forward(g)?;
        let label = class_index(&self.config, g.label);
        let probs = softmax(&fwd.logits);
        let loss = -probs[label].max(1e-300).ln();

        // d loss / d logits = p - y
        let mut dlogits = probs;
        dlogits[label] -= 1.0;

        let demb = self.classifier_weight.dot(&dlogits);
        let dw_c = outer(&fwd.embedding, &dlogits);
        let db_c = dlogits;

        // mean readout distributes the embedding gradient over nodes
        let n = g.node_count();
        let mut dh = Array2::<f64>::zeros((n, self.config.embedding_dim));
        for i in 0..n {
            for j in 0..self.config.embedding_dim {
                dh[[i, j]] = demb[j] / n as f64;
            }
        }

        let f = g.normalized_adjacency();
        let mut conv_grads: Vec<Array2<f64>> = Vec::with_capacity(self.conv_weights.len());
        for l in (0..self.conv_weights.len()).rev() {
            // dA = dH ⊙ relu'(pre)
            let mut da = dh;
            for (v, pre) in da.iter_mut().zip(self.pre_activation_iter(&fwd, l)) {
                if *pre <= 0.0 {
                    *v = 0.0;
                }
            }
            let fh = f.dot(&fwd.inputs[l]);
            conv_grads.push(fh.t().dot(&da));
            // dH_l = F^T dA W^T; F is symmetric
            dh = f.dot(&da).dot(&self.conv_weights[l].t());
        }
        conv_grads.reverse();

        Ok((
            loss,
            GcnGradients {
                conv_weights: conv_grads,
                classifier_weight: dw_c,
                classifier_bias: db_c,
            },
        ))
    }

    fn pre_activation_iter<'a>(
        &self,
        fwd: &'a Forward,
        layer: usize,
    ) -> impl Iterator<Item = &'a f64> {
        fwd.pre_activations[layer].iter()
    }

    /// Mean loss and accumulated gradients over a set of graphs.
    pub fn loss_and_gradients(
        &self,
        graphs: &[LabeledGraph],
    ) -> Result<(f64, GcnGradients), GcnError> {
        let per_graph: Result<Vec<(f64, GcnGradients)>, GcnError> = graphs
            .par_iter()
            .map(|g| self.graph_loss_and_grads(g))
            .collect();
        let per_graph = per_graph?;
        let scale = 1.0 / graphs.len() as f64;
        let mut total_loss = 0.0;
        let mut acc = zero_gradients(self);
        for (loss, grads) in per_graph {
            total_loss += loss * scale;
            for (a, g) in acc.conv_weights.iter_mut().zip(&grads.conv_weights) {
                a.scaled_add(scale, g);
            }
            acc.classifier_weight.scaled_add(scale, &grads.classifier_weight);
            acc.classifier_bias.scaled_add(scale, &grads.classifier_bias);
        }
        Ok((total_loss, acc))
    }

    /// Mean loss only (used by the finite-difference checks).
    pub fn loss(&self, graphs: &[LabeledGraph]) -> Result<f64, GcnError> {
        let mut total = 0.0;
        for g in graphs {
            let fwd = self.forward(g)?;
            let probs = softmax(&fwd.logits);
            total -= probs[class_index(&self.config, g.label)].max(1e-300).ln();
        }
        Ok(total / graphs.len() as f64)
    }

    // Flat parameter views for generic perturbation in tests. Order:
    // conv weights in layer order (row-major), classifier weight, bias.
    pub fn param_count(&self) -> usize {
        self.conv_weights.iter().map(|w| w.len()).sum::<usize>()
            + self.classifier_weight.len()
            + self.classifier_bias.len()
    }

    pub fn get_param(&self, mut idx: usize) -> f64 {
        for w in &self.conv_weights {
            if idx < w.len() {
                return w.as_slice().expect("contiguous")[idx];
            }
            idx -= w.len();
        }
        if idx < self.classifier_weight.len() {
            return self.classifier_weight.as_slice().expect("contiguous")[idx];
        }
        idx -= self.classifier_weight.len();
        self.classifier_bias[idx]
    }

    pub fn set_param(&mut self, mut idx: usize, value: f64) {
        for w in &mut self.conv_weights {
            if idx < w.len() {
                w.as_slice_mut().expect("contiguous")[idx] = value;
                return;
            }
            idx -= w.len();
        }
        if idx < self.classifier_weight.len() {
            self.classifier_weight.as_slice_mut().expect("contiguous")[idx] = value;
            return;
        }
        idx -= self.classifier_weight.len();
        self.classifier_bias[idx] = value;
    }
}

impl GcnGradients {
    pub fn get_param(&self, mut idx: usize) -> f64 {
        for w in &self.conv_weights {
            if idx < w.len() {
                return w.as_slice().expect("contiguous")[idx];
            }
            idx -= w.len();
        }
        if idx < self.classifier_weight.len() {
            return self.classifier_weight.as_slice().expect("contiguous")[idx];
        }
        idx -= self.classifier_weight.len();
        self.classifier_bias[idx]
    }
}

fn zero_gradients(model: &GcnModel) -> GcnGradients {
    GcnGradients {
        conv_weights: model
            .conv_weights
            .iter()
            .map(|w| Array2::zeros(w.dim()))
            .collect(),
        classifier_weight: Array2::zeros(model.classifier_weight.dim()),
        classifier_bias: Array1::zeros(model.classifier_bias.len()),
    }
}

fn class_index(config: &GcnConfig, label: AlgorithmId) -> usize {
    let idx = label.ordinal();
    assert!(
        idx < config.classes,
        "label ordinal {idx} outside class count {}",
        config.classes
    );
    idx
}

fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Array1<f64> = logits.mapv(|v| (v - max).exp());
    let sum = exps.sum();
    exps / sum
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((a.len(), b.len()));
    for i in 0..a.len() {
        for j in 0..b.len() {
            out[[i, j]] = a[i] * b[j];
        }
    }
    out
}

struct AdamState {
    m: GcnGradients,
    v: GcnGradients,
    t: usize,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

fn adam_step(model: &mut GcnModel, grads: &GcnGradients, state: &mut AdamState, lr: f64) {
    state.t += 1;
    let t = state.t as f64;
    let bias1 = 1.0 - ADAM_BETA1.powf(t);
    let bias2 = 1.0 - ADAM_BETA2.powf(t);

    let update = |param: &mut f64, grad: f64, m: &mut f64, v: &mut f64| {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * grad;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * grad * grad;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *param -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    };

    for ((w, g), (m, v)) in model
        .conv_weights
        .iter_mut()
        .zip(&grads.conv_weights)
        .zip(state.m.conv_weights.iter_mut().zip(&mut state.v.conv_weights))
    {
        for ((p, g), (m, v)) in w.iter_mut().zip(g.iter()).zip(m.iter_mut().zip(v.iter_mut())) {
            update(p, *g, m, v);
        }
    }
    for ((p, g), (m, v)) in model
        .classifier_weight
        .iter_mut()
        .zip(grads.classifier_weight.iter())
        .zip(
            state
                .m
                .classifier_weight
                .iter_mut()
                .zip(state.v.classifier_weight.iter_mut()),
        )
    {
        update(p, *g, m, v);
    }
    for ((p, g), (m, v)) in model
        .classifier_bias
        .iter_mut()
        .zip(grads.classifier_bias.iter())
        .zip(
            state
                .m
                .classifier_bias
                .iter_mut()
                .zip(state.v.classifier_bias.iter_mut()),
        )
    {
        update(p, *g, m, v);
    }
}

/// Trains a model with full-batch Adam and patience-based early stopping.
///
/// The loss history records the mean cross-entropy under the weights
/// entering each epoch; the pre-training loss is the stopping baseline,
/// so a totally flat run stops after exactly `patience` epochs. Returns
/// the trained model and the per-epoch loss history.
pub fn train(
    graphs: &[LabeledGraph],
    config: &GcnConfig,
) -> Result<(GcnModel, Vec<f64>), GcnError> {
    let distinct: std::collections::BTreeSet<usize> =
        graphs.iter().map(|g| g.label.ordinal()).collect();
    if distinct.len() < 2 {
        return Err(GcnError::SingleClassCorpus);
    }

    let mut model = GcnModel::init(config);
    let mut adam = AdamState {
        m: zero_gradients(&model),
        v: zero_gradients(&model),
        t: 0,
    };

    let mut best = model.loss(graphs)?;
    let mut stale_epochs = 0usize;
    let mut history = Vec::new();

    for _epoch in 0..config.max_epochs {
        let (loss, grads) = model.loss_and_gradients(graphs)?;
        history.push(loss);
        if loss < best {
            best = loss;
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= config.patience {
                break;
            }
        }
        adam_step(&mut model, &grads, &mut adam, config.learning_rate);
    }
    Ok((model, history))
}

/// Extracts one embedding per graph from the readout layer, in input
/// order. Pure inference.
pub fn embed_all(
    model: &GcnModel,
    graphs: &[LabeledGraph],
    measure: &str,
) -> Result<Vec<GraphEmbedding>, GcnError> {
    graphs
        .iter()
        .map(|g| {
            let fwd = model.forward(g)?;
            Ok(GraphEmbedding {
                dataset: g.name.clone(),
                measure: measure.to_string(),
                vector: fwd.embedding.to_vec(),
            })
        })
        .collect()
}

/// Training accuracy: fraction of graphs whose argmax logit matches the
/// label.
pub fn accuracy(model: &GcnModel, graphs: &[LabeledGraph]) -> Result<f64, GcnError> {
    let mut hits = 0usize;
    for g in graphs {
        let fwd = model.forward(g)?;
        let pred = (0..fwd.logits.len())
            .max_by(|&a, &b| {
                fwd.logits[a]
                    .partial_cmp(&fwd.logits[b])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(b.cmp(&a))
            })
            .expect("non-empty logits");
        if pred == class_index(&model.config, g.label) {
            hits += 1;
        }
    }
    Ok(hits as f64 / graphs.len() as f64)
}

impl GcnModel {
    /// Checkpoint: architecture header plus one matrix block per
    /// parameter tensor.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"clustrec-gcn v1\n");
        out.extend_from_slice(format!("layers={}\n", self.config.layers).as_bytes());
        out.extend_from_slice(format!("input_dim={}\n", self.config.input_dim).as_bytes());
        out.extend_from_slice(
            format!("embedding_dim={}\n", self.config.embedding_dim).as_bytes(),
        );
        out.extend_from_slice(format!("classes={}\n", self.config.classes).as_bytes());
        out.extend_from_slice(
            format!("learning_rate={:?}\n", self.config.learning_rate).as_bytes(),
        );
        out.extend_from_slice(format!("max_epochs={}\n", self.config.max_epochs).as_bytes());
        out.extend_from_slice(format!("patience={}\n", self.config.patience).as_bytes());
        out.extend_from_slice(format!("seed={}\n", self.config.seed).as_bytes());
        out.extend_from_slice(b"params\n");
        for w in &self.conv_weights {
            out.extend_from_slice(&MatrixBlock::from_array(w, vec![]).encode());
        }
        out.extend_from_slice(&MatrixBlock::from_array(&self.classifier_weight, vec![]).encode());
        let bias = Array2::from_shape_vec(
            (1, self.classifier_bias.len()),
            self.classifier_bias.to_vec(),
        )
        .expect("bias shape");
        out.extend_from_slice(&MatrixBlock::from_array(&bias, vec![]).encode());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<GcnModel, GcnError> {
        let bad = |m: &str| GcnError::Codec(m.to_string());
        let mut offset = 0usize;
        let mut next_line = |bytes: &[u8]| -> Result<String, GcnError> {
            let rest = &bytes[offset.min(bytes.len())..];
            let nl = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| bad("truncated header"))?;
            let line = std::str::from_utf8(&rest[..nl])
                .map_err(|_| bad("non-utf8 header"))?
                .to_string();
            offset += nl + 1;
            Ok(line)
        };

        if next_line(bytes)? != "clustrec-gcn v1" {
            return Err(bad("missing magic line"));
        }
        let mut config = GcnConfig::default();
        loop {
            let line = next_line(bytes)?;
            if line == "params" {
                break;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| bad("header without ="))?;
            match k {
                "layers" => config.layers = v.parse().map_err(|_| bad("bad layers"))?,
                "input_dim" => config.input_dim = v.parse().map_err(|_| bad("bad input_dim"))?,
                "embedding_dim" => {
                    config.embedding_dim = v.parse().map_err(|_| bad("bad embedding_dim"))?
                }
                "classes" => config.classes = v.parse().map_err(|_| bad("bad classes"))?,
                "learning_rate" => {
                    config.learning_rate = v.parse().map_err(|_| bad("bad learning_rate"))?
                }
                "max_epochs" => config.max_epochs = v.parse().map_err(|_| bad("bad max_epochs"))?,
                "patience" => config.patience = v.parse().map_err(|_| bad("bad patience"))?,
                "seed" => config.seed = v.parse().map_err(|_| bad("bad seed"))?,
                _ => return Err(bad("unknown header key")),
            }
        }
        if config.layers == 0 || config.layers > 64 {
            return Err(bad("implausible layer count"));
        }

        let mut read_block = |bytes: &[u8]| -> Result<Array2<f64>, GcnError> {
            let (block, consumed) = MatrixBlock::decode_prefix(&bytes[offset.min(bytes.len())..])?;
            offset += consumed;
            Ok(block.to_array())
        };

        let mut conv_weights = Vec::with_capacity(config.layers);
        let mut dims = vec![config.input_dim];
        for _ in 0..config.layers {
            dims.push(config.embedding_dim);
        }
        for l in 0..config.layers {
            let w = read_block(bytes)?;
            if w.nrows() != dims[l] || w.ncols() != dims[l + 1] {
                return Err(bad("conv weight shape mismatch"));
            }
            conv_weights.push(w);
        }
        let classifier_weight = read_block(bytes)?;
        if classifier_weight.nrows() != config.embedding_dim
            || classifier_weight.ncols() != config.classes
        {
            return Err(bad("classifier shape mismatch"));
        }
        let bias = read_block(bytes)?;
        if bias.nrows() != 1 || bias.ncols() != config.classes {
            return Err(bad("bias shape mismatch"));
        }
        if offset != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(GcnModel {
            config,
            conv_weights,
            classifier_weight,
            classifier_bias: Array1::from_iter(bias.row(0).iter().copied()),
        })
    }
}
