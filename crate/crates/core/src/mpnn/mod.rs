//! Message-passing network: parameters, forward pass with an activation
//! tape, hand-written reverse mode, Adam training and checkpoints.
//!
//! Shapes, with `F` node width, `B` bond width, `H` message hidden width:
//!
//! ```text
//! h⁰        = act(W_in x + b_in)                          F → H
//! u_ij      = W_self h_i + W_nbr h_j + W_edge e_ij + b    message MLP hidden layer
//! φ_ij      = W_out act(u_ij) + b_out
//! m_i       = Σ_{j∈N(i)} φ_ij
//! h^{t+1}   = act(W_m h^t + W_u m + b_u)
//! h_i^f     = act(W_a [x_i ‖ Σ_{j∈N(i)} h_j^T] + b_a)     (F + H) → H
//! h_G       = Σ_i h_i^f  (sum), / n (mean), / norm (norm)
//! ŷ         = FFN(h_G)                                    logit or value
//! ```
//!
//! With `ffn_layers = L` the head has `L − 1` hidden layers of width
//! `ffn_hidden` followed by a linear output.

mod checkpoint;
mod model;
mod train;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use model::{backward, example_gradient, forward, Mode, Tape};
pub use train::{
    lr_at, predict_batch, train, Adam, EpochRecord, History, LrSchedule, DIVERGENCE_FACTOR,
};

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chem_io::TaskKind;
use crate::featurize::BOND_WIDTH;

#[derive(Debug, Error, PartialEq)]
pub enum MpnnError {
    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("feature fingerprint mismatch: model `{expected}`, graph `{found}`")]
    FingerprintMismatch { expected: String, found: String },
    #[error("training diverged at epoch {epoch}: loss non-finite or exploding")]
    Diverged { epoch: usize },
    #[error("{0} partition is empty")]
    EmptyPartition(&'static str),
    #[error("molecule `{0}` has no label")]
    MissingLabel(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Activation {
    Relu,
    LeakyRelu,
    /// Leaky slope is one learnable scalar shared by every unit.
    Prelu,
    Tanh,
    Selu,
    Elu,
}

const LEAKY_SLOPE: f64 = 0.01;
const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
const SELU_ALPHA: f64 = 1.673_263_242_354_377_2;
pub const PRELU_INIT: f64 = 0.25;

impl Activation {
    pub const ALL: [Activation; 6] = [
        Activation::Relu,
        Activation::LeakyRelu,
        Activation::Prelu,
        Activation::Tanh,
        Activation::Selu,
        Activation::Elu,
    ];

    pub fn apply(self, z: f64, alpha: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
            Activation::Prelu => {
                if z > 0.0 {
                    z
                } else {
                    alpha * z
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Selu => {
                if z > 0.0 {
                    SELU_LAMBDA * z
                } else {
                    SELU_LAMBDA * SELU_ALPHA * z.exp_m1()
                }
            }
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
        }
    }

    pub fn derivative(self, z: f64, alpha: f64) -> f64 {
        match self {
            Activation::Relu => f64::from(u8::from(z > 0.0)),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Prelu => {
                if z > 0.0 {
                    1.0
                } else {
                    alpha
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Selu => {
                if z > 0.0 {
                    SELU_LAMBDA
                } else {
                    SELU_LAMBDA * SELU_ALPHA * z.exp()
                }
            }
            Activation::Elu => {
                if z > 0.0 {
                    1.0
                } else {
                    z.exp()
                }
            }
        }
    }

    /// ∂act/∂alpha; non-zero only for PReLU on the negative side.
    pub fn alpha_derivative(self, z: f64) -> f64 {
        if self == Activation::Prelu && z <= 0.0 {
            z
        } else {
            0.0
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "RELU",
            Activation::LeakyRelu => "LEAKYRELU",
            Activation::Prelu => "PRELU",
            Activation::Tanh => "TANH",
            Activation::Selu => "SELU",
            Activation::Elu => "ELU",
        })
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "RELU" => Ok(Activation::Relu),
            "LEAKYRELU" => Ok(Activation::LeakyRelu),
            "PRELU" => Ok(Activation::Prelu),
            "TANH" => Ok(Activation::Tanh),
            "SELU" => Ok(Activation::Selu),
            "ELU" => Ok(Activation::Elu),
            _ => Err(format!(
                "unknown activation `{s}` (RELU, LEAKYRELU, PRELU, TANH, SELU, ELU)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Aggregation {
    Mean,
    Sum,
    /// Sum divided by `aggregation_norm`.
    Norm,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Mean => "mean",
            Aggregation::Sum => "sum",
            Aggregation::Norm => "norm",
        })
    }
}

impl FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        match lower.strip_suffix("aggregation").unwrap_or(&lower) {
            "mean" => Ok(Aggregation::Mean),
            "sum" => Ok(Aggregation::Sum),
            "norm" => Ok(Aggregation::Norm),
            _ => Err(format!("unknown aggregation `{s}` (mean, sum, norm)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub task: TaskKind,
    pub depth: usize,
    pub message_hidden: usize,
    pub ffn_hidden: usize,
    pub ffn_layers: usize,
    pub activation: Activation,
    pub aggregation: Aggregation,
    pub aggregation_norm: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub max_lr: f64,
    pub init_lr_ratio: f64,
    pub final_lr_ratio: f64,
    pub warmup_epochs: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            task: TaskKind::Classification,
            depth: 3,
            message_hidden: 300,
            ffn_hidden: 300,
            ffn_layers: 2,
            activation: Activation::Relu,
            aggregation: Aggregation::Mean,
            aggregation_norm: 100.0,
            batch_size: 50,
            epochs: 50,
            max_lr: 1e-3,
            init_lr_ratio: 0.1,
            final_lr_ratio: 0.1,
            warmup_epochs: 2,
            dropout: 0.0,
            seed: 0,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .trim()
        .parse()
        .map_err(|_| format!("`{key}` expects a number, got `{value}`"))
}

impl TrainConfig {
    pub const KEYS: [&'static str; 16] = [
        "task",
        "depth",
        "message_hidden",
        "ffn_hidden",
        "ffn_layers",
        "activation",
        "aggregation",
        "aggregation_norm",
        "batch_size",
        "epochs",
        "max_lr",
        "init_lr_ratio",
        "final_lr_ratio",
        "warmup_epochs",
        "dropout",
        "seed",
    ];

    /// Sets one field from text. `Ok(false)` means the key is not a
    /// training key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, String> {
        let v = value.trim();
        match key {
            "task" => self.task = v.parse()?,
            "depth" => self.depth = parse_num(key, v)?,
            "message_hidden" => self.message_hidden = parse_num(key, v)?,
            "ffn_hidden" => self.ffn_hidden = parse_num(key, v)?,
            "ffn_layers" => self.ffn_layers = parse_num(key, v)?,
            "activation" => self.activation = v.parse()?,
            "aggregation" => self.aggregation = v.parse()?,
            "aggregation_norm" => self.aggregation_norm = parse_num(key, v)?,
            "batch_size" => self.batch_size = parse_num(key, v)?,
            "epochs" => self.epochs = parse_num(key, v)?,
            "max_lr" => self.max_lr = parse_num(key, v)?,
            "init_lr_ratio" => self.init_lr_ratio = parse_num(key, v)?,
            "final_lr_ratio" => self.final_lr_ratio = parse_num(key, v)?,
            "warmup_epochs" => self.warmup_epochs = parse_num(key, v)?,
            "dropout" => self.dropout = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// All fields as text, floats in shortest round-trip form.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("task", self.task.to_string()),
            ("depth", self.depth.to_string()),
            ("message_hidden", self.message_hidden.to_string()),
            ("ffn_hidden", self.ffn_hidden.to_string()),
            ("ffn_layers", self.ffn_layers.to_string()),
            ("activation", self.activation.to_string()),
            ("aggregation", self.aggregation.to_string()),
            ("aggregation_norm", format!("{:?}", self.aggregation_norm)),
            ("batch_size", self.batch_size.to_string()),
            ("epochs", self.epochs.to_string()),
            ("max_lr", format!("{:?}", self.max_lr)),
            ("init_lr_ratio", format!("{:?}", self.init_lr_ratio)),
            ("final_lr_ratio", format!("{:?}", self.final_lr_ratio)),
            ("warmup_epochs", self.warmup_epochs.to_string()),
            ("dropout", format!("{:?}", self.dropout)),
            ("seed", self.seed.to_string()),
        ]
    }

    /// Hard limits; stricter search-space bounds live in `config`.
    pub fn validate(&self) -> Result<(), String> {
        let in_unit = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(format!("{name} must lie in (0, 1], got {v}"))
            }
        };
        if !(2..=6).contains(&self.depth) {
            return Err(format!("depth must lie in [2, 6], got {}", self.depth));
        }
        if !(1..=3).contains(&self.ffn_layers) {
            return Err(format!(
                "ffn_layers must lie in [1, 3], got {}",
                self.ffn_layers
            ));
        }
        if self.message_hidden == 0 || self.ffn_hidden == 0 {
            return Err("hidden widths must be positive".into());
        }
        if !(0.0..=0.45).contains(&self.dropout) {
            return Err(format!(
                "dropout must lie in [0, 0.45], got {}",
                self.dropout
            ));
        }
        if !(1.0..=200.0).contains(&self.aggregation_norm) {
            return Err(format!(
                "aggregation_norm must lie in [1, 200], got {}",
                self.aggregation_norm
            ));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err("batch_size and epochs must be at least 1".into());
        }
        if !(self.max_lr.is_finite() && self.max_lr > 0.0) {
            return Err(format!("max_lr must be positive, got {}", self.max_lr));
        }
        in_unit("init_lr_ratio", self.init_lr_ratio)?;
        in_unit("final_lr_ratio", self.final_lr_ratio)?;
        Ok(())
    }
}

/// Weight matrix `out × in` and bias `out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    fn zeros(out: usize, inp: usize) -> Self {
        Linear {
            w: Array2::zeros((out, inp)),
            b: Array1::zeros(out),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: TrainConfig,
    pub node_width: usize,
    pub edge_width: usize,
    /// Featurization fingerprint of the graphs this model was trained on.
    pub fingerprint: String,
    pub input: Linear,
    pub msg_self: Array2<f64>,
    pub msg_nbr: Array2<f64>,
    pub msg_edge: Linear,
    pub msg_out: Linear,
    pub upd_self: Array2<f64>,
    pub upd_msg: Linear,
    pub readout: Linear,
    pub ffn: Vec<Linear>,
    pub prelu: Array1<f64>,
}

impl ModelParams {
    /// All-zero parameters with the layout implied by `config`.
    pub fn zeros(config: &TrainConfig, node_width: usize, edge_width: usize) -> Self {
        let h = config.message_hidden;
        let mut ffn = Vec::with_capacity(config.ffn_layers);
        let mut width = h;
        for _ in 1..config.ffn_layers {
            ffn.push(Linear::zeros(config.ffn_hidden, width));
            width = config.ffn_hidden;
        }
        ffn.push(Linear::zeros(1, width));
        ModelParams {
            config: config.clone(),
            node_width,
            edge_width,
            fingerprint: String::new(),
            input: Linear::zeros(h, node_width),
            msg_self: Array2::zeros((h, h)),
            msg_nbr: Array2::zeros((h, h)),
            msg_edge: Linear::zeros(h, edge_width),
            msg_out: Linear::zeros(h, h),
            upd_self: Array2::zeros((h, h)),
            upd_msg: Linear::zeros(h, h),
            readout: Linear::zeros(h, node_width + h),
            ffn,
            prelu: Array1::zeros(1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = ModelParams::zeros(&self.config, self.node_width, self.edge_width);
        z.fingerprint = self.fingerprint.clone();
        z
    }

    pub fn hidden(&self) -> usize {
        self.config.message_hidden
    }

    pub fn alpha(&self) -> f64 {
        self.prelu[0]
    }

    /// Every learnable array in a fixed order with a stable name.
    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut out = vec![
            ("input.w".to_string(), self.input.w.view().into_dyn()),
            ("input.b".to_string(), self.input.b.view().into_dyn()),
            ("msg_self.w".to_string(), self.msg_self.view().into_dyn()),
            ("msg_nbr.w".to_string(), self.msg_nbr.view().into_dyn()),
            ("msg_edge.w".to_string(), self.msg_edge.w.view().into_dyn()),
            ("msg_edge.b".to_string(), self.msg_edge.b.view().into_dyn()),
            ("msg_out.w".to_string(), self.msg_out.w.view().into_dyn()),
            ("msg_out.b".to_string(), self.msg_out.b.view().into_dyn()),
            ("upd_self.w".to_string(), self.upd_self.view().into_dyn()),
            ("upd_msg.w".to_string(), self.upd_msg.w.view().into_dyn()),
            ("upd_msg.b".to_string(), self.upd_msg.b.view().into_dyn()),
            ("readout.w".to_string(), self.readout.w.view().into_dyn()),
            ("readout.b".to_string(), self.readout.b.view().into_dyn()),
        ];
        for (i, layer) in self.ffn.iter().enumerate() {
            out.push((format!("ffn{i}.w"), layer.w.view().into_dyn()));
            out.push((format!("ffn{i}.b"), layer.b.view().into_dyn()));
        }
        out.push(("prelu.alpha".to_string(), self.prelu.view().into_dyn()));
        out
    }

    /// Mutable views in the order of [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        let mut out = vec![
            self.input.w.view_mut().into_dyn(),
            self.input.b.view_mut().into_dyn(),
            self.msg_self.view_mut().into_dyn(),
            self.msg_nbr.view_mut().into_dyn(),
            self.msg_edge.w.view_mut().into_dyn(),
            self.msg_edge.b.view_mut().into_dyn(),
            self.msg_out.w.view_mut().into_dyn(),
            self.msg_out.b.view_mut().into_dyn(),
            self.upd_self.view_mut().into_dyn(),
            self.upd_msg.w.view_mut().into_dyn(),
            self.upd_msg.b.view_mut().into_dyn(),
            self.readout.w.view_mut().into_dyn(),
            self.readout.b.view_mut().into_dyn(),
        ];
        for layer in &mut self.ffn {
            out.push(layer.w.view_mut().into_dyn());
            out.push(layer.b.view_mut().into_dyn());
        }
        out.push(self.prelu.view_mut().into_dyn());
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn add_assign(&mut self, other: &ModelParams) {
        for (mut a, (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a += &b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for mut t in self.tensors_mut() {
            t *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}

fn glorot(rng: &mut ChaCha8Rng, m: &mut Array2<f64>, fan_in: usize, fan_out: usize) {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    m.mapv_inplace(|_| rng.random_range(-bound..=bound));
}

/// Glorot-uniform weights, zero biases, PReLU slope at its initial value.
/// The three message-input blocks share the fan of the concatenated input.
pub fn init_model(config: &TrainConfig, node_width: usize, seed: u64) -> ModelParams {
    let mut p = ModelParams::zeros(config, node_width, BOND_WIDTH);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = config.message_hidden;
    let msg_fan_in = 2 * h + BOND_WIDTH;
    glorot(&mut rng, &mut p.input.w, node_width, h);
    glorot(&mut rng, &mut p.msg_self, msg_fan_in, h);
    glorot(&mut rng, &mut p.msg_nbr, msg_fan_in, h);
    glorot(&mut rng, &mut p.msg_edge.w, msg_fan_in, h);
    glorot(&mut rng, &mut p.msg_out.w, h, h);
    glorot(&mut rng, &mut p.upd_self, 2 * h, h);
    glorot(&mut rng, &mut p.upd_msg.w, 2 * h, h);
    glorot(&mut rng, &mut p.readout.w, node_width + h, h);
    for layer in &mut p.ffn {
        let (out, inp) = layer.w.dim();
        glorot(&mut rng, &mut layer.w, inp, out);
    }
    p.prelu[0] = PRELU_INIT;
    p
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy on a probability, or squared error.
pub fn loss(prediction: f64, label: f64, task: TaskKind) -> f64 {
    match task {
        TaskKind::Classification => {
            -(label * prediction.ln() + (1.0 - label) * (1.0 - prediction).ln())
        }
        TaskKind::Regression => (prediction - label) * (prediction - label),
    }
}

/// Loss on the raw head output (a logit for classification) and its
/// derivative with respect to that output.
pub fn loss_on_output(output: f64, label: f64, task: TaskKind) -> (f64, f64) {
    match task {
        TaskKind::Classification => {
            let l = output.max(0.0) - output * label + (-output.abs()).exp().ln_1p();
            (l, sigmoid(output) - label)
        }
        TaskKind::Regression => {
            let d = output - label;
            (d * d, 2.0 * d)
        }
    }
}

/// Head output mapped to prediction space.
pub fn to_prediction(output: f64, task: TaskKind) -> f64 {
    match task {
        TaskKind::Classification => sigmoid(output),
        TaskKind::Regression => output,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_examples() {
        assert_eq!(loss(3.0, 3.0, TaskKind::Regression), 0.0);
        assert!((loss(0.5, 1.0, TaskKind::Classification) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((loss(0.9, 0.0, TaskKind::Classification) - std::f64::consts::LN_10).abs() < 1e-12);
    }

    #[test]
    fn logit_loss_matches_probability_loss() {
        for z in [-30.0, -2.0, 0.0, 0.7, 12.0] {
            for y in [0.0, 1.0] {
                let (l, _) = loss_on_output(z, y, TaskKind::Classification);
                let p = sigmoid(z);
                if p > 0.0 && p < 1.0 {
                    assert!((l - loss(p, y, TaskKind::Classification)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn init_deterministic_and_bounded() {
        let c = TrainConfig {
            message_hidden: 300,
            ..TrainConfig::default()
        };
        let a = init_model(&c, 187, 1);
        assert_eq!(a, init_model(&c, 187, 1));
        assert_ne!(a, init_model(&c, 187, 2));
        let bound = (6.0f64 / 600.0).sqrt();
        assert!(a.msg_out.w.iter().all(|v| v.abs() <= bound));
        assert!(a.input.b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ffn_layout() {
        for layers in 1..=3 {
            let c = TrainConfig {
                ffn_layers: layers,
                message_hidden: 8,
                ffn_hidden: 5,
                ..TrainConfig::default()
            };
            let p = ModelParams::zeros(&c, 10, BOND_WIDTH);
            assert_eq!(p.ffn.len(), layers);
            assert_eq!(p.ffn.last().unwrap().w.dim().0, 1);
            assert_eq!(p.ffn[0].w.dim().1, 8);
        }
    }

    #[test]
    fn activation_derivatives_match_differences() {
        for act in Activation::ALL {
            for z in [-1.3, -0.2, 0.4, 2.0] {
                let eps = 1e-6;
                let fd = (act.apply(z + eps, 0.3) - act.apply(z - eps, 0.3)) / (2.0 * eps);
                assert!((fd - act.derivative(z, 0.3)).abs() < 1e-6, "{act} at {z}");
            }
        }
    }

    #[test]
    fn config_entries_round_trip() {
        let mut c = TrainConfig {
            max_lr: 0.00521,
            activation: Activation::LeakyRelu,
            ..TrainConfig::default()
        };
        let entries = c.entries();
        let mut back = TrainConfig::default();
        for (k, v) in &entries {
            assert!(back.set(k, v).unwrap());
        }
        assert_eq!(back, c);
        assert!(!c.set("nonsense", "1").unwrap());
        assert_eq!(entries.len(), TrainConfig::KEYS.len());
    }

    #[test]
    fn validation_ranges() {
        let ok = TrainConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            TrainConfig {
                dropout: 0.6,
                ..ok.clone()
            },
            TrainConfig {
                depth: 1,
                ..ok.clone()
            },
            TrainConfig {
                ffn_layers: 4,
                ..ok.clone()
            },
            TrainConfig {
                init_lr_ratio: 0.0,
                ..ok.clone()
            },
            TrainConfig {
                final_lr_ratio: 1.5,
                ..ok.clone()
            },
            TrainConfig {
                batch_size: 0,
                ..ok.clone()
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }
}
