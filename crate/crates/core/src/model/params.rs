use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Scalar;

use super::ModelError;

/// Which classifier head sits on top of the feature sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelMode {
    /// Dense layer + softmax per window; window predictions are averaged.
    #[serde(rename = "dense", alias = "spectral")]
    Spectral,
    /// LSTM over the raw features, softmax on the last hidden state.
    #[serde(rename = "lstm", alias = "longitudinal")]
    Longitudinal,
    /// Dense layer per window feeding the LSTM.
    #[serde(rename = "dense-lstm", alias = "joint")]
    Joint,
}

impl ModelMode {
    pub const ALL: [ModelMode; 3] = [ModelMode::Spectral, ModelMode::Longitudinal, ModelMode::Joint];

    pub fn has_dense(self) -> bool {
        matches!(self, ModelMode::Spectral | ModelMode::Joint)
    }

    pub fn has_lstm(self) -> bool {
        matches!(self, ModelMode::Longitudinal | ModelMode::Joint)
    }

    /// CLI / table name: `dense`, `lstm`, `dense-lstm`.
    pub fn name(self) -> &'static str {
        match self {
            ModelMode::Spectral => "dense",
            ModelMode::Longitudinal => "lstm",
            ModelMode::Joint => "dense-lstm",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            ModelMode::Spectral => "Dense",
            ModelMode::Longitudinal => "LSTM",
            ModelMode::Joint => "Dense-LSTM",
        }
    }

    pub(crate) fn code(self) -> u8 {
        self as u8
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }
}

impl fmt::Display for ModelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "dense" | "spectral" => Ok(ModelMode::Spectral),
            "lstm" | "longitudinal" => Ok(ModelMode::Longitudinal),
            "dense-lstm" | "joint" => Ok(ModelMode::Joint),
            other => Err(format!("unknown model `{other}`")),
        }
    }
}

/// Layer widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelDims {
    /// Width of each input feature vector (τ or 12·τ).
    pub input_dim: usize,
    /// Dense layer width κ.
    pub kappa: usize,
    /// LSTM hidden width ν.
    pub nu: usize,
    pub n_classes: usize,
}

impl ModelDims {
    pub fn new(input_dim: usize, n_classes: usize) -> Self {
        Self {
            input_dim,
            kappa: 16,
            nu: 16,
            n_classes,
        }
    }
}

/// `r = ReLU(W·d + b)`, `W` is κ × τ_in row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams<T> {
    pub kappa: usize,
    pub input_dim: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

/// Gate blocks are stacked in the order input, forget, output, candidate;
/// each block is ν rows of `[W_x | W_h]` over the concatenation
/// `x ⊕ h_prev`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams<T> {
    pub input_dim: usize,
    pub nu: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

/// Softmax head without bias: `p = softmax(W·r)`, `W` is N_c × width.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams<T> {
    pub n_classes: usize,
    pub input_dim: usize,
    pub weights: Vec<T>,
}

impl<T: Scalar> DenseParams<T> {
    pub fn zeros(kappa: usize, input_dim: usize) -> Self {
        Self {
            kappa,
            input_dim,
            weights: vec![T::zero(); kappa * input_dim],
            bias: vec![T::zero(); kappa],
        }
    }
}

impl<T: Scalar> LstmParams<T> {
    pub fn zeros(input_dim: usize, nu: usize) -> Self {
        Self {
            input_dim,
            nu,
            weights: vec![T::zero(); 4 * nu * (input_dim + nu)],
            bias: vec![T::zero(); 4 * nu],
        }
    }

    /// Width of the concatenated step input `x ⊕ h_prev`.
    pub fn concat_dim(&self) -> usize {
        self.input_dim + self.nu
    }
}

impl<T: Scalar> HeadParams<T> {
    pub fn zeros(n_classes: usize, input_dim: usize) -> Self {
        Self {
            n_classes,
            input_dim,
            weights: vec![T::zero(); n_classes * input_dim],
        }
    }
}

/// All trainable tensors of one classifier. Also used to hold gradients
/// and optimizer moments (same shapes).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub mode: ModelMode,
    pub dims: ModelDims,
    pub dense: Option<DenseParams<T>>,
    pub lstm: Option<LstmParams<T>>,
    pub head: HeadParams<T>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(mode: ModelMode, dims: ModelDims) -> Self {
        let dense = mode.has_dense().then(|| DenseParams::zeros(dims.kappa, dims.input_dim));
        let lstm_in = if mode == ModelMode::Joint { dims.kappa } else { dims.input_dim };
        let lstm = mode.has_lstm().then(|| LstmParams::zeros(lstm_in, dims.nu));
        let head_in = if mode.has_lstm() { dims.nu } else { dims.kappa };
        Self {
            mode,
            dims,
            dense,
            lstm,
            head: HeadParams::zeros(dims.n_classes, head_in),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.mode, self.dims)
    }

    /// Tensors in the fixed serialization order: dense weights, dense
    /// bias, LSTM weights, LSTM bias, head weights (absent parts skipped).
    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::with_capacity(5);
        if let Some(d) = &self.dense {
            out.push(&d.weights);
            out.push(&d.bias);
        }
        if let Some(l) = &self.lstm {
            out.push(&l.weights);
            out.push(&l.bias);
        }
        out.push(&self.head.weights);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::with_capacity(5);
        if let Some(d) = &mut self.dense {
            out.push(&mut d.weights);
            out.push(&mut d.bias);
        }
        if let Some(l) = &mut self.lstm {
            out.push(&mut l.weights);
            out.push(&mut l.bias);
        }
        out.push(&mut self.head.weights);
        out
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn flatten(&self) -> Vec<T> {
        self.tensors().concat()
    }

    pub fn load_flat(&mut self, flat: &[T]) -> Result<(), ModelError> {
        if flat.len() != self.n_params() {
            return Err(ModelError::ShapeMismatch {
                what: "flat parameter vector",
                expected: self.n_params(),
                found: flat.len(),
            });
        }
        let mut off = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.mode == other.mode
            && self
                .tensors()
                .iter()
                .zip(other.tensors())
                .all(|(a, b)| a.len() == b.len())
    }

    pub fn norm_sq(&self) -> T {
        self.tensors().iter().flat_map(|t| t.iter()).map(|&v| v * v).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let mut out = ModelParams::<U>::zeros(self.mode, self.dims);
        let flat: Vec<U> = self.flatten().into_iter().map(|v| U::lit(v.as_f64())).collect();
        out.load_flat(&flat).expect("same layout");
        out
    }
}
