use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hsic::DEFAULT_MOMENTUM;
use crate::nn::AdamConfig;

/// How the HSIC weight is chosen during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaStrategy {
    Fixed { lambda: f64 },
    /// Zero for `warm_epochs`, then per batch `lambda * hsic = rho * ce`.
    Ratio { rho: f64, warm_epochs: usize },
}

impl LambdaStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LambdaStrategy::Fixed { lambda } if !(lambda >= 0.0 && lambda.is_finite()) => {
                Err(Error::Config(format!("lambda {lambda} must be finite and >= 0")))
            }
            LambdaStrategy::Ratio { rho, .. } if !(rho >= 0.0 && rho.is_finite()) => {
                Err(Error::Config(format!("rho {rho} must be finite and >= 0")))
            }
            _ => Ok(()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            LambdaStrategy::Fixed { lambda } => lambda == 0.0,
            LambdaStrategy::Ratio { rho, .. } => rho == 0.0,
        }
    }
}

impl Default for LambdaStrategy {
    fn default() -> Self {
        LambdaStrategy::Fixed { lambda: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Samples per record after padding.
    pub input_len: usize,
    pub in_channels: usize,
    pub channels: usize,
    pub kernel_size: usize,
    /// One gated residual block per entry.
    pub dilations: Vec<usize>,
    pub head_channels: [usize; 2],
    pub dropout: f64,
    /// Dimension of the external feature vector; 0 for the plain classifier.
    pub feature_dim: usize,
    pub classes: usize,
    pub lambda: LambdaStrategy,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    pub adam: AdamConfig,
    /// Moving-average coefficient of the latent kernel bandwidth.
    pub bandwidth_momentum: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_len: 720,
            in_channels: 1,
            channels: 128,
            kernel_size: 3,
            dilations: (1..=9).map(|i| 1 << i).collect(),
            head_channels: [256, 512],
            dropout: 0.3,
            feature_dim: 0,
            classes: 2,
            lambda: LambdaStrategy::default(),
            epochs: 100,
            batch_size: 32,
            lr_max: 1e-3,
            lr_min: 1e-5,
            adam: AdamConfig::default(),
            bandwidth_momentum: DEFAULT_MOMENTUM,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.input_len < 2 || self.input_len % 2 != 0 {
            return bad(format!("model.input_len {} must be even and >= 2", self.input_len));
        }
        if self.in_channels == 0 || self.channels == 0 || self.head_channels.contains(&0) {
            return bad("model channel counts must be >= 1".into());
        }
        if self.kernel_size % 2 == 0 {
            return bad(format!("model.kernel_size {} must be odd", self.kernel_size));
        }
        for (i, d) in self.dilations.iter().enumerate() {
            if *d != 2 << i {
                return bad(format!(
                    "model.dilations must be consecutive doublings from 2, got {:?}",
                    self.dilations
                ));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("model.dropout {} outside [0, 1)", self.dropout));
        }
        if self.classes < 2 {
            return bad("model.classes must be >= 2".into());
        }
        if self.batch_size < 2 {
            return bad("model.batch_size must be >= 2".into());
        }
        if self.epochs == 0 {
            return bad("model.epochs must be >= 1".into());
        }
        if !(self.lr_max > 0.0 && self.lr_min >= 0.0 && self.lr_min <= self.lr_max) {
            return bad(format!(
                "learning rates must satisfy 0 <= lr_min <= lr_max, 0 < lr_max (got {} and {})",
                self.lr_min, self.lr_max
            ));
        }
        if !(0.0..1.0).contains(&self.bandwidth_momentum) {
            return bad(format!(
                "model.bandwidth_momentum {} outside [0, 1)",
                self.bandwidth_momentum
            ));
        }
        self.lambda.validate()
    }

    /// Length of the pre-pooling activations.
    pub fn latent_len(&self) -> usize {
        self.input_len / 2
    }

    pub fn latent_dim(&self) -> usize {
        self.head_channels[1]
    }
}

/// λ for the current batch. `ce` and `hsic` are the batch's detached loss
/// components.
pub fn lambda_schedule(strategy: &LambdaStrategy, epoch: usize, ce: f64, hsic: f64) -> f64 {
    match *strategy {
        LambdaStrategy::Fixed { lambda } => lambda,
        LambdaStrategy::Ratio { rho, warm_epochs } => {
            if epoch < warm_epochs {
                0.0
            } else {
                rho * ce / hsic.max(1e-8)
            }
        }
    }
}
