use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recurrent::{Pooling, RecurrentKind};

/// Architecture and initialization settings shared by every model kind.
///
/// `n_features` and `n_classes` are normally filled in from the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n_features: usize,
    pub n_classes: usize,
    pub conv1_filters: usize,
    pub conv2_filters: usize,
    pub kernel_size: usize,
    pub pool_size: usize,
    /// Recurrent hidden width; `None` means the smallest power of two that is
    /// at least `n_features`.
    pub qrnn_hidden: Option<usize>,
    pub qrnn_layers: usize,
    pub qrnn_window: usize,
    pub pooling: Pooling,
    pub dropout_rate: f64,
    pub recurrent_kind: RecurrentKind,
    /// Hidden width of the MLP baseline.
    pub mlp_hidden: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_features: 0,
            n_classes: 0,
            conv1_filters: 64,
            conv2_filters: 128,
            kernel_size: 3,
            pool_size: 2,
            qrnn_hidden: None,
            qrnn_layers: 2,
            qrnn_window: 2,
            pooling: Pooling::Fo,
            dropout_rate: 0.2,
            recurrent_kind: RecurrentKind::Qrnn,
            mlp_hidden: 128,
            seed: 42,
        }
    }
}

impl ModelConfig {
    pub fn new(n_features: usize, n_classes: usize) -> Self {
        Self {
            n_features,
            n_classes,
            ..Self::default()
        }
    }

    pub fn hidden(&self) -> usize {
        self.qrnn_hidden
            .unwrap_or_else(|| self.n_features.max(1).next_power_of_two())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_features < 4 {
            return fail(format!(
                "n_features must be >= 4 for two pooling stages, got {}",
                self.n_features
            ));
        }
        if self.n_classes < 2 {
            return fail(format!("n_classes must be >= 2, got {}", self.n_classes));
        }
        if self.conv1_filters == 0 || self.conv2_filters == 0 || self.mlp_hidden == 0 {
            return fail("filter counts and widths must be >= 1".into());
        }
        if self.kernel_size == 0 || self.qrnn_window == 0 || self.qrnn_layers == 0 {
            return fail("kernel size, recurrent window and layer count must be >= 1".into());
        }
        if self.pool_size == 0 || self.n_features / self.pool_size / self.pool_size == 0 {
            return fail(format!(
                "pool size {} leaves no length after two stages of {} features",
                self.pool_size, self.n_features
            ));
        }
        if self.qrnn_hidden == Some(0) {
            return fail("recurrent hidden width must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail(format!("dropout rate must be in [0, 1), got {}", self.dropout_rate));
        }
        Ok(())
    }
}

/// Which stack to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Mlp,
    Cnn,
    Gru,
    Lstm,
    HybridLstm,
    #[default]
    HybridQrnn,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 6] = [
        BaselineKind::Mlp,
        BaselineKind::Cnn,
        BaselineKind::Gru,
        BaselineKind::Lstm,
        BaselineKind::HybridLstm,
        BaselineKind::HybridQrnn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::Mlp => "mlp",
            BaselineKind::Cnn => "cnn",
            BaselineKind::Gru => "gru",
            BaselineKind::Lstm => "lstm",
            BaselineKind::HybridLstm => "hybrid_lstm",
            BaselineKind::HybridQrnn => "hybrid_qrnn",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown model kind {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hidden_defaults_to_power_of_two() {
        assert_eq!(ModelConfig::new(10, 4).hidden(), 16);
        assert_eq!(ModelConfig::new(16, 4).hidden(), 16);
        assert_eq!(ModelConfig::new(17, 4).hidden(), 32);
        for f in 4..300 {
            assert!(ModelConfig::new(f, 2).hidden() >= f);
        }
    }

    #[test]
    fn default_architecture() {
        let c = ModelConfig::default();
        assert_eq!((c.conv1_filters, c.conv2_filters, c.kernel_size), (64, 128, 3));
        assert_eq!(c.qrnn_layers, 2);
    }

    #[test]
    fn validation() {
        assert!(ModelConfig::new(3, 2).validate().is_err());
        assert!(ModelConfig::new(4, 1).validate().is_err());
        assert!(ModelConfig::new(4, 2).validate().is_ok());
        let mut c = ModelConfig::new(8, 2);
        c.dropout_rate = 1.0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn kind_parsing() {
        for k in BaselineKind::ALL {
            assert_eq!(k.as_str().parse::<BaselineKind>().unwrap(), k);
        }
        assert!(matches!("rnn".parse::<BaselineKind>(), Err(Error::Config(_))));
    }
}
