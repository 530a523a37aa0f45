use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureKind;
use crate::nn::{lstm_param_count, AttentionMode, PoolingScheme};

/// Layer widths of one feature branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchConfig {
    /// Padded sequence length `L`.
    pub len: usize,
    pub n_features: usize,
    pub n_dense1: usize,
    pub n_lstm: usize,
    pub n_dense2: usize,
}

impl BranchConfig {
    pub fn logmel() -> Self {
        Self {
            len: 700,
            n_features: 32,
            n_dense1: 32,
            n_lstm: 64,
            n_dense2: 25,
        }
    }

    pub fn modspec() -> Self {
        Self {
            len: 110,
            n_features: 184,
            n_dense1: 100,
            n_lstm: 64,
            n_dense2: 25,
        }
    }

    pub fn for_kind(kind: FeatureKind) -> Self {
        match kind {
            FeatureKind::Logmel => Self::logmel(),
            FeatureKind::Modulation => Self::modspec(),
        }
    }

    /// Scalars in this branch's LSTM block.
    pub fn lstm_params(&self) -> usize {
        lstm_param_count(self.n_dense1, self.n_lstm)
    }

    /// LSTM parameters times sequence length, the per-utterance recurrent cost.
    pub fn complexity(&self) -> usize {
        self.lstm_params() * self.len
    }

    fn validate(&self, name: &str) -> Result<()> {
        let dims = [self.len, self.n_features, self.n_dense1, self.n_lstm, self.n_dense2];
        if dims.contains(&0) {
            return Err(Error::Config(format!("{name} branch has a zero dimension: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    SingleLogmel,
    SingleModspec,
    LateFusion,
    WpFusion,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::SingleLogmel,
        ModelKind::SingleModspec,
        ModelKind::LateFusion,
        ModelKind::WpFusion,
    ];

    /// Feature branches in concatenation order (log-mel first).
    pub fn branches(self) -> &'static [FeatureKind] {
        match self {
            ModelKind::SingleLogmel => &[FeatureKind::Logmel],
            ModelKind::SingleModspec => &[FeatureKind::Modulation],
            ModelKind::LateFusion | ModelKind::WpFusion => {
                &[FeatureKind::Logmel, FeatureKind::Modulation]
            }
        }
    }

    pub fn is_fusion(self) -> bool {
        matches!(self, ModelKind::LateFusion | ModelKind::WpFusion)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::SingleLogmel => "single-logmel",
            ModelKind::SingleModspec => "single-modspec",
            ModelKind::LateFusion => "late-fusion",
            ModelKind::WpFusion => "wp-fusion",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::Usage(format!(
                    "unknown architecture '{s}' (expected single-logmel, single-modspec, late-fusion or wp-fusion)"
                ))
            })
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolingConfig {
    pub scheme: PoolingScheme,
    #[serde(default)]
    pub mode: AttentionMode,
}

impl Default for PoolingConfig {
    fn default() -> Self {
        Self {
            scheme: PoolingScheme::Attention,
            mode: AttentionMode::SingleSoftmax,
        }
    }
}

/// Architecture description, serialized as the checkpoint header and
/// accepted by the CLI as a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default)]
    pub pooling: PoolingConfig,
    #[serde(default = "BranchConfig::logmel")]
    pub logmel: BranchConfig,
    #[serde(default = "BranchConfig::modspec")]
    pub modspec: BranchConfig,
    #[serde(default = "default_classes")]
    pub n_classes: usize,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
    /// Fusion only: branch parameters receive no updates.
    #[serde(default)]
    pub freeze_branches: bool,
}

fn default_classes() -> usize {
    3
}

fn default_dropout() -> f64 {
    0.33
}

impl ModelConfig {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            pooling: PoolingConfig::default(),
            logmel: BranchConfig::logmel(),
            modspec: BranchConfig::modspec(),
            n_classes: default_classes(),
            dropout: default_dropout(),
            freeze_branches: false,
        }
    }

    pub fn with_pooling(mut self, scheme: PoolingScheme) -> Self {
        self.pooling.scheme = scheme;
        self
    }

    pub fn branch(&self, kind: FeatureKind) -> &BranchConfig {
        match kind {
            FeatureKind::Logmel => &self.logmel,
            FeatureKind::Modulation => &self.modspec,
        }
    }

    pub fn branch_mut(&mut self, kind: FeatureKind) -> &mut BranchConfig {
        match kind {
            FeatureKind::Logmel => &mut self.logmel,
            FeatureKind::Modulation => &mut self.modspec,
        }
    }

    /// Sum of the LSTM blocks of the branches in use.
    pub fn lstm_params(&self) -> usize {
        self.kind
            .branches()
            .iter()
            .map(|&k| self.branch(k).lstm_params())
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        for &k in self.kind.branches() {
            self.branch(k).validate(k.name())?;
        }
        if self.n_classes < 2 {
            return Err(Error::Config("at least two classes are required".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.freeze_branches && !self.kind.is_fusion() {
            return Err(Error::Config("freeze_branches applies to fusion models only".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
