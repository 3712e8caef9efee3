use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    /// Single base network on the target domain.
    #[serde(rename = "mlp")]
    Mlp,
    /// Two base networks sharing the user embedding.
    #[serde(rename = "mlp++")]
    MlpPlusPlus,
    /// Two base networks mixed by scalar cross-stitch units.
    #[serde(rename = "csn")]
    CrossStitch,
    /// Two base networks coupled by cross connection matrices.
    #[serde(rename = "conet")]
    CoNet,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [
        Architecture::Mlp,
        Architecture::MlpPlusPlus,
        Architecture::CrossStitch,
        Architecture::CoNet,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Mlp => "mlp",
            Architecture::MlpPlusPlus => "mlp++",
            Architecture::CrossStitch => "csn",
            Architecture::CoNet => "conet",
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Architecture::Mlp => 0,
            Architecture::MlpPlusPlus => 1,
            Architecture::CrossStitch => 2,
            Architecture::CoNet => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.tag() == tag)
    }

    /// Whether the model has a source tower.
    pub fn is_coupled(self) -> bool {
        self != Architecture::Mlp
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" => Ok(Architecture::Mlp),
            "mlp++" | "mlppp" | "mlp-plus-plus" => Ok(Architecture::MlpPlusPlus),
            "csn" | "cross-stitch" => Ok(Architecture::CrossStitch),
            "conet" | "sconet" => Ok(Architecture::CoNet),
            other => Err(Error::config(format!("unknown architecture `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub embedding_dim: usize,
    pub hidden_widths: Vec<usize>,
    /// Initial `(α_S, α_D)` of every cross-stitch unit.
    pub csn_alpha_init: (f64, f64),
    /// ℓ1 weight on the transfer matrices; 0 gives the dense CoNet.
    pub lasso_lambda: f64,
    /// MLP++ ablation switch: `false` gives each tower its own user table.
    pub share_user_embedding: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::CoNet,
            embedding_dim: 32,
            hidden_widths: vec![64, 32, 16, 8],
            csn_alpha_init: (0.9, 0.1),
            lasso_lambda: 0.1,
            share_user_embedding: true,
        }
    }
}

impl ModelConfig {
    pub fn new(architecture: Architecture) -> Self {
        Self {
            architecture,
            ..Self::default()
        }
    }

    /// Rejects inconsistent shapes before any parameter is allocated.
    pub fn validate(&self) -> Result<()> {
        let widths = &self.hidden_widths;
        if widths.is_empty() || widths.contains(&0) {
            return Err(Error::config("hidden_widths must be a nonempty list of positive widths"));
        }
        if self.embedding_dim == 0 {
            return Err(Error::config("embedding_dim must be positive"));
        }
        if 2 * self.embedding_dim != widths[0] {
            return Err(Error::config(format!(
                "merged embedding has width 2*{} = {}, but the first hidden layer has width {}",
                self.embedding_dim,
                2 * self.embedding_dim,
                widths[0]
            )));
        }
        if self.architecture == Architecture::CrossStitch && widths.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::config(format!(
                "cross-stitch units cannot connect layers of different widths {widths:?}; \
                 every hidden layer must have the same width"
            )));
        }
        if !(self.lasso_lambda >= 0.0 && self.lasso_lambda.is_finite()) {
            return Err(Error::config(format!(
                "lasso_lambda must be a nonnegative number, got {}",
                self.lasso_lambda
            )));
        }
        if !self.share_user_embedding && self.architecture != Architecture::MlpPlusPlus {
            return Err(Error::config("share_user_embedding = false is only meaningful for mlp++"));
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.hidden_widths.len()
    }

    /// Transfer units between consecutive hidden layers.
    pub fn num_transfer_units(&self) -> usize {
        self.hidden_widths.len().saturating_sub(1)
    }

    /// Penalty weight that actually applies (only CoNet has transfer matrices).
    pub fn effective_lambda(&self) -> f64 {
        if self.architecture == Architecture::CoNet {
            self.lasso_lambda
        } else {
            0.0
        }
    }

    /// Human-readable variant name (`SCoNet` for CoNet with λ > 0).
    pub fn display_name(&self) -> &'static str {
        match self.architecture {
            Architecture::Mlp => "MLP",
            Architecture::MlpPlusPlus => "MLP++",
            Architecture::CrossStitch => "CSN",
            Architecture::CoNet if self.lasso_lambda > 0.0 => "SCoNet",
            Architecture::CoNet => "CoNet",
        }
    }
}

/// Sizes of the embedding tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub num_users: usize,
    pub num_target_items: usize,
    pub num_source_items: usize,
}
