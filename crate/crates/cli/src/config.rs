//! Flat `key = value` run configuration.
//!
//! One key per line, `#` starts a comment, lists are comma separated.
//! Later assignments win, so command-line `--set` overrides are applied by
//! parsing them after the file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use conet_core::data::SyntheticConfig;
use conet_core::evaluation::EvalOptions;
use conet_core::models::{Architecture, ModelConfig};
use conet_core::training::TrainConfig;
use conet_core::{Error, Result};

/// Environment variable naming the default output root.
pub const OUTPUT_DIR_ENV: &str = "CONET_OUTPUT_DIR";

/// Name of the resolved configuration written beside every output.
pub const RESOLVED_CONFIG: &str = "config.resolved";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    /// Seed for initialization and batch streams.
    pub seed: u64,
    /// Seed for synthetic generation and the leave-one-out split.
    pub data_seed: u64,
    pub target_path: Option<PathBuf>,
    pub source_path: Option<PathBuf>,
    pub min_user_interactions: usize,
    /// Frozen split manifest to reuse instead of drawing a new split.
    pub split_path: Option<PathBuf>,
    pub synthetic: SyntheticConfig,
    pub model: ModelConfig,
    /// Widths used for CSN arms in studies.
    pub csn_hidden_widths: Vec<usize>,
    pub train: TrainConfig,
    /// Seeds of repeated study runs; empty means `[seed]`.
    pub seeds: Vec<u64>,
    pub architectures: Vec<Architecture>,
    pub baseline: Architecture,
    pub lambdas: Vec<f64>,
    pub levels: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let output_dir = std::env::var_os(OUTPUT_DIR_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
        Self {
            output_dir,
            seed: 0,
            data_seed: 0,
            target_path: None,
            source_path: None,
            min_user_interactions: 3,
            split_path: None,
            synthetic: SyntheticConfig::default(),
            model: ModelConfig::default(),
            csn_hidden_widths: vec![64; 4],
            train: TrainConfig::default(),
            seeds: Vec::new(),
            architectures: vec![
                Architecture::Mlp,
                Architecture::MlpPlusPlus,
                Architecture::CrossStitch,
                Architecture::CoNet,
            ],
            baseline: Architecture::Mlp,
            lambdas: vec![0.0, 0.001, 0.01, 0.1, 1.0],
            levels: vec![0, 1, 2, 3, 4],
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("`{key}`: cannot parse {value:?}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::config(format!("`{key}`: expected a boolean, got {value:?}"))),
    }
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn path_text(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    /// Reads a config file on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut config = Self::default();
        config.apply_text(&text, path)?;
        Ok(config)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut config = Self::default();
        config.apply_text(text, Path::new("<config>"))?;
        Ok(config)
    }

    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(format!(
                    "{}:{}: expected `key = value`, got {raw:?}",
                    origin.display(),
                    lineno + 1
                )));
            };
            self.set(key.trim(), value.trim()).map_err(|e| match e {
                Error::Config(msg) => Error::config(format!("{}:{}: {msg}", origin.display(), lineno + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override {assignment:?} is not `key=value`")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (s, m, t) = (&mut self.synthetic, &mut self.model, &mut self.train);
        match key {
            "output_dir" => self.output_dir = PathBuf::from(value),
            "seed" => self.seed = parse(key, value)?,
            "data_seed" => self.data_seed = parse(key, value)?,
            "target_path" => self.target_path = optional_path(value),
            "source_path" => self.source_path = optional_path(value),
            "min_user_interactions" => self.min_user_interactions = parse(key, value)?,
            "split_path" => self.split_path = optional_path(value),

            "synthetic.num_users" => s.num_users = parse(key, value)?,
            "synthetic.num_target_items" => s.num_target_items = parse(key, value)?,
            "synthetic.num_source_items" => s.num_source_items = parse(key, value)?,
            "synthetic.latent_dim" => s.latent_dim = parse(key, value)?,
            "synthetic.relatedness" => s.relatedness = parse(key, value)?,
            "synthetic.target_density" => s.target_density = parse(key, value)?,
            "synthetic.source_density" => s.source_density = parse(key, value)?,

            "architecture" => m.architecture = value.parse()?,
            "embedding_dim" => m.embedding_dim = parse(key, value)?,
            "hidden_widths" => m.hidden_widths = parse_list(key, value)?,
            "csn_hidden_widths" => self.csn_hidden_widths = parse_list(key, value)?,
            "csn_alpha_self" => m.csn_alpha_init.0 = parse(key, value)?,
            "csn_alpha_other" => m.csn_alpha_init.1 = parse(key, value)?,
            "lasso_lambda" => m.lasso_lambda = parse(key, value)?,
            "share_user_embedding" => m.share_user_embedding = parse_bool(key, value)?,

            "learning_rate" => t.learning_rate = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "negative_ratio" => t.negative_ratio = parse(key, value)?,
            "epochs" => t.epochs = parse(key, value)?,
            "beta1" => t.beta1 = parse(key, value)?,
            "beta2" => t.beta2 = parse(key, value)?,
            "epsilon" => t.epsilon = parse(key, value)?,
            "patience" => t.patience = parse(key, value)?,
            "freeze_transfer" => t.freeze_transfer = parse_bool(key, value)?,
            "top_n" => t.eval.top_n = parse(key, value)?,
            "mrr_cutoff" => t.eval.mrr_cutoff = parse_bool(key, value)?,

            "seeds" => self.seeds = parse_list(key, value)?,
            "architectures" => {
                self.architectures = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }
            "baseline" => self.baseline = value.parse()?,
            "lambdas" => self.lambdas = parse_list(key, value)?,
            "levels" => self.levels = parse_list(key, value)?,
            _ => return Err(Error::config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Study seeds, falling back to the single run seed.
    pub fn study_seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.seed]
        } else {
            self.seeds.clone()
        }
    }

    pub fn synthetic_config(&self) -> SyntheticConfig {
        SyntheticConfig {
            seed: self.data_seed,
            ..self.synthetic.clone()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    /// Model configuration for `arch` within a study: CSN arms take
    /// `csn_hidden_widths`, everything else the shared settings.
    pub fn arm_model(&self, arch: Architecture) -> ModelConfig {
        let mut m = ModelConfig {
            architecture: arch,
            ..self.model.clone()
        };
        if arch == Architecture::CrossStitch {
            m.hidden_widths = self.csn_hidden_widths.clone();
        }
        if arch != Architecture::MlpPlusPlus {
            m.share_user_embedding = true;
        }
        m
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train_config().validate()?;
        if self.target_path.is_some() != self.source_path.is_some() {
            return Err(Error::config("target_path and source_path must be given together"));
        }
        if self.target_path.is_none() {
            self.synthetic_config().validate()?;
        }
        Ok(())
    }

    /// Every key with its resolved value, in a fixed order.
    pub fn to_text(&self) -> String {
        let (s, m, t) = (&self.synthetic, &self.model, &self.train);
        let entries: Vec<(&str, String)> = vec![
            ("output_dir", self.output_dir.display().to_string()),
            ("seed", self.seed.to_string()),
            ("data_seed", self.data_seed.to_string()),
            ("target_path", path_text(&self.target_path)),
            ("source_path", path_text(&self.source_path)),
            ("min_user_interactions", self.min_user_interactions.to_string()),
            ("split_path", path_text(&self.split_path)),
            ("synthetic.num_users", s.num_users.to_string()),
            ("synthetic.num_target_items", s.num_target_items.to_string()),
            ("synthetic.num_source_items", s.num_source_items.to_string()),
            ("synthetic.latent_dim", s.latent_dim.to_string()),
            ("synthetic.relatedness", s.relatedness.to_string()),
            ("synthetic.target_density", s.target_density.to_string()),
            ("synthetic.source_density", s.source_density.to_string()),
            ("architecture", m.architecture.to_string()),
            ("embedding_dim", m.embedding_dim.to_string()),
            ("hidden_widths", join(&m.hidden_widths)),
            ("csn_hidden_widths", join(&self.csn_hidden_widths)),
            ("csn_alpha_self", m.csn_alpha_init.0.to_string()),
            ("csn_alpha_other", m.csn_alpha_init.1.to_string()),
            ("lasso_lambda", m.lasso_lambda.to_string()),
            ("share_user_embedding", m.share_user_embedding.to_string()),
            ("learning_rate", t.learning_rate.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("negative_ratio", t.negative_ratio.to_string()),
            ("epochs", t.epochs.to_string()),
            ("beta1", t.beta1.to_string()),
            ("beta2", t.beta2.to_string()),
            ("epsilon", t.epsilon.to_string()),
            ("patience", t.patience.to_string()),
            ("freeze_transfer", t.freeze_transfer.to_string()),
            ("top_n", t.eval.top_n.to_string()),
            ("mrr_cutoff", t.eval.mrr_cutoff.to_string()),
            ("seeds", join(&self.seeds)),
            ("architectures", join(&self.architectures)),
            ("baseline", self.baseline.to_string()),
            ("lambdas", join(&self.lambdas)),
            ("levels", join(&self.levels)),
        ];
        let mut out = String::new();
        for (k, v) in entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn eval_options(&self) -> EvalOptions {
        self.train.eval
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_reference_setup() {
        let c = RunConfig::default();
        assert_eq!(c.train.learning_rate, 0.001);
        assert_eq!(c.train.batch_size, 128);
        assert_eq!(c.train.negative_ratio, 1);
        assert_eq!(c.model.lasso_lambda, 0.1);
        assert_eq!(c.model.hidden_widths, vec![64, 32, 16, 8]);
        assert_eq!(c.csn_hidden_widths, vec![64; 4]);
        assert_eq!(c.train.eval.top_n, 10);
    }

    #[test]
    fn parses_keys_comments_and_lists() {
        let c = RunConfig::from_text(
            "# comment\narchitecture = mlp++\nhidden_widths = 16, 8\nembedding_dim=8  # trailing\n\
             share_user_embedding = false\nseeds = 1,2,3\nlambdas = 0, 0.5\n",
        )
        .unwrap();
        assert_eq!(c.model.architecture, Architecture::MlpPlusPlus);
        assert_eq!(c.model.hidden_widths, vec![16, 8]);
        assert_eq!(c.model.embedding_dim, 8);
        assert!(!c.model.share_user_embedding);
        assert_eq!(c.seeds, vec![1, 2, 3]);
        assert_eq!(c.lambdas, vec![0.0, 0.5]);
    }

    #[test]
    fn resolved_text_round_trips() {
        let mut c = RunConfig::default();
        c.apply_override("lasso_lambda=0.25").unwrap();
        c.apply_override("target_path=/tmp/t.tsv").unwrap();
        c.apply_override("source_path=/tmp/s.tsv").unwrap();
        c.apply_override("architectures=mlp,conet").unwrap();
        let back = RunConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn bad_input_is_a_config_error() {
        assert!(matches!(RunConfig::from_text("nonsense = 1"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_text("epochs = many"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_text("just words"), Err(Error::Config(_))));
        let mut c = RunConfig::default();
        assert!(c.apply_override("epochs").is_err());
    }

    #[test]
    fn csn_arms_use_uniform_widths() {
        let c = RunConfig::default();
        c.arm_model(Architecture::CrossStitch).validate().unwrap();
        assert_eq!(c.arm_model(Architecture::Mlp).hidden_widths, vec![64, 32, 16, 8]);
    }
}
