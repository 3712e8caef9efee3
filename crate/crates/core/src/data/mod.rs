//! Interaction data: ingestion, cross-domain alignment, leave-one-out
//! splits, negative sampling, synthetic generation and training-set
//! reduction.

mod dataset;
mod sampling;
mod split;
mod synthetic;
mod tsv;

pub(crate) use dataset::hex;
pub use dataset::{CrossDomainDataset, Domain, InteractionDataset};
pub use sampling::{sample_training_batch, sample_unobserved, BatchSampler, TrainingExample};
pub use split::{
    loo_split, reduce_training, sample_eval_negatives, LooSplit, ReductionSummary, SplitManifest,
    EVAL_NEGATIVES, MIN_EVAL_INTERACTIONS,
};
pub use synthetic::{generate_synthetic, SyntheticConfig};
pub use tsv::{
    align_domains, load_interactions, parse_interactions, write_cross_domain, write_interactions,
    LabeledInteractions,
};
