use serde::{Deserialize, Serialize};

use super::config::{Architecture, ModelConfig, ModelShape};
use crate::error::{Error, Result};
use crate::numerics::{gaussian_matrix, Matrix, Rng, Vector};

/// Standard deviation of the Gaussian initializer.
pub const INIT_STD: f64 = 0.01;

/// Which optimizer steps may touch a parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    /// Updated by both target and source batches (user table, transfer units).
    Shared,
    Target,
    Source,
}

impl Group {
    pub fn index(self) -> usize {
        match self {
            Group::Shared => 0,
            Group::Target => 1,
            Group::Source => 2,
        }
    }
}

/// Name, optimizer group and shape of one parameter block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockInfo {
    pub name: String,
    pub group: Group,
    pub rows: usize,
    pub cols: usize,
}

/// One hidden layer: `W·a + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vector,
}

/// Domain-specific part of a base network: item table, hidden layers and
/// output weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Tower {
    pub item_embedding: Matrix,
    pub layers: Vec<Dense>,
    pub output: Vector,
}

/// Single-domain base network.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseNetworkParams {
    pub user_embedding: Matrix,
    pub tower: Tower,
}

/// How the two towers of a coupled model exchange information between
/// consecutive hidden layers.
#[derive(Debug, Clone, PartialEq)]
pub enum Transfer {
    /// No exchange (MLP++).
    None,
    /// Per-layer `[α_S, α_D]` scalars (cross-stitch).
    Stitch(Vec<Vector>),
    /// Per-layer matrices `H^l`, shaped `width[l+1] × width[l]`, used in
    /// both directions.
    Cross(Vec<Matrix>),
}

/// Target and source towers with a shared user table.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledParams {
    pub user_embedding: Matrix,
    /// Set only when the MLP++ user table is not shared.
    pub source_user_embedding: Option<Matrix>,
    pub target: Tower,
    pub source: Tower,
    pub transfer: Transfer,
}

impl CoupledParams {
    pub fn source_users(&self) -> &Matrix {
        self.source_user_embedding.as_ref().unwrap_or(&self.user_embedding)
    }

    pub fn transfer_matrices(&self) -> &[Matrix] {
        match &self.transfer {
            Transfer::Cross(h) => h,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    Single(BaseNetworkParams),
    Coupled(CoupledParams),
}

/// A configured parameter set. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    shape: ModelShape,
    params: Params,
}

impl Model {
    /// Embedding tables and transfer matrices from `N(0, 0.01²)`, hidden and
    /// output weights Glorot-uniform, zero biases, cross-stitch scalars at
    /// `csn_alpha_init`.
    pub fn new(config: ModelConfig, shape: ModelShape, seed: u64) -> Result<Self> {
        Self::with_init_std(config, shape, seed, INIT_STD)
    }

    /// Like [`Model::new`] with another standard deviation for the Gaussian
    /// blocks.
    ///
    /// Every block draws from its own named stream, so two architectures
    /// that share a block (say the target tower) initialize it identically.
    pub fn with_init_std(config: ModelConfig, shape: ModelShape, seed: u64, std_dev: f64) -> Result<Self> {
        let mut model = Self::zeros(config, shape)?;
        let alpha = model.config.csn_alpha_init;
        for (info, block) in model.blocks_mut() {
            if info.name.ends_with(".bias") {
                continue;
            }
            if info.name.starts_with("stitch") {
                block.copy_from_slice(&[alpha.0, alpha.1]);
                continue;
            }
            let mut rng = Rng::derived(seed, &format!("init/{}", info.name));
            if info.name.ends_with(".weight") || info.name.ends_with(".output") {
                let limit = glorot_limit(&info);
                for x in block.iter_mut() {
                    *x = limit * (2.0 * rng.uniform() - 1.0);
                }
            } else {
                let m = gaussian_matrix(info.rows, info.cols, std_dev, &mut rng);
                block.copy_from_slice(m.as_slice());
            }
        }
        Ok(model)
    }

    /// All-zero parameters of the right shapes.
    pub fn zeros(config: ModelConfig, shape: ModelShape) -> Result<Self> {
        config.validate()?;
        if shape.num_users == 0 || shape.num_target_items == 0 {
            return Err(Error::config("model needs at least one user and one target item"));
        }
        if config.architecture.is_coupled() && shape.num_source_items == 0 {
            return Err(Error::config("coupled model needs at least one source item"));
        }
        let d = config.embedding_dim;
        let widths = &config.hidden_widths;
        let tower = |n_items: usize| Tower {
            item_embedding: Matrix::zeros(n_items, d),
            layers: (0..widths.len())
                .map(|l| {
                    let fan_in = if l == 0 { 2 * d } else { widths[l - 1] };
                    Dense {
                        weight: Matrix::zeros(widths[l], fan_in),
                        bias: Vector::zeros(widths[l]),
                    }
                })
                .collect(),
            output: Vector::zeros(*widths.last().expect("validated")),
        };
        let users = Matrix::zeros(shape.num_users, d);
        let params = match config.architecture {
            Architecture::Mlp => Params::Single(BaseNetworkParams {
                user_embedding: users,
                tower: tower(shape.num_target_items),
            }),
            arch => {
                let units = config.num_transfer_units();
                let transfer = match arch {
                    Architecture::CoNet => Transfer::Cross(
                        (0..units).map(|l| Matrix::zeros(widths[l + 1], widths[l])).collect(),
                    ),
                    Architecture::CrossStitch => {
                        Transfer::Stitch((0..units).map(|_| Vector::zeros(2)).collect())
                    }
                    _ => Transfer::None,
                };
                Params::Coupled(CoupledParams {
                    source_user_embedding: (!config.share_user_embedding).then(|| users.clone()),
                    user_embedding: users,
                    target: tower(shape.num_target_items),
                    source: tower(shape.num_source_items),
                    transfer,
                })
            }
        };
        Ok(Self { config, shape, params })
    }

    /// Zero-valued parameter set mirroring this one.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, b) in z.blocks_mut() {
            b.fill(0.0);
        }
        z
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn shape(&self) -> ModelShape {
        self.shape
    }

    pub fn architecture(&self) -> Architecture {
        self.config.architecture
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    /// Transfer matrices `H^l` (empty unless CoNet).
    pub fn transfer_matrices(&self) -> &[Matrix] {
        match &self.params {
            Params::Coupled(c) => c.transfer_matrices(),
            Params::Single(_) => &[],
        }
    }

    pub fn transfer_matrices_mut(&mut self) -> &mut [Matrix] {
        match &mut self.params {
            Params::Coupled(CoupledParams {
                transfer: Transfer::Cross(h),
                ..
            }) => h,
            _ => &mut [],
        }
    }

    /// Blocks in their fixed order: user table(s), target tower, source
    /// tower, transfer units. Checkpoints and flattening rely on it.
    pub fn block_infos(&self) -> Vec<BlockInfo> {
        self.blocks().into_iter().map(|(i, _)| i).collect()
    }

    pub fn blocks(&self) -> Vec<(BlockInfo, &[f64])> {
        let mut out: Vec<(BlockInfo, &[f64])> = Vec::new();
        match &self.params {
            Params::Single(p) => {
                out.push(matrix_block("user_embedding", Group::Target, &p.user_embedding));
                tower_blocks("target", Group::Target, &p.tower, &mut out);
            }
            Params::Coupled(p) => {
                let g = if self.config.share_user_embedding { Group::Shared } else { Group::Target };
                out.push(matrix_block("user_embedding", g, &p.user_embedding));
                if let Some(su) = &p.source_user_embedding {
                    out.push(matrix_block("source.user_embedding", Group::Source, su));
                }
                tower_blocks("target", Group::Target, &p.target, &mut out);
                tower_blocks("source", Group::Source, &p.source, &mut out);
                match &p.transfer {
                    Transfer::None => {}
                    Transfer::Stitch(units) => {
                        for (l, a) in units.iter().enumerate() {
                            out.push(vector_block(&format!("stitch{l}"), Group::Shared, a));
                        }
                    }
                    Transfer::Cross(hs) => {
                        for (l, h) in hs.iter().enumerate() {
                            out.push(matrix_block(&format!("transfer{l}"), Group::Shared, h));
                        }
                    }
                }
            }
        }
        out
    }

    /// Same order as [`Model::blocks`].
    pub fn blocks_mut(&mut self) -> Vec<(BlockInfo, &mut [f64])> {
        let mut out: Vec<(BlockInfo, &mut [f64])> = Vec::new();
        let shared_users = self.config.share_user_embedding;
        match &mut self.params {
            Params::Single(p) => {
                out.push(matrix_block_mut("user_embedding", Group::Target, &mut p.user_embedding));
                tower_blocks_mut("target", Group::Target, &mut p.tower, &mut out);
            }
            Params::Coupled(p) => {
                let g = if shared_users { Group::Shared } else { Group::Target };
                out.push(matrix_block_mut("user_embedding", g, &mut p.user_embedding));
                if let Some(su) = &mut p.source_user_embedding {
                    out.push(matrix_block_mut("source.user_embedding", Group::Source, su));
                }
                tower_blocks_mut("target", Group::Target, &mut p.target, &mut out);
                tower_blocks_mut("source", Group::Source, &mut p.source, &mut out);
                match &mut p.transfer {
                    Transfer::None => {}
                    Transfer::Stitch(units) => {
                        for (l, a) in units.iter_mut().enumerate() {
                            out.push(vector_block_mut(&format!("stitch{l}"), Group::Shared, a));
                        }
                    }
                    Transfer::Cross(hs) => {
                        for (l, h) in hs.iter_mut().enumerate() {
                            out.push(matrix_block_mut(&format!("transfer{l}"), Group::Shared, h));
                        }
                    }
                }
            }
        }
        out
    }

    fn slices(&self) -> Vec<&[f64]> {
        self.blocks().into_iter().map(|(_, s)| s).collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    /// All parameters concatenated in block order.
    pub fn flatten(&self) -> Vec<f64> {
        self.slices().concat()
    }

    /// Inverse of [`Model::flatten`].
    pub fn assign_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_parameters() {
            return Err(Error::config(format!(
                "expected {} parameters, got {}",
                self.num_parameters(),
                values.len()
            )));
        }
        let mut offset = 0;
        for (_, block) in self.blocks_mut() {
            let n = block.len();
            block.copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|x| x.is_finite()))
    }
}

/// `sqrt(6 / (fan_in + fan_out))`; output weight vectors have one output.
fn glorot_limit(info: &BlockInfo) -> f64 {
    let (fan_in, fan_out) = if info.name.ends_with(".output") {
        (info.cols, 1)
    } else {
        (info.cols, info.rows)
    };
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn matrix_block_mut<'a>(name: &str, group: Group, m: &'a mut Matrix) -> (BlockInfo, &'a mut [f64]) {
    let (rows, cols) = m.shape();
    (
        BlockInfo {
            name: name.to_string(),
            group,
            rows,
            cols,
        },
        m.as_mut_slice(),
    )
}

fn vector_block_mut<'a>(name: &str, group: Group, v: &'a mut Vector) -> (BlockInfo, &'a mut [f64]) {
    (
        BlockInfo {
            name: name.to_string(),
            group,
            rows: 1,
            cols: v.len(),
        },
        &mut v[..],
    )
}

fn tower_blocks_mut<'a>(
    prefix: &str,
    group: Group,
    tower: &'a mut Tower,
    out: &mut Vec<(BlockInfo, &'a mut [f64])>,
) {
    out.push(matrix_block_mut(&format!("{prefix}.item_embedding"), group, &mut tower.item_embedding));
    for (l, layer) in tower.layers.iter_mut().enumerate() {
        out.push(matrix_block_mut(&format!("{prefix}.layer{l}.weight"), group, &mut layer.weight));
        out.push(vector_block_mut(&format!("{prefix}.layer{l}.bias"), group, &mut layer.bias));
    }
    out.push(vector_block_mut(&format!("{prefix}.output"), group, &mut tower.output));
}

fn matrix_block<'a>(name: &str, group: Group, m: &'a Matrix) -> (BlockInfo, &'a [f64]) {
    let (rows, cols) = m.shape();
    (BlockInfo { name: name.to_string(), group, rows, cols }, m.as_slice())
}

fn vector_block<'a>(name: &str, group: Group, v: &'a Vector) -> (BlockInfo, &'a [f64]) {
    (BlockInfo { name: name.to_string(), group, rows: 1, cols: v.len() }, v.as_slice())
}

fn tower_blocks<'a>(prefix: &str, group: Group, tower: &'a Tower, out: &mut Vec<(BlockInfo, &'a [f64])>) {
    out.push(matrix_block(&format!("{prefix}.item_embedding"), group, &tower.item_embedding));
    for (l, layer) in tower.layers.iter().enumerate() {
        out.push(matrix_block(&format!("{prefix}.layer{l}.weight"), group, &layer.weight));
        out.push(vector_block(&format!("{prefix}.layer{l}.bias"), group, &layer.bias));
    }
    out.push(vector_block(&format!("{prefix}.output"), group, &tower.output));
}
