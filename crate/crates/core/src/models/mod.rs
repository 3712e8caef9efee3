//! Parameter containers and forward/backward passes for the four
//! architectures: MLP, MLP++, cross-stitch (CSN) and CoNet/SCoNet.

mod backward;
mod checkpoint;
mod config;
mod forward;
mod params;

pub use backward::{backward, backward_into, example_loss, ExampleLoss, Labels};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use config::{Architecture, ModelConfig, ModelShape};
pub use forward::{
    base_forward, conet_forward, coupled_forward, cross_stitch, cross_unit, csn_forward, embed_lookup,
    ForwardTrace, TowerTrace,
};
pub use params::{
    BaseNetworkParams, BlockInfo, CoupledParams, Dense, Group, Model, Params, Tower, Transfer, INIT_STD,
};

use crate::numerics::Matrix;

/// `λ · Σ_l Σ_ij |h_ij|`.
pub fn lasso_penalty(transfer: &[Matrix], lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    lambda
        * transfer
            .iter()
            .map(|h| h.as_slice().iter().map(|x| x.abs()).sum::<f64>())
            .sum::<f64>()
}
