//! Hand-derived gradients of the per-domain cross-entropy for every
//! architecture.
//!
//! The loss of one example is `softplus(z) − r·z` with `z` the output
//! logit, so `∂loss/∂z = r̂ − r`. Deltas flow down each tower through the
//! ReLU masks; transfer units route them across towers in both directions,
//! and the shared user table collects contributions from both towers.

use super::forward::{ForwardTrace, TowerTrace};
use super::params::{CoupledParams, Model, Params, Tower, Transfer};
use crate::error::{Error, Result};
use crate::numerics::{dot, Matrix};
use crate::training::logit_cross_entropy;

/// Optional label per output. A missing label contributes no loss.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Labels {
    pub target: Option<f64>,
    pub source: Option<f64>,
}

impl Labels {
    pub fn target(r: f64) -> Self {
        Self {
            target: Some(r),
            source: None,
        }
    }

    pub fn source(r: f64) -> Self {
        Self {
            target: None,
            source: Some(r),
        }
    }

    pub fn both(target: f64, source: f64) -> Self {
        Self {
            target: Some(target),
            source: Some(source),
        }
    }
}

/// Per-domain loss of one example.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExampleLoss {
    pub target: f64,
    pub source: f64,
}

/// Smooth loss of one example: the sum of the labeled outputs'
/// cross-entropies (no ℓ1 term).
pub fn example_loss(trace: &ForwardTrace, labels: Labels) -> ExampleLoss {
    let mut loss = ExampleLoss::default();
    if let Some(r) = labels.target {
        loss.target = logit_cross_entropy(trace.target.logit, r);
    }
    if let (Some(r), Some(s)) = (labels.source, &trace.source) {
        loss.source = logit_cross_entropy(s.logit, r);
    }
    loss
}

/// Gradients of the labeled outputs' cross-entropy for one example.
pub fn backward(model: &Model, trace: &ForwardTrace, labels: Labels) -> Result<Model> {
    let mut grads = model.zeros_like();
    backward_into(model, trace, labels, &mut grads)?;
    Ok(grads)
}

/// Adds one example's gradients into `grads` and returns its loss.
pub fn backward_into(
    model: &Model,
    trace: &ForwardTrace,
    labels: Labels,
    grads: &mut Model,
) -> Result<ExampleLoss> {
    let loss = example_loss(trace, labels);
    match (model.params(), grads.params_mut()) {
        (Params::Single(p), Params::Single(g)) => {
            if trace.source.is_some() || labels.source.is_some() {
                return Err(Error::config("MLP trace/labels carry a source tower"));
            }
            let r = labels.target.ok_or_else(|| Error::config("MLP example needs a target label"))?;
            let delta = trace.target.prob - r;
            let mut up = tower_top(&p.tower, &mut g.tower, &trace.target, delta);
            for l in (0..p.tower.layers.len()).rev() {
                let down = layer_back(&p.tower, &mut g.tower, &trace.target, l, &up);
                if l == 0 {
                    scatter_input(&down, &mut g.user_embedding, &mut g.tower.item_embedding, trace.user, trace.target_item);
                } else {
                    up = down;
                }
            }
        }
        (Params::Coupled(p), Params::Coupled(g)) => {
            let source = trace
                .source
                .as_ref()
                .ok_or_else(|| Error::config("coupled model needs a two-tower trace"))?;
            coupled_backward(p, g, trace, source, labels);
        }
        _ => return Err(Error::config("trace and parameters belong to different architectures")),
    }
    Ok(loss)
}

/// Output layer: gradient of `h` and the delta w.r.t. the last activation.
fn tower_top(tower: &Tower, grad: &mut Tower, trace: &TowerTrace, delta_logit: f64) -> Vec<f64> {
    let last = trace.post.last().expect("hidden layers");
    for (g, &a) in grad.output.iter_mut().zip(last) {
        *g += delta_logit * a;
    }
    tower.output.iter().map(|&h| delta_logit * h).collect()
}

/// Backpropagates `up` (gradient w.r.t. the post-activation of layer `l`)
/// through the ReLU and affine map of layer `l`. Accumulates the weight
/// and bias gradients and returns the gradient w.r.t. the layer's input.
/// `dz` receives the pre-activation delta.
fn layer_back_with_delta(
    tower: &Tower,
    grad: &mut Tower,
    trace: &TowerTrace,
    l: usize,
    up: &[f64],
    dz: &mut Vec<f64>,
) -> Vec<f64> {
    dz.clear();
    dz.extend(
        up.iter()
            .zip(&trace.pre[l])
            .map(|(&g, &z)| if z > 0.0 { g } else { 0.0 }),
    );
    let input = trace.layer_input(l);
    let gl = &mut grad.layers[l];
    gl.weight.add_outer(dz, input);
    for (b, &d) in gl.bias.iter_mut().zip(dz.iter()) {
        *b += d;
    }
    let mut down = vec![0.0; input.len()];
    tower.layers[l].weight.mul_vec_transposed_add(dz, &mut down);
    down
}

fn layer_back(tower: &Tower, grad: &mut Tower, trace: &TowerTrace, l: usize, up: &[f64]) -> Vec<f64> {
    let mut dz = Vec::new();
    layer_back_with_delta(tower, grad, trace, l, up, &mut dz)
}

/// Splits the merged-input gradient into the user row and item row.
fn scatter_input(down: &[f64], users: &mut Matrix, items: &mut Matrix, user: usize, item: Option<usize>) {
    let d = users.cols();
    for (g, &v) in users.row_mut(user).iter_mut().zip(&down[..d]) {
        *g += v;
    }
    if let Some(i) = item {
        for (g, &v) in items.row_mut(i).iter_mut().zip(&down[d..]) {
            *g += v;
        }
    }
}

fn coupled_backward(
    p: &CoupledParams,
    g: &mut CoupledParams,
    trace: &ForwardTrace,
    s_trace: &TowerTrace,
    labels: Labels,
) {
    let t_trace = &trace.target;
    let delta_t = labels.target.map_or(0.0, |r| t_trace.prob - r);
    let delta_s = labels.source.map_or(0.0, |r| s_trace.prob - r);
    let independent = matches!(p.transfer, Transfer::None);
    let run_t = delta_t != 0.0 || !independent;
    let run_s = delta_s != 0.0 || !independent;

    let mut up_t = tower_top(&p.target, &mut g.target, t_trace, delta_t);
    let mut up_s = tower_top(&p.source, &mut g.source, s_trace, delta_s);
    let (mut dz_t, mut dz_s) = (Vec::new(), Vec::new());
    for l in (0..p.target.layers.len()).rev() {
        let down_t = if run_t {
            layer_back_with_delta(&p.target, &mut g.target, t_trace, l, &up_t, &mut dz_t)
        } else {
            Vec::new()
        };
        let down_s = if run_s {
            layer_back_with_delta(&p.source, &mut g.source, s_trace, l, &up_s, &mut dz_s)
        } else {
            Vec::new()
        };
        if l == 0 {
            if run_t {
                scatter_input(&down_t, &mut g.user_embedding, &mut g.target.item_embedding, trace.user, trace.target_item);
            }
            if run_s {
                let users = g.source_user_embedding.as_mut().unwrap_or(&mut g.user_embedding);
                scatter_input(&down_s, users, &mut g.source.item_embedding, trace.user, trace.source_item);
            }
            break;
        }
        let (a_t, a_s) = (&t_trace.post[l - 1], &s_trace.post[l - 1]);
        match (&p.transfer, &mut g.transfer) {
            (Transfer::None, Transfer::None) => {
                up_t = down_t;
                up_s = down_s;
            }
            (Transfer::Cross(hs), Transfer::Cross(ghs)) => {
                // pre_t = W_t a_t + b_t + H a_s ;  pre_s = W_s a_s + b_s + H a_t
                let (h, gh) = (&hs[l - 1], &mut ghs[l - 1]);
                gh.add_outer(&dz_t, a_s);
                gh.add_outer(&dz_s, a_t);
                up_t = down_t;
                up_s = down_s;
                h.mul_vec_transposed_add(&dz_s, &mut up_t);
                h.mul_vec_transposed_add(&dz_t, &mut up_s);
            }
            (Transfer::Stitch(units), Transfer::Stitch(gunits)) => {
                // mixed_t = αS a_t + αD a_s ;  mixed_s = αS a_s + αD a_t
                let (alpha_self, alpha_other) = (units[l - 1][0], units[l - 1][1]);
                let ga = &mut gunits[l - 1];
                ga[0] += dot(&down_t, a_t) + dot(&down_s, a_s);
                ga[1] += dot(&down_t, a_s) + dot(&down_s, a_t);
                up_t = down_t
                    .iter()
                    .zip(&down_s)
                    .map(|(&dt, &ds)| alpha_self * dt + alpha_other * ds)
                    .collect();
                up_s = down_s
                    .iter()
                    .zip(&down_t)
                    .map(|(&ds, &dt)| alpha_self * ds + alpha_other * dt)
                    .collect();
            }
            _ => unreachable!("gradient set mirrors parameters"),
        }
    }
}
