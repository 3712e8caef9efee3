use super::params::{BaseNetworkParams, CoupledParams, Model, Params, Tower, Transfer};
use crate::error::{Error, Result};
use crate::numerics::{affine_into, relu_scalar, sigmoid, Matrix, Vector};

/// Activations of one tower for one `(user, item)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TowerTrace {
    /// Merged embedding `[P_u, Q_i]`.
    pub input: Vec<f64>,
    /// Pre-activations per hidden layer.
    pub pre: Vec<Vec<f64>>,
    /// ReLU outputs per hidden layer.
    pub post: Vec<Vec<f64>>,
    /// Cross-stitch mixtures fed into layers `1..L` (empty otherwise).
    pub mixed: Vec<Vec<f64>>,
    pub logit: f64,
    pub prob: f64,
}

impl TowerTrace {
    /// Vector fed into the affine map of hidden layer `l`.
    pub fn layer_input(&self, l: usize) -> &[f64] {
        if l == 0 {
            &self.input
        } else if self.mixed.is_empty() {
            &self.post[l - 1]
        } else {
            &self.mixed[l - 1]
        }
    }
}

/// Everything computed by one forward pass, enough for backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub user: usize,
    pub target_item: Option<usize>,
    pub source_item: Option<usize>,
    pub target: TowerTrace,
    /// Absent for the single-tower MLP.
    pub source: Option<TowerTrace>,
}

/// `[P_u, Q_i]`. The one-hot products reduce to row selection.
pub fn embed_lookup(users: &Matrix, items: &Matrix, user: usize, item: usize) -> Result<Vector> {
    check_index("user", user, users.rows())?;
    check_index("item", item, items.rows())?;
    Ok(merged(users, items, user, Some(item)).into())
}

fn check_index(what: &str, index: usize, len: usize) -> Result<()> {
    if index >= len {
        return Err(Error::config(format!("{what} index {index} out of range ({len})")));
    }
    Ok(())
}

/// Merged embedding; a missing item contributes a zero half.
fn merged(users: &Matrix, items: &Matrix, user: usize, item: Option<usize>) -> Vec<f64> {
    let d = users.cols();
    let mut x = Vec::with_capacity(2 * d);
    x.extend_from_slice(users.row(user));
    match item {
        Some(i) => x.extend_from_slice(items.row(i)),
        None => x.resize(2 * d, 0.0),
    }
    x
}

fn layer(tower: &Tower, l: usize, input: &[f64]) -> Vec<f64> {
    let dense = &tower.layers[l];
    let mut pre = vec![0.0; dense.weight.rows()];
    affine_into(&dense.weight, &dense.bias, input, &mut pre);
    pre
}

fn activate(pre: &[f64]) -> Vec<f64> {
    pre.iter().map(|&x| relu_scalar(x)).collect()
}

fn finish(tower: &Tower, trace: &mut TowerTrace) {
    let z = trace.post.last().expect("at least one hidden layer");
    trace.logit = crate::numerics::dot(&tower.output, z);
    trace.prob = sigmoid(trace.logit);
}

fn start(tower: &Tower, users: &Matrix, user: usize, item: Option<usize>) -> TowerTrace {
    let input = merged(users, &tower.item_embedding, user, item);
    let pre0 = layer(tower, 0, &input);
    let post0 = activate(&pre0);
    TowerTrace {
        input,
        pre: vec![pre0],
        post: vec![post0],
        mixed: Vec::new(),
        logit: 0.0,
        prob: 0.0,
    }
}

/// Base network: ReLU hidden layers then a logistic output.
pub fn base_forward(params: &BaseNetworkParams, user: usize, item: usize) -> Result<(f64, ForwardTrace)> {
    check_index("user", user, params.user_embedding.rows())?;
    check_index("item", item, params.tower.item_embedding.rows())?;
    let tower = &params.tower;
    let mut t = start(tower, &params.user_embedding, user, Some(item));
    for l in 1..tower.layers.len() {
        let pre = layer(tower, l, &t.post[l - 1]);
        t.post.push(activate(&pre));
        t.pre.push(pre);
    }
    finish(tower, &mut t);
    let prob = t.prob;
    Ok((
        prob,
        ForwardTrace {
            user,
            target_item: Some(item),
            source_item: None,
            target: t,
            source: None,
        },
    ))
}

/// One cross connection unit in isolation:
/// `(W_t·a_t + b_t + H·a_s, W_s·a_s + b_s + H·a_t)`.
pub fn cross_unit(
    w_t: &Matrix,
    b_t: &[f64],
    w_s: &Matrix,
    b_s: &[f64],
    h: &Matrix,
    a_t: &[f64],
    a_s: &[f64],
) -> Result<(Vector, Vector)> {
    let ok = h.cols() == a_t.len()
        && h.cols() == a_s.len()
        && w_t.cols() == a_t.len()
        && w_s.cols() == a_s.len()
        && h.rows() == w_t.rows()
        && h.rows() == w_s.rows()
        && b_t.len() == w_t.rows()
        && b_s.len() == w_s.rows();
    if !ok {
        return Err(Error::config(format!(
            "cross unit shape mismatch: W_t {:?}, W_s {:?}, H {:?}, a_t {}, a_s {}",
            w_t.shape(),
            w_s.shape(),
            h.shape(),
            a_t.len(),
            a_s.len()
        )));
    }
    let mut pre_t = vec![0.0; w_t.rows()];
    let mut pre_s = vec![0.0; w_s.rows()];
    affine_into(w_t, b_t, a_t, &mut pre_t);
    affine_into(w_s, b_s, a_s, &mut pre_s);
    h.mul_vec_add(a_s, &mut pre_t);
    h.mul_vec_add(a_t, &mut pre_s);
    Ok((pre_t.into(), pre_s.into()))
}

/// Cross-stitch mixture `(α_S·a_A + α_D·a_B, α_S·a_B + α_D·a_A)`.
pub fn cross_stitch(alpha_self: f64, alpha_other: f64, a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mix = |x: &[f64], y: &[f64]| {
        x.iter()
            .zip(y)
            .map(|(&xi, &yi)| alpha_self * xi + alpha_other * yi)
            .collect::<Vec<_>>()
    };
    (mix(a, b), mix(b, a))
}

/// Forward pass of any two-tower model (MLP++, CSN, CoNet).
///
/// Both towers compute their first hidden layer from their own merged
/// embedding. Every later layer receives the other tower's previous
/// activations through the model's transfer units. `None` items stand for
/// users without history in that domain and give a zero item half.
pub fn coupled_forward(
    params: &CoupledParams,
    user: usize,
    target_item: Option<usize>,
    source_item: Option<usize>,
) -> Result<(f64, f64, ForwardTrace)> {
    check_index("user", user, params.user_embedding.rows())?;
    if let Some(i) = target_item {
        check_index("target item", i, params.target.item_embedding.rows())?;
    }
    if let Some(j) = source_item {
        check_index("source item", j, params.source.item_embedding.rows())?;
    }
    let (tt, st) = (&params.target, &params.source);
    let mut t = start(tt, &params.user_embedding, user, target_item);
    let mut s = start(st, params.source_users(), user, source_item);
    for l in 1..tt.layers.len() {
        let (pre_t, pre_s) = match &params.transfer {
            Transfer::None => (layer(tt, l, &t.post[l - 1]), layer(st, l, &s.post[l - 1])),
            Transfer::Cross(hs) => {
                let h = &hs[l - 1];
                let mut pre_t = layer(tt, l, &t.post[l - 1]);
                let mut pre_s = layer(st, l, &s.post[l - 1]);
                h.mul_vec_add(&s.post[l - 1], &mut pre_t);
                h.mul_vec_add(&t.post[l - 1], &mut pre_s);
                (pre_t, pre_s)
            }
            Transfer::Stitch(units) => {
                let (mt, ms) = cross_stitch(units[l - 1][0], units[l - 1][1], &t.post[l - 1], &s.post[l - 1]);
                let pre = (layer(tt, l, &mt), layer(st, l, &ms));
                t.mixed.push(mt);
                s.mixed.push(ms);
                pre
            }
        };
        t.post.push(activate(&pre_t));
        t.pre.push(pre_t);
        s.post.push(activate(&pre_s));
        s.pre.push(pre_s);
    }
    finish(tt, &mut t);
    finish(st, &mut s);
    let (pt, ps) = (t.prob, s.prob);
    Ok((
        pt,
        ps,
        ForwardTrace {
            user,
            target_item,
            source_item,
            target: t,
            source: Some(s),
        },
    ))
}

/// [`coupled_forward`] restricted to cross connection units.
pub fn conet_forward(
    params: &CoupledParams,
    user: usize,
    target_item: Option<usize>,
    source_item: Option<usize>,
) -> Result<(f64, f64, ForwardTrace)> {
    if !matches!(params.transfer, Transfer::Cross(_)) {
        return Err(Error::config("conet_forward needs cross connection units"));
    }
    coupled_forward(params, user, target_item, source_item)
}

/// [`coupled_forward`] restricted to cross-stitch units; rejects towers
/// whose hidden widths differ.
pub fn csn_forward(
    params: &CoupledParams,
    user: usize,
    target_item: Option<usize>,
    source_item: Option<usize>,
) -> Result<(f64, f64, ForwardTrace)> {
    if !matches!(params.transfer, Transfer::Stitch(_)) {
        return Err(Error::config("csn_forward needs cross-stitch units"));
    }
    for tower in [&params.target, &params.source] {
        if tower.layers.windows(2).any(|w| w[0].weight.rows() != w[1].weight.rows()) {
            return Err(Error::config(
                "cross-stitch units cannot connect layers of different widths",
            ));
        }
    }
    coupled_forward(params, user, target_item, source_item)
}

impl Model {
    /// Forward pass for any architecture. `source_item` is ignored by MLP;
    /// the returned source probability is `None` for MLP.
    pub fn forward(
        &self,
        user: usize,
        target_item: Option<usize>,
        source_item: Option<usize>,
    ) -> Result<(f64, Option<f64>, ForwardTrace)> {
        match self.params() {
            Params::Single(p) => {
                let item = target_item.ok_or_else(|| Error::config("MLP needs a target item"))?;
                let (prob, trace) = base_forward(p, user, item)?;
                Ok((prob, None, trace))
            }
            Params::Coupled(p) => {
                let (pt, ps, trace) = coupled_forward(p, user, target_item, source_item)?;
                Ok((pt, Some(ps), trace))
            }
        }
    }
}
