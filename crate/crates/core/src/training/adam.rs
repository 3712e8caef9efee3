use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{BlockInfo, Group, Model};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moments per parameter block plus step counters.
///
/// `t` counts every optimizer step. Bias correction uses the number of
/// steps that actually touched a block's group, so a block updated only by
/// target batches sees the same correction schedule whether or not source
/// batches are interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub t: u64,
    group_steps: [u64; 3],
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(model: &Model) -> Self {
        let sizes: Vec<usize> = model.blocks().iter().map(|(_, b)| b.len()).collect();
        Self {
            t: 0,
            group_steps: [0; 3],
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn group_steps(&self, group: Group) -> u64 {
        self.group_steps[group.index()]
    }
}

/// Which blocks one optimizer step updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepScope {
    pub groups: [bool; 3],
    /// Leave transfer matrices untouched.
    pub freeze_transfer: bool,
    /// Multiplies every gradient (e.g. `1/batch` for mean losses).
    pub grad_scale: f64,
}

impl StepScope {
    pub fn all() -> Self {
        Self {
            groups: [true; 3],
            freeze_transfer: false,
            grad_scale: 1.0,
        }
    }

    pub fn includes(&self, info: &BlockInfo) -> bool {
        self.groups[info.group.index()] && !(self.freeze_transfer && info.name.starts_with("transfer"))
    }
}

/// Bias-corrected Adam update of one block at step `step` (1-based).
pub fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    step: u64,
    config: &AdamConfig,
    grad_scale: f64,
) {
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = *config;
    let c1 = 1.0 - beta1.powf(step as f64);
    let c2 = 1.0 - beta2.powf(step as f64);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        let g = g * grad_scale;
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
    }
}

/// One Adam step over the blocks selected by `scope`.
pub fn adam_step(
    model: &mut Model,
    grads: &Model,
    state: &mut AdamState,
    config: &AdamConfig,
    scope: StepScope,
) -> Result<()> {
    let grad_blocks = grads.blocks();
    let mut param_blocks = model.blocks_mut();
    if grad_blocks.len() != param_blocks.len() || state.m.len() != param_blocks.len() {
        return Err(Error::config("gradient/optimizer state does not match the parameter set"));
    }
    state.t += 1;
    for (g, on) in state.group_steps.iter_mut().zip(scope.groups) {
        if on {
            *g += 1;
        }
    }
    for (k, ((info, p), (ginfo, g))) in param_blocks.iter_mut().zip(&grad_blocks).enumerate() {
        if info.rows != ginfo.rows || info.cols != ginfo.cols {
            return Err(Error::config(format!("gradient block {} has the wrong shape", ginfo.name)));
        }
        if !scope.includes(info) {
            continue;
        }
        let step = state.group_steps[info.group.index()];
        adam_update(p, g, &mut state.m[k], &mut state.v[k], step, config, scope.grad_scale);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut p = vec![0.3, -1.2];
        let (mut m, mut v) = (vec![0.0; 2], vec![0.0; 2]);
        adam_update(&mut p, &[0.0, 0.0], &mut m, &mut v, 1, &AdamConfig::default(), 1.0);
        assert_eq!(p, vec![0.3, -1.2]);
    }

    #[test]
    fn first_step_closed_form() {
        let cfg = AdamConfig::default();
        let mut p = vec![1.0];
        let (mut m, mut v) = (vec![0.0], vec![0.0]);
        adam_update(&mut p, &[1.0], &mut m, &mut v, 1, &cfg, 1.0);
        assert!((p[0] - 0.999).abs() < 1e-6);
        // m̂ = g, v̂ = g² on the first step
        let expected = 1.0 - 0.001 * 1.0 / (1.0f64.sqrt() + 1e-8);
        assert!((p[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn two_steps_match_hand_evaluation() {
        let cfg = AdamConfig::default();
        let mut p = vec![0.5];
        let (mut m, mut v) = (vec![0.0], vec![0.0]);
        adam_update(&mut p, &[2.0], &mut m, &mut v, 1, &cfg, 1.0);
        adam_update(&mut p, &[-1.0], &mut m, &mut v, 2, &cfg, 1.0);
        // m₂ = 0.9·0.2 − 0.1 = 0.08, v₂ = 0.999·0.004 + 0.001 = 0.004996
        let step1 = 0.001 * 2.0 / (2.0 + 1e-8);
        let m_hat = 0.08 / (1.0 - 0.81);
        let v_hat = 0.004996 / (1.0 - 0.999f64 * 0.999);
        let step2 = 0.001 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((p[0] - (0.5 - step1 - step2)).abs() < 1e-12);
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = vec![0.1, 0.2, 0.3];
            let (mut m, mut v) = (vec![0.0; 3], vec![0.0; 3]);
            for s in 1..=10 {
                let g: Vec<f64> = p.iter().map(|x| x * x - 0.05 * s as f64).collect();
                adam_update(&mut p, &g, &mut m, &mut v, s, &AdamConfig::default(), 0.5);
            }
            p
        };
        assert_eq!(run(), run());
    }
}
