use serde::{Deserialize, Serialize};

use super::{named_params, Parameterized};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: Some(5.0),
        }
    }
}

impl OptimizerConfig {
    pub fn sgd(lr: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Sgd,
            lr,
            clip_norm: None,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr.is_finite()
            && self.lr >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.clip_norm.is_none_or(|c| c > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
    step_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub grad_norm: f64,
    pub clipped: bool,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig) -> Self {
        OptimizerState {
            config,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Applies one update in place. Non-finite gradients reject the whole
    /// step before any parameter is touched.
    pub fn step<P: Parameterized>(&mut self, params: &mut P, grads: &P) -> Result<StepReport> {
        let grads = named_params(grads);
        for (name, g) in &grads {
            if !g.all_finite() {
                return Err(Error::NonFiniteGradient(name.clone()));
            }
        }
        let shapes: Vec<usize> = grads.iter().map(|(_, g)| g.len()).collect();
        let mut param_shapes = Vec::new();
        params.visit_params("", &mut |_, t| param_shapes.push(t.len()));
        if shapes != param_shapes {
            return Err(Error::shape(
                "optimizer_step",
                format!("{param_shapes:?}"),
                format!("{shapes:?}"),
            ));
        }
        if self.config.kind == OptimizerKind::Adam {
            if self.first_moment.is_empty() {
                self.first_moment = shapes.iter().map(|&n| vec![0.0; n]).collect();
                self.second_moment = self.first_moment.clone();
            } else {
                let buffers: Vec<usize> = self.first_moment.iter().map(Vec::len).collect();
                if buffers != shapes {
                    return Err(Error::shape(
                        "optimizer_step moment buffers",
                        format!("{buffers:?}"),
                        format!("{shapes:?}"),
                    ));
                }
            }
        }

        let grad_norm = grads.iter().map(|(_, g)| g.sum_squares()).sum::<f64>().sqrt();
        let (scale, clipped) = match self.config.clip_norm {
            Some(max) if grad_norm > max => (max / grad_norm, true),
            _ => (1.0, false),
        };

        self.step_count += 1;
        let cfg = self.config.clone();
        let t = self.step_count as i32;
        let bias1 = 1.0 - cfg.beta1.powi(t);
        let bias2 = 1.0 - cfg.beta2.powi(t);
        let mut idx = 0;
        let m_all = &mut self.first_moment;
        let v_all = &mut self.second_moment;
        params.visit_params_mut("", &mut |_, p| {
            let g = grads[idx].1.as_slice();
            match cfg.kind {
                OptimizerKind::Sgd => {
                    for (w, &gi) in p.as_mut_slice().iter_mut().zip(g) {
                        *w -= cfg.lr * scale * gi;
                    }
                }
                OptimizerKind::Adam => {
                    let m = &mut m_all[idx];
                    let v = &mut v_all[idx];
                    for (k, w) in p.as_mut_slice().iter_mut().enumerate() {
                        let gi = g[k] * scale;
                        m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gi;
                        v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gi * gi;
                        let m_hat = m[k] / bias1;
                        let v_hat = v[k] / bias2;
                        *w -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
                    }
                }
            }
            idx += 1;
        });
        Ok(StepReport { grad_norm, clipped })
    }
}
