use serde::{Deserialize, Serialize};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
pub const ADAMW_DEFAULT_WEIGHT_DECAY: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    /// Adam with decoupled weight decay.
    Adamw,
}

/// Adam / AdamW state over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    kind: OptimizerKind,
    weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(kind: OptimizerKind, weight_decay: f64, len: usize) -> Self {
        Self { kind, weight_decay, m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t);
        for i in 0..params.len() {
            if self.kind == OptimizerKind::Adamw {
                params[i] -= lr * self.weight_decay * params[i];
            }
            let g = grads[i];
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g;
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchedulerConfig {
    None,
    /// Multiply the rate by `gamma` every `step_size` epochs.
    Step { step_size: usize, gamma: f64 },
    /// Multiply the rate by `factor` once the monitored loss has not improved
    /// (relative threshold) for more than `patience` epochs.
    Plateau {
        #[serde(default = "plateau_factor")]
        factor: f64,
        #[serde(default = "plateau_patience")]
        patience: usize,
        #[serde(default = "plateau_threshold")]
        threshold: f64,
        #[serde(default)]
        min_lr: f64,
    },
}

fn plateau_factor() -> f64 {
    0.1
}
fn plateau_patience() -> usize {
    10
}
fn plateau_threshold() -> f64 {
    1e-4
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig::None
    }
}

#[derive(Debug, Clone)]
pub struct Scheduler {
    config: SchedulerConfig,
    lr: f64,
    epoch: usize,
    best: f64,
    bad_epochs: usize,
}

impl Scheduler {
    pub fn new(config: SchedulerConfig, lr: f64) -> Self {
        Self { config, lr, epoch: 0, best: f64::INFINITY, bad_epochs: 0 }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Called once at the end of each epoch with the monitored loss.
    pub fn step(&mut self, monitored: f64) {
        self.epoch += 1;
        match self.config {
            SchedulerConfig::None => {}
            SchedulerConfig::Step { step_size, gamma } => {
                if step_size > 0 && self.epoch % step_size == 0 {
                    self.lr *= gamma;
                }
            }
            SchedulerConfig::Plateau { factor, patience, threshold, min_lr } => {
                if monitored < self.best * (1.0 - threshold) {
                    self.best = monitored;
                    self.bad_epochs = 0;
                } else {
                    self.bad_epochs += 1;
                    if self.bad_epochs > patience {
                        self.lr = (self.lr * factor).max(min_lr);
                        self.bad_epochs = 0;
                    }
                }
            }
        }
    }
}
