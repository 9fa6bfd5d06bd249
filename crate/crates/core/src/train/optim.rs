use crate::error::{Error, Result};
use crate::numerics::{Gradients, Matrix, Params};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::InvalidConfig(format!("unknown optimizer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    /// Heavy-ball momentum for SGD; zero disables it.
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            lr: 1e-4,
            momentum: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..1.0).contains(&x);
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if !unit(self.momentum) || !unit(self.beta1) || !unit(self.beta2) {
            return Err(Error::InvalidConfig(
                "momentum and betas must lie in [0, 1)".into(),
            ));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::InvalidConfig("adam epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// First-order optimizer with per-parameter state.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
    t: u64,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, params: &Params) -> Result<Self> {
        config.validate()?;
        let zeros: Vec<Matrix> = params
            .iter()
            .map(|(_, _, m)| Matrix::zeros(m.rows(), m.cols()))
            .collect();
        Ok(Self {
            config,
            second: zeros.clone(),
            first: zeros,
            t: 0,
        })
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut Params, grads: &Gradients) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradients".into()));
        }
        self.t += 1;
        let c = &self.config;
        let bias1 = 1.0 - c.beta1.powi(self.t.min(i32::MAX as u64) as i32);
        let bias2 = 1.0 - c.beta2.powi(self.t.min(i32::MAX as u64) as i32);
        for (id, g) in grads.iter() {
            let k = id.index();
            let w = params.get_mut(id).as_mut_slice();
            let g = g.as_slice();
            let m = self.first[k].as_mut_slice();
            match c.kind {
                OptimizerKind::Sgd => {
                    for i in 0..w.len() {
                        m[i] = c.momentum * m[i] + g[i];
                        w[i] -= c.lr * m[i];
                    }
                }
                OptimizerKind::Adam => {
                    let v = self.second[k].as_mut_slice();
                    for i in 0..w.len() {
                        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
                        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
                        let mh = m[i] / bias1;
                        let vh = v[i] / bias2;
                        w[i] -= c.lr * mh / (vh.sqrt() + c.eps);
                    }
                }
            }
        }
        Ok(())
    }
}
