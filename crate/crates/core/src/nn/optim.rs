use serde::{Deserialize, Serialize};

use crate::error::{param_err, shape_err, Result};
use crate::nn::network::{Gradients, NetworkState};
use crate::nn::spec::Scale;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            momentum: 0.9,
            batch_size: 128,
        }
    }
}

impl HyperParams {
    /// Larger steps and smaller batches so desk runs learn in tens of epochs.
    pub fn desk() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 32,
        }
    }

    pub fn for_scale(scale: Scale) -> Self {
        match scale {
            Scale::Full => Self::default(),
            Scale::Desk => Self::desk(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return param_err(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return param_err(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if self.batch_size == 0 {
            return param_err("batch size must be positive");
        }
        Ok(())
    }
}

/// Classical momentum: `v <- momentum * v - lr * g; p <- p + v`.
pub fn sgd_momentum_step(net: &mut NetworkState, grads: &Gradients, hyper: &HyperParams) -> Result<()> {
    hyper.validate()?;
    let (params, velocities) = net.params_and_velocities_mut();
    if grads.0.len() != params.len() {
        return shape_err("gradient list does not match layer count");
    }
    for (layer, ((p, v), g)) in params.iter().zip(velocities.iter()).zip(&grads.0).enumerate() {
        if p.len() != g.len() || p.iter().zip(g).any(|(a, b)| a.shape() != b.shape()) {
            return shape_err(format!("gradient shapes do not match parameters of layer {layer}"));
        }
        debug_assert_eq!(p.len(), v.len());
    }
    for ((p, v), g) in params.iter_mut().zip(velocities.iter_mut()).zip(&grads.0) {
        for ((pt, vt), gt) in p.iter_mut().zip(v.iter_mut()).zip(g) {
            for ((pv, vv), &gv) in pt.data_mut().iter_mut().zip(vt.data_mut()).zip(gt.data()) {
                *vv = hyper.momentum * *vv - hyper.learning_rate * gv;
                *pv += *vv;
            }
        }
    }
    Ok(())
}
