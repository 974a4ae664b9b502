//! ADAM optimization with bias correction and a step-halving learning-rate
//! schedule, plus the MSE training step.

use crate::error::{Error, Result};
use crate::nn::network::{Gradients, Network};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamParams {
    /// Initial learning rate.
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
    /// The learning rate halves after every this many updates; 0 disables
    /// the schedule.
    pub lr_halve_every: u64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            lr_halve_every: 100_000,
        }
    }
}

/// Per-parameter first and second moments plus the update counter.
pub struct AdamState {
    t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    pub hyper: AdamParams,
}

impl AdamState {
    pub fn new(net: &Network, hyper: AdamParams) -> Self {
        let m = net.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
        let v = net.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
        AdamState { t: 0, m, v, hyper }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Learning rate the next update will use: the base rate halved once per
    /// completed `lr_halve_every` updates.
    pub fn current_lr(&self) -> f32 {
        if self.hyper.lr_halve_every == 0 {
            return self.hyper.lr;
        }
        let halvings = self.t / self.hyper.lr_halve_every;
        self.hyper.lr * 0.5f32.powi(halvings.min(127) as i32)
    }

    /// One bias-corrected ADAM update.
    pub fn apply(&mut self, net: &mut Network, grads: &Gradients<f32>) -> Result<()> {
        let mut params = net.params_mut();
        if params.len() != grads.tensors().len() || params.len() != self.m.len() {
            return Err(Error::shape(
                "optimizer state does not match the network".to_string(),
            ));
        }
        let lr = self.current_lr();
        self.t += 1;
        let b1 = self.hyper.beta1;
        let b2 = self.hyper.beta2;
        let corr1 = 1.0 - (b1 as f64).powi(self.t.min(i32::MAX as u64) as i32) as f32;
        let corr2 = 1.0 - (b2 as f64).powi(self.t.min(i32::MAX as u64) as i32) as f32;
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads.tensors())
            .zip(self.m.iter_mut().zip(&mut self.v))
        {
            let pd = p.data_mut();
            let gd = g.data();
            let md = m.data_mut();
            let vd = v.data_mut();
            for i in 0..pd.len() {
                md[i] = b1 * md[i] + (1.0 - b1) * gd[i];
                vd[i] = b2 * vd[i] + (1.0 - b2) * gd[i] * gd[i];
                let m_hat = md[i] / corr1;
                let v_hat = vd[i] / corr2;
                pd[i] -= lr * m_hat / (v_hat.sqrt() + self.hyper.epsilon);
            }
        }
        Ok(())
    }
}

/// Runs one mini-batch update: MSE loss over the batch in the `[0, 1]`
/// domain, exact gradients, one ADAM step. Returns the batch loss.
pub fn train_step(
    net: &mut Network,
    batch: &[(Tensor, Tensor)],
    adam: &mut AdamState,
) -> Result<f32> {
    if batch.is_empty() {
        return Err(Error::arg("empty training batch".to_string()));
    }
    let inv_batch = 1.0 / batch.len() as f32;
    let mut total: Option<Gradients<f32>> = None;
    let mut loss = 0.0f32;
    for (input, target) in batch {
        let (y, cache) = net.forward_cached(input)?;
        if y.shape() != target.shape() {
            return Err(Error::shape(format!(
                "network output {:?} vs target {:?}",
                y.shape(),
                target.shape()
            )));
        }
        let n = y.len() as f32;
        let mut sq = 0.0f32;
        let grad_data: Vec<f32> = y
            .data()
            .iter()
            .zip(target.data())
            .map(|(&a, &b)| {
                let r = a - b;
                sq += r * r;
                2.0 * r / n * inv_batch
            })
            .collect();
        loss += sq / n * inv_batch;
        let grad_y = Tensor::from_parts(y.shape().to_vec(), grad_data);
        let (grads, _) = net.backward(&cache, &grad_y)?;
        match &mut total {
            Some(t) => t.add_assign(&grads)?,
            None => total = Some(grads),
        }
    }
    adam.apply(net, &total.expect("non-empty batch"))?;
    Ok(loss)
}
