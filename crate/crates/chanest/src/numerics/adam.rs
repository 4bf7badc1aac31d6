//! Adam optimizer over a flat parameter vector.
//!
//! Models store their parameters as one contiguous `Vec<f64>` partitioned
//! into named blocks (for example `layer0.weight`, `layer0.bias`). The
//! optimizer only sees the flat vector; block names exist so that a
//! non-finite gradient can be reported against the block that produced it
//! instead of a bare flat index.

use crate::error::{Error, Result};

/// Contiguous slice of the flat parameter vector with a diagnostic name.
#[derive(Debug, Clone)]
pub struct ParamBlock {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Per-parameter first/second moment state for Adam.
#[derive(Debug)]
pub struct OptimizerState {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
    blocks: Vec<ParamBlock>,
}

impl OptimizerState {
    /// Standard Adam coefficients: beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
    pub fn new(lr: f64, blocks: Vec<ParamBlock>) -> Self {
        let total = blocks.iter().map(|b| b.len).sum();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; total],
            v: vec![0.0; total],
            blocks,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// One bias-corrected Adam update. Rejects non-finite gradients before
    /// touching any state, naming the parameter block at fault.
    pub fn apply(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::DimMismatch(format!(
                "optimizer holds {} parameters, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        if let Some(flat) = grads.iter().position(|g| !g.is_finite()) {
            let (block, index) = self.locate(flat);
            return Err(Error::NonFiniteGradient { block, index });
        }

        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }

    fn locate(&self, flat: usize) -> (String, usize) {
        for b in &self.blocks {
            if flat >= b.offset && flat < b.offset + b.len {
                return (b.name.clone(), flat - b.offset);
            }
        }
        ("<unnamed>".into(), flat)
    }
}
