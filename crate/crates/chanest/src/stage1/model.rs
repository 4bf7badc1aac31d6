//! Per-antenna feed-forward network.
//!
//! One network maps a frequency-domain pilot symbol (re/im concatenated,
//! `2 * N_f` reals) through two ReLU hidden layers of width `4 * N_f` to a
//! linear output of `2 * N_f` reals — the re/im parts of a per-subcarrier
//! channel estimate. The three weight matrices hold exactly `32 * N_f^2`
//! elements; biases are carried separately and excluded from that count.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{NodeId, ParamBlock, Tape, Tensor};

/// Fully-connected estimator network for one antenna.
///
/// Parameters live in one flat vector partitioned into named blocks
/// (`layer{i}.weight`, `layer{i}.bias`) so the optimizer and gradient
/// diagnostics can address them uniformly.
#[derive(Debug, Clone)]
pub struct MlpModel {
    subcarriers: usize,
    params: Vec<f64>,
    blocks: Vec<ParamBlock>,
}

/// Widths of the three dense layers for a given subcarrier count.
fn layer_dims(subcarriers: usize) -> [(usize, usize); 3] {
    let n_in = 2 * subcarriers;
    let n_hidden = 4 * subcarriers;
    [(n_hidden, n_in), (n_hidden, n_hidden), (n_in, n_hidden)]
}

fn block_layout(subcarriers: usize) -> Vec<ParamBlock> {
    let mut blocks = Vec::with_capacity(6);
    let mut offset = 0;
    for (i, (rows, cols)) in layer_dims(subcarriers).into_iter().enumerate() {
        blocks.push(ParamBlock { name: format!("layer{i}.weight"), offset, len: rows * cols });
        offset += rows * cols;
        blocks.push(ParamBlock { name: format!("layer{i}.bias"), offset, len: rows });
        offset += rows;
    }
    blocks
}

/// Shrink factor on the output layer's initial weights. A freshly
/// initialized network has a nonzero mean response over random probe
/// inputs, and the part of that response that survives training is a bias
/// shared by every antenna (they start from the same weights). Starting
/// the output layer near zero makes the untrained response — and with it
/// the surviving bias — negligible, while the hidden layers keep
/// full-scale features for training to build on.
const OUTPUT_INIT_SCALE: f64 = 0.1;

impl MlpModel {
    /// Fresh network with uniform `±sqrt(6 / (fan_in + fan_out))` weights
    /// (output layer shrunk by [`OUTPUT_INIT_SCALE`]) and zero biases,
    /// drawn in a fixed block order from `rng`.
    pub fn new_random(subcarriers: usize, rng: &mut impl Rng) -> Result<Self> {
        if subcarriers == 0 {
            return Err(Error::InvalidConfig("network needs at least one subcarrier".into()));
        }
        let blocks = block_layout(subcarriers);
        let total: usize = blocks.iter().map(|b| b.len).sum();
        let mut params = vec![0.0; total];
        for (i, (rows, cols)) in layer_dims(subcarriers).into_iter().enumerate() {
            let mut limit = (6.0 / (rows + cols) as f64).sqrt();
            if i == 2 {
                limit *= OUTPUT_INIT_SCALE;
            }
            let block = &blocks[2 * i];
            for w in &mut params[block.offset..block.offset + block.len] {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(Self { subcarriers, params, blocks })
    }

    /// Network with every parameter zero (outputs are the output bias).
    pub fn zeroed(subcarriers: usize) -> Result<Self> {
        if subcarriers == 0 {
            return Err(Error::InvalidConfig("network needs at least one subcarrier".into()));
        }
        let blocks = block_layout(subcarriers);
        let total: usize = blocks.iter().map(|b| b.len).sum();
        Ok(Self { subcarriers, params: vec![0.0; total], blocks })
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    /// Total elements across the three weight matrices (biases excluded);
    /// always `32 * subcarriers^2`.
    pub fn weight_count(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| b.name.ends_with(".weight"))
            .map(|b| b.len)
            .sum()
    }

    pub fn param_blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn block_tensor(&self, index: usize) -> Tensor {
        let b = &self.blocks[index];
        let data = self.params[b.offset..b.offset + b.len].to_vec();
        let layer = index / 2;
        let (rows, cols) = layer_dims(self.subcarriers)[layer];
        if index % 2 == 0 {
            Tensor::new(rows, cols, data).expect("block layout matches layer dims")
        } else {
            Tensor::new(rows, 1, data).expect("bias layout matches layer dims")
        }
    }

    /// Records the batched forward pass on a tape and returns the output
    /// node plus the parameter nodes in block order (for gradient readout).
    pub fn forward_on_tape(
        &self,
        tape: &mut Tape,
        input: NodeId,
    ) -> Result<(NodeId, Vec<NodeId>)> {
        let mut param_nodes = Vec::with_capacity(6);
        for i in 0..6 {
            let name = self.blocks[i].name.clone();
            param_nodes.push(tape.param(name, self.block_tensor(i)));
        }
        let mut h = input;
        for layer in 0..3 {
            let z = tape.matmul(param_nodes[2 * layer], h)?;
            let z = tape.add_bias(z, param_nodes[2 * layer + 1])?;
            h = if layer < 2 { tape.relu(z) } else { z };
        }
        Ok((h, param_nodes))
    }

    /// Inference-only batched forward pass: columns are independent inputs.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        if input.rows() != 2 * self.subcarriers {
            return Err(Error::DimMismatch(format!(
                "network expects {} input rows, got {}",
                2 * self.subcarriers,
                input.rows()
            )));
        }
        let mut tape = Tape::new();
        let x = tape.constant(input.clone());
        let (out, _) = self.forward_on_tape(&mut tape, x)?;
        Ok(tape.value(out).clone())
    }
}
