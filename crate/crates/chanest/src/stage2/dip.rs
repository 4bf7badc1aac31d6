//! The denoiser network and its fitting loop.
//!
//! The network expands a fixed random coarse grid to the full
//! frequency-time resolution: each hidden layer applies a shared 1x1
//! convolution (a matrix acting on the channel axis at every grid
//! position), doubles both spatial axes by bilinear upsampling (except the
//! last hidden layer), and applies ReLU then batch normalization over grid
//! positions. A final bare 1x1 convolution maps to `2 * antennas` output
//! channels holding re/im parts. Fitting minimizes the plain squared error
//! against the replicated target grid; the input grid stays frozen.

use rand::Rng;

use super::{ChannelTensor, DipConfig, GridSource};
use crate::error::{Error, Result};
use crate::numerics::{NodeId, OptimizerState, ParamBlock, Tape, Tensor};

const BN_EPS: f64 = 1e-5;

/// Denoiser network: frozen input grid plus trainable per-layer kernels,
/// biases, and batch-norm parameters in one flat block-addressed vector.
#[derive(Debug, Clone)]
pub struct DipModel {
    subcarriers: usize,
    antennas: usize,
    z0_freq: usize,
    z0_time: usize,
    widths: Vec<usize>,
    z0: Tensor,
    params: Vec<f64>,
    blocks: Vec<ParamBlock>,
}

impl DipModel {
    /// Builds and randomly initializes a network for the given output size.
    ///
    /// Draw order is fixed: first the input grid (uniform on [0, 0.1]),
    /// then each layer's kernel (uniform Glorot bounds). Biases start at
    /// zero, batch-norm scales at one, shifts at zero.
    pub fn new(
        cfg: &DipConfig,
        subcarriers: usize,
        antennas: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        cfg.validate(subcarriers, antennas)?;
        let (z0_freq, z0_time) = cfg.z0_dims(subcarriers)?;

        let mut z0 = Tensor::zeros(cfg.z0_channels, z0_freq * z0_time);
        for v in z0.data_mut() {
            *v = rng.random_range(0.0..0.1);
        }

        let mut blocks = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, len: usize, blocks: &mut Vec<ParamBlock>| {
            blocks.push(ParamBlock { name, offset, len });
            offset += len;
        };
        let mut in_ch = cfg.z0_channels;
        for (i, &out_ch) in cfg.hidden_widths.iter().enumerate() {
            push(format!("hidden{i}.conv.weight"), out_ch * in_ch, &mut blocks);
            push(format!("hidden{i}.conv.bias"), out_ch, &mut blocks);
            push(format!("hidden{i}.bn.scale"), out_ch, &mut blocks);
            push(format!("hidden{i}.bn.shift"), out_ch, &mut blocks);
            in_ch = out_ch;
        }
        push("output.conv.weight".into(), 2 * antennas * in_ch, &mut blocks);
        push("output.conv.bias".into(), 2 * antennas, &mut blocks);

        let total: usize = blocks.iter().map(|b| b.len).sum();
        let mut params = vec![0.0; total];
        for block in &blocks {
            let slice = &mut params[block.offset..block.offset + block.len];
            if block.name.ends_with("conv.weight") {
                let (out_ch, in_ch) = kernel_dims(cfg, antennas, &block.name);
                let limit = (6.0 / (out_ch + in_ch) as f64).sqrt();
                for w in slice {
                    *w = rng.random_range(-limit..limit);
                }
            } else if block.name.ends_with("bn.scale") {
                slice.fill(1.0);
            }
        }

        Ok(Self {
            subcarriers,
            antennas,
            z0_freq,
            z0_time,
            widths: cfg.hidden_widths.clone(),
            z0,
            params,
            blocks,
        })
    }

    pub fn z0(&self) -> &Tensor {
        &self.z0
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// Final time-axis length implied by the geometry.
    pub fn time_size(&self) -> usize {
        self.z0_time << (self.widths.len() - 1)
    }

    /// Materializes a named block as a tensor with its layer shape.
    pub fn block_tensor(&self, name: &str) -> Result<Tensor> {
        let block = self
            .blocks
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| Error::IndexOutOfRange(format!("no parameter block {name:?}")))?;
        let data = self.params[block.offset..block.offset + block.len].to_vec();
        if name.ends_with("conv.weight") {
            let out_ch = self.weight_out_channels(name);
            Tensor::new(out_ch, block.len / out_ch, data)
        } else {
            Tensor::new(block.len, 1, data)
        }
    }

    fn weight_out_channels(&self, name: &str) -> usize {
        if name == "output.conv.weight" {
            2 * self.antennas
        } else {
            let i: usize = name["hidden".len()..name.find('.').unwrap()].parse().unwrap();
            self.widths[i]
        }
    }

    /// Records the full forward pass; returns the output-grid node and the
    /// parameter nodes in block order.
    pub fn forward_on_tape(&self, tape: &mut Tape) -> Result<(NodeId, Vec<NodeId>)> {
        let mut param_nodes = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let t = self.block_tensor(&block.name)?;
            param_nodes.push(tape.param(block.name.clone(), t));
        }

        let mut h = tape.constant(self.z0.clone());
        let (mut f, mut t) = (self.z0_freq, self.z0_time);
        let depth = self.widths.len();
        for i in 0..depth {
            let base = 4 * i;
            h = tape.matmul(param_nodes[base], h)?;
            h = tape.add_bias(h, param_nodes[base + 1])?;
            if i + 1 < depth {
                h = tape.upsample2x(h, f, t)?;
                f *= 2;
                t *= 2;
            }
            h = tape.relu(h);
            h = tape.batch_norm(h, param_nodes[base + 2], param_nodes[base + 3], BN_EPS)?;
        }
        let out = tape.matmul(param_nodes[4 * depth], h)?;
        let out = tape.add_bias(out, param_nodes[4 * depth + 1])?;
        Ok((out, param_nodes))
    }

    /// Inference pass producing the complex output grid.
    pub fn forward(&self) -> Result<ChannelTensor> {
        let mut tape = Tape::new();
        let (out, _) = self.forward_on_tape(&mut tape)?;
        ChannelTensor::from_grid(
            tape.value(out).clone(),
            self.subcarriers,
            self.time_size(),
            self.antennas,
            GridSource::Fitted,
        )
    }
}

fn kernel_dims(cfg: &DipConfig, antennas: usize, name: &str) -> (usize, usize) {
    if name == "output.conv.weight" {
        let last = *cfg.hidden_widths.last().expect("validated non-empty");
        return (2 * antennas, last);
    }
    let i: usize = name["hidden".len()..name.find('.').unwrap()].parse().unwrap();
    let in_ch = if i == 0 { cfg.z0_channels } else { cfg.hidden_widths[i - 1] };
    (cfg.hidden_widths[i], in_ch)
}

/// Fits the network to a target grid for the configured iteration budget.
///
/// Returns the fitted model and the loss trace (summed squared error per
/// iteration). A non-finite loss aborts with the iteration index; the
/// frozen input grid is untouched throughout.
pub fn dip_fit(
    mut model: DipModel,
    target: &ChannelTensor,
    cfg: &DipConfig,
) -> Result<(DipModel, Vec<f64>)> {
    if target.subcarriers() != model.subcarriers
        || target.antennas() != model.antennas
        || target.time() != model.time_size()
    {
        return Err(Error::DimMismatch(format!(
            "target {}x{}x{} against network output {}x{}x{}",
            target.subcarriers(),
            target.time(),
            target.antennas(),
            model.subcarriers,
            model.time_size(),
            model.antennas
        )));
    }
    let mut opt = OptimizerState::new(cfg.lr, model.blocks.clone());
    let mut trace = Vec::with_capacity(cfg.iterations);

    for iteration in 0..cfg.iterations {
        let mut tape = Tape::new();
        let (out, param_nodes) = model.forward_on_tape(&mut tape)?;
        let target_node = tape.constant(target.grid().clone());
        let loss = tape.sum_squared_diff(out, target_node)?;

        let loss_value = tape.scalar_value(loss);
        if !loss_value.is_finite() {
            return Err(Error::FitDiverged { iteration });
        }
        trace.push(loss_value);

        let grads = tape.backward(loss)?;
        let mut flat = Vec::with_capacity(model.params.len());
        for node in &param_nodes {
            flat.extend_from_slice(grads.wrt(*node).data());
        }
        opt.apply(model.params_mut(), &flat)?;
    }
    Ok((model, trace))
}
