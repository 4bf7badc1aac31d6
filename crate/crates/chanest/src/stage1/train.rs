//! Training and generative readout for the per-antenna networks.

use rand::Rng;

use super::model::MlpModel;
use super::{Stage1Config, TrainingSet};
use crate::airlink::pilot::random_qpsk;
use crate::error::{Error, Result};
use crate::numerics::{Cx, OptimizerState, Tape, Tensor};

/// Fits one network to its antenna's pilot pairs by full-batch gradient
/// descent with adaptive moments. The recorded trace holds the mean squared
/// error per pair at every epoch; a non-finite loss aborts with the epoch
/// index.
pub fn train_antenna_net(
    ts: &TrainingSet,
    hp: &Stage1Config,
    rng: &mut impl Rng,
) -> Result<(MlpModel, Vec<f64>)> {
    let subcarriers = ts.subcarriers();
    let mut model = MlpModel::new_random(subcarriers, rng)?;
    let mut opt = OptimizerState::new(hp.lr, model.param_blocks().to_vec());
    let mut trace = Vec::with_capacity(hp.epochs);
    let pair_scale = 1.0 / ts.pair_count() as f64;

    for epoch in 0..hp.epochs {
        let mut tape = Tape::new();
        let input = tape.constant(ts.inputs().clone());
        let (output, param_nodes) = model.forward_on_tape(&mut tape, input)?;
        let target = tape.constant(ts.labels().clone());
        let sse = tape.sum_squared_diff(output, target)?;
        let loss = tape.scale(sse, pair_scale);

        let loss_value = tape.scalar_value(loss);
        if !loss_value.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        trace.push(loss_value);

        let grads = tape.backward(loss)?;
        let mut flat = Vec::with_capacity(model.params().len());
        for node in &param_nodes {
            flat.extend_from_slice(grads.wrt(*node).data());
        }
        opt.apply(model.params_mut(), &flat)?;
    }
    Ok((model, trace))
}

/// Estimates the channel by averaging the network's response to `n_g`
/// random unit-modulus probe inputs, then re-assembling re/im halves into a
/// complex per-subcarrier vector.
pub fn generate_estimate(model: &MlpModel, n_g: usize, rng: &mut impl Rng) -> Result<Vec<Cx>> {
    if n_g == 0 {
        return Err(Error::EmptyGeneration);
    }
    let n = model.subcarriers();
    let mut probes = Tensor::zeros(2 * n, n_g);
    for j in 0..n_g {
        for sc in 0..n {
            let z = random_qpsk(rng);
            probes.data_mut()[sc * n_g + j] = z.re;
            probes.data_mut()[(n + sc) * n_g + j] = z.im;
        }
    }
    let outputs = model.forward(&probes)?;
    let scale = 1.0 / n_g as f64;
    Ok((0..n)
        .map(|sc| {
            let re: f64 = outputs.row(sc).iter().sum::<f64>() * scale;
            let im: f64 = outputs.row(n + sc).iter().sum::<f64>() * scale;
            Cx::new(re, im)
        })
        .collect())
}
