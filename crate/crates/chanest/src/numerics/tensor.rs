//! Dense real matrices and the elementwise / layer kernels shared by the
//! forward paths and the gradient tape.
//!
//! A [`Tensor`] is a row-major `rows x cols` matrix of `f64`. Network layers
//! use the convention rows = features/channels, cols = batch/positions, so a
//! dense layer is `W * X` and a per-channel bias broadcasts across columns.
//! Grid-shaped values (the unsupervised denoiser) flatten the time-frequency
//! plane into the column axis with column index `f * time + t`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimMismatch(format!(
                "tensor {}x{} needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![v],
        }
    }

    pub fn from_col(v: &[f64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_scalar(&self) -> bool {
        self.rows == 1 && self.cols == 1
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `C = A * B`. The inner product is delegated to `matrixmultiply::dgemm`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.cols != b.rows {
        return Err(Error::DimMismatch(format!(
            "matmul {}x{} * {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = Tensor::zeros(a.rows, b.cols);
    unsafe {
        matrixmultiply::dgemm(
            a.rows,
            a.cols,
            b.cols,
            1.0,
            a.data.as_ptr(),
            a.cols as isize,
            1,
            b.data.as_ptr(),
            b.cols as isize,
            1,
            0.0,
            out.data.as_mut_ptr(),
            out.cols as isize,
            1,
        );
    }
    Ok(out)
}

/// `C = A * B^T`.
pub fn matmul_bt(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.cols != b.cols {
        return Err(Error::DimMismatch(format!(
            "matmul_bt {}x{} * ({}x{})^T",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = Tensor::zeros(a.rows, b.rows);
    unsafe {
        matrixmultiply::dgemm(
            a.rows,
            a.cols,
            b.rows,
            1.0,
            a.data.as_ptr(),
            a.cols as isize,
            1,
            b.data.as_ptr(),
            1,
            b.cols as isize,
            0.0,
            out.data.as_mut_ptr(),
            out.cols as isize,
            1,
        );
    }
    Ok(out)
}

/// `C = A^T * B`.
pub fn matmul_at(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rows != b.rows {
        return Err(Error::DimMismatch(format!(
            "matmul_at ({}x{})^T * {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = Tensor::zeros(a.cols, b.cols);
    unsafe {
        matrixmultiply::dgemm(
            a.cols,
            a.rows,
            b.cols,
            1.0,
            a.data.as_ptr(),
            1,
            a.cols as isize,
            b.data.as_ptr(),
            b.cols as isize,
            1,
            0.0,
            out.data.as_mut_ptr(),
            out.cols as isize,
            1,
        );
    }
    Ok(out)
}

/// Adds a per-row bias, broadcast across columns.
pub fn add_bias(x: &Tensor, bias: &Tensor) -> Result<Tensor> {
    if bias.cols != 1 || bias.rows != x.rows {
        return Err(Error::DimMismatch(format!(
            "bias {}x{} against {}x{}",
            bias.rows, bias.cols, x.rows, x.cols
        )));
    }
    let mut out = x.clone();
    for r in 0..x.rows {
        let b = bias.data[r];
        for v in &mut out.data[r * x.cols..(r + 1) * x.cols] {
            *v += b;
        }
    }
    Ok(out)
}

pub fn relu(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for v in &mut out.data {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

/// Bilinear 2x upsampling of the column axis interpreted as a `freq x time`
/// plane (column index `f * time + t`). Uses the half-pixel-center source
/// mapping `src = (dst + 0.5) / 2 - 0.5` with edge replication, so output
/// dims are exactly doubled and constants stay constant.
pub fn upsample2x(x: &Tensor, freq: usize, time: usize) -> Result<Tensor> {
    if freq * time != x.cols {
        return Err(Error::DimMismatch(format!(
            "grid {}x{} does not flatten to {} columns",
            freq,
            time,
            x.cols
        )));
    }
    let (fw, tw) = (axis_weights(freq), axis_weights(time));
    let (f2, t2) = (2 * freq, 2 * time);
    let mut out = Tensor::zeros(x.rows, f2 * t2);
    for c in 0..x.rows {
        let src = x.row(c);
        let dst = &mut out.data[c * f2 * t2..(c + 1) * f2 * t2];
        for (fo, &(fi0, fi1, fa)) in fw.iter().enumerate() {
            for (to, &(ti0, ti1, ta)) in tw.iter().enumerate() {
                let v00 = src[fi0 * time + ti0];
                let v01 = src[fi0 * time + ti1];
                let v10 = src[fi1 * time + ti0];
                let v11 = src[fi1 * time + ti1];
                let low = v00 * (1.0 - ta) + v01 * ta;
                let high = v10 * (1.0 - ta) + v11 * ta;
                dst[fo * t2 + to] = low * (1.0 - fa) + high * fa;
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`upsample2x`]: scatter-adds output-grid cotangents back onto
/// the input grid with the same interpolation weights.
pub fn upsample2x_adjoint(dy: &Tensor, freq: usize, time: usize) -> Result<Tensor> {
    let (f2, t2) = (2 * freq, 2 * time);
    if f2 * t2 != dy.cols {
        return Err(Error::DimMismatch(format!(
            "adjoint grid {}x{} does not flatten to {} columns",
            f2,
            t2,
            dy.cols
        )));
    }
    let (fw, tw) = (axis_weights(freq), axis_weights(time));
    let mut out = Tensor::zeros(dy.rows, freq * time);
    for c in 0..dy.rows {
        let src = dy.row(c);
        let dst = &mut out.data[c * freq * time..(c + 1) * freq * time];
        for (fo, &(fi0, fi1, fa)) in fw.iter().enumerate() {
            for (to, &(ti0, ti1, ta)) in tw.iter().enumerate() {
                let g = src[fo * t2 + to];
                dst[fi0 * time + ti0] += g * (1.0 - fa) * (1.0 - ta);
                dst[fi0 * time + ti1] += g * (1.0 - fa) * ta;
                dst[fi1 * time + ti0] += g * fa * (1.0 - ta);
                dst[fi1 * time + ti1] += g * fa * ta;
            }
        }
    }
    Ok(out)
}

/// Per output index along one axis: (left neighbor, right neighbor, right weight).
fn axis_weights(n: usize) -> Vec<(usize, usize, f64)> {
    (0..2 * n)
        .map(|o| {
            let src = (o as f64 + 0.5) / 2.0 - 0.5;
            let floor = src.floor();
            let frac = src - floor;
            let i0 = (floor.max(0.0) as usize).min(n - 1);
            let i1 = ((floor + 1.0).max(0.0) as usize).min(n - 1);
            (i0, i1, frac)
        })
        .collect()
}

/// Batch normalization over the column axis: each row (channel) is shifted to
/// zero mean and scaled to unit variance using batch statistics, then scaled
/// and shifted by the per-row parameters. `eps` sits inside the square root.
pub fn batch_norm(x: &Tensor, scale: &Tensor, shift: &Tensor, eps: f64) -> Result<Tensor> {
    if scale.cols != 1 || shift.cols != 1 || scale.rows != x.rows || shift.rows != x.rows {
        return Err(Error::DimMismatch(format!(
            "batch_norm params ({}x{}, {}x{}) against {}x{}",
            scale.rows, scale.cols, shift.rows, shift.cols, x.rows, x.cols
        )));
    }
    let mut out = x.clone();
    let n = x.cols as f64;
    for r in 0..x.rows {
        let row = &mut out.data[r * x.cols..(r + 1) * x.cols];
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let inv_std = 1.0 / (var + eps).sqrt();
        let (g, b) = (scale.data[r], shift.data[r]);
        for v in row.iter_mut() {
            *v = (*v - mean) * inv_std * g + b;
        }
    }
    Ok(out)
}

/// Sum of squared differences over all entries.
pub fn sum_squared_diff(x: &Tensor, target: &Tensor) -> Result<f64> {
    if x.rows != target.rows || x.cols != target.cols {
        return Err(Error::DimMismatch(format!(
            "sse {}x{} against {}x{}",
            x.rows, x.cols, target.rows, target.cols
        )));
    }
    Ok(x
        .data
        .iter()
        .zip(&target.data)
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}
