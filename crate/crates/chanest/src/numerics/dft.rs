//! Unitary DFT by direct matrix multiply.
//!
//! Both directions carry the 1/sqrt(N) factor, so `F F^H = I`, Parseval holds
//! exactly, and frequency responses keep the same scale as circulant
//! eigenvalues divided by sqrt(N). Sizes stay small (N <= 64 in practice), so
//! the O(N^2) apply is not worth an FFT.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Cx = Complex64;

#[derive(Debug, Clone)]
pub struct DftPlan {
    size: usize,
    /// Row-major N x N forward matrix, entry (j,k) = exp(-2*pi*i*j*k/N)/sqrt(N).
    forward: Vec<Cx>,
}

impl DftPlan {
    pub fn new(size: usize) -> Self {
        assert!(size > 0, "DFT size must be positive");
        let scale = 1.0 / (size as f64).sqrt();
        let mut forward = Vec::with_capacity(size * size);
        for j in 0..size {
            for k in 0..size {
                // Reduce j*k mod N before the trig call so large products
                // don't lose phase accuracy.
                let phase = -2.0 * PI * ((j * k) % size) as f64 / size as f64;
                forward.push(Cx::from_polar(scale, phase));
            }
        }
        Self { size, forward }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Forward unitary DFT.
    pub fn dft(&self, v: &[Cx]) -> Result<Vec<Cx>> {
        self.apply(v, false)
    }

    /// Inverse unitary DFT (`idft(dft(v)) == v`).
    pub fn idft(&self, v: &[Cx]) -> Result<Vec<Cx>> {
        self.apply(v, true)
    }

    fn apply(&self, v: &[Cx], conjugate: bool) -> Result<Vec<Cx>> {
        if v.len() != self.size {
            return Err(Error::DimMismatch(format!(
                "DFT plan of size {} applied to vector of length {}",
                self.size,
                v.len()
            )));
        }
        let mut out = Vec::with_capacity(self.size);
        for j in 0..self.size {
            let row = &self.forward[j * self.size..(j + 1) * self.size];
            let mut acc = Cx::new(0.0, 0.0);
            if conjugate {
                for (f, x) in row.iter().zip(v) {
                    acc += f.conj() * x;
                }
            } else {
                for (f, x) in row.iter().zip(v) {
                    acc += f * x;
                }
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// Entry (j, k) of the forward matrix.
    pub fn forward_entry(&self, j: usize, k: usize) -> Cx {
        self.forward[j * self.size + k]
    }
}
