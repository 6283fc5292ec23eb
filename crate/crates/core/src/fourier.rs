//! Iterative radix-2 Fourier transform with precomputed twiddles.
//!
//! Forward uses the `exp(-2πi jk/n)` kernel; the inverse carries the `1/n`
//! normalisation, so `inverse(forward(x)) == x` up to rounding.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{LdrError, Result};

#[derive(Debug, Clone)]
pub struct FourierPlan {
    len: usize,
    /// `exp(-2πi k / len)` for `k < len / 2`.
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl FourierPlan {
    /// Builds a plan for a power-of-two length (1 is allowed).
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 || !len.is_power_of_two() {
            return Err(LdrError::InvalidArgument(format!(
                "Fourier plan length must be a power of two, got {len}"
            )));
        }
        let twiddles = (0..len / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / len as f64))
            .collect();
        let bits = len.trailing_zeros();
        let bitrev = (0..len)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        Ok(Self {
            len,
            twiddles,
            bitrev,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn forward(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut buf = x.to_vec();
        self.forward_in_place(&mut buf)?;
        Ok(buf)
    }

    pub fn inverse(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut buf = y.to_vec();
        self.inverse_in_place(&mut buf)?;
        Ok(buf)
    }

    pub fn forward_in_place(&self, buf: &mut [Complex64]) -> Result<()> {
        self.check_len(buf.len())?;
        self.transform(buf, false);
        Ok(())
    }

    pub fn inverse_in_place(&self, buf: &mut [Complex64]) -> Result<()> {
        self.check_len(buf.len())?;
        self.transform(buf, true);
        let scale = 1.0 / self.len as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
        Ok(())
    }

    fn check_len(&self, found: usize) -> Result<()> {
        if found != self.len {
            return Err(LdrError::DimensionMismatch {
                context: "Fourier transform input",
                expected: self.len,
                found,
            });
        }
        Ok(())
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let n = self.len;
        for i in 0..n {
            let j = self.bitrev[i];
            if j > i {
                buf.swap(i, j);
            }
        }
        let mut half = 1;
        while half < n {
            let stride = n / (2 * half);
            for start in (0..n).step_by(2 * half) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let w = if inverse { w.conj() } else { w };
                    let t = w * buf[start + k + half];
                    let u = buf[start + k];
                    buf[start + k] = u + t;
                    buf[start + k + half] = u - t;
                }
            }
            half *= 2;
        }
    }
}

/// Direct O(n²) DFT for arbitrary lengths, same sign convention as [`FourierPlan`].
pub fn dft_direct(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = x.len();
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut out: Vec<Complex64> = (0..n)
        .map(|m| {
            x.iter()
                .enumerate()
                .map(|(j, &v)| {
                    let phase = sign * 2.0 * PI * ((j * m) % n) as f64 / n as f64;
                    v * Complex64::from_polar(1.0, phase)
                })
                .sum()
        })
        .collect();
    if inverse && n > 0 {
        let scale = 1.0 / n as f64;
        out.iter_mut().for_each(|v| *v *= scale);
    }
    out
}
