//! Thin FFT layer over rustfft for real fields on 1-D and 2-D periodic grids.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Signed wavenumber of FFT bin `j` on an `n`-point axis. The Nyquist bin
/// (even `n`) reports `-n/2`.
pub(crate) fn wavenumber(j: usize, n: usize) -> i64 {
    if j < n.div_ceil(2) {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

pub(crate) fn is_nyquist(j: usize, n: usize) -> bool {
    n.is_multiple_of(2) && j == n / 2
}

/// `(i m)^s` for integer `m`.
pub(crate) fn imag_power(m: i64, s: u32) -> Complex64 {
    let mag = (m as f64).powi(s as i32);
    match s % 4 {
        0 => Complex64::new(mag, 0.0),
        1 => Complex64::new(0.0, mag),
        2 => Complex64::new(-mag, 0.0),
        _ => Complex64::new(0.0, -mag),
    }
}

/// Unnormalised DFT of one scalar component on an `n^dim` grid, row-major
/// with the last axis fastest.
#[derive(Clone, Debug)]
pub(crate) struct Spectrum {
    pub dim: usize,
    pub n: usize,
    pub coeffs: Vec<Complex64>,
}

fn transform_axes(dim: usize, n: usize, data: &mut [Complex64], inverse: bool) {
    let fft = plan(n, inverse);
    match dim {
        1 => fft.process(data),
        2 => {
            // rows are contiguous (axis 1)
            for row in data.chunks_exact_mut(n) {
                fft.process(row);
            }
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            for j in 0..n {
                for i in 0..n {
                    col[i] = data[i * n + j];
                }
                fft.process(&mut col);
                for i in 0..n {
                    data[i * n + j] = col[i];
                }
            }
        }
        _ => unreachable!("dimension validated by GridFunction"),
    }
}

impl Spectrum {
    pub fn forward(dim: usize, n: usize, values: impl Iterator<Item = f64>) -> Self {
        let mut coeffs: Vec<Complex64> = values.map(|v| Complex64::new(v, 0.0)).collect();
        debug_assert_eq!(coeffs.len(), n.pow(dim as u32));
        transform_axes(dim, n, &mut coeffs, false);
        Spectrum { dim, n, coeffs }
    }

    /// Inverse transform, normalised, keeping the real part.
    pub fn to_real(&self) -> Vec<f64> {
        let mut data = self.coeffs.clone();
        transform_axes(self.dim, self.n, &mut data, true);
        let scale = 1.0 / self.coeffs.len() as f64;
        data.iter().map(|c| c.re * scale).collect()
    }

    /// Multiply bin `(j_0, .., j_{dim-1})` by `mult(j)`.
    pub fn multiplied(&self, mult: impl Fn(&[usize]) -> Complex64) -> Spectrum {
        let n = self.n;
        let coeffs = match self.dim {
            1 => self
                .coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| c * mult(&[j]))
                .collect(),
            _ => self
                .coeffs
                .iter()
                .enumerate()
                .map(|(p, c)| c * mult(&[p / n, p % n]))
                .collect(),
        };
        Spectrum {
            dim: self.dim,
            n,
            coeffs,
        }
    }

    /// Spectral derivative `∂^alpha`. Odd orders annihilate the Nyquist bin
    /// along their axis, which keeps the result real.
    pub fn derivative(&self, alpha: &[u32]) -> Spectrum {
        let n = self.n;
        self.multiplied(|j| {
            let mut m = Complex64::new(1.0, 0.0);
            for (axis, &s) in alpha.iter().enumerate() {
                if s == 0 {
                    continue;
                }
                if s % 2 == 1 && is_nyquist(j[axis], n) {
                    return Complex64::new(0.0, 0.0);
                }
                m *= imag_power(wavenumber(j[axis], n), s);
            }
            m
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenumbers_cover_signed_range() {
        let ks: Vec<i64> = (0..8).map(|j| wavenumber(j, 8)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        assert!(is_nyquist(4, 8));
    }

    #[test]
    fn round_trip_is_identity() {
        let vals: Vec<f64> = (0..64).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
        let back = Spectrum::forward(2, 8, vals.iter().copied()).to_real();
        for (a, b) in vals.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
