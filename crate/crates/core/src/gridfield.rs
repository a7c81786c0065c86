//! Periodic grid functions on the flat torus `[0, 2π)^dim` with spectral
//! calculus: derivatives, `C^k` sup-norms, Gaussian mollification and pure
//! oscillatory modes.
//!
//! All fields are sampled on a uniform grid without the duplicated endpoint.
//! Derivatives multiply Fourier mode `m` by `(i m)^s`, so they are exact for
//! every trigonometric polynomial the grid resolves.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::spectral::{wavenumber, Spectrum};

/// Domain length along every axis.
pub const PERIOD: f64 = 2.0 * PI;

/// Highest norm order `ck_norm` will compute. Beyond this the derivative
/// amplification `(n/2)^k` of roundoff swamps any signal on desk-scale grids.
pub const MAX_NORM_ORDER: usize = 12;

/// Grid points per oscillation and per controlled derivative order required
/// by the resolution rule `n_points >= 8 λ (k_max + 1)`.
pub const RESOLUTION_FACTOR: usize = 8;

/// Smallest admissible `n_points` for frequency `frequency` and norms up to `k_max`.
pub fn required_points(frequency: u32, k_max: usize) -> usize {
    RESOLUTION_FACTOR * frequency as usize * (k_max + 1)
}

/// Smallest power of two satisfying the resolution rule (at least 16).
pub fn resolved_points(frequency: u32, k_max: usize) -> usize {
    required_points(frequency, k_max).max(16).next_power_of_two()
}

/// A real, possibly vector-valued field sampled on a periodic grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    dim: usize,
    n_points: usize,
    n_components: usize,
    samples: Vec<f64>,
}

/// `C^k` norms `‖f‖_0, …, ‖f‖_{k_max}` of a grid function.
#[derive(Clone, Debug, PartialEq)]
pub struct NormVector {
    values: Vec<f64>,
}

impl NormVector {
    pub fn new(values: Vec<f64>) -> Self {
        NormVector { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, k: usize) -> Option<f64> {
        self.values.get(k).copied()
    }

    pub fn max_order(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl GridFunction {
    pub fn new(dim: usize, n_points: usize, n_components: usize, samples: Vec<f64>) -> Result<Self> {
        check_shape(dim, n_points, n_components)?;
        let expected = n_points.pow(dim as u32) * n_components;
        if samples.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "expected {expected} samples, got {}",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample {i} is not finite")));
        }
        Ok(GridFunction {
            dim,
            n_points,
            n_components,
            samples,
        })
    }

    pub fn zeros(dim: usize, n_points: usize, n_components: usize) -> Result<Self> {
        Self::constant(dim, n_points, n_components, 0.0)
    }

    pub fn constant(dim: usize, n_points: usize, n_components: usize, value: f64) -> Result<Self> {
        check_shape(dim, n_points, n_components)?;
        Self::new(
            dim,
            n_points,
            n_components,
            vec![value; n_points.pow(dim as u32) * n_components],
        )
    }

    /// Sample `f(x, component)` at every grid point.
    pub fn from_fn(
        dim: usize,
        n_points: usize,
        n_components: usize,
        f: impl Fn(&[f64], usize) -> f64,
    ) -> Result<Self> {
        check_shape(dim, n_points, n_components)?;
        let h = PERIOD / n_points as f64;
        let count = n_points.pow(dim as u32);
        let mut samples = Vec::with_capacity(count * n_components);
        let mut x = vec![0.0; dim];
        for p in 0..count {
            match dim {
                1 => x[0] = p as f64 * h,
                _ => {
                    x[0] = (p / n_points) as f64 * h;
                    x[1] = (p % n_points) as f64 * h;
                }
            }
            for c in 0..n_components {
                samples.push(f(&x, c));
            }
        }
        Self::new(dim, n_points, n_components, samples)
    }

    /// Stack single-component fields into one vector-valued field.
    pub fn stack(parts: &[GridFunction]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("cannot stack zero fields".into()))?;
        let mut nc = 0;
        for p in parts {
            first.check_compatible(p)?;
            nc += p.n_components;
        }
        let count = first.point_count();
        let mut samples = Vec::with_capacity(count * nc);
        for pt in 0..count {
            for p in parts {
                samples.extend_from_slice(&p.samples[pt * p.n_components..(pt + 1) * p.n_components]);
            }
        }
        Self::new(first.dim, first.n_points, nc, samples)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn period(&self) -> f64 {
        PERIOD
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn point_count(&self) -> usize {
        self.n_points.pow(self.dim as u32)
    }

    pub fn component_values(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().skip(c).step_by(self.n_components).copied()
    }

    pub fn component(&self, c: usize) -> Result<GridFunction> {
        if c >= self.n_components {
            return Err(Error::InvalidArgument(format!(
                "component {c} out of range ({} components)",
                self.n_components
            )));
        }
        Self::new(self.dim, self.n_points, 1, self.component_values(c).collect())
    }

    pub fn is_compatible(&self, other: &GridFunction) -> bool {
        self.dim == other.dim && self.n_points == other.n_points
    }

    pub fn check_compatible(&self, other: &GridFunction) -> Result<()> {
        if self.is_compatible(other) {
            Ok(())
        } else {
            Err(Error::IncompatibleGrids(format!(
                "dim {} / {} points vs dim {} / {} points",
                self.dim, self.n_points, other.dim, other.n_points
            )))
        }
    }

    fn check_same_shape(&self, other: &GridFunction) -> Result<()> {
        self.check_compatible(other)?;
        if self.n_components != other.n_components {
            return Err(Error::IncompatibleGrids(format!(
                "{} components vs {} components",
                self.n_components, other.n_components
            )));
        }
        Ok(())
    }

    /// Maximum absolute sample over all points and components.
    pub fn sup_abs(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<GridFunction> {
        Self::new(
            self.dim,
            self.n_points,
            self.n_components,
            self.samples.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn scale(&self, alpha: f64) -> GridFunction {
        GridFunction {
            samples: self.samples.iter().map(|v| alpha * v).collect(),
            ..self.clone()
        }
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &GridFunction) -> Result<GridFunction> {
        self.check_same_shape(other)?;
        Self::new(
            self.dim,
            self.n_points,
            self.n_components,
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(x, y)| x + alpha * y)
                .collect(),
        )
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.axpy(-1.0, other)
    }

    /// Pointwise product. Component counts must match, or one side must be
    /// scalar (one component), in which case it multiplies every component.
    pub fn pointwise_mul(&self, other: &GridFunction) -> Result<GridFunction> {
        self.check_compatible(other)?;
        let (a, b) = (self.n_components, other.n_components);
        let nc = if a == b || b == 1 {
            a
        } else if a == 1 {
            b
        } else {
            return Err(Error::IncompatibleGrids(format!(
                "cannot multiply {a}-component and {b}-component fields"
            )));
        };
        let samples = (0..self.point_count() * nc)
            .map(|idx| {
                let (pt, c) = (idx / nc, idx % nc);
                let x = self.samples[pt * a + if a == 1 { 0 } else { c }];
                let y = other.samples[pt * b + if b == 1 { 0 } else { c }];
                x * y
            })
            .collect();
        Self::new(self.dim, self.n_points, nc, samples)
    }

    /// Sum of components, giving a scalar field.
    pub fn component_sum(&self) -> GridFunction {
        let nc = self.n_components;
        GridFunction {
            dim: self.dim,
            n_points: self.n_points,
            n_components: 1,
            samples: self.samples.chunks_exact(nc).map(|c| c.iter().sum()).collect(),
        }
    }

    fn spectra(&self) -> Vec<Spectrum> {
        (0..self.n_components)
            .map(|c| Spectrum::forward(self.dim, self.n_points, self.component_values(c)))
            .collect()
    }

    fn with_spectra(&self, spectra: &[Spectrum]) -> GridFunction {
        let nc = spectra.len();
        let cols: Vec<Vec<f64>> = spectra.iter().map(Spectrum::to_real).collect();
        let mut samples = Vec::with_capacity(self.point_count() * nc);
        for pt in 0..self.point_count() {
            for col in &cols {
                samples.push(col[pt]);
            }
        }
        GridFunction {
            dim: self.dim,
            n_points: self.n_points,
            n_components: nc,
            samples,
        }
    }

    /// Spectral derivative of order `order` along `axis`.
    pub fn derivative(&self, axis: usize, order: u32) -> Result<GridFunction> {
        if axis >= self.dim {
            return Err(Error::InvalidArgument(format!(
                "axis {axis} out of range for a {}-dimensional field",
                self.dim
            )));
        }
        if order == 0 {
            return Err(Error::InvalidArgument("derivative order must be >= 1".into()));
        }
        let mut alpha = vec![0u32; self.dim];
        alpha[axis] = order;
        self.derivative_multi(&alpha)
    }

    /// Mixed spectral derivative `∂^alpha`, one order per axis.
    pub fn derivative_multi(&self, alpha: &[u32]) -> Result<GridFunction> {
        if alpha.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "multi-index has {} entries for a {}-dimensional field",
                alpha.len(),
                self.dim
            )));
        }
        if alpha.iter().all(|&s| s == 0) {
            return Ok(self.clone());
        }
        let spectra: Vec<Spectrum> = self.spectra().iter().map(|s| s.derivative(alpha)).collect();
        Ok(self.with_spectra(&spectra))
    }

    /// `C^k` norms up to `k_max`: entry `k` is the largest grid sup of
    /// `|∂^α f|` over all multi-indices `|α| <= k` and all components.
    pub fn ck_norm(&self, k_max: usize) -> Result<NormVector> {
        if k_max > MAX_NORM_ORDER {
            return Err(Error::UnsafeOrder {
                requested: k_max,
                max: MAX_NORM_ORDER,
            });
        }
        let alphas = multi_indices_up_to(self.dim, k_max);
        let spectra = self.spectra();
        // Derivatives are independent; only worth the pool on larger grids.
        let exec = if self.samples.len() >= 1 << 14 {
            Execution::default()
        } else {
            Execution::Sequential
        };
        let sups = par::map_indexed(exec, alphas.len(), |idx| {
            let alpha = &alphas[idx];
            spectra
                .iter()
                .map(|s| {
                    if alpha.iter().all(|&a| a == 0) {
                        // exact samples, no transform roundoff at order zero
                        0.0
                    } else {
                        s.derivative(alpha).to_real().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
                    }
                })
                .fold(0.0_f64, f64::max)
        });
        let mut by_order = vec![0.0_f64; k_max + 1];
        by_order[0] = self.sup_abs();
        for (alpha, sup) in alphas.iter().zip(sups) {
            let order: u32 = alpha.iter().sum();
            let slot = &mut by_order[order as usize];
            *slot = slot.max(sup);
        }
        let mut running = 0.0_f64;
        let values = by_order
            .into_iter()
            .map(|v| {
                running = running.max(v);
                running
            })
            .collect();
        Ok(NormVector::new(values))
    }

    /// Norms of the order-`s` gradient tensor `∇^s f`: entry `j` is the
    /// largest `‖∂^β f‖_j` over `|β| = s`.
    pub fn gradient_norm(&self, s: u32, k_max: usize) -> Result<NormVector> {
        if s == 0 {
            return self.ck_norm(k_max);
        }
        let mut out = vec![0.0_f64; k_max + 1];
        for beta in multi_indices_up_to(self.dim, s as usize)
            .into_iter()
            .filter(|b| b.iter().sum::<u32>() == s)
        {
            let nv = self.derivative_multi(&beta)?.ck_norm(k_max)?;
            for (o, v) in out.iter_mut().zip(nv.values()) {
                *o = o.max(*v);
            }
        }
        Ok(NormVector::new(out))
    }

    /// Convolution with the periodised Gaussian of width `ell`, applied as the
    /// Fourier multiplier `exp(-(|m| ell)^2 / 2)`. The kernel has unit mass.
    pub fn mollify(&self, ell: f64) -> Result<GridFunction> {
        if !(ell > 0.0 && ell < PERIOD) {
            return Err(Error::InvalidArgument(format!(
                "mollification scale must lie in (0, 2π), got {ell}"
            )));
        }
        let n = self.n_points;
        let spectra: Vec<Spectrum> = self
            .spectra()
            .iter()
            .map(|s| {
                s.multiplied(|j| {
                    let m2: f64 = j
                        .iter()
                        .map(|&jj| (wavenumber(jj, n) as f64).powi(2))
                        .sum();
                    Complex64::new(gaussian_multiplier(m2.sqrt(), ell), 0.0)
                })
            })
            .collect();
        Ok(self.with_spectra(&spectra))
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "# {},{},{}", self.dim, self.n_points, self.n_components)?;
        for row in self.samples.chunks_exact(self.n_components) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv(r: impl BufRead) -> Result<GridFunction> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty grid CSV".into()))??;
        let fields: Vec<usize> = header
            .trim_start_matches('#')
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("bad header {header:?}: {e}")))?;
        let [dim, n_points, n_components] = fields[..] else {
            return Err(Error::Parse(format!("bad header {header:?}")));
        };
        let mut samples = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("bad row {line:?}: {e}")))?;
            if row.len() != n_components {
                return Err(Error::Parse(format!(
                    "row has {} columns, expected {n_components}",
                    row.len()
                )));
            }
            samples.extend(row);
        }
        GridFunction::new(dim, n_points, n_components, samples)
    }
}

/// Fourier multiplier of the unit-mass Gaussian mollifier at wavenumber `m`.
pub fn gaussian_multiplier(m: f64, ell: f64) -> f64 {
    (-0.5 * (m * ell).powi(2)).exp()
}

/// `amplitude · cos(frequency · x_axis + phase)` as a scalar field.
pub fn oscillator(
    amplitude: f64,
    frequency: u32,
    phase: f64,
    axis: usize,
    n_points: usize,
    dim: usize,
) -> Result<GridFunction> {
    check_shape(dim, n_points, 1)?;
    if axis >= dim {
        return Err(Error::InvalidArgument(format!(
            "axis {axis} out of range for dim {dim}"
        )));
    }
    let required = required_points(frequency, 0);
    if n_points < required {
        return Err(Error::Unresolved {
            frequency,
            n_points,
            required,
        });
    }
    let lam = frequency as f64;
    GridFunction::from_fn(dim, n_points, 1, |x, _| {
        amplitude * (lam * x[axis] + phase).cos()
    })
}

/// All multi-indices of length `dim` with total order `<= k`, graded.
pub fn multi_indices_up_to(dim: usize, k: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for order in 0..=k as u32 {
        match dim {
            1 => out.push(vec![order]),
            _ => {
                for a0 in (0..=order).rev() {
                    out.push(vec![a0, order - a0]);
                }
            }
        }
    }
    out
}

fn check_shape(dim: usize, n_points: usize, n_components: usize) -> Result<()> {
    if !(dim == 1 || dim == 2) {
        return Err(Error::InvalidArgument(format!(
            "only 1-D and 2-D grids are supported, got dim {dim}"
        )));
    }
    if n_points < 2 || !n_points.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "n_points must be a power of two >= 2, got {n_points}"
        )));
    }
    if n_components == 0 {
        return Err(Error::InvalidArgument("n_components must be >= 1".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, n: usize) -> GridFunction {
        GridFunction::from_fn(1, n, 1, |x, _| (freq * x[0]).sin()).unwrap()
    }

    fn max_abs_diff(a: &GridFunction, b: &GridFunction) -> f64 {
        a.sub(b).unwrap().sup_abs()
    }

    #[test]
    fn derivative_of_sine_is_cosine() {
        let d = sine(1.0, 64).derivative(0, 1).unwrap();
        let cos = GridFunction::from_fn(1, 64, 1, |x, _| x[0].cos()).unwrap();
        assert!(max_abs_diff(&d, &cos) < 1e-14);
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let f = GridFunction::constant(2, 32, 1, 3.0).unwrap();
        for axis in 0..2 {
            assert!(f.derivative(axis, 1).unwrap().sup_abs() < 1e-14);
        }
    }

    #[test]
    fn second_derivative_of_sin7x() {
        let f = sine(7.0, 256);
        let d2 = f.derivative(0, 2).unwrap();
        let expected = f.scale(-49.0);
        assert!(max_abs_diff(&d2, &expected) < 1e-10);
    }

    #[test]
    fn mixed_derivative_in_2d() {
        let f = GridFunction::from_fn(2, 32, 1, |x, _| (3.0 * x[0]).sin() * (2.0 * x[1]).cos()).unwrap();
        let d = f.derivative_multi(&[1, 1]).unwrap();
        let expected =
            GridFunction::from_fn(2, 32, 1, |x, _| -6.0 * (3.0 * x[0]).cos() * (2.0 * x[1]).sin()).unwrap();
        assert!(max_abs_diff(&d, &expected) < 1e-12);
    }

    #[test]
    fn derivative_rejects_bad_axis_and_order() {
        let f = sine(1.0, 16);
        assert!(matches!(f.derivative(1, 1), Err(Error::InvalidArgument(_))));
        assert!(f.derivative(0, 0).is_err());
    }

    #[test]
    fn constant_norms() {
        let nv = GridFunction::constant(1, 32, 1, -2.5).unwrap().ck_norm(4).unwrap();
        assert_eq!(nv.values(), &[2.5; 5]);
    }

    #[test]
    fn pure_mode_norms_are_powers() {
        let nv = sine(16.0, 256).ck_norm(1).unwrap();
        assert!((nv.values()[0] - 1.0).abs() < 1e-12);
        assert!((nv.values()[1] - 16.0).abs() < 1e-10);
        let nv = sine(16.0, 512).ck_norm(3).unwrap();
        for (k, v) in nv.values().iter().enumerate() {
            let expected = 16f64.powi(k as i32);
            assert!((v - expected).abs() / expected < 1e-10, "k={k}: {v}");
        }
    }

    #[test]
    fn norm_order_cap() {
        let f = sine(1.0, 64);
        assert!(matches!(
            f.ck_norm(MAX_NORM_ORDER + 1),
            Err(Error::UnsafeOrder { .. })
        ));
    }

    #[test]
    fn mollify_constant_is_identity() {
        let f = GridFunction::constant(1, 64, 2, 1.75).unwrap();
        assert!(max_abs_diff(&f.mollify(0.3).unwrap(), &f) < 1e-14);
    }

    #[test]
    fn mollify_small_scale_is_near_identity() {
        let f = sine(1.0, 64);
        assert!(max_abs_diff(&f.mollify(1e-3).unwrap(), &f) < 1e-4);
    }

    #[test]
    fn mollify_gaussian_amplitude() {
        // λℓ = 4: amplitude e^{-8}
        let f = sine(32.0, 512);
        let out = f.mollify(4.0 / 32.0).unwrap();
        let expected = (-8.0f64).exp();
        assert!((expected - 3.35e-4).abs() / 3.35e-4 < 0.01);
        assert!((out.sup_abs() - expected).abs() / expected < 0.01);
    }

    #[test]
    fn mollify_rejects_bad_scale() {
        let f = sine(1.0, 16);
        assert!(f.mollify(0.0).is_err());
        assert!(f.mollify(PERIOD).is_err());
    }

    #[test]
    fn oscillator_examples() {
        let z = oscillator(0.0, 4, 0.3, 0, 64, 1).unwrap();
        assert_eq!(z.sup_abs(), 0.0);

        let f = oscillator(1.0, 32, 0.0, 0, 1024, 1).unwrap();
        let nv = f.ck_norm(2).unwrap();
        for (v, e) in nv.values().iter().zip([1.0, 32.0, 1024.0]) {
            assert!((v - e).abs() / e < 1e-12);
        }

        let g = oscillator(2.0, 16, PI / 2.0, 0, 256, 1).unwrap();
        let expected = sine(16.0, 256).scale(-2.0);
        assert!(max_abs_diff(&g, &expected) < 1e-13);
    }

    #[test]
    fn oscillator_refuses_unresolved_frequency() {
        assert!(matches!(
            oscillator(1.0, 32, 0.0, 0, 128, 1),
            Err(Error::Unresolved { .. })
        ));
    }

    #[test]
    fn arithmetic_examples() {
        let f = sine(3.0, 64);
        let g = sine(5.0, 64);
        assert_eq!(f.axpy(0.0, &g).unwrap(), f);

        let s = sine(1.0, 64);
        let sq = s.pointwise_mul(&s).unwrap();
        let expected = GridFunction::from_fn(1, 64, 1, |x, _| 0.5 * (1.0 - (2.0 * x[0]).cos())).unwrap();
        assert!(max_abs_diff(&sq, &expected) < 1e-14);
    }

    #[test]
    fn incompatible_grids_are_rejected() {
        let f = sine(1.0, 64);
        let g = sine(1.0, 32);
        assert!(matches!(f.add(&g), Err(Error::IncompatibleGrids(_))));
        let h = GridFunction::zeros(1, 64, 2).unwrap();
        let k = GridFunction::zeros(1, 64, 3).unwrap();
        assert!(h.pointwise_mul(&k).is_err());
        assert!(h.pointwise_mul(&f).is_ok());
    }

    #[test]
    fn new_validates_shape_and_values() {
        assert!(GridFunction::new(3, 8, 1, vec![0.0; 512]).is_err());
        assert!(GridFunction::new(1, 12, 1, vec![0.0; 12]).is_err());
        assert!(GridFunction::new(1, 8, 1, vec![0.0; 7]).is_err());
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(GridFunction::new(1, 8, 1, v).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let f = GridFunction::from_fn(2, 8, 2, |x, c| (x[0] + 2.0 * x[1]).sin() + c as f64 / 3.0).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# 2,8,2\n"));
        let back = GridFunction::read_csv(&buf[..]).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn stack_and_component_round_trip() {
        let a = sine(1.0, 16);
        let b = sine(2.0, 16);
        let s = GridFunction::stack(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(s.n_components(), 2);
        assert_eq!(s.component(0).unwrap(), a);
        assert_eq!(s.component(1).unwrap(), b);
    }

    #[test]
    fn resolution_rule() {
        assert_eq!(required_points(32, 7), 2048);
        assert_eq!(resolved_points(32, 7), 2048);
        assert_eq!(resolved_points(64, 7), 4096);
        assert_eq!(resolved_points(24, 2), 1024);
    }
}
