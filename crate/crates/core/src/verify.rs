//! Empirical checks: remainder class audits, decay-rate fits, a refined-grid
//! oracle for `C^k` norms, and the self-interaction comparison.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gridfield::{multi_indices_up_to, resolved_points, GridFunction};
use crate::iteration::{self, IterationTrace, StopReason};
use crate::par::{self, Execution};
use crate::problem::{make_scalar_toy, with_self_interaction, BoundClass, IterationParams, RemainderTerm};
use crate::spectral::{imag_power, wavenumber, Spectrum};

/// Constants across the λ grid count as stable when `max/min <= STABILITY_RATIO`.
pub const STABILITY_RATIO: f64 = 2.0;

/// Norms below this multiple of `‖T‖_0` are excluded from decay fits.
pub const DECAY_FLOOR: f64 = 1e-12;

/// Fewest points a decay fit accepts.
pub const MIN_FIT_STEPS: usize = 3;

/// Largest refined grid (in samples) the oracle will allocate.
pub const ORACLE_MAX_SAMPLES: usize = 1 << 24;

/// Modes per random audit field.
pub const AUDIT_MODES: usize = 8;

/// Where an evaluator is called during an audit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuditContext {
    pub lambda: u32,
    pub ell: f64,
    pub n_points: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditParams {
    pub ell: f64,
    pub lambdas: Vec<u32>,
    pub k_max: usize,
}

impl Default for AuditParams {
    fn default() -> Self {
        AuditParams {
            ell: 0.125,
            lambdas: vec![16, 32, 64],
            k_max: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub class: BoundClass,
    /// max over λ and samples of `‖r(a, b)‖_k / rhs_k`
    pub per_k_constants: Vec<f64>,
    /// `per_lambda[j][k]`: the same ratio restricted to `lambda_grid[j]`
    pub per_lambda: Vec<Vec<f64>>,
    pub sample_count: usize,
    pub lambda_grid: Vec<u32>,
}

impl BoundReport {
    /// `max/min` of the constant at order `k` across the λ grid (1 when all vanish).
    pub fn spread(&self, k: usize) -> f64 {
        let vals: Vec<f64> = self.per_lambda.iter().map(|row| row[k]).collect();
        let max = vals.iter().copied().fold(0.0_f64, f64::max);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        if max == 0.0 {
            1.0
        } else if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    pub fn stable_at(&self, k: usize) -> bool {
        self.spread(k) <= STABILITY_RATIO
    }

    pub fn stable(&self) -> bool {
        (0..self.per_k_constants.len()).all(|k| self.stable_at(k))
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        write_bound_reports_csv(std::slice::from_ref(self), w)
    }
}

pub fn write_bound_reports_csv(reports: &[BoundReport], mut w: impl Write) -> Result<()> {
    writeln!(w, "class,k,constant,lambda,stable")?;
    for r in reports {
        for (j, lam) in r.lambda_grid.iter().enumerate() {
            for (k, c) in r.per_lambda[j].iter().enumerate() {
                writeln!(w, "{},{k},{c:.16e},{lam},{}", r.class, r.stable_at(k))?;
            }
        }
    }
    Ok(())
}

/// Mode numbers and coefficients of one random field, independent of λ.
#[derive(Clone, Debug)]
struct FieldDraw {
    modes: Vec<(f64, f64, f64)>,
}

impl FieldDraw {
    fn sample(rng: &mut impl Rng) -> Self {
        let modes = (0..AUDIT_MODES)
            .map(|_| {
                let u: f64 = rng.random();
                (u, rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))
            })
            .collect();
        FieldDraw { modes }
    }

    /// `Σ c_j cos(m_j x) + s_j sin(m_j x)` with `m_j = round(u_j λ)`,
    /// normalised to unit sup norm.
    fn realize(&self, lambda: u32, n_points: usize) -> Result<GridFunction> {
        let modes: Vec<(f64, f64, f64)> = self
            .modes
            .iter()
            .map(|&(u, c, s)| ((u * lambda as f64).round(), c, s))
            .collect();
        let f = GridFunction::from_fn(1, n_points, 1, |x, _| {
            modes
                .iter()
                .map(|&(m, c, s)| c * (m * x[0]).cos() + s * (m * x[0]).sin())
                .sum()
        })?;
        let sup = f.sup_abs();
        if sup == 0.0 {
            return Err(Error::InvalidArgument("random field vanished identically".into()));
        }
        Ok(f.scale(1.0 / sup))
    }
}

fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// A random unit-sup trigonometric field with [`AUDIT_MODES`] modes of
/// frequency at most `lambda`, drawn from stream `index` of `seed`.
pub fn random_trig_field(seed: u64, index: usize, lambda: u32, n_points: usize) -> Result<GridFunction> {
    FieldDraw::sample(&mut sample_rng(seed, index)).realize(lambda, n_points)
}

/// Evaluator for the stock term of `class` (weight 1).
pub fn stock_evaluator(class: BoundClass) -> impl Fn(&AuditContext, &GridFunction, &GridFunction) -> Result<GridFunction> + Sync {
    move |ctx, a, b| {
        RemainderTerm::stock(class, ctx.lambda, ctx.ell, ctx.n_points, 1, 1.0)?.apply(a, b)
    }
}

/// Measure the constants `C_k` of a declared class bound on random fields.
///
/// For each λ in the grid, `n_samples` pairs `(a, b)` are drawn; sample `s`
/// uses the same draws at every λ, so only the frequency scale changes.
pub fn verify_remainder_class<E>(
    evaluator: E,
    class: BoundClass,
    params: &AuditParams,
    n_samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<BoundReport>
where
    E: Fn(&AuditContext, &GridFunction, &GridFunction) -> Result<GridFunction> + Sync,
{
    if n_samples < 10 {
        return Err(Error::InvalidArgument(format!(
            "an audit needs at least 10 samples, got {n_samples}"
        )));
    }
    if params.lambdas.is_empty() {
        return Err(Error::InvalidArgument("empty λ grid".into()));
    }
    let k_max = params.k_max;
    let mut per_lambda = Vec::with_capacity(params.lambdas.len());
    for &lambda in &params.lambdas {
        let ctx = AuditContext {
            lambda,
            ell: params.ell,
            n_points: resolved_points(lambda, k_max + 1),
        };
        let ratios = par::try_map_indexed(exec, n_samples, |s| -> Result<Vec<f64>> {
            let mut rng = sample_rng(seed, s);
            let a = FieldDraw::sample(&mut rng).realize(lambda, ctx.n_points)?;
            let b = FieldDraw::sample(&mut rng).realize(lambda, ctx.n_points)?;
            let r = evaluator(&ctx, &a, &b)?;
            if !r.is_compatible(&a) {
                return Err(Error::IncompatibleGrids(format!(
                    "evaluator returned a {}-point {}-component field on a {}-point scalar grid",
                    r.n_points(),
                    r.n_components(),
                    ctx.n_points
                )));
            }
            let measured = r.ck_norm(k_max)?;
            let rhs = class.bound_rhs(&a, &b, k_max, lambda as f64, params.ell)?;
            Ok(measured
                .values()
                .iter()
                .zip(&rhs)
                .map(|(m, b)| if *m == 0.0 { 0.0 } else { m / b })
                .collect())
        })?;
        let mut row = vec![0.0_f64; k_max + 1];
        for sample in ratios {
            for (slot, v) in row.iter_mut().zip(sample) {
                *slot = slot.max(v);
            }
        }
        per_lambda.push(row);
    }
    let per_k_constants = (0..=k_max)
        .map(|k| per_lambda.iter().map(|row| row[k]).fold(0.0_f64, f64::max))
        .collect();
    Ok(BoundReport {
        class,
        per_k_constants,
        per_lambda,
        sample_count: n_samples,
        lambda_grid: params.lambdas.clone(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub k: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub first_step: usize,
    pub last_step: usize,
}

impl DecayFit {
    /// Ordinary least squares of `ln v` against `i` on `(i, v)` pairs.
    pub fn from_series(k: usize, points: &[(usize, f64)]) -> Result<DecayFit> {
        let usable: Vec<(f64, f64)> = points
            .iter()
            .filter(|(_, v)| *v > 0.0 && v.is_finite())
            .map(|&(i, v)| (i as f64, v.ln()))
            .collect();
        if usable.len() < MIN_FIT_STEPS {
            return Err(Error::InsufficientSteps {
                usable: usable.len(),
                required: MIN_FIT_STEPS,
            });
        }
        let n = usable.len() as f64;
        let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
        let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let syy: f64 = usable.iter().map(|p| (p.1 - my).powi(2)).sum();
        if sxx == 0.0 {
            return Err(Error::InsufficientSteps {
                usable: 1,
                required: MIN_FIT_STEPS,
            });
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let r_squared = if syy == 0.0 {
            1.0
        } else {
            (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
        };
        let steps = points.iter().filter(|(_, v)| *v > 0.0 && v.is_finite()).map(|p| p.0);
        Ok(DecayFit {
            k,
            slope,
            intercept,
            r_squared,
            first_step: steps.clone().min().unwrap_or(0),
            last_step: steps.max().unwrap_or(0),
        })
    }
}

pub fn write_decay_fits_csv(fits: &[DecayFit], mut w: impl Write) -> Result<()> {
    writeln!(w, "k,slope,intercept,r_squared,first_step,last_step")?;
    for f in fits {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{},{}",
            f.k, f.slope, f.intercept, f.r_squared, f.first_step, f.last_step
        )?;
    }
    Ok(())
}

/// Fit `ln‖E_i‖_k` against `i` for steps `i >= first_step`, skipping steps
/// whose `‖E_i‖_0` sits below `DECAY_FLOOR · ‖T‖_0`.
pub fn fit_decay(trace: &IterationTrace, k: usize, first_step: usize) -> Result<DecayFit> {
    let floor = DECAY_FLOOR * trace.target_sup;
    let points: Vec<(usize, f64)> = trace
        .states
        .iter()
        .filter(|s| s.step >= first_step.max(1) && s.norms_error.values()[0] >= floor)
        .filter_map(|s| s.norms_error.get(k).map(|v| (s.step, v)))
        .collect();
    DecayFit::from_series(k, &points)
}

/// `‖f‖_k` evaluated on a grid `refinement` times finer: the spectrum is
/// zero-padded (the Nyquist bin split evenly between `±n/2`), differentiated
/// on the fine grid and sampled there.
pub fn oracle_norm(f: &GridFunction, k: usize, refinement: usize) -> Result<f64> {
    if refinement < 2 || !refinement.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "refinement must be a power of two >= 2, got {refinement}"
        )));
    }
    let dim = f.dim();
    let n = f.n_points();
    let fine = n * refinement;
    let fine_count = fine.pow(dim as u32);
    if fine_count.saturating_mul(f.n_components()) > ORACLE_MAX_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "oracle grid of {fine_count} points per component exceeds the limit of {ORACLE_MAX_SAMPLES}"
        )));
    }
    // fine-grid targets (index, weight) of every coarse bin along one axis
    let targets: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|j| {
            let m = wavenumber(j, n);
            let at = |m: i64| m.rem_euclid(fine as i64) as usize;
            if n.is_multiple_of(2) && j == n / 2 {
                vec![(at(m), 0.5), (at(-m), 0.5)]
            } else {
                vec![(at(m), 1.0)]
            }
        })
        .collect();
    let mut best = 0.0_f64;
    for c in 0..f.n_components() {
        let coarse = Spectrum::forward(dim, n, f.component_values(c));
        let mut padded = vec![Complex64::new(0.0, 0.0); fine_count];
        for (idx, coeff) in coarse.coeffs.iter().enumerate() {
            match dim {
                1 => {
                    for &(t, w) in &targets[idx] {
                        padded[t] += coeff * w;
                    }
                }
                _ => {
                    let (r, q) = (idx / n, idx % n);
                    for &(tr, wr) in &targets[r] {
                        for &(tq, wq) in &targets[q] {
                            padded[tr * fine + tq] += coeff * (wr * wq);
                        }
                    }
                }
            }
        }
        let base = Spectrum {
            dim,
            n: fine,
            coeffs: padded,
        };
        let scale = (refinement as f64).powi(dim as i32);
        for alpha in multi_indices_up_to(dim, k) {
            let spec = base.multiplied(|j| {
                alpha
                    .iter()
                    .zip(j)
                    .map(|(&s, &jj)| imag_power(wavenumber(jj, fine), s))
                    .product()
            });
            let sup = spec.to_real().iter().fold(0.0_f64, |m, v| m.max(v.abs())) * scale;
            best = best.max(sup);
        }
    }
    Ok(best)
}

/// Decay of the stock toy with and without the self-interaction term.
#[derive(Clone, Debug)]
pub struct R5Comparison {
    pub clean: DecayFit,
    pub with_r5: DecayFit,
    pub clean_trace: IterationTrace,
    pub r5_trace: IterationTrace,
    /// both runs produced identical error norms
    pub no_effect: bool,
}

impl R5Comparison {
    pub fn clean_stop(&self) -> &StopReason {
        &self.clean_trace.stop
    }

    pub fn r5_stop(&self) -> &StopReason {
        &self.r5_trace.stop
    }

    /// `|slope with r5| / |clean slope|`.
    pub fn slope_ratio(&self) -> f64 {
        self.with_r5.slope.abs() / self.clean.slope.abs()
    }
}

/// Run the scalar toy at `params` with and without `r5` of the given
/// strength and fit `ln‖E_i‖_0` from `first_step` on.
pub fn demonstrate_r5_failure(
    params: &IterationParams,
    amplitude: f64,
    strength: f64,
    first_step: usize,
) -> Result<R5Comparison> {
    if strength < 0.0 || !strength.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "self-interaction strength must be >= 0, got {strength}"
        )));
    }
    let clean_instance = make_scalar_toy(params.clone(), amplitude)?;
    let r5_instance = with_self_interaction(clean_instance.clone(), strength)?;
    let clean = iteration::run(&clean_instance, params.n_steps)?;
    let r5 = iteration::run(&r5_instance, params.n_steps)?;
    let no_effect = clean.states.len() == r5.states.len()
        && clean
            .states
            .iter()
            .zip(&r5.states)
            .all(|(x, y)| x.norms_error == y.norms_error);
    Ok(R5Comparison {
        clean: fit_decay(&clean, 0, first_step)?,
        with_r5: fit_decay(&r5, 0, first_step)?,
        clean_trace: clean,
        r5_trace: r5,
        no_effect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ClassKind;

    fn r1() -> BoundClass {
        BoundClass::new(ClassKind::R1).unwrap()
    }

    #[test]
    fn zero_evaluator_is_stable() {
        let zero = |ctx: &AuditContext, _: &GridFunction, _: &GridFunction| {
            GridFunction::zeros(1, ctx.n_points, 1)
        };
        let rep = verify_remainder_class(zero, r1(), &AuditParams::default(), 10, 1, Execution::Sequential).unwrap();
        assert!(rep.per_k_constants.iter().all(|&c| c == 0.0));
        assert!(rep.stable());
    }

    #[test]
    fn r1_constants() {
        let rep = verify_remainder_class(stock_evaluator(r1()), r1(), &AuditParams::default(), 12, 7, Execution::Sequential)
            .unwrap();
        let c = &rep.per_k_constants;
        assert!(c[0] <= 1.0 + 1e-12 && c[0] > 0.9, "C0 = {}", c[0]);
        for (k, v) in c.iter().enumerate() {
            assert!(*v <= 2f64.powi(k as i32) + 1e-12);
        }
        assert!(rep.stable());
    }

    #[test]
    fn too_few_samples() {
        assert!(verify_remainder_class(stock_evaluator(r1()), r1(), &AuditParams::default(), 9, 1, Execution::Sequential)
            .is_err());
    }

    #[test]
    fn wrong_grid_is_rejected() {
        let bad = |_: &AuditContext, _: &GridFunction, _: &GridFunction| GridFunction::zeros(1, 16, 1);
        let err = verify_remainder_class(bad, r1(), &AuditParams::default(), 10, 1, Execution::Sequential);
        assert!(matches!(err, Err(Error::IncompatibleGrids(_))));
    }

    #[test]
    fn geometric_series_fit() {
        let pts: Vec<(usize, f64)> = (1..=5).map(|i| (i, 0.01f64.powi(i as i32))).collect();
        let fit = DecayFit::from_series(0, &pts).unwrap();
        assert!((fit.slope - 0.01f64.ln()).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!((fit.first_step, fit.last_step), (1, 5));
    }

    #[test]
    fn fit_needs_three_points() {
        let pts = [(1, 0.1), (2, 0.01)];
        assert!(matches!(
            DecayFit::from_series(0, &pts),
            Err(Error::InsufficientSteps { usable: 2, required: 3 })
        ));
    }

    #[test]
    fn oracle_on_pure_mode() {
        let f = GridFunction::from_fn(1, 256, 1, |x, _| (16.0 * x[0]).sin()).unwrap();
        let coarse = f.ck_norm(2).unwrap();
        let o = oracle_norm(&f, 2, 4).unwrap();
        assert!((o - coarse.values()[2]).abs() < 1e-10 * 256.0);
    }

    #[test]
    fn oracle_guards() {
        let f = GridFunction::zeros(1, 64, 1).unwrap();
        assert!(oracle_norm(&f, 1, 3).is_err());
        assert!(oracle_norm(&f, 1, 1).is_err());
        let big = GridFunction::zeros(2, 1024, 1).unwrap();
        assert!(oracle_norm(&big, 1, 8).is_err());
    }

    #[test]
    fn oracle_in_two_dimensions() {
        let f = GridFunction::from_fn(2, 32, 1, |x, _| (3.0 * x[0]).cos() * (2.0 * x[1]).sin()).unwrap();
        let o = oracle_norm(&f, 1, 2).unwrap();
        assert!((o - 3.0).abs() < 1e-10);
    }

    #[test]
    fn r5_zero_strength_has_no_effect() {
        let params = IterationParams::new(16, 2.0, 6, 1, 5);
        let cmp = demonstrate_r5_failure(&params, 0.1, 0.0, 2).unwrap();
        assert!(cmp.no_effect);
        assert_eq!(cmp.clean, cmp.with_r5);
    }
}
