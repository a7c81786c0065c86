//! Constant bookkeeping for one inductive step of the iteration.
//!
//! Every formula here is closed-form arithmetic on a [`ConstantSet`]; nothing
//! is measured. Constants only ever grow from step to step, so a set that
//! bounds step `i` yields a set that bounds step `i + 1`.
//!
//! Notation: `L = λℓ`, `N_k = (k+1)(k+2)/2` is the number of pairs
//! `j1 + j2 <= k`, and `Δa` is `a^{(i+1)} - a^{(i)}`.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};
use crate::gridfield::NormVector;
use crate::problem::{BoundClass, ClassKind, IterationParams};

/// A remainder term's class together with its weight in `r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassWeight {
    pub class: BoundClass,
    pub weight: f64,
}

/// The constants of one step.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantSet {
    /// bounds `‖a‖_0 <= C`, `‖a‖_k <= C λ^k / L` and `‖T‖_k <= C λ^k / L`
    pub c: f64,
    /// bounds `‖E_i‖_k <= C_err λ^k / L^i`
    pub c_err: f64,
    /// bounds `‖r^i(a^{(i)})‖_k <= C_r λ^k / L`
    pub c_r: f64,
    pub c_f: f64,
    /// class constants `C_k`, indexed by norm order
    pub c_k: Vec<f64>,
    pub step: usize,
    pub classes: Vec<ClassWeight>,
    /// relative step-to-step variation of `F^i` and `r^i`, decaying like `L^{-i}`
    pub drift: f64,
}

/// `2^k · max_j binom(k, j)`, the explicit Leibniz constant used when no
/// class constant is supplied.
pub fn leibniz_constant(k: usize) -> f64 {
    let mid = k / 2;
    let mut binom = 1.0;
    for j in 0..mid {
        binom = binom * (k - j) as f64 / (j + 1) as f64;
    }
    2f64.powi(k as i32) * binom
}

pub fn leibniz_constants(k_max: usize) -> Vec<f64> {
    (0..=k_max).map(leibniz_constant).collect()
}

fn pair_count(k: usize) -> f64 {
    ((k + 1) * (k + 2) / 2) as f64
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "constant {name} must be positive and finite, got {v}"
        )))
    }
}

/// The three pieces of the difference constant `C_diff`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DifferenceTerms {
    /// `C_F · C_err`, from `‖E_i‖_k`
    pub direct: f64,
    /// `C_F · C_err`, from `λ^k ‖E_i‖_0`
    pub slack: f64,
    /// `C_F · C_err · (C + C_r) / L`, from `(‖T‖_k + ‖r^{i-1}‖_k) ‖E_i‖_0`
    pub coupling: f64,
}

impl DifferenceTerms {
    pub fn total(&self) -> f64 {
        self.direct + self.slack + self.coupling
    }
}

impl ConstantSet {
    pub fn new(c: f64, c_err: f64, c_r: f64, c_f: f64, c_k: Vec<f64>, step: usize) -> Result<Self> {
        let cs = ConstantSet {
            c,
            c_err,
            c_r,
            c_f,
            c_k,
            step,
            classes: Vec::new(),
            drift: 0.0,
        };
        cs.validate()?;
        Ok(cs)
    }

    pub fn with_classes(mut self, classes: Vec<ClassWeight>) -> Self {
        self.classes = classes;
        self
    }

    pub fn with_drift(mut self, drift: f64) -> Self {
        self.drift = drift;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("C", self.c)?;
        check_positive("C_err", self.c_err)?;
        check_positive("C_r", self.c_r)?;
        check_positive("C_F", self.c_f)?;
        for (k, v) in self.c_k.iter().enumerate() {
            check_positive(&format!("C_{k}"), *v)?;
        }
        if !(self.drift.is_finite() && self.drift >= 0.0) {
            return Err(Error::InvalidArgument(format!("drift must be >= 0, got {}", self.drift)));
        }
        for cw in &self.classes {
            if !(cw.weight.is_finite() && cw.weight >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "class weight must be >= 0, got {}",
                    cw.weight
                )));
            }
        }
        Ok(())
    }

    /// Constants for step 1 read off the measured norms of `a^{(1)}`,
    /// `E_1` and `r^1(a^{(1)})`; each is the smallest value making the
    /// corresponding bound hold at every recorded order.
    pub fn seed_from_norms(
        params: &IterationParams,
        norms_a: &NormVector,
        norms_error: &NormVector,
        norms_r: &NormVector,
        target_constant: f64,
    ) -> Result<Self> {
        let lam = params.lambda_f64();
        let big_l = params.lambda_ell();
        let scaled = |nv: &NormVector, from: usize| {
            nv.values()
                .iter()
                .enumerate()
                .skip(from)
                .map(|(k, v)| v * big_l / lam.powi(k as i32))
                .fold(0.0_f64, f64::max)
        };
        let c = norms_a.values()[0].max(scaled(norms_a, 1)).max(target_constant);
        // keep strictly positive even when the error vanishes identically
        let c_err = scaled(norms_error, 0).max(f64::MIN_POSITIVE);
        let c_r = scaled(norms_r, 0).max(f64::MIN_POSITIVE);
        ConstantSet::new(c, c_err, c_r, params.c_f, leibniz_constants(params.k0 + 1), 1)
    }

    fn derivative_loss(&self) -> usize {
        self.classes
            .iter()
            .map(|cw| cw.class.derivative_loss())
            .max()
            .unwrap_or(0)
    }

    fn class_constant(&self, k: usize) -> f64 {
        self.c_k.get(k).copied().unwrap_or_else(|| leibniz_constant(k))
    }

    /// Pieces of `C_diff = C_F · C_err · (2 + (C + C_r)/L)`, the constant in
    /// `‖Δa‖_k <= C_diff λ^k / L^i`.
    pub fn difference_terms(&self, params: &IterationParams) -> DifferenceTerms {
        let big_l = params.lambda_ell();
        let base = self.c_f * self.c_err;
        DifferenceTerms {
            direct: base,
            slack: base,
            coupling: base * (self.c + self.c_r) / big_l,
        }
    }

    /// `C_diff`, including the extra `F^{i+1} - F^i` slack when `F` drifts.
    pub fn difference_constant(&self, params: &IterationParams) -> f64 {
        let base = self.difference_terms(params).total();
        if self.drift > 0.0 {
            base + self.c_f * self.drift * (2.0 + (self.c + self.c_r) / params.lambda_ell())
        } else {
            base
        }
    }

    /// Multiplier of `C_k · C_diff` in the bound on the class-`class` part of
    /// `E_{i+1} = r^i(a^{(i)}) - r^{i+1}(a^{(i+1)})` at order `k`.
    pub fn class_factor(&self, class: &BoundClass, k: usize, params: &IterationParams) -> f64 {
        let big_l = params.lambda_ell();
        let n_k = pair_count(k);
        match class.kind() {
            // C_k/L Σ_j ‖Δa‖_j λ^{k-j}
            ClassKind::R1 => (k + 1) as f64,
            // r(a', Δa) + r(Δa, a), both slots O(λ^j), one extra 1/L
            ClassKind::R2 => 2.0 * n_k * self.c / big_l,
            // gradients of a cost λ/L each, prefactor λ^{-2}
            ClassKind::R3 | ClassKind::R6 => 2.0 * n_k * self.c,
            // derivative on a': extra 1/L; derivative on Δa: exact order
            ClassKind::R4 => n_k * self.c * (1.0 + 1.0 / big_l),
            // as R4 but the prefactor only absorbs one λ
            ClassKind::R5 => n_k * self.c * params.lambda_f64() * (1.0 + 1.0 / big_l),
        }
    }

    /// Error constant at order `k` for the next step, before monotone capping.
    pub fn next_error_constant_at(&self, k: usize, params: &IterationParams) -> f64 {
        let c_diff = self.difference_constant(params);
        let classes: f64 = self
            .classes
            .iter()
            .map(|cw| cw.weight * self.class_constant(k) * self.class_factor(&cw.class, k, params))
            .sum();
        (1.0 + self.drift) * classes * c_diff + self.drift * self.c_r
    }
}

/// Constants valid at step `i + 1` given constants valid at step `i`.
pub fn propagate(cs: &ConstantSet, params: &IterationParams) -> Result<ConstantSet> {
    cs.validate()?;
    let big_l = params.lambda_ell();
    if big_l.is_nan() || big_l <= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "propagation needs λℓ > 1, got {big_l}"
        )));
    }
    let k_top = params.budget(cs.step + 1, cs.derivative_loss()).max(0) as usize;
    let next_err = (0..=k_top)
        .map(|k| cs.next_error_constant_at(k, params))
        .fold(0.0_f64, f64::max);
    let c_err = cs.c_err.max(next_err);
    // r^{i+1}(a^{(i+1)}) = r^i(a^{(i)}) - E_{i+1}
    let c_r = cs.c_r + c_err / big_l.powi(cs.step as i32);
    // ‖a^{(i+1)}‖_k <= C_F (‖T‖_k + ‖r^i‖_k + λ^k / L)
    let c = cs.c.max(cs.c_f * (cs.c + cs.c_r + 1.0));
    Ok(ConstantSet {
        c,
        c_err,
        c_r,
        c_f: cs.c_f,
        c_k: cs.c_k.clone(),
        step: cs.step + 1,
        classes: cs.classes.clone(),
        drift: cs.drift,
    })
}

/// Smallest `λℓ` with `C_r / (λℓ) <= 1 / (3 C_F)`.
pub fn threshold(cs: &ConstantSet) -> f64 {
    3.0 * cs.c_f * cs.c_r
}

/// Starting order `k0` needed so `k1` orders survive `n_steps` steps when
/// each step loses `remainder_order` derivatives.
pub fn predict_budget(k1: usize, n_steps: usize, remainder_order: usize) -> Result<usize> {
    if k1 == 0 || n_steps == 0 {
        return Err(Error::InvalidArgument("k1 and n_steps must be >= 1".into()));
    }
    Ok(k1 + n_steps * remainder_order)
}

/// `cs` followed by `n_steps` propagated sets.
pub fn predict(cs: &ConstantSet, params: &IterationParams, n_steps: usize) -> Result<Vec<ConstantSet>> {
    let mut out = vec![cs.clone()];
    for _ in 0..n_steps {
        let next = propagate(out.last().unwrap(), params)?;
        out.push(next);
    }
    Ok(out)
}

/// One line of the printed constant table.
#[derive(Clone, Debug, PartialEq)]
pub struct LedgerRow {
    pub step: usize,
    pub c: f64,
    pub c_err: f64,
    pub c_r: f64,
    pub c_diff: f64,
    pub threshold: f64,
}

pub fn ledger_table(cs: &ConstantSet, params: &IterationParams, n_steps: usize) -> Result<Vec<LedgerRow>> {
    Ok(predict(cs, params, n_steps)?
        .iter()
        .map(|s| LedgerRow {
            step: s.step,
            c: s.c,
            c_err: s.c_err,
            c_r: s.c_r,
            c_diff: s.difference_constant(params),
            threshold: threshold(s),
        })
        .collect())
}

pub fn format_table(rows: &[LedgerRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>4}  {:>14}  {:>14}  {:>14}  {:>14}  {:>14}",
        "step", "C", "C_err", "C_r", "C_diff", "threshold"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:>4}  {:>14.6e}  {:>14.6e}  {:>14.6e}  {:>14.6e}  {:>14.6e}",
            r.step, r.c, r.c_err, r.c_r, r.c_diff, r.threshold
        );
    }
    out
}

pub fn write_table_csv(rows: &[LedgerRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "step,C,C_err,C_r,C_diff,threshold")?;
    for r in rows {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.step, r.c, r.c_err, r.c_r, r.c_diff, r.threshold
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ClassKind;

    fn unit_set() -> ConstantSet {
        ConstantSet::new(1.0, 1.0, 1.0, 1.0, vec![1.0; 10], 1).unwrap()
    }

    fn params_with(lambda: u32, ell: f64) -> IterationParams {
        IterationParams::new(lambda, ell, 5, 2, 3)
    }

    fn stock_classes() -> Vec<ClassWeight> {
        [ClassKind::R1, ClassKind::R2, ClassKind::R3, ClassKind::R4]
            .into_iter()
            .map(|k| ClassWeight {
                class: BoundClass::new(k).unwrap(),
                weight: 1.0,
            })
            .collect()
    }

    #[test]
    fn difference_constant_by_hand() {
        // C_F (C_err + (C + C_r + L) C_err / L) at unit constants and L = 100
        let p = params_with(25, 4.0);
        let hand = 1.0 * (1.0 + (1.0 + 1.0 + 100.0) * 1.0 / 100.0);
        let c_diff = unit_set().difference_constant(&p);
        assert!((c_diff - 2.02).abs() < 1e-14);
        assert!((c_diff - hand).abs() < 1e-14);
    }

    #[test]
    fn difference_constant_large_product_limit() {
        let cs = ConstantSet::new(1.3, 0.7, 2.0, 1.5, vec![1.0; 4], 1).unwrap();
        let p = params_with(1 << 20, 4.0);
        let limit = 2.0 * cs.c_f * cs.c_err;
        assert!((cs.difference_constant(&p) - limit).abs() / limit < 1e-5);
    }

    #[test]
    fn propagation_is_monotone() {
        let p = params_with(32, 4.0);
        let cs = unit_set().with_classes(stock_classes());
        let chain = predict(&cs, &p, 5).unwrap();
        for w in chain.windows(2) {
            assert!(w[1].c >= w[0].c);
            assert!(w[1].c_err >= w[0].c_err);
            assert!(w[1].c_r >= w[0].c_r);
            assert_eq!(w[1].step, w[0].step + 1);
        }
    }

    #[test]
    fn difference_terms_scale() {
        let p = params_with(32, 4.0);
        let cs = ConstantSet::new(1.2, 0.4, 0.9, 1.5, vec![1.0; 4], 1).unwrap();
        let t = 3.0;
        let scaled = ConstantSet::new(t * cs.c, t * cs.c_err, t * cs.c_r, cs.c_f, cs.c_k.clone(), 1).unwrap();
        let (a, b) = (cs.difference_terms(&p), scaled.difference_terms(&p));
        assert!((b.direct - t * a.direct).abs() < 1e-14);
        assert!((b.slack - t * a.slack).abs() < 1e-14);
        // bilinear: C_err times (C + C_r)
        assert!((b.coupling - t * t * a.coupling).abs() < 1e-12);
    }

    #[test]
    fn propagate_is_deterministic() {
        let p = params_with(32, 4.0);
        let cs = unit_set().with_classes(stock_classes()).with_drift(0.5);
        assert_eq!(propagate(&cs, &p).unwrap(), propagate(&cs, &p).unwrap());
    }

    #[test]
    fn propagate_rejects_bad_inputs() {
        let mut cs = unit_set();
        cs.c_err = 0.0;
        assert!(propagate(&cs, &params_with(32, 4.0)).is_err());
        assert!(propagate(&unit_set(), &params_with(1, 0.5)).is_err());
    }

    #[test]
    fn threshold_formula() {
        let mut cs = unit_set();
        assert_eq!(threshold(&cs), 3.0);
        cs.c_f = 2.0;
        cs.c_r = 5.0;
        assert_eq!(threshold(&cs), 30.0);
    }

    #[test]
    fn budget_formula() {
        assert_eq!(predict_budget(2, 3, 1).unwrap(), 5);
        assert_eq!(predict_budget(2, 3, 0).unwrap(), 2);
        assert!(predict_budget(0, 3, 1).is_err());
    }

    #[test]
    fn leibniz_values() {
        assert_eq!(leibniz_constants(4), vec![1.0, 2.0, 8.0, 24.0, 96.0]);
    }

    #[test]
    fn self_interaction_costs_a_power_of_lambda() {
        let p = params_with(64, 2.0);
        let cs = unit_set();
        let r4 = cs.class_factor(&BoundClass::new(ClassKind::R4).unwrap(), 1, &p);
        let r5 = cs.class_factor(&BoundClass::new(ClassKind::R5).unwrap(), 1, &p);
        assert!((r5 / r4 - 64.0).abs() < 1e-12);
    }

    #[test]
    fn table_has_header_and_rows() {
        let p = params_with(32, 4.0);
        let rows = ledger_table(&unit_set().with_classes(stock_classes()), &p, 3).unwrap();
        assert_eq!(rows.len(), 4);
        let text = format_table(&rows);
        assert!(text.lines().next().unwrap().contains("threshold"));
        let mut csv = Vec::new();
        write_table_csv(&rows, &mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 5);
    }
}
