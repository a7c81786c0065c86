//! The iteration driver: `a^{(0)} = 0`, `a^{(i+1)} = F^{i+1}(T - r^i(a^{(i)}))`,
//! with per-step norms, the identity cross-check and hypothesis margins.

use std::io::Write;

use crate::error::{Error, Result};
use crate::gridfield::{GridFunction, NormVector};
use crate::ledger::{self, ClassWeight, ConstantSet};
use crate::problem::ProblemInstance;

/// `‖E_i‖_0` below this multiple of `‖T‖_0` stops a run.
pub const FLOATING_POINT_FLOOR: f64 = 1e-14;

/// Identity residuals must stay below this multiple of `1 + ‖T‖_0`.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct IterationState {
    pub step: usize,
    /// `a^{(i)}`
    pub a: GridFunction,
    /// `r^i(a^{(i)})`
    pub r_of_a: GridFunction,
    /// `E_i = T - b^i(a^{(i)}, a^{(i)}) - r^i(a^{(i)})`
    pub error: GridFunction,
    pub norms_a: NormVector,
    pub norms_error: NormVector,
    pub norms_r: NormVector,
}

/// Result of one inductive step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state: IterationState,
    /// `‖E_{i+1} - (r^i(a^{(i)}) - r^{i+1}(a^{(i+1)}))‖_0`
    pub identity_residual: f64,
    /// norms of `a^{(i+1)} - a^{(i)}`
    pub diff_norms: NormVector,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StopReason {
    Completed,
    /// `T - r^i(a^{(i)})` left the domain of `F` before step `step`.
    Diverged { step: usize, distance: f64, radius: f64 },
    /// `‖E_step‖_0` reached the floating-point floor.
    FloatingPointFloor { step: usize },
}

/// Measured/allowed ratios of the four step hypotheses at one `(step, k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginRow {
    pub step: usize,
    pub k: usize,
    /// `‖a‖_0 / C` (k = 0 only)
    pub clause1: Option<f64>,
    /// `‖a‖_k / (C λ^k / L)` (k >= 1)
    pub clause2: Option<f64>,
    /// `‖E_i‖_k / (C_err λ^k / L^i)`
    pub clause3: Option<f64>,
    /// `max(‖r^i(a^{(i)})‖_k, ‖r^{i-1}(a^{(i-1)})‖_k) / (C_r λ^k / L)`
    pub clause4: Option<f64>,
}

impl MarginRow {
    pub fn max_margin(&self) -> f64 {
        [self.clause1, self.clause2, self.clause3, self.clause4]
            .into_iter()
            .flatten()
            .fold(0.0_f64, f64::max)
    }
}

#[derive(Clone, Debug, Default)]
pub struct HypothesisReport {
    /// ledger constants used for steps `1, 2, …`
    pub constants: Vec<ConstantSet>,
    pub rows: Vec<MarginRow>,
    /// set when the ledger could not be evaluated
    pub note: Option<String>,
}

impl HypothesisReport {
    pub fn passes(&self) -> bool {
        self.note.is_none() && self.rows.iter().all(|r| r.max_margin() <= 1.0)
    }

    pub fn max_margin(&self) -> f64 {
        self.rows.iter().map(MarginRow::max_margin).fold(0.0_f64, f64::max)
    }

    pub fn row(&self, step: usize, k: usize) -> Option<&MarginRow> {
        self.rows.iter().find(|r| r.step == step && r.k == k)
    }
}

#[derive(Clone, Debug)]
pub struct IterationTrace {
    pub states: Vec<IterationState>,
    /// entry `i`: residual of the transition `i -> i + 1`
    pub identity_residuals: Vec<f64>,
    /// entry `i`: norms of `a^{(i+1)} - a^{(i)}`
    pub diff_norms: Vec<NormVector>,
    pub report: HypothesisReport,
    pub stop: StopReason,
    /// `λℓ` did not exceed the nominal threshold at run start
    pub below_threshold: bool,
    pub target_sup: f64,
}

impl IterationTrace {
    pub fn diverged(&self) -> bool {
        matches!(self.stop, StopReason::Diverged { .. })
    }

    pub fn last_step(&self) -> usize {
        self.states.last().map_or(0, |s| s.step)
    }

    pub fn max_identity_residual(&self) -> f64 {
        self.identity_residuals.iter().copied().fold(0.0_f64, f64::max)
    }

    /// `‖E_i‖_k` for every recorded step `i >= 1` that carries order `k`.
    pub fn error_norms(&self, k: usize) -> Vec<(usize, f64)> {
        self.states
            .iter()
            .filter(|s| s.step >= 1)
            .filter_map(|s| s.norms_error.get(k).map(|v| (s.step, v)))
            .collect()
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(
            w,
            "step,k,norm_a,norm_error,norm_r,diff_norm,identity_residual,clause1_margin,clause2_margin,clause3_margin,clause4_margin"
        )?;
        let fmt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.16e}"));
        for s in &self.states {
            let i = s.step;
            for k in 0..s.norms_a.len() {
                let diff = self.diff_norms.get(i).and_then(|d| d.get(k));
                let residual = self.identity_residuals.get(i).copied();
                let m = self.report.row(i, k);
                writeln!(
                    w,
                    "{i},{k},{},{},{},{},{},{},{},{},{}",
                    fmt(s.norms_a.get(k)),
                    fmt(s.norms_error.get(k)),
                    fmt(s.norms_r.get(k)),
                    fmt(diff),
                    fmt(residual),
                    fmt(m.and_then(|m| m.clause1)),
                    fmt(m.and_then(|m| m.clause2)),
                    fmt(m.and_then(|m| m.clause3)),
                    fmt(m.and_then(|m| m.clause4)),
                )?;
            }
        }
        Ok(())
    }
}

fn norm_budget(instance: &ProblemInstance, step: usize) -> i64 {
    instance
        .params()
        .budget(step, instance.remainder().derivative_loss())
}

/// `λℓ` at which `‖r(F(T0))‖_0` reaches `1/(3 C_F)` to leading order, using
/// `C_r = lim λℓ ‖r(F(T0))‖_0` (only the linear terms survive the limit).
pub fn nominal_threshold(instance: &ProblemInstance) -> Result<f64> {
    let base = instance.inverse(instance.reference(), 1)?;
    let scalar = base.component_sum().scale(1.0 / (base.n_components() as f64).sqrt());
    let c_r: f64 = instance
        .remainder()
        .terms()
        .iter()
        .filter(|t| t.class().is_linear())
        .map(|t| t.weight())
        .sum::<f64>()
        * scalar.sup_abs();
    Ok(3.0 * instance.params().c_f * c_r)
}

/// The state `a^{(0)} = 0`, for which `r^0(a^{(0)}) = 0` and `E_0 = T`.
pub fn initial_state(instance: &ProblemInstance) -> Result<IterationState> {
    let a = instance.zero_field()?;
    let r_of_a = instance.remainder_at(&a, 0)?;
    let error = instance
        .target()
        .sub(&instance.bilinear(&a, 0)?)?
        .sub(&r_of_a)?;
    let k = instance.params().k0;
    Ok(IterationState {
        step: 0,
        norms_a: a.ck_norm(k)?,
        norms_error: error.ck_norm(k)?,
        norms_r: r_of_a.ck_norm(k)?,
        a,
        r_of_a,
        error,
    })
}

/// One inductive step from `state` (at step `i`) to step `i + 1`.
pub fn step(state: &IterationState, instance: &ProblemInstance) -> Result<StepOutcome> {
    let next = state.step + 1;
    let available = norm_budget(instance, next);
    let required = instance.params().k1;
    if available < required as i64 {
        return Err(Error::DerivativeBudgetExhausted {
            step: next,
            available,
            required,
        });
    }
    let k_max = available as usize;

    let argument = instance.target().sub(&state.r_of_a)?;
    let distance = instance.distance_to_reference(&argument)?;
    let radius = instance.domain_radius();
    if distance >= radius {
        return Err(Error::DomainEscape {
            step: next,
            distance,
            radius,
        });
    }
    let a = instance.inverse(&argument, next)?;
    let r_of_a = instance.remainder_at(&a, next)?;
    // definitional path
    let error = instance
        .target()
        .sub(&instance.bilinear(&a, next)?)?
        .sub(&r_of_a)?;
    // identity path
    let via_identity = state.r_of_a.sub(&r_of_a)?;
    let identity_residual = error.sub(&via_identity)?.sup_abs();
    let diff_norms = a.sub(&state.a)?.ck_norm(k_max)?;
    Ok(StepOutcome {
        state: IterationState {
            step: next,
            norms_a: a.ck_norm(k_max)?,
            norms_error: error.ck_norm(k_max)?,
            norms_r: r_of_a.ck_norm(k_max)?,
            a,
            r_of_a,
            error,
        },
        identity_residual,
        diff_norms,
    })
}

/// `a^{(1)} = F^1(T)`, so `E_1 = -r^1(a^{(1)})`.
pub fn initial_step(instance: &ProblemInstance) -> Result<IterationState> {
    Ok(step(&initial_state(instance)?, instance)?.state)
}

/// Run `n_steps` steps from `a^{(0)} = 0`. Domain escape ends the run early
/// with a partial trace flagged as diverged; so does reaching the
/// floating-point floor (flagged separately).
pub fn run(instance: &ProblemInstance, n_steps: usize) -> Result<IterationTrace> {
    let p = instance.params();
    let available = norm_budget(instance, n_steps);
    if available < p.k1 as i64 {
        return Err(Error::DerivativeBudgetExhausted {
            step: n_steps,
            available,
            required: p.k1,
        });
    }
    let target_sup = instance.target().sup_abs();
    let below_threshold = p.lambda_ell() <= nominal_threshold(instance)?;

    let mut states = vec![initial_state(instance)?];
    let mut identity_residuals = Vec::with_capacity(n_steps);
    let mut diff_norms = Vec::with_capacity(n_steps);
    let mut stop = StopReason::Completed;
    for _ in 0..n_steps {
        match step(states.last().unwrap(), instance) {
            Ok(out) => {
                // an exactly vanishing remainder is a genuine fixed point, keep going
                let floor_hit = !instance.remainder().is_zero()
                    && out.state.norms_error.values()[0] < FLOATING_POINT_FLOOR * target_sup;
                let s = out.state.step;
                identity_residuals.push(out.identity_residual);
                diff_norms.push(out.diff_norms);
                states.push(out.state);
                if floor_hit && s < n_steps {
                    stop = StopReason::FloatingPointFloor { step: s };
                    break;
                }
            }
            Err(Error::DomainEscape {
                step,
                distance,
                radius,
            }) => {
                stop = StopReason::Diverged {
                    step,
                    distance,
                    radius,
                };
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let mut trace = IterationTrace {
        states,
        identity_residuals,
        diff_norms,
        report: HypothesisReport::default(),
        stop,
        below_threshold,
        target_sup,
    };
    trace.report = check_hypotheses(&trace, instance);
    Ok(trace)
}

/// Sup-norm residuals of two readings of the telescoped identity, one entry
/// per state `i + 1 >= 2`:
/// `from_second`: `r^{i+1}(a^{(i+1)}) = r^1(a^{(1)}) - Σ_{j=2}^{i+1} E_j`,
/// `from_first`: `r^{i+1}(a^{(i+1)}) = r^1(a^{(1)}) - Σ_{j=1}^{i+1} E_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct TelescopingCheck {
    pub from_second: Vec<f64>,
    pub from_first: Vec<f64>,
}

pub fn telescoping_check(trace: &IterationTrace) -> Result<TelescopingCheck> {
    let mut check = TelescopingCheck {
        from_second: Vec::new(),
        from_first: Vec::new(),
    };
    let Some(first) = trace.states.get(1) else {
        return Ok(check);
    };
    let base = &first.r_of_a;
    let mut partial = first.error.scale(0.0);
    for s in &trace.states[2..] {
        partial = partial.add(&s.error)?;
        let second = base.sub(&partial)?;
        let with_first = second.sub(&first.error)?;
        check.from_second.push(second.sub(&s.r_of_a)?.sup_abs());
        check.from_first.push(with_first.sub(&s.r_of_a)?.sup_abs());
    }
    Ok(check)
}

/// Ledger constants seeded from step 1, propagated forward, and the
/// measured/allowed ratio of every clause at every recorded `(step, k)`.
pub fn check_hypotheses(trace: &IterationTrace, instance: &ProblemInstance) -> HypothesisReport {
    let mut report = HypothesisReport::default();
    let Some(first) = trace.states.get(1) else {
        return report;
    };
    let p = instance.params();
    let classes: Vec<ClassWeight> = instance
        .remainder()
        .terms()
        .iter()
        .map(|t| ClassWeight {
            class: t.class(),
            weight: t.weight(),
        })
        .collect();
    let seeded = ConstantSet::seed_from_norms(
        p,
        &first.norms_a,
        &first.norms_error,
        &first.norms_r,
        instance.target_constant(),
    );
    let mut cs = match seeded {
        Ok(cs) => cs.with_classes(classes).with_drift(instance.drift()),
        Err(e) => {
            report.note = Some(e.to_string());
            return report;
        }
    };
    let lam = p.lambda_f64();
    let big_l = p.lambda_ell();
    for (idx, state) in trace.states.iter().enumerate().skip(1) {
        if idx > 1 {
            match ledger::propagate(&cs, p) {
                Ok(next) => cs = next,
                Err(e) => {
                    report.note = Some(e.to_string());
                    return report;
                }
            }
        }
        let i = state.step;
        let prev = &trace.states[idx - 1];
        for k in 0..state.norms_a.len() {
            let lk = lam.powi(k as i32);
            let field_bound = cs.c * lk / big_l;
            let r_now = state.norms_r.values()[k];
            let r_prev = prev.norms_r.get(k).unwrap_or(0.0);
            report.rows.push(MarginRow {
                step: i,
                k,
                clause1: (k == 0).then(|| state.norms_a.values()[0] / cs.c),
                clause2: (k >= 1).then(|| state.norms_a.values()[k] / field_bound),
                clause3: Some(state.norms_error.values()[k] / (cs.c_err * lk / big_l.powi(i as i32))),
                clause4: Some(r_now.max(r_prev) / (cs.c_r * lk / big_l)),
            });
        }
        report.constants.push(cs.clone());
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{make_scalar_toy, IterationParams};

    fn toy(lambda: u32, ell: f64, k0: usize, amplitude: f64) -> ProblemInstance {
        make_scalar_toy(IterationParams::new(lambda, ell, k0, 1, 3), amplitude).unwrap()
    }

    #[test]
    fn step_zero_state() {
        let inst = toy(8, 2.0, 4, 0.1);
        let s = initial_state(&inst).unwrap();
        assert_eq!(s.step, 0);
        assert_eq!(s.a.sup_abs(), 0.0);
        assert_eq!(s.r_of_a.sup_abs(), 0.0);
        assert_eq!(s.error, *inst.target());
        assert_eq!(s.norms_a.len(), 5);
    }

    #[test]
    fn initial_step_at_zero_amplitude() {
        // a1 = 1, E1 = -r(1) = -cos(λx) (1/L + 1/L²)
        let inst = toy(8, 2.0, 4, 0.0);
        let s = initial_step(&inst).unwrap();
        assert_eq!(s.a.sup_abs(), 1.0);
        let l = 16.0;
        let expected = GridFunction::from_fn(1, inst.params().n_points, 1, |x, _| {
            -(8.0 * x[0]).cos() * (1.0 / l + 1.0 / (l * l))
        })
        .unwrap();
        assert!(s.error.sub(&expected).unwrap().sup_abs() < 1e-15);
    }

    #[test]
    fn zero_remainder_is_stationary() {
        let inst = toy(8, 2.0, 4, 0.1).without_remainder();
        let trace = run(&inst, 3).unwrap();
        assert_eq!(trace.states.len(), 4);
        for s in &trace.states[1..] {
            assert_eq!(s.error.sup_abs(), 0.0);
        }
        assert_eq!(trace.states[2].a, trace.states[1].a);
        assert_eq!(trace.states[3].a, trace.states[2].a);
        assert!(trace.report.passes());
    }

    #[test]
    fn telescoping_starts_at_second_error() {
        let inst = toy(8, 4.0, 5, 0.1);
        let trace = run(&inst, 3).unwrap();
        let check = telescoping_check(&trace).unwrap();
        assert_eq!(check.from_second.len(), 2);
        assert!(check.from_second.iter().all(|&r| r < 1e-12));
        // including E_1 = -r^1(a^{(1)}) double counts the base term
        let r1 = trace.states[1].r_of_a.sup_abs();
        assert!(check.from_first.iter().all(|&r| (r - r1).abs() < 1e-12));
    }

    #[test]
    fn single_step_trace() {
        let inst = toy(8, 2.0, 4, 0.1);
        let trace = run(&inst, 1).unwrap();
        assert_eq!(trace.states.len(), 2);
        let direct = initial_step(&inst).unwrap();
        assert_eq!(trace.states[1].a, direct.a);
        assert_eq!(trace.states[1].error, direct.error);
    }

    #[test]
    fn budget_is_enforced() {
        let inst = toy(8, 2.0, 3, 0.1);
        // k1 = 1, loss 1: three steps need k0 >= 4
        assert!(matches!(
            run(&inst, 3),
            Err(Error::DerivativeBudgetExhausted { step: 3, available: 0, required: 1 })
        ));
        assert!(run(&inst, 2).is_ok());
    }

    #[test]
    fn norm_budget_shrinks_per_step() {
        let inst = toy(8, 2.0, 5, 0.1);
        let trace = run(&inst, 3).unwrap();
        let lens: Vec<usize> = trace.states.iter().map(|s| s.norms_a.len()).collect();
        assert_eq!(lens, vec![6, 5, 4, 3]);
        let diffs: Vec<usize> = trace.diff_norms.iter().map(NormVector::len).collect();
        assert_eq!(diffs, vec![5, 4, 3]);
    }

    #[test]
    fn csv_layout() {
        let inst = toy(8, 2.0, 4, 0.1);
        let trace = run(&inst, 2).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "step,k,norm_a,norm_error,norm_r,diff_norm,identity_residual,clause1_margin,clause2_margin,clause3_margin,clause4_margin"
        );
        // states carry 5 + 4 + 3 orders
        assert_eq!(lines.count(), 12);
    }
}
