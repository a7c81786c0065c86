//! Concrete problem instances: a target tensor `T`, the quadratic map
//! `b(a, a) = Σ_c a_c²` with its square-root right inverse `F`, and a
//! remainder `r` assembled from terms tagged with their declared bound class.

use std::fmt;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::gridfield::{self, oscillator, GridFunction, NormVector, PERIOD};

/// The six remainder bound shapes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ClassKind {
    /// linear, prefactor `(λℓ)^{-1}`
    R1,
    /// bilinear, prefactor `(λℓ)^{-2}`
    R2,
    /// bilinear in first derivatives, prefactor `λ^{-2}`
    R3,
    /// one derivative on the first slot, prefactor `(λ²ℓ)^{-1}`
    R4,
    /// self-interaction: one derivative, prefactor only `(λℓ)^{-1}`
    R5,
    /// `s` and `t` derivatives, prefactor `λ^{-(s+t)}`
    R6,
}

/// A declared bound class `‖r(a, b)‖_k <= C_k · prefactor · Σ …`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BoundClass {
    kind: ClassKind,
    s: u32,
    t: u32,
    prefactor_exponents: (u32, u32),
}

impl BoundClass {
    /// Prefactor exponents `(p, q)` of `λ^{-p} ℓ^{-q}` for each class.
    const fn table(kind: ClassKind, s: u32, t: u32) -> (u32, u32) {
        match kind {
            ClassKind::R1 => (1, 1),
            ClassKind::R2 => (2, 2),
            ClassKind::R3 => (2, 0),
            ClassKind::R4 => (2, 1),
            ClassKind::R5 => (1, 1),
            ClassKind::R6 => (s + t, 0),
        }
    }

    /// One of R1–R5. Use [`BoundClass::r6`] for the higher-derivative class.
    pub fn new(kind: ClassKind) -> Result<Self> {
        if kind == ClassKind::R6 {
            return Err(Error::InvalidArgument(
                "class R6 needs derivative orders, use BoundClass::r6".into(),
            ));
        }
        let (s, t) = if kind == ClassKind::R3 { (1, 1) } else { (0, 0) };
        Ok(Self::build(kind, s, t))
    }

    pub fn r6(s: u32, t: u32) -> Result<Self> {
        if s == 0 || t == 0 {
            return Err(Error::InvalidArgument(format!(
                "R6 needs s, t >= 1, got s = {s}, t = {t}"
            )));
        }
        Ok(Self::build(ClassKind::R6, s, t))
    }

    fn build(kind: ClassKind, s: u32, t: u32) -> Self {
        let prefactor_exponents = Self::table(kind, s, t);
        let class = BoundClass {
            kind,
            s,
            t,
            prefactor_exponents,
        };
        assert_eq!(class.prefactor_exponents, Self::table(kind, s, t));
        class
    }

    pub fn kind(&self) -> ClassKind {
        self.kind
    }

    /// Derivative orders `(s, t)` on the two slots (R3: `(1, 1)`).
    pub fn orders(&self) -> (u32, u32) {
        (self.s, self.t)
    }

    pub fn prefactor_exponents(&self) -> (u32, u32) {
        self.prefactor_exponents
    }

    /// `λ^{-p} ℓ^{-q}`.
    pub fn prefactor(&self, lambda: f64, ell: f64) -> f64 {
        let (p, q) = self.prefactor_exponents;
        lambda.powi(-(p as i32)) * ell.powi(-(q as i32))
    }

    pub fn is_linear(&self) -> bool {
        self.kind == ClassKind::R1
    }

    /// Derivative orders consumed per iteration step by a term of this class.
    pub fn derivative_loss(&self) -> usize {
        match self.kind {
            ClassKind::R1 | ClassKind::R2 => 0,
            ClassKind::R3 | ClassKind::R4 | ClassKind::R5 => 1,
            ClassKind::R6 => self.s.max(self.t) as usize,
        }
    }

    /// Right-hand side of the class bound with `C_k = 1`, for `k = 0..=k_max`.
    pub fn bound_rhs(
        &self,
        a: &GridFunction,
        b: &GridFunction,
        k_max: usize,
        lambda: f64,
        ell: f64,
    ) -> Result<Vec<f64>> {
        let pre = self.prefactor(lambda, ell);
        let lam_pow = |e: usize| lambda.powi(e as i32);
        if self.is_linear() {
            let na = a.ck_norm(k_max)?;
            return Ok((0..=k_max)
                .map(|k| pre * (0..=k).map(|j| na.values()[j] * lam_pow(k - j)).sum::<f64>())
                .collect());
        }
        let (na, nb): (Vec<f64>, Vec<f64>) = match self.kind {
            ClassKind::R2 => (
                a.ck_norm(k_max)?.values().to_vec(),
                b.ck_norm(k_max)?.values().to_vec(),
            ),
            ClassKind::R3 | ClassKind::R6 => (
                a.gradient_norm(self.s, k_max)?.values().to_vec(),
                b.gradient_norm(self.t, k_max)?.values().to_vec(),
            ),
            ClassKind::R4 | ClassKind::R5 => (
                a.ck_norm(k_max + 1)?.values()[1..].to_vec(),
                b.ck_norm(k_max)?.values().to_vec(),
            ),
            ClassKind::R1 => unreachable!(),
        };
        Ok((0..=k_max)
            .map(|k| {
                let sum: f64 = na[..=k]
                    .iter()
                    .enumerate()
                    .map(|(j1, x)| {
                        nb[..=k - j1]
                            .iter()
                            .enumerate()
                            .map(|(j2, y)| x * y * lam_pow(k - j1 - j2))
                            .sum::<f64>()
                    })
                    .sum();
                pre * sum
            })
            .collect())
    }
}

impl fmt::Display for BoundClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ClassKind::R6 => write!(f, "R6(s={},t={})", self.s, self.t),
            k => write!(f, "{k:?}"),
        }
    }
}

/// How the slots of a remainder term enter: products of the modulation with
/// values or derivatives along axis 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermShape {
    /// `m · a`
    Linear,
    /// `m · a · b`
    Product,
    /// `m · ∂^s a · ∂^t b`
    GradientProduct { s: u32, t: u32 },
    /// `m · ∂a · b`
    GradientValue,
}

impl TermShape {
    fn for_class(class: &BoundClass) -> Self {
        match class.kind() {
            ClassKind::R1 => TermShape::Linear,
            ClassKind::R2 => TermShape::Product,
            ClassKind::R3 | ClassKind::R6 => {
                let (s, t) = class.orders();
                TermShape::GradientProduct { s, t }
            }
            ClassKind::R4 | ClassKind::R5 => TermShape::GradientValue,
        }
    }
}

/// One modulated remainder term `coefficient · cos(λx) · (slot product)`.
#[derive(Clone, Debug)]
pub struct RemainderTerm {
    class: BoundClass,
    shape: TermShape,
    weight: f64,
    coefficient: f64,
    modulation: GridFunction,
}

impl RemainderTerm {
    /// The stock term of `class` at frequency `lambda` and scale `ell`: its
    /// coefficient is `weight` times the class prefactor, and the modulation
    /// `cos(λ x_0)` makes each derivative cost exactly one power of `λ`.
    pub fn stock(class: BoundClass, lambda: u32, ell: f64, n_points: usize, dim: usize, weight: f64) -> Result<Self> {
        let modulation = oscillator(1.0, lambda, 0.0, 0, n_points, dim)?;
        Ok(RemainderTerm {
            class,
            shape: TermShape::for_class(&class),
            weight,
            coefficient: weight * class.prefactor(lambda as f64, ell),
            modulation,
        })
    }

    pub fn class(&self) -> BoundClass {
        self.class
    }

    pub fn shape(&self) -> TermShape {
        self.shape
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    /// Evaluate on scalar slots `a` (and `b` for bilinear shapes).
    pub fn apply(&self, a: &GridFunction, b: &GridFunction) -> Result<GridFunction> {
        let m = &self.modulation;
        let prod = match self.shape {
            TermShape::Linear => m.pointwise_mul(a)?,
            TermShape::Product => m.pointwise_mul(a)?.pointwise_mul(b)?,
            TermShape::GradientProduct { s, t } => m
                .pointwise_mul(&a.derivative(0, s)?)?
                .pointwise_mul(&b.derivative(0, t)?)?,
            TermShape::GradientValue => m.pointwise_mul(&a.derivative(0, 1)?)?.pointwise_mul(b)?,
        };
        Ok(prod.scale(self.coefficient))
    }
}

/// Reduction of a vector field `a` to the scalar the remainder terms act on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Contraction {
    /// `a` must be scalar.
    Identity,
    /// `Σ_c a_c / sqrt(n_c)`
    NormalizedSum,
}

/// The remainder family `r^i = (1 + drift (λℓ)^{-i}) Σ terms`.
#[derive(Clone, Debug)]
pub struct RemainderSpec {
    terms: Vec<RemainderTerm>,
    contraction: Contraction,
    drift: f64,
    lambda_ell: f64,
}

impl RemainderSpec {
    pub fn new(terms: Vec<RemainderTerm>, contraction: Contraction, drift: f64, lambda_ell: f64) -> Self {
        RemainderSpec {
            terms,
            contraction,
            drift,
            lambda_ell,
        }
    }

    pub fn terms(&self) -> &[RemainderTerm] {
        &self.terms
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn class_tags(&self) -> Vec<BoundClass> {
        self.terms.iter().map(|t| t.class).collect()
    }

    pub fn varies_with_step(&self) -> bool {
        self.drift != 0.0
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest per-step derivative loss among the terms (0 when empty).
    pub fn derivative_loss(&self) -> usize {
        self.terms
            .iter()
            .map(|t| t.class.derivative_loss())
            .max()
            .unwrap_or(0)
    }

    pub fn step_factor(&self, step: usize) -> f64 {
        1.0 + self.drift * self.lambda_ell.powi(-(step as i32))
    }

    fn contract(&self, a: &GridFunction) -> Result<GridFunction> {
        match self.contraction {
            Contraction::Identity if a.n_components() == 1 => Ok(a.clone()),
            Contraction::Identity => Err(Error::IncompatibleGrids(format!(
                "remainder expects a scalar field, got {} components",
                a.n_components()
            ))),
            Contraction::NormalizedSum => Ok(a
                .component_sum()
                .scale(1.0 / (a.n_components() as f64).sqrt())),
        }
    }

    /// `r^step(a)`, a scalar tensor field.
    pub fn evaluate(&self, a: &GridFunction, step: usize) -> Result<GridFunction> {
        let u = self.contract(a)?;
        let mut acc = GridFunction::zeros(a.dim(), a.n_points(), 1)?;
        for term in &self.terms {
            acc = acc.add(&term.apply(&u, &u)?)?;
        }
        let g = self.step_factor(step);
        Ok(acc.scale(g))
    }

    fn push(&mut self, term: RemainderTerm) {
        self.terms.push(term);
    }
}

/// Run parameters shared by the problem, driver and ledger.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationParams {
    /// oscillation frequency λ (an integer mode number)
    pub lambda: u32,
    /// mollification scale ℓ
    pub ell: f64,
    /// highest controlled derivative order
    pub k0: usize,
    /// target order that must survive all steps
    pub k1: usize,
    /// inverse-map constant
    pub c_f: f64,
    /// field-size constant
    pub c: f64,
    pub n_steps: usize,
    pub n_points: usize,
    pub dim: usize,
}

impl Default for IterationParams {
    fn default() -> Self {
        Self::new(32, 4.0, 7, 2, 5)
    }
}

impl IterationParams {
    /// Parameters with stock constants and the smallest power-of-two grid
    /// satisfying the resolution rule.
    pub fn new(lambda: u32, ell: f64, k0: usize, k1: usize, n_steps: usize) -> Self {
        IterationParams {
            lambda,
            ell,
            k0,
            k1,
            c_f: 1.5,
            c: 1.0,
            n_steps,
            n_points: gridfield::resolved_points(lambda, k0),
            dim: 1,
        }
    }

    pub fn lambda_ell(&self) -> f64 {
        self.lambda as f64 * self.ell
    }

    pub fn lambda_f64(&self) -> f64 {
        self.lambda as f64
    }

    /// Norm budget `k0 - step * loss`, possibly negative.
    pub fn budget(&self, step: usize, loss: usize) -> i64 {
        self.k0 as i64 - (step * loss) as i64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.lambda == 0 {
            return bad("lambda must be a positive integer".into());
        }
        if !(self.ell > 0.0 && self.ell < PERIOD) {
            return bad(format!("ell must lie in (0, 2π), got {}", self.ell));
        }
        if !(self.c_f.is_finite() && self.c_f > 0.0) {
            return bad(format!("C_F must be positive, got {}", self.c_f));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return bad(format!("C must be positive, got {}", self.c));
        }
        if self.k1 == 0 {
            return bad("k1 must be >= 1".into());
        }
        if self.k0 > gridfield::MAX_NORM_ORDER {
            return bad(format!(
                "k0 = {} exceeds the safe norm order {}",
                self.k0,
                gridfield::MAX_NORM_ORDER
            ));
        }
        if self.n_steps == 0 {
            return bad("n_steps must be >= 1".into());
        }
        if self.dim != 1 {
            return bad(format!("problem instances are 1-D, got dim {}", self.dim));
        }
        if !self.n_points.is_power_of_two() {
            return bad(format!("n_points must be a power of two, got {}", self.n_points));
        }
        let required = gridfield::required_points(self.lambda, self.k0);
        if self.n_points < required {
            return Err(Error::Unresolved {
                frequency: self.lambda,
                n_points: self.n_points,
                required,
            });
        }
        Ok(())
    }
}

/// `b(a, a) = Σ_c a_c²` with the symmetric right inverse
/// `F(T) = (sqrt(T / n_c), …)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadraticMap {
    pub components: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Scalar,
    TwoComponent,
}

impl ProblemKind {
    pub fn components(self) -> usize {
        match self {
            ProblemKind::Scalar => 1,
            ProblemKind::TwoComponent => 2,
        }
    }
}

/// A complete instance of the abstract iteration.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    kind: ProblemKind,
    target: GridFunction,
    reference: GridFunction,
    map: QuadraticMap,
    remainder: RemainderSpec,
    params: IterationParams,
    amplitude: f64,
    drift: f64,
    self_interaction: f64,
    target_constant: f64,
}

fn stock_classes() -> [BoundClass; 4] {
    [
        BoundClass::build(ClassKind::R1, 0, 0),
        BoundClass::build(ClassKind::R2, 0, 0),
        BoundClass::build(ClassKind::R3, 1, 1),
        BoundClass::build(ClassKind::R4, 0, 0),
    ]
}

/// The four stock remainder terms r1..r4 at the given parameters.
pub fn stock_terms(lambda: u32, ell: f64, n_points: usize) -> Result<Vec<RemainderTerm>> {
    stock_classes()
        .into_iter()
        .map(|c| RemainderTerm::stock(c, lambda, ell, n_points, 1, 1.0))
        .collect()
}

fn build_toy(params: IterationParams, amplitude: f64, drift: f64, kind: ProblemKind) -> Result<ProblemInstance> {
    params.validate()?;
    if params.c_f < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "the square-root toy needs C_F >= 1 so its domain stays positive, got {}",
            params.c_f
        )));
    }
    if !(drift.is_finite() && drift >= 0.0) {
        return Err(Error::InvalidArgument(format!("drift must be >= 0, got {drift}")));
    }
    if !amplitude.is_finite() {
        return Err(Error::InvalidArgument("amplitude must be finite".into()));
    }
    let n = params.n_points;
    let lam_ell = params.lambda_ell();
    let sine = oscillator(1.0, params.lambda, -std::f64::consts::FRAC_PI_2, 0, n, 1)?;
    let reference = GridFunction::constant(1, n, 1, 1.0)?;
    let target = reference.axpy(amplitude, &sine.mollify(params.ell)?)?;

    let radius = 1.0 / (3.0 * params.c_f);
    let measured = target.sub(&reference)?.sup_abs();
    if measured >= radius {
        return Err(Error::Neighbourhood { measured, radius });
    }

    let norms = target.ck_norm(params.k0)?;
    let target_constant = (1..=params.k0)
        .map(|k| norms.values()[k] * lam_ell / params.lambda_f64().powi(k as i32))
        .fold(0.0_f64, f64::max);

    let contraction = match kind {
        ProblemKind::Scalar => Contraction::Identity,
        ProblemKind::TwoComponent => Contraction::NormalizedSum,
    };
    let remainder = RemainderSpec::new(stock_terms(params.lambda, params.ell, n)?, contraction, drift, lam_ell);
    Ok(ProblemInstance {
        kind,
        target,
        reference,
        map: QuadraticMap {
            components: kind.components(),
        },
        remainder,
        params,
        amplitude,
        drift,
        self_interaction: 0.0,
        target_constant,
    })
}

/// Scalar toy: `b(a,a) = a²`, `F = sqrt`, `r = r1 + r2 + r3 + r4`, target
/// `T = 1 + amplitude · mollify(sin(λx), ℓ)`.
pub fn make_scalar_toy(params: IterationParams, amplitude: f64) -> Result<ProblemInstance> {
    build_toy(params, amplitude, 0.0, ProblemKind::Scalar)
}

/// Scalar toy with step-dependent `F^i = (1 + drift (λℓ)^{-i}) sqrt` and
/// `r^i = (1 + drift (λℓ)^{-i}) r`.
pub fn make_varying_toy(params: IterationParams, amplitude: f64, drift: f64) -> Result<ProblemInstance> {
    build_toy(params, amplitude, drift, ProblemKind::Scalar)
}

/// Two-component variant: `b(a,a) = a_1² + a_2²`, `F` splits `T` equally and
/// the remainder acts on `(a_1 + a_2)/sqrt 2`.
pub fn make_two_component_toy(params: IterationParams, amplitude: f64) -> Result<ProblemInstance> {
    build_toy(params, amplitude, 0.0, ProblemKind::TwoComponent)
}

/// Append the self-interaction term `strength · (λℓ)^{-1} cos(λx) ∂a · a`.
pub fn with_self_interaction(mut instance: ProblemInstance, strength: f64) -> Result<ProblemInstance> {
    if !strength.is_finite() || strength < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "self-interaction strength must be >= 0, got {strength}"
        )));
    }
    if strength == 0.0 {
        return Ok(instance);
    }
    let p = &instance.params;
    let term = RemainderTerm::stock(
        BoundClass::build(ClassKind::R5, 0, 0),
        p.lambda,
        p.ell,
        p.n_points,
        1,
        strength,
    )?;
    instance.remainder.push(term);
    instance.self_interaction += strength;
    Ok(instance)
}

impl ProblemInstance {
    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn target(&self) -> &GridFunction {
        &self.target
    }

    pub fn reference(&self) -> &GridFunction {
        &self.reference
    }

    pub fn remainder(&self) -> &RemainderSpec {
        &self.remainder
    }

    pub fn params(&self) -> &IterationParams {
        &self.params
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn self_interaction(&self) -> f64 {
        self.self_interaction
    }

    pub fn map(&self) -> QuadraticMap {
        self.map
    }

    /// `C` with `‖T‖_k <= C λ^k/(λℓ)` for `1 <= k <= k0`.
    pub fn target_constant(&self) -> f64 {
        self.target_constant
    }

    /// Replace the remainder by zero.
    pub fn without_remainder(mut self) -> Self {
        self.remainder.terms.clear();
        self.self_interaction = 0.0;
        self
    }

    /// Radius `1/C_F` of the neighbourhood where `F` is evaluated.
    pub fn domain_radius(&self) -> f64 {
        1.0 / self.params.c_f
    }

    pub fn distance_to_reference(&self, t: &GridFunction) -> Result<f64> {
        Ok(t.sub(&self.reference)?.sup_abs())
    }

    fn map_factor(&self, step: usize) -> f64 {
        1.0 + self.drift * self.params.lambda_ell().powi(-(step as i32))
    }

    /// `b^step(a, a) = Σ_c a_c² / g_step²`.
    pub fn bilinear(&self, a: &GridFunction, step: usize) -> Result<GridFunction> {
        if a.n_components() != self.map.components {
            return Err(Error::IncompatibleGrids(format!(
                "coefficient field has {} components, map expects {}",
                a.n_components(),
                self.map.components
            )));
        }
        let g = self.map_factor(step);
        Ok(a.pointwise_mul(a)?.component_sum().scale(1.0 / (g * g)))
    }

    /// `F^step(t) = g_step · sqrt(t / n_c)` per component.
    pub fn inverse(&self, t: &GridFunction, step: usize) -> Result<GridFunction> {
        if t.n_components() != 1 {
            return Err(Error::IncompatibleGrids("tensor fields are scalar here".into()));
        }
        if t.min_value() <= 0.0 {
            return Err(Error::DomainEscape {
                step,
                distance: self.distance_to_reference(t)?,
                radius: self.domain_radius(),
            });
        }
        let g = self.map_factor(step);
        let nc = self.map.components as f64;
        let root = t.map(|v| g * (v / nc).sqrt())?;
        let parts = vec![root; self.map.components];
        GridFunction::stack(&parts)
    }

    pub fn remainder_at(&self, a: &GridFunction, step: usize) -> Result<GridFunction> {
        self.remainder.evaluate(a, step)
    }

    /// Zero coefficient field of the right shape.
    pub fn zero_field(&self) -> Result<GridFunction> {
        GridFunction::zeros(1, self.params.n_points, self.map.components)
    }

    pub fn target_norms(&self, k_max: usize) -> Result<NormVector> {
        self.target.ck_norm(k_max)
    }
}

fn default_kind() -> ProblemKind {
    ProblemKind::Scalar
}
fn default_lambda() -> u32 {
    32
}
fn default_ell() -> f64 {
    4.0
}
fn default_k0() -> usize {
    7
}
fn default_k1() -> usize {
    2
}
fn default_c_f() -> f64 {
    1.5
}
fn default_amplitude() -> f64 {
    0.1
}
fn default_n_steps() -> usize {
    5
}

/// Problem definition as read from a flat key-value config.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "default_kind")]
    pub kind: ProblemKind,
    #[serde(default = "default_lambda")]
    pub lambda: u32,
    #[serde(default = "default_ell")]
    pub ell: f64,
    #[serde(default = "default_k0")]
    pub k0: usize,
    #[serde(default = "default_k1")]
    pub k1: usize,
    #[serde(rename = "C_F", default = "default_c_f")]
    pub c_f: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub drift: f64,
    #[serde(default)]
    pub r5_strength: f64,
    #[serde(default)]
    pub n_points: Option<usize>,
    #[serde(default = "default_n_steps")]
    pub n_steps: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            kind: default_kind(),
            lambda: default_lambda(),
            ell: default_ell(),
            k0: default_k0(),
            k1: default_k1(),
            c_f: default_c_f(),
            amplitude: default_amplitude(),
            drift: 0.0,
            r5_strength: 0.0,
            n_points: None,
            n_steps: default_n_steps(),
            seed: 0,
        }
    }
}

impl ProblemConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn params(&self) -> IterationParams {
        let mut p = IterationParams::new(self.lambda, self.ell, self.k0, self.k1, self.n_steps);
        p.c_f = self.c_f;
        if let Some(n) = self.n_points {
            p.n_points = n;
        }
        p
    }

    pub fn build(&self) -> Result<ProblemInstance> {
        let params = self.params();
        let base = match self.kind {
            ProblemKind::Scalar => make_varying_toy(params, self.amplitude, self.drift)?,
            ProblemKind::TwoComponent => build_toy(params, self.amplitude, self.drift, ProblemKind::TwoComponent)?,
        };
        with_self_interaction(base, self.r5_strength)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_params() -> IterationParams {
        IterationParams::new(8, 1.0, 3, 1, 2)
    }

    #[test]
    fn prefactor_table() {
        let cases = [
            (ClassKind::R1, (1, 1)),
            (ClassKind::R2, (2, 2)),
            (ClassKind::R3, (2, 0)),
            (ClassKind::R4, (2, 1)),
            (ClassKind::R5, (1, 1)),
        ];
        for (kind, exps) in cases {
            assert_eq!(BoundClass::new(kind).unwrap().prefactor_exponents(), exps);
        }
        assert_eq!(BoundClass::r6(2, 3).unwrap().prefactor_exponents(), (5, 0));
        assert!(BoundClass::r6(0, 1).is_err());
        assert!(BoundClass::new(ClassKind::R6).is_err());
        let r4 = BoundClass::new(ClassKind::R4).unwrap();
        assert!((r4.prefactor(32.0, 0.25) - 1.0 / (32.0 * 32.0 * 0.25)).abs() < 1e-18);
    }

    #[test]
    fn zero_amplitude_target_is_reference() {
        let inst = make_scalar_toy(small_params(), 0.0).unwrap();
        assert_eq!(inst.target(), inst.reference());
        let a = inst.inverse(inst.target(), 1).unwrap();
        assert_eq!(a.sup_abs(), 1.0);
        assert_eq!(inst.bilinear(&a, 1).unwrap(), *inst.target());
    }

    #[test]
    fn square_root_of_unmollified_target() {
        let inst = make_scalar_toy(small_params(), 0.0).unwrap();
        let t = GridFunction::from_fn(1, inst.params().n_points, 1, |x, _| 1.0 + 0.1 * x[0].sin()).unwrap();
        let a = inst.inverse(&t, 1).unwrap();
        let back = a.pointwise_mul(&a).unwrap();
        assert!(back.sub(&t).unwrap().sup_abs() < 1e-12);
    }

    #[test]
    fn remainders_vanish_at_zero() {
        let inst = with_self_interaction(make_varying_toy(small_params(), 0.1, 1.0).unwrap(), 1.0).unwrap();
        let zero = inst.zero_field().unwrap();
        for step in 0..4 {
            assert_eq!(inst.remainder_at(&zero, step).unwrap().sup_abs(), 0.0);
        }
        let two = make_two_component_toy(small_params(), 0.1).unwrap();
        assert_eq!(two.remainder_at(&two.zero_field().unwrap(), 1).unwrap().sup_abs(), 0.0);
    }

    #[test]
    fn neighbourhood_is_enforced() {
        // λℓ small enough that the mollified sine keeps most of its amplitude
        let p = IterationParams::new(8, 0.05, 3, 1, 2);
        match make_scalar_toy(p, 0.5) {
            Err(Error::Neighbourhood { measured, radius }) => {
                assert!(measured >= radius);
                assert!((radius - 1.0 / 4.5).abs() < 1e-15);
            }
            other => panic!("expected neighbourhood error, got {other:?}"),
        }
    }

    #[test]
    fn varying_inverse_relative_change() {
        // λℓ = 100, drift 1: |F^4 - F^3| / |F^3| = (1e-6 - 1e-8)/(1 + 1e-6)
        let p = IterationParams::new(25, 4.0, 3, 1, 2);
        let inst = make_varying_toy(p, 0.1, 1.0).unwrap();
        let f3 = inst.inverse(inst.target(), 3).unwrap();
        let f4 = inst.inverse(inst.target(), 4).unwrap();
        let rel = f4.sub(&f3).unwrap().sup_abs() / f3.sup_abs();
        let expected = 1e-6 * (1.0 - 1.0 / 100.0);
        assert!((rel - expected).abs() / expected < 0.10, "rel = {rel:e}");
    }

    #[test]
    fn self_interaction_zero_is_noop() {
        let base = make_scalar_toy(small_params(), 0.1).unwrap();
        let same = with_self_interaction(base.clone(), 0.0).unwrap();
        assert_eq!(same.remainder().terms().len(), base.remainder().terms().len());
        let more = with_self_interaction(base, 1.0).unwrap();
        assert_eq!(more.remainder().terms().len(), 5);
        assert_eq!(more.remainder().terms()[4].class().kind(), ClassKind::R5);
    }

    #[test]
    fn params_validation() {
        let mut p = small_params();
        p.n_points = 64;
        assert!(matches!(p.validate(), Err(Error::Unresolved { .. })));
        let mut p = small_params();
        p.ell = 7.0;
        assert!(p.validate().is_err());
        let mut p = small_params();
        p.c_f = 0.5;
        assert!(make_scalar_toy(p, 0.0).is_err());
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let err = ProblemConfig::from_toml_str("lambda = 16\nlamda = 3\n").unwrap_err();
        assert!(err.to_string().contains("lamda"), "{err}");
        let cfg = ProblemConfig::from_toml_str("kind = \"two_component\"\nlambda = 16\nC_F = 2\n").unwrap();
        assert_eq!(cfg.kind, ProblemKind::TwoComponent);
        assert_eq!(cfg.c_f, 2.0);
        assert_eq!(cfg.params().n_points, 1024);
    }

    #[test]
    fn derivative_loss_of_stock_remainder() {
        let inst = make_scalar_toy(small_params(), 0.1).unwrap();
        assert_eq!(inst.remainder().derivative_loss(), 1);
        assert_eq!(inst.without_remainder().remainder().derivative_loss(), 0);
    }
}
