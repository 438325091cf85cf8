//! Tensor values and tensor fields on a single coordinate chart.
//!
//! Everything is dense: a rank-k tensor on a chart of dimension `n` stores
//! `n^k` components in row-major slot order. Charts are capped at
//! [`MAX_DIMENSION`] coordinates, which keeps the dense representation cheap
//! and the pointwise linear algebra trivial.
//!
//! Fields are backed either by a grid of [`ScalarExpression`] components
//! (partials are computed symbolically and are exact) or by an opaque
//! evaluation callback differentiated with O(h²) central differences.
//! All evaluation is pure; fields can be shared across threads.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::expr::{CombineError, EvalError, ScalarExpression};
use crate::float;

/// Charts are desk-scale: dense storage is enforced up to this dimension.
pub const MAX_DIMENSION: usize = 8;

/// Central-difference step for callback-backed fields.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Looser step used when a finite-difference quantity is differenced again
/// (error compounding makes the default step too aggressive).
pub const NESTED_FD_STEP: f64 = 1e-4;

/// Errors from tensor construction and field evaluation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("chart dimension {0} exceeds the supported maximum {MAX_DIMENSION}")]
    DimensionTooLarge(usize),
    #[error("chart dimension must be at least 1")]
    DimensionZero,
    #[error("expected {expected} components, got {got}")]
    ComponentCount { expected: usize, got: usize },
    #[error("coordinate {index} of point is not finite")]
    NonFiniteCoordinate { index: usize },
    #[error("point has {got} coordinates, chart has {expected}")]
    PointDimension { expected: usize, got: usize },
    #[error("variance mismatch: {0}")]
    SignatureMismatch(String),
    #[error("component expression has dimension {got}, field has {expected}")]
    ExpressionDimension { expected: usize, got: usize },
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("cannot combine component expressions: {0}")]
    Combine(#[from] CombineError),
    #[error(
        "finite-difference stencil for coordinate {coordinate} produced a non-finite value \
         (point near a domain boundary?)"
    )]
    StencilFailure { coordinate: usize },
    #[error("field evaluation produced a non-finite component")]
    NonFiniteValue,
    #[error("domain box interval {index} is empty or not finite")]
    BadInterval { index: usize },
}

/// A point of the chart, given by its coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    coords: Vec<f64>,
}

impl ChartPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self, TensorError> {
        if coords.is_empty() {
            return Err(TensorError::DimensionZero);
        }
        if coords.len() > MAX_DIMENSION {
            return Err(TensorError::DimensionTooLarge(coords.len()));
        }
        for (index, c) in coords.iter().enumerate() {
            if !c.is_finite() {
                return Err(TensorError::NonFiniteCoordinate { index });
            }
        }
        Ok(ChartPoint { coords })
    }

    pub fn dimension(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// The same point with coordinate `i` shifted by `delta`.
    pub fn shifted(&self, i: usize, delta: f64) -> ChartPoint {
        let mut coords = self.coords.clone();
        coords[i] += delta;
        ChartPoint { coords }
    }
}

/// Per-coordinate closed intervals bounding the chart domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox {
    intervals: Vec<(f64, f64)>,
}

impl DomainBox {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self, TensorError> {
        if intervals.is_empty() {
            return Err(TensorError::DimensionZero);
        }
        if intervals.len() > MAX_DIMENSION {
            return Err(TensorError::DimensionTooLarge(intervals.len()));
        }
        for (index, (lo, hi)) in intervals.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(TensorError::BadInterval { index });
            }
        }
        Ok(DomainBox { intervals })
    }

    /// The cube `[lo, hi]^n`.
    pub fn cube(dimension: usize, lo: f64, hi: f64) -> Result<Self, TensorError> {
        DomainBox::new(vec![(lo, hi); dimension])
    }

    pub fn dimension(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// Maps unit-cube coordinates to a chart point of the box.
    pub fn lerp(&self, unit: &[f64]) -> ChartPoint {
        let coords = self
            .intervals
            .iter()
            .zip(unit)
            .map(|((lo, hi), t)| lo + t * (hi - lo))
            .collect();
        ChartPoint { coords }
    }

    pub fn center(&self) -> ChartPoint {
        let coords = self
            .intervals
            .iter()
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect();
        ChartPoint { coords }
    }
}

/// Whether a tensor slot is contravariant (upper index) or covariant (lower).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variance {
    Upper,
    Lower,
}

/// Signature of a vector field.
pub const VECTOR: &[Variance] = &[Variance::Upper];
/// Signature of a 1-form field.
pub const ONE_FORM: &[Variance] = &[Variance::Lower];
/// Signature of a metric-like (0,2) field.
pub const METRIC: &[Variance] = &[Variance::Lower, Variance::Lower];
/// Signature of a torsion-like (1,2) field, `T^k_{ij}`.
pub const TORSION: &[Variance] = &[Variance::Upper, Variance::Lower, Variance::Lower];
/// Signature of a non-metricity-like (0,3) field, `Q_{zij}`.
pub const NONMETRICITY: &[Variance] = &[Variance::Lower, Variance::Lower, Variance::Lower];

fn component_count(dim: usize, rank: usize) -> usize {
    dim.pow(rank as u32)
}

/// Iterates all multi-indices of the given rank in row-major order.
fn for_each_index(dim: usize, rank: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; rank];
    loop {
        f(&idx);
        let mut slot = rank;
        loop {
            if slot == 0 {
                return;
            }
            slot -= 1;
            idx[slot] += 1;
            if idx[slot] < dim {
                break;
            }
            idx[slot] = 0;
        }
    }
}

/// Dense pointwise tensor value.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorValue {
    dim: usize,
    variance: Vec<Variance>,
    components: Vec<f64>,
}

impl TensorValue {
    pub fn zeros(variance: &[Variance], dim: usize) -> Self {
        TensorValue {
            dim,
            variance: variance.to_vec(),
            components: vec![0.0; component_count(dim, variance.len())],
        }
    }

    pub fn from_components(
        variance: &[Variance],
        dim: usize,
        components: Vec<f64>,
    ) -> Result<Self, TensorError> {
        let expected = component_count(dim, variance.len());
        if components.len() != expected {
            return Err(TensorError::ComponentCount {
                expected,
                got: components.len(),
            });
        }
        Ok(TensorValue {
            dim,
            variance: variance.to_vec(),
            components,
        })
    }

    pub fn from_fn(variance: &[Variance], dim: usize, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut value = TensorValue::zeros(variance, dim);
        let mut flat = 0;
        for_each_index(dim, variance.len(), |idx| {
            value.components[flat] = f(idx);
            flat += 1;
        });
        value
    }

    pub fn scalar(v: f64) -> Self {
        TensorValue {
            dim: 1,
            variance: Vec::new(),
            components: vec![v],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    pub fn variance(&self) -> &[Variance] {
        &self.variance
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        let mut flat = 0;
        for &i in idx {
            debug_assert!(i < self.dim);
            flat = flat * self.dim + i;
        }
        flat
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.components[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let o = self.offset(idx);
        self.components[o] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(|c| c.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.components
            .iter()
            .fold(0.0, |acc, c| acc.max(float::abs(*c)))
    }

    /// Componentwise `max |self - other|`; signatures must agree.
    pub fn max_abs_diff(&self, other: &TensorValue) -> Result<f64, TensorError> {
        if self.variance != other.variance || self.dim != other.dim {
            return Err(TensorError::SignatureMismatch(
                "tensors differ in signature or dimension".to_string(),
            ));
        }
        Ok(self
            .components
            .iter()
            .zip(&other.components)
            .fold(0.0, |acc, (a, b)| acc.max(float::abs(a - b))))
    }

    /// Largest violation of symmetry under exchange of slots `a` and `b`.
    pub fn max_asymmetry(&self, a: usize, b: usize) -> f64 {
        let mut worst = 0.0f64;
        for_each_index(self.dim, self.rank(), |idx| {
            let mut swapped = idx.to_vec();
            swapped.swap(a, b);
            let delta = float::abs(self.get(idx) - self.get(&swapped));
            if delta > worst {
                worst = delta;
            }
        });
        worst
    }

    /// Largest violation of antisymmetry under exchange of slots `a` and `b`.
    pub fn max_antisymmetry_defect(&self, a: usize, b: usize) -> f64 {
        let mut worst = 0.0f64;
        for_each_index(self.dim, self.rank(), |idx| {
            let mut swapped = idx.to_vec();
            swapped.swap(a, b);
            let delta = float::abs(self.get(idx) + self.get(&swapped));
            if delta > worst {
                worst = delta;
            }
        });
        worst
    }

    /// Outer product; the result's signature is the concatenation.
    pub fn tensor_product(&self, other: &TensorValue) -> Result<TensorValue, TensorError> {
        if self.dim != other.dim {
            return Err(TensorError::SignatureMismatch(format!(
                "tensor product of dimensions {} and {}",
                self.dim, other.dim
            )));
        }
        let mut variance = self.variance.clone();
        variance.extend_from_slice(&other.variance);
        let mut components = Vec::with_capacity(self.components.len() * other.components.len());
        for a in &self.components {
            for b in &other.components {
                components.push(a * b);
            }
        }
        Ok(TensorValue {
            dim: self.dim,
            variance,
            components,
        })
    }

    /// Contracts slot `upper` (contravariant) against slot `lower`
    /// (covariant), summing the paired axis.
    pub fn contract(&self, upper: usize, lower: usize) -> Result<TensorValue, TensorError> {
        if upper == lower || upper >= self.rank() || lower >= self.rank() {
            return Err(TensorError::SignatureMismatch(format!(
                "invalid contraction slots ({upper}, {lower}) for rank {}",
                self.rank()
            )));
        }
        if self.variance[upper] != Variance::Upper || self.variance[lower] != Variance::Lower {
            return Err(TensorError::SignatureMismatch(
                "contraction must pair one upper slot with one lower slot".to_string(),
            ));
        }
        let mut variance = Vec::with_capacity(self.rank() - 2);
        for (slot, v) in self.variance.iter().enumerate() {
            if slot != upper && slot != lower {
                variance.push(*v);
            }
        }
        let dim = self.dim;
        let result = TensorValue::from_fn(&variance, dim, |out_idx| {
            let mut full = vec![0usize; self.rank()];
            let mut src = 0;
            for (slot, value) in full.iter_mut().enumerate() {
                if slot != upper && slot != lower {
                    *value = out_idx[src];
                    src += 1;
                }
            }
            let mut sum = 0.0;
            for k in 0..dim {
                full[upper] = k;
                full[lower] = k;
                sum += self.get(&full);
            }
            sum
        });
        Ok(result)
    }
}

type FieldCallback = Arc<dyn Fn(&ChartPoint) -> TensorValue + Send + Sync>;

#[derive(Clone)]
enum Backing {
    Expressions {
        components: Vec<ScalarExpression>,
        /// First partials, component-major: `partials[c * n + i] = ∂ᵢ components[c]`.
        partials: Vec<ScalarExpression>,
    },
    Callback {
        callback: FieldCallback,
        step: f64,
    },
}

/// A tensor-valued function of the chart point.
#[derive(Clone)]
pub struct TensorField {
    dim: usize,
    variance: Vec<Variance>,
    backing: Backing,
}

impl core::fmt::Debug for TensorField {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let backing = match &self.backing {
            Backing::Expressions { .. } => "expressions",
            Backing::Callback { .. } => "callback",
        };
        f.debug_struct("TensorField")
            .field("dim", &self.dim)
            .field("variance", &self.variance)
            .field("backing", &backing)
            .finish()
    }
}

impl TensorField {
    fn check_dim(dim: usize) -> Result<(), TensorError> {
        if dim == 0 {
            return Err(TensorError::DimensionZero);
        }
        if dim > MAX_DIMENSION {
            return Err(TensorError::DimensionTooLarge(dim));
        }
        Ok(())
    }

    /// Expression-backed field; component order is row-major in the slots.
    /// First partials are derived symbolically up front.
    pub fn from_expressions(
        variance: &[Variance],
        dim: usize,
        components: Vec<ScalarExpression>,
    ) -> Result<Self, TensorError> {
        Self::check_dim(dim)?;
        let expected = component_count(dim, variance.len());
        if components.len() != expected {
            return Err(TensorError::ComponentCount {
                expected,
                got: components.len(),
            });
        }
        for c in &components {
            if c.dimension() != dim {
                return Err(TensorError::ExpressionDimension {
                    expected: dim,
                    got: c.dimension(),
                });
            }
        }
        let mut partials = Vec::with_capacity(components.len() * dim);
        for c in &components {
            for i in 0..dim {
                partials.push(c.differentiate(i));
            }
        }
        Ok(TensorField {
            dim,
            variance: variance.to_vec(),
            backing: Backing::Expressions {
                components,
                partials,
            },
        })
    }

    /// Convenience: parse each component from source text (no parameters).
    pub fn parse_components(
        variance: &[Variance],
        dim: usize,
        sources: &[&str],
    ) -> Result<Self, TensorError> {
        let components = sources
            .iter()
            .map(|s| crate::expr::parse_expression(s, dim))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| TensorError::SignatureMismatch(e.to_string()))?;
        Self::from_expressions(variance, dim, components)
    }

    /// Field with constant components equal to `value`.
    pub fn constant(value: &TensorValue) -> Result<Self, TensorError> {
        let components = value
            .components()
            .iter()
            .map(|c| ScalarExpression::constant(*c, value.dim()))
            .collect();
        Self::from_expressions(value.variance(), value.dim(), components)
    }

    /// The coordinate frame field `∂ₖ`.
    pub fn coordinate_vector(dim: usize, k: usize) -> Result<Self, TensorError> {
        Self::check_dim(dim)?;
        let mut value = TensorValue::zeros(VECTOR, dim);
        value.set(&[k], 1.0);
        Self::constant(&value)
    }

    /// The coordinate coframe field `dxₖ`.
    pub fn coordinate_form(dim: usize, k: usize) -> Result<Self, TensorError> {
        Self::check_dim(dim)?;
        let mut value = TensorValue::zeros(ONE_FORM, dim);
        value.set(&[k], 1.0);
        Self::constant(&value)
    }

    /// Callback-backed field; partials fall back to central differences with
    /// the given step (default [`DEFAULT_FD_STEP`]).
    pub fn from_callback(
        variance: &[Variance],
        dim: usize,
        callback: impl Fn(&ChartPoint) -> TensorValue + Send + Sync + 'static,
        step: Option<f64>,
    ) -> Result<Self, TensorError> {
        Self::check_dim(dim)?;
        Ok(TensorField {
            dim,
            variance: variance.to_vec(),
            backing: Backing::Callback {
                callback: Arc::new(callback),
                step: step.unwrap_or(DEFAULT_FD_STEP),
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn variance(&self) -> &[Variance] {
        &self.variance
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    /// True when partials are computed symbolically (exact).
    pub fn is_exact(&self) -> bool {
        matches!(self.backing, Backing::Expressions { .. })
    }

    /// The finite-difference step used by a callback backing, if any.
    pub fn fd_step(&self) -> Option<f64> {
        match &self.backing {
            Backing::Expressions { .. } => None,
            Backing::Callback { step, .. } => Some(*step),
        }
    }

    /// Component expressions, when expression-backed.
    pub fn expressions(&self) -> Option<&[ScalarExpression]> {
        match &self.backing {
            Backing::Expressions { components, .. } => Some(components),
            Backing::Callback { .. } => None,
        }
    }

    fn check_point(&self, p: &ChartPoint) -> Result<(), TensorError> {
        if p.dimension() != self.dim {
            return Err(TensorError::PointDimension {
                expected: self.dim,
                got: p.dimension(),
            });
        }
        Ok(())
    }

    /// Componentwise evaluation at `p`.
    pub fn evaluate(&self, p: &ChartPoint) -> Result<TensorValue, TensorError> {
        self.check_point(p)?;
        match &self.backing {
            Backing::Expressions { components, .. } => {
                let mut values = Vec::with_capacity(components.len());
                for c in components {
                    values.push(c.evaluate(p.coords())?);
                }
                TensorValue::from_components(&self.variance, self.dim, values)
            }
            Backing::Callback { callback, .. } => {
                let value = callback(p);
                if value.dim() != self.dim || value.variance() != self.variance.as_slice() {
                    return Err(TensorError::SignatureMismatch(
                        "callback returned a value of the wrong signature".to_string(),
                    ));
                }
                if !value.is_finite() {
                    return Err(TensorError::NonFiniteValue);
                }
                Ok(value)
            }
        }
    }

    /// Componentwise `∂ᵢ` at `p`: exact for expression-backed fields, central
    /// difference otherwise.
    pub fn partial(&self, p: &ChartPoint, i: usize) -> Result<TensorValue, TensorError> {
        self.check_point(p)?;
        assert!(i < self.dim, "partial index out of range");
        match &self.backing {
            Backing::Expressions { partials, .. } => {
                let mut values = Vec::with_capacity(partials.len() / self.dim);
                for c in 0..(partials.len() / self.dim) {
                    values.push(partials[c * self.dim + i].evaluate(p.coords())?);
                }
                TensorValue::from_components(&self.variance, self.dim, values)
            }
            Backing::Callback { callback, step } => {
                let forward = callback(&p.shifted(i, *step));
                let backward = callback(&p.shifted(i, -*step));
                if !forward.is_finite() || !backward.is_finite() {
                    return Err(TensorError::StencilFailure { coordinate: i });
                }
                let components = forward
                    .components()
                    .iter()
                    .zip(backward.components())
                    .map(|(f, b)| (f - b) / (2.0 * step))
                    .collect();
                TensorValue::from_components(&self.variance, self.dim, components)
            }
        }
    }

    /// Pointwise sum of two fields of identical signature. Symbolic when both
    /// sides are expression-backed.
    pub fn field_sum(&self, other: &TensorField) -> Result<TensorField, TensorError> {
        if self.variance != other.variance || self.dim != other.dim {
            return Err(TensorError::SignatureMismatch(
                "field sum requires identical signatures".to_string(),
            ));
        }
        match (&self.backing, &other.backing) {
            (
                Backing::Expressions { components: a, .. },
                Backing::Expressions { components: b, .. },
            ) => {
                let components = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| x.try_add(y))
                    .collect::<Result<Vec<_>, _>>()?;
                TensorField::from_expressions(&self.variance, self.dim, components)
            }
            _ => {
                let left = self.clone();
                let right = other.clone();
                let variance = self.variance.clone();
                let dim = self.dim;
                let step = self
                    .fd_step()
                    .unwrap_or(DEFAULT_FD_STEP)
                    .max(other.fd_step().unwrap_or(DEFAULT_FD_STEP));
                TensorField::from_callback(
                    &self.variance,
                    self.dim,
                    // Operand failures propagate as non-finite components and
                    // surface through the caller's finiteness checks.
                    move |p| match (left.evaluate(p), right.evaluate(p)) {
                        (Ok(a), Ok(b)) => TensorValue::from_fn(a.variance(), a.dim(), |idx| {
                            a.get(idx) + b.get(idx)
                        }),
                        _ => TensorValue::from_fn(&variance, dim, |_| f64::NAN),
                    },
                    Some(step),
                )
            }
        }
    }

    /// Pointwise outer product of two fields. Symbolic when both sides are
    /// expression-backed.
    pub fn field_product(&self, other: &TensorField) -> Result<TensorField, TensorError> {
        if self.dim != other.dim {
            return Err(TensorError::SignatureMismatch(
                "field product requires equal chart dimensions".to_string(),
            ));
        }
        let mut variance = self.variance.clone();
        variance.extend_from_slice(&other.variance);
        match (&self.backing, &other.backing) {
            (
                Backing::Expressions { components: a, .. },
                Backing::Expressions { components: b, .. },
            ) => {
                let mut components = Vec::with_capacity(a.len() * b.len());
                for x in a {
                    for y in b {
                        components.push(x.try_mul(y)?);
                    }
                }
                TensorField::from_expressions(&variance, self.dim, components)
            }
            _ => {
                let left = self.clone();
                let right = other.clone();
                let out_variance = variance.clone();
                let dim = self.dim;
                let step = self
                    .fd_step()
                    .unwrap_or(DEFAULT_FD_STEP)
                    .max(other.fd_step().unwrap_or(DEFAULT_FD_STEP));
                TensorField::from_callback(
                    &variance,
                    self.dim,
                    move |p| match (left.evaluate(p), right.evaluate(p)) {
                        (Ok(a), Ok(b)) => a.tensor_product(&b).expect("dimension checked above"),
                        _ => TensorValue::from_fn(&out_variance, dim, |_| f64::NAN),
                    },
                    Some(step),
                )
            }
        }
    }
}

fn expect_signature(
    field: &TensorField,
    variance: &[Variance],
    what: &str,
) -> Result<(), TensorError> {
    if field.variance() != variance {
        return Err(TensorError::SignatureMismatch(format!(
            "{what} expects signature {variance:?}, got {:?}",
            field.variance()
        )));
    }
    Ok(())
}

/// Lie bracket `[X, Y]^k = X^i ∂ᵢY^k − Y^i ∂ᵢX^k` evaluated at `p`.
pub fn lie_bracket(
    x: &TensorField,
    y: &TensorField,
    p: &ChartPoint,
) -> Result<TensorValue, TensorError> {
    expect_signature(x, VECTOR, "lie_bracket")?;
    expect_signature(y, VECTOR, "lie_bracket")?;
    let n = x.dim();
    let xv = x.evaluate(p)?;
    let yv = y.evaluate(p)?;
    let dx: Vec<TensorValue> = (0..n).map(|i| x.partial(p, i)).collect::<Result<_, _>>()?;
    let dy: Vec<TensorValue> = (0..n).map(|i| y.partial(p, i)).collect::<Result<_, _>>()?;
    Ok(TensorValue::from_fn(VECTOR, n, |idx| {
        let k = idx[0];
        let mut sum = 0.0;
        for i in 0..n {
            sum += xv.get(&[i]) * dy[i].get(&[k]) - yv.get(&[i]) * dx[i].get(&[k]);
        }
        sum
    }))
}

/// The Lie bracket as a field, so brackets can be nested.
///
/// Symbolic (exact) when both inputs are expression-backed; otherwise a
/// callback field differenced with [`NESTED_FD_STEP`].
pub fn lie_bracket_field(x: &TensorField, y: &TensorField) -> Result<TensorField, TensorError> {
    expect_signature(x, VECTOR, "lie_bracket_field")?;
    expect_signature(y, VECTOR, "lie_bracket_field")?;
    let n = x.dim();
    match (x.expressions(), y.expressions()) {
        (Some(xc), Some(yc)) => {
            let mut components = Vec::with_capacity(n);
            for k in 0..n {
                let mut acc = ScalarExpression::constant(0.0, n);
                for i in 0..n {
                    let term = xc[i]
                        .try_mul(&yc[k].differentiate(i))?
                        .try_sub(&yc[i].try_mul(&xc[k].differentiate(i))?)?;
                    acc = acc.try_add(&term)?;
                }
                components.push(acc);
            }
            TensorField::from_expressions(VECTOR, n, components)
        }
        _ => {
            let xf = x.clone();
            let yf = y.clone();
            TensorField::from_callback(
                VECTOR,
                n,
                move |p| match lie_bracket(&xf, &yf, p) {
                    Ok(v) => v,
                    Err(_) => TensorValue::from_fn(VECTOR, n, |_| f64::NAN),
                },
                Some(NESTED_FD_STEP),
            )
        }
    }
}

/// Exterior derivative of a 1-form at `p`: `(dτ)_{ij} = ∂ᵢτ_j − ∂ⱼτ_i`.
///
/// On coordinate fields this is the convention
/// `(dτ)(X,Y) = Xτ(Y) − Yτ(X) − τ([X,Y])`.
pub fn exterior_derivative_1form(
    tau: &TensorField,
    p: &ChartPoint,
) -> Result<TensorValue, TensorError> {
    expect_signature(tau, ONE_FORM, "exterior_derivative_1form")?;
    let n = tau.dim();
    let dtau: Vec<TensorValue> = (0..n)
        .map(|i| tau.partial(p, i))
        .collect::<Result<_, _>>()?;
    Ok(TensorValue::from_fn(METRIC, n, |idx| {
        let (i, j) = (idx[0], idx[1]);
        dtau[i].get(&[j]) - dtau[j].get(&[i])
    }))
}

/// Lie derivative of a (0,2) field along a vector field at `p`:
/// `(L_ξ g)_{ij} = ξ^k ∂_k g_{ij} + g_{kj} ∂ᵢξ^k + g_{ik} ∂ⱼξ^k`.
pub fn lie_derivative_metric(
    xi: &TensorField,
    g: &TensorField,
    p: &ChartPoint,
) -> Result<TensorValue, TensorError> {
    expect_signature(xi, VECTOR, "lie_derivative_metric")?;
    expect_signature(g, METRIC, "lie_derivative_metric")?;
    let n = g.dim();
    let xiv = xi.evaluate(p)?;
    let gv = g.evaluate(p)?;
    let dxi: Vec<TensorValue> = (0..n).map(|i| xi.partial(p, i)).collect::<Result<_, _>>()?;
    let dg: Vec<TensorValue> = (0..n).map(|i| g.partial(p, i)).collect::<Result<_, _>>()?;
    Ok(TensorValue::from_fn(METRIC, n, |idx| {
        let (i, j) = (idx[0], idx[1]);
        let mut sum = 0.0;
        for (k, dgk) in dg.iter().enumerate() {
            sum += xiv.get(&[k]) * dgk.get(&[i, j])
                + gv.get(&[k, j]) * dxi[i].get(&[k])
                + gv.get(&[i, k]) * dxi[j].get(&[k]);
        }
        sum
    }))
}
