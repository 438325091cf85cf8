//! Closed-form scalar expressions over chart coordinates.
//!
//! Expressions are the component functions of every tensor field in this
//! crate. They are parsed from a small infix language (`x0^2 + sin(x1)`,
//! see `docs/expression-grammar.md` in the repository), evaluated at chart
//! points, and differentiated symbolically so that field partials are exact.
//!
//! Identifiers `x0`, `x1`, … denote chart coordinates; `sin`, `cos`, `tan`,
//! `exp`, `log`, `sqrt` are the built-in functions (application requires
//! parentheses); every other identifier is a named parameter that must be
//! bound to a value before evaluation. Exponents are restricted to integer or
//! rational constants, which keeps derivatives branch-cut free.
//!
//! [`ScalarExpression`] is immutable after construction and safe to evaluate
//! concurrently.

mod parser;

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;

use crate::float;

pub use parser::ParseError;

/// Constant rational exponent of a [`Expr::Pow`] node, kept in lowest terms
/// with a positive denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exponent {
    num: i64,
    den: i64,
}

impl Exponent {
    pub fn integer(num: i64) -> Self {
        Exponent { num, den: 1 }
    }

    /// Reduced rational exponent. `den` must be nonzero.
    pub fn rational(num: i64, den: i64) -> Self {
        assert!(den != 0, "exponent denominator must be nonzero");
        let sign = if den < 0 { -1 } else { 1 };
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()) as i64;
        Exponent {
            num: sign * num / g,
            den: sign * den / g,
        }
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn den(&self) -> i64 {
        self.den
    }

    pub fn is_integer(&self) -> bool {
        self.den == 1
    }

    fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    fn minus_one(&self) -> Exponent {
        Exponent::rational(self.num - self.den, self.den)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    if a == 0 {
        return b.max(1);
    }
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Expression tree. Children are boxed; the tree is immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Constant(f64),
    /// Chart coordinate `x{i}`.
    Coordinate(usize),
    /// Named parameter, bound to a value at evaluation time.
    Parameter(String),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, Exponent),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Tan(Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Sqrt(Box<Expr>),
}

/// The arithmetic operators build structurally simplified trees:
/// `0 + e → e`, `1 * e → e`, `0 * e → 0`, `e / 1 → e`, `e^1 → e`,
/// `e^0 → 1`, and constants fold whenever the result is finite.
impl core::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Constant(x), Expr::Constant(y)) if (x + y).is_finite() => Expr::Constant(x + y),
            (Expr::Constant(0.0), e) => e,
            (e, Expr::Constant(0.0)) => e,
            (a, b) => Expr::Add(Box::new(a), Box::new(b)),
        }
    }
}

impl core::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Constant(x), Expr::Constant(y)) if (x - y).is_finite() => Expr::Constant(x - y),
            (e, Expr::Constant(0.0)) => e,
            (Expr::Constant(0.0), e) => -e,
            (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }
}

impl core::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Constant(x), Expr::Constant(y)) if (x * y).is_finite() => Expr::Constant(x * y),
            (Expr::Constant(0.0), _) | (_, Expr::Constant(0.0)) => Expr::Constant(0.0),
            (Expr::Constant(1.0), e) => e,
            (e, Expr::Constant(1.0)) => e,
            (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }
}

impl core::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Constant(x), Expr::Constant(y)) if y != 0.0 && (x / y).is_finite() => {
                Expr::Constant(x / y)
            }
            (e, Expr::Constant(1.0)) => e,
            (a, b) => Expr::Div(Box::new(a), Box::new(b)),
        }
    }
}

impl core::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self {
            Expr::Constant(c) => Expr::Constant(-c),
            Expr::Neg(inner) => *inner,
            e => Expr::Neg(Box::new(e)),
        }
    }
}

impl Expr {
    pub fn pow(base: Expr, exponent: Exponent) -> Expr {
        if exponent.num == 0 {
            // x^0 = 1, including at x = 0.
            return Expr::Constant(1.0);
        }
        if exponent.num == 1 && exponent.den == 1 {
            return base;
        }
        if let Expr::Constant(c) = base {
            if let Ok(v) = eval_pow(c, exponent, &Expr::Constant(c)) {
                if v.is_finite() {
                    return Expr::Constant(v);
                }
            }
        }
        Expr::Pow(Box::new(base), exponent)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            // A negative literal prints with a leading '-', so it binds like
            // a unary minus when re-read.
            Expr::Constant(c) if c.is_sign_negative() => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }

    fn collect_parameters(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Parameter(name) => {
                out.insert(name.clone());
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_parameters(out);
                b.collect_parameters(out);
            }
            Expr::Neg(e)
            | Expr::Pow(e, _)
            | Expr::Sin(e)
            | Expr::Cos(e)
            | Expr::Tan(e)
            | Expr::Exp(e)
            | Expr::Log(e)
            | Expr::Sqrt(e) => e.collect_parameters(out),
            Expr::Constant(_) | Expr::Coordinate(_) => {}
        }
    }

    fn max_coordinate(&self) -> Option<usize> {
        match self {
            Expr::Coordinate(i) => Some(*i),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                match (a.max_coordinate(), b.max_coordinate()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            }
            Expr::Neg(e)
            | Expr::Pow(e, _)
            | Expr::Sin(e)
            | Expr::Cos(e)
            | Expr::Tan(e)
            | Expr::Exp(e)
            | Expr::Log(e)
            | Expr::Sqrt(e) => e.max_coordinate(),
            _ => None,
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Expr, min_prec: u8) -> fmt::Result {
    if child.precedence() < min_prec {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Constant(c) => write!(f, "{c:?}"),
            Expr::Coordinate(i) => write!(f, "x{i}"),
            Expr::Parameter(name) => write!(f, "{name}"),
            Expr::Add(a, b) => {
                write_child(f, a, 1)?;
                write!(f, " + ")?;
                write_child(f, b, 2)
            }
            Expr::Sub(a, b) => {
                write_child(f, a, 1)?;
                write!(f, " - ")?;
                write_child(f, b, 2)
            }
            Expr::Mul(a, b) => {
                write_child(f, a, 2)?;
                write!(f, "*")?;
                write_child(f, b, 3)
            }
            Expr::Div(a, b) => {
                write_child(f, a, 2)?;
                write!(f, "/")?;
                write_child(f, b, 3)
            }
            Expr::Neg(e) => {
                write!(f, "-")?;
                write_child(f, e, 4)
            }
            Expr::Pow(base, exponent) => {
                write_child(f, base, 5)?;
                if exponent.is_integer() {
                    if exponent.num >= 0 {
                        write!(f, "^{}", exponent.num)
                    } else {
                        write!(f, "^({})", exponent.num)
                    }
                } else {
                    write!(f, "^({}/{})", exponent.num, exponent.den)
                }
            }
            Expr::Sin(e) => write!(f, "sin({e})"),
            Expr::Cos(e) => write!(f, "cos({e})"),
            Expr::Tan(e) => write!(f, "tan({e})"),
            Expr::Exp(e) => write!(f, "exp({e})"),
            Expr::Log(e) => write!(f, "log({e})"),
            Expr::Sqrt(e) => write!(f, "sqrt({e})"),
        }
    }
}

/// Why an evaluation failed.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalErrorKind {
    DivisionByZero,
    LogNonPositive(f64),
    SqrtNegative(f64),
    /// Rational power of a negative base, or negative power of zero.
    PowDomain(f64),
    TanPole(f64),
    UnboundParameter(String),
    /// The point has the wrong number of coordinates.
    DimensionMismatch {
        expected: usize,
        got: usize,
    },
}

/// Evaluation error carrying the offending subexpression.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}", self.describe())]
pub struct EvalError {
    pub kind: EvalErrorKind,
    /// Rendered subexpression at which the error occurred.
    pub context: String,
}

impl EvalError {
    fn describe(&self) -> String {
        match &self.kind {
            EvalErrorKind::DivisionByZero => format!("division by zero in `{}`", self.context),
            EvalErrorKind::LogNonPositive(v) => {
                format!("log of non-positive value {v} in `{}`", self.context)
            }
            EvalErrorKind::SqrtNegative(v) => {
                format!("sqrt of negative value {v} in `{}`", self.context)
            }
            EvalErrorKind::PowDomain(v) => {
                format!(
                    "rational power undefined for base {v} in `{}`",
                    self.context
                )
            }
            EvalErrorKind::TanPole(v) => format!("tan pole near {v} in `{}`", self.context),
            EvalErrorKind::UnboundParameter(name) => {
                format!(
                    "parameter `{name}` has no bound value in `{}`",
                    self.context
                )
            }
            EvalErrorKind::DimensionMismatch { expected, got } => {
                format!("point has {got} coordinates, expression expects {expected}")
            }
        }
    }
}

fn eval_pow(base: f64, exponent: Exponent, at: &Expr) -> Result<f64, EvalError> {
    if exponent.is_integer() {
        if base == 0.0 && exponent.num < 0 {
            return Err(EvalError {
                kind: EvalErrorKind::DivisionByZero,
                context: at.to_string(),
            });
        }
        let n = exponent.num;
        if n >= i32::MIN as i64 && n <= i32::MAX as i64 {
            return Ok(float::powi(base, n as i32));
        }
        return Ok(float::powf(base, n as f64));
    }
    if base < 0.0 {
        return Err(EvalError {
            kind: EvalErrorKind::PowDomain(base),
            context: at.to_string(),
        });
    }
    if base == 0.0 && exponent.num < 0 {
        return Err(EvalError {
            kind: EvalErrorKind::DivisionByZero,
            context: at.to_string(),
        });
    }
    Ok(float::powf(base, exponent.as_f64()))
}

fn eval_node(expr: &Expr, point: &[f64], params: &BTreeMap<String, f64>) -> Result<f64, EvalError> {
    match expr {
        Expr::Constant(c) => Ok(*c),
        Expr::Coordinate(i) => Ok(point[*i]),
        Expr::Parameter(name) => params.get(name).copied().ok_or_else(|| EvalError {
            kind: EvalErrorKind::UnboundParameter(name.clone()),
            context: expr.to_string(),
        }),
        Expr::Add(a, b) => Ok(eval_node(a, point, params)? + eval_node(b, point, params)?),
        Expr::Sub(a, b) => Ok(eval_node(a, point, params)? - eval_node(b, point, params)?),
        Expr::Mul(a, b) => Ok(eval_node(a, point, params)? * eval_node(b, point, params)?),
        Expr::Div(a, b) => {
            let num = eval_node(a, point, params)?;
            let den = eval_node(b, point, params)?;
            if den == 0.0 {
                return Err(EvalError {
                    kind: EvalErrorKind::DivisionByZero,
                    context: expr.to_string(),
                });
            }
            Ok(num / den)
        }
        Expr::Neg(e) => Ok(-eval_node(e, point, params)?),
        Expr::Pow(base, exponent) => {
            let b = eval_node(base, point, params)?;
            eval_pow(b, *exponent, expr)
        }
        Expr::Sin(e) => Ok(float::sin(eval_node(e, point, params)?)),
        Expr::Cos(e) => Ok(float::cos(eval_node(e, point, params)?)),
        Expr::Tan(e) => {
            let v = eval_node(e, point, params)?;
            let t = float::tan(v);
            if !t.is_finite() {
                return Err(EvalError {
                    kind: EvalErrorKind::TanPole(v),
                    context: expr.to_string(),
                });
            }
            Ok(t)
        }
        Expr::Exp(e) => Ok(float::exp(eval_node(e, point, params)?)),
        Expr::Log(e) => {
            let v = eval_node(e, point, params)?;
            if v <= 0.0 {
                return Err(EvalError {
                    kind: EvalErrorKind::LogNonPositive(v),
                    context: expr.to_string(),
                });
            }
            Ok(float::ln(v))
        }
        Expr::Sqrt(e) => {
            let v = eval_node(e, point, params)?;
            if v < 0.0 {
                return Err(EvalError {
                    kind: EvalErrorKind::SqrtNegative(v),
                    context: expr.to_string(),
                });
            }
            Ok(float::sqrt(v))
        }
    }
}

fn derivative_node(expr: &Expr, i: usize) -> Expr {
    match expr {
        Expr::Constant(_) | Expr::Parameter(_) => Expr::Constant(0.0),
        Expr::Coordinate(j) => Expr::Constant(if *j == i { 1.0 } else { 0.0 }),
        Expr::Add(a, b) => derivative_node(a, i) + derivative_node(b, i),
        Expr::Sub(a, b) => derivative_node(a, i) - derivative_node(b, i),
        Expr::Mul(a, b) => {
            derivative_node(a, i) * (**b).clone() + (**a).clone() * derivative_node(b, i)
        }
        Expr::Div(a, b) => {
            (derivative_node(a, i) * (**b).clone() - (**a).clone() * derivative_node(b, i))
                / Expr::pow((**b).clone(), Exponent::integer(2))
        }
        Expr::Neg(e) => -derivative_node(e, i),
        Expr::Pow(base, exponent) => {
            Expr::Constant(exponent.as_f64())
                * Expr::pow((**base).clone(), exponent.minus_one())
                * derivative_node(base, i)
        }
        Expr::Sin(e) => Expr::Cos(e.clone()) * derivative_node(e, i),
        Expr::Cos(e) => -(Expr::Sin(e.clone()) * derivative_node(e, i)),
        Expr::Tan(e) => {
            derivative_node(e, i) / Expr::pow(Expr::Cos(e.clone()), Exponent::integer(2))
        }
        Expr::Exp(e) => Expr::Exp(e.clone()) * derivative_node(e, i),
        Expr::Log(e) => derivative_node(e, i) / (**e).clone(),
        Expr::Sqrt(e) => derivative_node(e, i) / (Expr::Constant(2.0) * Expr::Sqrt(e.clone())),
    }
}

/// A parsed closed-form function of the chart coordinates `x0..x(n-1)`.
///
/// Carries its chart dimension and a map of bound parameter values.
/// Evaluation is deterministic: the same tree, point, and parameter values
/// always produce bit-identical results.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarExpression {
    ast: Expr,
    dimension: usize,
    parameters: BTreeMap<String, f64>,
}

impl ScalarExpression {
    /// Wraps an already-built tree. Fails if a coordinate index is out of
    /// range for `dimension`.
    pub fn from_ast(ast: Expr, dimension: usize) -> Result<Self, ParseError> {
        assert!(dimension >= 1, "chart dimension must be at least 1");
        if let Some(max) = ast.max_coordinate() {
            if max >= dimension {
                return Err(ParseError::coordinate_out_of_range(0, max, dimension));
            }
        }
        Ok(ScalarExpression {
            ast,
            dimension,
            parameters: BTreeMap::new(),
        })
    }

    pub fn constant(value: f64, dimension: usize) -> Self {
        ScalarExpression {
            ast: Expr::Constant(value),
            dimension,
            parameters: BTreeMap::new(),
        }
    }

    pub fn coordinate(index: usize, dimension: usize) -> Self {
        assert!(index < dimension, "coordinate index out of range");
        ScalarExpression {
            ast: Expr::Coordinate(index),
            dimension,
            parameters: BTreeMap::new(),
        }
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn parameters(&self) -> &BTreeMap<String, f64> {
        &self.parameters
    }

    /// Names of all parameter symbols appearing in the tree.
    pub fn parameter_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.ast.collect_parameters(&mut out);
        out
    }

    /// Binds (or rebinds) a parameter value.
    pub fn with_parameter(mut self, name: &str, value: f64) -> Self {
        self.parameters.insert(name.to_owned(), value);
        self
    }

    /// Binds all parameters from `values`.
    pub fn with_parameters(mut self, values: &BTreeMap<String, f64>) -> Self {
        for (k, v) in values {
            self.parameters.insert(k.clone(), *v);
        }
        self
    }

    /// Evaluates at a chart point given as a coordinate slice.
    pub fn evaluate(&self, point: &[f64]) -> Result<f64, EvalError> {
        if point.len() != self.dimension {
            return Err(EvalError {
                kind: EvalErrorKind::DimensionMismatch {
                    expected: self.dimension,
                    got: point.len(),
                },
                context: String::new(),
            });
        }
        eval_node(&self.ast, point, &self.parameters)
    }

    /// Exact partial derivative with respect to coordinate `i`.
    ///
    /// The result keeps the same dimension and parameter bindings. Panics if
    /// `i` is not a valid coordinate index.
    pub fn differentiate(&self, i: usize) -> ScalarExpression {
        assert!(
            i < self.dimension,
            "derivative index {i} out of range for dimension {}",
            self.dimension
        );
        ScalarExpression {
            ast: derivative_node(&self.ast, i),
            dimension: self.dimension,
            parameters: self.parameters.clone(),
        }
    }

    /// Combines the parameter maps of two expressions; a name bound to two
    /// different values is an error.
    fn merged_parameters(
        &self,
        other: &ScalarExpression,
    ) -> Result<BTreeMap<String, f64>, CombineError> {
        if self.dimension != other.dimension {
            return Err(CombineError::DimensionMismatch {
                left: self.dimension,
                right: other.dimension,
            });
        }
        let mut merged = self.parameters.clone();
        for (name, value) in &other.parameters {
            match merged.get(name) {
                Some(existing) if existing.to_bits() != value.to_bits() => {
                    return Err(CombineError::ParameterConflict { name: name.clone() });
                }
                _ => {
                    merged.insert(name.clone(), *value);
                }
            }
        }
        Ok(merged)
    }

    pub fn try_add(&self, other: &ScalarExpression) -> Result<ScalarExpression, CombineError> {
        let parameters = self.merged_parameters(other)?;
        Ok(ScalarExpression {
            ast: self.ast.clone() + other.ast.clone(),
            dimension: self.dimension,
            parameters,
        })
    }

    pub fn try_sub(&self, other: &ScalarExpression) -> Result<ScalarExpression, CombineError> {
        let parameters = self.merged_parameters(other)?;
        Ok(ScalarExpression {
            ast: self.ast.clone() - other.ast.clone(),
            dimension: self.dimension,
            parameters,
        })
    }

    pub fn try_mul(&self, other: &ScalarExpression) -> Result<ScalarExpression, CombineError> {
        let parameters = self.merged_parameters(other)?;
        Ok(ScalarExpression {
            ast: self.ast.clone() * other.ast.clone(),
            dimension: self.dimension,
            parameters,
        })
    }

    pub fn negated(&self) -> ScalarExpression {
        ScalarExpression {
            ast: -self.ast.clone(),
            dimension: self.dimension,
            parameters: self.parameters.clone(),
        }
    }
}

impl fmt::Display for ScalarExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.ast)
    }
}

/// Failure to combine two expressions into one.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CombineError {
    #[error("expressions live on charts of different dimension ({left} vs {right})")]
    DimensionMismatch { left: usize, right: usize },
    #[error("parameter `{name}` bound to different values in the two expressions")]
    ParameterConflict { name: String },
}

/// Parses `source` against a chart of the given dimension.
///
/// Any identifier that is not a coordinate or a built-in function becomes an
/// unbound parameter; bind values with [`ScalarExpression::with_parameter`]
/// before evaluating.
pub fn parse_expression(source: &str, dimension: usize) -> Result<ScalarExpression, ParseError> {
    parser::parse(source, dimension, None)
}

/// Strict variant of [`parse_expression`]: identifiers must be coordinates,
/// built-in functions, or keys of `parameters`, whose values are bound into
/// the result. Unknown identifiers are reported as parse errors.
pub fn parse_expression_with(
    source: &str,
    dimension: usize,
    parameters: &BTreeMap<String, f64>,
) -> Result<ScalarExpression, ParseError> {
    parser::parse(source, dimension, Some(parameters))
}

/// Central finite difference `(f(p + h eᵢ) - f(p - h eᵢ)) / 2h`; the test
/// oracle against which symbolic derivatives are checked.
pub fn central_difference(
    e: &ScalarExpression,
    i: usize,
    point: &[f64],
    step: f64,
) -> Result<f64, EvalError> {
    let mut forward = point.to_vec();
    let mut backward = point.to_vec();
    forward[i] += step;
    backward[i] -= step;
    Ok((e.evaluate(&forward)? - e.evaluate(&backward)?) / (2.0 * step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn parses_with_standard_precedence() {
        let e = parse_expression("x0^2 + sin(x1)", 2).unwrap();
        match e.ast() {
            Expr::Add(a, b) => {
                assert!(matches!(**a, Expr::Pow(ref base, exp)
                    if matches!(**base, Expr::Coordinate(0)) && exp == Exponent::integer(2)));
                assert!(matches!(**b, Expr::Sin(ref arg)
                    if matches!(**arg, Expr::Coordinate(1))));
            }
            other => panic!("unexpected tree: {other:?}"),
        }
    }

    #[test]
    fn parses_literal_one() {
        let e = parse_expression("1", 4).unwrap();
        assert_eq!(*e.ast(), Expr::Constant(1.0));
    }

    #[test]
    fn rejects_coordinate_out_of_range() {
        let err = parse_expression("x2", 2).unwrap_err();
        assert!(err.to_string().contains("coordinate index"), "{err}");
    }

    #[test]
    fn evaluates_examples() {
        let e = parse_expression("x0^2 + sin(x1)", 2).unwrap();
        assert_abs_diff_eq!(e.evaluate(&[2.0, 0.0]).unwrap(), 4.0);

        let e = parse_expression("1/(1+x0^2)", 1).unwrap();
        assert_abs_diff_eq!(e.evaluate(&[1.0]).unwrap(), 0.5);
    }

    #[test]
    fn log_of_zero_is_domain_error() {
        let e = parse_expression("log(x0)", 1).unwrap();
        let err = e.evaluate(&[0.0]).unwrap_err();
        assert!(matches!(err.kind, EvalErrorKind::LogNonPositive(_)));
        assert!(err.context.contains("log(x0)"));
    }

    #[test]
    fn division_by_zero_reports_subexpression() {
        let e = parse_expression("1/x0", 1).unwrap();
        let err = e.evaluate(&[0.0]).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::DivisionByZero);
        assert!(err.context.contains("1"));
    }

    #[test]
    fn power_rule() {
        let e = parse_expression("x0^2 + sin(x1)", 2).unwrap();
        let d0 = e.differentiate(0);
        assert_abs_diff_eq!(d0.evaluate(&[3.0, 0.7]).unwrap(), 6.0);
        // 2*x0, structurally: constants folded, pow(e,1) collapsed
        assert_eq!(
            *d0.ast(),
            Expr::Mul(Box::new(Expr::Constant(2.0)), Box::new(Expr::Coordinate(0)))
        );
        let d1 = e.differentiate(1);
        assert_eq!(*d1.ast(), Expr::Cos(Box::new(Expr::Coordinate(1))));
    }

    #[test]
    fn quotient_rule_matches_finite_difference() {
        let e = parse_expression("1/(1+x0^2)", 1).unwrap();
        let d = e.differentiate(0);
        let symbolic = d.evaluate(&[1.0]).unwrap();
        assert_abs_diff_eq!(symbolic, -0.5, epsilon = 1e-15);
        let fd = central_difference(&e, 0, &[1.0], 1e-5).unwrap();
        assert_abs_diff_eq!(symbolic, fd, epsilon = 1e-8);
    }

    #[test]
    fn simplification_rules_hold() {
        assert_eq!(
            Expr::Constant(0.0) * Expr::Coordinate(0),
            Expr::Constant(0.0)
        );
        assert_eq!(
            Expr::Constant(0.0) + Expr::Coordinate(0),
            Expr::Coordinate(0)
        );
        assert_eq!(
            Expr::Constant(1.0) * Expr::Coordinate(0),
            Expr::Coordinate(0)
        );
        assert_eq!(
            Expr::pow(Expr::Coordinate(0), Exponent::integer(1)),
            Expr::Coordinate(0)
        );
        assert_eq!(
            Expr::pow(Expr::Coordinate(0), Exponent::integer(0)),
            Expr::Constant(1.0)
        );
    }

    #[test]
    fn unbound_parameter_reported_at_evaluation() {
        let e = parse_expression("a*x0", 1).unwrap();
        let err = e.evaluate(&[2.0]).unwrap_err();
        assert!(matches!(err.kind, EvalErrorKind::UnboundParameter(ref n) if n == "a"));
        assert_abs_diff_eq!(e.with_parameter("a", 3.0).evaluate(&[2.0]).unwrap(), 6.0);
    }

    #[test]
    fn strict_parse_rejects_unknown_identifier() {
        let params = BTreeMap::new();
        let err = parse_expression_with("a*x0", 1, &params).unwrap_err();
        assert!(err.to_string().contains("unknown identifier"), "{err}");

        let mut params = BTreeMap::new();
        params.insert("a".to_string(), 2.5);
        let e = parse_expression_with("a*x0", 1, &params).unwrap();
        assert_abs_diff_eq!(e.evaluate(&[2.0]).unwrap(), 5.0);
    }

    #[test]
    fn rational_exponent_and_its_derivative() {
        let e = parse_expression("x0^(3/2)", 1).unwrap();
        assert_abs_diff_eq!(e.evaluate(&[4.0]).unwrap(), 8.0, epsilon = 1e-12);
        let d = e.differentiate(0);
        // (3/2) x^(1/2)
        assert_abs_diff_eq!(d.evaluate(&[4.0]).unwrap(), 3.0, epsilon = 1e-12);
        assert!(e.evaluate(&[-1.0]).is_err());
    }

    #[test]
    fn negative_integer_exponent() {
        let e = parse_expression("x0^-2", 1).unwrap();
        assert_abs_diff_eq!(e.evaluate(&[2.0]).unwrap(), 0.25);
        let d = e.differentiate(0);
        assert_abs_diff_eq!(d.evaluate(&[2.0]).unwrap(), -0.25, epsilon = 1e-15);
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse_expression("2+3*4^2", 1).unwrap();
        assert_abs_diff_eq!(e.evaluate(&[0.0]).unwrap(), 50.0);
        let e = parse_expression("8/4/2", 1).unwrap();
        assert_abs_diff_eq!(e.evaluate(&[0.0]).unwrap(), 1.0);
        let e = parse_expression("-x0^2", 1).unwrap();
        assert_abs_diff_eq!(e.evaluate(&[2.0]).unwrap(), -4.0);
        let e = parse_expression("2*-3", 1).unwrap();
        assert_abs_diff_eq!(e.evaluate(&[0.0]).unwrap(), -6.0);
        let e = parse_expression("(2+3)*4", 1).unwrap();
        assert_abs_diff_eq!(e.evaluate(&[0.0]).unwrap(), 20.0);
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_expression("x0 + ", 1).unwrap_err();
        assert!(err.to_string().contains("position"), "{err}");
        let err = parse_expression("sin x0", 1).unwrap_err();
        assert!(err.to_string().contains("'('"), "{err}");
        let err = parse_expression("x0^x1", 2).unwrap_err();
        assert!(err.to_string().contains("exponent"), "{err}");
    }

    #[test]
    fn display_round_trips() {
        for src in [
            "x0^2 + sin(x1)",
            "1/(1+x0^2)",
            "-x0^2",
            "(x0 + x1)*x0",
            "x0^(1/2)",
            "x0^(-2)",
            "exp(x0)*cos(x1) - sqrt(1 + x0^2)",
            "a*x0 + b",
        ] {
            let e = parse_expression(src, 2).unwrap();
            let printed = alloc::format!("{e}");
            let reparsed = parse_expression(&printed, 2).unwrap();
            assert_eq!(
                e.ast(),
                reparsed.ast(),
                "`{src}` printed as `{printed}` did not round-trip"
            );
        }
    }
}
