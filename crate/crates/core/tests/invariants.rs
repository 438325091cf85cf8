//! Cross-module invariants: randomized derivative oracles, bracket algebra,
//! and construction round-trips on randomized fixtures.

use proptest::prelude::*;
use rand_core::{RngCore, SeedableRng};

use lightlike_core::bundle::AugmentedMetric;
use lightlike_core::connection::{koszul_connection, nonmetricity_of, torsion_of};
use lightlike_core::expr::{
    central_difference, parse_expression, Exponent, Expr, ScalarExpression,
};
use lightlike_core::tensor::{
    exterior_derivative_1form, lie_bracket_field, lie_derivative_metric, ChartPoint, DomainBox,
    TensorField, TensorValue, METRIC, NONMETRICITY, ONE_FORM, TORSION, VECTOR,
};
use lightlike_core::verify::{sample_points, VerificationConfig};

fn pt(coords: &[f64]) -> ChartPoint {
    ChartPoint::new(coords.to_vec()).unwrap()
}

fn boxed(e: Expr) -> Box<Expr> {
    Box::new(e)
}

/// `1 + e²`, a strictly positive wrapper for log/sqrt/denominator arguments.
fn one_plus_square(e: Expr) -> Expr {
    Expr::Add(
        boxed(Expr::Constant(1.0)),
        boxed(Expr::Pow(boxed(e), Exponent::integer(2))),
    )
}

/// Shallow subexpressions fed to transcendental functions; keeps third
/// derivatives small enough for the finite-difference oracle to be sharp.
fn arb_shallow(dim: usize) -> BoxedStrategy<Expr> {
    let leaf = prop_oneof![
        (-2.0..2.0f64).prop_map(Expr::Constant),
        (0..dim).prop_map(Expr::Coordinate),
    ]
    .boxed();
    (leaf.clone(), leaf, -1.5..1.5f64)
        .prop_flat_map(|(a, b, c)| {
            prop_oneof![
                Just(a.clone()),
                Just(Expr::Add(boxed(a.clone()), boxed(b.clone()))),
                Just(Expr::Mul(boxed(Expr::Constant(c)), boxed(a.clone()))),
                Just(Expr::Sub(boxed(a), boxed(b))),
            ]
        })
        .boxed()
}

/// Random expression over a safe domain: polynomial combinations of leaves
/// with transcendentals applied only to shallow arguments.
fn arb_expr(dim: usize) -> impl Strategy<Value = Expr> {
    let shallow = arb_shallow(dim);
    let transcendental = prop_oneof![
        shallow.clone().prop_map(|e| Expr::Sin(boxed(e))),
        shallow.clone().prop_map(|e| Expr::Cos(boxed(e))),
        shallow
            .clone()
            .prop_map(|e| Expr::Exp(boxed(Expr::Sin(boxed(e))))),
        shallow
            .clone()
            .prop_map(|e| Expr::Log(boxed(one_plus_square(e)))),
        shallow
            .clone()
            .prop_map(|e| Expr::Sqrt(boxed(one_plus_square(e)))),
        (-1.4..1.4f64, 0..dim).prop_map(|(c, i)| Expr::Tan(boxed(Expr::Mul(
            boxed(Expr::Constant(c)),
            boxed(Expr::Coordinate(i)),
        )))),
    ];
    let leaf = prop_oneof![
        (-2.0..2.0f64).prop_map(Expr::Constant),
        (0..dim).prop_map(Expr::Coordinate),
        transcendental,
    ];
    leaf.prop_recursive(2, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(boxed(a), boxed(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(boxed(a), boxed(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(boxed(a), boxed(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expr::Div(boxed(a), boxed(one_plus_square(b)))),
            (inner.clone(), 2..4i64).prop_map(|(e, k)| Expr::Pow(boxed(e), Exponent::integer(k))),
            inner.clone().prop_map(|e| Expr::Neg(boxed(e))),
        ]
    })
}

fn arb_point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, dim)
}

proptest! {
    /// Symbolic partials agree with the central finite difference to
    /// 1e-6 relative over the safe domain.
    #[test]
    fn symbolic_derivative_matches_finite_difference(
        ast in arb_expr(3),
        point in arb_point(3),
        i in 0..3usize,
    ) {
        let e = ScalarExpression::from_ast(ast, 3).unwrap();
        let d = e.differentiate(i);
        let symbolic = d.evaluate(&point).unwrap();
        let fd = central_difference(&e, i, &point, 1e-5).unwrap();
        let bound = 1e-6 * (1.0 + symbolic.abs());
        prop_assert!(
            (symbolic - fd).abs() <= bound,
            "sym {symbolic} vs fd {fd} for {e} at {point:?}"
        );
    }

    /// Printing and reparsing preserves evaluation bit for bit.
    #[test]
    fn parse_print_parse_is_stable(
        ast in arb_expr(2),
        seed in 0u64..1_000,
    ) {
        let e = ScalarExpression::from_ast(ast, 2).unwrap();
        let printed = format!("{e}");
        let reparsed = parse_expression(&printed, 2).unwrap();
        let domain = DomainBox::cube(2, -1.0, 1.0).unwrap();
        for p in sample_points(&domain, 100, seed) {
            let a = e.evaluate(p.coords()).unwrap();
            let b = reparsed.evaluate(p.coords()).unwrap();
            prop_assert_eq!(a.to_bits(), b.to_bits(), "`{}` reparsed as `{}`", e, reparsed);
        }
    }
}

/// Degree-two polynomial in `dim` variables with coefficients drawn from the
/// generator, as an expression tree.
fn random_polynomial(dim: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Expr {
    let mut coefficient = |scale: f64| {
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        (2.0 * u - 1.0) * scale
    };
    let mut acc = Expr::Constant(coefficient(2.0));
    for i in 0..dim {
        acc = acc + Expr::Constant(coefficient(2.0)) * Expr::Coordinate(i);
        for j in i..dim {
            acc = acc
                + Expr::Constant(coefficient(1.0)) * (Expr::Coordinate(i) * Expr::Coordinate(j));
        }
    }
    acc
}

fn random_vector_field(dim: usize, rng: &mut rand_chacha::ChaCha8Rng) -> TensorField {
    let components = (0..dim)
        .map(|_| ScalarExpression::from_ast(random_polynomial(dim, rng), dim).unwrap())
        .collect();
    TensorField::from_expressions(VECTOR, dim, components).unwrap()
}

#[test]
fn jacobi_identity_for_polynomial_vector_fields() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let domain = DomainBox::cube(3, -1.0, 1.0).unwrap();
    let points = sample_points(&domain, 100, 17);
    for _ in 0..20 {
        let x = random_vector_field(3, &mut rng);
        let y = random_vector_field(3, &mut rng);
        let z = random_vector_field(3, &mut rng);
        let xyz = lie_bracket_field(&x, &lie_bracket_field(&y, &z).unwrap()).unwrap();
        let yzx = lie_bracket_field(&y, &lie_bracket_field(&z, &x).unwrap()).unwrap();
        let zxy = lie_bracket_field(&z, &lie_bracket_field(&x, &y).unwrap()).unwrap();
        for p in &points {
            let a = xyz.evaluate(p).unwrap();
            let b = yzx.evaluate(p).unwrap();
            let c = zxy.evaluate(p).unwrap();
            let mut worst = 0.0f64;
            for k in 0..3 {
                worst = worst.max((a.get(&[k]) + b.get(&[k]) + c.get(&[k])).abs());
            }
            assert!(worst <= 1e-8, "Jacobi defect {worst:e}");
        }
    }
}

#[test]
fn exterior_derivative_kills_exact_forms() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let domain = DomainBox::cube(3, -1.0, 1.0).unwrap();
    let points = sample_points(&domain, 50, 5);
    for _ in 0..20 {
        let f = ScalarExpression::from_ast(random_polynomial(3, &mut rng), 3).unwrap();
        let df = TensorField::from_expressions(
            ONE_FORM,
            3,
            (0..3).map(|i| f.differentiate(i)).collect(),
        )
        .unwrap();
        for p in &points {
            let dd = exterior_derivative_1form(&df, p).unwrap();
            assert!(dd.max_abs() <= 1e-10, "d(df) = {:e}", dd.max_abs());
        }
    }
}

#[test]
fn lie_derivative_of_metric_stays_symmetric() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let domain = DomainBox::cube(3, -1.0, 1.0).unwrap();
    let points = sample_points(&domain, 50, 3);
    for _ in 0..10 {
        // Symmetric polynomial metric: entries mirrored across the diagonal.
        let mut entries: Vec<ScalarExpression> = Vec::with_capacity(9);
        let mut upper = std::collections::BTreeMap::new();
        for i in 0..3 {
            for j in i..3 {
                upper.insert(
                    (i, j),
                    ScalarExpression::from_ast(random_polynomial(3, &mut rng), 3).unwrap(),
                );
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let key = if i <= j { (i, j) } else { (j, i) };
                entries.push(upper[&key].clone());
            }
        }
        let g = TensorField::from_expressions(METRIC, 3, entries).unwrap();
        let xi = random_vector_field(3, &mut rng);
        for p in &points {
            let lie = lie_derivative_metric(&xi, &g, p).unwrap();
            assert!(lie.max_asymmetry(0, 1) <= 1e-12);
        }
    }
}

/// Antisymmetric polynomial (1,2) field and a last-two-symmetric (0,3) field.
fn random_torsion(dim: usize, rng: &mut rand_chacha::ChaCha8Rng) -> TensorField {
    let zero = ScalarExpression::constant(0.0, dim);
    let mut components = vec![zero; dim * dim * dim];
    for k in 0..dim {
        for i in 0..dim {
            for j in (i + 1)..dim {
                let e = ScalarExpression::from_ast(random_polynomial(dim, rng), dim).unwrap();
                components[k * dim * dim + i * dim + j] = e.clone();
                components[k * dim * dim + j * dim + i] = e.negated();
            }
        }
    }
    TensorField::from_expressions(TORSION, dim, components).unwrap()
}

fn random_nonmetricity(dim: usize, rng: &mut rand_chacha::ChaCha8Rng) -> TensorField {
    let zero = ScalarExpression::constant(0.0, dim);
    let mut components = vec![zero; dim * dim * dim];
    for z in 0..dim {
        for i in 0..dim {
            for j in i..dim {
                let e = ScalarExpression::from_ast(random_polynomial(dim, rng), dim).unwrap();
                components[z * dim * dim + i * dim + j] = e.clone();
                components[z * dim * dim + j * dim + i] = e;
            }
        }
    }
    TensorField::from_expressions(NONMETRICITY, dim, components).unwrap()
}

fn curved_gbar() -> AugmentedMetric {
    AugmentedMetric::from_field(
        TensorField::parse_components(
            METRIC,
            3,
            &["1", "0", "0.2*x1", "0", "1+x1^2", "0", "0.2*x1", "0", "1"],
        )
        .unwrap(),
    )
    .unwrap()
}

#[test]
fn construction_roundtrip_recovers_polynomial_inputs() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(404);
    let gbar = curved_gbar();
    let domain = DomainBox::cube(3, -1.0, 1.0).unwrap();
    let cfg = VerificationConfig::default();
    for _ in 0..5 {
        let torsion = random_torsion(3, &mut rng);
        let q = random_nonmetricity(3, &mut rng);
        let (conn, _) = koszul_connection(&gbar, Some(&torsion), Some(&q), &domain, &cfg).unwrap();
        for p in sample_points(&domain, 40, 21) {
            let t = torsion_of(&conn, &p).unwrap();
            let expected_t = torsion.evaluate(&p).unwrap();
            assert!(t.max_abs_diff(&expected_t).unwrap() <= 1e-8);
            let recovered_q = nonmetricity_of(&conn, gbar.field(), &p).unwrap();
            let expected_q = q.evaluate(&p).unwrap();
            assert!(recovered_q.max_abs_diff(&expected_q).unwrap() <= 1e-8);
        }
    }
}

#[test]
fn construction_roundtrip_on_callback_backed_fields() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(777);
    let exact_gbar = curved_gbar();
    let exact_torsion = random_torsion(3, &mut rng);

    let inner = exact_gbar.field().clone();
    let gbar = AugmentedMetric::from_field(
        TensorField::from_callback(METRIC, 3, move |p| inner.evaluate(p).unwrap(), None).unwrap(),
    )
    .unwrap();
    let inner_t = exact_torsion.clone();
    let torsion =
        TensorField::from_callback(TORSION, 3, move |p| inner_t.evaluate(p).unwrap(), None)
            .unwrap();

    let domain = DomainBox::cube(3, -0.9, 0.9).unwrap();
    let cfg = VerificationConfig::default();
    let (conn, reports) = koszul_connection(&gbar, Some(&torsion), None, &domain, &cfg).unwrap();
    for r in &reports {
        assert!(r.pass);
        assert!(r.max_residual <= 1e-4, "{:e}", r.max_residual);
    }
    for p in sample_points(&domain, 20, 2) {
        let t = torsion_of(&conn, &p).unwrap();
        let expected = exact_torsion.evaluate(&p).unwrap();
        assert!(t.max_abs_diff(&expected).unwrap() <= 1e-4);
        let q = nonmetricity_of(&conn, gbar.field(), &p).unwrap();
        assert!(q.max_abs() <= 1e-4);
    }
}

#[test]
fn koszul_without_inputs_reduces_to_levi_civita() {
    let gbar = curved_gbar();
    let domain = DomainBox::cube(3, -1.0, 1.0).unwrap();
    let cfg = VerificationConfig::default();
    let (conn, _) = koszul_connection(&gbar, None, None, &domain, &cfg).unwrap();
    for p in sample_points(&domain, 200, 0) {
        let general = conn.evaluate(&p).unwrap();
        let lc = lightlike_core::connection::levi_civita(&gbar, &p).unwrap();
        assert!(general.max_abs_diff(&lc).unwrap() <= 1e-12);
    }
}

#[test]
fn tensor_value_symmetry_helpers() {
    let mut v = TensorValue::zeros(METRIC, 2);
    v.set(&[0, 1], 1.0);
    v.set(&[1, 0], 1.0);
    assert_eq!(v.max_asymmetry(0, 1), 0.0);
    assert_eq!(v.max_antisymmetry_defect(0, 1), 2.0);

    let p = pt(&[0.0, 0.0]);
    let tau = TensorField::parse_components(ONE_FORM, 2, &["x1", "0"]).unwrap();
    let d = exterior_derivative_1form(&tau, &p).unwrap();
    assert_eq!(d.max_antisymmetry_defect(0, 1), 0.0);
}
