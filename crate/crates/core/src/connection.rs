//! Linear connections on the chart.
//!
//! Index convention, used everywhere in this crate: coefficients are stored
//! as `Γ^k_{ij}` with `i` the derivative slot, so `∇_{∂ᵢ} ∂ⱼ = Γ^k_{ij} ∂ₖ`,
//! and covariant derivatives prepend the derivative slot:
//!
//! - vectors:  `(∇v)_i{}^k = ∂ᵢ v^k + Γ^k_{ij} v^j`
//! - 1-forms:  `(∇τ)_{ij} = ∂ᵢ τ_j − Γ^k_{ij} τ_k`
//! - (0,2):    `(∇g)_{ijl} = ∂ᵢ g_{jl} − Γ^k_{ij} g_{kl} − Γ^k_{il} g_{jk}`
//!
//! With this convention the non-metricity of a connection is literally
//! `covariant_derivative(Γ, g, p)` read as `Q(Z,X,Y)` with `Z` the first
//! slot, and the torsion is `T^k_{ij} = Γ^k_{ij} − Γ^k_{ji}`.
//!
//! Two construction routes are implemented for the connection with
//! prescribed torsion `T` and non-metricity `Q` on a non-degenerate `ḡ`:
//! a closed form (Levi-Civita plus contorsion and disformation) and an
//! independent pointwise linear solve of the generalized Koszul system.
//! Uniqueness of the connection makes the two routes mutual oracles; the
//! closed form is what [`ConnectionField`] evaluates, and its output is
//! checked against the defining round-trip (`torsion_of`, `nonmetricity_of`)
//! on a sample cloud at construction time.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::bundle::{AugmentedMetric, BundleError};
use crate::tensor::{
    ChartPoint, DomainBox, TensorError, TensorField, TensorValue, Variance, METRIC, NONMETRICITY,
    ONE_FORM, TORSION, VECTOR,
};
use crate::verify::{sample_points, ConditionId, ConditionReport, VerificationConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConnectionError {
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("torsion field must have signature (1,2) on the chart")]
    TorsionSignature,
    #[error("non-metricity field must have signature (0,3) on the chart")]
    NonmetricitySignature,
    #[error("torsion is not antisymmetric in its lower slots: defect {defect:e} at {point:?}")]
    TorsionNotAntisymmetric { defect: f64, point: Vec<f64> },
    #[error(
        "non-metricity is not symmetric in its last two slots: defect {defect:e} at {point:?}"
    )]
    NonmetricityNotSymmetric { defect: f64, point: Vec<f64> },
    #[error("covariant derivative supports ranks (1,0), (0,1) and (0,2); got {got}")]
    UnsupportedRank { got: String },
    #[error(
        "construction round-trip failed for {what}: residual {residual:e} > {tolerance:e} \
         at {point:?} (internal consistency fault)"
    )]
    RoundTripFailure {
        what: &'static str,
        residual: f64,
        tolerance: f64,
        point: Vec<f64>,
    },
}

/// How a connection was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    LeviCivita,
    KoszulGeneral,
    User,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::LeviCivita => "levi-civita",
            Provenance::KoszulGeneral => "koszul-general",
            Provenance::User => "user",
        }
    }
}

#[derive(Clone)]
enum Backing {
    LeviCivita {
        gbar: AugmentedMetric,
    },
    Koszul {
        gbar: AugmentedMetric,
        torsion: Option<TensorField>,
        nonmetricity: Option<TensorField>,
    },
    Grid(TensorField),
}

/// Connection coefficients `Γ^k_{ij}(x)` as a function of the chart point.
#[derive(Clone)]
pub struct ConnectionField {
    dim: usize,
    backing: Backing,
    provenance: Provenance,
}

impl core::fmt::Debug for ConnectionField {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ConnectionField")
            .field("dim", &self.dim)
            .field("provenance", &self.provenance.as_str())
            .finish()
    }
}

impl ConnectionField {
    /// The Levi-Civita connection of `ḡ`.
    pub fn levi_civita(gbar: AugmentedMetric) -> Self {
        ConnectionField {
            dim: gbar.dim(),
            backing: Backing::LeviCivita { gbar },
            provenance: Provenance::LeviCivita,
        }
    }

    /// A user-supplied coefficient grid with signature `[Upper, Lower, Lower]`
    /// and index order `(k, i, j)`.
    pub fn from_field(field: TensorField) -> Result<Self, ConnectionError> {
        if field.variance() != TORSION {
            return Err(ConnectionError::TorsionSignature);
        }
        Ok(ConnectionField {
            dim: field.dim(),
            backing: Backing::Grid(field),
            provenance: Provenance::User,
        })
    }

    /// Re-wraps this connection as an opaque user connection: downstream code
    /// sees only pointwise coefficients, not the construction.
    pub fn as_user_field(&self) -> ConnectionField {
        let inner = self.clone();
        let dim = self.dim;
        let field = TensorField::from_callback(
            TORSION,
            dim,
            move |p| match inner.evaluate(p) {
                Ok(v) => v,
                Err(_) => TensorValue::from_fn(TORSION, dim, |_| f64::NAN),
            },
            None,
        )
        .expect("dimension already validated");
        ConnectionField {
            dim,
            backing: Backing::Grid(field),
            provenance: Provenance::User,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// True when every ingredient is expression-backed.
    pub fn is_exact(&self) -> bool {
        match &self.backing {
            Backing::LeviCivita { gbar } => gbar.is_exact(),
            Backing::Koszul {
                gbar,
                torsion,
                nonmetricity,
            } => {
                gbar.is_exact()
                    && torsion.as_ref().is_none_or(TensorField::is_exact)
                    && nonmetricity.as_ref().is_none_or(TensorField::is_exact)
            }
            Backing::Grid(field) => field.is_exact(),
        }
    }

    /// Coefficients at `p` as a `[Upper, Lower, Lower]` value, index order
    /// `(k, i, j)`.
    pub fn evaluate(&self, p: &ChartPoint) -> Result<TensorValue, ConnectionError> {
        match &self.backing {
            Backing::LeviCivita { gbar } => levi_civita(gbar, p),
            Backing::Koszul {
                gbar,
                torsion,
                nonmetricity,
            } => koszul_closed_form(gbar, torsion.as_ref(), nonmetricity.as_ref(), p),
            Backing::Grid(field) => Ok(field.evaluate(p)?),
        }
    }
}

fn partials_of_metric(
    gbar: &AugmentedMetric,
    p: &ChartPoint,
) -> Result<Vec<TensorValue>, ConnectionError> {
    (0..gbar.dim())
        .map(|i| gbar.partial(p, i).map_err(ConnectionError::from))
        .collect()
}

fn torsion_value_or_zero(
    torsion: Option<&TensorField>,
    dim: usize,
    p: &ChartPoint,
) -> Result<TensorValue, ConnectionError> {
    match torsion {
        Some(t) => Ok(t.evaluate(p)?),
        None => Ok(TensorValue::zeros(TORSION, dim)),
    }
}

fn nonmetricity_value_or_zero(
    q: Option<&TensorField>,
    dim: usize,
    p: &ChartPoint,
) -> Result<TensorValue, ConnectionError> {
    match q {
        Some(q) => Ok(q.evaluate(p)?),
        None => Ok(TensorValue::zeros(NONMETRICITY, dim)),
    }
}

/// Christoffel symbols of `ḡ` at `p`:
/// `Γ^k_{ij} = ½ ḡ^{kl} (∂ᵢ ḡ_{jl} + ∂ⱼ ḡ_{il} − ∂_l ḡ_{ij})`.
pub fn levi_civita(gbar: &AugmentedMetric, p: &ChartPoint) -> Result<TensorValue, ConnectionError> {
    let n = gbar.dim();
    let inverse = gbar.inverse_at(p)?;
    let dg = partials_of_metric(gbar, p)?;
    Ok(TensorValue::from_fn(TORSION, n, |idx| {
        let (k, i, j) = (idx[0], idx[1], idx[2]);
        let mut sum = 0.0;
        for l in 0..n {
            sum +=
                inverse[k * n + l] * (dg[i].get(&[j, l]) + dg[j].get(&[i, l]) - dg[l].get(&[i, j]));
        }
        0.5 * sum
    }))
}

/// Closed-form coefficients of the connection with torsion `T` and
/// non-metricity `Q` relative to `ḡ`: Levi-Civita plus contorsion plus
/// disformation, with the lowered coefficient
///
/// ```text
/// Γ_{l,ij} = ½ ( ∂ᵢḡ_{jl} + ∂ⱼḡ_{li} − ∂_lḡ_{ij}
///              + T_{l,ij} − T_{j,il} − T_{i,jl}
///              − Q_{ijl} − Q_{jli} + Q_{lij} )
/// ```
///
/// where `T_{a,bc} = ḡ_{am} T^m_{bc}`. The sign and index placement are fixed
/// by the round-trip contract: `torsion_of` and `nonmetricity_of` must
/// recover `T` and `Q` exactly, which [`koszul_connection`] enforces on a
/// sample cloud.
fn koszul_closed_form(
    gbar: &AugmentedMetric,
    torsion: Option<&TensorField>,
    nonmetricity: Option<&TensorField>,
    p: &ChartPoint,
) -> Result<TensorValue, ConnectionError> {
    let n = gbar.dim();
    let gv = gbar.evaluate(p)?;
    let inverse = gbar.inverse_at(p)?;
    let dg = partials_of_metric(gbar, p)?;
    let tv = torsion_value_or_zero(torsion, n, p)?;
    let qv = nonmetricity_value_or_zero(nonmetricity, n, p)?;

    // T_{a,bc} = ḡ_{am} T^m_{bc}
    let tlow = TensorValue::from_fn(NONMETRICITY, n, |idx| {
        let (a, b, c) = (idx[0], idx[1], idx[2]);
        let mut sum = 0.0;
        for m in 0..n {
            sum += gv.get(&[a, m]) * tv.get(&[m, b, c]);
        }
        sum
    });

    let lowered = TensorValue::from_fn(NONMETRICITY, n, |idx| {
        let (l, i, j) = (idx[0], idx[1], idx[2]);
        0.5 * (dg[i].get(&[j, l]) + dg[j].get(&[l, i]) - dg[l].get(&[i, j]) + tlow.get(&[l, i, j])
            - tlow.get(&[j, i, l])
            - tlow.get(&[i, j, l])
            - qv.get(&[i, j, l])
            - qv.get(&[j, l, i])
            + qv.get(&[l, i, j]))
    });

    Ok(TensorValue::from_fn(TORSION, n, |idx| {
        let (k, i, j) = (idx[0], idx[1], idx[2]);
        let mut sum = 0.0;
        for l in 0..n {
            sum += inverse[k * n + l] * lowered.get(&[l, i, j]);
        }
        sum
    }))
}

/// Independent construction route: for each lower pair `(i,j)`, solve the
/// linear system `2 ḡ_{lk} Γ^k_{ij} = rhs_l` assembled from the metric
/// derivatives and the torsion/non-metricity definitions. Agrees with the
/// closed-form route by uniqueness of the connection.
pub fn koszul_pointwise_solve(
    gbar: &AugmentedMetric,
    torsion: Option<&TensorField>,
    nonmetricity: Option<&TensorField>,
    p: &ChartPoint,
) -> Result<TensorValue, ConnectionError> {
    let n = gbar.dim();
    let gv = gbar.evaluate(p)?;
    let dg = partials_of_metric(gbar, p)?;
    let tv = torsion_value_or_zero(torsion, n, p)?;
    let qv = nonmetricity_value_or_zero(nonmetricity, n, p)?;

    let lower_torsion = |a: usize, b: usize, c: usize| -> f64 {
        let mut sum = 0.0;
        for m in 0..n {
            sum += gv.get(&[a, m]) * tv.get(&[m, b, c]);
        }
        sum
    };

    let mut gamma = TensorValue::zeros(TORSION, n);
    let mut rhs = vec![0.0; n];
    let mut doubled = vec![0.0; n * n];
    for (flat, entry) in doubled.iter_mut().enumerate() {
        *entry = 2.0 * gv.components()[flat];
    }
    // Factor 2ḡ once; every (i,j) pair reuses it.
    let lu = crate::linalg::lu_factor(n, &doubled).map_err(|_| {
        ConnectionError::Bundle(BundleError::SingularAt {
            point: p.coords().to_vec(),
        })
    })?;

    for i in 0..n {
        for j in 0..n {
            for (l, slot) in rhs.iter_mut().enumerate() {
                *slot = dg[i].get(&[j, l]) + dg[j].get(&[l, i]) - dg[l].get(&[i, j])
                    + lower_torsion(l, i, j)
                    - lower_torsion(j, i, l)
                    - lower_torsion(i, j, l)
                    - qv.get(&[i, j, l])
                    - qv.get(&[j, l, i])
                    + qv.get(&[l, i, j]);
            }
            let x = lu.solve(&rhs);
            for (k, coeff) in x.iter().enumerate() {
                gamma.set(&[k, i, j], *coeff);
            }
        }
    }
    Ok(gamma)
}

fn check_torsion_input(
    torsion: &TensorField,
    dim: usize,
    samples: &[ChartPoint],
    tolerance: f64,
) -> Result<(), ConnectionError> {
    if torsion.variance() != TORSION || torsion.dim() != dim {
        return Err(ConnectionError::TorsionSignature);
    }
    for p in samples {
        let value = torsion.evaluate(p)?;
        let defect = value.max_antisymmetry_defect(1, 2);
        if defect > tolerance {
            return Err(ConnectionError::TorsionNotAntisymmetric {
                defect,
                point: p.coords().to_vec(),
            });
        }
    }
    Ok(())
}

fn check_nonmetricity_input(
    q: &TensorField,
    dim: usize,
    samples: &[ChartPoint],
    tolerance: f64,
) -> Result<(), ConnectionError> {
    if q.variance() != NONMETRICITY || q.dim() != dim {
        return Err(ConnectionError::NonmetricitySignature);
    }
    for p in samples {
        let value = q.evaluate(p)?;
        let defect = value.max_asymmetry(1, 2);
        if defect > tolerance {
            return Err(ConnectionError::NonmetricityNotSymmetric {
                defect,
                point: p.coords().to_vec(),
            });
        }
    }
    Ok(())
}

/// Builds the unique connection with torsion `T` and non-metricity `Q`
/// relative to `ḡ`, then certifies it by round-trip on the sample cloud:
/// `torsion_of` must reproduce `T` and `nonmetricity_of(·, ḡ)` must reproduce
/// `Q`. A round-trip failure is an internal consistency fault (a convention
/// bug), not a property of the input, and aborts the construction.
///
/// Returns the connection together with the two round-trip reports.
pub fn koszul_connection(
    gbar: &AugmentedMetric,
    torsion: Option<&TensorField>,
    nonmetricity: Option<&TensorField>,
    domain: &DomainBox,
    cfg: &VerificationConfig,
) -> Result<(ConnectionField, Vec<ConditionReport>), ConnectionError> {
    let n = gbar.dim();
    let sampling_domain = cfg.domain.as_ref().unwrap_or(domain);
    let samples = sample_points(sampling_domain, cfg.sample_count, cfg.rng_seed);

    if let Some(t) = torsion {
        check_torsion_input(t, n, &samples, cfg.tolerances.exact)?;
    }
    if let Some(q) = nonmetricity {
        check_nonmetricity_input(q, n, &samples, cfg.tolerances.exact)?;
    }

    let connection = ConnectionField {
        dim: n,
        backing: Backing::Koszul {
            gbar: gbar.clone(),
            torsion: torsion.cloned(),
            nonmetricity: nonmetricity.cloned(),
        },
        provenance: Provenance::KoszulGeneral,
    };

    let exact = connection.is_exact();
    let tolerance = cfg.residual_tolerance(exact);
    let mut torsion_acc = crate::verify::ResidualAccumulator::new();
    let mut q_acc = crate::verify::ResidualAccumulator::new();

    for p in &samples {
        let recovered_t = torsion_of(&connection, p)?;
        let target_t = torsion_value_or_zero(torsion, n, p)?;
        torsion_acc.record(p, recovered_t.max_abs_diff(&target_t)?);

        let recovered_q = nonmetricity_of(&connection, gbar.field(), p)?;
        let target_q = nonmetricity_value_or_zero(nonmetricity, n, p)?;
        q_acc.record(p, recovered_q.max_abs_diff(&target_q)?);
    }

    let torsion_report = torsion_acc.finish(ConditionId::TorsionRoundTrip, tolerance, None);
    let q_report = q_acc.finish(ConditionId::NonmetricityRoundTrip, tolerance, None);

    if !torsion_report.pass {
        return Err(ConnectionError::RoundTripFailure {
            what: "torsion",
            residual: torsion_report.max_residual,
            tolerance,
            point: torsion_report.worst_point,
        });
    }
    if !q_report.pass {
        return Err(ConnectionError::RoundTripFailure {
            what: "non-metricity",
            residual: q_report.max_residual,
            tolerance,
            point: q_report.worst_point,
        });
    }

    Ok((connection, vec![torsion_report, q_report]))
}

/// Covariant derivative of a rank (1,0), (0,1) or (0,2) field at `p`, with
/// the derivative slot prepended (see the module docs for the formulas).
pub fn covariant_derivative(
    gamma: &ConnectionField,
    field: &TensorField,
    p: &ChartPoint,
) -> Result<TensorValue, ConnectionError> {
    let n = gamma.dim();
    let coeffs = gamma.evaluate(p)?;
    let value = field.evaluate(p)?;
    let partials: Vec<TensorValue> = (0..n)
        .map(|i| field.partial(p, i))
        .collect::<Result<_, _>>()?;

    if field.variance() == VECTOR {
        return Ok(TensorValue::from_fn(
            &[Variance::Lower, Variance::Upper],
            n,
            |idx| {
                let (i, k) = (idx[0], idx[1]);
                let mut sum = partials[i].get(&[k]);
                for j in 0..n {
                    sum += coeffs.get(&[k, i, j]) * value.get(&[j]);
                }
                sum
            },
        ));
    }
    if field.variance() == ONE_FORM {
        return Ok(TensorValue::from_fn(METRIC, n, |idx| {
            let (i, j) = (idx[0], idx[1]);
            let mut sum = partials[i].get(&[j]);
            for k in 0..n {
                sum -= coeffs.get(&[k, i, j]) * value.get(&[k]);
            }
            sum
        }));
    }
    if field.variance() == METRIC {
        return Ok(TensorValue::from_fn(NONMETRICITY, n, |idx| {
            let (i, j, l) = (idx[0], idx[1], idx[2]);
            let mut sum = partials[i].get(&[j, l]);
            for k in 0..n {
                sum -= coeffs.get(&[k, i, j]) * value.get(&[k, l]);
                sum -= coeffs.get(&[k, i, l]) * value.get(&[j, k]);
            }
            sum
        }));
    }
    Err(ConnectionError::UnsupportedRank {
        got: alloc::format!("{:?}", field.variance()),
    })
}

/// Torsion of a connection at `p`: `T^k_{ij} = Γ^k_{ij} − Γ^k_{ji}`.
pub fn torsion_of(gamma: &ConnectionField, p: &ChartPoint) -> Result<TensorValue, ConnectionError> {
    let coeffs = gamma.evaluate(p)?;
    let n = gamma.dim();
    Ok(TensorValue::from_fn(TORSION, n, |idx| {
        let (k, i, j) = (idx[0], idx[1], idx[2]);
        coeffs.get(&[k, i, j]) - coeffs.get(&[k, j, i])
    }))
}

/// Non-metricity of a connection with respect to a metric-like field:
/// `Q(Z,X,Y) = (∇_Z m)(X,Y)`, the covariant derivative with the derivative
/// slot first.
pub fn nonmetricity_of(
    gamma: &ConnectionField,
    metric: &TensorField,
    p: &ChartPoint,
) -> Result<TensorValue, ConnectionError> {
    if metric.variance() != METRIC {
        return Err(ConnectionError::UnsupportedRank {
            got: alloc::format!("{:?}", metric.variance()),
        });
    }
    covariant_derivative(gamma, metric, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::AugmentedMetric;
    use approx::assert_abs_diff_eq;

    fn pt(coords: &[f64]) -> ChartPoint {
        ChartPoint::new(coords.to_vec()).unwrap()
    }

    fn identity_metric(dim: usize) -> AugmentedMetric {
        let value =
            TensorValue::from_fn(METRIC, dim, |idx| if idx[0] == idx[1] { 1.0 } else { 0.0 });
        AugmentedMetric::from_field(TensorField::constant(&value).unwrap()).unwrap()
    }

    /// ḡ = diag(1, 1+x1², 1); the only nonzero Christoffel symbol is
    /// Γ¹₁₁ = x1/(1+x1²).
    fn curved_metric() -> AugmentedMetric {
        AugmentedMetric::from_field(
            TensorField::parse_components(
                METRIC,
                3,
                &["1", "0", "0", "0", "1+x1^2", "0", "0", "0", "1"],
            )
            .unwrap(),
        )
        .unwrap()
    }

    fn constant_torsion(dim: usize, entries: &[(usize, usize, usize, f64)]) -> TensorField {
        let mut value = TensorValue::zeros(TORSION, dim);
        for &(k, i, j, c) in entries {
            value.set(&[k, i, j], c);
            value.set(&[k, j, i], -c);
        }
        TensorField::constant(&value).unwrap()
    }

    #[test]
    fn levi_civita_of_identity_vanishes() {
        let gbar = identity_metric(3);
        let gamma = levi_civita(&gbar, &pt(&[0.4, -0.2, 0.9])).unwrap();
        assert_eq!(gamma.max_abs(), 0.0);
    }

    #[test]
    fn levi_civita_of_scaled_identity_vanishes() {
        let value = TensorValue::from_fn(METRIC, 3, |idx| if idx[0] == idx[1] { 2.5 } else { 0.0 });
        let gbar = AugmentedMetric::from_field(TensorField::constant(&value).unwrap()).unwrap();
        let gamma = levi_civita(&gbar, &pt(&[0.1, 0.1, 0.1])).unwrap();
        assert_eq!(gamma.max_abs(), 0.0);
    }

    #[test]
    fn christoffel_hand_oracle() {
        let gbar = curved_metric();
        let x1 = 0.8;
        let gamma = levi_civita(&gbar, &pt(&[0.3, x1, -0.5])).unwrap();
        let expected = x1 / (1.0 + x1 * x1);
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let target = if (k, i, j) == (1, 1, 1) {
                        expected
                    } else {
                        0.0
                    };
                    assert_abs_diff_eq!(gamma.get(&[k, i, j]), target, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn koszul_reduces_to_levi_civita() {
        let gbar = curved_metric();
        let domain = DomainBox::cube(3, -1.0, 1.0).unwrap();
        let cfg = VerificationConfig::default();
        let (conn, reports) = koszul_connection(&gbar, None, None, &domain, &cfg).unwrap();
        assert!(reports.iter().all(|r| r.pass));
        for p in sample_points(&domain, 50, 3) {
            let general = conn.evaluate(&p).unwrap();
            let lc = levi_civita(&gbar, &p).unwrap();
            assert!(general.max_abs_diff(&lc).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn constant_torsion_round_trip_on_flat_metric() {
        let gbar = identity_metric(3);
        let torsion = constant_torsion(3, &[(2, 0, 1, 0.7)]);
        let domain = DomainBox::cube(3, -1.0, 1.0).unwrap();
        let cfg = VerificationConfig::default();
        let (conn, _) = koszul_connection(&gbar, Some(&torsion), None, &domain, &cfg).unwrap();
        let p = pt(&[0.2, -0.6, 0.4]);
        let recovered = torsion_of(&conn, &p).unwrap();
        let target = torsion.evaluate(&p).unwrap();
        assert!(recovered.max_abs_diff(&target).unwrap() <= 1e-10);
        let q = nonmetricity_of(&conn, gbar.field(), &p).unwrap();
        assert!(q.max_abs() <= 1e-10);
    }

    #[test]
    fn constant_nonmetricity_round_trip_on_flat_metric() {
        let gbar = identity_metric(3);
        let mut qv = TensorValue::zeros(NONMETRICITY, 3);
        qv.set(&[0, 0, 0], 0.4);
        let q = TensorField::constant(&qv).unwrap();
        let domain = DomainBox::cube(3, -1.0, 1.0).unwrap();
        let cfg = VerificationConfig::default();
        let (conn, _) = koszul_connection(&gbar, None, Some(&q), &domain, &cfg).unwrap();
        let p = pt(&[0.5, 0.1, -0.3]);
        let recovered = nonmetricity_of(&conn, gbar.field(), &p).unwrap();
        assert!(recovered.max_abs_diff(&qv).unwrap() <= 1e-10);
        let t = torsion_of(&conn, &p).unwrap();
        assert!(t.max_abs() <= 1e-10);
    }

    #[test]
    fn pointwise_solve_agrees_with_closed_form() {
        let gbar = curved_metric();
        let torsion = constant_torsion(3, &[(2, 0, 1, 0.3), (0, 1, 2, -0.2)]);
        let mut qv = TensorValue::zeros(NONMETRICITY, 3);
        qv.set(&[1, 0, 0], 0.25);
        qv.set(&[0, 1, 2], 0.1);
        qv.set(&[0, 2, 1], 0.1);
        let q = TensorField::constant(&qv).unwrap();
        let domain = DomainBox::cube(3, -1.0, 1.0).unwrap();
        let cfg = VerificationConfig::default();
        let (conn, _) = koszul_connection(&gbar, Some(&torsion), Some(&q), &domain, &cfg).unwrap();
        for p in sample_points(&domain, 40, 11) {
            let closed = conn.evaluate(&p).unwrap();
            let solved = koszul_pointwise_solve(&gbar, Some(&torsion), Some(&q), &p).unwrap();
            assert!(closed.max_abs_diff(&solved).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn pointwise_solve_flat_case_vanishes() {
        let gbar = identity_metric(3);
        let gamma = koszul_pointwise_solve(&gbar, None, None, &pt(&[0.3, 0.3, 0.3])).unwrap();
        assert_eq!(gamma.max_abs(), 0.0);
    }

    #[test]
    fn pointwise_solve_matches_christoffel_oracle() {
        let gbar = curved_metric();
        let x1 = -0.45;
        let gamma = koszul_pointwise_solve(&gbar, None, None, &pt(&[0.0, x1, 0.0])).unwrap();
        assert_abs_diff_eq!(gamma.get(&[1, 1, 1]), x1 / (1.0 + x1 * x1), epsilon = 1e-12);
    }

    #[test]
    fn flat_connection_gives_plain_partials() {
        let zero = ConnectionField::from_field(
            TensorField::constant(&TensorValue::zeros(TORSION, 2)).unwrap(),
        )
        .unwrap();
        let v = TensorField::parse_components(VECTOR, 2, &["x0^2", "x1"]).unwrap();
        let d = covariant_derivative(&zero, &v, &pt(&[1.5, 2.0])).unwrap();
        assert_abs_diff_eq!(d.get(&[0, 0]), 3.0);
        assert_abs_diff_eq!(d.get(&[1, 1]), 1.0);
        assert_abs_diff_eq!(d.get(&[1, 0]), 0.0);
    }

    #[test]
    fn levi_civita_is_metric_compatible() {
        let gbar = curved_metric();
        let conn = ConnectionField::levi_civita(gbar.clone());
        let domain = DomainBox::cube(3, -1.0, 1.0).unwrap();
        for p in sample_points(&domain, 100, 5) {
            let grad = covariant_derivative(&conn, gbar.field(), &p).unwrap();
            assert!(grad.max_abs() <= 1e-9, "∇ḡ = {:e}", grad.max_abs());
        }
    }

    #[test]
    fn unsupported_rank_rejected() {
        let conn = ConnectionField::levi_civita(identity_metric(2));
        let bad = TensorField::constant(&TensorValue::zeros(TORSION, 2)).unwrap();
        assert!(matches!(
            covariant_derivative(&conn, &bad, &pt(&[0.0, 0.0])),
            Err(ConnectionError::UnsupportedRank { .. })
        ));
    }

    #[test]
    fn torsion_of_symmetric_connection_vanishes() {
        let gbar = curved_metric();
        let conn = ConnectionField::levi_civita(gbar);
        let t = torsion_of(&conn, &pt(&[0.1, 0.7, -0.2])).unwrap();
        assert_eq!(t.max_abs(), 0.0);
    }

    #[test]
    fn nonmetricity_of_flat_connection_on_curved_metric() {
        // Γ = 0 on a non-constant metric leaves Q = ∂g.
        let zero = ConnectionField::from_field(
            TensorField::constant(&TensorValue::zeros(TORSION, 3)).unwrap(),
        )
        .unwrap();
        let gbar = curved_metric();
        let x1 = 0.6;
        let q = nonmetricity_of(&zero, gbar.field(), &pt(&[0.0, x1, 0.0])).unwrap();
        assert_abs_diff_eq!(q.get(&[1, 1, 1]), 2.0 * x1);
    }

    #[test]
    fn antisymmetry_of_torsion_input_enforced() {
        let gbar = identity_metric(2);
        let mut bad = TensorValue::zeros(TORSION, 2);
        bad.set(&[0, 0, 1], 1.0); // partner (0,1,0) left at zero
        let t = TensorField::constant(&bad).unwrap();
        let domain = DomainBox::cube(2, -1.0, 1.0).unwrap();
        let cfg = VerificationConfig::default();
        let err = koszul_connection(&gbar, Some(&t), None, &domain, &cfg).unwrap_err();
        assert!(matches!(
            err,
            ConnectionError::TorsionNotAntisymmetric { .. }
        ));
    }

    #[test]
    fn leibniz_rule_for_coframe_square() {
        // ∇(τ⊗τ) = (∇τ)⊗τ + τ⊗(∇τ), checked componentwise.
        let gbar = curved_metric();
        let conn = ConnectionField::levi_civita(gbar);
        let tau = TensorField::parse_components(ONE_FORM, 3, &["1", "x1^2", "0"]).unwrap();
        let square = tau.field_product(&tau).unwrap();
        let domain = DomainBox::cube(3, -1.0, 1.0).unwrap();
        for p in sample_points(&domain, 30, 9) {
            let direct = covariant_derivative(&conn, &square, &p).unwrap();
            let dtau = covariant_derivative(&conn, &tau, &p).unwrap();
            let tv = tau.evaluate(&p).unwrap();
            let n = 3;
            let assembled = TensorValue::from_fn(NONMETRICITY, n, |idx| {
                let (i, j, l) = (idx[0], idx[1], idx[2]);
                dtau.get(&[i, j]) * tv.get(&[l]) + tv.get(&[j]) * dtau.get(&[i, l])
            });
            assert!(direct.max_abs_diff(&assembled).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn user_wrap_hides_construction_but_matches() {
        let gbar = curved_metric();
        let conn = ConnectionField::levi_civita(gbar);
        let wrapped = conn.as_user_field();
        assert_eq!(wrapped.provenance(), Provenance::User);
        let p = pt(&[0.2, 0.4, 0.6]);
        let a = conn.evaluate(&p).unwrap();
        let b = wrapped.evaluate(&p).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() == 0.0);
    }
}
