//! The light-like structure on a chart: a degenerate metric `g` of declared
//! co-rank `r`, a frame `ξ₁..ξ_r` of its radical, a coframe `τ₁..τ_r` dual to
//! the frame, and the non-degenerate completion `ḡ = g + Σ τ_k ⊗ τ_k`.
//!
//! The engine verifies rather than infers: `r` and the index of `g` are
//! declared by the caller, the frame and coframe are caller-supplied fields,
//! and `validate` certifies the declared structure over a sample cloud.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::float;
use crate::linalg;
use crate::tensor::{
    ChartPoint, DomainBox, TensorError, TensorField, TensorValue, METRIC, ONE_FORM, VECTOR,
};
use crate::verify::{
    sample_points, ConditionId, ConditionReport, ResidualAccumulator, VerificationConfig,
};

/// Relative threshold below which a singular value of `g(p)` counts as zero.
pub const RANK_TOLERANCE_REL: f64 = 1e-10;

/// Smallest admissible `|eigenvalue|` of the augmented metric.
pub const DEGENERACY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BundleError {
    #[error("metric field must be a (0,2) field on the chart")]
    MetricSignature,
    #[error("radical frame entry {index} must be a vector field of the chart dimension")]
    FrameSignature { index: usize },
    #[error("coframe entry {index} must be a 1-form field of the chart dimension")]
    CoframeSignature { index: usize },
    #[error("declared nullity {nullity} must satisfy 1 ≤ r ≤ {dim}")]
    NullityRange { nullity: usize, dim: usize },
    #[error("expected {expected} {what} fields, got {got}")]
    FieldCount {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("domain box dimension {got} does not match chart dimension {expected}")]
    DomainDimension { expected: usize, got: usize },
    #[error(
        "nullity mismatch at {point:?}: expected co-rank {expected}, computed {found} \
         (the metric violates the constant-corank hypothesis there)"
    )]
    NullityMismatch {
        expected: usize,
        found: usize,
        point: Vec<f64>,
    },
    #[error(
        "augmented metric is degenerate at {point:?}: min |eigenvalue| = {min_abs_eigenvalue:e}"
    )]
    AugmentedDegenerate {
        point: Vec<f64>,
        min_abs_eigenvalue: f64,
    },
    #[error("matrix of ḡ is singular at {point:?}")]
    SingularAt { point: Vec<f64> },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Degenerate metric together with its declared null structure.
#[derive(Debug, Clone)]
pub struct DegenerateMetricBundle {
    metric: TensorField,
    nullity: usize,
    index: usize,
    radical_frame: Vec<TensorField>,
    coframe: Vec<TensorField>,
    domain: DomainBox,
}

impl DegenerateMetricBundle {
    pub fn new(
        metric: TensorField,
        nullity: usize,
        index: usize,
        radical_frame: Vec<TensorField>,
        coframe: Vec<TensorField>,
        domain: DomainBox,
    ) -> Result<Self, BundleError> {
        let dim = metric.dim();
        if metric.variance() != METRIC {
            return Err(BundleError::MetricSignature);
        }
        if nullity == 0 || nullity > dim {
            return Err(BundleError::NullityRange { nullity, dim });
        }
        if radical_frame.len() != nullity {
            return Err(BundleError::FieldCount {
                what: "radical frame",
                expected: nullity,
                got: radical_frame.len(),
            });
        }
        if coframe.len() != nullity {
            return Err(BundleError::FieldCount {
                what: "coframe",
                expected: nullity,
                got: coframe.len(),
            });
        }
        for (index, xi) in radical_frame.iter().enumerate() {
            if xi.variance() != VECTOR || xi.dim() != dim {
                return Err(BundleError::FrameSignature { index });
            }
        }
        for (index, tau) in coframe.iter().enumerate() {
            if tau.variance() != ONE_FORM || tau.dim() != dim {
                return Err(BundleError::CoframeSignature { index });
            }
        }
        if domain.dimension() != dim {
            return Err(BundleError::DomainDimension {
                expected: dim,
                got: domain.dimension(),
            });
        }
        Ok(DegenerateMetricBundle {
            metric,
            nullity,
            index,
            radical_frame,
            coframe,
            domain,
        })
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn metric(&self) -> &TensorField {
        &self.metric
    }

    pub fn nullity(&self) -> usize {
        self.nullity
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn radical_frame(&self) -> &[TensorField] {
        &self.radical_frame
    }

    pub fn coframe(&self) -> &[TensorField] {
        &self.coframe
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    /// True when the metric, frame and coframe are all expression-backed.
    pub fn is_exact(&self) -> bool {
        self.metric.is_exact()
            && self.radical_frame.iter().all(TensorField::is_exact)
            && self.coframe.iter().all(TensorField::is_exact)
    }

    fn sample_cloud(&self, cfg: &VerificationConfig) -> Vec<ChartPoint> {
        let domain = cfg.domain.as_ref().unwrap_or(&self.domain);
        sample_points(domain, cfg.sample_count, cfg.rng_seed)
    }

    /// Checks every declared invariant of the bundle over the sample cloud
    /// and reports the max residual per invariant. Violations are report
    /// entries, not errors; only evaluation faults bubble up.
    pub fn validate(&self, cfg: &VerificationConfig) -> Result<Vec<ConditionReport>, BundleError> {
        let n = self.dim();
        let r = self.nullity;
        let samples = self.sample_cloud(cfg);
        let tier = cfg.residual_tolerance(self.is_exact());

        let mut symmetry = ResidualAccumulator::new();
        let mut nullity_acc = ResidualAccumulator::new();
        let mut membership = ResidualAccumulator::new();
        let mut independence = ResidualAccumulator::new();
        let mut duality = ResidualAccumulator::new();
        let mut index_count = ResidualAccumulator::new();

        let mut nullity_note: Option<String> = None;
        let mut index_note: Option<String> = None;

        for p in &samples {
            let g = self.metric.evaluate(p)?;
            symmetry.record(p, g.max_asymmetry(0, 1));

            let (eigenvalues, _) = linalg::sym_eigen(n, g.components());
            let scale = eigenvalues
                .iter()
                .fold(0.0f64, |acc, v| acc.max(float::abs(*v)));
            let rank_tol = RANK_TOLERANCE_REL * scale;
            let computed_nullity = eigenvalues
                .iter()
                .filter(|v| float::abs(**v) <= rank_tol)
                .count();
            let nullity_residual = computed_nullity.abs_diff(r) as f64;
            if nullity_residual > 0.0 && nullity_note.is_none() {
                nullity_note = Some(alloc::format!(
                    "computed co-rank {computed_nullity} (declared {r})"
                ));
            }
            nullity_acc.record(p, nullity_residual);

            let negative = eigenvalues.iter().filter(|v| **v < -rank_tol).count();
            let index_residual = negative.abs_diff(self.index) as f64;
            if index_residual > 0.0 && index_note.is_none() {
                index_note = Some(alloc::format!(
                    "counted {negative} negative eigenvalues (declared index {})",
                    self.index
                ));
            }
            index_count.record(p, index_residual);

            // g(ξᵢ, ·) = 0 componentwise.
            let mut worst_membership = 0.0f64;
            let mut frame_values = Vec::with_capacity(r);
            for xi in &self.radical_frame {
                let v = xi.evaluate(p)?;
                for j in 0..n {
                    let mut contraction = 0.0;
                    for k in 0..n {
                        contraction += g.get(&[j, k]) * v.get(&[k]);
                    }
                    worst_membership = worst_membership.max(float::abs(contraction));
                }
                frame_values.push(v);
            }
            membership.record(p, worst_membership);

            // Independence through the Gram spectrum of the frame.
            let mut gram = vec![0.0; r * r];
            for a in 0..r {
                for b in 0..r {
                    let mut dot = 0.0;
                    for k in 0..n {
                        dot += frame_values[a].get(&[k]) * frame_values[b].get(&[k]);
                    }
                    gram[a * r + b] = dot;
                }
            }
            let (gram_eigen, _) = linalg::sym_eigen(r, &gram);
            let largest = gram_eigen
                .iter()
                .fold(0.0f64, |acc, v| acc.max(float::abs(*v)));
            let smallest = gram_eigen
                .iter()
                .fold(f64::INFINITY, |acc, v| acc.min(float::abs(*v)));
            let dependent = largest == 0.0 || smallest <= RANK_TOLERANCE_REL * largest;
            independence.record(p, if dependent { 1.0 } else { 0.0 });

            // τᵢ(ξⱼ) = δᵢⱼ.
            let mut worst_duality = 0.0f64;
            for (i, tau) in self.coframe.iter().enumerate() {
                let tv = tau.evaluate(p)?;
                for (j, xi) in frame_values.iter().enumerate() {
                    let mut pairing = 0.0;
                    for k in 0..n {
                        pairing += tv.get(&[k]) * xi.get(&[k]);
                    }
                    let target = if i == j { 1.0 } else { 0.0 };
                    worst_duality = worst_duality.max(float::abs(pairing - target));
                }
            }
            duality.record(p, worst_duality);
        }

        Ok(vec![
            symmetry.finish(ConditionId::MetricSymmetry, cfg.tolerances.exact, None),
            nullity_acc.finish(
                ConditionId::NullityDegree,
                cfg.tolerances.exact,
                nullity_note,
            ),
            membership.finish(ConditionId::RadicalMembership, tier, None),
            independence.finish(ConditionId::FrameIndependence, cfg.tolerances.exact, None),
            duality.finish(ConditionId::CoframeDuality, tier, None),
            index_count.finish(
                ConditionId::IndexSignature,
                cfg.tolerances.exact,
                index_note,
            ),
        ])
    }

    /// The field `ḡ = g + Σ_k τ_k ⊗ τ_k`, symbolic whenever the inputs are.
    pub fn augmented_field(&self) -> Result<TensorField, BundleError> {
        let mut acc = self.metric.clone();
        for tau in &self.coframe {
            let square = tau.field_product(tau)?;
            acc = acc.field_sum(&square)?;
        }
        Ok(acc)
    }

    /// Builds the augmented metric and certifies its non-degeneracy over the
    /// sample cloud (min `|eigenvalue|` must exceed [`DEGENERACY_TOLERANCE`]).
    pub fn build_augmented_metric(
        &self,
        cfg: &VerificationConfig,
    ) -> Result<AugmentedMetric, BundleError> {
        let metric = AugmentedMetric::from_field(self.augmented_field()?)?;
        let samples = self.sample_cloud(cfg);
        let scan = metric.degeneracy_scan(&samples)?;
        if scan.min_abs_eigenvalue <= DEGENERACY_TOLERANCE {
            return Err(BundleError::AugmentedDegenerate {
                point: scan.worst_point.coords().to_vec(),
                min_abs_eigenvalue: scan.min_abs_eigenvalue,
            });
        }
        Ok(metric)
    }
}

/// Result of scanning `ḡ` for near-degenerate eigenvalues.
#[derive(Debug, Clone)]
pub struct DegeneracyScan {
    pub min_abs_eigenvalue: f64,
    pub worst_point: ChartPoint,
}

/// The non-degenerate completion `ḡ` of a bundle.
#[derive(Debug, Clone)]
pub struct AugmentedMetric {
    field: TensorField,
}

impl AugmentedMetric {
    /// Wraps a (0,2) field. Degeneracy is caught by [`Self::degeneracy_scan`]
    /// or at the first singular pointwise solve.
    pub fn from_field(field: TensorField) -> Result<Self, BundleError> {
        if field.variance() != METRIC {
            return Err(BundleError::MetricSignature);
        }
        Ok(AugmentedMetric { field })
    }

    pub fn field(&self) -> &TensorField {
        &self.field
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn is_exact(&self) -> bool {
        self.field.is_exact()
    }

    pub fn evaluate(&self, p: &ChartPoint) -> Result<TensorValue, TensorError> {
        self.field.evaluate(p)
    }

    pub fn partial(&self, p: &ChartPoint, i: usize) -> Result<TensorValue, TensorError> {
        self.field.partial(p, i)
    }

    /// LU factorization of `ḡ(p)`, reusable across right-hand sides.
    pub fn lu_at(&self, p: &ChartPoint) -> Result<linalg::LuFactors, BundleError> {
        let value = self.field.evaluate(p)?;
        linalg::lu_factor(self.dim(), value.components()).map_err(|_| BundleError::SingularAt {
            point: p.coords().to_vec(),
        })
    }

    /// Matrix inverse `ḡ^{kl}(p)` (row-major).
    pub fn inverse_at(&self, p: &ChartPoint) -> Result<Vec<f64>, BundleError> {
        let value = self.field.evaluate(p)?;
        linalg::invert(self.dim(), value.components()).map_err(|_| BundleError::SingularAt {
            point: p.coords().to_vec(),
        })
    }

    pub fn degeneracy_scan(&self, samples: &[ChartPoint]) -> Result<DegeneracyScan, BundleError> {
        let n = self.dim();
        let mut min_abs = f64::INFINITY;
        let mut worst = samples
            .first()
            .cloned()
            .unwrap_or_else(|| ChartPoint::new(vec![0.0; n]).expect("dimension already checked"));
        for p in samples {
            let value = self.field.evaluate(p)?;
            let (eigenvalues, _) = linalg::sym_eigen(n, value.components());
            let local = eigenvalues
                .iter()
                .fold(f64::INFINITY, |acc, v| acc.min(float::abs(*v)));
            if local < min_abs {
                min_abs = local;
                worst = p.clone();
            }
        }
        Ok(DegeneracyScan {
            min_abs_eigenvalue: min_abs,
            worst_point: worst,
        })
    }
}

/// Orthonormal basis of the null space of `g(p)`, via the symmetric
/// eigendecomposition. Singular values below `RANK_TOLERANCE_REL` times the
/// largest count as zero; a count different from `expected_nullity` is the
/// constant-corank hypothesis failing at `p`.
pub fn radical_basis(
    g: &TensorField,
    p: &ChartPoint,
    expected_nullity: usize,
) -> Result<Vec<Vec<f64>>, BundleError> {
    if g.variance() != METRIC {
        return Err(BundleError::MetricSignature);
    }
    let n = g.dim();
    let value = g.evaluate(p)?;
    let (eigenvalues, eigenvectors) = linalg::sym_eigen(n, value.components());
    let scale = eigenvalues
        .iter()
        .fold(0.0f64, |acc, v| acc.max(float::abs(*v)));
    let rank_tol = RANK_TOLERANCE_REL * scale;
    let found = eigenvalues
        .iter()
        .filter(|v| float::abs(**v) <= rank_tol)
        .count();
    if found != expected_nullity {
        return Err(BundleError::NullityMismatch {
            expected: expected_nullity,
            found,
            point: p.coords().to_vec(),
        });
    }
    Ok(eigenvectors.into_iter().take(expected_nullity).collect())
}

/// Convenience generator of a radical frame and dual coframe for a constant
/// metric value: the frame is the orthonormal null basis of the matrix, the
/// coframe its Euclidean dual. Not canonical — choosing the coframe is a
/// modeling decision, and this generator is only defensible when `g` is
/// constant on the chart.
pub fn frame_for_constant_metric(
    g0: &TensorValue,
    nullity: usize,
) -> Result<(Vec<TensorField>, Vec<TensorField>), BundleError> {
    let n = g0.dim();
    let (eigenvalues, eigenvectors) = linalg::sym_eigen(n, g0.components());
    let scale = eigenvalues
        .iter()
        .fold(0.0f64, |acc, v| acc.max(float::abs(*v)));
    let rank_tol = RANK_TOLERANCE_REL * scale;
    let found = eigenvalues
        .iter()
        .filter(|v| float::abs(**v) <= rank_tol)
        .count();
    if found != nullity {
        return Err(BundleError::NullityMismatch {
            expected: nullity,
            found,
            point: Vec::new(),
        });
    }
    let mut frame = Vec::with_capacity(nullity);
    let mut coframe = Vec::with_capacity(nullity);
    for basis_vector in eigenvectors.into_iter().take(nullity) {
        let v = TensorValue::from_components(VECTOR, n, basis_vector.clone())?;
        let f = TensorValue::from_components(ONE_FORM, n, basis_vector)?;
        frame.push(TensorField::constant(&v)?);
        coframe.push(TensorField::constant(&f)?);
    }
    Ok((frame, coframe))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pt(coords: &[f64]) -> ChartPoint {
        ChartPoint::new(coords.to_vec()).unwrap()
    }

    fn diag_metric(dim: usize, entries: &[f64]) -> TensorField {
        let value = TensorValue::from_fn(METRIC, dim, |idx| {
            if idx[0] == idx[1] {
                entries[idx[0]]
            } else {
                0.0
            }
        });
        TensorField::constant(&value).unwrap()
    }

    fn flat3() -> DegenerateMetricBundle {
        DegenerateMetricBundle::new(
            diag_metric(3, &[0.0, 1.0, 1.0]),
            1,
            0,
            vec![TensorField::coordinate_vector(3, 0).unwrap()],
            vec![TensorField::coordinate_form(3, 0).unwrap()],
            DomainBox::cube(3, -1.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn radical_basis_of_diagonal_metrics() {
        let g = diag_metric(3, &[0.0, 1.0, 1.0]);
        let basis = radical_basis(&g, &pt(&[0.0, 0.0, 0.0]), 1).unwrap();
        assert_eq!(basis.len(), 1);
        assert_abs_diff_eq!(basis[0][0], 1.0);
        assert_abs_diff_eq!(basis[0][1], 0.0);
        assert_abs_diff_eq!(basis[0][2], 0.0);

        let g = diag_metric(4, &[0.0, 0.0, 1.0, 1.0]);
        let basis = radical_basis(&g, &pt(&[0.0; 4]), 2).unwrap();
        assert_eq!(basis.len(), 2);
        for v in &basis {
            assert_abs_diff_eq!(v[2], 0.0);
            assert_abs_diff_eq!(v[3], 0.0);
        }
    }

    #[test]
    fn radical_basis_nullity_mismatch() {
        let g = diag_metric(3, &[0.0, 1.0, 1.0]);
        let err = radical_basis(&g, &pt(&[0.0; 3]), 2).unwrap_err();
        assert!(matches!(
            err,
            BundleError::NullityMismatch {
                expected: 2,
                found: 1,
                ..
            }
        ));
    }

    #[test]
    fn radical_basis_annihilates_metric() {
        // Non-diagonal degenerate metric: rank 2, null direction (1, -1, 0)/√2.
        let g = TensorField::parse_components(
            METRIC,
            3,
            &["1", "1", "0", "1", "1", "0", "0", "0", "1"],
        )
        .unwrap();
        let p = pt(&[0.2, -0.4, 0.6]);
        let basis = radical_basis(&g, &p, 1).unwrap();
        let gv = g.evaluate(&p).unwrap();
        for j in 0..3 {
            let mut dot = 0.0;
            for (k, b) in basis[0].iter().enumerate() {
                dot += gv.get(&[j, k]) * b;
            }
            assert!(dot.abs() <= 1e-9);
        }
    }

    #[test]
    fn validate_flat_bundle_all_zero() {
        let bundle = flat3();
        let cfg = VerificationConfig::default();
        let reports = bundle.validate(&cfg).unwrap();
        assert_eq!(reports.len(), 6);
        for report in &reports {
            assert!(report.pass, "{:?} failed", report.condition);
            assert_eq!(report.max_residual, 0.0, "{:?}", report.condition);
        }
    }

    #[test]
    fn validate_flags_broken_duality() {
        // τ = 2·dx0 with ξ = ∂₀ → τ(ξ) = 2, duality residual 1.
        let bundle = DegenerateMetricBundle::new(
            diag_metric(3, &[0.0, 1.0, 1.0]),
            1,
            0,
            vec![TensorField::coordinate_vector(3, 0).unwrap()],
            vec![TensorField::parse_components(ONE_FORM, 3, &["2", "0", "0"]).unwrap()],
            DomainBox::cube(3, -1.0, 1.0).unwrap(),
        )
        .unwrap();
        let reports = bundle.validate(&VerificationConfig::default()).unwrap();
        let duality = reports
            .iter()
            .find(|r| r.condition == ConditionId::CoframeDuality)
            .unwrap();
        assert!(!duality.pass);
        assert_abs_diff_eq!(duality.max_residual, 1.0);
    }

    #[test]
    fn validate_flags_nonradical_frame() {
        // ξ = ∂₁ is not in the radical of diag(0,1,1): g(ξ,ξ) = 1.
        let bundle = DegenerateMetricBundle::new(
            diag_metric(3, &[0.0, 1.0, 1.0]),
            1,
            0,
            vec![TensorField::coordinate_vector(3, 1).unwrap()],
            vec![TensorField::coordinate_form(3, 1).unwrap()],
            DomainBox::cube(3, -1.0, 1.0).unwrap(),
        )
        .unwrap();
        let reports = bundle.validate(&VerificationConfig::default()).unwrap();
        let membership = reports
            .iter()
            .find(|r| r.condition == ConditionId::RadicalMembership)
            .unwrap();
        assert!(!membership.pass);
        assert_abs_diff_eq!(membership.max_residual, 1.0);
    }

    #[test]
    fn augmented_metric_of_flat_bundle_is_identity() {
        let bundle = flat3();
        let gbar = bundle
            .build_augmented_metric(&VerificationConfig::default())
            .unwrap();
        let v = gbar.evaluate(&pt(&[0.3, -0.9, 0.5])).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(v.get(&[i, j]), expected);
            }
        }
    }

    #[test]
    fn augmented_metric_r2_is_identity() {
        let bundle = DegenerateMetricBundle::new(
            diag_metric(3, &[0.0, 0.0, 1.0]),
            2,
            0,
            vec![
                TensorField::coordinate_vector(3, 0).unwrap(),
                TensorField::coordinate_vector(3, 1).unwrap(),
            ],
            vec![
                TensorField::coordinate_form(3, 0).unwrap(),
                TensorField::coordinate_form(3, 1).unwrap(),
            ],
            DomainBox::cube(3, -1.0, 1.0).unwrap(),
        )
        .unwrap();
        let gbar = bundle
            .build_augmented_metric(&VerificationConfig::default())
            .unwrap();
        let v = gbar.evaluate(&pt(&[0.1, 0.2, 0.3])).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(v.get(&[i, j]), expected);
            }
        }
    }

    #[test]
    fn augmented_metric_componentwise_sum() {
        // g = diag(0, 1+x0², 1), τ = dx0 → ḡ = diag(1, 1+x0², 1).
        let g = TensorField::parse_components(
            METRIC,
            3,
            &["0", "0", "0", "0", "1+x0^2", "0", "0", "0", "1"],
        )
        .unwrap();
        let bundle = DegenerateMetricBundle::new(
            g,
            1,
            0,
            vec![TensorField::coordinate_vector(3, 0).unwrap()],
            vec![TensorField::coordinate_form(3, 0).unwrap()],
            DomainBox::cube(3, -1.0, 1.0).unwrap(),
        )
        .unwrap();
        let gbar = bundle
            .build_augmented_metric(&VerificationConfig::default())
            .unwrap();
        assert!(gbar.is_exact());
        let p = pt(&[0.5, 0.2, -0.3]);
        let v = gbar.evaluate(&p).unwrap();
        assert_abs_diff_eq!(v.get(&[0, 0]), 1.0);
        assert_abs_diff_eq!(v.get(&[1, 1]), 1.25);
        assert_abs_diff_eq!(v.get(&[2, 2]), 1.0);
        assert_abs_diff_eq!(v.get(&[0, 1]), 0.0);
    }

    #[test]
    fn pairing_identity_gbar_xi_equals_tau() {
        // ḡ(ξᵢ, ·) = τᵢ(·), the pivotal identity of both constructions.
        let g = TensorField::parse_components(
            METRIC,
            3,
            &["0", "0", "0", "0", "1+x1^2", "0", "0", "0", "1"],
        )
        .unwrap();
        let tau = TensorField::parse_components(ONE_FORM, 3, &["1", "0", "0.5*x1"]).unwrap();
        // ξ = ∂₀ stays radical; τ(ξ) = 1 still holds.
        let bundle = DegenerateMetricBundle::new(
            g,
            1,
            0,
            vec![TensorField::coordinate_vector(3, 0).unwrap()],
            vec![tau.clone()],
            DomainBox::cube(3, -1.0, 1.0).unwrap(),
        )
        .unwrap();
        let cfg = VerificationConfig::default();
        let gbar = bundle.build_augmented_metric(&cfg).unwrap();
        for p in sample_points(bundle.domain(), 50, 7) {
            let gv = gbar.evaluate(&p).unwrap();
            let xv = bundle.radical_frame()[0].evaluate(&p).unwrap();
            let tv = tau.evaluate(&p).unwrap();
            for j in 0..3 {
                let mut pairing = 0.0;
                for k in 0..3 {
                    pairing += gv.get(&[k, j]) * xv.get(&[k]);
                }
                assert!((pairing - tv.get(&[j])).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn degenerate_augmented_metric_rejected() {
        // τ = dx1 pairs to zero with ξ = ∂₀, so ḡ stays singular; the duality
        // failure shows up as a degeneracy error at construction.
        let bundle = DegenerateMetricBundle::new(
            diag_metric(3, &[0.0, 1.0, 1.0]),
            1,
            0,
            vec![TensorField::coordinate_vector(3, 0).unwrap()],
            vec![TensorField::coordinate_form(3, 1).unwrap()],
            DomainBox::cube(3, -1.0, 1.0).unwrap(),
        )
        .unwrap();
        let err = bundle
            .build_augmented_metric(&VerificationConfig::default())
            .unwrap_err();
        assert!(matches!(err, BundleError::AugmentedDegenerate { .. }));
    }

    #[test]
    fn augmented_agrees_with_g_on_coframe_kernel() {
        // τ = dx0 annihilates span{e1, e2}, the Euclidean complement of the
        // radical direction, so ḡ restricted there coincides with g.
        let g = TensorField::parse_components(
            METRIC,
            3,
            &["0", "0", "0", "0", "1+x1^2", "0", "0", "0", "1"],
        )
        .unwrap();
        let bundle = DegenerateMetricBundle::new(
            g,
            1,
            0,
            vec![TensorField::coordinate_vector(3, 0).unwrap()],
            vec![TensorField::coordinate_form(3, 0).unwrap()],
            DomainBox::cube(3, -1.0, 1.0).unwrap(),
        )
        .unwrap();
        let cfg = VerificationConfig::default();
        let gbar = bundle.build_augmented_metric(&cfg).unwrap();
        for p in sample_points(bundle.domain(), 25, 19) {
            let gv = bundle.metric().evaluate(&p).unwrap();
            let gbv = gbar.evaluate(&p).unwrap();
            for i in 1..3 {
                for j in 1..3 {
                    assert_abs_diff_eq!(gbv.get(&[i, j]), gv.get(&[i, j]));
                }
            }
        }
    }

    #[test]
    fn constant_frame_generator_is_dual() {
        let g0 = TensorValue::from_fn(METRIC, 4, |idx| {
            if idx[0] == idx[1] && idx[0] >= 2 {
                1.0
            } else {
                0.0
            }
        });
        let (frame, coframe) = frame_for_constant_metric(&g0, 2).unwrap();
        let p = pt(&[0.0; 4]);
        for (i, tau) in coframe.iter().enumerate() {
            let tv = tau.evaluate(&p).unwrap();
            for (j, xi) in frame.iter().enumerate() {
                let xv = xi.evaluate(&p).unwrap();
                let mut pairing = 0.0;
                for k in 0..4 {
                    pairing += tv.get(&[k]) * xv.get(&[k]);
                }
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(pairing, expected, epsilon = 1e-12);
            }
        }
    }
}
