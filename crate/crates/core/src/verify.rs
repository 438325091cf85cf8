//! Named compatibility conditions and the certification pipelines.
//!
//! Every checkable identity of the construction is a named condition with a
//! sampled residual: identities are evaluated on coordinate basis fields at
//! every point of a seeded sample cloud, residuals aggregate as the max-norm
//! over components and samples, and a condition passes iff its max residual
//! stays at or below its tolerance. Reports are deterministic: the same
//! configuration and seed reproduce them bit for bit.
//!
//! Tolerances come in three tiers — `exact` for structural identities,
//! `analytic` for residuals of expression-backed fields, and
//! `finite_difference` for anything that went through a difference stencil.
//!
//! Distribution-level statements (most prominently the Killing check) are
//! verified on the supplied radical frame only. The right-hand side of the
//! compatibility condition involving `T` and `Q` is function-linear in the
//! frame, so the frame check is pointwise sufficient there; `L_{fξ} g ≠
//! f·L_ξ g` in general, so the Killing diagnostic is strictly frame-level.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand_core::{RngCore, SeedableRng};

use crate::bundle::{BundleError, DegenerateMetricBundle, DEGENERACY_TOLERANCE};
use crate::connection::{
    covariant_derivative, koszul_connection, koszul_pointwise_solve, levi_civita, torsion_of,
    ConnectionError, ConnectionField,
};
use crate::float;
use crate::tensor::{
    exterior_derivative_1form, lie_derivative_metric, ChartPoint, DomainBox, TensorError,
    TensorField, TensorValue, NONMETRICITY, TORSION,
};

/// Agreement tolerance for the two construction routes (uniqueness checks).
pub const UNIQUENESS_TOLERANCE: f64 = 1e-9;

/// Tolerance tiers; must satisfy `exact < analytic < finite_difference`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceTiers {
    pub exact: f64,
    pub analytic: f64,
    pub finite_difference: f64,
}

impl Default for ToleranceTiers {
    fn default() -> Self {
        ToleranceTiers {
            exact: 1e-12,
            analytic: 1e-8,
            finite_difference: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("tolerances must be positive and ordered exact < analytic < finite-difference")]
    BadTolerances,
}

/// Sampling and tolerance configuration shared by all checks.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationConfig {
    pub sample_count: usize,
    pub rng_seed: u64,
    pub tolerances: ToleranceTiers,
    /// Overrides the bundle's own domain box when set.
    pub domain: Option<DomainBox>,
}

impl Default for VerificationConfig {
    fn default() -> Self {
        VerificationConfig {
            sample_count: 200,
            rng_seed: 0,
            tolerances: ToleranceTiers::default(),
            domain: None,
        }
    }
}

impl VerificationConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.sample_count == 0 {
            return Err(ConfigError::NoSamples);
        }
        let t = &self.tolerances;
        let ordered = t.exact > 0.0
            && t.analytic > t.exact
            && t.finite_difference > t.analytic
            && t.finite_difference.is_finite();
        if !ordered {
            return Err(ConfigError::BadTolerances);
        }
        Ok(())
    }

    /// Residual tolerance tier for a check whose inputs are exact
    /// (expression-backed) or not.
    pub fn residual_tolerance(&self, exact_inputs: bool) -> f64 {
        if exact_inputs {
            self.tolerances.analytic
        } else {
            self.tolerances.finite_difference
        }
    }

    fn sample_cloud(&self, bundle: &DegenerateMetricBundle) -> Vec<ChartPoint> {
        let domain = self.domain.as_ref().unwrap_or(bundle.domain());
        sample_points(domain, self.sample_count, self.rng_seed)
    }
}

/// Uniform sample cloud in the box; deterministic for a given seed, count,
/// and box.
pub fn sample_points(domain: &DomainBox, count: usize, seed: u64) -> Vec<ChartPoint> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = domain.dimension();
    let scale = 1.0 / (1u64 << 53) as f64;
    (0..count)
        .map(|_| {
            let unit: Vec<f64> = (0..n)
                .map(|_| (rng.next_u64() >> 11) as f64 * scale)
                .collect();
            domain.lerp(&unit)
        })
        .collect()
}

/// Identifier of a checkable condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionId {
    MetricSymmetry,
    NullityDegree,
    RadicalMembership,
    FrameIndependence,
    CoframeDuality,
    IndexSignature,
    TorsionAntisymmetry,
    NonmetricitySymmetry,
    /// `dτᵢ(X,Y) = τᵢ(T(X,Y))` — the coframe/torsion compatibility condition.
    CoframeTorsionCompatibility,
    /// The balance of `L_{ξᵢ} g` against the `T`- and `Q`-terms on the radical.
    RadicalCompatibility,
    RadicalKilling,
    CoframeClosed,
    AugmentedNondegenerate,
    TorsionRoundTrip,
    NonmetricityRoundTrip,
    CoframeParallel,
    Nonmetricity,
    RadicalParallel,
    AugmentedKilling,
    ConstructionUniqueness,
    ConnectionTorsionFree,
    LeviCivitaAgreement,
}

impl ConditionId {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConditionId::MetricSymmetry => "metric_symmetry",
            ConditionId::NullityDegree => "nullity_degree",
            ConditionId::RadicalMembership => "radical_membership",
            ConditionId::FrameIndependence => "frame_independence",
            ConditionId::CoframeDuality => "coframe_duality",
            ConditionId::IndexSignature => "index_signature",
            ConditionId::TorsionAntisymmetry => "torsion_antisymmetry",
            ConditionId::NonmetricitySymmetry => "nonmetricity_symmetry",
            ConditionId::CoframeTorsionCompatibility => "coframe_torsion_compatibility",
            ConditionId::RadicalCompatibility => "radical_compatibility",
            ConditionId::RadicalKilling => "radical_killing",
            ConditionId::CoframeClosed => "coframe_closed",
            ConditionId::AugmentedNondegenerate => "augmented_nondegenerate",
            ConditionId::TorsionRoundTrip => "torsion_roundtrip",
            ConditionId::NonmetricityRoundTrip => "nonmetricity_roundtrip",
            ConditionId::CoframeParallel => "coframe_parallel",
            ConditionId::Nonmetricity => "nonmetricity",
            ConditionId::RadicalParallel => "radical_parallel",
            ConditionId::AugmentedKilling => "augmented_killing",
            ConditionId::ConstructionUniqueness => "construction_uniqueness",
            ConditionId::ConnectionTorsionFree => "connection_torsion_free",
            ConditionId::LeviCivitaAgreement => "levi_civita_agreement",
        }
    }
}

/// Residual statistics of one condition over the sample cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub condition: ConditionId,
    pub max_residual: f64,
    pub mean_residual: f64,
    /// Sample at which the max residual occurred (first such, in cloud order).
    pub worst_point: Vec<f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub samples: usize,
    pub note: Option<String>,
}

/// Streaming max/mean/argmax over the sample cloud, with a fixed reduction
/// order so reports are reproducible bit for bit.
#[derive(Debug, Clone, Default)]
pub struct ResidualAccumulator {
    max: f64,
    sum: f64,
    count: usize,
    worst: Option<Vec<f64>>,
}

impl ResidualAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, p: &ChartPoint, residual: f64) {
        if self.worst.is_none() || residual > self.max {
            self.max = residual;
            self.worst = Some(p.coords().to_vec());
        }
        self.sum += residual;
        self.count += 1;
    }

    pub fn max_residual(&self) -> f64 {
        self.max
    }

    pub fn finish(
        self,
        condition: ConditionId,
        tolerance: f64,
        note: Option<String>,
    ) -> ConditionReport {
        let mean = if self.count > 0 {
            self.sum / self.count as f64
        } else {
            0.0
        };
        ConditionReport {
            condition,
            max_residual: self.max,
            mean_residual: mean,
            worst_point: self.worst.unwrap_or_default(),
            tolerance,
            pass: self.max <= tolerance,
            samples: self.count,
            note,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Connection(#[from] ConnectionError),
    #[error("this pipeline requires nullity degree 1, bundle declares {nullity}")]
    NullityNotOne { nullity: usize },
    #[error("the reverse pipeline needs a user-supplied connection")]
    MissingUserConnection,
}

fn zeros_or(
    field: Option<&TensorField>,
    template: &[crate::tensor::Variance],
    dim: usize,
    p: &ChartPoint,
) -> Result<TensorValue, TensorError> {
    match field {
        Some(f) => f.evaluate(p),
        None => Ok(TensorValue::zeros(template, dim)),
    }
}

fn optional_exact(field: Option<&TensorField>) -> bool {
    field.is_none_or(TensorField::is_exact)
}

/// `dτᵢ(eⱼ,eₖ) = τᵢ(T(eⱼ,eₖ))` over all coframe members and basis pairs.
pub fn check_coframe_torsion_compatibility(
    bundle: &DegenerateMetricBundle,
    torsion: Option<&TensorField>,
    cfg: &VerificationConfig,
) -> Result<ConditionReport, VerifyError> {
    let n = bundle.dim();
    let samples = cfg.sample_cloud(bundle);
    let mut acc = ResidualAccumulator::new();
    for p in &samples {
        let tv = zeros_or(torsion, TORSION, n, p)?;
        let mut worst = 0.0f64;
        for tau in bundle.coframe() {
            let dtau = exterior_derivative_1form(tau, p)?;
            let tauv = tau.evaluate(p)?;
            for j in 0..n {
                for k in 0..n {
                    let mut pairing = 0.0;
                    for a in 0..n {
                        pairing += tauv.get(&[a]) * tv.get(&[a, j, k]);
                    }
                    worst = worst.max(float::abs(dtau.get(&[j, k]) - pairing));
                }
            }
        }
        acc.record(p, worst);
    }
    let tolerance = cfg.residual_tolerance(bundle.is_exact() && optional_exact(torsion));
    Ok(acc.finish(ConditionId::CoframeTorsionCompatibility, tolerance, None))
}

/// The radical compatibility balance, for each frame member `ξ` and basis
/// pair `(X,Y)`:
///
/// ```text
/// (L_ξ g)(X,Y) = g(X,T(ξ,Y)) + g(Y,T(ξ,X)) + Q(ξ,X,Y) − Q(X,Y,ξ) − Q(Y,X,ξ)
/// ```
pub fn check_radical_compatibility(
    bundle: &DegenerateMetricBundle,
    torsion: Option<&TensorField>,
    nonmetricity: Option<&TensorField>,
    cfg: &VerificationConfig,
) -> Result<ConditionReport, VerifyError> {
    let n = bundle.dim();
    let samples = cfg.sample_cloud(bundle);
    let mut acc = ResidualAccumulator::new();
    for p in &samples {
        let g = bundle.metric().evaluate(p)?;
        let tv = zeros_or(torsion, TORSION, n, p)?;
        let qv = zeros_or(nonmetricity, NONMETRICITY, n, p)?;
        let mut worst = 0.0f64;
        for xi in bundle.radical_frame() {
            let lie = lie_derivative_metric(xi, bundle.metric(), p)?;
            let xiv = xi.evaluate(p)?;
            // (T(ξ, e_k))^a = T^a_{bk} ξ^b
            let t_xi = TensorValue::from_fn(
                &[
                    crate::tensor::Variance::Upper,
                    crate::tensor::Variance::Lower,
                ],
                n,
                |idx| {
                    let (a, k) = (idx[0], idx[1]);
                    let mut sum = 0.0;
                    for b in 0..n {
                        sum += tv.get(&[a, b, k]) * xiv.get(&[b]);
                    }
                    sum
                },
            );
            for j in 0..n {
                for k in 0..n {
                    let mut rhs = 0.0;
                    for a in 0..n {
                        rhs += g.get(&[j, a]) * t_xi.get(&[a, k]);
                        rhs += g.get(&[k, a]) * t_xi.get(&[a, j]);
                        rhs += xiv.get(&[a])
                            * (qv.get(&[a, j, k]) - qv.get(&[j, k, a]) - qv.get(&[k, j, a]));
                    }
                    worst = worst.max(float::abs(lie.get(&[j, k]) - rhs));
                }
            }
        }
        acc.record(p, worst);
    }
    let exact = bundle.is_exact() && optional_exact(torsion) && optional_exact(nonmetricity);
    Ok(acc.finish(
        ConditionId::RadicalCompatibility,
        cfg.residual_tolerance(exact),
        None,
    ))
}

/// Componentwise `|L_{ξᵢ} g|` over the frame (Killing diagnostic).
pub fn check_killing(
    bundle: &DegenerateMetricBundle,
    cfg: &VerificationConfig,
) -> Result<ConditionReport, VerifyError> {
    let samples = cfg.sample_cloud(bundle);
    let mut acc = ResidualAccumulator::new();
    for p in &samples {
        let mut worst = 0.0f64;
        for xi in bundle.radical_frame() {
            let lie = lie_derivative_metric(xi, bundle.metric(), p)?;
            worst = worst.max(lie.max_abs());
        }
        acc.record(p, worst);
    }
    Ok(acc.finish(
        ConditionId::RadicalKilling,
        cfg.residual_tolerance(bundle.is_exact()),
        None,
    ))
}

/// Componentwise `|dτᵢ|` over the coframe.
pub fn check_closed_coframe(
    bundle: &DegenerateMetricBundle,
    cfg: &VerificationConfig,
) -> Result<ConditionReport, VerifyError> {
    let samples = cfg.sample_cloud(bundle);
    let mut acc = ResidualAccumulator::new();
    for p in &samples {
        let mut worst = 0.0f64;
        for tau in bundle.coframe() {
            let dtau = exterior_derivative_1form(tau, p)?;
            worst = worst.max(dtau.max_abs());
        }
        acc.record(p, worst);
    }
    Ok(acc.finish(
        ConditionId::CoframeClosed,
        cfg.residual_tolerance(bundle.is_exact()),
        None,
    ))
}

/// Componentwise `|∇τᵢ|` over the coframe.
pub fn check_parallel_coframe(
    connection: &ConnectionField,
    bundle: &DegenerateMetricBundle,
    cfg: &VerificationConfig,
) -> Result<ConditionReport, VerifyError> {
    let samples = cfg.sample_cloud(bundle);
    let mut acc = ResidualAccumulator::new();
    for p in &samples {
        let mut worst = 0.0f64;
        for tau in bundle.coframe() {
            let grad = covariant_derivative(connection, tau, p)?;
            worst = worst.max(grad.max_abs());
        }
        acc.record(p, worst);
    }
    let exact = bundle.is_exact() && connection.is_exact();
    Ok(acc.finish(
        ConditionId::CoframeParallel,
        cfg.residual_tolerance(exact),
        None,
    ))
}

/// Componentwise `|∇g − Q|` against the degenerate metric of the bundle.
/// With `Q = 0` this is the metric-compatibility check.
pub fn check_nonmetricity_condition(
    connection: &ConnectionField,
    bundle: &DegenerateMetricBundle,
    nonmetricity: Option<&TensorField>,
    cfg: &VerificationConfig,
) -> Result<ConditionReport, VerifyError> {
    let n = bundle.dim();
    let samples = cfg.sample_cloud(bundle);
    let mut acc = ResidualAccumulator::new();
    for p in &samples {
        let grad = covariant_derivative(connection, bundle.metric(), p)?;
        let qv = zeros_or(nonmetricity, NONMETRICITY, n, p)?;
        acc.record(p, grad.max_abs_diff(&qv)?);
    }
    let exact = bundle.is_exact() && connection.is_exact() && optional_exact(nonmetricity);
    Ok(acc.finish(
        ConditionId::Nonmetricity,
        cfg.residual_tolerance(exact),
        None,
    ))
}

/// Componentwise `|∇ξᵢ|` over the radical frame.
pub fn check_radical_parallel(
    connection: &ConnectionField,
    bundle: &DegenerateMetricBundle,
    cfg: &VerificationConfig,
) -> Result<ConditionReport, VerifyError> {
    let samples = cfg.sample_cloud(bundle);
    let mut acc = ResidualAccumulator::new();
    for p in &samples {
        let mut worst = 0.0f64;
        for xi in bundle.radical_frame() {
            let grad = covariant_derivative(connection, xi, p)?;
            worst = worst.max(grad.max_abs());
        }
        acc.record(p, worst);
    }
    let exact = bundle.is_exact() && connection.is_exact();
    Ok(acc.finish(
        ConditionId::RadicalParallel,
        cfg.residual_tolerance(exact),
        None,
    ))
}

/// Componentwise `|L_{ξᵢ} ḡ|` over the frame.
pub fn check_augmented_killing(
    bundle: &DegenerateMetricBundle,
    gbar_field: &TensorField,
    cfg: &VerificationConfig,
) -> Result<ConditionReport, VerifyError> {
    let samples = cfg.sample_cloud(bundle);
    let mut acc = ResidualAccumulator::new();
    for p in &samples {
        let mut worst = 0.0f64;
        for xi in bundle.radical_frame() {
            let lie = lie_derivative_metric(xi, gbar_field, p)?;
            worst = worst.max(lie.max_abs());
        }
        acc.record(p, worst);
    }
    let exact = bundle.is_exact() && gbar_field.is_exact();
    Ok(acc.finish(
        ConditionId::AugmentedKilling,
        cfg.residual_tolerance(exact),
        None,
    ))
}

/// Diagnostic attached to a failed radical-compatibility check on a
/// torsion-free, metric-compatible run: how large the coframe-parallel
/// residual of the Levi-Civita construction comes out, and the conditioning
/// factor relating the two. Reported, never asserted as a bound.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrapositiveDiagnostic {
    pub compatibility_residual: f64,
    pub parallel_residual: f64,
    /// `compatibility_residual / parallel_residual`.
    pub conditioning_factor: f64,
}

/// Computes the contrapositive diagnostic for a `T = Q = 0` bundle.
pub fn contrapositive_diagnostic(
    bundle: &DegenerateMetricBundle,
    cfg: &VerificationConfig,
) -> Result<ContrapositiveDiagnostic, VerifyError> {
    let compatibility = check_radical_compatibility(bundle, None, None, cfg)?;
    let gbar = bundle.build_augmented_metric(cfg)?;
    let lc = ConnectionField::levi_civita(gbar);
    let parallel = check_parallel_coframe(&lc, bundle, cfg)?;
    let kappa = if parallel.max_residual > 0.0 {
        compatibility.max_residual / parallel.max_residual
    } else {
        f64::INFINITY
    };
    Ok(ContrapositiveDiagnostic {
        compatibility_residual: compatibility.max_residual,
        parallel_residual: parallel.max_residual,
        conditioning_factor: kappa,
    })
}

/// Outcome of a pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub steps: Vec<ConditionReport>,
    /// Set when a hypothesis failed and the pipeline stopped before
    /// construction; names the first failing condition.
    pub aborted_at: Option<ConditionId>,
    pub pass: bool,
    pub contrapositive: Option<ContrapositiveDiagnostic>,
}

impl PipelineReport {
    fn aborted(steps: Vec<ConditionReport>, at: ConditionId) -> Self {
        PipelineReport {
            steps,
            aborted_at: Some(at),
            pass: false,
            contrapositive: None,
        }
    }
}

/// A pipeline run together with the connection it constructed (absent when
/// the pipeline aborted before construction).
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: PipelineReport,
    pub connection: Option<ConnectionField>,
}

fn first_failure(steps: &[ConditionReport]) -> Option<ConditionId> {
    steps.iter().find(|r| !r.pass).map(|r| r.condition)
}

fn torsion_input_report(
    torsion: &TensorField,
    bundle: &DegenerateMetricBundle,
    cfg: &VerificationConfig,
) -> Result<ConditionReport, VerifyError> {
    let samples = cfg.sample_cloud(bundle);
    let mut acc = ResidualAccumulator::new();
    for p in &samples {
        let value = torsion.evaluate(p)?;
        acc.record(p, value.max_antisymmetry_defect(1, 2));
    }
    Ok(acc.finish(ConditionId::TorsionAntisymmetry, cfg.tolerances.exact, None))
}

fn nonmetricity_input_report(
    q: &TensorField,
    bundle: &DegenerateMetricBundle,
    cfg: &VerificationConfig,
) -> Result<ConditionReport, VerifyError> {
    let samples = cfg.sample_cloud(bundle);
    let mut acc = ResidualAccumulator::new();
    for p in &samples {
        let value = q.evaluate(p)?;
        acc.record(p, value.max_asymmetry(1, 2));
    }
    Ok(acc.finish(
        ConditionId::NonmetricitySymmetry,
        cfg.tolerances.exact,
        None,
    ))
}

fn augmented_gate_report(
    bundle: &DegenerateMetricBundle,
    gbar_field: &TensorField,
    cfg: &VerificationConfig,
) -> Result<ConditionReport, VerifyError> {
    let metric = crate::bundle::AugmentedMetric::from_field(gbar_field.clone())?;
    let samples = cfg.sample_cloud(bundle);
    let scan = metric.degeneracy_scan(&samples)?;
    let degenerate = scan.min_abs_eigenvalue <= DEGENERACY_TOLERANCE;
    let mut acc = ResidualAccumulator::new();
    acc.record(&scan.worst_point, if degenerate { 1.0 } else { 0.0 });
    Ok(acc.finish(
        ConditionId::AugmentedNondegenerate,
        cfg.tolerances.exact,
        Some(format!(
            "min |eigenvalue| of the augmented metric: {:e}",
            scan.min_abs_eigenvalue
        )),
    ))
}

/// Agreement of the closed-form coefficients with the pointwise linear solve
/// (the uniqueness cross-check).
fn uniqueness_report(
    connection: &ConnectionField,
    gbar: &crate::bundle::AugmentedMetric,
    torsion: Option<&TensorField>,
    nonmetricity: Option<&TensorField>,
    bundle: &DegenerateMetricBundle,
    cfg: &VerificationConfig,
) -> Result<ConditionReport, VerifyError> {
    let samples = cfg.sample_cloud(bundle);
    let mut acc = ResidualAccumulator::new();
    for p in &samples {
        let closed = connection.evaluate(p)?;
        let solved = koszul_pointwise_solve(gbar, torsion, nonmetricity, p)?;
        acc.record(p, closed.max_abs_diff(&solved)?);
    }
    Ok(acc.finish(
        ConditionId::ConstructionUniqueness,
        UNIQUENESS_TOLERANCE,
        None,
    ))
}

/// Full constructive pipeline: validate the bundle, check both compatibility
/// conditions, build `ḡ`, construct the connection with the prescribed `T`
/// and `Q`, and certify the conclusions (`∇τᵢ = 0`, `∇g = Q`) plus the
/// uniqueness cross-check.
///
/// The pipeline aborts at the first failing hypothesis, mirroring the
/// logical order of the construction; conclusion failures are recorded
/// without aborting. When the radical compatibility check fails on a
/// `T = Q = 0` run, the report carries the contrapositive diagnostic.
pub fn run_construction_pipeline(
    bundle: &DegenerateMetricBundle,
    torsion: Option<&TensorField>,
    nonmetricity: Option<&TensorField>,
    cfg: &VerificationConfig,
) -> Result<PipelineRun, VerifyError> {
    cfg.validate()?;
    let mut steps = bundle.validate(cfg)?;
    if let Some(at) = first_failure(&steps) {
        return Ok(PipelineRun {
            report: PipelineReport::aborted(steps, at),
            connection: None,
        });
    }

    if let Some(t) = torsion {
        steps.push(torsion_input_report(t, bundle, cfg)?);
    }
    if let Some(q) = nonmetricity {
        steps.push(nonmetricity_input_report(q, bundle, cfg)?);
    }
    if let Some(at) = first_failure(&steps) {
        return Ok(PipelineRun {
            report: PipelineReport::aborted(steps, at),
            connection: None,
        });
    }

    steps.push(check_coframe_torsion_compatibility(bundle, torsion, cfg)?);
    if let Some(at) = first_failure(&steps) {
        return Ok(PipelineRun {
            report: PipelineReport::aborted(steps, at),
            connection: None,
        });
    }

    steps.push(check_radical_compatibility(
        bundle,
        torsion,
        nonmetricity,
        cfg,
    )?);
    if let Some(at) = first_failure(&steps) {
        let contrapositive = if torsion.is_none() && nonmetricity.is_none() {
            contrapositive_diagnostic(bundle, cfg).ok()
        } else {
            None
        };
        let mut report = PipelineReport::aborted(steps, at);
        report.contrapositive = contrapositive;
        return Ok(PipelineRun {
            report,
            connection: None,
        });
    }

    let gbar_field = bundle.augmented_field()?;
    steps.push(augmented_gate_report(bundle, &gbar_field, cfg)?);
    if let Some(at) = first_failure(&steps) {
        return Ok(PipelineRun {
            report: PipelineReport::aborted(steps, at),
            connection: None,
        });
    }
    let gbar = crate::bundle::AugmentedMetric::from_field(gbar_field)?;

    let (connection, roundtrip) =
        koszul_connection(&gbar, torsion, nonmetricity, bundle.domain(), cfg)?;
    steps.extend(roundtrip);

    steps.push(check_parallel_coframe(&connection, bundle, cfg)?);
    steps.push(check_nonmetricity_condition(
        &connection,
        bundle,
        nonmetricity,
        cfg,
    )?);
    steps.push(uniqueness_report(
        &connection,
        &gbar,
        torsion,
        nonmetricity,
        bundle,
        cfg,
    )?);

    let pass = steps.iter().all(|r| r.pass);
    Ok(PipelineRun {
        report: PipelineReport {
            steps,
            aborted_at: None,
            pass,
            contrapositive: None,
        },
        connection: Some(connection),
    })
}

/// Direction of the nullity-degree-1 pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prop1Direction {
    /// Check `dτ = 0` and `L_ξ g = 0`, build the Levi-Civita connection of
    /// `ḡ`, and certify `∇g = 0`, `∇τ = 0`, `∇ξ = 0`, `L_ξ ḡ = 0`.
    Forward,
    /// Given a torsion-free connection with `∇g = 0` and `∇τ = 0`, certify
    /// `dτ = 0`, `L_ξ g = 0`, and agreement with the Levi-Civita connection
    /// of `ḡ`.
    Reverse,
}

/// The nullity-degree-1 round-trip pipeline. `user_connection` is required
/// for the reverse direction and ignored forward.
pub fn run_prop1(
    bundle: &DegenerateMetricBundle,
    direction: Prop1Direction,
    user_connection: Option<&ConnectionField>,
    cfg: &VerificationConfig,
) -> Result<PipelineRun, VerifyError> {
    cfg.validate()?;
    if bundle.nullity() != 1 {
        return Err(VerifyError::NullityNotOne {
            nullity: bundle.nullity(),
        });
    }

    match direction {
        Prop1Direction::Forward => run_prop1_forward(bundle, cfg),
        Prop1Direction::Reverse => {
            let connection = user_connection.ok_or(VerifyError::MissingUserConnection)?;
            run_prop1_reverse(bundle, connection, cfg)
        }
    }
}

fn run_prop1_forward(
    bundle: &DegenerateMetricBundle,
    cfg: &VerificationConfig,
) -> Result<PipelineRun, VerifyError> {
    let mut steps = bundle.validate(cfg)?;
    if let Some(at) = first_failure(&steps) {
        return Ok(PipelineRun {
            report: PipelineReport::aborted(steps, at),
            connection: None,
        });
    }

    steps.push(check_closed_coframe(bundle, cfg)?);
    steps.push(check_killing(bundle, cfg)?);
    if let Some(at) = first_failure(&steps) {
        return Ok(PipelineRun {
            report: PipelineReport::aborted(steps, at),
            connection: None,
        });
    }

    let gbar_field = bundle.augmented_field()?;
    steps.push(augmented_gate_report(bundle, &gbar_field, cfg)?);
    if let Some(at) = first_failure(&steps) {
        return Ok(PipelineRun {
            report: PipelineReport::aborted(steps, at),
            connection: None,
        });
    }
    let gbar = crate::bundle::AugmentedMetric::from_field(gbar_field.clone())?;
    let connection = ConnectionField::levi_civita(gbar.clone());

    steps.push(check_parallel_coframe(&connection, bundle, cfg)?);
    steps.push(check_nonmetricity_condition(
        &connection,
        bundle,
        None,
        cfg,
    )?);
    steps.push(check_radical_parallel(&connection, bundle, cfg)?);
    steps.push(check_augmented_killing(bundle, &gbar_field, cfg)?);
    steps.push(uniqueness_report(
        &connection,
        &gbar,
        None,
        None,
        bundle,
        cfg,
    )?);

    let pass = steps.iter().all(|r| r.pass);
    Ok(PipelineRun {
        report: PipelineReport {
            steps,
            aborted_at: None,
            pass,
            contrapositive: None,
        },
        connection: Some(connection),
    })
}

fn run_prop1_reverse(
    bundle: &DegenerateMetricBundle,
    connection: &ConnectionField,
    cfg: &VerificationConfig,
) -> Result<PipelineRun, VerifyError> {
    let mut steps = bundle.validate(cfg)?;
    if let Some(at) = first_failure(&steps) {
        return Ok(PipelineRun {
            report: PipelineReport::aborted(steps, at),
            connection: None,
        });
    }

    // Hypotheses on the supplied connection. Torsion-freeness is held to the
    // exact tier: the uniqueness argument has no slack for torsion.
    let samples = cfg.sample_cloud(bundle);
    let mut torsion_acc = ResidualAccumulator::new();
    for p in &samples {
        let t = torsion_of(connection, p)?;
        torsion_acc.record(p, t.max_abs());
    }
    steps.push(torsion_acc.finish(
        ConditionId::ConnectionTorsionFree,
        cfg.tolerances.exact,
        None,
    ));
    steps.push(check_nonmetricity_condition(connection, bundle, None, cfg)?);
    steps.push(check_parallel_coframe(connection, bundle, cfg)?);
    if let Some(at) = first_failure(&steps) {
        return Ok(PipelineRun {
            report: PipelineReport::aborted(steps, at),
            connection: None,
        });
    }

    // Conclusions.
    steps.push(check_closed_coframe(bundle, cfg)?);
    steps.push(check_killing(bundle, cfg)?);

    let gbar_field = bundle.augmented_field()?;
    steps.push(augmented_gate_report(bundle, &gbar_field, cfg)?);
    let gate_passed = steps.last().map(|r| r.pass).unwrap_or(false);
    if gate_passed {
        let gbar = crate::bundle::AugmentedMetric::from_field(gbar_field)?;
        let mut agreement = ResidualAccumulator::new();
        for p in &samples {
            let user = connection.evaluate(p)?;
            let lc = levi_civita(&gbar, p)?;
            agreement.record(p, user.max_abs_diff(&lc)?);
        }
        steps.push(agreement.finish(ConditionId::LeviCivitaAgreement, UNIQUENESS_TOLERANCE, None));
    }

    let pass = steps.iter().all(|r| r.pass);
    Ok(PipelineRun {
        report: PipelineReport {
            steps,
            aborted_at: None,
            pass,
            contrapositive: None,
        },
        connection: Some(connection.clone()),
    })
}
