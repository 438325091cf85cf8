//! Manifest files: the serialized input data of a chart — dimension, the
//! degenerate metric, radical frame, coframe, optional torsion and
//! non-metricity components, parameters, and verification overrides.
//!
//! The concrete syntax is TOML (see `docs/manifest-format.md` and
//! `docs/manifest.schema.json`). Metric components are given as a full
//! `n × n` grid of expression strings and must be written symmetrically;
//! torsion and non-metricity are sparse lists of `(index, expr)` entries
//! whose antisymmetric/symmetric partners must be written out too. Declared
//! symmetries are checked numerically on a fixed probe cloud at load time.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use lightlike_core::bundle::{BundleError, DegenerateMetricBundle};
use lightlike_core::expr::parse_expression_with;
use lightlike_core::tensor::{
    DomainBox, TensorField, MAX_DIMENSION, METRIC, NONMETRICITY, ONE_FORM, TORSION, VECTOR,
};
use lightlike_core::verify::{sample_points, ToleranceTiers, VerificationConfig};

/// Probe cloud used for load-time symmetry checks.
const PROBE_COUNT: usize = 10;
const PROBE_SEED: u64 = 0x50524f4245; // "PROBE"
const LOAD_SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("cannot read `{path}`: {message}")]
    Io { path: String, message: String },
    #[error("manifest does not parse: {0}")]
    Toml(String),
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("{what} violates its declared symmetry: {detail}")]
    Symmetry { what: String, detail: String },
    #[error(transparent)]
    Bundle(#[from] BundleError),
}

fn field_err(field: impl Into<String>, message: impl ToString) -> ManifestError {
    ManifestError::Field {
        field: field.into(),
        message: message.to_string(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    dimension: usize,
    nullity: usize,
    #[serde(default)]
    index: usize,
    domain: Vec<[f64; 2]>,
    metric: MetricSection,
    radical_frame: Vec<ComponentsSection>,
    coframe: Vec<ComponentsSection>,
    #[serde(default)]
    torsion: Vec<SparseEntry>,
    #[serde(default)]
    nonmetricity: Vec<SparseEntry>,
    #[serde(default)]
    parameters: BTreeMap<String, f64>,
    #[serde(default)]
    verification: VerificationSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricSection {
    components: Vec<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentsSection {
    components: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SparseEntry {
    index: [usize; 3],
    expr: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerificationSection {
    samples: Option<usize>,
    seed: Option<u64>,
    tol_analytic: Option<f64>,
    tol_fd: Option<f64>,
}

/// A fully validated manifest, ready to run.
#[derive(Debug)]
pub struct LoadedManifest {
    pub bundle: DegenerateMetricBundle,
    pub torsion: Option<TensorField>,
    pub nonmetricity: Option<TensorField>,
    pub config: VerificationConfig,
    /// Hex SHA-256 of the manifest file bytes.
    pub digest: String,
}

pub fn load_manifest(path: &Path) -> Result<LoadedManifest, ManifestError> {
    let bytes = std::fs::read(path).map_err(|e| ManifestError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let digest = hex::encode(Sha256::digest(&bytes));
    let text = String::from_utf8(bytes).map_err(|e| ManifestError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let raw: RawManifest = toml::from_str(&text).map_err(|e| ManifestError::Toml(e.to_string()))?;
    build(raw, digest)
}

fn build(raw: RawManifest, digest: String) -> Result<LoadedManifest, ManifestError> {
    let n = raw.dimension;
    if n == 0 || n > MAX_DIMENSION {
        return Err(field_err(
            "dimension",
            format!("must be between 1 and {MAX_DIMENSION}"),
        ));
    }
    if raw.nullity == 0 || raw.nullity > n {
        return Err(field_err("nullity", format!("must be between 1 and {n}")));
    }
    if raw.domain.len() != n {
        return Err(field_err(
            "domain",
            format!("needs {n} intervals, got {}", raw.domain.len()),
        ));
    }
    let domain = DomainBox::new(raw.domain.iter().map(|[lo, hi]| (*lo, *hi)).collect())
        .map_err(|e| field_err("domain", e))?;

    let params = &raw.parameters;
    let parse = |source: &str, field: &str| {
        parse_expression_with(source, n, params).map_err(|e| field_err(field, e))
    };

    // Metric grid.
    if raw.metric.components.len() != n {
        return Err(field_err(
            "metric.components",
            format!("needs {n} rows, got {}", raw.metric.components.len()),
        ));
    }
    let mut metric_exprs = Vec::with_capacity(n * n);
    for (i, row) in raw.metric.components.iter().enumerate() {
        if row.len() != n {
            return Err(field_err(
                format!("metric.components[{i}]"),
                format!("needs {n} entries, got {}", row.len()),
            ));
        }
        for (j, source) in row.iter().enumerate() {
            metric_exprs.push(parse(source, &format!("metric.components[{i}][{j}]"))?);
        }
    }
    let metric = TensorField::from_expressions(METRIC, n, metric_exprs)
        .map_err(|e| field_err("metric", e))?;

    // Frame and coframe.
    let mut frame = Vec::with_capacity(raw.radical_frame.len());
    for (k, section) in raw.radical_frame.iter().enumerate() {
        if section.components.len() != n {
            return Err(field_err(
                format!("radical_frame[{k}]"),
                format!("needs {n} components, got {}", section.components.len()),
            ));
        }
        let exprs = section
            .components
            .iter()
            .enumerate()
            .map(|(c, s)| parse(s, &format!("radical_frame[{k}].components[{c}]")))
            .collect::<Result<Vec<_>, _>>()?;
        frame.push(
            TensorField::from_expressions(VECTOR, n, exprs)
                .map_err(|e| field_err(format!("radical_frame[{k}]"), e))?,
        );
    }
    let mut coframe = Vec::with_capacity(raw.coframe.len());
    for (k, section) in raw.coframe.iter().enumerate() {
        if section.components.len() != n {
            return Err(field_err(
                format!("coframe[{k}]"),
                format!("needs {n} components, got {}", section.components.len()),
            ));
        }
        let exprs = section
            .components
            .iter()
            .enumerate()
            .map(|(c, s)| parse(s, &format!("coframe[{k}].components[{c}]")))
            .collect::<Result<Vec<_>, _>>()?;
        coframe.push(
            TensorField::from_expressions(ONE_FORM, n, exprs)
                .map_err(|e| field_err(format!("coframe[{k}]"), e))?,
        );
    }

    // Sparse rank-3 grids; unspecified components stay zero.
    let torsion = sparse_fields(&raw.torsion, n, params, "torsion")?;
    let nonmetricity = sparse_fields(&raw.nonmetricity, n, params, "nonmetricity")?;
    let torsion = match torsion {
        Some(exprs) => Some(
            TensorField::from_expressions(TORSION, n, exprs)
                .map_err(|e| field_err("torsion", e))?,
        ),
        None => None,
    };
    let nonmetricity = match nonmetricity {
        Some(exprs) => Some(
            TensorField::from_expressions(NONMETRICITY, n, exprs)
                .map_err(|e| field_err("nonmetricity", e))?,
        ),
        None => None,
    };

    // Numeric symmetry probes.
    let probes = sample_points(&domain, PROBE_COUNT, PROBE_SEED);
    for p in &probes {
        let g = metric.evaluate(p).map_err(|e| field_err("metric", e))?;
        for i in 0..n {
            for j in (i + 1)..n {
                let delta = (g.get(&[i, j]) - g.get(&[j, i])).abs();
                if delta > LOAD_SYMMETRY_TOL {
                    return Err(ManifestError::Symmetry {
                        what: "metric".into(),
                        detail: format!(
                            "components [{i}][{j}] and [{j}][{i}] differ by {delta:e} at {:?}",
                            p.coords()
                        ),
                    });
                }
            }
        }
        if let Some(t) = &torsion {
            let tv = t.evaluate(p).map_err(|e| field_err("torsion", e))?;
            let defect = tv.max_antisymmetry_defect(1, 2);
            if defect > LOAD_SYMMETRY_TOL {
                return Err(ManifestError::Symmetry {
                    what: "torsion".into(),
                    detail: format!(
                        "antisymmetric partner missing or wrong (defect {defect:e} at {:?}); \
                         both orientations of each lower index pair must be written",
                        p.coords()
                    ),
                });
            }
        }
        if let Some(q) = &nonmetricity {
            let qv = q.evaluate(p).map_err(|e| field_err("nonmetricity", e))?;
            let defect = qv.max_asymmetry(1, 2);
            if defect > LOAD_SYMMETRY_TOL {
                return Err(ManifestError::Symmetry {
                    what: "nonmetricity".into(),
                    detail: format!(
                        "symmetric partner missing or wrong (defect {defect:e} at {:?}); \
                         both orders of the last two indices must be written",
                        p.coords()
                    ),
                });
            }
        }
    }

    let bundle =
        DegenerateMetricBundle::new(metric, raw.nullity, raw.index, frame, coframe, domain)?;

    let defaults = VerificationConfig::default();
    let tiers = ToleranceTiers {
        exact: defaults.tolerances.exact,
        analytic: raw
            .verification
            .tol_analytic
            .unwrap_or(defaults.tolerances.analytic),
        finite_difference: raw
            .verification
            .tol_fd
            .unwrap_or(defaults.tolerances.finite_difference),
    };
    let config = VerificationConfig {
        sample_count: raw.verification.samples.unwrap_or(defaults.sample_count),
        rng_seed: raw.verification.seed.unwrap_or(defaults.rng_seed),
        tolerances: tiers,
        domain: None,
    };
    config
        .validate()
        .map_err(|e| field_err("verification", e))?;

    Ok(LoadedManifest {
        bundle,
        torsion,
        nonmetricity,
        config,
        digest,
    })
}

fn sparse_fields(
    entries: &[SparseEntry],
    n: usize,
    params: &BTreeMap<String, f64>,
    what: &str,
) -> Result<Option<Vec<lightlike_core::ScalarExpression>>, ManifestError> {
    if entries.is_empty() {
        return Ok(None);
    }
    let zero = lightlike_core::ScalarExpression::constant(0.0, n);
    let mut grid = vec![zero; n * n * n];
    let mut seen = std::collections::BTreeSet::new();
    for (row, entry) in entries.iter().enumerate() {
        let [a, b, c] = entry.index;
        if a >= n || b >= n || c >= n {
            return Err(field_err(
                format!("{what}[{row}].index"),
                format!("indices must be below the dimension {n}"),
            ));
        }
        if !seen.insert(entry.index) {
            return Err(field_err(
                format!("{what}[{row}].index"),
                "duplicate component",
            ));
        }
        grid[a * n * n + b * n + c] = parse_expression_with(&entry.expr, n, params)
            .map_err(|e| field_err(format!("{what}[{row}].expr"), e))?;
    }
    Ok(Some(grid))
}
