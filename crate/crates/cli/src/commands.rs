//! Command drivers shared by the binary and the test suites.
//!
//! Exit code taxonomy: `0` all checks passed, `1` a checked condition
//! failed (a report was still emitted), `2` input or usage error, `3`
//! internal consistency fault (the construction round-trip disagreed with
//! its own definition, which indicates a convention bug, never bad input).

use std::path::Path;

use lightlike_core::bundle::BundleError;
use lightlike_core::connection::{koszul_connection, ConnectionError, ConnectionField};
use lightlike_core::tensor::ChartPoint;
use lightlike_core::verify::{
    run_prop1, run_construction_pipeline, Prop1Direction, VerificationConfig, VerifyError,
};

use crate::manifest::{load_manifest, LoadedManifest, ManifestError};
use crate::report::{BuildDocument, CoefficientPointDoc, RunContext, RunDocument, TOOL_NAME};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Text,
    Machine,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub tol_analytic: Option<f64>,
    pub tol_fd: Option<f64>,
    pub format: OutputFormat,
}

/// What a command prints and how the process should exit.
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub stdout: String,
    pub exit_code: i32,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("{0}")]
    Input(String),
    #[error("a checked condition failed: {0}")]
    ConditionFailed(String),
    #[error("internal consistency fault: {0}")]
    Internal(String),
    #[error(transparent)]
    Verify(VerifyError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Manifest(_) | CliError::Input(_) => 2,
            CliError::ConditionFailed(_) => 1,
            CliError::Internal(_) => 3,
            CliError::Verify(e) => match e {
                VerifyError::Connection(ConnectionError::RoundTripFailure { .. }) => 3,
                _ => 2,
            },
        }
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        CliError::Verify(e)
    }
}

fn apply_overrides(
    config: &VerificationConfig,
    opts: &RunOptions,
) -> Result<VerificationConfig, CliError> {
    let mut cfg = config.clone();
    if let Some(samples) = opts.samples {
        cfg.sample_count = samples;
    }
    if let Some(seed) = opts.seed {
        cfg.rng_seed = seed;
    }
    if let Some(tol) = opts.tol_analytic {
        cfg.tolerances.analytic = tol;
    }
    if let Some(tol) = opts.tol_fd {
        cfg.tolerances.finite_difference = tol;
    }
    cfg.validate()
        .map_err(|e| CliError::Input(format!("invalid verification settings: {e}")))?;
    Ok(cfg)
}

fn load(path: &Path, opts: &RunOptions) -> Result<(LoadedManifest, VerificationConfig), CliError> {
    let loaded = load_manifest(path)?;
    let cfg = apply_overrides(&loaded.config, opts)?;
    Ok((loaded, cfg))
}

fn render(doc: RunDocument, format: OutputFormat) -> CommandOutput {
    let exit_code = doc.exit_code;
    let stdout = match format {
        OutputFormat::Text => doc.to_text(),
        OutputFormat::Machine => doc.to_json(),
    };
    CommandOutput { stdout, exit_code }
}

/// `validate`: bundle invariants only.
pub fn cmd_validate(path: &Path, opts: &RunOptions) -> Result<CommandOutput, CliError> {
    let (loaded, cfg) = load(path, opts)?;
    let conditions = loaded.bundle.validate(&cfg).map_err(VerifyError::from)?;
    let pass = conditions.iter().all(|c| c.pass);
    let doc = RunDocument::new(
        RunContext {
            command: "validate",
            direction: None,
            manifest: &path.display().to_string(),
            digest: &loaded.digest,
            config: &cfg,
        },
        &conditions,
        None,
        None,
        pass,
    );
    Ok(render(doc, opts.format))
}

/// `verify`: the full constructive pipeline with the manifest's `T` and `Q`.
pub fn cmd_verify(path: &Path, opts: &RunOptions) -> Result<CommandOutput, CliError> {
    let (loaded, cfg) = load(path, opts)?;
    let run = run_construction_pipeline(
        &loaded.bundle,
        loaded.torsion.as_ref(),
        loaded.nonmetricity.as_ref(),
        &cfg,
    )?;
    let doc = RunDocument::from_pipeline(
        RunContext {
            command: "verify",
            direction: None,
            manifest: &path.display().to_string(),
            digest: &loaded.digest,
            config: &cfg,
        },
        &run.report,
    );
    Ok(render(doc, opts.format))
}

/// `prop1`: the nullity-degree-1 pipeline. The reverse direction feeds the
/// Levi-Civita connection of the manifest's `ḡ` back in as an opaque user
/// connection, exercising the round trip.
pub fn cmd_prop1(
    path: &Path,
    direction: Prop1Direction,
    opts: &RunOptions,
) -> Result<CommandOutput, CliError> {
    let (loaded, cfg) = load(path, opts)?;
    let user_connection = match direction {
        Prop1Direction::Forward => None,
        Prop1Direction::Reverse => {
            let gbar = loaded
                .bundle
                .build_augmented_metric(&cfg)
                .map_err(|e| match e {
                    BundleError::AugmentedDegenerate { .. } => {
                        CliError::ConditionFailed(e.to_string())
                    }
                    other => CliError::Input(other.to_string()),
                })?;
            Some(ConnectionField::levi_civita(gbar).as_user_field())
        }
    };
    let run = run_prop1(&loaded.bundle, direction, user_connection.as_ref(), &cfg).map_err(
        |e| match e {
            VerifyError::NullityNotOne { .. } => CliError::Input(e.to_string()),
            other => CliError::from(other),
        },
    )?;
    let direction_name = match direction {
        Prop1Direction::Forward => "forward",
        Prop1Direction::Reverse => "reverse",
    };
    let doc = RunDocument::from_pipeline(
        RunContext {
            command: "prop1",
            direction: Some(direction_name),
            manifest: &path.display().to_string(),
            digest: &loaded.digest,
            config: &cfg,
        },
        &run.report,
    );
    Ok(render(doc, opts.format))
}

/// Points at which `build` dumps coefficients: one user point, or a uniform
/// grid with `per_axis` points per axis (default 5).
fn build_points(
    loaded: &LoadedManifest,
    point: Option<&[f64]>,
    per_axis: Option<usize>,
) -> Result<Vec<ChartPoint>, CliError> {
    let n = loaded.bundle.dim();
    if let Some(coords) = point {
        if coords.len() != n {
            return Err(CliError::Input(format!(
                "--point needs {n} coordinates, got {}",
                coords.len()
            )));
        }
        let p = ChartPoint::new(coords.to_vec())
            .map_err(|e| CliError::Input(format!("--point: {e}")))?;
        return Ok(vec![p]);
    }
    let k = per_axis.unwrap_or(5);
    if k == 0 {
        return Err(CliError::Input("--grid must be at least 1".into()));
    }
    let intervals = loaded.bundle.domain().intervals().to_vec();
    let mut points = Vec::new();
    let mut index = vec![0usize; n];
    loop {
        let coords: Vec<f64> = (0..n)
            .map(|axis| {
                let (lo, hi) = intervals[axis];
                if k == 1 {
                    0.5 * (lo + hi)
                } else {
                    lo + (hi - lo) * index[axis] as f64 / (k - 1) as f64
                }
            })
            .collect();
        points.push(ChartPoint::new(coords).expect("grid points are finite"));
        let mut axis = n;
        loop {
            if axis == 0 {
                return Ok(points);
            }
            axis -= 1;
            index[axis] += 1;
            if index[axis] < k {
                break;
            }
            index[axis] = 0;
        }
    }
}

/// `build`: validate, construct the connection with the manifest's `T` and
/// `Q`, and dump its coefficients.
pub fn cmd_build(
    path: &Path,
    point: Option<&[f64]>,
    grid: Option<usize>,
    opts: &RunOptions,
) -> Result<CommandOutput, CliError> {
    let (loaded, cfg) = load(path, opts)?;

    let conditions = loaded.bundle.validate(&cfg).map_err(VerifyError::from)?;
    if !conditions.iter().all(|c| c.pass) {
        // Emit the validation report instead of coefficients.
        let doc = RunDocument::new(
            RunContext {
                command: "build",
                direction: None,
                manifest: &path.display().to_string(),
                digest: &loaded.digest,
                config: &cfg,
            },
            &conditions,
            conditions
                .iter()
                .find(|c| !c.pass)
                .map(|c| c.condition.as_str()),
            None,
            false,
        );
        return Ok(render(doc, opts.format));
    }

    let gbar = loaded
        .bundle
        .build_augmented_metric(&cfg)
        .map_err(|e| match e {
            BundleError::AugmentedDegenerate { .. } => CliError::ConditionFailed(e.to_string()),
            other => CliError::Input(other.to_string()),
        })?;
    let (connection, _) = koszul_connection(
        &gbar,
        loaded.torsion.as_ref(),
        loaded.nonmetricity.as_ref(),
        loaded.bundle.domain(),
        &cfg,
    )
    .map_err(|e| match e {
        ConnectionError::RoundTripFailure { .. } => CliError::Internal(e.to_string()),
        other => CliError::Input(other.to_string()),
    })?;

    let n = loaded.bundle.dim();
    let mut blocks = Vec::new();
    for p in build_points(&loaded, point, grid)? {
        let gamma = connection
            .evaluate(&p)
            .map_err(|e| CliError::Input(format!("evaluation at {:?}: {e}", p.coords())))?;
        let mut coefficients = vec![vec![vec![0.0; n]; n]; n];
        for (k, plane) in coefficients.iter_mut().enumerate() {
            for (i, row) in plane.iter_mut().enumerate() {
                for (j, slot) in row.iter_mut().enumerate() {
                    *slot = gamma.get(&[k, i, j]);
                }
            }
        }
        blocks.push(CoefficientPointDoc {
            point: p.coords().to_vec(),
            coefficients,
        });
    }

    let doc = BuildDocument {
        tool: TOOL_NAME,
        version: env!("CARGO_PKG_VERSION"),
        command: "build".to_string(),
        manifest: path.display().to_string(),
        manifest_digest: loaded.digest.clone(),
        seed: cfg.rng_seed,
        samples: cfg.sample_count,
        provenance: connection.provenance().as_str().to_string(),
        points: blocks,
        exit_code: 0,
    };
    let stdout = match opts.format {
        OutputFormat::Text => doc.to_text(),
        OutputFormat::Machine => doc.to_json(),
    };
    Ok(CommandOutput {
        stdout,
        exit_code: 0,
    })
}
