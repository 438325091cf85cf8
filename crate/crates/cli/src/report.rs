//! Report documents emitted by the CLI.
//!
//! The machine-readable format is JSON with a fixed field order (see
//! `docs/report-format.md` and `docs/report.schema.json`). Re-running the
//! same command on the same inputs with the same seed reproduces the
//! document byte for byte: reports carry no timestamps or host data, and
//! every collection is emitted in a deterministic order.

use serde::Serialize;

use lightlike_core::verify::{ContrapositiveDiagnostic, PipelineReport};
use lightlike_core::{ConditionReport, VerificationConfig};

pub const TOOL_NAME: &str = "lightlike";

#[derive(Debug, Clone, Serialize)]
pub struct ToleranceDoc {
    pub exact: f64,
    pub analytic: f64,
    pub finite_difference: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionDoc {
    pub condition: String,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub worst_point: Vec<f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub samples: usize,
    pub note: Option<String>,
}

impl From<&ConditionReport> for ConditionDoc {
    fn from(r: &ConditionReport) -> Self {
        ConditionDoc {
            condition: r.condition.as_str().to_string(),
            max_residual: r.max_residual,
            mean_residual: r.mean_residual,
            worst_point: r.worst_point.clone(),
            tolerance: r.tolerance,
            pass: r.pass,
            samples: r.samples,
            note: r.note.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ContrapositiveDoc {
    pub compatibility_residual: f64,
    pub parallel_residual: f64,
    pub conditioning_factor: f64,
}

impl From<&ContrapositiveDiagnostic> for ContrapositiveDoc {
    fn from(d: &ContrapositiveDiagnostic) -> Self {
        ContrapositiveDoc {
            compatibility_residual: d.compatibility_residual,
            parallel_residual: d.parallel_residual,
            conditioning_factor: d.conditioning_factor,
        }
    }
}

/// Invocation metadata shared by every run document.
#[derive(Debug, Clone, Copy)]
pub struct RunContext<'a> {
    pub command: &'a str,
    pub direction: Option<&'a str>,
    pub manifest: &'a str,
    pub digest: &'a str,
    pub config: &'a VerificationConfig,
}

/// Document for `validate`, `verify`, and `prop1` runs.
#[derive(Debug, Clone, Serialize)]
pub struct RunDocument {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub direction: Option<String>,
    pub manifest: String,
    pub manifest_digest: String,
    pub seed: u64,
    pub samples: usize,
    pub tolerances: ToleranceDoc,
    pub conditions: Vec<ConditionDoc>,
    pub aborted_at: Option<String>,
    pub contrapositive: Option<ContrapositiveDoc>,
    pub pass: bool,
    pub exit_code: i32,
}

impl RunDocument {
    pub fn new(
        ctx: RunContext<'_>,
        conditions: &[ConditionReport],
        aborted_at: Option<&'static str>,
        contrapositive: Option<&ContrapositiveDiagnostic>,
        pass: bool,
    ) -> Self {
        let cfg = ctx.config;
        RunDocument {
            tool: TOOL_NAME,
            version: env!("CARGO_PKG_VERSION"),
            command: ctx.command.to_string(),
            direction: ctx.direction.map(str::to_string),
            manifest: ctx.manifest.to_string(),
            manifest_digest: ctx.digest.to_string(),
            seed: cfg.rng_seed,
            samples: cfg.sample_count,
            tolerances: ToleranceDoc {
                exact: cfg.tolerances.exact,
                analytic: cfg.tolerances.analytic,
                finite_difference: cfg.tolerances.finite_difference,
            },
            conditions: conditions.iter().map(ConditionDoc::from).collect(),
            aborted_at: aborted_at.map(str::to_string),
            contrapositive: contrapositive.map(ContrapositiveDoc::from),
            pass,
            exit_code: if pass { 0 } else { 1 },
        }
    }

    pub fn from_pipeline(ctx: RunContext<'_>, report: &PipelineReport) -> Self {
        RunDocument::new(
            ctx,
            &report.steps,
            report.aborted_at.map(|c| c.as_str()),
            report.contrapositive.as_ref(),
            report.pass,
        )
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("manifest:  {}\n", self.manifest));
        out.push_str(&format!("digest:    sha256:{}\n", self.manifest_digest));
        out.push_str(&format!(
            "seed:      {}    samples: {}\n",
            self.seed, self.samples
        ));
        if let Some(direction) = &self.direction {
            out.push_str(&format!("direction: {direction}\n"));
        }
        out.push('\n');
        out.push_str(&format!(
            "{:<32} {:>13} {:>11}  {}\n",
            "condition", "max residual", "tolerance", "status"
        ));
        for c in &self.conditions {
            out.push_str(&format!(
                "{:<32} {:>13.3e} {:>11.1e}  {}\n",
                c.condition,
                c.max_residual,
                c.tolerance,
                if c.pass { "pass" } else { "FAIL" }
            ));
        }
        if let Some(at) = &self.aborted_at {
            out.push_str(&format!("\npipeline aborted at failing hypothesis: {at}\n"));
        }
        if let Some(d) = &self.contrapositive {
            out.push_str(&format!(
                "contrapositive: compatibility residual {:.3e}, coframe-parallel residual {:.3e}, conditioning factor {:.3e}\n",
                d.compatibility_residual, d.parallel_residual, d.conditioning_factor
            ));
        }
        out.push_str(&format!(
            "\nresult: {} (exit {})\n",
            if self.pass { "PASS" } else { "FAIL" },
            self.exit_code
        ));
        out
    }
}

/// One dumped coefficient block: `coefficients[k][i][j] = Γᵏᵢⱼ`.
#[derive(Debug, Clone, Serialize)]
pub struct CoefficientPointDoc {
    pub point: Vec<f64>,
    pub coefficients: Vec<Vec<Vec<f64>>>,
}

/// Document for `build` runs.
#[derive(Debug, Clone, Serialize)]
pub struct BuildDocument {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub manifest: String,
    pub manifest_digest: String,
    pub seed: u64,
    pub samples: usize,
    pub provenance: String,
    pub points: Vec<CoefficientPointDoc>,
    pub exit_code: i32,
}

impl BuildDocument {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("manifest:  {}\n", self.manifest));
        out.push_str(&format!("digest:    sha256:{}\n", self.manifest_digest));
        out.push_str(&format!("provenance: {}\n", self.provenance));
        for block in &self.points {
            out.push_str(&format!("\npoint {:?}\n", block.point));
            let n = block.coefficients.len();
            let mut any = false;
            for (k, plane) in block.coefficients.iter().enumerate() {
                for (i, row) in plane.iter().enumerate() {
                    for (j, value) in row.iter().enumerate() {
                        if value.abs() > 1e-14 {
                            out.push_str(&format!("  Gamma[{k}][{i}][{j}] = {value:.12e}\n"));
                            any = true;
                        }
                    }
                }
            }
            if !any {
                out.push_str(&format!(
                    "  all {n}x{n}x{n} coefficients vanish (|value| <= 1e-14)\n"
                ));
            }
        }
        out.push_str(&format!("\nresult: exit {}\n", self.exit_code));
        out
    }
}
