//! Config-driven experiment runner and deterministic result sinks.
//!
//! Outputs are byte-identical for identical `(config, seed)` across runs
//! and worker counts: floats are emitted in shortest round-trip form, row
//! order is fixed, files are written to a temporary sibling and renamed,
//! and nothing time-dependent lands in the output (wall time goes to
//! stderr only).

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::channel::{
    complex_covariance, fim_theta, fim_theta_oracle, fim_theta_real, lambda_min_bound, whiten,
};
use crate::config::{
    self, eval_options, CheckKind, ConfigFile, ExperimentPlan, OutputFormat, Resolved,
};
use crate::design::compare_designs;
use crate::error::{Error, Result};
use crate::estimator::mse_monte_carlo;
use crate::inequalities::{
    check_cramer_rao, check_de_bruijn, check_isoperimetric, check_score_gap_identity,
    check_worst_additive_noise, g_function_reports, InequalityReport, Verdict,
};
use crate::info::{fim_analytic, fim_monte_carlo};
use crate::linalg;
use nalgebra::DMatrix;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FIMLAB_OUT_DIR";

/// Built-in reproduction presets; each name maps to a bundled config file.
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub config: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "lemma1-suite",
        summary: "FIM dominance and score-gap identity across all families, shapings, and dims 1-3",
        config: include_str!("../presets/lemma1-suite.json"),
    },
    Preset {
        name: "lemma1-laplace-colored",
        summary: "FIM dominance for colored Laplace noise (lower-triangular shaping)",
        config: include_str!("../presets/lemma1-laplace-colored.json"),
    },
    Preset {
        name: "isoperimetric-scalar",
        summary: "Entropy-power x Fisher-information product for scalar Laplace and Gaussian",
        config: include_str!("../presets/isoperimetric-scalar.json"),
    },
    Preset {
        name: "lemma2-sweep",
        summary: "Worst-additive-noise margins over a sigma_z grid (Laplace, Student-t, Gaussian)",
        config: include_str!("../presets/lemma2-sweep.json"),
    },
    Preset {
        name: "de-bruijn-scalar",
        summary: "Small-noise mutual-information rate against half the Fisher information",
        config: include_str!("../presets/de-bruijn-scalar.json"),
    },
    Preset {
        name: "g-function-laplace",
        summary: "Entropy-difference function: nonnegative and nondecreasing near zero",
        config: include_str!("../presets/g-function-laplace.json"),
    },
    Preset {
        name: "crlb-calibration",
        summary: "Channel FIM: complex form vs real-composite oracle, white circular noise",
        config: include_str!("../presets/crlb-calibration.json"),
    },
    Preset {
        name: "crlb-ordering-laplace",
        summary: "Channel FIM ordering: Laplace composite noise vs matched Gaussian",
        config: include_str!("../presets/crlb-ordering-laplace.json"),
    },
    Preset {
        name: "whitening-invariance",
        summary: "CRLB invariance under whitening of colored Gaussian noise",
        config: include_str!("../presets/whitening-invariance.json"),
    },
    Preset {
        name: "design-white-vs-correlated",
        summary: "Min-max sequence ranking with no noise knowledge: white candidates win",
        config: include_str!("../presets/design-white-vs-correlated.json"),
    },
    Preset {
        name: "design-colored-covariance",
        summary: "Covariance-aware ranking where the white sequence is not optimal",
        config: include_str!("../presets/design-colored-covariance.json"),
    },
    Preset {
        name: "mse-gaussian-30db",
        summary: "NLS estimator MSE against the CRLB at 30 dB SNR",
        config: include_str!("../presets/mse-gaussian-30db.json"),
    },
];

/// Catalog of built-in presets.
pub fn list_experiments() -> &'static [Preset] {
    PRESETS
}

pub fn preset(name: &str) -> Result<&'static Preset> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::Config(format!("unknown preset \"{name}\"")))
}

/// Where the config comes from.
pub enum ConfigSource {
    Path(PathBuf),
    Preset(String),
    Inline(String),
}

/// CLI-level overrides; all optional.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub tolerance_scale: Option<f64>,
    pub workers: Option<usize>,
}

pub struct RunOutcome {
    pub exit_code: i32,
    pub out_path: PathBuf,
    pub resolved_path: PathBuf,
    pub violated: usize,
    pub rows_written: usize,
}

// ---------------------------------------------------------------------------
// Row schemas. CSV headers come from the field order here and are stable.
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct FimRow {
    model: String,
    method: String,
    row: usize,
    col: usize,
    value: f64,
    stderr: f64,
}

#[derive(Serialize)]
struct IneqRow {
    model: String,
    check: String,
    margin: f64,
    tolerance: f64,
    verdict: String,
    lhs: String,
    rhs: String,
    diagnostics: String,
}

#[derive(Serialize)]
struct CrlbRow {
    section: String,
    method: String,
    name: String,
    value: f64,
    stderr: f64,
}

#[derive(Serialize)]
struct DesignRow {
    rank: i64,
    candidate: String,
    objective: f64,
    whiteness: f64,
    crlb_diag: String,
    note: String,
}

#[derive(Serialize)]
struct MseRow {
    parameter: String,
    mse: f64,
    stderr: f64,
    crlb: f64,
    ratio: f64,
}

enum Rows {
    Fim(Vec<FimRow>),
    Ineq(Vec<IneqRow>),
    Crlb(Vec<CrlbRow>),
    Design(Vec<DesignRow>),
    Mse(Vec<MseRow>),
}

impl Rows {
    fn len(&self) -> usize {
        match self {
            Rows::Fim(r) => r.len(),
            Rows::Ineq(r) => r.len(),
            Rows::Crlb(r) => r.len(),
            Rows::Design(r) => r.len(),
            Rows::Mse(r) => r.len(),
        }
    }
}

fn param_name(index: usize, m: usize) -> String {
    if index == 0 {
        "omega0".to_string()
    } else if index <= m {
        format!("h_re_{}", index - 1)
    } else {
        format!("h_im_{}", index - 1 - m)
    }
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

fn run_fim(models: &[(String, crate::noise::NoiseModel)], resolved: &Resolved) -> Result<Rows> {
    let mut rows = Vec::new();
    for (label, model) in models {
        let mc = fim_monte_carlo(model, resolved.seed, resolved.count)?;
        for i in 0..model.dim() {
            for j in 0..model.dim() {
                rows.push(FimRow {
                    model: label.clone(),
                    method: "monte_carlo".into(),
                    row: i,
                    col: j,
                    value: mc.matrix[(i, j)],
                    stderr: mc.stderr[(i, j)],
                });
            }
        }
        if let Some(exact) = fim_analytic(model) {
            for i in 0..model.dim() {
                for j in 0..model.dim() {
                    rows.push(FimRow {
                        model: label.clone(),
                        method: "analytic".into(),
                        row: i,
                        col: j,
                        value: exact.matrix[(i, j)],
                        stderr: 0.0,
                    });
                }
            }
        }
    }
    Ok(Rows::Fim(rows))
}

fn ineq_row(label: &str, report: &InequalityReport) -> IneqRow {
    let diagnostics = report
        .diagnostics
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join("; ");
    IneqRow {
        model: label.to_string(),
        check: report.name.clone(),
        margin: report.margin,
        tolerance: report.tolerance,
        verdict: report.verdict.as_str().to_string(),
        lhs: report.lhs.render(),
        rhs: report.rhs.render(),
        diagnostics,
    }
}

fn run_inequalities(
    models: &[(String, crate::noise::NoiseModel)],
    checks: &[CheckKind],
    sigma_z_grid: &[f64],
    de_bruijn_t: f64,
    g_t_grid: &[f64],
    resolved: &Resolved,
) -> Result<Rows> {
    let mut rows = Vec::new();
    for (label, model) in models {
        let n = model.dim();
        for check in checks {
            let reports: Vec<InequalityReport> = match check {
                CheckKind::CramerRao => {
                    vec![check_cramer_rao(model, resolved.seed, resolved.count)?]
                }
                CheckKind::ScoreGap => {
                    vec![check_score_gap_identity(model, resolved.seed, resolved.count)?]
                }
                CheckKind::WorstAdditiveNoise => sigma_z_grid
                    .iter()
                    .map(|&t| {
                        let sigma_z = DMatrix::identity(n, n) * t;
                        check_worst_additive_noise(model, &sigma_z, resolved.seed, resolved.count)
                            .map(|mut r| {
                                r.name = format!("worst_additive_noise[t={t}]");
                                r
                            })
                    })
                    .collect::<Result<Vec<_>>>()?,
                CheckKind::Isoperimetric => {
                    vec![check_isoperimetric(model, resolved.seed, resolved.count)?]
                }
                CheckKind::DeBruijn => {
                    vec![check_de_bruijn(model, de_bruijn_t, resolved.seed, resolved.count)?]
                }
                CheckKind::GFunction => {
                    g_function_reports(model, g_t_grid, resolved.seed, resolved.count)?
                }
            };
            for report in reports {
                let scaled = report.with_tolerance_scale(resolved.tolerance_scale);
                rows.push(ineq_row(label, &scaled));
            }
        }
    }
    Ok(Rows::Ineq(rows))
}

fn run_crlb(spec: &crate::channel::ChannelSpec, resolved: &Resolved) -> Result<Rows> {
    let mut rows = Vec::new();
    let m = spec.m();
    let theta_len = 2 * m + 1;
    let (sigma_c, circ_defect) = complex_covariance(&spec.noise)?;
    let j_c = sigma_c
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix("complex noise covariance".into()))?;

    // Complex-form FIM with the Gaussian surrogate J = Σ_c⁻¹.
    let complex_form = fim_theta(spec, &j_c)?;
    push_crlb_rows(&mut rows, "complex_form", &complex_form, theta_len, m);

    // Real-composite reference: exact for Gaussian noise, Monte Carlo
    // score oracle otherwise.
    let reference = if spec.noise.is_gaussian() {
        fim_theta_real(spec, spec.noise.precision())?
    } else {
        fim_theta_oracle(spec, resolved.seed, resolved.count)?
    };
    let ref_label = if spec.noise.is_gaussian() { "real_exact" } else { "oracle" };
    push_crlb_rows(&mut rows, ref_label, &reference, theta_len, m);

    // Minimum-eigenvalue bound and the ordering diagnostics.
    let bound = lambda_min_bound(&j_c)?;
    let bounded = bound.bounded_report(spec);
    push_crlb_rows(&mut rows, "lambda_min_bound", &bounded, theta_len, m);
    rows.push(CrlbRow {
        section: "diagnostic".into(),
        method: "lambda_min_bound".into(),
        name: "lambda_min".into(),
        value: bound.lambda_min,
        stderr: 0.0,
    });
    rows.push(CrlbRow {
        section: "diagnostic".into(),
        method: "ordering".into(),
        name: "eigmin_complex_minus_bound".into(),
        value: linalg::sym_eigmin(&(&complex_form.fim - &bounded.fim)),
        stderr: 0.0,
    });
    rows.push(CrlbRow {
        section: "diagnostic".into(),
        method: "ordering".into(),
        name: "eigmin_reference_minus_complex".into(),
        value: linalg::sym_eigmin(&(&reference.fim - &complex_form.fim)),
        stderr: reference.aggregate_stderr(),
    });
    rows.push(CrlbRow {
        section: "diagnostic".into(),
        method: "noise".into(),
        name: "circularity_defect".into(),
        value: circ_defect,
        stderr: 0.0,
    });

    // Whitening invariance for Gaussian noise.
    if spec.noise.is_gaussian() {
        let whitened = whiten(spec)?;
        let after = fim_theta_real(&whitened, whitened.noise.precision())?;
        push_crlb_rows(&mut rows, "whitened", &after, theta_len, m);
        if let (Some(before), Some(afterc)) = (&reference.crlb, &after.crlb) {
            let worst_rel = (0..theta_len)
                .map(|i| ((before[i] - afterc[i]) / before[i]).abs())
                .fold(0.0f64, f64::max);
            rows.push(CrlbRow {
                section: "diagnostic".into(),
                method: "whitening".into(),
                name: "max_rel_crlb_change".into(),
                value: worst_rel,
                stderr: 0.0,
            });
        }
    }
    Ok(Rows::Crlb(rows))
}

fn push_crlb_rows(rows: &mut Vec<CrlbRow>, method: &str, report: &crate::channel::CrlbReport, theta_len: usize, m: usize) {
    for i in 0..theta_len {
        rows.push(CrlbRow {
            section: "fim_diag".into(),
            method: method.into(),
            name: param_name(i, m),
            value: report.fim[(i, i)],
            stderr: report.fim_stderr.as_ref().map_or(0.0, |s| s[(i, i)]),
        });
    }
    match &report.crlb {
        Some(crlb) => {
            for i in 0..theta_len {
                rows.push(CrlbRow {
                    section: "crlb".into(),
                    method: method.into(),
                    name: param_name(i, m),
                    value: crlb[i],
                    stderr: 0.0,
                });
            }
            rows.push(CrlbRow {
                section: "diagnostic".into(),
                method: method.into(),
                name: "condition_number".into(),
                value: report.condition_number,
                stderr: 0.0,
            });
        }
        None => {
            rows.push(CrlbRow {
                section: "diagnostic".into(),
                method: method.into(),
                name: "singular_nullspace_dim".into(),
                value: report.nullspace.as_ref().map_or(0.0, |ns| ns.ncols() as f64),
                stderr: 0.0,
            });
        }
    }
}

fn run_design(
    candidates: &[crate::design::Candidate],
    criterion: &crate::design::DesignCriterion,
    grid: &crate::design::ParamsGrid,
    noise: &crate::noise::NoiseModel,
    opts: &crate::design::EvalOptions,
) -> Result<Rows> {
    let report = compare_designs(candidates, criterion, grid, noise, opts)?;
    let mut rows = Vec::new();
    for (rank, cand) in report.ranked.iter().enumerate() {
        let diag = cand
            .crlb_diag
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join("; ");
        rows.push(DesignRow {
            rank: rank as i64 + 1,
            candidate: cand.id.clone(),
            objective: cand.objective,
            whiteness: cand.whiteness,
            crlb_diag: diag,
            note: if rank == 0 { "winner".into() } else { String::new() },
        });
    }
    for (id, reason) in &report.disqualified {
        rows.push(DesignRow {
            rank: -1,
            candidate: id.clone(),
            objective: f64::NAN,
            whiteness: f64::NAN,
            crlb_diag: String::new(),
            note: format!("disqualified: {reason}"),
        });
    }
    Ok(Rows::Design(rows))
}

fn run_mse(
    spec: &crate::channel::ChannelSpec,
    nls: &crate::estimator::NlsConfig,
    trials: usize,
    resolved: &Resolved,
) -> Result<Rows> {
    let report = mse_monte_carlo(spec, nls, trials, resolved.seed)?;
    let m = spec.m();
    let mut rows = Vec::new();
    for i in 0..report.per_parameter_mse.len() {
        rows.push(MseRow {
            parameter: param_name(i, m),
            mse: report.per_parameter_mse[i],
            stderr: report.stderr[i],
            crlb: report.crlb[i],
            ratio: report.per_parameter_mse[i] / report.crlb[i],
        });
    }
    Ok(Rows::Mse(rows))
}

// ---------------------------------------------------------------------------
// Sinks
// ---------------------------------------------------------------------------

fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

fn csv_rows<T: Serialize>(rows: &[T], meta: &[(String, String)]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for (k, v) in meta {
        writeln!(out, "# {k}={v}")?;
    }
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row).map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::Config(format!("csv: {e}")))
}

fn json_rows<T: Serialize>(rows: &[T], meta: &[(String, String)]) -> Result<Vec<u8>> {
    let meta_obj: serde_json::Map<String, serde_json::Value> = meta
        .iter()
        .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
        .collect();
    let doc = serde_json::json!({ "meta": meta_obj, "rows": rows });
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn render(rows: &Rows, format: OutputFormat, meta: &[(String, String)]) -> Result<Vec<u8>> {
    match (rows, format) {
        (Rows::Fim(r), OutputFormat::Csv) => csv_rows(r, meta),
        (Rows::Fim(r), OutputFormat::Json) => json_rows(r, meta),
        (Rows::Ineq(r), OutputFormat::Csv) => csv_rows(r, meta),
        (Rows::Ineq(r), OutputFormat::Json) => json_rows(r, meta),
        (Rows::Crlb(r), OutputFormat::Csv) => csv_rows(r, meta),
        (Rows::Crlb(r), OutputFormat::Json) => json_rows(r, meta),
        (Rows::Design(r), OutputFormat::Csv) => csv_rows(r, meta),
        (Rows::Design(r), OutputFormat::Json) => json_rows(r, meta),
        (Rows::Mse(r), OutputFormat::Csv) => csv_rows(r, meta),
        (Rows::Mse(r), OutputFormat::Json) => json_rows(r, meta),
    }
}

/// Write-then-rename so failures never leave partial output files.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn default_out_path(kind: &str, hash: &str, format: OutputFormat) -> PathBuf {
    let dir = std::env::var(OUT_DIR_ENV).unwrap_or_else(|_| ".".into());
    PathBuf::from(dir).join(format!("{kind}-{hash}.{}", format.as_str()))
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

/// Execute a config. Exit code 0 on success, 2 when any inequality verdict
/// is `violated`; hard errors surface as `Err` (the CLI maps them to 1).
pub fn run(source: ConfigSource, overrides: &Overrides) -> Result<RunOutcome> {
    let text = match &source {
        ConfigSource::Path(path) => std::fs::read_to_string(path)?,
        ConfigSource::Preset(name) => preset(name)?.config.to_string(),
        ConfigSource::Inline(text) => text.clone(),
    };
    let mut parsed: ConfigFile = config::parse_config(&text)?;
    if let Some(seed) = overrides.seed {
        parsed.seed = Some(seed as i64);
    }
    if let Some(scale) = overrides.tolerance_scale {
        parsed.tolerance_scale = Some(scale);
    }
    if let Some(format) = overrides.format {
        parsed.format = Some(format.as_str().to_string());
    }
    let (resolved, plan) = config::resolve(&parsed)?;

    let execute = || -> Result<Rows> {
        match &plan {
            ExperimentPlan::Fim { models } => run_fim(models, &resolved),
            ExperimentPlan::Inequalities {
                models,
                checks,
                sigma_z_grid,
                de_bruijn_t,
                g_t_grid,
            } => run_inequalities(models, checks, sigma_z_grid, *de_bruijn_t, g_t_grid, &resolved),
            ExperimentPlan::Crlb { spec } => run_crlb(spec, &resolved),
            ExperimentPlan::Design { candidates, criterion, grid, noise, .. } => {
                let opts = eval_options(&resolved, &plan);
                run_design(candidates, criterion, grid, noise, &opts)
            }
            ExperimentPlan::Mse { spec, nls, trials } => run_mse(spec, nls, *trials, &resolved),
        }
    };

    let started = std::time::Instant::now();
    let rows = match overrides.workers {
        Some(workers) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
            pool.install(execute)?
        }
        None => execute()?,
    };
    let elapsed = started.elapsed();

    let echo = config::resolved_echo(&resolved, &plan);
    let mut echo_bytes = serde_json::to_vec_pretty(&echo)?;
    echo_bytes.push(b'\n');
    let hash = fnv1a_hex(&echo_bytes);

    // Wall time is reported on stderr only; the files must be byte-identical
    // across runs.
    let meta = vec![
        ("tool_version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("experiment".to_string(), plan.kind().to_string()),
        ("config_hash".to_string(), hash.clone()),
    ];
    let bytes = render(&rows, resolved.format, &meta)?;

    let out_path = overrides
        .out
        .clone()
        .or_else(|| resolved.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| default_out_path(plan.kind(), &hash, resolved.format));
    let resolved_path = out_path.with_extension("resolved.json");
    write_atomic(&out_path, &bytes)?;
    write_atomic(&resolved_path, &echo_bytes)?;

    let violated = match &rows {
        Rows::Ineq(r) => r
            .iter()
            .filter(|row| row.verdict == Verdict::Violated.as_str())
            .count(),
        _ => 0,
    };
    eprintln!(
        "fimlab: {} rows -> {} ({:.2}s){}",
        rows.len(),
        out_path.display(),
        elapsed.as_secs_f64(),
        if violated > 0 { format!("; {violated} verdict(s) violated") } else { String::new() }
    );

    Ok(RunOutcome {
        exit_code: if violated > 0 { 2 } else { 0 },
        out_path,
        resolved_path,
        violated,
        rows_written: rows.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses_and_resolves() {
        for preset in PRESETS {
            let parsed = config::parse_config(preset.config)
                .unwrap_or_else(|e| panic!("preset {}: {e}", preset.name));
            config::resolve(&parsed).unwrap_or_else(|e| panic!("preset {}: {e}", preset.name));
        }
    }

    #[test]
    fn catalog_contains_required_presets() {
        let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        assert!(names.contains(&"lemma1-laplace-colored"));
        assert!(names.contains(&"design-white-vs-correlated"));
    }

    #[test]
    fn fnv_hash_is_stable() {
        assert_eq!(fnv1a_hex(b""), "cbf29ce484222325");
        assert_eq!(fnv1a_hex(b"fimlab"), fnv1a_hex(b"fimlab"));
        assert_ne!(fnv1a_hex(b"a"), fnv1a_hex(b"b"));
    }
}
