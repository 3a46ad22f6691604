//! Experiment configuration: JSON schema, validation, and resolution.
//!
//! Configs are strict JSON — unknown keys are rejected with the offending
//! line, complex numbers are `[re, im]` pairs, matrices are row-major
//! nested arrays. Numeric fields are deserialized permissively and then
//! validated with named error messages, so a negative count reports the
//! field rather than a bare type error. Resolution fills every default
//! explicitly and the resolved form is echoed next to the results.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{circular_composite_covariance, ChannelParams, ChannelSpec, TrainingSequence};
use crate::design::{
    generate_white_sequence, Candidate, DesignCriterion, EvalOptions, Knowledge, Objective,
    ParamsGrid, WhiteKind,
};
use crate::error::{Error, Result};
use crate::estimator::NlsConfig;
use crate::noise::{BaseFamily, NoiseModel};
use crate::rng::derive_seed;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noises: Option<Vec<NoiseBlock>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_z_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub de_bruijn_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_t_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance_scale: Option<f64>,
}

/// Noise specification. Exactly one covariance source may be given:
/// `covariance` (full matrix), `shaping` (then `Σ = A Aᵀ`), `variance`
/// (+ `dim`, for `Σ = vI`), or `complex_circular` (circular composite of a
/// Toeplitz complex covariance).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBlock {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shaping: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complex_circular: Option<ComplexCircularBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub means: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variances: Option<Vec<f64>>,
}

/// Circular complex noise on `n` samples with Hermitian Toeplitz covariance
/// `Σ_c[i,j] = variance · rho^{|i-j|}`; the real-composite dimension is 2n.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexCircularBlock {
    pub n: i64,
    pub rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelBlock {
    pub n: i64,
    pub m: i64,
    pub omega0: f64,
    pub taps: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence_kind: Option<String>,
    pub noise: NoiseBlock,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignBlock {
    pub n: i64,
    pub m: i64,
    pub knowledge: String,
    pub objective: String,
    pub candidates: Vec<CandidateBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omegas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tap_draws: Option<i64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateBlock {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine_tol: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn as_str(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!(
                "format must be \"csv\" or \"json\", got \"{other}\""
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckKind {
    CramerRao,
    ScoreGap,
    WorstAdditiveNoise,
    Isoperimetric,
    DeBruijn,
    GFunction,
}

impl CheckKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CheckKind::CramerRao => "cramer_rao",
            CheckKind::ScoreGap => "score_gap",
            CheckKind::WorstAdditiveNoise => "worst_additive_noise",
            CheckKind::Isoperimetric => "isoperimetric",
            CheckKind::DeBruijn => "de_bruijn",
            CheckKind::GFunction => "g_function",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "cramer_rao" => Ok(CheckKind::CramerRao),
            "score_gap" => Ok(CheckKind::ScoreGap),
            "worst_additive_noise" => Ok(CheckKind::WorstAdditiveNoise),
            "isoperimetric" => Ok(CheckKind::Isoperimetric),
            "de_bruijn" => Ok(CheckKind::DeBruijn),
            "g_function" => Ok(CheckKind::GFunction),
            other => Err(Error::Config(format!("unknown check \"{other}\""))),
        }
    }

    pub fn all() -> &'static [CheckKind] {
        &[
            CheckKind::CramerRao,
            CheckKind::ScoreGap,
            CheckKind::WorstAdditiveNoise,
            CheckKind::Isoperimetric,
            CheckKind::DeBruijn,
            CheckKind::GFunction,
        ]
    }
}

/// Fully validated, executable experiment.
#[derive(Debug)]
pub enum ExperimentPlan {
    Fim {
        models: Vec<(String, NoiseModel)>,
    },
    Inequalities {
        models: Vec<(String, NoiseModel)>,
        checks: Vec<CheckKind>,
        sigma_z_grid: Vec<f64>,
        de_bruijn_t: f64,
        g_t_grid: Vec<f64>,
    },
    Crlb {
        spec: ChannelSpec,
    },
    Design {
        candidates: Vec<Candidate>,
        criterion: DesignCriterion,
        grid: ParamsGrid,
        noise: NoiseModel,
        eval_count: usize,
    },
    Mse {
        spec: ChannelSpec,
        nls: NlsConfig,
        trials: usize,
    },
}

impl ExperimentPlan {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentPlan::Fim { .. } => "fim",
            ExperimentPlan::Inequalities { .. } => "inequalities",
            ExperimentPlan::Crlb { .. } => "crlb",
            ExperimentPlan::Design { .. } => "design",
            ExperimentPlan::Mse { .. } => "mse",
        }
    }
}

/// Resolved run parameters shared by all experiment kinds.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: ConfigFile,
    pub seed: u64,
    pub count: usize,
    pub trials: usize,
    pub tolerance_scale: f64,
    pub format: OutputFormat,
    pub output: Option<String>,
}

/// Parse strict JSON; serde reports unknown fields with line/column.
pub fn parse_config(text: &str) -> Result<ConfigFile> {
    serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

fn positive(field: &str, value: Option<i64>, default: i64) -> Result<usize> {
    let v = value.unwrap_or(default);
    if v <= 0 {
        return Err(Error::Config(format!("field \"{field}\" must be positive, got {v}")));
    }
    Ok(v as usize)
}

fn non_negative_seed(value: Option<i64>) -> Result<u64> {
    let v = value.unwrap_or(0);
    if v < 0 {
        return Err(Error::Config(format!("field \"seed\" must be non-negative, got {v}")));
    }
    Ok(v as u64)
}

fn matrix_from_rows(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(Error::Config(format!("field \"{field}\" must be a non-empty matrix")));
    }
    let ncols = rows[0].len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config(format!(
            "field \"{field}\" must be rectangular with non-empty rows"
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &flat))
}

fn complex_vec(pairs: &[[f64; 2]]) -> Vec<Complex64> {
    pairs.iter().map(|p| Complex64::new(p[0], p[1])).collect()
}

impl NoiseBlock {
    /// Build the noise model; `label` falls back to the model's own label.
    pub fn build(&self) -> Result<(String, NoiseModel)> {
        let sources = [
            self.covariance.is_some(),
            self.shaping.is_some(),
            self.variance.is_some(),
            self.complex_circular.is_some(),
        ];
        let n_sources = sources.iter().filter(|&&s| s).count();
        if n_sources > 1 {
            return Err(Error::Config(
                "give at most one of \"covariance\", \"shaping\", \"variance\", \"complex_circular\""
                    .into(),
            ));
        }

        let covariance_target: Option<DMatrix<f64>> = if let Some(rows) = &self.covariance {
            Some(matrix_from_rows(rows, "covariance")?)
        } else if let Some(v) = self.variance {
            if !(v > 0.0) {
                return Err(Error::Config(format!(
                    "field \"variance\" must be positive, got {v}"
                )));
            }
            let d = positive("dim", self.dim, 0).map_err(|_| {
                Error::Config("field \"dim\" is required with \"variance\"".into())
            })?;
            Some(DMatrix::identity(d, d) * v)
        } else if let Some(cc) = &self.complex_circular {
            let n = positive("complex_circular.n", Some(cc.n), 1)?;
            if cc.rho.abs() >= 1.0 {
                return Err(Error::Config(format!(
                    "field \"complex_circular.rho\" must have |rho| < 1, got {}",
                    cc.rho
                )));
            }
            let v = cc.variance.unwrap_or(1.0);
            if !(v > 0.0) {
                return Err(Error::Config(format!(
                    "field \"complex_circular.variance\" must be positive, got {v}"
                )));
            }
            let sigma_c = DMatrix::from_fn(n, n, |i, j| {
                Complex64::new(v * cc.rho.powi((i as i32 - j as i32).abs()), 0.0)
            });
            Some(circular_composite_covariance(&sigma_c)?)
        } else {
            None
        };

        let model = match self.family.as_str() {
            "gaussian" => {
                if self.shaping.is_some() {
                    let a = matrix_from_rows(self.shaping.as_ref().unwrap(), "shaping")?;
                    NoiseModel::gaussian(&(&a * a.transpose()))?
                } else {
                    let cov = covariance_target.ok_or_else(|| {
                        Error::Config(
                            "gaussian noise needs \"covariance\", \"variance\", or \"complex_circular\""
                                .into(),
                        )
                    })?;
                    NoiseModel::gaussian(&cov)?
                }
            }
            family @ ("laplace" | "student_t" | "gauss_mixture") => {
                let base = match family {
                    "laplace" => BaseFamily::Laplace,
                    "student_t" => {
                        let nu = self.nu.ok_or_else(|| {
                            Error::Config("student_t noise needs field \"nu\"".into())
                        })?;
                        BaseFamily::StudentT { nu }
                    }
                    _ => BaseFamily::GaussMixture {
                        weights: self.weights.clone().ok_or_else(|| {
                            Error::Config("gauss_mixture noise needs field \"weights\"".into())
                        })?,
                        means: self.means.clone().ok_or_else(|| {
                            Error::Config("gauss_mixture noise needs field \"means\"".into())
                        })?,
                        variances: self.variances.clone().ok_or_else(|| {
                            Error::Config("gauss_mixture noise needs field \"variances\"".into())
                        })?,
                    },
                };
                if let Some(rows) = &self.shaping {
                    NoiseModel::shaped(base, &matrix_from_rows(rows, "shaping")?)?
                } else if let Some(cov) = covariance_target {
                    // Shape to match the requested covariance exactly.
                    let l = crate::linalg::cholesky_spd(&cov, "noise covariance")?;
                    NoiseModel::shaped(base, &l)?
                } else {
                    let d = positive("dim", self.dim, 0).map_err(|_| {
                        Error::Config(format!(
                            "{family} noise needs \"dim\" (with identity shaping) or an explicit covariance source"
                        ))
                    })?;
                    NoiseModel::iid(base, d)?
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown noise family \"{other}\" (expected gaussian, laplace, student_t, gauss_mixture)"
                )))
            }
        };
        if let Some(d) = self.dim {
            if d as usize != model.dim() {
                return Err(Error::Config(format!(
                    "field \"dim\" = {d} disagrees with the covariance source dimension {}",
                    model.dim()
                )));
            }
        }
        let label = self.label.clone().unwrap_or_else(|| model.label());
        Ok((label, model))
    }
}

impl ChannelBlock {
    pub fn build(&self, seed: u64) -> Result<ChannelSpec> {
        let n = positive("channel.n", Some(self.n), 1)?;
        let m = positive("channel.m", Some(self.m), 1)?;
        if self.taps.len() != m {
            return Err(Error::Config(format!(
                "field \"channel.taps\" must have m = {m} entries, got {}",
                self.taps.len()
            )));
        }
        let seq = build_sequence(
            n,
            m,
            self.sequence.as_deref(),
            self.sequence_kind.as_deref(),
            seed,
            "channel",
            0,
        )?;
        let taps = DVector::from_vec(complex_vec(&self.taps));
        let params = ChannelParams::new(self.omega0, taps)?;
        let (_, noise) = self.noise.build()?;
        ChannelSpec::new(seq, params, noise)
    }
}

fn build_sequence(
    n: usize,
    m: usize,
    samples: Option<&[[f64; 2]]>,
    kind: Option<&str>,
    seed: u64,
    context: &str,
    candidate_index: u64,
) -> Result<TrainingSequence> {
    match (samples, kind) {
        (Some(_), Some(_)) => Err(Error::Config(format!(
            "{context}: give either \"sequence\"/\"samples\" or \"sequence_kind\"/\"kind\", not both"
        ))),
        (Some(pairs), None) => TrainingSequence::new(complex_vec(pairs), n, m),
        (None, Some(kind)) => match kind {
            "cazac" => Ok(generate_white_sequence(n, m, WhiteKind::Cazac, seed)?.seq),
            "random_psk" => {
                let sub_seed = derive_seed(seed, 0x5EED ^ candidate_index);
                Ok(generate_white_sequence(n, m, WhiteKind::RandomPsk, sub_seed)?.seq)
            }
            "constant" => {
                TrainingSequence::new(vec![Complex64::new(1.0, 0.0); n + m - 1], n, m)
            }
            other => Err(Error::Config(format!(
                "{context}: unknown sequence kind \"{other}\" (expected cazac, random_psk, constant)"
            ))),
        },
        (None, None) => Err(Error::Config(format!(
            "{context}: a sequence is required (explicit samples or a kind)"
        ))),
    }
}

impl DesignBlock {
    pub fn build(&self, seed: u64) -> Result<(Vec<Candidate>, DesignCriterion, ParamsGrid)> {
        let n = positive("design.n", Some(self.n), 1)?;
        let m = positive("design.m", Some(self.m), 1)?;
        let knowledge = match self.knowledge.as_str() {
            "full_distribution" => Knowledge::FullDistribution,
            "covariance_only" => Knowledge::CovarianceOnly,
            "none" => Knowledge::NoKnowledge,
            other => {
                return Err(Error::Config(format!(
                    "unknown knowledge level \"{other}\" (expected full_distribution, covariance_only, none)"
                )))
            }
        };
        let objective = match self.objective.as_str() {
            "trace_crlb" => Objective::TraceCrlb,
            "max_crlb_entry" => Objective::MaxCrlbEntry,
            "min_fim_eigmin" => Objective::MinFimEigmin,
            other => {
                return Err(Error::Config(format!(
                    "unknown objective \"{other}\" (expected trace_crlb, max_crlb_entry, min_fim_eigmin)"
                )))
            }
        };
        if self.candidates.len() < 2 {
            return Err(Error::Config("design needs at least two candidates".into()));
        }
        let mut candidates = Vec::with_capacity(self.candidates.len());
        for (idx, cb) in self.candidates.iter().enumerate() {
            let seq = build_sequence(
                n,
                m,
                cb.samples.as_deref(),
                cb.kind.as_deref(),
                seed,
                &format!("candidate \"{}\"", cb.id),
                idx as u64,
            )?;
            candidates.push(Candidate { id: cb.id.clone(), seq });
        }
        let tap_draws = positive("design.tap_draws", self.tap_draws, 3)?;
        let mut grid = ParamsGrid::default_grid(m, tap_draws, derive_seed(seed, 0x617D));
        if let Some(omegas) = &self.omegas {
            if omegas.is_empty() {
                return Err(Error::Config("field \"design.omegas\" must be non-empty".into()));
            }
            grid.omegas = omegas.clone();
        }
        Ok((candidates, DesignCriterion { knowledge, objective }, grid))
    }
}

/// Validate and resolve a parsed config into an executable plan.
pub fn resolve(config: &ConfigFile) -> Result<(Resolved, ExperimentPlan)> {
    let seed = non_negative_seed(config.seed)?;
    let tolerance_scale = config.tolerance_scale.unwrap_or(1.0);
    if !(tolerance_scale > 0.0) {
        return Err(Error::Config(format!(
            "field \"tolerance_scale\" must be positive, got {tolerance_scale}"
        )));
    }
    let format = match &config.format {
        Some(f) => OutputFormat::parse(f)?,
        None => OutputFormat::Csv,
    };

    let gather_models = |required: &str| -> Result<Vec<(String, NoiseModel)>> {
        match (&config.noise, &config.noises) {
            (Some(_), Some(_)) => Err(Error::Config(
                "give either \"noise\" or \"noises\", not both".into(),
            )),
            (Some(block), None) => Ok(vec![block.build()?]),
            (None, Some(blocks)) if !blocks.is_empty() => {
                blocks.iter().map(|b| b.build()).collect()
            }
            _ => Err(Error::Config(format!(
                "experiment \"{required}\" needs a \"noise\" or \"noises\" block"
            ))),
        }
    };

    let plan = match config.experiment.as_str() {
        "fim" => {
            let count = positive("count", config.count, 100_000)?;
            if count < 1_000 {
                return Err(Error::Config(format!(
                    "field \"count\" must be >= 1000 for fim experiments, got {count}"
                )));
            }
            ExperimentPlan::Fim { models: gather_models("fim")? }
        }
        "inequalities" => {
            let checks = match &config.checks {
                Some(list) if !list.is_empty() => {
                    list.iter().map(|s| CheckKind::parse(s)).collect::<Result<Vec<_>>>()?
                }
                _ => CheckKind::all().to_vec(),
            };
            let sigma_z_grid = config.sigma_z_grid.clone().unwrap_or_else(|| vec![0.1, 0.5, 1.0]);
            if sigma_z_grid.iter().any(|&t| !(t > 0.0)) {
                return Err(Error::Config(
                    "field \"sigma_z_grid\" entries must be positive".into(),
                ));
            }
            let de_bruijn_t = config.de_bruijn_t.unwrap_or(0.01);
            if !(de_bruijn_t > 0.0) {
                return Err(Error::Config(format!(
                    "field \"de_bruijn_t\" must be positive, got {de_bruijn_t}"
                )));
            }
            let g_t_grid = config.g_t_grid.clone().unwrap_or_else(|| vec![0.01, 0.05, 0.1]);
            ExperimentPlan::Inequalities {
                models: gather_models("inequalities")?,
                checks,
                sigma_z_grid,
                de_bruijn_t,
                g_t_grid,
            }
        }
        "crlb" => {
            let channel = config.channel.as_ref().ok_or_else(|| {
                Error::Config("experiment \"crlb\" needs a \"channel\" block".into())
            })?;
            ExperimentPlan::Crlb { spec: channel.build(seed)? }
        }
        "design" => {
            let block = config.design.as_ref().ok_or_else(|| {
                Error::Config("experiment \"design\" needs a \"design\" block".into())
            })?;
            let (candidates, criterion, grid) = block.build(seed)?;
            let (_, noise) = config
                .noise
                .as_ref()
                .ok_or_else(|| Error::Config("experiment \"design\" needs a \"noise\" block".into()))?
                .build()?;
            let expected_dim = 2 * positive("design.n", Some(block.n), 1)?;
            if noise.dim() != expected_dim {
                return Err(Error::Config(format!(
                    "design noise must live on the real-composite space: expected dim {expected_dim}, got {}",
                    noise.dim()
                )));
            }
            let eval_count = positive("count", config.count, 20_000)?;
            ExperimentPlan::Design { candidates, criterion, grid, noise, eval_count }
        }
        "mse" => {
            let channel = config.channel.as_ref().ok_or_else(|| {
                Error::Config("experiment \"mse\" needs a \"channel\" block".into())
            })?;
            let trials = positive("trials", config.trials, 500)?;
            if trials < 100 {
                return Err(Error::Config(format!(
                    "field \"trials\" must be >= 100, got {trials}"
                )));
            }
            let nls = match &config.estimator {
                Some(block) => NlsConfig {
                    grid_size: positive("estimator.grid_size", block.grid_size, 256)?,
                    refine_tol: {
                        let tol = block.refine_tol.unwrap_or(1e-8);
                        if !(tol > 0.0) {
                            return Err(Error::Config(format!(
                                "field \"estimator.refine_tol\" must be positive, got {tol}"
                            )));
                        }
                        tol
                    },
                },
                None => NlsConfig::default(),
            };
            ExperimentPlan::Mse { spec: channel.build(seed)?, nls, trials }
        }
        other => {
            return Err(Error::Config(format!(
                "unknown experiment \"{other}\" (expected fim, inequalities, crlb, design, mse)"
            )))
        }
    };

    let resolved = Resolved {
        config: config.clone(),
        seed,
        count: positive("count", config.count, 100_000)?,
        trials: positive("trials", config.trials, 500)?,
        tolerance_scale,
        format,
        output: config.output.clone(),
    };
    Ok((resolved, plan))
}

/// The resolved-config echo: every default made explicit.
pub fn resolved_echo(resolved: &Resolved, plan: &ExperimentPlan) -> serde_json::Value {
    let mut cfg = serde_json::to_value(&resolved.config).expect("config serializes");
    let obj = cfg.as_object_mut().expect("config is an object");
    obj.insert("seed".into(), serde_json::json!(resolved.seed));
    obj.insert("count".into(), serde_json::json!(resolved.count));
    obj.insert("trials".into(), serde_json::json!(resolved.trials));
    obj.insert("tolerance_scale".into(), serde_json::json!(resolved.tolerance_scale));
    obj.insert("format".into(), serde_json::json!(resolved.format.as_str()));
    if let ExperimentPlan::Inequalities { checks, sigma_z_grid, de_bruijn_t, g_t_grid, .. } = plan {
        let names: Vec<&str> = checks.iter().map(|c| c.as_str()).collect();
        obj.insert("checks".into(), serde_json::json!(names));
        obj.insert("sigma_z_grid".into(), serde_json::json!(sigma_z_grid));
        obj.insert("de_bruijn_t".into(), serde_json::json!(de_bruijn_t));
        obj.insert("g_t_grid".into(), serde_json::json!(g_t_grid));
    }
    cfg
}

pub fn eval_options(resolved: &Resolved, plan: &ExperimentPlan) -> EvalOptions {
    let count = match plan {
        ExperimentPlan::Design { eval_count, .. } => *eval_count,
        _ => resolved.count,
    };
    EvalOptions { seed: resolved.seed, count }
}
