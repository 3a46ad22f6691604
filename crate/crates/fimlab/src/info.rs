//! Information-theoretic estimators: Fisher information matrices,
//! differential entropy, entropy power, and additive-noise mutual
//! information.
//!
//! Every Monte Carlo output carries standard errors so downstream inequality
//! checks can phrase "holds up to estimator noise" as a concrete numeric
//! predicate. Mutual information is always computed as an entropy
//! difference `h(w + z) − h(w)`, never by joint-density estimation; on the
//! k-NN path both entropies share the same `w` batch, which cancels most of
//! the estimator bias and noise in the difference.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::knn;
use crate::linalg;
use crate::noise::NoiseModel;
use crate::rng::StreamDomain;

/// How a Fisher information matrix estimate was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FimMethod {
    Analytic,
    MonteCarlo,
}

/// Symmetric FIM estimate with per-entry standard errors.
#[derive(Clone, Debug)]
pub struct FimEstimate {
    pub matrix: DMatrix<f64>,
    pub stderr: DMatrix<f64>,
    /// Number of Monte Carlo draws; 0 for closed forms.
    pub sample_count: usize,
    pub method: FimMethod,
}

impl FimEstimate {
    /// Frobenius aggregation of the per-entry standard errors; the scale
    /// used for eigenvalue and Frobenius tolerances downstream.
    pub fn aggregate_stderr(&self) -> f64 {
        self.stderr.norm()
    }
}

/// Monte Carlo FIM: symmetrized average of score outer products.
pub fn fim_monte_carlo(model: &NoiseModel, seed: u64, count: usize) -> Result<FimEstimate> {
    if count < 1_000 {
        return Err(Error::InvalidParameter(format!(
            "fim_monte_carlo needs count >= 1000, got {count}"
        )));
    }
    let n = model.dim();
    let raw = model.sample_raw(seed, StreamDomain::NoiseSample, count);
    let scores = scores_of_rows(model, &raw, n)?;
    let (mean, stderr) = mean_outer_with_stderr(&scores, n);
    Ok(FimEstimate {
        matrix: linalg::symmetrize(&mean),
        stderr,
        sample_count: count,
        method: FimMethod::MonteCarlo,
    })
}

/// Closed-form FIM where the family admits one; `None` for mixtures.
pub fn fim_analytic(model: &NoiseModel) -> Option<FimEstimate> {
    model.fim_closed_form().map(|matrix| {
        let n = matrix.nrows();
        FimEstimate {
            matrix,
            stderr: DMatrix::zeros(n, n),
            sample_count: 0,
            method: FimMethod::Analytic,
        }
    })
}

pub(crate) fn scores_of_rows(
    model: &NoiseModel,
    raw: &[f64],
    n: usize,
) -> Result<Vec<DVector<f64>>> {
    raw.par_chunks(n)
        .enumerate()
        .map(|(i, row)| {
            let s = model.score_slice(row);
            if s.iter().any(|v| !v.is_finite()) {
                Err(Error::NonFiniteScore { index: i })
            } else {
                Ok(s)
            }
        })
        .collect()
}

/// Mean of outer products `v vᵀ` with per-entry standard errors.
/// Accumulation is sequential in index order so results do not depend on
/// the worker count.
pub(crate) fn mean_outer_with_stderr(
    vectors: &[DVector<f64>],
    n: usize,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let count = vectors.len();
    let mut mean = DMatrix::zeros(n, n);
    let mut meansq = DMatrix::zeros(n, n);
    for v in vectors {
        for i in 0..n {
            for j in 0..n {
                let p = v[i] * v[j];
                mean[(i, j)] += p;
                meansq[(i, j)] += p * p;
            }
        }
    }
    mean /= count as f64;
    meansq /= count as f64;
    let stderr = DMatrix::from_fn(n, n, |i, j| {
        let var = (meansq[(i, j)] - mean[(i, j)] * mean[(i, j)]).max(0.0);
        (var / (count as f64 - 1.0)).sqrt()
    });
    (mean, stderr)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntropyMethod {
    ClosedForm,
    Knn,
}

/// How the caller wants the entropy computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntropyRequest {
    /// Closed form when the family has one, k-NN otherwise.
    Auto,
    ClosedForm,
    Knn,
}

#[derive(Clone, Debug)]
pub struct EntropyEstimate {
    /// Differential entropy in nats.
    pub value: f64,
    pub stderr: f64,
    pub method: EntropyMethod,
}

/// Differential entropy of a noise model.
pub fn entropy(
    model: &NoiseModel,
    request: EntropyRequest,
    seed: u64,
    count: usize,
) -> Result<EntropyEstimate> {
    let closed = model.entropy_closed_form();
    match (request, closed) {
        (EntropyRequest::Auto | EntropyRequest::ClosedForm, Some(value)) => Ok(EntropyEstimate {
            value,
            stderr: 0.0,
            method: EntropyMethod::ClosedForm,
        }),
        (EntropyRequest::ClosedForm, None) => Err(Error::InvalidParameter(format!(
            "{} has no closed-form entropy",
            model.label()
        ))),
        _ => {
            if count < 1_000 {
                return Err(Error::InvalidParameter(format!(
                    "knn entropy needs count >= 1000, got {count}"
                )));
            }
            let raw = model.sample_raw(seed, StreamDomain::NoiseSample, count);
            entropy_from_samples(&raw, count, model.dim())
        }
    }
}

/// k-NN entropy of a row-major sample batch.
pub fn entropy_from_samples(data: &[f64], count: usize, dim: usize) -> Result<EntropyEstimate> {
    let log_eps = knn::log_knn_distances(data, count, dim, knn::DEFAULT_K)?;
    let (value, stderr) = knn::entropy_from_log_distances(&log_eps, dim, knn::DEFAULT_K);
    Ok(EntropyEstimate {
        value,
        stderr,
        method: EntropyMethod::Knn,
    })
}

/// Entropy power `N = exp(2h/n) / (2πe)`.
pub fn entropy_power(h: &EntropyEstimate, n: usize) -> f64 {
    (2.0 * h.value / n as f64).exp() / (2.0 * std::f64::consts::PI * std::f64::consts::E)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MiRequest {
    /// Closed form for Gaussian `w`, paired k-NN otherwise.
    Auto,
    /// Paired k-NN even when a closed form exists (used by the inequality
    /// harness, where the estimator itself is under test).
    ForceKnn,
}

#[derive(Clone, Debug)]
pub struct MiEstimate {
    /// Mutual information in nats.
    pub value: f64,
    pub stderr: f64,
}

/// Mutual information `I(w + z_G; z_G)` with `z_G ~ N(0, Σ_z)` independent
/// of `w`, computed as `h(w + z) − h(w)`.
pub fn mutual_info_additive(
    model: &NoiseModel,
    sigma_z: &DMatrix<f64>,
    seed: u64,
    count: usize,
    request: MiRequest,
) -> Result<MiEstimate> {
    let n = model.dim();
    if sigma_z.nrows() != n || sigma_z.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "sigma_z is {}x{}, noise dimension is {n}",
            sigma_z.nrows(),
            sigma_z.ncols()
        )));
    }
    if !linalg::is_symmetric(sigma_z, 1e-10) {
        return Err(Error::InvalidParameter("sigma_z must be symmetric".into()));
    }
    if linalg::max_abs(sigma_z) == 0.0 {
        // Independent of a zero perturbation.
        return Ok(MiEstimate { value: 0.0, stderr: 0.0 });
    }
    // psd_factor rejects negative eigenvalues beyond round-off.
    let factor = linalg::psd_factor(sigma_z, "sigma_z")?;

    if model.is_gaussian() && request == MiRequest::Auto {
        let sum = model.covariance() + sigma_z;
        let value = 0.5
            * (linalg::log_det_spd(&sum, "covariance + sigma_z")?
                - linalg::log_det_spd(model.covariance(), "covariance")?);
        return Ok(MiEstimate { value, stderr: 0.0 });
    }

    if count < 10_000 {
        return Err(Error::InvalidParameter(format!(
            "knn mutual information needs count >= 10^4, got {count}"
        )));
    }
    let w = model.sample_raw(seed, StreamDomain::NoiseSample, count);
    let z = gaussian_perturbation(&factor, seed, count);
    let wz: Vec<f64> = w.iter().zip(&z).map(|(a, b)| a + b).collect();

    let log_eps_w = knn::log_knn_distances(&w, count, n, knn::DEFAULT_K)?;
    let log_eps_wz = knn::log_knn_distances(&wz, count, n, knn::DEFAULT_K)?;
    Ok(paired_mi(&log_eps_wz, &log_eps_w, n))
}

/// Row-major `count × n` draws of `F g` with `g` standard normal, on the
/// perturbation stream domain so they are independent of the `w` draws.
pub(crate) fn gaussian_perturbation(factor: &DMatrix<f64>, seed: u64, count: usize) -> Vec<f64> {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let n = factor.nrows();
    let mut buf = vec![0.0f64; count * n];
    buf.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let mut rng = crate::rng::substream(seed, StreamDomain::GaussianPerturbation, i as u64);
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for r in 0..n {
            let mut acc = 0.0;
            for (c, gc) in g.iter().enumerate() {
                acc += factor[(r, c)] * gc;
            }
            row[r] = acc;
        }
    });
    buf
}

/// MI from paired per-point log distances; the Kozachenko–Leonenko
/// constants cancel in the difference.
pub(crate) fn paired_mi(log_eps_wz: &[f64], log_eps_w: &[f64], dim: usize) -> MiEstimate {
    let n = log_eps_w.len();
    let d = dim as f64;
    let diffs: Vec<f64> = log_eps_wz
        .iter()
        .zip(log_eps_w)
        .map(|(a, b)| d * (a - b))
        .collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n as f64 - 1.0);
    MiEstimate {
        value: mean,
        stderr: (var / n as f64).sqrt(),
    }
}
