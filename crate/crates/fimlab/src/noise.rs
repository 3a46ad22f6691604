//! Noise distributions with exact scores, samplers, and covariances.
//!
//! A [`NoiseModel`] is a zero-mean distribution on `R^n` built by linear
//! shaping of an i.i.d. base family: `w = A v` where each coordinate of `v`
//! has unit variance. The covariance is therefore `A Aᵀ` by construction,
//! which keeps same-covariance comparisons against the Gaussian reference
//! exact. All admitted families have everywhere-differentiable densities and
//! closed-form scores; no numerical differentiation happens on the
//! production path.
//!
//! Gaussian models are constructed from a covariance matrix through
//! [`NoiseModel::gaussian`]; the non-Gaussian families go through
//! [`NoiseModel::shaped`]. The split is deliberate: the Gaussian score and
//! Fisher information are handled analytically as `-Σ⁻¹w` and `Σ⁻¹`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal, StudentT};
use rayon::prelude::*;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{substream, StreamDomain};

/// Laplace scale with unit variance (`Var = 2b²`).
pub const LAPLACE_SCALE: f64 = std::f64::consts::FRAC_1_SQRT_2;

const LN_2PI: f64 = 1.8378770664093453;

/// i.i.d. base families admitted for shaping. All are standardized to unit
/// per-component variance so the shaped covariance is exactly `A Aᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub enum BaseFamily {
    Laplace,
    StudentT {
        nu: f64,
    },
    /// Scalar Gaussian mixture with zero overall mean and unit variance.
    GaussMixture {
        weights: Vec<f64>,
        means: Vec<f64>,
        variances: Vec<f64>,
    },
}

impl BaseFamily {
    fn validate(&self) -> Result<()> {
        match self {
            BaseFamily::Laplace => Ok(()),
            BaseFamily::StudentT { nu } => {
                if !(*nu > 2.0) {
                    return Err(Error::InvalidParameter(format!(
                        "StudentT requires nu > 2 for finite variance, got {nu}"
                    )));
                }
                Ok(())
            }
            BaseFamily::GaussMixture {
                weights,
                means,
                variances,
            } => {
                if weights.is_empty() || weights.len() != means.len() || weights.len() != variances.len() {
                    return Err(Error::InvalidParameter(
                        "mixture weights/means/variances must be non-empty and equal-length".into(),
                    ));
                }
                if weights.iter().any(|w| !(*w > 0.0)) {
                    return Err(Error::InvalidParameter("mixture weights must be positive".into()));
                }
                if variances.iter().any(|v| !(*v > 0.0)) {
                    return Err(Error::InvalidParameter("mixture variances must be positive".into()));
                }
                let wsum: f64 = weights.iter().sum();
                if (wsum - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidParameter(format!(
                        "mixture weights must sum to 1, got {wsum}"
                    )));
                }
                let mean: f64 = weights.iter().zip(means).map(|(w, m)| w * m).sum();
                if mean.abs() > 1e-9 {
                    return Err(Error::InvalidParameter(format!(
                        "mixture must have zero mean, got {mean}"
                    )));
                }
                let var: f64 = weights
                    .iter()
                    .zip(means)
                    .zip(variances)
                    .map(|((w, m), v)| w * (v + m * m))
                    .sum();
                if (var - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidParameter(format!(
                        "mixture must have unit variance, got {var}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// StudentT standardization factor: the standard t has variance
    /// `nu/(nu-2)`, so scaling by `sqrt((nu-2)/nu)` yields unit variance.
    fn student_scale(nu: f64) -> f64 {
        ((nu - 2.0) / nu).sqrt()
    }

    fn score1(&self, v: f64) -> f64 {
        match self {
            // sign(0) = 0 keeps the score bounded at the (measure-zero) kink.
            BaseFamily::Laplace => {
                if v == 0.0 {
                    0.0
                } else {
                    -v.signum() / LAPLACE_SCALE
                }
            }
            BaseFamily::StudentT { nu } => {
                let s = Self::student_scale(*nu);
                let t = v / s;
                -(nu + 1.0) * t / ((nu + t * t) * s)
            }
            BaseFamily::GaussMixture {
                weights,
                means,
                variances,
            } => {
                // Responsibility-weighted component scores, computed with a
                // shifted exponential for stability in the tails.
                let logs: Vec<f64> = weights
                    .iter()
                    .zip(means)
                    .zip(variances)
                    .map(|((w, m), s2)| {
                        w.ln() - 0.5 * (LN_2PI + s2.ln()) - (v - m) * (v - m) / (2.0 * s2)
                    })
                    .collect();
                let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut num = 0.0;
                let mut den = 0.0;
                for ((lg, m), s2) in logs.iter().zip(means).zip(variances) {
                    let r = (lg - top).exp();
                    den += r;
                    num += r * (-(v - m) / s2);
                }
                num / den
            }
        }
    }

    fn log_density1(&self, v: f64) -> f64 {
        match self {
            BaseFamily::Laplace => -v.abs() / LAPLACE_SCALE - (2.0 * LAPLACE_SCALE).ln(),
            BaseFamily::StudentT { nu } => {
                let s = Self::student_scale(*nu);
                let t = v / s;
                ln_gamma(0.5 * (nu + 1.0))
                    - ln_gamma(0.5 * nu)
                    - 0.5 * (nu * std::f64::consts::PI).ln()
                    - s.ln()
                    - 0.5 * (nu + 1.0) * (1.0 + t * t / nu).ln()
            }
            BaseFamily::GaussMixture {
                weights,
                means,
                variances,
            } => {
                let logs: Vec<f64> = weights
                    .iter()
                    .zip(means)
                    .zip(variances)
                    .map(|((w, m), s2)| {
                        w.ln() - 0.5 * (LN_2PI + s2.ln()) - (v - m) * (v - m) / (2.0 * s2)
                    })
                    .collect();
                let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                top + logs.iter().map(|lg| (lg - top).exp()).sum::<f64>().ln()
            }
        }
    }

    fn draw1<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            BaseFamily::Laplace => {
                // Difference of two unit exponentials is Laplace(b = 1).
                let e1 = -(1.0 - rng.gen::<f64>()).ln();
                let e2 = -(1.0 - rng.gen::<f64>()).ln();
                LAPLACE_SCALE * (e1 - e2)
            }
            BaseFamily::StudentT { nu } => {
                let t: f64 = StudentT::new(*nu).expect("validated nu").sample(rng);
                t * Self::student_scale(*nu)
            }
            BaseFamily::GaussMixture {
                weights,
                means,
                variances,
            } => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut comp = weights.len() - 1;
                for (j, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        comp = j;
                        break;
                    }
                }
                Normal::new(means[comp], variances[comp].sqrt())
                    .expect("validated variance")
                    .sample(rng)
            }
        }
    }

    /// Scalar Fisher information, when it has a closed form.
    fn fisher_scalar(&self) -> Option<f64> {
        match self {
            BaseFamily::Laplace => Some(1.0 / (LAPLACE_SCALE * LAPLACE_SCALE)),
            BaseFamily::StudentT { nu } => {
                let s2 = (nu - 2.0) / nu;
                Some((nu + 1.0) / ((nu + 3.0) * s2))
            }
            BaseFamily::GaussMixture { .. } => None,
        }
    }

    /// Scalar differential entropy in nats, when it has a closed form.
    fn entropy_scalar(&self) -> Option<f64> {
        match self {
            BaseFamily::Laplace => Some(1.0 + (2.0 * LAPLACE_SCALE).ln()),
            BaseFamily::StudentT { nu } => {
                let half = 0.5 * nu;
                let halfp = 0.5 * (nu + 1.0);
                let ln_beta = ln_gamma(half) + ln_gamma(0.5) - ln_gamma(half + 0.5);
                let h_std = halfp * (digamma(halfp) - digamma(half)) + (nu.sqrt()).ln() + ln_beta;
                Some(h_std + Self::student_scale(*nu).ln())
            }
            BaseFamily::GaussMixture { .. } => None,
        }
    }

    fn label(&self) -> String {
        match self {
            BaseFamily::Laplace => "laplace".into(),
            BaseFamily::StudentT { nu } => format!("student_t(nu={nu})"),
            BaseFamily::GaussMixture { weights, .. } => {
                format!("gauss_mixture(k={})", weights.len())
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Family {
    Gaussian,
    Iid(BaseFamily),
}

/// A sampleable noise distribution with exact score and known covariance.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    family: Family,
    dim: usize,
    shaping: DMatrix<f64>,
    shaping_inv: DMatrix<f64>,
    covariance: DMatrix<f64>,
    precision: DMatrix<f64>,
    log_det_shaping: f64,
}

/// A reproducible batch of draws; identical `(model, seed, count)` triples
/// produce bit-identical data regardless of worker count.
#[derive(Clone, Debug)]
pub struct SampleBatch {
    /// `count × n`, one draw per row.
    pub data: DMatrix<f64>,
    pub seed: u64,
    pub model_id: String,
}

impl NoiseModel {
    /// Gaussian noise with the given SPD covariance. The shaping matrix is
    /// the lower Cholesky factor, so `Σ = A Aᵀ` like every other family.
    pub fn gaussian(covariance: &DMatrix<f64>) -> Result<Self> {
        let l = linalg::cholesky_spd(covariance, "gaussian covariance")?;
        let shaping_inv = l.clone().try_inverse().ok_or_else(|| {
            Error::SingularMatrix("gaussian covariance factor not invertible".into())
        })?;
        let precision = linalg::inv_spd(covariance, "gaussian covariance")?;
        let log_det_shaping = l.diagonal().iter().map(|d| d.ln()).sum();
        Ok(NoiseModel {
            family: Family::Gaussian,
            dim: covariance.nrows(),
            shaping: l,
            shaping_inv,
            covariance: linalg::symmetrize(covariance),
            precision,
            log_det_shaping,
        })
    }

    /// Colored non-Gaussian noise `w = A v` with `v` i.i.d. from `base`.
    pub fn shaped(base: BaseFamily, shaping: &DMatrix<f64>) -> Result<Self> {
        base.validate()?;
        if !shaping.is_square() || shaping.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "shaping matrix must be square and non-empty, got {}x{}",
                shaping.nrows(),
                shaping.ncols()
            )));
        }
        let det = shaping.determinant();
        let scale = linalg::max_abs(shaping).max(1.0);
        if det.abs() <= 1e-12 * scale.powi(shaping.nrows() as i32) {
            return Err(Error::SingularMatrix(format!(
                "shaping matrix has |det| = {:.3e}",
                det.abs()
            )));
        }
        let shaping_inv = shaping
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::SingularMatrix("shaping matrix not invertible".into()))?;
        let covariance = shaping * shaping.transpose();
        let precision = shaping_inv.transpose() * &shaping_inv;
        Ok(NoiseModel {
            family: Family::Iid(base),
            dim: shaping.nrows(),
            shaping: shaping.clone(),
            shaping_inv,
            covariance,
            precision,
            log_det_shaping: det.abs().ln(),
        })
    }

    /// i.i.d. (identity shaping) convenience constructor.
    pub fn iid(base: BaseFamily, dim: usize) -> Result<Self> {
        Self::shaped(base, &DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// `Σ⁻¹`, which is also the Fisher information of the Gaussian reference
    /// with matched covariance.
    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn shaping(&self) -> &DMatrix<f64> {
        &self.shaping
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.family, Family::Gaussian)
    }

    pub fn label(&self) -> String {
        match &self.family {
            Family::Gaussian => format!("gaussian(n={})", self.dim),
            Family::Iid(base) => format!("{}(n={})", base.label(), self.dim),
        }
    }

    /// Exact gradient of the log-density at `w`.
    pub fn score(&self, w: &DVector<f64>) -> DVector<f64> {
        assert_eq!(w.len(), self.dim, "score input dimension");
        match &self.family {
            Family::Gaussian => -(&self.precision * w),
            Family::Iid(base) => {
                let v = &self.shaping_inv * w;
                let sv = DVector::from_iterator(self.dim, v.iter().map(|&vi| base.score1(vi)));
                self.shaping_inv.transpose() * sv
            }
        }
    }

    pub(crate) fn score_slice(&self, w: &[f64]) -> DVector<f64> {
        self.score(&DVector::from_column_slice(w))
    }

    /// Exact log-density at `w`.
    pub fn log_density(&self, w: &DVector<f64>) -> f64 {
        assert_eq!(w.len(), self.dim, "log_density input dimension");
        match &self.family {
            Family::Gaussian => {
                let quad = w.dot(&(&self.precision * w));
                -0.5 * (self.dim as f64) * LN_2PI - self.log_det_shaping - 0.5 * quad
            }
            Family::Iid(base) => {
                let v = &self.shaping_inv * w;
                v.iter().map(|&vi| base.log_density1(vi)).sum::<f64>() - self.log_det_shaping
            }
        }
    }

    /// Closed-form Fisher information matrix, when available: `Σ⁻¹` for the
    /// Gaussian, `j·Σ⁻¹` for i.i.d. bases with scalar Fisher information `j`
    /// (the chain rule `A⁻ᵀ (jI) A⁻¹` collapses onto the precision).
    pub fn fim_closed_form(&self) -> Option<DMatrix<f64>> {
        match &self.family {
            Family::Gaussian => Some(self.precision.clone()),
            Family::Iid(base) => base.fisher_scalar().map(|j| j * &self.precision),
        }
    }

    /// Closed-form differential entropy in nats, when available:
    /// `h(w) = n·h_base + ln|det A|`.
    pub fn entropy_closed_form(&self) -> Option<f64> {
        match &self.family {
            Family::Gaussian => {
                Some(0.5 * (self.dim as f64) * (LN_2PI + 1.0) + self.log_det_shaping)
            }
            Family::Iid(base) => base
                .entropy_scalar()
                .map(|h| (self.dim as f64) * h + self.log_det_shaping),
        }
    }

    /// Row-major `count × n` buffer of draws from the given stream domain.
    pub(crate) fn sample_raw(&self, seed: u64, domain: StreamDomain, count: usize) -> Vec<f64> {
        let n = self.dim;
        let mut buf = vec![0.0f64; count * n];
        buf.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let mut rng = substream(seed, domain, i as u64);
            let mut v = vec![0.0f64; n];
            match &self.family {
                Family::Gaussian => {
                    for vi in v.iter_mut() {
                        *vi = rng.sample(StandardNormal);
                    }
                }
                Family::Iid(base) => {
                    for vi in v.iter_mut() {
                        *vi = base.draw1(&mut rng);
                    }
                }
            }
            for r in 0..n {
                let mut acc = 0.0;
                for (c, vc) in v.iter().enumerate() {
                    acc += self.shaping[(r, c)] * vc;
                }
                row[r] = acc;
            }
        });
        buf
    }

    /// `count` i.i.d. draws, deterministic per `(seed, count)` and
    /// independent of the rayon worker count.
    pub fn sample(&self, seed: u64, count: usize) -> Result<SampleBatch> {
        if count == 0 {
            return Err(Error::InvalidParameter("sample count must be >= 1".into()));
        }
        let buf = self.sample_raw(seed, StreamDomain::NoiseSample, count);
        Ok(SampleBatch {
            data: DMatrix::from_row_slice(count, self.dim, &buf),
            seed,
            model_id: self.label(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_gaussian(n: usize) -> NoiseModel {
        NoiseModel::gaussian(&DMatrix::identity(n, n)).unwrap()
    }

    pub(crate) fn test_mixture() -> BaseFamily {
        BaseFamily::GaussMixture {
            weights: vec![0.5, 0.5],
            means: vec![-0.8, 0.8],
            variances: vec![0.36, 0.36],
        }
    }

    #[test]
    fn unit_gaussian_score_is_minus_w() {
        let model = unit_gaussian(2);
        let w = DVector::from_column_slice(&[0.3, -1.2]);
        let s = model.score(&w);
        assert_relative_eq!(s[0], -0.3, epsilon = 1e-15);
        assert_relative_eq!(s[1], 1.2, epsilon = 1e-15);
    }

    #[test]
    fn gaussian_fim_is_precision() {
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let model = NoiseModel::gaussian(&sigma).unwrap();
        let fim = model.fim_closed_form().unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]) / 3.0;
        assert!(linalg::max_abs(&(fim - expected)) < 1e-12);
    }

    #[test]
    fn gaussian_rejects_non_spd_with_diagnostic() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 1.0]);
        match NoiseModel::gaussian(&sigma) {
            Err(Error::NotSpd { detail, .. }) => assert!(detail.contains("eigenvalue")),
            other => panic!("expected NotSpd, got {other:?}"),
        }
    }

    #[test]
    fn laplace_score_closed_form() {
        let model = NoiseModel::iid(BaseFamily::Laplace, 2).unwrap();
        let s = model.score(&DVector::from_column_slice(&[0.7, -0.1]));
        assert_relative_eq!(s[0], -2f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(s[1], 2f64.sqrt(), epsilon = 1e-14);
        // sign(0) = 0 by convention.
        let s0 = model.score(&DVector::from_column_slice(&[0.0, 1.0]));
        assert_eq!(s0[0], 0.0);
    }

    #[test]
    fn shaped_laplace_scalar_chain_rule() {
        let a = DMatrix::from_row_slice(1, 1, &[2.0]);
        let model = NoiseModel::shaped(BaseFamily::Laplace, &a).unwrap();
        let s = model.score(&DVector::from_column_slice(&[4.0]));
        assert_relative_eq!(s[0], -2f64.sqrt() / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn shaped_covariance_is_a_at() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 1.0]);
        let model = NoiseModel::shaped(BaseFamily::Laplace, &a).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.25]);
        assert!(linalg::max_abs(&(model.covariance() - expected)) < 1e-15);
    }

    #[test]
    fn shaped_rejects_singular_and_bad_params() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            NoiseModel::shaped(BaseFamily::Laplace, &a),
            Err(Error::SingularMatrix(_))
        ));
        assert!(NoiseModel::iid(BaseFamily::StudentT { nu: 2.0 }, 1).is_err());
        let off_mean = BaseFamily::GaussMixture {
            weights: vec![0.5, 0.5],
            means: vec![0.1, 0.2],
            variances: vec![0.5, 0.5],
        };
        assert!(NoiseModel::iid(off_mean, 1).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let model = NoiseModel::iid(BaseFamily::StudentT { nu: 5.0 }, 3).unwrap();
        let a = model.sample(1, 10).unwrap();
        let b = model.sample(1, 10).unwrap();
        assert_eq!(a.data, b.data);
        // Longer batches extend, never reshuffle, the shorter ones.
        let c = model.sample(1, 20).unwrap();
        assert_eq!(a.data.row(7), c.data.row(7));
    }

    #[test]
    fn sample_mean_near_zero_gaussian() {
        let model = unit_gaussian(2);
        let batch = model.sample(123, 100_000).unwrap();
        let bound = 3.0 / (batch.data.nrows() as f64).sqrt();
        for j in 0..2 {
            let mean = batch.data.column(j).mean();
            assert!(mean.abs() < bound, "coordinate {j} mean {mean} vs {bound}");
        }
    }

    #[test]
    fn sample_covariance_matches_sigma() {
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let model = NoiseModel::gaussian(&sigma).unwrap();
        let batch = model.sample(7, 100_000).unwrap();
        let count = batch.data.nrows();
        let mean = batch.data.row_mean();
        for i in 0..2 {
            for j in 0..2 {
                let prods: Vec<f64> = (0..count)
                    .map(|r| (batch.data[(r, i)] - mean[i]) * (batch.data[(r, j)] - mean[j]))
                    .collect();
                let m: f64 = prods.iter().sum::<f64>() / count as f64;
                let var: f64 =
                    prods.iter().map(|p| (p - m) * (p - m)).sum::<f64>() / (count - 1) as f64;
                let se = (var / count as f64).sqrt();
                assert!(
                    (m - sigma[(i, j)]).abs() <= 3.0 * se,
                    "cov[{i},{j}] = {m} vs {} (se {se})",
                    sigma[(i, j)]
                );
            }
        }
    }

    #[test]
    fn shaped_student_covariance_within_bootstrap_se() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 1.0]);
        let model = NoiseModel::shaped(BaseFamily::StudentT { nu: 5.0 }, &a).unwrap();
        let target = model.covariance().clone();
        let batch = model.sample(11, 100_000).unwrap();
        let count = batch.data.nrows();
        // Bootstrap standard errors of each covariance entry.
        let boots = 64usize;
        for i in 0..2 {
            for j in 0..2 {
                let prods: Vec<f64> =
                    (0..count).map(|r| batch.data[(r, i)] * batch.data[(r, j)]).collect();
                let m: f64 = prods.iter().sum::<f64>() / count as f64;
                let mut reps = Vec::with_capacity(boots);
                for b in 0..boots {
                    let mut rng = substream(99, StreamDomain::GaussianPerturbation, b as u64);
                    let mut acc = 0.0;
                    for _ in 0..count {
                        acc += prods[rng.gen_range(0..count)];
                    }
                    reps.push(acc / count as f64);
                }
                let rm: f64 = reps.iter().sum::<f64>() / boots as f64;
                let se = (reps.iter().map(|r| (r - rm) * (r - rm)).sum::<f64>()
                    / (boots - 1) as f64)
                    .sqrt();
                assert!(
                    (m - target[(i, j)]).abs() <= 3.0 * se,
                    "entry ({i},{j}): {m} vs {} with se {se}",
                    target[(i, j)]
                );
            }
        }
    }

    #[test]
    fn score_matches_central_difference() {
        let shaped = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 1.0]);
        let models = vec![
            NoiseModel::gaussian(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).unwrap(),
            NoiseModel::shaped(BaseFamily::Laplace, &shaped).unwrap(),
            NoiseModel::shaped(BaseFamily::StudentT { nu: 5.0 }, &shaped).unwrap(),
            NoiseModel::iid(test_mixture(), 2).unwrap(),
        ];
        let h = 1e-5;
        for model in &models {
            let mut worst = 0.0f64;
            for k in 0..20 {
                let mut rng = substream(5, StreamDomain::NoiseSample, k);
                // Stay away from the Laplace kink at coordinate zero.
                let w = DVector::from_iterator(
                    2,
                    (0..2).map(|_| {
                        let x: f64 = rng.sample::<f64, _>(StandardNormal);
                        x.signum() * (x.abs() + 0.05)
                    }),
                );
                let analytic = model.score(&w);
                for c in 0..2 {
                    let mut wp = w.clone();
                    let mut wm = w.clone();
                    wp[c] += h;
                    wm[c] -= h;
                    let fd = (model.log_density(&wp) - model.log_density(&wm)) / (2.0 * h);
                    worst = worst.max((fd - analytic[c]).abs());
                }
            }
            assert!(worst <= 1e-6, "model {}: worst deviation {worst}", model.label());
        }
    }

    #[test]
    fn mean_score_is_zero_within_se() {
        let models = vec![
            NoiseModel::iid(BaseFamily::Laplace, 2).unwrap(),
            NoiseModel::iid(BaseFamily::StudentT { nu: 5.0 }, 2).unwrap(),
            NoiseModel::iid(test_mixture(), 1).unwrap(),
        ];
        for model in &models {
            let count = 50_000;
            let raw = model.sample_raw(3, StreamDomain::NoiseSample, count);
            let n = model.dim();
            let mut mean = DVector::zeros(n);
            let mut meansq = DVector::zeros(n);
            for row in raw.chunks(n) {
                let s = model.score_slice(row);
                mean += &s;
                meansq += s.map(|x| x * x);
            }
            mean /= count as f64;
            meansq /= count as f64;
            for c in 0..n {
                let se = ((meansq[c] - mean[c] * mean[c]) / (count as f64 - 1.0)).sqrt();
                assert!(
                    mean[c].abs() <= 4.0 * se,
                    "model {} coord {c}: mean {} se {se}",
                    model.label(),
                    mean[c]
                );
            }
        }
    }

    #[test]
    fn student_entropy_closed_form_is_finite_and_reasonable() {
        let model = NoiseModel::iid(BaseFamily::StudentT { nu: 5.0 }, 1).unwrap();
        let h = model.entropy_closed_form().unwrap();
        // Unit-variance non-Gaussian entropy must fall below the Gaussian cap.
        assert!(h < 0.5 * (LN_2PI + 1.0));
        assert!(h > 1.0);
    }
}
