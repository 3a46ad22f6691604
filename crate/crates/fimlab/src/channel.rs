//! Frequency-selective training model `y = X_ω S h + w` and its CRLB chain.
//!
//! The unknown parameter vector is `θ = [ω₀, h_R, h_I]` of length `2m+1`.
//! Noise lives natively on the real-composite space of dimension `2n`
//! (real parts stacked over imaginary parts); circularity is a property of
//! specific models, never an assumption of the code paths.
//!
//! Two FIM routes are provided. [`fim_theta`] is the complex form
//! `c · Re[∇ξ J ∇ξᴴ]`; the scale `c` ([`COMPLEX_FIM_SCALE`]) is calibrated
//! once against the real-composite route and locked by tests — for circular
//! noise the complex convention undercounts the real-composite information
//! by exactly that factor. [`fim_theta_real`] / [`fim_theta_oracle`] work on
//! the `2n`-dimensional composite space directly (exactly for a given noise
//! FIM, or by Monte Carlo over score outer products) and serve as ground
//! truth for calibration and for non-Gaussian noise.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::info::mean_outer_with_stderr;
use crate::linalg;
use crate::noise::NoiseModel;
use crate::rng::{substream, StreamDomain};

/// Calibrated scale of the complex-form FIM against the real-composite
/// oracle for circular noise.
pub const COMPLEX_FIM_SCALE: f64 = 2.0;

/// Training samples `s_{1-m}, …, s_{n-1}` (prefix included explicitly).
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSequence {
    samples: Vec<Complex64>,
    n: usize,
    m: usize,
}

impl TrainingSequence {
    pub fn new(samples: Vec<Complex64>, n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidParameter(
                "training sequence needs n >= 1 and m >= 1".into(),
            ));
        }
        if samples.len() != n + m - 1 {
            return Err(Error::DimensionMismatch(format!(
                "training sequence needs n+m-1 = {} samples, got {}",
                n + m - 1,
                samples.len()
            )));
        }
        if samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(Error::InvalidParameter("training samples must be finite".into()));
        }
        let seq = TrainingSequence { samples, n, m };
        if !(seq.power() > 0.0) {
            return Err(Error::InvalidParameter("training sequence has zero power".into()));
        }
        Ok(seq)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Sample `s_j` for `j` in `1-m ..= n-1`.
    pub fn sample(&self, j: i64) -> Complex64 {
        let idx = j + self.m as i64 - 1;
        self.samples[idx as usize]
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    /// Mean power over all stored samples.
    pub fn power(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}

/// Frequency offset and channel taps.
#[derive(Clone, Debug)]
pub struct ChannelParams {
    pub omega0: f64,
    pub taps: DVector<Complex64>,
}

impl ChannelParams {
    pub fn new(omega0: f64, taps: DVector<Complex64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidParameter("channel needs at least one tap".into()));
        }
        Ok(ChannelParams { omega0, taps })
    }

    pub fn m(&self) -> usize {
        self.taps.len()
    }

    /// Length of `θ = [ω₀, h_R, h_I]`.
    pub fn theta_len(&self) -> usize {
        2 * self.m() + 1
    }
}

/// A complete training-model instance.
#[derive(Clone, Debug)]
pub struct ChannelSpec {
    pub seq: TrainingSequence,
    pub params: ChannelParams,
    /// Noise model on the real-composite space of dimension `2n`.
    pub noise: NoiseModel,
    /// Observation-side real-composite transform applied to the stacked
    /// signal and noise (used by whitening). `None` means identity.
    pub transform: Option<DMatrix<f64>>,
}

impl ChannelSpec {
    pub fn new(seq: TrainingSequence, params: ChannelParams, noise: NoiseModel) -> Result<Self> {
        if params.m() != seq.m() {
            return Err(Error::DimensionMismatch(format!(
                "sequence expects m = {}, taps have m = {}",
                seq.m(),
                params.m()
            )));
        }
        if noise.dim() != 2 * seq.n() {
            return Err(Error::DimensionMismatch(format!(
                "noise dimension {} but real-composite space has dimension {}",
                noise.dim(),
                2 * seq.n()
            )));
        }
        Ok(ChannelSpec { seq, params, noise, transform: None })
    }

    pub fn n(&self) -> usize {
        self.seq.n()
    }

    pub fn m(&self) -> usize {
        self.seq.m()
    }
}

/// Toeplitz training matrix `S[j,k] = s_{j-k}`, `n × m`.
pub fn build_toeplitz_s(seq: &TrainingSequence) -> DMatrix<Complex64> {
    DMatrix::from_fn(seq.n(), seq.m(), |j, k| seq.sample(j as i64 - k as i64))
}

/// Diagonal phase matrix `diag(1, e^{iω}, …, e^{i(n-1)ω})`.
pub fn build_phase_matrix(omega0: f64, n: usize) -> DMatrix<Complex64> {
    DMatrix::from_diagonal(&phase_diagonal(omega0, n))
}

fn phase_diagonal(omega0: f64, n: usize) -> DVector<Complex64> {
    DVector::from_iterator(
        n,
        (0..n).map(|j| Complex64::from_polar(1.0, omega0 * j as f64)),
    )
}

/// Noise-free signal mean `ξ_θ = X_ω S h`.
pub fn signal_mean(spec: &ChannelSpec) -> DVector<Complex64> {
    signal_mean_parts(&spec.seq, &spec.params)
}

pub(crate) fn signal_mean_parts(
    seq: &TrainingSequence,
    params: &ChannelParams,
) -> DVector<Complex64> {
    let s = build_toeplitz_s(seq);
    let sh = s * &params.taps;
    let phases = phase_diagonal(params.omega0, seq.n());
    DVector::from_iterator(seq.n(), sh.iter().zip(phases.iter()).map(|(v, p)| v * p))
}

/// Complex parameter Jacobian, `(2m+1) × n`, rows ordered `[ω₀, h_R, h_I]`:
/// the ω₀ row is `i·D·ξ` with `D = diag(0..n-1)`, the tap rows are
/// `X_ω S e_k` and `i·X_ω S e_k`.
pub fn jacobian(spec: &ChannelSpec) -> DMatrix<Complex64> {
    jacobian_parts(&spec.seq, &spec.params)
}

pub(crate) fn jacobian_parts(
    seq: &TrainingSequence,
    params: &ChannelParams,
) -> DMatrix<Complex64> {
    let n = seq.n();
    let m = seq.m();
    let s = build_toeplitz_s(seq);
    let phases = phase_diagonal(params.omega0, n);
    let xi = signal_mean_parts(seq, params);
    let i_unit = Complex64::new(0.0, 1.0);

    let mut jac = DMatrix::zeros(2 * m + 1, n);
    for j in 0..n {
        jac[(0, j)] = i_unit * (j as f64) * xi[j];
    }
    for k in 0..m {
        for j in 0..n {
            let v = phases[j] * s[(j, k)];
            jac[(1 + k, j)] = v;
            jac[(1 + m + k, j)] = i_unit * v;
        }
    }
    jac
}

/// Real-composite Jacobian `(2m+1) × 2n`: each complex row `[Re | Im]`,
/// right-multiplied by the spec's observation transform when present.
pub fn real_jacobian(spec: &ChannelSpec) -> DMatrix<f64> {
    let jac = jacobian(spec);
    let (rows, n) = (jac.nrows(), jac.ncols());
    let mut real = DMatrix::zeros(rows, 2 * n);
    for r in 0..rows {
        for c in 0..n {
            real[(r, c)] = jac[(r, c)].re;
            real[(r, n + c)] = jac[(r, c)].im;
        }
    }
    match &spec.transform {
        Some(t) => real * t.transpose(),
        None => real,
    }
}

/// Stack a complex vector as `[Re; Im]`.
pub fn to_real_composite(v: &DVector<Complex64>) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

/// Inverse of [`to_real_composite`].
pub fn complex_from_composite(x: &DVector<f64>) -> DVector<Complex64> {
    let n = x.len() / 2;
    DVector::from_fn(n, |i, _| Complex64::new(x[i], x[n + i]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrlbMethod {
    PaperComplexForm,
    RealComposite,
}

impl CrlbMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            CrlbMethod::PaperComplexForm => "paper_complex_form",
            CrlbMethod::RealComposite => "real_composite",
        }
    }
}

/// FIM of `θ` with conditioning diagnostics and, when nonsingular, the
/// per-parameter CRLB diagonal. Singular information matrices report their
/// nullspace instead of a silently pseudo-inverted CRLB.
#[derive(Clone, Debug)]
pub struct CrlbReport {
    pub fim: DMatrix<f64>,
    /// Per-entry Monte Carlo standard errors; `None` on exact routes.
    pub fim_stderr: Option<DMatrix<f64>>,
    pub crlb: Option<DVector<f64>>,
    /// Basis of the (numerical) nullspace when the FIM is singular.
    pub nullspace: Option<DMatrix<f64>>,
    pub condition_number: f64,
    pub method: CrlbMethod,
}

const SINGULARITY_RTOL: f64 = 1e-12;

impl CrlbReport {
    fn from_fim(fim: DMatrix<f64>, fim_stderr: Option<DMatrix<f64>>, method: CrlbMethod) -> Self {
        let sym = linalg::symmetrize(&fim);
        let eig = sym.clone().symmetric_eigen();
        let lam_max = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
        let lam_min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let threshold = lam_max * SINGULARITY_RTOL;
        let singular = lam_max <= 0.0 || lam_min <= threshold;
        if singular {
            let null_cols: Vec<usize> = eig
                .eigenvalues
                .iter()
                .enumerate()
                .filter(|(_, &ev)| ev <= threshold)
                .map(|(j, _)| j)
                .collect();
            let mut nullspace = DMatrix::zeros(sym.nrows(), null_cols.len());
            for (out, &j) in null_cols.iter().enumerate() {
                nullspace.set_column(out, &eig.eigenvectors.column(j));
            }
            CrlbReport {
                fim: sym,
                fim_stderr,
                crlb: None,
                nullspace: Some(nullspace),
                condition_number: f64::INFINITY,
                method,
            }
        } else {
            let k = sym.nrows();
            let mut crlb = DVector::zeros(k);
            for i in 0..k {
                let mut acc = 0.0;
                for j in 0..k {
                    let u = eig.eigenvectors[(i, j)];
                    acc += u * u / eig.eigenvalues[j];
                }
                crlb[i] = acc;
            }
            CrlbReport {
                fim: sym,
                fim_stderr,
                crlb: Some(crlb),
                nullspace: None,
                condition_number: lam_max / lam_min,
                method,
            }
        }
    }

    /// Aggregate Frobenius standard error, zero on exact routes.
    pub fn aggregate_stderr(&self) -> f64 {
        self.fim_stderr.as_ref().map_or(0.0, |m| m.norm())
    }
}

/// Complex-form FIM `c · Re[∇ξ J ∇ξᴴ]` for a Hermitian noise FIM `J`
/// (`n × n`). Refuses specs carrying a real-composite transform, which the
/// complex form cannot represent.
pub fn fim_theta(spec: &ChannelSpec, j_w: &DMatrix<Complex64>) -> Result<CrlbReport> {
    if spec.transform.is_some() {
        return Err(Error::InvalidParameter(
            "complex-form FIM does not support real-composite transforms; use fim_theta_real".into(),
        ));
    }
    let n = spec.n();
    if j_w.nrows() != n || j_w.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "noise FIM is {}x{}, expected {n}x{n}",
            j_w.nrows(),
            j_w.ncols()
        )));
    }
    if !linalg::is_hermitian(j_w, 1e-9) {
        return Err(Error::InvalidParameter("noise FIM must be Hermitian".into()));
    }
    let jac = jacobian(spec);
    let prod = &jac * j_w * jac.adjoint();
    let fim = prod.map(|z| z.re) * COMPLEX_FIM_SCALE;
    Ok(CrlbReport::from_fim(fim, None, CrlbMethod::PaperComplexForm))
}

/// Real-composite FIM `∇x̃ J ∇x̃ᵀ` for a noise FIM on the `2n` space.
pub fn fim_theta_real(spec: &ChannelSpec, j_w: &DMatrix<f64>) -> Result<CrlbReport> {
    let d = 2 * spec.n();
    if j_w.nrows() != d || j_w.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "real-composite noise FIM is {}x{}, expected {d}x{d}",
            j_w.nrows(),
            j_w.ncols()
        )));
    }
    let jac = real_jacobian(spec);
    let fim = &jac * j_w * jac.transpose();
    Ok(CrlbReport::from_fim(fim, None, CrlbMethod::RealComposite))
}

/// Monte Carlo FIM on the real-composite space: average outer products of
/// the parameter score `s(θ) = −∇x̃ · s_w(w̃)`. Ground truth for convention
/// calibration and for non-Gaussian noise.
pub fn fim_theta_oracle(spec: &ChannelSpec, seed: u64, count: usize) -> Result<CrlbReport> {
    if count < 1_000 {
        return Err(Error::InvalidParameter(format!(
            "fim_theta_oracle needs count >= 1000, got {count}"
        )));
    }
    let jac = real_jacobian(spec);
    let dim = spec.noise.dim();
    let raw = spec.noise.sample_raw(seed, StreamDomain::OracleDraw, count);
    let scores: Vec<DVector<f64>> = raw
        .par_chunks(dim)
        .enumerate()
        .map(|(i, row)| {
            let s_w = spec.noise.score_slice(row);
            if s_w.iter().any(|v| !v.is_finite()) {
                Err(Error::NonFiniteScore { index: i })
            } else {
                Ok(-(&jac * s_w))
            }
        })
        .collect::<Result<_>>()?;
    let (mean, stderr) = mean_outer_with_stderr(&scores, jac.nrows());
    Ok(CrlbReport::from_fim(
        linalg::symmetrize(&mean),
        Some(stderr),
        CrlbMethod::RealComposite,
    ))
}

/// Distribution over training sequences for the random-signal FIM.
#[derive(Clone, Debug)]
pub enum SeqDistribution {
    PointMass(TrainingSequence),
    /// Unit-modulus samples with i.i.d. uniform phases.
    RandomPsk { n: usize, m: usize },
    /// i.i.d. ±1 samples.
    RandomBinary { n: usize, m: usize },
}

impl SeqDistribution {
    pub fn draw(&self, seed: u64, index: u64) -> TrainingSequence {
        match self {
            SeqDistribution::PointMass(seq) => seq.clone(),
            SeqDistribution::RandomPsk { n, m } => {
                let mut rng = substream(seed, StreamDomain::SequenceDraw, index);
                let len = n + m - 1;
                let samples = (0..len)
                    .map(|_| {
                        use rand::Rng;
                        let phase: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
                        Complex64::from_polar(1.0, phase)
                    })
                    .collect();
                TrainingSequence::new(samples, *n, *m).expect("unit-modulus sequence is valid")
            }
            SeqDistribution::RandomBinary { n, m } => {
                let mut rng = substream(seed, StreamDomain::SequenceDraw, index);
                let len = n + m - 1;
                let samples = (0..len)
                    .map(|_| {
                        use rand::Rng;
                        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                        Complex64::new(sign, 0.0)
                    })
                    .collect();
                TrainingSequence::new(samples, *n, *m).expect("binary sequence is valid")
            }
        }
    }
}

/// Expected complex-form FIM over a sequence distribution. A point mass
/// degenerates to the single [`fim_theta`] term exactly.
pub fn fim_theta_expected(
    dist: &SeqDistribution,
    params: &ChannelParams,
    j_w: &DMatrix<Complex64>,
    draws: usize,
    seed: u64,
) -> Result<CrlbReport> {
    let single = |seq: TrainingSequence| -> Result<DMatrix<f64>> {
        if params.m() != seq.m() {
            return Err(Error::DimensionMismatch(format!(
                "sequence expects m = {}, taps have m = {}",
                seq.m(),
                params.m()
            )));
        }
        let jac = jacobian_parts(&seq, params);
        let prod = &jac * j_w * jac.adjoint();
        Ok(prod.map(|z| z.re) * COMPLEX_FIM_SCALE)
    };

    if let SeqDistribution::PointMass(seq) = dist {
        let fim = single(seq.clone())?;
        let k = fim.nrows();
        return Ok(CrlbReport::from_fim(
            fim,
            Some(DMatrix::zeros(k, k)),
            CrlbMethod::PaperComplexForm,
        ));
    }
    if draws == 0 {
        return Err(Error::InvalidParameter("fim_theta_expected needs draws >= 1".into()));
    }
    let k = params.theta_len();
    let mut mean = DMatrix::zeros(k, k);
    let mut meansq = DMatrix::zeros(k, k);
    for d in 0..draws {
        let fim = single(dist.draw(seed, d as u64))?;
        for i in 0..k {
            for j in 0..k {
                mean[(i, j)] += fim[(i, j)];
                meansq[(i, j)] += fim[(i, j)] * fim[(i, j)];
            }
        }
    }
    mean /= draws as f64;
    meansq /= draws as f64;
    let stderr = DMatrix::from_fn(k, k, |i, j| {
        if draws < 2 {
            return 0.0;
        }
        let var = (meansq[(i, j)] - mean[(i, j)] * mean[(i, j)]).max(0.0);
        (var / (draws as f64 - 1.0)).sqrt()
    });
    Ok(CrlbReport::from_fim(mean, Some(stderr), CrlbMethod::PaperComplexForm))
}

/// The minimum-eigenvalue FIM bound: `λ_min(J) · Re[∇ξ ∇ξᴴ]`.
#[derive(Clone, Debug)]
pub struct LambdaMinBound {
    pub lambda_min: f64,
}

/// Smallest eigenvalue of a Hermitian PSD noise FIM, plus a factory for the
/// bounded FIM it induces.
pub fn lambda_min_bound(j_wg: &DMatrix<Complex64>) -> Result<LambdaMinBound> {
    if !linalg::is_hermitian(j_wg, 1e-9) {
        return Err(Error::InvalidParameter("noise FIM must be Hermitian".into()));
    }
    Ok(LambdaMinBound {
        lambda_min: linalg::herm_eigmin(j_wg),
    })
}

impl LambdaMinBound {
    /// `λ_min · Re[∇ξ ∇ξᴴ]` for the given spec.
    pub fn bounded_fim(&self, spec: &ChannelSpec) -> DMatrix<f64> {
        let jac = real_jacobian(spec);
        (&jac * jac.transpose()) * self.lambda_min
    }

    pub fn bounded_report(&self, spec: &ChannelSpec) -> CrlbReport {
        CrlbReport::from_fim(self.bounded_fim(spec), None, CrlbMethod::RealComposite)
    }
}

/// Whiten a Gaussian-noise spec: left-multiply the real-composite model by
/// `Σ^{-1/2}` so the resulting noise is white with identity covariance. The
/// CRLB is invariant under this known invertible transform. Non-Gaussian
/// noise is refused: decorrelation would not make it white in distribution.
pub fn whiten(spec: &ChannelSpec) -> Result<ChannelSpec> {
    if !spec.noise.is_gaussian() {
        return Err(Error::InvalidParameter(format!(
            "whitening requires Gaussian noise with known covariance, got {}",
            spec.noise.label()
        )));
    }
    let sigma = spec.noise.covariance();
    let d = sigma.nrows();
    if linalg::max_abs(&(sigma - DMatrix::identity(d, d))) <= 1e-12 {
        // Already white: the spec is returned unchanged.
        return Ok(spec.clone());
    }
    let t = linalg::inverse_sqrt_spd(sigma, "noise covariance")?;
    let combined = match &spec.transform {
        Some(prev) => &t * prev,
        None => t,
    };
    Ok(ChannelSpec {
        seq: spec.seq.clone(),
        params: spec.params.clone(),
        noise: NoiseModel::gaussian(&DMatrix::identity(d, d))?,
        transform: Some(combined),
    })
}

/// Complex covariance `Σ_c = E[w wᴴ]` of a real-composite noise model,
/// together with the circularity defect `‖Σ_RR − Σ_II‖_F + ‖Σ_RI + Σ_IR‖_F`
/// (zero iff the pseudo-covariance vanishes).
pub fn complex_covariance(noise: &NoiseModel) -> Result<(DMatrix<Complex64>, f64)> {
    let d = noise.dim();
    if d % 2 != 0 {
        return Err(Error::DimensionMismatch(format!(
            "real-composite noise needs even dimension, got {d}"
        )));
    }
    let n = d / 2;
    let cov = noise.covariance();
    let rr = cov.view((0, 0), (n, n));
    let ri = cov.view((0, n), (n, n));
    let ir = cov.view((n, 0), (n, n));
    let ii = cov.view((n, n), (n, n));
    let sigma_c = DMatrix::from_fn(n, n, |i, j| {
        Complex64::new(rr[(i, j)] + ii[(i, j)], ir[(i, j)] - ri[(i, j)])
    });
    // Pseudo-covariance components: (Σ_RR − Σ_II) + i(Σ_RI + Σ_IR).
    let defect = (rr - ii).norm() + (ri + ir).norm();
    Ok((sigma_c, defect))
}

/// Real-composite covariance of circular complex noise with Hermitian
/// complex covariance `Σ_c`: `½ [[Re Σc, −Im Σc], [Im Σc, Re Σc]]`.
pub fn circular_composite_covariance(sigma_c: &DMatrix<Complex64>) -> Result<DMatrix<f64>> {
    if !linalg::is_hermitian(sigma_c, 1e-10) {
        return Err(Error::InvalidParameter("complex covariance must be Hermitian".into()));
    }
    let n = sigma_c.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = sigma_c[(i, j)];
            out[(i, j)] = 0.5 * z.re;
            out[(n + i, n + j)] = 0.5 * z.re;
            out[(i, n + j)] = -0.5 * z.im;
            out[(n + i, j)] = 0.5 * z.im;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ones_seq(n: usize, m: usize) -> TrainingSequence {
        TrainingSequence::new(vec![c(1.0, 0.0); n + m - 1], n, m).unwrap()
    }

    fn white_circular_noise(n: usize) -> NoiseModel {
        // Unit variance per complex sample.
        NoiseModel::gaussian(&(DMatrix::identity(2 * n, 2 * n) * 0.5)).unwrap()
    }

    #[test]
    fn toeplitz_constant_sequence() {
        let s = build_toeplitz_s(&ones_seq(3, 2));
        assert_eq!(s.nrows(), 3);
        assert_eq!(s.ncols(), 2);
        assert!(s.iter().all(|z| (z - c(1.0, 0.0)).norm() == 0.0));
    }

    #[test]
    fn toeplitz_unit_impulse() {
        // Impulse at index 0: prefix sample s_{-1} = 0, s_0 = 1, rest 0.
        let seq =
            TrainingSequence::new(vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)], 3, 2)
                .unwrap();
        let s = build_toeplitz_s(&seq);
        assert_eq!(s.column(0).iter().map(|z| z.re).collect::<Vec<_>>(), vec![1.0, 0.0, 0.0]);
        assert_eq!(s.column(1).iter().map(|z| z.re).collect::<Vec<_>>(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn toeplitz_index_bookkeeping() {
        // (s_{-1}, s_0, s_1, s_2) = (4, 1, 2, 3), n = 3, m = 2.
        let seq = TrainingSequence::new(
            vec![c(4.0, 0.0), c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)],
            3,
            2,
        )
        .unwrap();
        let s = build_toeplitz_s(&seq);
        let rows: Vec<(f64, f64)> = (0..3).map(|j| (s[(j, 0)].re, s[(j, 1)].re)).collect();
        assert_eq!(rows, vec![(1.0, 4.0), (2.0, 1.0), (3.0, 2.0)]);
    }

    #[test]
    fn phase_matrix_values() {
        let x = build_phase_matrix(0.0, 3);
        assert!((x - DMatrix::identity(3, 3)).iter().all(|z| z.norm() == 0.0));

        let x = build_phase_matrix(std::f64::consts::FRAC_PI_2, 4);
        let expected = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        for (j, e) in expected.iter().enumerate() {
            assert!((x[(j, j)] - e).norm() < 1e-12);
        }

        let x = build_phase_matrix(1.2345, 5);
        for j in 0..5 {
            assert_relative_eq!(x[(j, j)].norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn signal_mean_basics() {
        // h = e1 at omega = 0 picks out column 0 of S.
        let seq = TrainingSequence::new(
            vec![c(4.0, 0.0), c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)],
            3,
            2,
        )
        .unwrap();
        let params = ChannelParams::new(
            0.0,
            DVector::from_column_slice(&[c(1.0, 0.0), c(0.0, 0.0)]),
        )
        .unwrap();
        let spec = ChannelSpec::new(seq.clone(), params, white_circular_noise(3)).unwrap();
        let xi = signal_mean(&spec);
        let s = build_toeplitz_s(&seq);
        for j in 0..3 {
            assert!((xi[j] - s[(j, 0)]).norm() < 1e-15);
        }
    }

    #[test]
    fn signal_norm_invariant_under_omega() {
        let seq = ones_seq(4, 2);
        let taps = DVector::from_column_slice(&[c(0.7, 0.1), c(-0.2, 0.4)]);
        let norm_at = |omega: f64| {
            let params = ChannelParams::new(omega, taps.clone()).unwrap();
            signal_mean_parts(&seq, &params).norm()
        };
        assert_relative_eq!(norm_at(0.0), norm_at(1.1), epsilon = 1e-12);
    }

    #[test]
    fn jacobian_hand_example() {
        // omega = 0, m = 1, all-ones, n = 2, h = 1: rows (0, i), (1, 1), (i, i).
        let seq = ones_seq(2, 1);
        let params = ChannelParams::new(0.0, DVector::from_column_slice(&[c(1.0, 0.0)])).unwrap();
        let spec = ChannelSpec::new(seq, params, white_circular_noise(2)).unwrap();
        let jac = jacobian(&spec);
        let expected = [
            [c(0.0, 0.0), c(0.0, 1.0)],
            [c(1.0, 0.0), c(1.0, 0.0)],
            [c(0.0, 1.0), c(0.0, 1.0)],
        ];
        for r in 0..3 {
            for cidx in 0..2 {
                assert!(
                    (jac[(r, cidx)] - expected[r][cidx]).norm() < 1e-14,
                    "entry ({r},{cidx})"
                );
            }
        }
    }

    #[test]
    fn jacobian_zero_taps_zero_omega_row() {
        let seq = ones_seq(3, 2);
        let params = ChannelParams::new(
            0.4,
            DVector::from_column_slice(&[c(0.0, 0.0), c(0.0, 0.0)]),
        )
        .unwrap();
        let spec = ChannelSpec::new(seq, params, white_circular_noise(3)).unwrap();
        let jac = jacobian(&spec);
        assert!(jac.row(0).iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let seq = SeqDistribution::RandomPsk { n: 6, m: 2 }.draw(77, 0);
        let taps = DVector::from_column_slice(&[c(0.8, -0.3), c(0.2, 0.5)]);
        let omega = 0.37;
        let params = ChannelParams::new(omega, taps.clone()).unwrap();
        let jac = jacobian_parts(&seq, &params);
        let h = 1e-6;
        let theta_len = params.theta_len();
        let m = 2;
        let mut worst = 0.0f64;
        for p in 0..theta_len {
            let perturb = |delta: f64| {
                let mut om = omega;
                let mut t = taps.clone();
                if p == 0 {
                    om += delta;
                } else if p <= m {
                    t[p - 1] += c(delta, 0.0);
                } else {
                    t[p - 1 - m] += c(0.0, delta);
                }
                signal_mean_parts(&seq, &ChannelParams::new(om, t).unwrap())
            };
            let plus = perturb(h);
            let minus = perturb(-h);
            for j in 0..seq.n() {
                let fd = (plus[j] - minus[j]) / (2.0 * h);
                worst = worst.max((fd - jac[(p, j)]).norm());
            }
        }
        assert!(worst <= 1e-6, "worst deviation {worst}");
    }

    #[test]
    fn fim_theta_hand_example() {
        // Circular white Gaussian, unit variance per complex sample,
        // n = 2, m = 1, all-ones sequence, omega = 0, h = 1.
        let seq = ones_seq(2, 1);
        let params = ChannelParams::new(0.0, DVector::from_column_slice(&[c(1.0, 0.0)])).unwrap();
        let spec = ChannelSpec::new(seq, params, white_circular_noise(2)).unwrap();
        let report = fim_theta(&spec, &DMatrix::identity(2, 2)).unwrap();
        let base = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 1.0, 0.0, 2.0, 0.0, 1.0, 0.0, 2.0]);
        let ratio = report.fim[(0, 0)] / base[(0, 0)];
        assert!(
            linalg::max_abs(&(&report.fim - base * ratio)) < 1e-9,
            "FIM not proportional to the hand-derived form"
        );
        let crlb = report.crlb.as_ref().unwrap();
        let crlb_base = [2.0, 0.5, 1.0];
        let cr_ratio = crlb[0] / crlb_base[0];
        for i in 0..3 {
            assert!((crlb[i] - crlb_base[i] * cr_ratio).abs() < 1e-9, "crlb[{i}]");
        }
    }

    #[test]
    fn zero_taps_make_fim_singular() {
        let seq = ones_seq(3, 1);
        let params = ChannelParams::new(0.1, DVector::from_column_slice(&[c(0.0, 0.0)])).unwrap();
        let spec = ChannelSpec::new(seq, params, white_circular_noise(3)).unwrap();
        let report = fim_theta(&spec, &DMatrix::identity(3, 3)).unwrap();
        assert!(report.crlb.is_none());
        assert!(report.condition_number.is_infinite());
        let null = report.nullspace.unwrap();
        assert!(null.ncols() >= 1);
        // The unidentifiable direction is the frequency offset.
        assert!(null.column(0)[0].abs() > 0.9);
    }

    #[test]
    fn oracle_matches_complex_form_for_circular_gaussian() {
        let seq = SeqDistribution::RandomPsk { n: 8, m: 2 }.draw(5, 1);
        let taps = DVector::from_column_slice(&[c(0.9, 0.2), c(-0.4, 0.3)]);
        let params = ChannelParams::new(-0.8, taps).unwrap();
        let spec = ChannelSpec::new(seq, params, white_circular_noise(8)).unwrap();
        let exact = fim_theta(&spec, &DMatrix::identity(8, 8)).unwrap();
        let oracle = fim_theta_oracle(&spec, 31, 20_000).unwrap();
        let gap = (&oracle.fim - &exact.fim).norm();
        assert!(
            gap <= 3.0 * oracle.aggregate_stderr(),
            "gap {gap} vs stderr {}",
            oracle.aggregate_stderr()
        );
    }

    #[test]
    fn expected_fim_point_mass_equals_fim_theta() {
        let seq = ones_seq(2, 1);
        let params = ChannelParams::new(0.0, DVector::from_column_slice(&[c(1.0, 0.0)])).unwrap();
        let spec = ChannelSpec::new(seq.clone(), params.clone(), white_circular_noise(2)).unwrap();
        let j = DMatrix::identity(2, 2);
        let direct = fim_theta(&spec, &j).unwrap();
        let expected = fim_theta_expected(&SeqDistribution::PointMass(seq), &params, &j, 10, 0).unwrap();
        assert!(linalg::max_abs(&(&direct.fim - &expected.fim)) < 1e-14);
    }

    #[test]
    fn expected_fim_random_binary_is_psd_with_stderr() {
        let params = ChannelParams::new(
            0.2,
            DVector::from_column_slice(&[c(0.7, 0.0), c(0.0, 0.5)]),
        )
        .unwrap();
        let j = DMatrix::identity(8, 8);
        let report = fim_theta_expected(
            &SeqDistribution::RandomBinary { n: 8, m: 2 },
            &params,
            &j,
            1_000,
            3,
        )
        .unwrap();
        assert!(linalg::sym_eigmin(&report.fim) >= -1e-12);
        assert!(report.aggregate_stderr() > 0.0);
        assert!(linalg::max_abs(&(&report.fim - report.fim.transpose())) < 1e-12);
    }

    #[test]
    fn lambda_min_bound_values_and_ordering() {
        let j = DMatrix::from_diagonal(&DVector::from_column_slice(&[
            c(1.0, 0.0),
            c(0.25, 0.0),
        ]));
        let bound = lambda_min_bound(&j).unwrap();
        assert_relative_eq!(bound.lambda_min, 0.25, epsilon = 1e-12);

        let seq = SeqDistribution::RandomPsk { n: 8, m: 2 }.draw(13, 0);
        let taps = DVector::from_column_slice(&[c(0.6, -0.1), c(0.3, 0.2)]);
        let params = ChannelParams::new(0.5, taps).unwrap();
        let spec = ChannelSpec::new(seq, params, white_circular_noise(8)).unwrap();

        // At J = I the bounded FIM is exactly Re[∇ξ ∇ξᴴ].
        let eye_bound = lambda_min_bound(&DMatrix::identity(8, 8)).unwrap();
        let bounded = eye_bound.bounded_fim(&spec);
        let jac = jacobian(&spec);
        let gram = (&jac * jac.adjoint()).map(|z| z.re);
        assert!(linalg::max_abs(&(&bounded - gram)) < 1e-12);

        // And fim_theta dominates the bounded FIM.
        let full = fim_theta(&spec, &DMatrix::identity(8, 8)).unwrap();
        assert!(linalg::sym_eigmin(&(&full.fim - &bounded)) >= -1e-9);
    }

    #[test]
    fn whiten_preserves_crlb_and_rejects_non_gaussian() {
        let seq = SeqDistribution::RandomPsk { n: 6, m: 2 }.draw(17, 0);
        let taps = DVector::from_column_slice(&[c(0.8, 0.1), c(-0.3, 0.4)]);
        let params = ChannelParams::new(0.25, taps).unwrap();

        // Colored Gaussian composite covariance.
        let mut a = DMatrix::identity(12, 12);
        for i in 1..12 {
            a[(i, i - 1)] = 0.4;
            a[(i, i)] = 1.0 + 0.05 * i as f64;
        }
        let sigma = &a * a.transpose();
        let noise = NoiseModel::gaussian(&sigma).unwrap();
        let spec = ChannelSpec::new(seq.clone(), params.clone(), noise).unwrap();

        let original = fim_theta_real(&spec, spec.noise.precision()).unwrap();
        let whitened = whiten(&spec).unwrap();
        assert!(linalg::max_abs(
            &(whitened.noise.covariance() - DMatrix::identity(12, 12))
        ) < 1e-12);
        let after = fim_theta_real(&whitened, whitened.noise.precision()).unwrap();
        let (c0, c1) = (original.crlb.unwrap(), after.crlb.unwrap());
        for i in 0..c0.len() {
            assert!(
                ((c0[i] - c1[i]) / c0[i]).abs() < 1e-9,
                "parameter {i}: {} vs {}",
                c0[i],
                c1[i]
            );
        }

        // Already-white spec comes back unchanged.
        let white = ChannelSpec::new(
            seq.clone(),
            params.clone(),
            NoiseModel::gaussian(&DMatrix::identity(12, 12)).unwrap(),
        )
        .unwrap();
        let same = whiten(&white).unwrap();
        assert!(same.transform.is_none());
        assert!(linalg::max_abs(&(same.noise.covariance() - white.noise.covariance())) < 1e-12);

        let lap = ChannelSpec::new(
            seq,
            params,
            NoiseModel::iid(crate::noise::BaseFamily::Laplace, 12).unwrap(),
        )
        .unwrap();
        assert!(whiten(&lap).is_err());
    }

    #[test]
    fn complex_covariance_roundtrip() {
        let mut sigma_c = DMatrix::identity(3, 3).map(|v: f64| c(v, 0.0));
        sigma_c[(0, 1)] = c(0.3, 0.2);
        sigma_c[(1, 0)] = c(0.3, -0.2);
        let composite = circular_composite_covariance(&sigma_c).unwrap();
        let noise = NoiseModel::gaussian(&composite).unwrap();
        let (back, defect) = complex_covariance(&noise).unwrap();
        assert!(defect < 1e-12);
        assert!((&back - &sigma_c).iter().all(|z| z.norm() < 1e-12));
    }
}
