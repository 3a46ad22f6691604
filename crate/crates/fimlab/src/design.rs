//! Training-sequence ranking under three levels of noise knowledge.
//!
//! "White" is operationalized through the quantity that actually enters the
//! FIM: a sequence is white when its Toeplitz Gram satisfies `SᴴS ∝ I` over
//! lags `0..m-1`. The [`whiteness_score`] measures the normalized deviation
//! from that.
//!
//! Knowledge levels:
//! * `full_distribution` — FIM from the Monte Carlo score oracle with the
//!   true noise.
//! * `covariance_only` — complex-form FIM with the Gaussian surrogate
//!   `J = Σ_c⁻¹` (the worst noise at that covariance).
//! * `none` — the minimum-eigenvalue bound `λ_min · Re[∇ξ ∇ξᴴ]`. The value
//!   of `λ_min` scales all candidates alike, so the ranking it induces is
//!   independent of the unknown noise; when the true covariance is supplied
//!   (for bound-vs-bound comparisons), `λ_min` is taken from the matched
//!   Gaussian FIM.
//!
//! Worst cases are taken over a finite parameter grid supplied in config;
//! this module compares candidate sets, it does not search sequence space.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::{
    build_toeplitz_s, complex_covariance, fim_theta, fim_theta_oracle, lambda_min_bound,
    ChannelParams, ChannelSpec, CrlbReport, TrainingSequence,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::noise::NoiseModel;
use crate::rng::{derive_seed, substream, StreamDomain};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Knowledge {
    FullDistribution,
    CovarianceOnly,
    NoKnowledge,
}

impl Knowledge {
    pub fn as_str(&self) -> &'static str {
        match self {
            Knowledge::FullDistribution => "full_distribution",
            Knowledge::CovarianceOnly => "covariance_only",
            Knowledge::NoKnowledge => "none",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    /// Worst-case trace of the CRLB (smaller is better).
    TraceCrlb,
    /// Worst-case largest CRLB diagonal entry (smaller is better).
    MaxCrlbEntry,
    /// Worst-case smallest FIM eigenvalue (larger is better).
    MinFimEigmin,
}

impl Objective {
    pub fn as_str(&self) -> &'static str {
        match self {
            Objective::TraceCrlb => "trace_crlb",
            Objective::MaxCrlbEntry => "max_crlb_entry",
            Objective::MinFimEigmin => "min_fim_eigmin",
        }
    }

    /// True when smaller objective values rank first.
    pub fn ascending(&self) -> bool {
        !matches!(self, Objective::MinFimEigmin)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DesignCriterion {
    pub knowledge: Knowledge,
    pub objective: Objective,
}

/// Finite worst-case grid over `(ω₀, h)`.
#[derive(Clone, Debug)]
pub struct ParamsGrid {
    pub omegas: Vec<f64>,
    pub taps: Vec<DVector<Complex64>>,
}

impl ParamsGrid {
    /// Default grid: `ω₀ ∈ {0, ±π/4, ±π/2}` and seeded random unit-norm
    /// tap draws.
    pub fn default_grid(m: usize, tap_draws: usize, seed: u64) -> Self {
        use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
        let omegas = vec![0.0, FRAC_PI_4, -FRAC_PI_4, FRAC_PI_2, -FRAC_PI_2];
        let taps = (0..tap_draws)
            .map(|d| {
                let mut rng = substream(seed, StreamDomain::GridTaps, d as u64);
                let mut h = DVector::from_fn(m, |_, _| {
                    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                });
                let norm = h.norm();
                h /= Complex64::new(norm, 0.0);
                h
            })
            .collect();
        ParamsGrid { omegas, taps }
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, &DVector<Complex64>)> + '_ {
        self.omegas
            .iter()
            .flat_map(move |&w| self.taps.iter().map(move |h| (w, h)))
    }

    pub fn len(&self) -> usize {
        self.omegas.len() * self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `‖SᴴS/n − P·I‖_F / P`; zero iff the sequence is white at lags `0..m-1`.
pub fn whiteness_score(seq: &TrainingSequence) -> f64 {
    let s = build_toeplitz_s(seq);
    let gram = (s.adjoint() * &s) / Complex64::new(seq.n() as f64, 0.0);
    let p = seq.power();
    let eye = DMatrix::<Complex64>::identity(seq.m(), seq.m()) * Complex64::new(p, 0.0);
    (gram - eye).norm() / p
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WhiteKind {
    /// Quadratic-phase (Zadoff–Chu-type) constant-amplitude sequence with a
    /// cyclic prefix; exactly zero autocorrelation sidelobes at all lags.
    Cazac,
    /// Unit-modulus samples with i.i.d. uniform phases.
    RandomPsk,
}

#[derive(Clone, Debug)]
pub struct GeneratedSequence {
    pub seq: TrainingSequence,
    pub whiteness: f64,
    /// Set when the requested construction was unavailable and the
    /// generator fell back to random PSK.
    pub fallback: bool,
}

/// Generate a unit-modulus training sequence of observation length `n` for
/// channel length `m`.
pub fn generate_white_sequence(
    n: usize,
    m: usize,
    kind: WhiteKind,
    seed: u64,
) -> Result<GeneratedSequence> {
    if n < m || m == 0 {
        return Err(Error::InvalidParameter(format!(
            "white sequence generation needs n >= m >= 1, got n={n}, m={m}"
        )));
    }
    match kind {
        WhiteKind::Cazac => match default_cazac_root(n) {
            Some(root) => {
                let seq = cazac_sequence(n, m, root)?;
                let whiteness = whiteness_score(&seq);
                Ok(GeneratedSequence { seq, whiteness, fallback: false })
            }
            None => {
                let mut generated = generate_white_sequence(n, m, WhiteKind::RandomPsk, seed)?;
                generated.fallback = true;
                Ok(generated)
            }
        },
        WhiteKind::RandomPsk => {
            let mut rng = substream(seed, StreamDomain::SequencePhase, 0);
            let samples: Vec<Complex64> = (0..n + m - 1)
                .map(|_| Complex64::from_polar(1.0, rng.gen::<f64>() * std::f64::consts::TAU))
                .collect();
            let seq = TrainingSequence::new(samples, n, m)?;
            let whiteness = whiteness_score(&seq);
            Ok(GeneratedSequence { seq, whiteness, fallback: false })
        }
    }
}

/// Quadratic-phase sequence of length `n` with a cyclic prefix, so the
/// Toeplitz Gram equals the (exactly zero) periodic autocorrelation.
pub fn cazac_sequence(n: usize, m: usize, root: usize) -> Result<TrainingSequence> {
    if n < m || m == 0 {
        return Err(Error::InvalidParameter(format!(
            "cazac sequence needs n >= m >= 1, got n={n}, m={m}"
        )));
    }
    if root == 0 || root >= n.max(2) || gcd(root, n) != 1 {
        return Err(Error::InvalidParameter(format!(
            "cazac root must be in 1..n and coprime with n, got root={root}, n={n}"
        )));
    }
    let body: Vec<Complex64> = (0..n).map(|j| zadoff_chu(j, n, root)).collect();
    let mut samples = Vec::with_capacity(n + m - 1);
    for j in (1..m).rev() {
        samples.push(body[n - j]);
    }
    samples.extend_from_slice(&body);
    TrainingSequence::new(samples, n, m)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Coprime root closest to `n/2`. A cyclic shift of a root-`u` chirp equals
/// a modulation by `u` frequency bins, so with small roots the shifted
/// Toeplitz columns sit on adjacent bins and the frequency-offset
/// derivative nearly falls into their span, wrecking the joint FIM for
/// balanced taps. Mid-range roots keep the columns spectrally separated.
fn default_cazac_root(n: usize) -> Option<usize> {
    (1..n.max(2))
        .filter(|&u| gcd(u, n) == 1)
        .min_by_key(|&u| (2 * u).abs_diff(n))
}

fn zadoff_chu(j: usize, n: usize, root: usize) -> Complex64 {
    let jf = j as f64;
    let arg = if n % 2 == 0 { jf * jf } else { jf * (jf + 1.0) };
    Complex64::from_polar(1.0, -std::f64::consts::PI * root as f64 * arg / n as f64)
}

/// One ranked candidate.
#[derive(Clone, Debug)]
pub struct RankedCandidate {
    pub id: String,
    pub objective: f64,
    /// CRLB diagonal at the worst grid point (empty for the eigenvalue
    /// objective at grid points where only the FIM is formed).
    pub crlb_diag: Vec<f64>,
    pub whiteness: f64,
}

#[derive(Clone, Debug)]
pub struct DesignReport {
    pub ranked: Vec<RankedCandidate>,
    pub winner: String,
    pub criterion: DesignCriterion,
    /// `(candidate id, reason)` for candidates excluded from the ranking.
    pub disqualified: Vec<(String, String)>,
}

#[derive(Clone, Debug)]
pub struct Candidate {
    pub id: String,
    pub seq: TrainingSequence,
}

/// Options for the Monte Carlo branches of sequence evaluation.
#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    pub seed: u64,
    /// Draw count for the full-distribution oracle.
    pub count: usize,
}

struct Evaluation {
    objective: f64,
    worst_crlb: Vec<f64>,
}

/// Worst-case objective of one sequence over the parameter grid.
pub fn evaluate_sequence(
    seq: &TrainingSequence,
    grid: &ParamsGrid,
    noise: &NoiseModel,
    criterion: &DesignCriterion,
    opts: &EvalOptions,
) -> Result<f64> {
    evaluate_internal(seq, grid, noise, criterion, opts).map(|e| e.objective)
}

fn evaluate_internal(
    seq: &TrainingSequence,
    grid: &ParamsGrid,
    noise: &NoiseModel,
    criterion: &DesignCriterion,
    opts: &EvalOptions,
) -> Result<Evaluation> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("parameter grid is empty".into()));
    }
    let (sigma_c, _) = complex_covariance(noise)?;
    let mut worst: Option<f64> = None;
    let mut worst_crlb = Vec::new();
    for (point_idx, (omega, taps)) in grid.points().enumerate() {
        let params = ChannelParams::new(omega, taps.clone())?;
        let spec = ChannelSpec::new(seq.clone(), params, noise.clone())?;
        let report: CrlbReport = match criterion.knowledge {
            Knowledge::FullDistribution => {
                let seed = derive_seed(opts.seed, point_idx as u64);
                fim_theta_oracle(&spec, seed, opts.count)?
            }
            Knowledge::CovarianceOnly => {
                let j = sigma_c
                    .clone()
                    .try_inverse()
                    .ok_or_else(|| Error::SingularMatrix("complex noise covariance".into()))?;
                fim_theta(&spec, &j)?
            }
            Knowledge::NoKnowledge => {
                let j = sigma_c
                    .clone()
                    .try_inverse()
                    .ok_or_else(|| Error::SingularMatrix("complex noise covariance".into()))?;
                lambda_min_bound(&j)?.bounded_report(&spec)
            }
        };
        let (value, crlb_diag) = objective_at_point(&report, criterion.objective, omega)?;
        let replace = match worst {
            None => true,
            Some(w) => {
                if criterion.objective.ascending() {
                    value > w
                } else {
                    value < w
                }
            }
        };
        if replace {
            worst = Some(value);
            worst_crlb = crlb_diag;
        }
    }
    Ok(Evaluation {
        objective: worst.expect("grid checked non-empty"),
        worst_crlb,
    })
}

fn objective_at_point(
    report: &CrlbReport,
    objective: Objective,
    omega: f64,
) -> Result<(f64, Vec<f64>)> {
    match objective {
        Objective::MinFimEigmin => {
            let eig = linalg::sym_eigmin(&report.fim);
            let diag = report.crlb.as_ref().map(|c| c.iter().copied().collect()).unwrap_or_default();
            Ok((eig, diag))
        }
        Objective::TraceCrlb | Objective::MaxCrlbEntry => {
            let crlb = report.crlb.as_ref().ok_or_else(|| {
                Error::Disqualified(format!("singular FIM at grid point omega={omega}"))
            })?;
            let diag: Vec<f64> = crlb.iter().copied().collect();
            let value = match objective {
                Objective::TraceCrlb => diag.iter().sum(),
                _ => diag.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            };
            Ok((value, diag))
        }
    }
}

/// Rank candidates; ties break by whiteness score, then input order. All
/// candidates disqualified is an error.
pub fn compare_designs(
    candidates: &[Candidate],
    criterion: &DesignCriterion,
    grid: &ParamsGrid,
    noise: &NoiseModel,
    opts: &EvalOptions,
) -> Result<DesignReport> {
    if candidates.len() < 2 {
        return Err(Error::InvalidParameter(
            "compare_designs needs at least two candidates".into(),
        ));
    }
    let mut ranked = Vec::new();
    let mut disqualified = Vec::new();
    for (idx, cand) in candidates.iter().enumerate() {
        match evaluate_internal(&cand.seq, grid, noise, criterion, opts) {
            Ok(eval) => ranked.push((idx, RankedCandidate {
                id: cand.id.clone(),
                objective: eval.objective,
                crlb_diag: eval.worst_crlb,
                whiteness: whiteness_score(&cand.seq),
            })),
            Err(Error::Disqualified(reason)) => {
                disqualified.push((cand.id.clone(), reason));
            }
            Err(other) => return Err(other),
        }
    }
    if ranked.is_empty() {
        return Err(Error::Disqualified(
            "all candidates disqualified; no ranking possible".into(),
        ));
    }
    let ascending = criterion.objective.ascending();
    ranked.sort_by(|(ia, a), (ib, b)| {
        let primary = if ascending {
            a.objective.total_cmp(&b.objective)
        } else {
            b.objective.total_cmp(&a.objective)
        };
        primary
            .then(a.whiteness.total_cmp(&b.whiteness))
            .then(ia.cmp(ib))
    });
    let ranked: Vec<RankedCandidate> = ranked.into_iter().map(|(_, r)| r).collect();
    Ok(DesignReport {
        winner: ranked[0].id.clone(),
        ranked,
        criterion: *criterion,
        disqualified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::circular_composite_covariance;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn white_noise_2n(n: usize) -> NoiseModel {
        NoiseModel::gaussian(&(DMatrix::identity(2 * n, 2 * n) * 0.5)).unwrap()
    }

    #[test]
    fn whiteness_of_constant_sequence_is_positive() {
        let seq = TrainingSequence::new(vec![c(1.0, 0.0); 9], 8, 2).unwrap();
        let score = whiteness_score(&seq);
        assert!(score > 0.5, "constant sequence should be far from white, got {score}");
    }

    #[test]
    fn whiteness_zero_for_single_tap() {
        let seq = TrainingSequence::new(vec![c(1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)], 3, 1).unwrap();
        assert!(whiteness_score(&seq) < 1e-12);
    }

    #[test]
    fn spaced_impulses_are_nearly_white() {
        // Impulses every 4 samples with m = 2: shifted columns never
        // overlap, so only the prefix-power normalization keeps the score
        // slightly above zero.
        let n = 16;
        let m = 2;
        let mut samples = vec![c(0.0, 0.0); n + m - 1];
        for k in 0..4 {
            samples[m - 1 + 4 * k] = c(2.0, 0.0);
        }
        let seq = TrainingSequence::new(samples, n, m).unwrap();
        let score = whiteness_score(&seq);
        assert!(score < 0.1, "impulse train score {score}");
        let constant = TrainingSequence::new(vec![c(1.0, 0.0); n + m - 1], n, m).unwrap();
        assert!(score < 0.2 * whiteness_score(&constant));
    }

    #[test]
    fn cazac_root_one_has_zero_autocorrelation_sidelobes() {
        // Length 7, root 1.
        let seq = cazac_sequence(7, 3, 1).unwrap();
        assert!(whiteness_score(&seq) <= 1e-10);
        // Full periodic autocorrelation of the length-7 body at lags 1..6.
        let body: Vec<Complex64> = (0..7).map(|j| seq.sample(j as i64)).collect();
        for lag in 1..7 {
            let acc: Complex64 = (0..7).map(|j| body[j] * body[(j + lag) % 7].conj()).sum();
            assert!(acc.norm() < 1e-10, "lag {lag}: {}", acc.norm());
        }
    }

    #[test]
    fn cazac_generator_is_white_for_any_admitted_root() {
        for (n, m) in [(7usize, 3usize), (16, 2), (12, 2), (5, 1)] {
            let generated = generate_white_sequence(n, m, WhiteKind::Cazac, 0).unwrap();
            assert!(!generated.fallback);
            assert!(
                generated.whiteness <= 1e-10,
                "n={n} m={m} whiteness {}",
                generated.whiteness
            );
            for s in generated.seq.samples() {
                assert!((s.norm() - 1.0).abs() < 1e-12);
            }
        }
        assert!(cazac_sequence(16, 2, 4).is_err(), "root 4 shares a factor with 16");
    }

    #[test]
    fn random_psk_is_unit_modulus() {
        let generated = generate_white_sequence(16, 2, WhiteKind::RandomPsk, 7).unwrap();
        for s in generated.seq.samples() {
            assert!((s.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cazac_even_length_also_white() {
        let generated = generate_white_sequence(16, 2, WhiteKind::Cazac, 0).unwrap();
        assert!(generated.whiteness <= 1e-10);
    }

    #[test]
    fn white_beats_constant_under_no_knowledge() {
        let n = 16;
        let m = 2;
        let grid = ParamsGrid::default_grid(m, 3, 42);
        let noise = white_noise_2n(n);
        let criterion = DesignCriterion {
            knowledge: Knowledge::NoKnowledge,
            objective: Objective::TraceCrlb,
        };
        let opts = EvalOptions { seed: 1, count: 5_000 };
        let white = generate_white_sequence(n, m, WhiteKind::Cazac, 0).unwrap().seq;
        let white_obj = evaluate_sequence(&white, &grid, &noise, &criterion, &opts).unwrap();
        assert!(white_obj.is_finite() && white_obj > 0.0);

        // The constant sequence duplicates Toeplitz columns: singular FIM.
        let ones = TrainingSequence::new(vec![c(1.0, 0.0); n + m - 1], n, m).unwrap();
        match evaluate_sequence(&ones, &grid, &noise, &criterion, &opts) {
            Err(Error::Disqualified(_)) => {}
            other => panic!("expected disqualification, got {other:?}"),
        }
    }

    #[test]
    fn objective_with_identity_j_is_gram_trace() {
        let n = 8;
        let m = 2;
        let white = generate_white_sequence(n, m, WhiteKind::Cazac, 0).unwrap().seq;
        let grid = ParamsGrid {
            omegas: vec![0.3],
            taps: vec![DVector::from_column_slice(&[c(0.8, 0.0), c(0.0, 0.6)])],
        };
        // Unit complex covariance makes J = I, so the bound is Re[∇ξ∇ξᴴ].
        let noise = white_noise_2n(n);
        let criterion = DesignCriterion {
            knowledge: Knowledge::NoKnowledge,
            objective: Objective::TraceCrlb,
        };
        let obj = evaluate_sequence(&white, &grid, &noise, &criterion, &EvalOptions { seed: 0, count: 1_000 })
            .unwrap();

        let params = ChannelParams::new(grid.omegas[0], grid.taps[0].clone()).unwrap();
        let spec = ChannelSpec::new(white, params, noise).unwrap();
        let jac = crate::channel::jacobian(&spec);
        let gram = (&jac * jac.adjoint()).map(|z| z.re);
        let inv = gram.try_inverse().unwrap();
        assert!((obj - inv.trace()).abs() < 1e-9);
    }

    #[test]
    fn global_phase_leaves_objectives_unchanged() {
        let n = 12;
        let m = 2;
        let base = generate_white_sequence(n, m, WhiteKind::RandomPsk, 3).unwrap().seq;
        let rotated = TrainingSequence::new(
            base.samples().iter().map(|s| s * Complex64::from_polar(1.0, 1.1)).collect(),
            n,
            m,
        )
        .unwrap();
        let grid = ParamsGrid::default_grid(m, 2, 5);
        let noise = white_noise_2n(n);
        let opts = EvalOptions { seed: 2, count: 1_000 };
        for objective in [Objective::TraceCrlb, Objective::MaxCrlbEntry, Objective::MinFimEigmin] {
            for knowledge in [Knowledge::CovarianceOnly, Knowledge::NoKnowledge] {
                let criterion = DesignCriterion { knowledge, objective };
                let a = evaluate_sequence(&base, &grid, &noise, &criterion, &opts).unwrap();
                let b = evaluate_sequence(&rotated, &grid, &noise, &criterion, &opts).unwrap();
                assert!(
                    ((a - b) / a).abs() < 1e-9,
                    "{}/{}: {a} vs {b}",
                    knowledge.as_str(),
                    objective.as_str()
                );
            }
        }
    }

    #[test]
    fn modulation_shift_with_compensated_grid_is_invariant() {
        let n = 12;
        let m = 2;
        let delta = 0.35;
        let base = generate_white_sequence(n, m, WhiteKind::RandomPsk, 9).unwrap().seq;
        let shifted = TrainingSequence::new(
            base.samples()
                .iter()
                .enumerate()
                .map(|(idx, s)| {
                    let j = idx as i64 - (m as i64 - 1);
                    s * Complex64::from_polar(1.0, delta * j as f64)
                })
                .collect(),
            n,
            m,
        )
        .unwrap();
        let taps = DVector::from_column_slice(&[c(0.8, 0.1), c(-0.2, 0.55)]);
        let omega = 0.4;
        // Modulating the sequence by e^{i j delta} re-parameterizes
        // (omega, h) -> (omega + delta, h rotated per tap); trace CRLB is
        // invariant under that orthogonal change.
        let compensated_taps = DVector::from_fn(m, |k, _| {
            taps[k] * Complex64::from_polar(1.0, delta * k as f64)
        });
        let noise = white_noise_2n(n);
        let criterion = DesignCriterion {
            knowledge: Knowledge::CovarianceOnly,
            objective: Objective::TraceCrlb,
        };
        let opts = EvalOptions { seed: 0, count: 1_000 };
        let a = evaluate_sequence(
            &base,
            &ParamsGrid { omegas: vec![omega], taps: vec![taps.clone()] },
            &noise,
            &criterion,
            &opts,
        )
        .unwrap();
        let b = evaluate_sequence(
            &shifted,
            &ParamsGrid { omegas: vec![omega - delta], taps: vec![compensated_taps] },
            &noise,
            &criterion,
            &opts,
        )
        .unwrap();
        assert!(((a - b) / a).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn knowledge_levels_are_monotone_bounds() {
        let n = 12;
        let m = 2;
        let seq = generate_white_sequence(n, m, WhiteKind::RandomPsk, 21).unwrap().seq;
        let grid = ParamsGrid::default_grid(m, 2, 31);
        // Colored circular covariance with a Laplace distribution on top.
        let mut sigma_c = DMatrix::<Complex64>::identity(n, n);
        for i in 0..n {
            for j in 0..n {
                sigma_c[(i, j)] = c(0.6f64.powi((i as i32 - j as i32).abs()), 0.0);
            }
        }
        let composite = circular_composite_covariance(&sigma_c).unwrap();
        let shaping = linalg::cholesky_spd(&composite, "composite").unwrap();
        let noise = NoiseModel::shaped(crate::noise::BaseFamily::Laplace, &shaping).unwrap();

        let opts = EvalOptions { seed: 4, count: 60_000 };
        let mut values = Vec::new();
        for knowledge in [
            Knowledge::NoKnowledge,
            Knowledge::CovarianceOnly,
            Knowledge::FullDistribution,
        ] {
            let criterion = DesignCriterion { knowledge, objective: Objective::TraceCrlb };
            values.push(evaluate_sequence(&seq, &grid, &noise, &criterion, &opts).unwrap());
        }
        // CRLBs shrink as knowledge grows; the Monte Carlo leg gets a 2%
        // slack for oracle noise at this count.
        assert!(values[0] >= values[1] * (1.0 - 1e-9), "none {} vs cov {}", values[0], values[1]);
        assert!(values[1] >= values[2] * 0.98, "cov {} vs full {}", values[1], values[2]);
    }

    #[test]
    fn compare_designs_ranks_and_breaks_ties_by_order() {
        let n = 16;
        let m = 2;
        let noise = white_noise_2n(n);
        let grid = ParamsGrid::default_grid(m, 3, 8);
        let criterion = DesignCriterion {
            knowledge: Knowledge::NoKnowledge,
            objective: Objective::TraceCrlb,
        };
        let opts = EvalOptions { seed: 6, count: 1_000 };
        let cazac = generate_white_sequence(n, m, WhiteKind::Cazac, 0).unwrap().seq;
        let candidates = vec![
            Candidate { id: "first".into(), seq: cazac.clone() },
            Candidate { id: "second".into(), seq: cazac },
        ];
        let report = compare_designs(&candidates, &criterion, &grid, &noise, &opts).unwrap();
        assert_eq!(report.winner, "first");
        assert_eq!(report.ranked.len(), 2);
        assert_eq!(report.ranked[0].objective, report.ranked[1].objective);
    }

    #[test]
    fn compare_designs_reports_disqualified() {
        let n = 16;
        let m = 2;
        let noise = white_noise_2n(n);
        let grid = ParamsGrid::default_grid(m, 3, 8);
        let criterion = DesignCriterion {
            knowledge: Knowledge::NoKnowledge,
            objective: Objective::TraceCrlb,
        };
        let opts = EvalOptions { seed: 6, count: 1_000 };
        let candidates = vec![
            Candidate {
                id: "cazac".into(),
                seq: generate_white_sequence(n, m, WhiteKind::Cazac, 0).unwrap().seq,
            },
            Candidate {
                id: "ones".into(),
                seq: TrainingSequence::new(vec![c(1.0, 0.0); n + m - 1], n, m).unwrap(),
            },
            Candidate {
                id: "psk".into(),
                seq: generate_white_sequence(n, m, WhiteKind::RandomPsk, 11).unwrap().seq,
            },
        ];
        let report = compare_designs(&candidates, &criterion, &grid, &noise, &opts).unwrap();
        assert_eq!(report.disqualified.len(), 1);
        assert_eq!(report.disqualified[0].0, "ones");
        assert_eq!(report.winner, "cazac");
    }
}
