//! Joint estimation of (φ, δ): multinomial sampling, maximum likelihood,
//! minimal-residual fits to calibration curves, a two-stage adaptive
//! scheme, and Monte Carlo covariance reports.
//!
//! Every fit runs the same search: a coarse grid over `φ ∈ (−π, π]`,
//! `δ ∈ [0, δ_max]`, then Nelder-Mead refinement from the best few grid
//! cells. All models depend on δ only through `e^{−δ²}`, so the refinement
//! works with `|δ|` capped at `δ_max` and needs no constraint handling.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::sagnac::{
    calibration_scan, mixture_weights, phase_to_hwp1, synthesize_mixed_noisy, uniform_alpha_grid, CalibrationTable,
    DeviceConfig, IntensityRecord, Interpolation,
};
use crate::theory::{crb_covariance, povm_fisher, CovarianceBound, ParamPoint};
use crate::weak::{three_outcome_povm, weak_probabilities_unchecked, MeasurementStrength};

/// Optimum below this δ counts as sitting on the δ = 0 stationary point.
pub const TRAPPED_DELTA: f64 = 1e-3;

/// Wraps an angle into `(−π, π]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = (phi + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Weighted outcome tallies. Weights may be fractional so that normalized
/// intensities can stand in for counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeCounts {
    counts: Vec<f64>,
}

impl OutcomeCounts {
    pub fn new(counts: Vec<f64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidArgument("no outcomes".into()));
        }
        if let Some(bad) = counts.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid count {bad}")));
        }
        if !(counts.iter().sum::<f64>() > 0.0) {
            return Err(Error::InvalidArgument("counts sum to zero".into()));
        }
        Ok(Self { counts })
    }

    pub fn from_integers(counts: &[u64]) -> Result<Self> {
        Self::new(counts.iter().map(|&c| c as f64).collect())
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::InvalidArgument("outcome sets differ".into()));
        }
        Self::new(self.counts.iter().zip(&other.counts).map(|(a, b)| a + b).collect())
    }
}

/// Deterministic per-task seed from a base seed and an index.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Multinomial draw of `shots` outcomes, reproducible per seed.
pub fn sample_outcomes(distribution: &[f64], shots: u64, seed: u64) -> Result<OutcomeCounts> {
    let total: f64 = distribution.iter().sum();
    if !((total - 1.0).abs() <= 1e-8) || distribution.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::NotNormalized(total));
    }
    if shots == 0 {
        return Err(Error::InvalidArgument("need at least one shot".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining = shots;
    let mut mass = 1.0;
    let mut counts = Vec::with_capacity(distribution.len());
    for (i, &p) in distribution.iter().enumerate() {
        let k = if i + 1 == distribution.len() || remaining == 0 {
            remaining
        } else {
            let frac = (p / mass).clamp(0.0, 1.0);
            let draw = Binomial::new(remaining, frac).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            draw.sample(&mut rng)
        };
        counts.push(k as f64);
        remaining -= k;
        mass -= p;
    }
    OutcomeCounts::new(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchDomain {
    pub delta_max: f64,
    pub phi_cells: usize,
    pub delta_cells: usize,
    /// Number of grid cells used as refinement starts.
    pub starts: usize,
}

impl Default for SearchDomain {
    fn default() -> Self {
        Self {
            delta_max: 2.0,
            phi_cells: 60,
            delta_cells: 60,
            starts: 3,
        }
    }
}

impl SearchDomain {
    fn validate(&self) -> Result<()> {
        if !(self.delta_max > 0.0) || self.phi_cells < 2 || self.delta_cells < 2 || self.starts == 0 {
            return Err(Error::InvalidArgument(format!("invalid search domain {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    /// In `(−π, π]`.
    pub phi_hat: f64,
    pub delta_hat: f64,
    pub converged: bool,
    /// Log-likelihood at the optimum; for residual fits, minus half the
    /// residual sum of squares.
    pub log_likelihood: f64,
    /// The optimum sits on the δ = 0 stationary point.
    pub trapped_at_zero: bool,
    /// The optimum sits on the upper δ limit of the search domain.
    pub at_delta_edge: bool,
}

/// Grid search plus multi-start refinement of `objective(φ, δ)`.
fn minimize_over_domain<F>(objective: F, domain: &SearchDomain) -> Result<(f64, f64, f64, bool)>
where
    F: Fn(f64, f64) -> f64,
{
    domain.validate()?;
    let dphi = 2.0 * PI / domain.phi_cells as f64;
    let ddelta = domain.delta_max / (domain.delta_cells - 1) as f64;
    let mut cells: Vec<(f64, f64, f64)> = Vec::with_capacity(domain.phi_cells * domain.delta_cells);
    for i in 0..domain.phi_cells {
        let phi = -PI + (i as f64 + 0.5) * dphi;
        for j in 0..domain.delta_cells {
            let delta = j as f64 * ddelta;
            let v = objective(phi, delta);
            cells.push((if v.is_nan() { f64::INFINITY } else { v }, phi, delta));
        }
    }
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));

    let cap = domain.delta_max;
    let folded = |x: &[f64]| objective(x[0], x[1].abs().min(cap));
    let opts = NelderMeadOptions::default();
    let mut best: Option<(f64, f64, f64, bool)> = None;
    for &(_, phi, delta) in cells.iter().take(domain.starts) {
        let m = nelder_mead(folded, &[phi, delta], &[0.5 * dphi, 0.5 * ddelta.max(1e-3)], &opts);
        let cand = (m.value, wrap_phase(m.x[0]), m.x[1].abs().min(cap), m.converged);
        if best.is_none_or(|b| cand.0 < b.0) {
            best = Some(cand);
        }
    }
    let (value, phi, delta, converged) = best.ok_or(Error::NonIdentifiable)?;
    Ok((phi, delta, value, converged))
}

/// `Σ c_k ln(f_k / p_k)` with `f_k = c_k / N`: the negative log-likelihood
/// shifted so that it vanishes at a perfect fit.
fn divergence(counts: &[f64], total: f64, probs: &[f64]) -> f64 {
    counts
        .iter()
        .zip(probs)
        .filter(|(c, _)| **c > 0.0)
        .map(|(&c, &p)| c * ((c / total).ln() - p.max(1e-300).ln()))
        .sum()
}

fn log_likelihood(counts: &[f64], probs: &[f64]) -> f64 {
    counts
        .iter()
        .zip(probs)
        .filter(|(c, _)| **c > 0.0)
        .map(|(&c, &p)| c * p.max(1e-300).ln())
        .sum()
}

/// Maximum-likelihood fit of an arbitrary outcome model
/// `model(φ, δ, out)` writing probabilities in the order of `counts`.
pub fn fit_model<M>(counts: &OutcomeCounts, model: M, domain: &SearchDomain) -> Result<Estimate>
where
    M: Fn(f64, f64, &mut [f64]),
{
    let c = counts.counts();
    let total = counts.total();
    let n = c.len();
    let objective = |phi: f64, delta: f64| {
        let mut p = [0.0; 8];
        let mut heap;
        let probs: &mut [f64] = if n <= 8 {
            &mut p[..n]
        } else {
            heap = vec![0.0; n];
            &mut heap
        };
        model(phi, delta, probs);
        divergence(c, total, probs)
    };
    let (phi, delta, _, converged) = minimize_over_domain(objective, domain)?;
    let mut probs = vec![0.0; n];
    model(phi, delta, &mut probs);
    Ok(Estimate {
        phi_hat: phi,
        delta_hat: delta,
        converged,
        log_likelihood: log_likelihood(c, &probs),
        trapped_at_zero: delta < TRAPPED_DELTA,
        at_delta_edge: delta >= domain.delta_max - 1e-6,
    })
}

fn require_interior(theta: MeasurementStrength) -> Result<()> {
    if !theta.is_interior() {
        return Err(Error::NonIdentifiable);
    }
    Ok(())
}

/// Maximum-likelihood estimate from four-outcome weak-scheme counts
/// ordered as [`crate::weak::WEAK_OUTCOMES`].
pub fn mle_estimate(counts: &OutcomeCounts, theta: MeasurementStrength, domain: &SearchDomain) -> Result<Estimate> {
    require_interior(theta)?;
    if counts.len() != 4 {
        return Err(Error::InvalidArgument(format!(
            "expected 4 outcomes, got {}",
            counts.len()
        )));
    }
    let t = theta.radians();
    fit_model(
        counts,
        |phi, delta, out| out.copy_from_slice(&weak_probabilities_unchecked(phi, delta, t)),
        domain,
    )
}

/// Maximum-likelihood estimate from the device's three detected channels.
pub fn mle_estimate_three_outcome(
    counts: &OutcomeCounts,
    theta: MeasurementStrength,
    domain: &SearchDomain,
) -> Result<Estimate> {
    require_interior(theta)?;
    if counts.len() != 3 {
        return Err(Error::InvalidArgument(format!(
            "expected 3 outcomes, got {}",
            counts.len()
        )));
    }
    let t = theta.radians();
    fit_model(
        counts,
        |phi, delta, out| {
            let p = weak_probabilities_unchecked(phi, delta, t);
            out[0] = p[0];
            out[1] = p[2];
            out[2] = p[1] + p[3];
        },
        domain,
    )
}

/// Minimal-residual estimate: least-squares match of the measured
/// `(s_z, s_x)` to the signals predicted from the interpolated pure-state
/// calibration mixed with weights `w_±(δ)`.
pub fn residual_estimate(
    record: &IntensityRecord,
    calibration: &CalibrationTable,
    interpolation: Interpolation,
    domain: &SearchDomain,
) -> Result<Estimate> {
    if calibration.is_empty() {
        return Err(Error::EmptyCalibration);
    }
    let measured = record.signals();
    let model = |phi: f64, delta: f64| -> Option<(f64, f64)> {
        let a = calibration.interpolate_with(phase_to_hwp1(phi), interpolation).ok()?;
        let b = calibration
            .interpolate_with(phase_to_hwp1(phi - PI), interpolation)
            .ok()?;
        let (wp, wm) = mixture_weights(delta).ok()?;
        let mixed = IntensityRecord {
            i_pp: wp * a[0] + wm * b[0],
            i_pm: wp * a[1] + wm * b[1],
            i_m: wp * a[2] + wm * b[2],
            output2: None,
        };
        let s = mixed.signals();
        Some((s.s_z, s.s_x))
    };
    let rss = |phi: f64, delta: f64| match model(phi, delta) {
        Some((z, x)) => (measured.s_z - z).powi(2) + (measured.s_x - x).powi(2),
        None => f64::INFINITY,
    };
    let (phi, delta, value, converged) = minimize_over_domain(rss, domain)?;
    Ok(Estimate {
        phi_hat: phi,
        delta_hat: delta,
        converged,
        log_likelihood: -0.5 * value,
        trapped_at_zero: delta < TRAPPED_DELTA,
        at_delta_edge: delta >= domain.delta_max - 1e-6,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdaptiveEstimate {
    pub stage1: Estimate,
    pub fin: Estimate,
    /// Angle by which the stage-2 measurement directions were rotated.
    pub rotation: f64,
}

/// Two-stage adaptive estimation. Stage 1 locates the phase roughly; stage
/// 2 measures with both measurement directions rotated by `φ̂₁`, which is
/// equivalent to measuring the probe at phase `φ − φ̂₁`, the zero-correlation
/// working point. Both datasets enter the final joint likelihood.
///
/// `stage2` receives the rotation and returns the stage-2 counts.
pub fn adaptive_two_step<S>(
    counts_stage1: &OutcomeCounts,
    theta: MeasurementStrength,
    domain: &SearchDomain,
    stage2: S,
) -> Result<AdaptiveEstimate>
where
    S: FnOnce(f64) -> Result<OutcomeCounts>,
{
    let stage1 = mle_estimate(counts_stage1, theta, domain)?;
    let rotation = stage1.phi_hat;
    let counts2 = stage2(rotation)?;
    if counts2.len() != 4 {
        return Err(Error::InvalidArgument("stage 2 must report four outcomes".into()));
    }
    let t = theta.radians();
    let (c1, c2) = (counts_stage1.counts(), counts2.counts());
    let (n1, n2) = (counts_stage1.total(), counts2.total());
    let objective = |phi: f64, delta: f64| {
        divergence(c1, n1, &weak_probabilities_unchecked(phi, delta, t))
            + divergence(c2, n2, &weak_probabilities_unchecked(phi - rotation, delta, t))
    };
    let (phi, delta, _, converged) = minimize_over_domain(objective, domain)?;
    let ll = log_likelihood(c1, &weak_probabilities_unchecked(phi, delta, t))
        + log_likelihood(c2, &weak_probabilities_unchecked(phi - rotation, delta, t));
    Ok(AdaptiveEstimate {
        stage1,
        fin: Estimate {
            phi_hat: phi,
            delta_hat: delta,
            converged,
            log_likelihood: ll,
            trapped_at_zero: delta < TRAPPED_DELTA,
            at_delta_edge: delta >= domain.delta_max - 1e-6,
        },
        rotation,
    })
}

/// Simulated two-stage experiment with `shots` in total, a fraction
/// `stage1_fraction` of which go to stage 1.
pub fn simulate_adaptive(
    truth: ParamPoint,
    theta: MeasurementStrength,
    shots: u64,
    stage1_fraction: f64,
    seed: u64,
    domain: &SearchDomain,
) -> Result<AdaptiveEstimate> {
    if !(stage1_fraction > 0.0 && stage1_fraction < 1.0) {
        return Err(Error::WeightOutOfRange(stage1_fraction));
    }
    let n1 = ((shots as f64) * stage1_fraction).round() as u64;
    if n1 == 0 || n1 >= shots {
        return Err(Error::InvalidArgument("each stage needs at least one shot".into()));
    }
    let t = theta.radians();
    let p1 = weak_probabilities_unchecked(truth.phi, truth.delta, t);
    let counts1 = sample_outcomes(&p1, n1, derive_seed(seed, 0))?;
    adaptive_two_step(&counts1, theta, domain, |rotation| {
        let p2 = weak_probabilities_unchecked(truth.phi - rotation, truth.delta, t);
        sample_outcomes(&p2, shots - n1, derive_seed(seed, 1))
    })
}

/// Sample mean and covariance of `(x, y)` pairs (unbiased, `n − 1`).
pub fn sample_covariance(samples: &[(f64, f64)]) -> ([f64; 2], [[f64; 2]; 2]) {
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in samples {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    let d = (n - 1.0).max(1.0);
    ([mx, my], [[sxx / d, sxy / d], [sxy / d, syy / d]])
}

/// Pearson correlation of a 2×2 covariance; zero when either variance is.
pub fn correlation(cov: &[[f64; 2]; 2]) -> f64 {
    let denom = (cov[0][0] * cov[1][1]).sqrt();
    if denom > 0.0 {
        cov[0][1] / denom
    } else {
        0.0
    }
}

/// Major-axis angle of the covariance ellipse, measured from the φ axis,
/// in `(−π/2, π/2]`.
pub fn orientation(cov: &[[f64; 2]; 2]) -> f64 {
    0.5 * (2.0 * cov[0][1]).atan2(cov[0][0] - cov[1][1])
}

/// Bootstrap standard error of [`orientation`] over `resamples` resamples
/// of `samples`.
pub fn bootstrap_orientation_se(samples: &[(f64, f64)], resamples: usize, seed: u64) -> Result<f64> {
    if samples.len() < 2 || resamples < 2 {
        return Err(Error::InvalidArgument(
            "bootstrap needs at least two samples and resamples".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = Vec::with_capacity(samples.len());
    let angles: Vec<f64> = (0..resamples)
        .map(|_| {
            buf.clear();
            buf.extend((0..samples.len()).map(|_| samples[rng.random_range(0..samples.len())]));
            orientation(&sample_covariance(&buf).1)
        })
        .collect();
    let mean = angles.iter().sum::<f64>() / resamples as f64;
    let var = angles.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (resamples - 1) as f64;
    Ok(var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloOptions {
    pub repetitions: usize,
    pub seed: u64,
    /// Scale of the comparison covariance `F⁻¹/M′`.
    pub m_prime: f64,
    pub calibration_step_deg: f64,
    pub interpolation: Interpolation,
    pub domain: SearchDomain,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        Self {
            repetitions: 10_000,
            seed: 0,
            m_prime: 4e5,
            calibration_step_deg: 0.1,
            interpolation: Interpolation::Linear,
            domain: SearchDomain::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub truth: ParamPoint,
    pub samples: Vec<(f64, f64)>,
    pub trapped: Vec<bool>,
    pub seeds: Vec<u64>,
    /// Means of `φ̂` (unwrapped around the truth) and `δ̂`.
    pub mean: [f64; 2],
    pub covariance: [[f64; 2]; 2],
    pub correlation: f64,
    pub orientation: f64,
    /// Ideal-device comparison covariance, three-outcome Fisher matrix at the
    /// truth scaled by `M′`. `None` when that Fisher matrix is singular.
    pub expected: Option<CovarianceBound>,
    pub m_prime: f64,
    pub trapped_fraction: f64,
}

/// Repeats noisy synthesis of the mixed state `truth` and minimal-residual
/// estimation against a noiseless calibration. Phase estimates are
/// unwrapped to the branch nearest the truth before computing moments.
pub fn monte_carlo_covariance(
    truth: ParamPoint,
    config: &DeviceConfig,
    opts: &MonteCarloOptions,
) -> Result<MonteCarloReport> {
    if opts.repetitions < 2 {
        return Err(Error::InvalidArgument("need at least two repetitions".into()));
    }
    config.validate()?;
    let calibration = calibration_scan(config, &uniform_alpha_grid(opts.calibration_step_deg)?)?;
    let seeds: Vec<u64> = (0..opts.repetitions as u64)
        .map(|i| derive_seed(opts.seed, i))
        .collect();
    let estimates = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let record = synthesize_mixed_noisy(truth.phi, truth.delta, config, &mut rng)?;
            residual_estimate(&record, &calibration, opts.interpolation, &opts.domain)
        })
        .collect::<Result<Vec<_>>>()?;

    let samples: Vec<(f64, f64)> = estimates
        .iter()
        .map(|e| (truth.phi + wrap_phase(e.phi_hat - truth.phi), e.delta_hat))
        .collect();
    let trapped: Vec<bool> = estimates.iter().map(|e| e.trapped_at_zero).collect();
    let (mean, covariance) = sample_covariance(&samples);
    let theta = config.theta()?;
    let fisher = povm_fisher(&three_outcome_povm(theta), truth)?;
    let expected = match crb_covariance(&fisher, opts.m_prime) {
        Ok(b) => Some(b),
        Err(Error::NonIdentifiable) => None,
        Err(e) => return Err(e),
    };
    let trapped_fraction = trapped.iter().filter(|t| **t).count() as f64 / trapped.len() as f64;
    Ok(MonteCarloReport {
        truth,
        correlation: correlation(&covariance),
        orientation: orientation(&covariance),
        samples,
        trapped,
        seeds,
        mean,
        covariance,
        expected,
        m_prime: opts.m_prime,
        trapped_fraction,
    })
}
