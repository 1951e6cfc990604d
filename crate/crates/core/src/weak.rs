//! Weak measurements of tunable strength followed by a projective
//! measurement, the POVMs they induce, and the resulting Fisher
//! information on (φ, δ).
//!
//! A weak measurement along one axis with strength θ, followed by a strong
//! measurement along an orthogonal axis, is a four-outcome rank-1 POVM whose
//! effects point along `s·(sin θ, −w cos θ, 0)` on the Bloch sphere of the
//! probe. Outcome probabilities are `p(w,s) = ¼(1 + s e^{−δ²} sin(θ − wφ))`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qubit::{hermitian_eig2, pauli, ComplexMatrix2, Pauli, QubitState};
use crate::theory::{effective_fisher, qfi_closed_form, FisherMatrix};

/// Completeness tolerance `‖Σ E_k − σ₀‖`.
pub const COMPLETENESS_TOL: f64 = 1e-10;

/// Strength of the weak measurement, `θ ∈ [0, π/2]`: zero is no
/// measurement, `π/2` is projective.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct MeasurementStrength(f64);

impl MeasurementStrength {
    pub const NONE: Self = Self(0.0);
    pub const PROJECTIVE: Self = Self(FRAC_PI_2);

    pub fn new(theta: f64) -> Result<Self> {
        // tolerate rounding from degree conversions at the endpoints
        if !(-1e-12..=FRAC_PI_2 + 1e-12).contains(&theta) {
            return Err(Error::StrengthOutOfRange(theta));
        }
        Ok(Self(theta.clamp(0.0, FRAC_PI_2)))
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn is_interior(self) -> bool {
        self.0 > 0.0 && self.0 < FRAC_PI_2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum OutcomeLabel {
    /// Joint outcome of the weak-scheme POVM.
    Pair {
        w: Sign,
        s: Sign,
    },
    /// Outcomes `(+,s)` and `(−,s)` detected together.
    MergedW {
        s: Sign,
    },
    /// Projector along `±axis`.
    Axis {
        axis: Pauli,
        sign: Sign,
    },
    Index(usize),
}

impl fmt::Display for OutcomeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutcomeLabel::Pair { w, s } => write!(f, "({w},{s})"),
            OutcomeLabel::MergedW { s } => write!(f, "(*,{s})"),
            OutcomeLabel::Axis { axis, sign } => write!(f, "{sign}{axis:?}"),
            OutcomeLabel::Index(i) => write!(f, "#{i}"),
        }
    }
}

/// Order of outcomes in [`outcome_probabilities`] and [`weak_scheme_povm`].
pub const WEAK_OUTCOMES: [(Sign, Sign); 4] = [
    (Sign::Plus, Sign::Plus),
    (Sign::Plus, Sign::Minus),
    (Sign::Minus, Sign::Plus),
    (Sign::Minus, Sign::Minus),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Effect {
    pub matrix: ComplexMatrix2,
    pub label: OutcomeLabel,
}

/// A finite set of positive effects summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    effects: Vec<Effect>,
}

impl Povm {
    pub fn new(effects: Vec<Effect>) -> Result<Self> {
        if effects.is_empty() {
            return Err(Error::InvalidArgument("a POVM needs at least one effect".into()));
        }
        for e in &effects {
            let eig = hermitian_eig2(&e.matrix)?;
            if eig.values[1] < -1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "effect {} has negative eigenvalue {}",
                    e.label, eig.values[1]
                )));
            }
        }
        let total: ComplexMatrix2 = effects.iter().map(|e| e.matrix).sum();
        let dev = total.max_abs_diff(&ComplexMatrix2::IDENTITY);
        if dev > COMPLETENESS_TOL {
            return Err(Error::InvalidArgument(format!(
                "effects do not sum to identity (deviation {dev:.3e})"
            )));
        }
        Ok(Self { effects })
    }

    /// The trivial one-outcome measurement.
    pub fn trivial() -> Self {
        Self {
            effects: vec![Effect {
                matrix: ComplexMatrix2::IDENTITY,
                label: OutcomeLabel::Index(0),
            }],
        }
    }

    pub fn effects(&self) -> &[Effect] {
        &self.effects
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn probabilities(&self, state: &QubitState) -> Vec<f64> {
        self.effects.iter().map(|e| state.expectation(&e.matrix)).collect()
    }
}

/// `M_± = (cos(θ/2) σ₀ ± sin(θ/2) σ_z)/√2`.
pub fn weak_operators(theta: MeasurementStrength) -> (ComplexMatrix2, ComplexMatrix2) {
    let (s, c) = (0.5 * theta.radians()).sin_cos();
    let k = std::f64::consts::FRAC_1_SQRT_2;
    let id = pauli(Pauli::I);
    let z = pauli(Pauli::Z);
    ((id.scale(c) + z.scale(s)).scale(k), (id.scale(c) - z.scale(s)).scale(k))
}

/// Effect of the weak scheme for outcome `(w, s)`:
/// `E(w,s) = ¼(σ₀ + s(sin θ σ_x − w cos θ σ_y))`.
pub fn weak_effect(theta: MeasurementStrength, w: Sign, s: Sign) -> ComplexMatrix2 {
    let (st, ct) = theta.radians().sin_cos();
    let sv = s.value();
    ComplexMatrix2::from_bloch_components(1.0, [sv * st, -sv * w.value() * ct, 0.0]).scale(0.25)
}

/// Four-outcome POVM of the weak measurement followed by the strong one,
/// in [`WEAK_OUTCOMES`] order.
pub fn weak_scheme_povm(theta: MeasurementStrength) -> Povm {
    Povm {
        effects: WEAK_OUTCOMES
            .iter()
            .map(|&(w, s)| Effect {
                matrix: weak_effect(theta, w, s),
                label: OutcomeLabel::Pair { w, s },
            })
            .collect(),
    }
}

/// The device-level three-outcome POVM: `(+,+)`, `(−,+)`, and the merged
/// pair `(+,−) + (−,−)`.
pub fn three_outcome_povm(theta: MeasurementStrength) -> Povm {
    let e = |w, s| weak_effect(theta, w, s);
    Povm {
        effects: vec![
            Effect {
                matrix: e(Sign::Plus, Sign::Plus),
                label: OutcomeLabel::Pair {
                    w: Sign::Plus,
                    s: Sign::Plus,
                },
            },
            Effect {
                matrix: e(Sign::Minus, Sign::Plus),
                label: OutcomeLabel::Pair {
                    w: Sign::Minus,
                    s: Sign::Plus,
                },
            },
            Effect {
                matrix: e(Sign::Plus, Sign::Minus) + e(Sign::Minus, Sign::Minus),
                label: OutcomeLabel::MergedW { s: Sign::Minus },
            },
        ],
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta >= 0.0) {
        return Err(Error::NegativeDiffusion(delta));
    }
    Ok(())
}

/// `p(w,s) = ¼(1 + s e^{−δ²} sin(θ − wφ))` in [`WEAK_OUTCOMES`] order.
pub fn outcome_probabilities(phi: f64, delta: f64, theta: MeasurementStrength) -> Result<[f64; 4]> {
    check_delta(delta)?;
    Ok(weak_probabilities_unchecked(phi, delta, theta.radians()))
}

#[inline]
pub(crate) fn weak_probabilities_unchecked(phi: f64, delta: f64, theta: f64) -> [f64; 4] {
    let q = (-delta * delta).exp();
    let a = q * (theta - phi).sin();
    let b = q * (theta + phi).sin();
    [0.25 * (1.0 + a), 0.25 * (1.0 - a), 0.25 * (1.0 + b), 0.25 * (1.0 - b)]
}

/// Probabilities of the three detected channels of the device, ordered as
/// [`three_outcome_povm`].
pub fn three_outcome_probabilities(phi: f64, delta: f64, theta: MeasurementStrength) -> Result<[f64; 3]> {
    let p = outcome_probabilities(phi, delta, theta)?;
    Ok([p[0], p[2], p[1] + p[3]])
}

/// Closed-form Fisher matrix of the weak scheme.
///
/// At `δ = 0` the diffusion row vanishes; `F_φφ` takes its limit value
/// wherever a denominator is exactly zero.
pub fn analytic_fisher(phi: f64, delta: f64, theta: MeasurementStrength) -> Result<FisherMatrix> {
    check_delta(delta)?;
    let theta = theta.radians();
    let q2 = (-2.0 * delta * delta).exp();
    // 1 − q² sin²a written as cos²a + (1 − q²) sin²a
    let one_minus_q2 = -(-2.0 * delta * delta).exp_m1();
    let mut pp = 0.0;
    let mut dd = 0.0;
    let mut pd = 0.0;
    for (a, sign) in [(theta - phi, 1.0), (theta + phi, -1.0)] {
        let (s, c) = a.sin_cos();
        let denom = c * c + one_minus_q2 * s * s;
        if denom == 0.0 {
            pp += 0.5;
            continue;
        }
        pp += 0.5 * q2 * c * c / denom;
        dd += 2.0 * delta * delta * q2 * s * s / denom;
        pd += sign * 0.5 * delta * q2 * (2.0 * a).sin() / denom;
    }
    Ok(FisherMatrix::new(pp, dd, pd))
}

/// Mixture of projective measurements: with probability `t` along `±y`
/// (phase-sensitive at φ = 0), otherwise along `±x`. Zero-weight effects are
/// omitted.
pub fn projective_mixture_povm(t: f64) -> Result<Povm> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::WeightOutOfRange(t));
    }
    let mut effects = Vec::with_capacity(4);
    for (axis, weight) in [(Pauli::Y, t), (Pauli::X, 1.0 - t)] {
        if weight == 0.0 {
            continue;
        }
        for sign in Sign::BOTH {
            let proj = (pauli(Pauli::I) + pauli(axis).scale(sign.value())).scale(0.5);
            effects.push(Effect {
                matrix: proj.scale(weight),
                label: OutcomeLabel::Axis { axis, sign },
            });
        }
    }
    Povm::new(effects)
}

/// Random qubit POVM with `n` full-rank effects: `A_k = G_k G_k†` for complex
/// Gaussian `G_k`, normalized as `S^{−1/2} A_k S^{−1/2}` with `S = Σ A_k`.
pub fn random_povm<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<Povm> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one effect".into()));
    }
    let mut gauss = || -> Complex64 {
        Complex64::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        )
    };
    let raw: Vec<ComplexMatrix2> = (0..n)
        .map(|_| {
            let g = ComplexMatrix2([gauss(), gauss(), gauss(), gauss()]);
            g * g.dagger()
        })
        .collect();
    let total: ComplexMatrix2 = raw.iter().copied().sum();
    let eig = hermitian_eig2(&total)?;
    let inv_sqrt = ComplexMatrix2::outer(eig.vectors[0], eig.vectors[0]).scale(eig.values[0].sqrt().recip())
        + ComplexMatrix2::outer(eig.vectors[1], eig.vectors[1]).scale(eig.values[1].sqrt().recip());
    let effects = raw
        .into_iter()
        .enumerate()
        .map(|(i, a)| {
            let m = inv_sqrt * a * inv_sqrt;
            // symmetrize away rounding
            let m = (m + m.dagger()).scale(0.5);
            Effect {
                matrix: m,
                label: OutcomeLabel::Index(i),
            }
        })
        .collect();
    Povm::new(effects)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffRow {
    pub theta: f64,
    pub ratio_phi: f64,
    pub ratio_delta: f64,
    pub sum: f64,
    /// False where the Fisher matrix is singular; the ratios are NaN then.
    pub identifiable: bool,
}

/// Effective-Fisher trade-off `(F′_φφ/H_φφ, F′_δδ/H_δδ)` along a grid of
/// strengths.
pub fn tradeoff_scan(delta: f64, phi: f64, theta_grid: &[f64]) -> Result<Vec<TradeoffRow>> {
    check_delta(delta)?;
    let h = qfi_closed_form(delta)?;
    theta_grid
        .iter()
        .map(|&theta| {
            let f = analytic_fisher(phi, delta, MeasurementStrength::new(theta)?)?;
            Ok(match effective_fisher(&f) {
                Ok((fp, fd)) => {
                    let (rp, rd) = (fp / h.pp, fd / h.dd);
                    TradeoffRow {
                        theta,
                        ratio_phi: rp,
                        ratio_delta: rd,
                        sum: rp + rd,
                        identifiable: true,
                    }
                }
                Err(Error::NonIdentifiable) => TradeoffRow {
                    theta,
                    ratio_phi: f64::NAN,
                    ratio_delta: f64::NAN,
                    sum: f64::NAN,
                    identifiable: false,
                },
                Err(e) => return Err(e),
            })
        })
        .collect()
}

/// Strength at which `F′_φφ/H_φφ = 1/2` for φ = 0:
/// `cos²θ* = (1 − e^{−2δ²})/(2 − e^{−2δ²})`.
pub fn tradeoff_boundary(delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let one_minus_q2 = -(-2.0 * delta * delta).exp_m1();
    Ok((one_minus_q2 / (1.0 + one_minus_q2)).sqrt().acos())
}

/// `region[i][j]` is true when `F′_φφ/H_φφ > 1/2` at φ = 0 for
/// `(theta_grid[i], delta_grid[j])`.
pub fn tradeoff_region(theta_grid: &[f64], delta_grid: &[f64]) -> Result<Vec<Vec<bool>>> {
    for &d in delta_grid {
        if !(d > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "region diffusion values must be positive, got {d}"
            )));
        }
    }
    let strengths = theta_grid
        .iter()
        .map(|&t| MeasurementStrength::new(t))
        .collect::<Result<Vec<_>>>()?;
    strengths
        .par_iter()
        .map(|&theta| {
            delta_grid
                .iter()
                .map(|&delta| {
                    let f = analytic_fisher(0.0, delta, theta)?;
                    let h = qfi_closed_form(delta)?;
                    Ok(f.pp / h.pp > 0.5)
                })
                .collect()
        })
        .collect()
}
