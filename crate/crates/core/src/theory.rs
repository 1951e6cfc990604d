//! Multiparameter estimation theory for the parameter pair (φ, δ):
//! classical Fisher matrices, symmetric logarithmic derivatives, the
//! quantum Fisher information matrix, effective Fisher information and
//! Cramér-Rao covariance bounds.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::qubit::{dephased_state, dephased_state_gradient, hermitian_eig2, ComplexMatrix2, QubitState};
use crate::weak::Povm;

/// Default central-difference step for both parameters.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Step for [`qfi_matrix`], whose fourth-order stencil tolerates a wider
/// step and loses less to rounding there.
pub const QFI_STEP: f64 = 1e-3;

/// Outcomes below this probability are left out of Fisher sums.
pub const MIN_PROBABILITY: f64 = 1e-14;

/// Tolerance on `Σ p − 1` for model distributions.
pub const NORMALIZATION_TOL: f64 = 1e-8;

/// Eigenvalue-sum cutoff below which SLD matrix elements are dropped.
pub const SLD_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamPoint {
    pub phi: f64,
    pub delta: f64,
}

impl ParamPoint {
    pub fn new(phi: f64, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) {
            return Err(Error::NegativeDiffusion(delta));
        }
        Ok(Self { phi, delta })
    }
}

/// Symmetric 2×2 information matrix over `(φ, δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct FisherMatrix {
    pub pp: f64,
    pub dd: f64,
    pub pd: f64,
}

/// The quantum Fisher information matrix has the same shape.
pub type QfiMatrix = FisherMatrix;

impl FisherMatrix {
    pub fn new(pp: f64, dd: f64, pd: f64) -> Self {
        Self { pp, dd, pd }
    }

    pub fn diagonal(pp: f64, dd: f64) -> Self {
        Self { pp, dd, pd: 0.0 }
    }

    pub fn det(&self) -> f64 {
        self.pp * self.dd - self.pd * self.pd
    }

    pub fn trace(&self) -> f64 {
        self.pp + self.dd
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.pp * s, self.dd * s, self.pd * s)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(self.pp + other.pp, self.dd + other.dd, self.pd + other.pd)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(self.pp - other.pp, self.dd - other.dd, self.pd - other.pd)
    }

    /// Eigenvalues, larger first.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let mean = 0.5 * (self.pp + self.dd);
        let r = (0.5 * (self.pp - self.dd)).hypot(self.pd);
        [mean + r, mean - r]
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.eigenvalues()[1] >= -tol
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        if !(det.abs() > 1e-14) {
            return Err(Error::NonIdentifiable);
        }
        Ok(Self::new(self.dd / det, self.pp / det, -self.pd / det))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.pp - other.pp)
            .abs()
            .max((self.dd - other.dd).abs())
            .max((self.pd - other.pd).abs())
    }
}

/// Covariance lower bound `F⁻¹/M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovarianceBound {
    pub var_phi: f64,
    pub var_delta: f64,
    pub cov: f64,
    pub shots: f64,
}

impl CovarianceBound {
    pub fn correlation(&self) -> f64 {
        self.cov / (self.var_phi * self.var_delta).sqrt()
    }

    pub fn as_matrix(&self) -> [[f64; 2]; 2] {
        [[self.var_phi, self.cov], [self.cov, self.var_delta]]
    }
}

fn check_normalized(p: &[f64]) -> Result<()> {
    let total: f64 = p.iter().sum();
    if !((total - 1.0).abs() <= NORMALIZATION_TOL) {
        return Err(Error::NotNormalized(total));
    }
    Ok(())
}

/// First derivative along one parameter. Falls back to a one-sided
/// second-order stencil when `δ − h` would leave the domain.
fn partial<F>(model: &F, point: ParamPoint, step: f64, along_delta: bool) -> Result<Vec<f64>>
where
    F: Fn(ParamPoint) -> Result<Vec<f64>>,
{
    let at = |offset: f64| -> Result<Vec<f64>> {
        let p = if along_delta {
            ParamPoint {
                phi: point.phi,
                delta: point.delta + offset,
            }
        } else {
            ParamPoint {
                phi: point.phi + offset,
                delta: point.delta,
            }
        };
        let probs = model(p)?;
        check_normalized(&probs)?;
        Ok(probs)
    };
    if along_delta && point.delta < step {
        let f0 = at(0.0)?;
        let f1 = at(step)?;
        let f2 = at(2.0 * step)?;
        Ok(f0
            .iter()
            .zip(&f1)
            .zip(&f2)
            .map(|((a, b), c)| (-3.0 * a + 4.0 * b - c) / (2.0 * step))
            .collect())
    } else {
        let fp = at(step)?;
        let fm = at(-step)?;
        Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * step)).collect())
    }
}

fn assemble(p: &[f64], dp_phi: &[f64], dp_delta: &[f64]) -> FisherMatrix {
    let mut f = FisherMatrix::default();
    for ((&pk, &a), &b) in p.iter().zip(dp_phi).zip(dp_delta) {
        if pk < MIN_PROBABILITY {
            continue;
        }
        f.pp += a * a / pk;
        f.dd += b * b / pk;
        f.pd += a * b / pk;
    }
    f
}

/// Classical Fisher matrix of an outcome model by central differences:
/// `F_αβ = Σ_k p_k (∂_α log p_k)(∂_β log p_k)`.
///
/// Outcomes with `p < 1e-14` are skipped; for a smooth model their
/// contribution `(∂p)²/p` vanishes with `p` whenever `∂p = O(p)`, and is
/// bounded by `(∂p)²/1e-14` otherwise.
pub fn fisher_from_model<F>(model: F, point: ParamPoint, step: f64) -> Result<FisherMatrix>
where
    F: Fn(ParamPoint) -> Result<Vec<f64>>,
{
    if !(step > 0.0) {
        return Err(Error::InvalidStep(step));
    }
    let p = model(point)?;
    check_normalized(&p)?;
    let dphi = partial(&model, point, step, false)?;
    let ddelta = partial(&model, point, step, true)?;
    Ok(assemble(&p, &dphi, &ddelta))
}

/// Richardson-extrapolated variant of [`fisher_from_model`] combining the
/// steps `h` and `h/2`.
pub fn fisher_from_model_richardson<F>(model: F, point: ParamPoint, step: f64) -> Result<FisherMatrix>
where
    F: Fn(ParamPoint) -> Result<Vec<f64>>,
{
    if !(step > 0.0) {
        return Err(Error::InvalidStep(step));
    }
    let p = model(point)?;
    check_normalized(&p)?;
    let extrapolate = |along_delta: bool| -> Result<Vec<f64>> {
        let coarse = partial(&model, point, step, along_delta)?;
        let fine = partial(&model, point, 0.5 * step, along_delta)?;
        Ok(coarse.iter().zip(&fine).map(|(c, f)| (4.0 * f - c) / 3.0).collect())
    };
    let dphi = extrapolate(false)?;
    let ddelta = extrapolate(true)?;
    Ok(assemble(&p, &dphi, &ddelta))
}

/// Fisher matrix of a POVM on the dephased probe using the exact state
/// derivatives, `∂p_k = Tr[∂ρ E_k]`.
pub fn povm_fisher(povm: &Povm, point: ParamPoint) -> Result<FisherMatrix> {
    let rho = dephased_state(point.phi, point.delta)?;
    let (d_phi, d_delta) = dephased_state_gradient(point.phi, point.delta)?;
    let mut p = Vec::with_capacity(povm.len());
    let mut a = Vec::with_capacity(povm.len());
    let mut b = Vec::with_capacity(povm.len());
    for e in povm.effects() {
        p.push(rho.expectation(&e.matrix));
        a.push((d_phi * e.matrix).trace().re);
        b.push((d_delta * e.matrix).trace().re);
    }
    Ok(assemble(&p, &a, &b))
}

/// Solves `Lρ + ρL = 2∂ρ` in the eigenbasis of ρ:
/// `L = Σ_ij 2⟨i|∂ρ|j⟩/(λ_i+λ_j) |i⟩⟨j|`, dropping pairs with
/// `λ_i + λ_j < 1e-12`.
pub fn sld(rho: &QubitState, drho: &ComplexMatrix2) -> Result<ComplexMatrix2> {
    let dev = drho.hermitian_deviation();
    if dev > crate::qubit::HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let tr = drho.trace().norm();
    if tr > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "state derivative must be traceless, trace = {tr:.3e}"
        )));
    }
    let eig = hermitian_eig2(rho.density())?;
    let mut l = ComplexMatrix2::ZERO;
    for i in 0..2 {
        for j in 0..2 {
            let denom = eig.values[i] + eig.values[j];
            if denom < SLD_CUTOFF {
                continue;
            }
            let vi = eig.vectors[i];
            let vj = eig.vectors[j];
            let dj = *drho * vj;
            let elem = vi[0].conj() * dj[0] + vi[1].conj() * dj[1];
            l = l + ComplexMatrix2::outer(vi, vj).scale_complex(elem * (2.0 / denom));
        }
    }
    Ok(l)
}

/// `H_ij = Re Tr[ρ L_i L_j]`.
pub fn qfi_from_slds(rho: &QubitState, l_phi: &ComplexMatrix2, l_delta: &ComplexMatrix2) -> QfiMatrix {
    let r = *rho.density();
    let h = |a: &ComplexMatrix2, b: &ComplexMatrix2| (r * *a * *b).trace().re;
    FisherMatrix::new(h(l_phi, l_phi), h(l_delta, l_delta), h(l_phi, l_delta))
}

/// Numeric quantum Fisher information of the dephased probe: state
/// derivatives by five-point central differences, SLDs from the eigen-solver.
///
/// At `δ = 0` the state is pure and `∂_δ ρ` vanishes, so the pointwise
/// `H_δδ` is zero; [`qfi_closed_form`] returns the `δ → 0⁺` limit instead.
pub fn qfi_matrix(point: ParamPoint, step: f64) -> Result<QfiMatrix> {
    if !(step > 0.0) {
        return Err(Error::InvalidStep(step));
    }
    let rho = dephased_state(point.phi, point.delta)?;
    let state = |phi: f64, delta: f64| -> Result<ComplexMatrix2> { Ok(*dephased_state(phi, delta)?.density()) };
    // five-point stencil; the state is cheap and the extra order keeps the
    // off-diagonal QFI at rounding level
    let five = |f: &dyn Fn(f64) -> Result<ComplexMatrix2>, x: f64| -> Result<ComplexMatrix2> {
        Ok(
            (f(x + step)?.scale(8.0) - f(x - step)?.scale(8.0) - f(x + 2.0 * step)? + f(x - 2.0 * step)?)
                .scale(1.0 / (12.0 * step)),
        )
    };
    let d_phi = five(&|phi| state(phi, point.delta), point.phi)?;
    let d_delta = if point.delta < 2.0 * step {
        let f0 = state(point.phi, point.delta)?;
        let f1 = state(point.phi, point.delta + step)?;
        let f2 = state(point.phi, point.delta + 2.0 * step)?;
        (f1.scale(4.0) - f0.scale(3.0) - f2).scale(0.5 / step)
    } else {
        five(&|delta| state(point.phi, delta), point.delta)?
    };
    let l_phi = sld(&rho, &d_phi)?;
    let l_delta = sld(&rho, &d_delta)?;
    Ok(qfi_from_slds(&rho, &l_phi, &l_delta))
}

/// `H_φφ = e^{−2δ²}`, `H_δδ = 4δ²/(e^{2δ²} − 1)` (→ 2 as δ → 0), `H_φδ = 0`.
pub fn qfi_closed_form(delta: f64) -> Result<QfiMatrix> {
    if !(delta >= 0.0) {
        return Err(Error::NegativeDiffusion(delta));
    }
    let x = 2.0 * delta * delta;
    let h_dd = if x == 0.0 { 2.0 } else { 2.0 * x / x.exp_m1() };
    Ok(FisherMatrix::diagonal((-x).exp(), h_dd))
}

/// The `4δ²/(e^{2δ²} + 1)` expression for `H_δδ` as it appears in print.
/// Kept only to report its deviation from [`qfi_closed_form`]; it fails the
/// SLD computation and the saturation identity.
pub fn printed_qfi_delta(delta: f64) -> f64 {
    let x = 2.0 * delta * delta;
    2.0 * x / (x.exp() + 1.0)
}

/// `F′_φφ = 1/(F⁻¹)_φφ` and `F′_δδ = 1/(F⁻¹)_δδ`.
pub fn effective_fisher(f: &FisherMatrix) -> Result<(f64, f64)> {
    if f.pd.abs() < 1e-14 {
        return Ok((f.pp, f.dd));
    }
    if !(f.det() > 1e-14) {
        return Err(Error::NonIdentifiable);
    }
    Ok((f.pp - f.pd * f.pd / f.dd, f.dd - f.pd * f.pd / f.pp))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffRatios {
    pub phi: f64,
    pub delta: f64,
    pub sum: f64,
}

/// `F_ii/H_ii` (or `F′_ii/H_ii` when `effective`) and their sum, which is
/// at most 1 for any single-qubit measurement.
pub fn tradeoff_ratios(f: &FisherMatrix, h: &QfiMatrix, effective: bool) -> Result<TradeoffRatios> {
    if !(h.pp > 0.0 && h.dd > 0.0) {
        return Err(Error::InvalidArgument(
            "quantum Fisher information diagonal must be positive".into(),
        ));
    }
    let (fp, fd) = if effective { effective_fisher(f)? } else { (f.pp, f.dd) };
    let phi = fp / h.pp;
    let delta = fd / h.dd;
    Ok(TradeoffRatios {
        phi,
        delta,
        sum: phi + delta,
    })
}

/// Cramér-Rao covariance bound `F⁻¹/M`.
pub fn crb_covariance(f: &FisherMatrix, shots: f64) -> Result<CovarianceBound> {
    if !(shots >= 1.0) {
        return Err(Error::InvalidArgument(format!("shot count must be >= 1, got {shots}")));
    }
    let inv = f.inverse()?;
    Ok(CovarianceBound {
        var_phi: inv.pp / shots,
        var_delta: inv.dd / shots,
        cov: inv.pd / shots,
        shots,
    })
}
