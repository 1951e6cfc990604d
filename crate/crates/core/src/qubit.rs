//! Two-level systems: 2×2 complex matrices, Pauli algebra, Bloch vectors
//! and the phase plus phase-diffusion channel.
//!
//! Bloch convention used throughout the crate: `ρ = (σ₀ + r·σ)/2`, so the
//! off-diagonal entry is `ρ₁₂ = (r_x − i r_y)/2`. The dephased probe state
//! has `r = e^{−δ²}(cos φ, sin φ, 0)`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Hermiticity tolerance for states and SLD inputs.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Dense 2×2 complex matrix stored row-major as `[m00, m01, m10, m11]`.
#[derive(Clone, Copy, PartialEq)]
pub struct ComplexMatrix2(pub [Complex64; 4]);

impl fmt::Debug for ComplexMatrix2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.0;
        write!(f, "[[{a}, {b}], [{c}, {d}]]")
    }
}

impl ComplexMatrix2 {
    pub const ZERO: Self = Self([ZERO; 4]);
    pub const IDENTITY: Self = Self([ONE, ZERO, ZERO, ONE]);

    pub fn new(m00: Complex64, m01: Complex64, m10: Complex64, m11: Complex64) -> Self {
        Self([m00, m01, m10, m11])
    }

    pub fn from_real(m00: f64, m01: f64, m10: f64, m11: f64) -> Self {
        Self([m00.into(), m01.into(), m10.into(), m11.into()])
    }

    pub fn diag(a: f64, d: f64) -> Self {
        Self::from_real(a, 0.0, 0.0, d)
    }

    pub fn pauli(p: Pauli) -> Self {
        pauli(p)
    }

    /// `|u⟩⟨v|`
    pub fn outer(u: [Complex64; 2], v: [Complex64; 2]) -> Self {
        Self([
            u[0] * v[0].conj(),
            u[0] * v[1].conj(),
            u[1] * v[0].conj(),
            u[1] * v[1].conj(),
        ])
    }

    /// `(c₀ σ₀ + n·σ)` for a real scalar and real 3-vector.
    pub fn from_bloch_components(c0: f64, n: [f64; 3]) -> Self {
        let [x, y, z] = n;
        Self([
            Complex64::new(c0 + z, 0.0),
            Complex64::new(x, -y),
            Complex64::new(x, y),
            Complex64::new(c0 - z, 0.0),
        ])
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.0[2 * row + col]
    }

    pub fn dagger(&self) -> Self {
        let [a, b, c, d] = self.0;
        Self([a.conj(), c.conj(), b.conj(), d.conj()])
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0] + self.0[3]
    }

    pub fn det(&self) -> Complex64 {
        self.0[0] * self.0[3] - self.0[1] * self.0[2]
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    pub fn scale_complex(&self, s: Complex64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entrywise deviation from the conjugate transpose.
    pub fn hermitian_deviation(&self) -> f64 {
        self.max_abs_diff(&self.dagger())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// Expansion coefficients `(c₀, c_x, c_y, c_z)` with `m = Σ c_k σ_k`.
    /// Real for Hermitian matrices.
    pub fn pauli_coefficients(&self) -> [f64; 4] {
        let [a, b, c, d] = self.0;
        [0.5 * (a + d).re, 0.5 * (b + c).re, 0.5 * (c - b).im, 0.5 * (a - d).re]
    }
}

impl Add for ComplexMatrix2 {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut out = self.0;
        for (o, r) in out.iter_mut().zip(rhs.0) {
            *o += r;
        }
        Self(out)
    }
}

impl Sub for ComplexMatrix2 {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut out = self.0;
        for (o, r) in out.iter_mut().zip(rhs.0) {
            *o -= r;
        }
        Self(out)
    }
}

impl Neg for ComplexMatrix2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self(self.0.map(|z| -z))
    }
}

impl Mul for ComplexMatrix2 {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let [a, b, c, d] = self.0;
        let [e, f, g, h] = rhs.0;
        Self([a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h])
    }
}

impl Mul<[Complex64; 2]> for ComplexMatrix2 {
    type Output = [Complex64; 2];
    fn mul(self, v: [Complex64; 2]) -> [Complex64; 2] {
        let [a, b, c, d] = self.0;
        [a * v[0] + b * v[1], c * v[0] + d * v[1]]
    }
}

impl std::iter::Sum for ComplexMatrix2 {
    fn sum<It: Iterator<Item = Self>>(iter: It) -> Self {
        iter.fold(Self::ZERO, |acc, m| acc + m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
}

pub fn pauli(p: Pauli) -> ComplexMatrix2 {
    match p {
        Pauli::I => ComplexMatrix2::IDENTITY,
        Pauli::X => ComplexMatrix2([ZERO, ONE, ONE, ZERO]),
        Pauli::Y => ComplexMatrix2([ZERO, -I, I, ZERO]),
        Pauli::Z => ComplexMatrix2([ONE, ZERO, ZERO, -ONE]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// Density matrix of a single qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    density: ComplexMatrix2,
}

impl QubitState {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(density: ComplexMatrix2) -> Result<Self> {
        let dev = density.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = density.trace();
        if (tr - ONE).norm() > 1e-10 {
            return Err(Error::NotNormalized(tr.re));
        }
        let eig = hermitian_eig2(&density)?;
        if eig.values[1] < -1e-12 {
            return Err(Error::InvalidArgument(format!(
                "density matrix has negative eigenvalue {}",
                eig.values[1]
            )));
        }
        Ok(Self { density })
    }

    pub fn maximally_mixed() -> Self {
        Self {
            density: ComplexMatrix2::IDENTITY.scale(0.5),
        }
    }

    pub fn from_bloch(r: BlochVector) -> Result<Self> {
        let n = r.norm();
        if n > 1.0 + 1e-12 {
            return Err(Error::BlochNormTooLarge(n));
        }
        Ok(Self {
            density: ComplexMatrix2::from_bloch_components(1.0, r.to_array()).scale(0.5),
        })
    }

    /// `|ψ⟩⟨ψ|` for a normalized pure state.
    pub fn pure(psi: [Complex64; 2]) -> Result<Self> {
        let n2 = psi[0].norm_sqr() + psi[1].norm_sqr();
        if (n2 - 1.0).abs() > 1e-10 {
            return Err(Error::AmplitudeNotNormalized(n2));
        }
        Ok(Self {
            density: ComplexMatrix2::outer(psi, psi),
        })
    }

    pub fn density(&self) -> &ComplexMatrix2 {
        &self.density
    }

    /// `r_k = Tr[ρ σ_k]`.
    pub fn bloch(&self) -> BlochVector {
        let [_, x, y, z] = self.density.pauli_coefficients();
        BlochVector::new(2.0 * x, 2.0 * y, 2.0 * z)
    }

    pub fn purity(&self) -> f64 {
        (self.density * self.density).trace().re
    }

    /// Born rule `Tr[ρ E]`.
    pub fn expectation(&self, op: &ComplexMatrix2) -> f64 {
        (self.density * *op).trace().re
    }

    /// Convex combination `w ρ_a + (1 − w) ρ_b`.
    pub fn mix(&self, other: &Self, w: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::WeightOutOfRange(w));
        }
        Ok(Self {
            density: self.density.scale(w) + other.density.scale(1.0 - w),
        })
    }
}

/// Output of the phase plus phase-diffusion channel acting on the optimal
/// probe: `ρ₁₁ = ρ₂₂ = 1/2`, `ρ₁₂ = e^{−iφ−δ²}/2`.
pub fn dephased_state(phi: f64, delta: f64) -> Result<QubitState> {
    if !(delta >= 0.0) {
        return Err(Error::NegativeDiffusion(delta));
    }
    let coherence = (-delta * delta).exp();
    let off = Complex64::from_polar(0.5 * coherence, -phi);
    let half = Complex64::new(0.5, 0.0);
    Ok(QubitState {
        density: ComplexMatrix2([half, off, off.conj(), half]),
    })
}

/// Exact partial derivatives `(∂_φ ρ, ∂_δ ρ)` of [`dephased_state`].
pub fn dephased_state_gradient(phi: f64, delta: f64) -> Result<(ComplexMatrix2, ComplexMatrix2)> {
    if !(delta >= 0.0) {
        return Err(Error::NegativeDiffusion(delta));
    }
    let q = (-delta * delta).exp();
    let (s, c) = phi.sin_cos();
    let d_phi = ComplexMatrix2::from_bloch_components(0.0, [-q * s, q * c, 0.0]).scale(0.5);
    let dq = -2.0 * delta * q;
    let d_delta = ComplexMatrix2::from_bloch_components(0.0, [dq * c, dq * s, 0.0]).scale(0.5);
    Ok((d_phi, d_delta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigen2 {
    /// Sorted descending.
    pub values: [f64; 2],
    /// `vectors[k]` is the normalized eigenvector of `values[k]`.
    pub vectors: [[Complex64; 2]; 2],
}

impl Eigen2 {
    pub fn reconstruct(&self) -> ComplexMatrix2 {
        ComplexMatrix2::outer(self.vectors[0], self.vectors[0]).scale(self.values[0])
            + ComplexMatrix2::outer(self.vectors[1], self.vectors[1]).scale(self.values[1])
    }
}

/// Closed-form spectral decomposition of a Hermitian 2×2 matrix.
///
/// Degenerate spectra return the canonical basis.
pub fn hermitian_eig2(m: &ComplexMatrix2) -> Result<Eigen2> {
    let dev = m.hermitian_deviation();
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let a = m.0[0].re;
    let d = m.0[3].re;
    // average the two off-diagonal entries to absorb rounding asymmetry
    let b = 0.5 * (m.0[1] + m.0[2].conj());
    let mean = 0.5 * (a + d);
    let half_gap = 0.5 * (a - d);
    let r = half_gap.hypot(b.norm());
    let scale = a.abs() + d.abs() + b.norm();

    if r <= f64::EPSILON * scale || r == 0.0 {
        return Ok(Eigen2 {
            values: [mean, mean],
            vectors: [[ONE, ZERO], [ZERO, ONE]],
        });
    }

    let v = if half_gap >= 0.0 {
        [Complex64::new(r + half_gap, 0.0), b.conj()]
    } else {
        [b, Complex64::new(r - half_gap, 0.0)]
    };
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    let v1 = [v[0] / n, v[1] / n];
    let v2 = [-v1[1].conj(), v1[0].conj()];
    Ok(Eigen2 {
        values: [mean + r, mean - r],
        vectors: [v1, v2],
    })
}
