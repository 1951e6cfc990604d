//! Jones-calculus model of the Sagnac weak-measurement device.
//!
//! HWP1 at angle α prepares `c_H = cos 2α`, `c_V = sin 2α`. Inside the
//! interferometer HWP2 at angle ω couples polarisation to the two exits:
//!
//! - output 1: `diag(cos 2ω, sin 2ω)`, analysed in the ±45° basis;
//! - output 2: `σ_x · diag(sin 2ω, cos 2ω)`, total power only.
//!
//! Output 1 is the weak operator `M₊` with `θ = π/2 − 4ω` and the lab H/V
//! axis as weak axis. In probe coordinates the lab Bloch axes map as
//! `z_lab → x`, `x_lab → −y`, `y_lab → −z`, and a linear polarisation at
//! HWP1 angle α carries phase `φ = −4α`. With this mapping the three
//! channels `(i_pp, i_pm, i_m)` have the probabilities
//! `(p(+,+), p(−,+), p(+,−) + p(−,−))` of the weak scheme.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qubit::{ComplexMatrix2, QubitState};
use crate::weak::MeasurementStrength;

const MAX_OMEGA_DEG: f64 = 22.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviceConfig {
    /// HWP2 angle in degrees, `[0, 22.5]`.
    pub omega_deg: f64,
    /// HWP1 angle in degrees.
    pub input_angle_deg: f64,
    /// Relative standard deviation of the per-channel multiplicative noise.
    pub noise_rel_std: f64,
    /// Detect output 2 as a single channel (three-outcome mode).
    pub merge_output2: bool,
    /// Power of the partner dataset relative to the main one when
    /// synthesizing mixed states.
    pub partner_scale: f64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            omega_deg: 8.0,
            input_angle_deg: 0.0,
            noise_rel_std: 0.0,
            merge_output2: true,
            partner_scale: 1.0,
        }
    }
}

impl DeviceConfig {
    pub fn with_omega(omega_deg: f64) -> Self {
        Self {
            omega_deg,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_omega(self.omega_deg)?;
        if !(self.noise_rel_std >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise_rel_std must be non-negative, got {}",
                self.noise_rel_std
            )));
        }
        if !(self.partner_scale > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "partner_scale must be positive, got {}",
                self.partner_scale
            )));
        }
        Ok(())
    }

    pub fn theta(&self) -> Result<MeasurementStrength> {
        hwp_to_theta(self.omega_deg)
    }

    pub fn input_amplitudes(&self) -> [Complex64; 2] {
        hwp1_input(self.input_angle_deg)
    }
}

/// Normalized detected powers. `i_m` is the total of output 2; when output 2
/// is resolved its ±45° split is kept in `output2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntensityRecord {
    pub i_pp: f64,
    pub i_pm: f64,
    pub i_m: f64,
    pub output2: Option<[f64; 2]>,
}

impl IntensityRecord {
    pub fn total(&self) -> f64 {
        self.i_pp + self.i_pm + self.i_m
    }

    pub fn channels(&self) -> [f64; 3] {
        [self.i_pp, self.i_pm, self.i_m]
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            i_pp: k * self.i_pp,
            i_pm: k * self.i_pm,
            i_m: k * self.i_m,
            output2: self.output2.map(|[a, b]| [k * a, k * b]),
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        Self {
            i_pp: self.i_pp + other.i_pp,
            i_pm: self.i_pm + other.i_pm,
            i_m: self.i_m + other.i_m,
            output2: match (self.output2, other.output2) {
                (Some([a, b]), Some([c, d])) => Some([a + c, b + d]),
                _ => None,
            },
        }
    }

    /// Calibration signals computed from the record normalized to unit power.
    pub fn signals(&self) -> Signals {
        let total = self.total();
        if !(total > 0.0) {
            return Signals {
                s_z: 0.0,
                s_x: 0.0,
                s_x_defined: false,
            };
        }
        let (pp, pm, m) = (self.i_pp / total, self.i_pm / total, self.i_m / total);
        let out1 = pp + pm;
        let s_x_defined = out1 >= 1e-12;
        Signals {
            s_z: out1 - m,
            s_x: if s_x_defined { (pp - pm) / out1 } else { 0.0 },
            s_x_defined,
        }
    }
}

/// `s_z = i_pp + i_pm − i_m` (strength axis) and
/// `s_x = (i_pp − i_pm)/(i_pp + i_pm)` (coherence axis).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Signals {
    pub s_z: f64,
    pub s_x: f64,
    pub s_x_defined: bool,
}

fn check_omega(omega_deg: f64) -> Result<()> {
    if !(-1e-12..=MAX_OMEGA_DEG + 1e-12).contains(&omega_deg) {
        return Err(Error::PlateAngleOutOfRange(omega_deg));
    }
    Ok(())
}

/// `θ = π/2 − 4ω`.
pub fn hwp_to_theta(omega_deg: f64) -> Result<MeasurementStrength> {
    check_omega(omega_deg)?;
    MeasurementStrength::new(std::f64::consts::FRAC_PI_2 - 4.0 * omega_deg.to_radians())
}

/// Inverse of [`hwp_to_theta`], in degrees.
pub fn theta_to_hwp(theta: MeasurementStrength) -> f64 {
    (std::f64::consts::FRAC_PI_2 - theta.radians()).to_degrees() / 4.0
}

/// Jones matrices `(J1, J2)` of the two exits.
pub fn jones_outputs(omega_deg: f64) -> Result<(ComplexMatrix2, ComplexMatrix2)> {
    check_omega(omega_deg)?;
    let (s, c) = (2.0 * omega_deg.to_radians()).sin_cos();
    let j1 = ComplexMatrix2::diag(c, s);
    let sigma_x = ComplexMatrix2::from_real(0.0, 1.0, 1.0, 0.0);
    let j2 = sigma_x * ComplexMatrix2::diag(s, c);
    Ok((j1, j2))
}

/// Linear polarisation prepared by HWP1 at `alpha_deg` from H.
pub fn hwp1_input(alpha_deg: f64) -> [Complex64; 2] {
    let (s, c) = (2.0 * alpha_deg.to_radians()).sin_cos();
    [Complex64::new(c, 0.0), Complex64::new(s, 0.0)]
}

/// Probe phase carried by the polarisation prepared at HWP1 angle α.
pub fn hwp1_to_phase(alpha_deg: f64) -> f64 {
    -4.0 * alpha_deg.to_radians()
}

/// HWP1 angle (degrees) preparing the pure state of phase φ.
pub fn phase_to_hwp1(phi: f64) -> f64 {
    -phi.to_degrees() / 4.0
}

/// Lab-frame density matrix of the dephased probe `(φ, δ)`.
pub fn lab_state(phi: f64, delta: f64) -> Result<QubitState> {
    let r = crate::qubit::dephased_state(phi, delta)?.bloch();
    QubitState::from_bloch(crate::qubit::BlochVector::new(-r.y, -r.z, r.x))
}

fn diagonal_projectors() -> (ComplexMatrix2, ComplexMatrix2) {
    let plus = ComplexMatrix2::from_real(0.5, 0.5, 0.5, 0.5);
    let minus = ComplexMatrix2::from_real(0.5, -0.5, -0.5, 0.5);
    (plus, minus)
}

/// Noiseless response of the device to an arbitrary lab-frame state:
/// `I = Tr[Π J ρ J†]` per channel.
pub fn device_response(config: &DeviceConfig, state: &QubitState) -> Result<IntensityRecord> {
    config.validate()?;
    let (j1, j2) = jones_outputs(config.omega_deg)?;
    let (plus, minus) = diagonal_projectors();
    let rho = *state.density();
    let out1 = j1 * rho * j1.dagger();
    let out2 = j2 * rho * j2.dagger();
    let i_pp = (plus * out1).trace().re;
    let i_pm = (minus * out1).trace().re;
    let i_m = out2.trace().re;
    let output2 = (!config.merge_output2).then(|| [(plus * out2).trace().re, (minus * out2).trace().re]);
    Ok(IntensityRecord {
        i_pp,
        i_pm,
        i_m,
        output2,
    })
}

/// Noiseless detected powers for a pure input `c_H|H⟩ + c_V|V⟩`.
pub fn device_intensities(config: &DeviceConfig, input: [Complex64; 2]) -> Result<IntensityRecord> {
    config.validate()?;
    let n2 = input[0].norm_sqr() + input[1].norm_sqr();
    if (n2 - 1.0).abs() > 1e-10 {
        return Err(Error::AmplitudeNotNormalized(n2));
    }
    let (j1, j2) = jones_outputs(config.omega_deg)?;
    let a = j1 * input;
    let b = j2 * input;
    let k = std::f64::consts::FRAC_1_SQRT_2;
    let i_pp = ((a[0] + a[1]) * k).norm_sqr();
    let i_pm = ((a[0] - a[1]) * k).norm_sqr();
    let i_m = b[0].norm_sqr() + b[1].norm_sqr();
    let output2 = (!config.merge_output2).then(|| [((b[0] + b[1]) * k).norm_sqr(), ((b[0] - b[1]) * k).norm_sqr()]);
    Ok(IntensityRecord {
        i_pp,
        i_pm,
        i_m,
        output2,
    })
}

/// Applies independent multiplicative Gaussian noise of relative standard
/// deviation `noise_rel_std` to every channel, truncated at zero.
pub fn apply_noise<R: Rng + ?Sized>(
    record: &IntensityRecord,
    noise_rel_std: f64,
    rng: &mut R,
) -> Result<IntensityRecord> {
    if noise_rel_std == 0.0 {
        return Ok(*record);
    }
    let normal = Normal::new(0.0, noise_rel_std).map_err(|e| Error::InvalidArgument(format!("noise level: {e}")))?;
    let mut jitter = |x: f64| (x * (1.0 + normal.sample(rng))).max(0.0);
    let i_pp = jitter(record.i_pp);
    let i_pm = jitter(record.i_pm);
    let (i_m, output2) = match record.output2 {
        Some([a, b]) => {
            let (a, b) = (jitter(a), jitter(b));
            (a + b, Some([a, b]))
        }
        None => (jitter(record.i_m), None),
    };
    Ok(IntensityRecord {
        i_pp,
        i_pm,
        i_m,
        output2,
    })
}

/// [`device_intensities`] followed by [`apply_noise`] at the configured level.
pub fn device_intensities_noisy<R: Rng + ?Sized>(
    config: &DeviceConfig,
    input: [Complex64; 2],
    rng: &mut R,
) -> Result<IntensityRecord> {
    let clean = device_intensities(config, input)?;
    apply_noise(&clean, config.noise_rel_std, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationRow {
    pub alpha_deg: f64,
    pub i_pp: f64,
    pub i_pm: f64,
    pub i_m: f64,
    pub s_z: f64,
    pub s_x: f64,
    /// Set when output 1 is dark and `s_x` is undefined (reported as 0).
    pub flagged: bool,
}

/// Noiseless pure-state response as a function of the HWP1 angle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationTable {
    pub omega_deg: f64,
    pub rows: Vec<CalibrationRow>,
}

pub const CALIBRATION_CSV_HEADER: &str = "alpha_deg,i_pp,i_pm,i_m,s_z,s_x";

/// Period of the device response in the HWP1 angle.
pub const HWP1_PERIOD_DEG: f64 = 90.0;

impl CalibrationTable {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CALIBRATION_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e}\n",
                r.alpha_deg, r.i_pp, r.i_pm, r.i_m, r.s_z, r.s_x
            ));
        }
        out
    }

    /// Linearly interpolated intensities `(i_pp, i_pm, i_m)` at HWP1 angle
    /// `alpha_deg`, treating the table as periodic in α with period 90°.
    /// Rows must be sorted by α and span less than one period.
    pub fn interpolate(&self, alpha_deg: f64) -> Result<[f64; 3]> {
        self.interpolate_with(alpha_deg, Interpolation::Linear)
    }

    pub fn interpolate_with(&self, alpha_deg: f64, mode: Interpolation) -> Result<[f64; 3]> {
        let rows = &self.rows;
        let n = rows.len();
        let first = rows.first().ok_or(Error::EmptyCalibration)?;
        if n == 1 {
            return Ok([first.i_pp, first.i_pm, first.i_m]);
        }
        let a = first.alpha_deg + (alpha_deg - first.alpha_deg).rem_euclid(HWP1_PERIOD_DEG);
        let hi = rows.partition_point(|r| r.alpha_deg <= a) % n;
        let lo = (hi + n - 1) % n;
        // angle of row i unwrapped relative to the bracket's lower end
        let angle = |i: usize, base: f64| {
            let d = (rows[i].alpha_deg - base).rem_euclid(HWP1_PERIOD_DEG);
            base + d
        };
        let lo_a = rows[lo].alpha_deg;
        let mut hi_a = angle(hi, lo_a);
        if hi_a <= lo_a {
            hi_a += HWP1_PERIOD_DEG;
        }
        let offset = if a < lo_a { a + HWP1_PERIOD_DEG } else { a };
        let t = (offset - lo_a) / (hi_a - lo_a);
        let value = |r: &CalibrationRow| [r.i_pp, r.i_pm, r.i_m];
        let (y1, y2) = (value(&rows[lo]), value(&rows[hi]));
        let mut out = [0.0; 3];
        match mode {
            Interpolation::CubicPeriodic if n >= 4 => {
                let y0 = value(&rows[(lo + n - 1) % n]);
                let y3 = value(&rows[(hi + 1) % n]);
                let (t2, t3) = (t * t, t * t * t);
                for k in 0..3 {
                    // Catmull-Rom
                    out[k] = 0.5
                        * (2.0 * y1[k]
                            + (y2[k] - y0[k]) * t
                            + (2.0 * y0[k] - 5.0 * y1[k] + 4.0 * y2[k] - y3[k]) * t2
                            + (3.0 * y1[k] - y0[k] - 3.0 * y2[k] + y3[k]) * t3);
                }
            }
            _ => {
                for k in 0..3 {
                    out[k] = y1[k] + t * (y2[k] - y1[k]);
                }
            }
        }
        Ok(out)
    }
}

/// How [`CalibrationTable`] fills in between rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Interpolation {
    #[default]
    Linear,
    /// Catmull-Rom through neighbouring rows, periodic in α. Assumes a
    /// uniform grid; falls back to linear below four rows.
    CubicPeriodic,
}

/// Uniform HWP1 grid over one period, `[0°, 90°)`.
pub fn uniform_alpha_grid(step_deg: f64) -> Result<Vec<f64>> {
    if !(step_deg > 0.0 && step_deg <= HWP1_PERIOD_DEG) {
        return Err(Error::InvalidArgument(format!("invalid calibration step {step_deg}")));
    }
    let n = (HWP1_PERIOD_DEG / step_deg).round() as usize;
    Ok((0..n).map(|i| i as f64 * HWP1_PERIOD_DEG / n as f64).collect())
}

/// Noiseless calibration curves over a grid of HWP1 angles.
pub fn calibration_scan(config: &DeviceConfig, alpha_grid_deg: &[f64]) -> Result<CalibrationTable> {
    config.validate()?;
    let clean = DeviceConfig {
        noise_rel_std: 0.0,
        ..*config
    };
    let mut rows = alpha_grid_deg
        .iter()
        .map(|&alpha| {
            let rec = device_intensities(&clean, hwp1_input(alpha))?;
            let sig = rec.signals();
            Ok(CalibrationRow {
                alpha_deg: alpha,
                i_pp: rec.i_pp,
                i_pm: rec.i_pm,
                i_m: rec.i_m,
                s_z: sig.s_z,
                s_x: sig.s_x,
                flagged: !sig.s_x_defined,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.alpha_deg.total_cmp(&b.alpha_deg));
    Ok(CalibrationTable {
        omega_deg: config.omega_deg,
        rows,
    })
}

/// Mixing weights `w_± = (1 ± e^{−δ₀²})/2`.
pub fn mixture_weights(delta0: f64) -> Result<(f64, f64)> {
    if !(delta0 >= 0.0) {
        return Err(Error::NegativeDiffusion(delta0));
    }
    let q = (-delta0 * delta0).exp();
    Ok((0.5 * (1.0 + q), 0.5 * (1.0 - q)))
}

fn mix_records(
    main: &IntensityRecord,
    partner: &IntensityRecord,
    delta0: f64,
    partner_scale: f64,
) -> Result<IntensityRecord> {
    let (wp, wm) = mixture_weights(delta0)?;
    Ok(main.scaled(wp).plus(&partner.scaled(wm * partner_scale)))
}

/// Emulates the dephased state `(φ₀, δ₀)` by adding the pure-state records
/// for `φ₀` and `φ₀ − π` with weights `w_±`.
pub fn synthesize_mixed(phi0: f64, delta0: f64, config: &DeviceConfig) -> Result<IntensityRecord> {
    let main = device_intensities(config, hwp1_input(phase_to_hwp1(phi0)))?;
    let partner = device_intensities(config, hwp1_input(phase_to_hwp1(phi0 - std::f64::consts::PI)))?;
    mix_records(&main, &partner, delta0, config.partner_scale)
}

/// [`synthesize_mixed`] with detector noise on each pure-state dataset.
pub fn synthesize_mixed_noisy<R: Rng + ?Sized>(
    phi0: f64,
    delta0: f64,
    config: &DeviceConfig,
    rng: &mut R,
) -> Result<IntensityRecord> {
    let main = device_intensities_noisy(config, hwp1_input(phase_to_hwp1(phi0)), rng)?;
    let partner = device_intensities_noisy(config, hwp1_input(phase_to_hwp1(phi0 - std::f64::consts::PI)), rng)?;
    mix_records(&main, &partner, delta0, config.partner_scale)
}
