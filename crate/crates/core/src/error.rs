use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("phase diffusion must be non-negative, got {0}")]
    NegativeDiffusion(f64),

    #[error("measurement strength {0} rad outside [0, pi/2]")]
    StrengthOutOfRange(f64),

    #[error("half-wave plate angle {0} deg outside [0, 22.5]")]
    PlateAngleOutOfRange(f64),

    #[error("mixing weight {0} outside [0, 1]")]
    WeightOutOfRange(f64),

    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("Bloch vector norm {0} exceeds 1")]
    BlochNormTooLarge(f64),

    #[error("distribution sums to {0}, expected 1")]
    NotNormalized(f64),

    #[error("input amplitudes have squared norm {0}, expected 1")]
    AmplitudeNotNormalized(f64),

    #[error("finite-difference step must be positive, got {0}")]
    InvalidStep(f64),

    #[error("Fisher matrix is singular; parameters are not jointly identifiable")]
    NonIdentifiable,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("calibration table is empty")]
    EmptyCalibration,
}
