use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum EnsembleKind {
    /// `a = value * Id`.
    Constant { value: f64 },
    /// Independent two-valued scalar per unit cell of side `correlation_length`
    /// (or the deterministic parity pattern when `periodic`).
    Checkerboard { low: f64, high: f64, periodic: bool },
    /// Scalar depending on `x_1` only: `low` on the first half of each period.
    Laminate { low: f64, high: f64, period: f64 },
    /// Smooth periodic profile between `lambda` and 1, optionally with a random phase.
    PeriodicSmooth { random_shift: bool },
    /// Compactly supported smoothing of white noise, mapped onto `[lambda, 1]`.
    /// `z_scale` is the Gaussian value sent to the top of the range.
    GaussianClipped { z_scale: f64 },
}

impl EnsembleKind {
    pub fn name(&self) -> &'static str {
        match self {
            EnsembleKind::Constant { .. } => "constant",
            EnsembleKind::Checkerboard { .. } => "checkerboard",
            EnsembleKind::Laminate { .. } => "laminate",
            EnsembleKind::PeriodicSmooth { .. } => "periodic-smooth",
            EnsembleKind::GaussianClipped { .. } => "gaussian-clipped",
        }
    }

    /// Whether the law of the field is random (depends on the sample index).
    pub fn is_random(&self) -> bool {
        match self {
            EnsembleKind::Constant { .. } | EnsembleKind::Laminate { .. } => false,
            EnsembleKind::Checkerboard { periodic, .. } => !periodic,
            EnsembleKind::PeriodicSmooth { random_shift } => *random_shift,
            EnsembleKind::GaussianClipped { .. } => true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub lambda: f64,
    pub correlation_length: f64,
    pub holder_alpha: f64,
    pub master_seed: u64,
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, lambda: f64, master_seed: u64) -> Self {
        Self {
            kind,
            lambda,
            correlation_length: 1.0,
            holder_alpha: 1.0,
            master_seed,
        }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(EnsembleKind::Constant { value }, value.min(1.0), 0)
    }

    /// Random checkerboard with values `{lambda, 1}`.
    pub fn checkerboard(lambda: f64, master_seed: u64) -> Self {
        Self::new(
            EnsembleKind::Checkerboard {
                low: lambda,
                high: 1.0,
                periodic: false,
            },
            lambda,
            master_seed,
        )
    }

    pub fn periodic_checkerboard(lambda: f64) -> Self {
        Self::new(
            EnsembleKind::Checkerboard {
                low: lambda,
                high: 1.0,
                periodic: true,
            },
            lambda,
            0,
        )
    }

    pub fn laminate(low: f64, high: f64, period: f64) -> Self {
        Self::new(
            EnsembleKind::Laminate { low, high, period },
            low.min(high),
            0,
        )
    }

    pub fn periodic_smooth(lambda: f64, random_shift: bool, master_seed: u64) -> Self {
        Self::new(
            EnsembleKind::PeriodicSmooth { random_shift },
            lambda,
            master_seed,
        )
    }

    pub fn gaussian_clipped(lambda: f64, master_seed: u64) -> Self {
        Self::new(
            EnsembleKind::GaussianClipped { z_scale: 2.0 },
            lambda,
            master_seed,
        )
    }

    pub fn with_correlation_length(mut self, l: f64) -> Self {
        self.correlation_length = l;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let lam = self.lambda;
        if !(lam > 0.0 && lam <= 1.0) {
            return invalid(format!("lambda must lie in (0, 1], got {lam}"));
        }
        if !(self.correlation_length > 0.0 && self.correlation_length.is_finite()) {
            return invalid("correlation length must be positive");
        }
        if !(self.holder_alpha > 0.0 && self.holder_alpha <= 1.0) {
            return invalid(format!(
                "holder exponent must lie in (0, 1], got {}",
                self.holder_alpha
            ));
        }
        let in_range = |v: f64| v >= lam && v <= 1.0;
        match self.kind {
            EnsembleKind::Constant { value } => {
                if !in_range(value) {
                    return invalid(format!("constant value {value} outside [lambda, 1]"));
                }
            }
            EnsembleKind::Checkerboard { low, high, .. } => {
                if !in_range(low) || !in_range(high) {
                    return invalid("checkerboard values must lie in [lambda, 1]");
                }
            }
            EnsembleKind::Laminate { low, high, period } => {
                if !in_range(low) || !in_range(high) {
                    return invalid("laminate values must lie in [lambda, 1]");
                }
                if !(period > 0.0) {
                    return invalid("laminate period must be positive");
                }
            }
            EnsembleKind::PeriodicSmooth { .. } => {}
            EnsembleKind::GaussianClipped { z_scale } => {
                if self.correlation_length != 1.0 {
                    return invalid("gaussian-clipped fields use correlation length 1");
                }
                if !(z_scale > 0.0) {
                    return invalid("z_scale must be positive");
                }
            }
        }
        Ok(())
    }
}
