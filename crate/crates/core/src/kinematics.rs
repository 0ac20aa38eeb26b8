//! Kinematic signals derived from stroke samples.
//!
//! Speed comes from finite differences of consecutive pen positions in the
//! writing plane; values are stamped at interval midpoints so that peak
//! times carry no half-sample bias into the lognormal fitter downstream.

use crate::ink::Stroke;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
#[allow(unused_imports)] use num_traits::Float;

/// Default Gaussian smoothing width in samples (about 4.2 ms at 480 Hz):
/// wide enough to suppress quantization jitter, narrow against lognormal
/// pulses whose widths are tens of milliseconds.
pub const DEFAULT_SMOOTH_SIGMA: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub enum KinematicsError {
    /// Not enough samples to take the requested difference.
    InsufficientSamples { needed: usize, got: usize },
    /// Empty input signal.
    EmptyInput,
    /// Smoothing width must be positive.
    BadSigma { sigma: f64 },
}

impl fmt::Display for KinematicsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KinematicsError::InsufficientSamples { needed, got } => {
                write!(f, "insufficient samples: need >={needed}, got {got}")
            }
            KinematicsError::EmptyInput => write!(f, "empty input"),
            KinematicsError::BadSigma { sigma } => write!(f, "sigma must be positive, got {sigma}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for KinematicsError {}

/// Per-stroke kinematic series on the midpoint time grid.
///
/// All vectors have the same length (stroke length minus one). Speed is
/// writing-plane (x, y) movement; hover height is excluded. Pressure and
/// tilt channels are resampled to the midpoints by averaging interval
/// endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicSeries {
    pub t: Vec<f64>,
    pub speed: Vec<f64>,
    pub pressure: Vec<f64>,
    pub tilt_x: Vec<f64>,
    pub tilt_y: Vec<f64>,
}

impl KinematicSeries {
    /// Wraps a bare (t, speed) pair; auxiliary channels are zeroed.
    /// Useful for synthetic profiles that never had raw samples.
    pub fn from_speed(t: Vec<f64>, speed: Vec<f64>) -> Self {
        assert_eq!(t.len(), speed.len());
        let n = t.len();
        KinematicSeries {
            t,
            speed,
            pressure: vec![0.0; n],
            tilt_x: vec![0.0; n],
            tilt_y: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Total duration spanned by the series, in seconds.
    pub fn duration(&self) -> f64 {
        if self.t.len() < 2 {
            0.0
        } else {
            self.t[self.t.len() - 1] - self.t[0]
        }
    }
}

/// Acceleration on the midpoint grid of a speed series.
#[derive(Debug, Clone, PartialEq)]
pub struct AccelSeries {
    pub t: Vec<f64>,
    pub accel: Vec<f64>,
}

/// Speed profile of a stroke.
///
/// `speed[i] = |(x, y)[i+1] - (x, y)[i]| / (t[i+1] - t[i])`, stamped at the
/// interval midpoint `(t[i] + t[i+1]) / 2`.
pub fn speed_profile(stroke: &Stroke) -> KinematicSeries {
    let samples = stroke.samples();
    let n = samples.len() - 1;
    let mut series = KinematicSeries {
        t: Vec::with_capacity(n),
        speed: Vec::with_capacity(n),
        pressure: Vec::with_capacity(n),
        tilt_x: Vec::with_capacity(n),
        tilt_y: Vec::with_capacity(n),
    };
    for pair in samples.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let dt = b.t - a.t;
        let dist = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
        series.t.push(0.5 * (a.t + b.t));
        series.speed.push(dist / dt);
        series.pressure.push(0.5 * (a.pressure + b.pressure));
        series.tilt_x.push(0.5 * (a.tilt_x + b.tilt_x));
        series.tilt_y.push(0.5 * (a.tilt_y + b.tilt_y));
    }
    series
}

/// Acceleration profile: forward differences of speed, midpoint-stamped.
pub fn accel_profile(series: &KinematicSeries) -> Result<AccelSeries, KinematicsError> {
    if series.len() < 2 {
        return Err(KinematicsError::InsufficientSamples {
            needed: 2,
            got: series.len(),
        });
    }
    let n = series.len() - 1;
    let mut t = Vec::with_capacity(n);
    let mut accel = Vec::with_capacity(n);
    for i in 0..n {
        let dt = series.t[i + 1] - series.t[i];
        t.push(0.5 * (series.t[i] + series.t[i + 1]));
        accel.push((series.speed[i + 1] - series.speed[i]) / dt);
    }
    Ok(AccelSeries { t, accel })
}

/// Discrete Gaussian smoothing with kernel truncated at +-4 sigma and
/// weights renormalized over the in-bounds window, so constants pass
/// through unchanged at the boundaries too.
pub fn smooth(values: &[f64], sigma_samples: f64) -> Result<Vec<f64>, KinematicsError> {
    if values.is_empty() {
        return Err(KinematicsError::EmptyInput);
    }
    if !(sigma_samples > 0.0) {
        return Err(KinematicsError::BadSigma {
            sigma: sigma_samples,
        });
    }
    let radius = (4.0 * sigma_samples).ceil() as usize;
    let mut kernel = Vec::with_capacity(2 * radius + 1);
    for k in -(radius as isize)..=(radius as isize) {
        let u = k as f64 / sigma_samples;
        kernel.push((-0.5 * u * u).exp());
    }
    let n = values.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(radius);
        let hi = (i + radius).min(n - 1);
        let mut acc = 0.0;
        let mut norm = 0.0;
        for j in lo..=hi {
            let w = kernel[j + radius - i];
            acc += w * values[j];
            norm += w;
        }
        out.push(acc / norm);
    }
    Ok(out)
}
