//! Sigma-lognormal decomposition of stroke speed profiles.
//!
//! A speed profile is modeled as a superposition of lognormal velocity
//! pulses, one per motor impulse. [`extract`] strips pulses greedily from
//! the residual: locate the dominant peak, invert its characteristic points
//! in closed form ([`three_point_estimate`]), optionally polish the four
//! parameters with a damped least-squares descent on the bracketing window,
//! subtract, repeat. Reconstruction quality is scored by [`snr_db`].

use crate::kinematics::{self, KinematicSeries};
use crate::linalg;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
#[allow(unused_imports)] use num_traits::Float;

/// Smoothing width (in samples) applied to the working residual before
/// peak search. Peak location only; the fit itself runs on the raw residual.
const PEAK_SMOOTH_SIGMA: f64 = 2.0;

/// Peaks below this fraction of the observed maximum are noise floor.
const PEAK_FLOOR_FRACTION: f64 = 1e-6;

/// Working-residual clamp, as a fraction of the last extracted pulse peak.
const RESIDUAL_CLAMP_FRACTION: f64 = 0.05;

/// Dispersion bounds during estimation and refinement. The lower bound
/// matters: as `sigma -> 0` with `t0 -> -inf` a lognormal degenerates into
/// a symmetric spike, a flat valley of the cost surface that overlapped
/// pulses would otherwise slide into.
const SIGMA_MIN: f64 = 0.03;
const SIGMA_MAX: f64 = 2.5;

#[derive(Debug, Clone, PartialEq)]
pub enum LognormError {
    /// Input series too short (or too brief) to fit.
    StrokeTooShort { n_samples: usize, duration: f64 },
    /// The three characteristic points do not describe a lognormal flank pair.
    DegenerateCharacteristicPoints,
    /// Observed/reconstructed length mismatch in SNR computation.
    LengthMismatch { observed: usize, reconstructed: usize },
    /// SNR of empty signals is undefined.
    EmptyInput,
}

impl fmt::Display for LognormError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LognormError::StrokeTooShort {
                n_samples,
                duration,
            } => write!(
                f,
                "stroke too short to fit: {n_samples} samples over {duration} s"
            ),
            LognormError::DegenerateCharacteristicPoints => {
                write!(f, "degenerate characteristic points")
            }
            LognormError::LengthMismatch {
                observed,
                reconstructed,
            } => write!(
                f,
                "length mismatch: observed {observed}, reconstructed {reconstructed}"
            ),
            LognormError::EmptyInput => write!(f, "empty input"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for LognormError {}

/// One lognormal velocity pulse.
///
/// `t0` is the command onset time in seconds, `d` the pulse amplitude
/// (path length covered by the impulse), `mu` the log-time location and
/// `sigma` the log-time dispersion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LognormalComponent {
    pub t0: f64,
    pub d: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl LognormalComponent {
    /// Time of maximum speed: `t0 + exp(mu - sigma^2)`.
    pub fn peak_time(&self) -> f64 {
        self.t0 + (self.mu - self.sigma * self.sigma).exp()
    }

    /// Maximum speed of the pulse.
    pub fn peak_speed(&self) -> f64 {
        let s2 = self.sigma * self.sigma;
        self.d / (self.sigma * (2.0 * PI).sqrt()) * (0.5 * s2 - self.mu).exp()
    }

    /// Checks `sigma > 0`, `d > 0`, finiteness of all parameters.
    pub fn is_valid(&self) -> bool {
        self.sigma > 0.0
            && self.d > 0.0
            && self.t0.is_finite()
            && self.d.is_finite()
            && self.mu.is_finite()
            && self.sigma.is_finite()
    }
}

/// Speed contribution of one pulse at time `t`; zero at and before onset.
///
/// The integral of this function over all `t` equals `d`.
pub fn lognormal_speed(c: &LognormalComponent, t: f64) -> f64 {
    let tau = t - c.t0;
    if tau <= 0.0 {
        return 0.0;
    }
    let z = (tau.ln() - c.mu) / c.sigma;
    c.d / (c.sigma * (2.0 * PI).sqrt() * tau) * (-0.5 * z * z).exp()
}

/// Pointwise sum of all pulse speeds on a time grid.
pub fn synthesize(components: &[LognormalComponent], t_grid: &[f64]) -> Vec<f64> {
    t_grid
        .iter()
        .map(|&t| components.iter().map(|c| lognormal_speed(c, t)).sum())
        .collect()
}

/// Reconstruction signal-to-noise ratio in decibels:
/// `10 log10(sum obs^2 / sum (obs - rec)^2)`, capped at 100 dB.
/// Zero-energy observations score 0 dB.
pub fn snr_db(observed: &[f64], reconstructed: &[f64]) -> Result<f64, LognormError> {
    if observed.len() != reconstructed.len() {
        return Err(LognormError::LengthMismatch {
            observed: observed.len(),
            reconstructed: reconstructed.len(),
        });
    }
    if observed.is_empty() {
        return Err(LognormError::EmptyInput);
    }
    let signal: f64 = observed.iter().map(|v| v * v).sum();
    if signal == 0.0 {
        return Ok(0.0);
    }
    let residual: f64 = observed
        .iter()
        .zip(reconstructed)
        .map(|(o, r)| (o - r) * (o - r))
        .sum();
    if residual <= 1e-20 * signal {
        return Ok(100.0);
    }
    Ok((10.0 * (signal / residual).log10()).min(100.0))
}

/// Extraction configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    /// Stop once the reconstruction reaches this SNR.
    pub snr_target_db: f64,
    /// Hard cap on the number of pulses.
    pub max_components: usize,
    /// Fraction of the peak at which flank crossings are read (0 < alpha < 1).
    pub alpha: f64,
    /// A pulse must improve SNR by at least this much to be kept.
    pub min_gain_db: f64,
    /// Polish each pulse by damped least squares on its bracketing window.
    pub refine: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            snr_target_db: 25.0,
            max_components: 20,
            alpha: 0.5,
            min_gain_db: 0.5,
            refine: true,
        }
    }
}

/// Result of decomposing one speed profile.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Extracted pulses, sorted by onset time.
    pub components: Vec<LognormalComponent>,
    /// Reconstruction SNR against the observed profile, in dB.
    pub snr_db: f64,
}

impl FitResult {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// SNR normalized by the number of pulses (`snr_db` itself when empty).
    pub fn snr_over_c(&self) -> f64 {
        self.snr_db / (self.n_components().max(1) as f64)
    }
}

/// Inverts one lognormal pulse from its peak and two flank crossings at
/// `alpha * v_max`.
///
/// Exact for a noiseless isolated pulse: the peak time is the geometric
/// mean of the two crossing times measured from the onset, which pins
/// `t0`; the flank asymmetry then yields `sigma`, `mu`, and `d`.
pub fn three_point_estimate(
    t_left: f64,
    t_mode: f64,
    t_right: f64,
    v_max: f64,
    alpha: f64,
) -> Result<LognormalComponent, LognormError> {
    if !(t_left < t_mode && t_mode < t_right) || !(v_max > 0.0) || !(alpha > 0.0 && alpha < 1.0) {
        return Err(LognormError::DegenerateCharacteristicPoints);
    }
    let beta = (2.0 * (1.0 / alpha).ln()).sqrt();
    let denom = 2.0 * t_mode - t_left - t_right;
    // For a true lognormal the crossings' arithmetic mean exceeds the mode,
    // so the denominator is strictly negative; a symmetric triple is not a
    // lognormal on linear time.
    if denom >= -1e-12 * (t_right - t_left) {
        return Err(LognormError::DegenerateCharacteristicPoints);
    }
    let t0 = (t_mode * t_mode - t_left * t_right) / denom;
    if !(t0 < t_left) || !t0.is_finite() {
        return Err(LognormError::DegenerateCharacteristicPoints);
    }
    let sigma = ((t_right - t0) / (t_mode - t0)).ln() / beta;
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(LognormError::DegenerateCharacteristicPoints);
    }
    let mu = (t_mode - t0).ln() + sigma * sigma;
    let d = v_max * sigma * (2.0 * PI).sqrt() * (mu - 0.5 * sigma * sigma).exp();
    let component = LognormalComponent { t0, d, mu, sigma };
    if !component.is_valid() {
        return Err(LognormError::DegenerateCharacteristicPoints);
    }
    Ok(component)
}

/// Greedy extraction of lognormal pulses from a speed profile.
///
/// Repeats until the SNR target, the component cap, or a diminishing-gain
/// stop: smooth the working residual, take its dominant peak, invert the
/// characteristic points (half-peak crossings, falling back to the
/// inflection pair when a flank is occluded by a neighbor), optionally
/// refine, then subtract. The returned components are sorted by onset.
pub fn extract(series: &KinematicSeries, cfg: &FitConfig) -> Result<FitResult, LognormError> {
    let n = series.len();
    if n < 8 || series.duration() <= 0.010 {
        return Err(LognormError::StrokeTooShort {
            n_samples: n,
            duration: series.duration(),
        });
    }
    let t = &series.t;
    let obs = &series.speed;
    let obs_peak = obs.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));

    let mut residual = obs.clone();
    let mut recon = vec![0.0; n];
    let mut components: Vec<LognormalComponent> = Vec::new();
    let mut snr = snr_db(obs, &recon)?;

    while components.len() < cfg.max_components && snr < cfg.snr_target_db {
        let smoothed = kinematics::smooth(&residual, PEAK_SMOOTH_SIGMA).expect("non-empty");
        let Some(peak_idx) = dominant_peak(&smoothed) else {
            break;
        };
        if smoothed[peak_idx] <= PEAK_FLOOR_FRACTION * obs_peak {
            break;
        }

        let Some((mut component, window)) = estimate_component(t, &smoothed, peak_idx, cfg.alpha)
        else {
            break;
        };
        if cfg.refine {
            component = refine(t, &residual, component, window);
        }
        if !component.is_valid() {
            break;
        }

        let mut candidate = recon.clone();
        for (c, &ti) in candidate.iter_mut().zip(t.iter()) {
            *c += lognormal_speed(&component, ti);
        }
        let candidate_snr = snr_db(obs, &candidate)?;
        if candidate_snr - snr < cfg.min_gain_db {
            break;
        }

        let clamp = -RESIDUAL_CLAMP_FRACTION * component.peak_speed();
        for i in 0..n {
            residual[i] = (residual[i] - lognormal_speed(&component, t[i])).max(clamp);
        }
        recon = candidate;
        snr = candidate_snr;
        components.push(component);
    }

    components.sort_by(|a, b| a.t0.partial_cmp(&b.t0).expect("finite onsets"));
    Ok(FitResult {
        components,
        snr_db: snr,
    })
}

/// Index of the highest local maximum; ties break toward earlier time.
/// Falls back to the global argmax when the signal is monotone.
fn dominant_peak(values: &[f64]) -> Option<usize> {
    let n = values.len();
    if n < 3 {
        return None;
    }
    let mut best: Option<usize> = None;
    for i in 1..n - 1 {
        if values[i] >= values[i - 1] && values[i] >= values[i + 1] {
            if best.map_or(true, |b| values[i] > values[b]) {
                best = Some(i);
            }
        }
    }
    best.or_else(|| {
        let mut idx = 0;
        for i in 1..n {
            if values[i] > values[idx] {
                idx = i;
            }
        }
        Some(idx)
    })
}

/// Outcome of walking one flank away from a peak.
struct FlankScan {
    /// Interpolated crossing time, when the flank reaches the target level.
    crossing: Option<f64>,
    /// Last index visited: crossing sample, bracketing local minimum, or boundary.
    stop: usize,
}

/// Walks from `peak` in direction `step` until the signal drops to `target`
/// or turns back up (a local minimum occludes the crossing).
fn scan_flank(t: &[f64], values: &[f64], peak: usize, target: f64, step: isize) -> FlankScan {
    let n = values.len() as isize;
    let mut i = peak as isize;
    loop {
        let next = i + step;
        if next < 0 || next >= n {
            return FlankScan {
                crossing: None,
                stop: i as usize,
            };
        }
        let (iu, nu) = (i as usize, next as usize);
        if values[nu] <= target {
            let run = values[iu] - values[nu];
            let frac = if run > 0.0 {
                (values[iu] - target) / run
            } else {
                1.0
            };
            return FlankScan {
                crossing: Some(t[iu] + frac * (t[nu] - t[iu])),
                stop: nu,
            };
        }
        if values[nu] >= values[iu] {
            // Rising again: the flank bottomed out above the target.
            return FlankScan {
                crossing: None,
                stop: iu,
            };
        }
        i = next;
    }
}

/// Sub-sample peak location by parabolic interpolation through the peak
/// sample and its neighbors. Returns `(t_mode, v_max)`.
fn interpolate_peak(t: &[f64], values: &[f64], peak: usize) -> (f64, f64) {
    if peak == 0 || peak + 1 >= values.len() {
        return (t[peak], values[peak]);
    }
    let (ym, y0, yp) = (values[peak - 1], values[peak], values[peak + 1]);
    let curvature = ym - 2.0 * y0 + yp;
    if curvature >= 0.0 {
        return (t[peak], values[peak]);
    }
    let delta = 0.5 * (ym - yp) / curvature;
    if delta.abs() > 1.0 {
        return (t[peak], values[peak]);
    }
    let dt = 0.5 * (t[peak + 1] - t[peak - 1]);
    (t[peak] + delta * dt, y0 - 0.25 * (ym - yp) * delta)
}

/// Estimates a pulse from the smoothed residual around `peak`.
///
/// Primary route: half-peak crossings on both flanks. When a flank is
/// occluded, fall back to the inflection-point pair, whose velocity ratios
/// determine `sigma` (and then `t0`) in closed form. As a last resort,
/// place a medium-width pulse matching the peak position and height.
/// Returns the estimate and the sample window that brackets the pulse.
fn estimate_component(
    t: &[f64],
    smoothed: &[f64],
    peak: usize,
    alpha: f64,
) -> Option<(LognormalComponent, (usize, usize))> {
    let (t_mode, v_max) = interpolate_peak(t, smoothed, peak);
    if !(v_max > 0.0) {
        return None;
    }
    let target = alpha * v_max;
    let left = scan_flank(t, smoothed, peak, target, -1);
    let right = scan_flank(t, smoothed, peak, target, 1);
    let window = expand_window(left.stop, right.stop, t.len());

    if let (Some(t_left), Some(t_right)) = (left.crossing, right.crossing) {
        if let Ok(c) = three_point_estimate(t_left, t_mode, t_right, v_max, alpha) {
            return Some((c, window));
        }
    }
    if let Some(c) = inflection_estimate(t, smoothed, peak, left.stop, right.stop, t_mode, v_max) {
        return Some((c, window));
    }
    // One clean flank is enough: read it at two levels and invert.
    let inner = alpha.sqrt();
    if right.crossing.is_some() {
        let upper = scan_flank(t, smoothed, peak, inner * v_max, 1);
        if let (Some(t2), Some(t1)) = (right.crossing, upper.crossing) {
            if let Some(c) = one_sided_estimate(t_mode, v_max, t1, inner, t2, alpha, Side::Right) {
                return Some((c, window));
            }
        }
    }
    if left.crossing.is_some() {
        let upper = scan_flank(t, smoothed, peak, inner * v_max, -1);
        if let (Some(t2), Some(t1)) = (left.crossing, upper.crossing) {
            if let Some(c) = one_sided_estimate(t_mode, v_max, t1, inner, t2, alpha, Side::Left) {
                return Some((c, window));
            }
        }
    }
    fallback_estimate(t, t_mode, v_max, left.stop, right.stop).map(|c| (c, window))
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Left,
    Right,
}

/// Inverts a pulse from its peak plus two crossings on a single flank.
///
/// With crossings `t1`, `t2` at level fractions `f1 > f2` of the peak, the
/// flank equations `ln((t_i - t0) / (t_mode - t0)) = sigma * b_i` (right
/// flank; mirrored on the left) leave one transcendental equation in `t0`
/// once `sigma` is eliminated; it is solved by bisection, the rest follows
/// in closed form.
fn one_sided_estimate(
    t_mode: f64,
    v_max: f64,
    t1: f64,
    f1: f64,
    t2: f64,
    f2: f64,
    side: Side,
) -> Option<LognormalComponent> {
    let b1 = (2.0 * (1.0 / f1).ln()).sqrt();
    let b2 = (2.0 * (1.0 / f2).ln()).sqrt();
    // Log of the flank ratio for a candidate onset; positive by construction.
    let ratio = |t0: f64, tc: f64| -> f64 {
        match side {
            Side::Right => ((tc - t0) / (t_mode - t0)).ln(),
            Side::Left => ((t_mode - t0) / (tc - t0)).ln(),
        }
    };
    let farthest = match side {
        Side::Right => t2.max(t1),
        Side::Left => t2.min(t1),
    };
    if side == Side::Right && !(t_mode < t1 && t1 < t2) {
        return None;
    }
    if side == Side::Left && !(t2 < t1 && t1 < t_mode) {
        return None;
    }
    let upper_limit = match side {
        Side::Right => t_mode,
        Side::Left => t2,
    };
    let mismatch = |t0: f64| b2 * ratio(t0, t1) - b1 * ratio(t0, t2);
    // G -> +inf as t0 approaches the pulse from below and -> 0- far away;
    // expand left until the sign flips, then bisect.
    let span = (t2 - t_mode).abs().max(t_mode - t1).max(1e-6);
    let mut hi = upper_limit - 1e-9 * span.max(1.0);
    if !(mismatch(hi) > 0.0) {
        return None;
    }
    let mut lo = upper_limit - span;
    let mut expansions = 0;
    while mismatch(lo) > 0.0 {
        lo = upper_limit - (upper_limit - lo) * 2.0;
        expansions += 1;
        if expansions > 60 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mismatch(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let t0 = 0.5 * (lo + hi);
    if !t0.is_finite() || t0 >= farthest.min(t_mode) {
        return None;
    }
    let sigma = ratio(t0, t1) / b1;
    if !(SIGMA_MIN..=SIGMA_MAX).contains(&sigma) {
        return None;
    }
    let mu = (t_mode - t0).ln() + sigma * sigma;
    let d = v_max * sigma * (2.0 * PI).sqrt() * (mu - 0.5 * sigma * sigma).exp();
    let c = LognormalComponent { t0, d, mu, sigma };
    c.is_valid().then_some(c)
}

/// Closed-form inversion from the inflection-point pair.
///
/// For a lognormal pulse the product of the flank speeds at the inflection
/// points satisfies `v- * v+ / v_max^2 = exp(-(sigma^2 + 2) / 2)`, giving
/// `sigma` directly; the ratio of inflection offsets from onset is
/// `exp(sigma * sqrt(sigma^2 + 4))`, which then pins `t0` linearly.
fn inflection_estimate(
    t: &[f64],
    values: &[f64],
    peak: usize,
    left_stop: usize,
    right_stop: usize,
    t_mode: f64,
    v_max: f64,
) -> Option<LognormalComponent> {
    let steepest = |lo: usize, hi: usize, rising: bool| -> Option<(f64, f64)> {
        if hi <= lo {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        for j in lo..hi {
            let slope = (values[j + 1] - values[j]) / (t[j + 1] - t[j]);
            let score = if rising { slope } else { -slope };
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let (j, score) = best?;
        if score <= 0.0 {
            return None;
        }
        Some((
            0.5 * (t[j] + t[j + 1]),
            0.5 * (values[j] + values[j + 1]),
        ))
    };
    let (t_il, v_il) = steepest(left_stop, peak, true)?;
    let (t_ir, v_ir) = steepest(peak, right_stop, false)?;
    if !(v_il > 0.0 && v_ir > 0.0) {
        return None;
    }
    let ratio = v_il * v_ir / (v_max * v_max);
    if !(ratio > 0.0) || ratio >= (-1.0_f64).exp() {
        return None;
    }
    let sigma_sq = -2.0 * ratio.ln() - 2.0;
    let sigma = sigma_sq.sqrt();
    if !(SIGMA_MIN..=SIGMA_MAX).contains(&sigma) {
        return None;
    }
    let k = (sigma * (sigma_sq + 4.0).sqrt()).exp();
    let t0 = (t_il * k - t_ir) / (k - 1.0);
    if !t0.is_finite() || t0 >= t_mode - 1e-9 {
        return None;
    }
    let mu = (t_mode - t0).ln() + sigma_sq;
    let d = v_max * sigma * (2.0 * PI).sqrt() * (mu - 0.5 * sigma_sq).exp();
    let c = LognormalComponent { t0, d, mu, sigma };
    c.is_valid().then_some(c)
}

/// Last-resort initializer: a sigma = 0.3 pulse whose mode and height match
/// the observed peak, onset displaced by the bracket width.
fn fallback_estimate(
    t: &[f64],
    t_mode: f64,
    v_max: f64,
    left_stop: usize,
    right_stop: usize,
) -> Option<LognormalComponent> {
    let width = (t[right_stop] - t[left_stop]).max(t[1] - t[0]);
    let sigma = 0.3;
    let t0 = t_mode - width;
    let mu = (t_mode - t0).ln() + sigma * sigma;
    let d = v_max * sigma * (2.0 * PI).sqrt() * (mu - 0.5 * sigma * sigma).exp();
    let c = LognormalComponent { t0, d, mu, sigma };
    c.is_valid().then_some(c)
}

/// Expands a flank bracket by a quarter of its width on each side.
fn expand_window(lo: usize, hi: usize, n: usize) -> (usize, usize) {
    let width = hi.saturating_sub(lo).max(4);
    let margin = width / 4 + 1;
    (lo.saturating_sub(margin), (hi + margin).min(n - 1))
}

/// Damped least-squares polish of one pulse against the working residual,
/// restricted to the bracketing window.
///
/// Works on `(t0, ln d, mu, ln sigma)` so positivity needs no constraints,
/// with a numeric Jacobian and a Levenberg-style trust region: steps that
/// reduce the squared error shrink the damping, rejected steps grow it.
/// Stops after an accepted step changes no parameter by more than 1e-6
/// relative, or after 200 iterations.
fn refine(
    t: &[f64],
    residual: &[f64],
    initial: LognormalComponent,
    window: (usize, usize),
) -> LognormalComponent {
    let (lo, hi) = window;
    let tw = &t[lo..=hi];
    let rw = &residual[lo..=hi];
    let m = tw.len();
    if m < 5 {
        return initial;
    }

    let pack = |c: &LognormalComponent| [c.t0, c.d.ln(), c.mu, c.sigma.ln()];
    let unpack = |q: &[f64; 4]| LognormalComponent {
        t0: q[0],
        d: q[1].exp(),
        mu: q[2],
        sigma: q[3].exp().clamp(1e-4, 5.0),
    };
    let cost = |q: &[f64; 4], out: Option<&mut Vec<f64>>| -> f64 {
        let c = unpack(q);
        let mut total = 0.0;
        match out {
            Some(r) => {
                r.clear();
                for (&ti, &vi) in tw.iter().zip(rw) {
                    let e = vi - lognormal_speed(&c, ti);
                    r.push(e);
                    total += e * e;
                }
            }
            None => {
                for (&ti, &vi) in tw.iter().zip(rw) {
                    let e = vi - lognormal_speed(&c, ti);
                    total += e * e;
                }
            }
        }
        total
    };

    let mut q = pack(&initial);
    let mut r = Vec::with_capacity(m);
    let mut best_cost = cost(&q, Some(&mut r));
    if !best_cost.is_finite() {
        return initial;
    }
    let mut lambda = 1e-3;
    let mut jac = vec![0.0; m * 4];
    let mut r_pert = Vec::with_capacity(m);

    for _ in 0..200 {
        // Forward-difference Jacobian of the residual vector.
        for j in 0..4 {
            let h = 1e-6 * (q[j].abs() + 1e-2);
            let mut qh = q;
            qh[j] += h;
            cost(&qh, Some(&mut r_pert));
            for i in 0..m {
                jac[i * 4 + j] = (r_pert[i] - r[i]) / h;
            }
        }
        let mut jtj = [0.0; 16];
        let mut jtr = [0.0; 4];
        for i in 0..m {
            for a in 0..4 {
                let ja = jac[i * 4 + a];
                jtr[a] += ja * r[i];
                for b in a..4 {
                    jtj[a * 4 + b] += ja * jac[i * 4 + b];
                }
            }
        }
        for a in 0..4 {
            for b in 0..a {
                jtj[a * 4 + b] = jtj[b * 4 + a];
            }
        }

        let mut accepted = false;
        for _ in 0..12 {
            let mut damped = jtj;
            for a in 0..4 {
                damped[a * 4 + a] += lambda * jtj[a * 4 + a].max(1e-12);
            }
            let rhs = [-jtr[0], -jtr[1], -jtr[2], -jtr[3]];
            let Some(step) = linalg::solve_spd(&damped, &rhs, 4) else {
                lambda *= 10.0;
                continue;
            };
            let mut q_new = q;
            for a in 0..4 {
                q_new[a] += step[a];
            }
            let new_cost = cost(&q_new, Some(&mut r_pert));
            if new_cost.is_finite() && new_cost < best_cost {
                let rel_change = (0..4)
                    .map(|a| step[a].abs() / (q[a].abs() + 1e-9))
                    .fold(0.0_f64, f64::max);
                q = q_new;
                best_cost = new_cost;
                core::mem::swap(&mut r, &mut r_pert);
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if rel_change < 1e-6 {
                    return unpack(&q);
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e12 {
                return unpack(&q);
            }
        }
        if !accepted {
            break;
        }
    }
    unpack(&q)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Golden-section argmax of a unimodal function on [a, b].
    fn argmax_golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let inv_phi = 0.618_033_988_749_894_9;
        for _ in 0..200 {
            let c = b - inv_phi * (b - a);
            let d = a + inv_phi * (b - a);
            if f(c) > f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    /// Bisection solve of f(t) = level on [a, b] where f is monotone.
    fn bisect_crossing(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, level: f64) -> f64 {
        let rising = f(b) > f(a);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            let above = f(mid) > level;
            if above == rising {
                b = mid;
            } else {
                a = mid;
            }
        }
        0.5 * (a + b)
    }

    /// Composite Simpson quadrature.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n_even: usize) -> f64 {
        let h = (b - a) / n_even as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n_even {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    fn spec_component() -> LognormalComponent {
        LognormalComponent {
            t0: 0.05,
            d: 8.0,
            mu: -1.2,
            sigma: 0.4,
        }
    }

    #[test]
    fn speed_is_zero_at_and_before_onset() {
        let c = spec_component();
        assert_eq!(lognormal_speed(&c, c.t0), 0.0);
        assert_eq!(lognormal_speed(&c, c.t0 - 0.2), 0.0);
        assert!(lognormal_speed(&c, c.t0 + 1e-6) >= 0.0);
    }

    #[test]
    fn peak_location_matches_numeric_argmax() {
        let c = LognormalComponent {
            t0: 0.0,
            d: 1.0,
            mu: -1.0,
            sigma: 0.3,
        };
        let closed = c.peak_time();
        assert!((closed - 0.33622).abs() < 1e-4);
        let numeric = argmax_golden(|t| lognormal_speed(&c, t), 1e-6, 2.0);
        assert!((closed - numeric).abs() < 1e-9);
        // Non-negative and unimodal on a grid.
        let grid: Vec<f64> = (0..2000).map(|i| i as f64 * 1e-3).collect();
        let vals = synthesize(&[c], &grid);
        let peak_idx = vals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!((grid[peak_idx] - closed).abs() <= 1e-3);
        for i in 1..=peak_idx {
            assert!(vals[i] >= vals[i - 1] - 1e-12);
        }
        for i in peak_idx + 1..vals.len() {
            assert!(vals[i] <= vals[i - 1] + 1e-12);
        }
        for v in vals {
            assert!(v >= 0.0);
        }
    }

    #[test]
    fn pulse_integral_equals_amplitude() {
        let c = spec_component();
        let integral = simpson(|t| lognormal_speed(&c, t), c.t0, c.t0 + 10.0, 400_000);
        assert!(
            (integral - c.d).abs() / c.d < 1e-4,
            "integral {integral} vs d {}",
            c.d
        );
    }

    #[test]
    fn three_point_recovers_spec_pulse() {
        let c = spec_component();
        let alpha = 0.5;
        let t_peak = c.peak_time();
        let v_max = c.peak_speed();
        let level = alpha * v_max;
        let f = |t: f64| lognormal_speed(&c, t);
        let t_left = bisect_crossing(&f, c.t0 + 1e-9, t_peak, level);
        let t_right = bisect_crossing(&f, t_peak, t_peak + 5.0, level);
        // Characteristic points for this pulse, to four decimals.
        assert!((t_left - 0.2102).abs() < 1e-3);
        assert!((t_peak - 0.3067).abs() < 1e-3);
        assert!((t_right - 0.4610).abs() < 1e-3);
        assert!((v_max - 28.70).abs() < 1e-2);

        let rec = three_point_estimate(t_left, t_peak, t_right, v_max, alpha).unwrap();
        assert!((rec.t0 - c.t0).abs() / c.t0.abs() < 1e-6);
        assert!((rec.mu - c.mu).abs() / c.mu.abs() < 1e-6);
        assert!((rec.sigma - c.sigma).abs() / c.sigma < 1e-6);
        assert!((rec.d - c.d).abs() / c.d < 1e-6);
    }

    #[test]
    fn three_point_rejects_symmetric_triple() {
        let err = three_point_estimate(0.1, 0.2, 0.3, 10.0, 0.5).unwrap_err();
        assert_eq!(err, LognormError::DegenerateCharacteristicPoints);
    }

    #[test]
    fn three_point_round_trip_random_pulses() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5106);
        for _ in 0..200 {
            let c = LognormalComponent {
                t0: rng.gen_range(0.01..0.5),
                d: rng.gen_range(1.0..20.0),
                mu: rng.gen_range(-2.5..-0.5),
                sigma: rng.gen_range(0.1..0.9),
            };
            let alpha = 0.5;
            let t_peak = c.peak_time();
            let v_max = c.peak_speed();
            let level = alpha * v_max;
            let f = |t: f64| lognormal_speed(&c, t);
            let t_left = bisect_crossing(&f, c.t0 + 1e-12, t_peak, level);
            let t_right = bisect_crossing(&f, t_peak, t_peak + 60.0, level);
            let rec = three_point_estimate(t_left, t_peak, t_right, v_max, alpha).unwrap();
            for (got, want) in [
                (rec.t0, c.t0),
                (rec.d, c.d),
                (rec.mu, c.mu),
                (rec.sigma, c.sigma),
            ] {
                assert!(
                    (got - want).abs() / want.abs() < 1e-6,
                    "got {got}, want {want} for {c:?}"
                );
            }
        }
    }

    #[test]
    fn synthesize_cases() {
        let grid: Vec<f64> = (0..100).map(|i| 0.01 * i as f64).collect();
        assert!(synthesize(&[], &grid).iter().all(|&v| v == 0.0));

        let a = spec_component();
        let single = synthesize(&[a], &grid);
        for (i, &ti) in grid.iter().enumerate() {
            assert_eq!(single[i], lognormal_speed(&a, ti));
        }

        let b = LognormalComponent {
            t0: 0.3,
            d: 4.0,
            mu: -1.8,
            sigma: 0.25,
        };
        let both = synthesize(&[a, b], &grid);
        for (i, &ti) in grid.iter().enumerate() {
            let sum = lognormal_speed(&a, ti) + lognormal_speed(&b, ti);
            assert!((both[i] - sum).abs() < 1e-12);
        }
    }

    #[test]
    fn snr_cases() {
        assert_eq!(snr_db(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 100.0);
        assert_eq!(snr_db(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), 0.0);
        let v = snr_db(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((v - 10.0 * 2.0_f64.log10()).abs() < 1e-12);
        assert!((v - 3.0103).abs() < 1e-4);
        assert_eq!(snr_db(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(
            snr_db(&[1.0], &[1.0, 2.0]),
            Err(LognormError::LengthMismatch { .. })
        ));
    }

    fn grid_480(duration: f64) -> Vec<f64> {
        let dt = 1.0 / 480.0;
        let n = (duration / dt).ceil() as usize;
        (0..n).map(|i| i as f64 * dt).collect()
    }

    #[test]
    fn extract_single_noiseless_pulse() {
        let truth = spec_component();
        let grid = grid_480(1.0);
        let speed = synthesize(&[truth], &grid);
        let series = KinematicSeries::from_speed(grid, speed);
        let fit = extract(&series, &FitConfig::default()).unwrap();
        assert_eq!(fit.n_components(), 1);
        assert!(fit.snr_db >= 40.0, "snr {}", fit.snr_db);
        let c = fit.components[0];
        assert!((c.t0 - truth.t0).abs() / truth.t0 < 0.02);
        assert!((c.d - truth.d).abs() / truth.d < 0.02);
        assert!((c.mu - truth.mu).abs() / truth.mu.abs() < 0.02);
        assert!((c.sigma - truth.sigma).abs() / truth.sigma < 0.02);
    }

    #[test]
    fn extract_three_pulses() {
        let truth = [
            LognormalComponent {
                t0: 0.02,
                d: 6.0,
                mu: -1.6,
                sigma: 0.30,
            },
            LognormalComponent {
                t0: 0.16,
                d: 9.0,
                mu: -1.4,
                sigma: 0.35,
            },
            LognormalComponent {
                t0: 0.34,
                d: 5.0,
                mu: -1.7,
                sigma: 0.25,
            },
        ];
        // Mode separations comfortably above 60 ms.
        let modes: Vec<f64> = truth.iter().map(|c| c.peak_time()).collect();
        assert!(modes[1] - modes[0] >= 0.06 && modes[2] - modes[1] >= 0.06);
        let grid = grid_480(1.2);
        let speed = synthesize(&truth, &grid);
        let series = KinematicSeries::from_speed(grid, speed);
        let fit = extract(&series, &FitConfig::default()).unwrap();
        assert!(
            fit.n_components() == 3 || fit.n_components() == 4,
            "C = {}",
            fit.n_components()
        );
        assert!(fit.snr_db >= 25.0, "snr {}", fit.snr_db);
    }

    #[test]
    fn extract_terminates_on_noise() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let grid = grid_480(0.5);
        let speed: Vec<f64> = grid.iter().map(|_| rng.gen_range(0.0..1.0)).collect();
        let series = KinematicSeries::from_speed(grid, speed);
        let cfg = FitConfig::default();
        let fit = extract(&series, &cfg).unwrap();
        assert!(fit.n_components() <= cfg.max_components);
    }

    #[test]
    fn extract_is_deterministic() {
        let truth = spec_component();
        let grid = grid_480(0.9);
        let speed = synthesize(&[truth], &grid);
        let series = KinematicSeries::from_speed(grid, speed);
        let a = extract(&series, &FitConfig::default()).unwrap();
        let b = extract(&series, &FitConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn extract_rejects_short_series() {
        let series = KinematicSeries::from_speed(
            alloc::vec![0.0, 0.001, 0.002, 0.003],
            alloc::vec![1.0, 2.0, 2.0, 1.0],
        );
        assert!(matches!(
            extract(&series, &FitConfig::default()),
            Err(LognormError::StrokeTooShort { .. })
        ));
    }

    #[test]
    fn extract_time_shift_equivariance() {
        let truth = spec_component();
        let grid = grid_480(1.0);
        let speed = synthesize(&[truth], &grid);
        let base = extract(
            &KinematicSeries::from_speed(grid.clone(), speed.clone()),
            &FitConfig::default(),
        )
        .unwrap();
        let delta = 0.25;
        let shifted_grid: Vec<f64> = grid.iter().map(|t| t + delta).collect();
        let shifted = extract(
            &KinematicSeries::from_speed(shifted_grid, speed),
            &FitConfig::default(),
        )
        .unwrap();
        assert_eq!(base.n_components(), shifted.n_components());
        for (a, b) in base.components.iter().zip(&shifted.components) {
            assert!((b.t0 - a.t0 - delta).abs() < 1e-3);
            assert!((b.d - a.d).abs() / a.d < 1e-3);
            assert!((b.mu - a.mu).abs() / a.mu.abs() < 1e-3);
            assert!((b.sigma - a.sigma).abs() / a.sigma < 1e-3);
        }
    }

    #[test]
    fn extract_amplitude_equivariance() {
        let truth = spec_component();
        let grid = grid_480(1.0);
        let speed = synthesize(&[truth], &grid);
        let base = extract(
            &KinematicSeries::from_speed(grid.clone(), speed.clone()),
            &FitConfig::default(),
        )
        .unwrap();
        let k = 3.5;
        let scaled_speed: Vec<f64> = speed.iter().map(|v| k * v).collect();
        let scaled = extract(
            &KinematicSeries::from_speed(grid, scaled_speed),
            &FitConfig::default(),
        )
        .unwrap();
        assert_eq!(base.n_components(), scaled.n_components());
        for (a, b) in base.components.iter().zip(&scaled.components) {
            assert!((b.d - k * a.d).abs() / (k * a.d) < 1e-3);
            assert!((b.t0 - a.t0).abs() < 1e-3);
            assert!((b.mu - a.mu).abs() / a.mu.abs() < 1e-3);
            assert!((b.sigma - a.sigma).abs() / a.sigma < 1e-3);
        }
    }

    #[test]
    fn fit_result_snr_over_c() {
        let fit = FitResult {
            components: alloc::vec![spec_component(), spec_component()],
            snr_db: 30.0,
        };
        assert_eq!(fit.snr_over_c(), 15.0);
        let empty = FitResult {
            components: alloc::vec![],
            snr_db: 0.0,
        };
        assert_eq!(empty.snr_over_c(), 0.0);
    }
}
