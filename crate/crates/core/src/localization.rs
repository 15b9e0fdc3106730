//! Kernel scoring of a measured TDoA vector against the lookup table, DoA
//! argmax and nearest-motor selection.

use rayon::prelude::*;

use crate::calibration::TABLE_ROWS;
use crate::dsp::stft;
use crate::masking::estimate_noise;
use crate::tdoa::estimate_tdoas;
use crate::{CalibrationProfile, Config, Error, MultichannelClip, NoiseProfile, Real, Result, TdoaVector};

/// Squared exponential kernel amplitude and length scale (samples).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams<T> {
    pub sigma: T,
    pub length_scale: T,
}

impl<T: Real> KernelParams<T> {
    pub fn new(sigma: T, length_scale: T) -> Result<Self> {
        if !(sigma > T::zero() && length_scale > T::zero()) {
            return Err(Error::InvalidParameter(
                "kernel sigma and length scale must be positive".into(),
            ));
        }
        Ok(KernelParams {
            sigma,
            length_scale,
        })
    }
}

impl<T: Real> Default for KernelParams<T> {
    fn default() -> Self {
        KernelParams {
            sigma: T::one(),
            length_scale: T::of(0.707),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoaEstimate<T> {
    /// Degrees, 0..360.
    pub best_angle: u16,
    /// `f(phi)` for every integer azimuth.
    pub score_curve: Vec<T>,
    /// 1-based.
    pub motor_index: usize,
    pub motor_angle: T,
    pub tdoas: TdoaVector<T>,
}

impl<T: Real> DoaEstimate<T> {
    pub fn best_score(&self) -> T {
        self.score_curve[self.best_angle as usize]
    }
}

/// `sum_p sigma^2 exp(-(measured_p - row_p)^2 / (2 l^2))`.
pub fn score<T: Real>(measured: &[T], row: &[T], params: &KernelParams<T>) -> Result<T> {
    if measured.len() != row.len() {
        return Err(Error::ShapeMismatch(format!(
            "measured vector has {} delays, table row has {}",
            measured.len(),
            row.len()
        )));
    }
    Ok(score_unchecked(measured, row, params))
}

fn score_unchecked<T: Real>(measured: &[T], row: &[T], params: &KernelParams<T>) -> T {
    let variance2 = T::of(2.0) * params.length_scale * params.length_scale;
    let weight = params.sigma * params.sigma;
    measured
        .iter()
        .zip(row)
        .map(|(&m, &r)| {
            let d = m - r;
            weight * (-(d * d) / variance2).exp()
        })
        .fold(T::zero(), |acc, s| acc + s)
}

/// Scores every table row and returns the argmax (ties to the smallest
/// angle) together with the full curve.
pub fn best_doa<T: Real>(
    measured: &TdoaVector<T>,
    profile: &CalibrationProfile<T>,
    params: &KernelParams<T>,
) -> Result<(u16, Vec<T>)> {
    let table = profile.table();
    if measured.len() != table.pair_count() {
        return Err(Error::ShapeMismatch(format!(
            "measured vector has {} delays, profile has {} pairs",
            measured.len(),
            table.pair_count()
        )));
    }
    let curve: Vec<T> = (0..TABLE_ROWS)
        .into_par_iter()
        .map(|angle| score_unchecked(measured.delays(), table.row(angle), params))
        .collect();
    let mut best = 0;
    for (angle, &s) in curve.iter().enumerate().skip(1) {
        if s > curve[best] {
            best = angle;
        }
    }
    Ok((best as u16, curve))
}

/// `min(|a - b| mod 360, 360 - |a - b| mod 360)`.
pub fn circular_distance<T: Real>(a: T, b: T) -> T {
    let full = T::of(360.0);
    let d = (a - b).abs() % full;
    d.min(full - d)
}

/// Motor whose angle is circularly closest to `angle`; ties go to the lower
/// index. Returns the 1-based index and the motor angle.
pub fn select_motor<T: Real>(angle: T, motor_angles: &[T]) -> (usize, T) {
    let mut best = 0;
    let mut best_distance = circular_distance(motor_angles[0], angle);
    for (i, &theta) in motor_angles.iter().enumerate().skip(1) {
        let d = circular_distance(theta, angle);
        if d < best_distance {
            best = i;
            best_distance = d;
        }
    }
    (best + 1, motor_angles[best])
}

fn check_compatible<T: Real>(
    clip: &MultichannelClip<T>,
    profile: &CalibrationProfile<T>,
    config: &Config,
) -> Result<()> {
    let meta = &profile.metadata;
    if meta.sample_rate != config.sample_rate || meta.frame_size != config.frame_size {
        return Err(Error::Config(format!(
            "profile was built at {} Hz / {} samples, configuration is {} Hz / {} samples",
            meta.sample_rate, meta.frame_size, config.sample_rate, config.frame_size
        )));
    }
    if clip.sample_rate() != config.sample_rate {
        return Err(Error::Config(format!(
            "clip sample rate {} does not match configuration {}",
            clip.sample_rate(),
            config.sample_rate
        )));
    }
    if clip.channel_count() != profile.channel_count() {
        return Err(Error::Config(format!(
            "clip has {} channels, profile expects {}",
            clip.channel_count(),
            profile.channel_count()
        )));
    }
    Ok(())
}

/// Estimates TDoAs, the best DoA and the motor to drive.
pub fn localize<T: Real>(
    clip: &MultichannelClip<T>,
    profile: &CalibrationProfile<T>,
    noise: &NoiseProfile<T>,
    config: &Config,
) -> Result<DoaEstimate<T>> {
    check_compatible(clip, profile, config)?;
    let tdoas = estimate_tdoas(clip, noise, config)?;
    let params = config.kernel_params();
    let (best_angle, score_curve) = best_doa(&tdoas, profile, &params)?;
    let (motor_index, motor_angle) =
        select_motor(T::of(best_angle as f64), profile.motor_angles());
    Ok(DoaEstimate {
        best_angle,
        score_curve,
        motor_index,
        motor_angle,
        tdoas,
    })
}

/// Noise profile from a designated silence clip, with the configured framing.
pub fn noise_from_silence<T: Real>(silence: &MultichannelClip<T>, config: &Config) -> Result<NoiseProfile<T>> {
    estimate_noise(&stft(silence, config.frame_size, config.hop)?)
}
