//! Masked GCC-PHAT per microphone pair, frame-wise peak picking and mode
//! aggregation into one delay per pair.
//!
//! Delays are in samples and follow `t_u - t_v`: a positive delay means the
//! wavefront reaches microphone `u` after microphone `v`.

use std::collections::BTreeMap;

use num_complex::Complex;
use rayon::prelude::*;

use crate::dsp::{expand_half_spectrum, stft, InverseTransform};
use crate::masking::compute_mask;
use crate::{Config, Error, MultichannelClip, NoiseProfile, Real, Result};

/// Ordered microphone pair `(u, v)`, 1-based, `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairIndex {
    pub u: usize,
    pub v: usize,
}

impl PairIndex {
    pub fn new(u: usize, v: usize, channel_count: usize) -> Result<Self> {
        if u == 0 || u >= v || v > channel_count {
            return Err(Error::InvalidParameter(format!(
                "pair ({u},{v}) outside 1 <= u < v <= {channel_count}"
            )));
        }
        Ok(PairIndex { u, v })
    }

    /// Position of this pair in the lexicographic enumeration.
    pub fn position(self, channel_count: usize) -> usize {
        let (u, v) = (self.u - 1, self.v - 1);
        u * channel_count - u * (u + 1) / 2 + (v - u - 1)
    }
}

/// `(1,2), (1,3), ..., (C-1,C)`.
pub fn pairs(channel_count: usize) -> Vec<PairIndex> {
    (1..=channel_count)
        .flat_map(|u| (u + 1..=channel_count).map(move |v| PairIndex { u, v }))
        .collect()
}

pub fn pair_count(channel_count: usize) -> usize {
    channel_count * channel_count.saturating_sub(1) / 2
}

/// Channel count whose pair enumeration has `pairs` entries.
pub fn channels_for_pairs(pairs: usize) -> Option<usize> {
    (2..=64).find(|&c| pair_count(c) == pairs)
}

/// One delay per pair, ordered as [`pairs`].
#[derive(Debug, Clone, PartialEq)]
pub struct TdoaVector<T> {
    delays: Vec<T>,
}

impl<T: Real> TdoaVector<T> {
    pub fn new(delays: Vec<T>) -> Result<Self> {
        if channels_for_pairs(delays.len()).is_none() {
            return Err(Error::ShapeMismatch(format!(
                "{} delays is not a pair count",
                delays.len()
            )));
        }
        Ok(TdoaVector { delays })
    }

    pub fn delays(&self) -> &[T] {
        &self.delays
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    pub fn channel_count(&self) -> usize {
        channels_for_pairs(self.delays.len()).expect("validated on construction")
    }

    pub fn get(&self, pair: PairIndex) -> T {
        self.delays[pair.position(self.channel_count())]
    }

    /// Largest absolute delay.
    pub fn max_abs(&self) -> T {
        self.delays.iter().fold(T::zero(), |m, d| m.max(d.abs()))
    }
}

/// `r(t, tau)` for `tau` in `[-tau_max, tau_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationFrame<T> {
    values: Vec<T>,
    tau_max: usize,
    pub reliable: bool,
}

impl<T: Real> CorrelationFrame<T> {
    /// `values[i]` holds lag `i - tau_max`; the length must be odd.
    pub fn new(values: Vec<T>, reliable: bool) -> Result<Self> {
        if values.len() % 2 == 0 {
            return Err(Error::ShapeMismatch(
                "correlation lag range must be symmetric about zero".into(),
            ));
        }
        Ok(CorrelationFrame {
            tau_max: values.len() / 2,
            values,
            reliable,
        })
    }

    pub fn tau_max(&self) -> usize {
        self.tau_max
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn at(&self, lag: i64) -> T {
        self.values[(lag + self.tau_max as i64) as usize]
    }

    pub fn lags(&self) -> impl Iterator<Item = (i64, T)> + '_ {
        let offset = self.tau_max as i64;
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &r)| (i as i64 - offset, r))
    }
}

/// `X_u X_v^*`, bin by bin.
pub fn cross_spectrum<T: Real>(xu: &[Complex<T>], xv: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    if xu.len() != xv.len() {
        return Err(Error::ShapeMismatch(format!(
            "cross spectrum of {} and {} bins",
            xu.len(),
            xv.len()
        )));
    }
    Ok(xu.iter().zip(xv).map(|(a, b)| a * b.conj()).collect())
}

/// Reusable GCC-PHAT state for one frame size.
pub struct Correlator<T: Real> {
    inverse: InverseTransform<T>,
    tau_max: usize,
    half: Vec<Complex<T>>,
    full: Vec<Complex<T>>,
    time: Vec<T>,
}

impl<T: Real> Correlator<T> {
    pub fn new(frame_size: usize, tau_max: usize) -> Result<Self> {
        let inverse = InverseTransform::new(frame_size)?;
        if tau_max >= frame_size / 2 {
            return Err(Error::InvalidParameter(format!(
                "tau_max {tau_max} must be below {}",
                frame_size / 2
            )));
        }
        Ok(Correlator {
            inverse,
            tau_max,
            half: vec![Complex::default(); frame_size / 2 + 1],
            full: vec![Complex::default(); frame_size],
            time: vec![T::zero(); frame_size],
        })
    }

    /// Whitens `cross` to unit magnitude, applies the mask, and inverts.
    ///
    /// Bins with `|R| = 0` contribute nothing. The frame is reliable when at
    /// least one bin contributed.
    pub fn correlate(&mut self, cross: &[Complex<T>], mask_row: &[bool]) -> Result<CorrelationFrame<T>> {
        let n = self.full.len();
        if cross.len() != n / 2 + 1 || mask_row.len() != cross.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} bins and mask entries, got {} and {}",
                n / 2 + 1,
                cross.len(),
                mask_row.len()
            )));
        }
        let mut active = 0usize;
        for ((w, r), &m) in self.half.iter_mut().zip(cross).zip(mask_row) {
            let magnitude = r.norm();
            *w = if m && magnitude > T::zero() {
                active += 1;
                r / magnitude
            } else {
                Complex::default()
            };
        }
        expand_half_spectrum(&self.half, &mut self.full);
        self.inverse.process(&mut self.full, &mut self.time);

        let tau_max = self.tau_max;
        let mut values = Vec::with_capacity(2 * tau_max + 1);
        values.extend_from_slice(&self.time[n - tau_max..]);
        values.extend_from_slice(&self.time[..=tau_max]);
        Ok(CorrelationFrame {
            values,
            tau_max,
            reliable: active > 0,
        })
    }
}

/// Masked GCC-PHAT of one half-spectrum cross-power row.
pub fn gcc_phat<T: Real>(
    cross: &[Complex<T>],
    mask_row: &[bool],
    tau_max: usize,
) -> Result<CorrelationFrame<T>> {
    let frame_size = 2 * cross.len().saturating_sub(1);
    Correlator::new(frame_size, tau_max)?.correlate(cross, mask_row)
}

/// Lag of the largest correlation value; exact ties go to the smallest lag.
pub fn peak_lag<T: Real>(frame: &CorrelationFrame<T>) -> i64 {
    let mut best = (-(frame.tau_max as i64), frame.values[0]);
    for (lag, r) in frame.lags().skip(1) {
        if r > best.1 {
            best = (lag, r);
        }
    }
    best.0
}

/// Most frequent lag among reliable frames; ties go to the smallest lag.
pub fn aggregate_mode(frame_lags: &[(i64, bool)]) -> Result<i64> {
    let mut histogram = BTreeMap::new();
    for &(lag, reliable) in frame_lags {
        if reliable {
            *histogram.entry(lag).or_insert(0usize) += 1;
        }
    }
    let mut best: Option<(i64, usize)> = None;
    for (lag, count) in histogram {
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((lag, count));
        }
    }
    best.map(|(lag, _)| lag).ok_or(Error::NoReliableFrames)
}

/// Per-pair frame-wise peak lags with the frame reliability flag.
pub fn frame_lags<T: Real>(
    clip: &MultichannelClip<T>,
    noise: &NoiseProfile<T>,
    config: &Config,
) -> Result<Vec<Vec<(i64, bool)>>> {
    let spectrograms = stft(clip, config.frame_size, config.hop)?;
    let mask = compute_mask(&spectrograms, noise, T::of(config.mask_threshold))?;
    let reliable = mask.reliable_frames(config.min_mask_density);
    let frames = spectrograms[0].frame_count();
    let first = match config.buffer_frames {
        Some(t) if t > 0 && t < frames => frames - t,
        _ => 0,
    };

    pairs(clip.channel_count())
        .par_iter()
        .map(|pair| {
            let mut correlator = Correlator::new(config.frame_size, config.tau_max)?;
            let (xu, xv) = (&spectrograms[pair.u - 1], &spectrograms[pair.v - 1]);
            (first..frames)
                .map(|t| {
                    let cross = cross_spectrum(xu.frame(t), xv.frame(t))?;
                    let frame = correlator.correlate(&cross, mask.row(t))?;
                    Ok((peak_lag(&frame), reliable[t] && frame.reliable))
                })
                .collect()
        })
        .collect()
}

/// Full chain: STFT, mask, per-pair GCC-PHAT peaks, and per-pair mode.
pub fn estimate_tdoas<T: Real>(
    clip: &MultichannelClip<T>,
    noise: &NoiseProfile<T>,
    config: &Config,
) -> Result<TdoaVector<T>> {
    let per_pair = frame_lags(clip, noise, config)?;
    let any_reliable = per_pair
        .iter()
        .any(|lags| lags.iter().any(|&(_, reliable)| reliable));
    let delays = per_pair
        .into_iter()
        .map(|mut lags| {
            if !any_reliable && config.allow_unreliable_fallback {
                lags.iter_mut().for_each(|l| l.1 = true);
            }
            aggregate_mode(&lags).map(|lag| T::of(lag as f64))
        })
        .collect::<Result<Vec<T>>>()?;
    TdoaVector::new(delays)
}
