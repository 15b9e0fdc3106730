//! Framing, windowing and discrete Fourier transforms.
//!
//! Forward transforms are unnormalized; inverse transforms scale by `1/N`.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::{Error, Real, Result};

/// Time-domain audio, one sample vector per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelClip<T> {
    channels: Vec<Vec<T>>,
    sample_rate: u32,
}

impl<T: Real> MultichannelClip<T> {
    /// Requires at least two channels of equal length.
    pub fn new(channels: Vec<Vec<T>>, sample_rate: u32) -> Result<Self> {
        if channels.len() < 2 {
            return Err(Error::ShapeMismatch(format!(
                "a clip needs at least 2 channels, got {}",
                channels.len()
            )));
        }
        let len = channels[0].len();
        if let Some((c, ch)) = channels.iter().enumerate().find(|(_, ch)| ch.len() != len) {
            return Err(Error::ShapeMismatch(format!(
                "channel {} has {} samples, channel 1 has {len}",
                c + 1,
                ch.len()
            )));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidParameter("sample rate must be positive".into()));
        }
        Ok(MultichannelClip {
            channels,
            sample_rate,
        })
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channel(&self, index: usize) -> &[T] {
        &self.channels[index]
    }

    pub fn channels(&self) -> &[Vec<T>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<T>> {
        self.channels
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    /// Converts every sample to another scalar type.
    pub fn cast<U: Real>(&self) -> MultichannelClip<U> {
        MultichannelClip {
            channels: self
                .channels
                .iter()
                .map(|ch| ch.iter().map(|&x| U::of(x.as_f64())).collect())
                .collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Multiplies one channel by `gain`.
    pub fn scale_channel(&mut self, index: usize, gain: T) {
        for x in &mut self.channels[index] {
            *x *= gain;
        }
    }

    /// Samples `[start, start + len)` of every channel.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.len() {
            return Err(Error::InsufficientSamples {
                needed: start + len,
                got: self.len(),
            });
        }
        Self::new(
            self.channels
                .iter()
                .map(|ch| ch[start..start + len].to_vec())
                .collect(),
            self.sample_rate,
        )
    }
}

/// Half-spectrum STFT of one channel: bins `0..=N/2` for every frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram<T> {
    bins: Vec<Complex<T>>,
    frame_size: usize,
    hop: usize,
    frame_count: usize,
    sample_rate: u32,
}

impl<T: Real> Spectrogram<T> {
    /// Builds a spectrogram from row-major `frame_count x (frame_size/2 + 1)` bins.
    pub fn from_bins(
        bins: Vec<Complex<T>>,
        frame_size: usize,
        hop: usize,
        sample_rate: u32,
    ) -> Result<Self> {
        if !frame_size.is_power_of_two() || frame_size < 2 {
            return Err(Error::NotPowerOfTwo(frame_size));
        }
        if hop == 0 || hop > frame_size {
            return Err(Error::InvalidParameter(format!(
                "hop {hop} must lie in 1..={frame_size}"
            )));
        }
        let width = frame_size / 2 + 1;
        if bins.is_empty() || bins.len() % width != 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} bins is not a positive multiple of {width}",
                bins.len()
            )));
        }
        Ok(Spectrogram {
            frame_count: bins.len() / width,
            bins,
            frame_size,
            hop,
            sample_rate,
        })
    }

    pub fn frame_size(&self) -> usize {
        self.frame_size
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// `frame_size / 2 + 1`.
    pub fn bin_count(&self) -> usize {
        self.frame_size / 2 + 1
    }

    pub fn frame(&self, t: usize) -> &[Complex<T>] {
        let width = self.bin_count();
        &self.bins[t * width..(t + 1) * width]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[Complex<T>]> {
        self.bins.chunks_exact(self.bin_count())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    /// Periodic Hann.
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    pub fn coefficients<T: Real>(self, len: usize) -> Vec<T> {
        match self {
            Window::Hann => hann_window(len),
            Window::Rectangular => vec![T::one(); len],
        }
    }
}

/// Periodic Hann window: `0.5 - 0.5 cos(2 pi n / N)`.
pub fn hann_window<T: Real>(len: usize) -> Vec<T> {
    let half = T::of(0.5);
    let step = T::TAU() / T::of(len as f64);
    (0..len)
        .map(|n| half - half * (step * T::of(n as f64)).cos())
        .collect()
}

/// Number of whole frames that fit in `len` samples.
pub fn frame_count(len: usize, frame_size: usize, hop: usize) -> usize {
    if len < frame_size {
        0
    } else {
        (len - frame_size) / hop + 1
    }
}

/// Hann-windowed STFT of every channel. Trailing partial frames are dropped.
pub fn stft<T: Real>(
    clip: &MultichannelClip<T>,
    frame_size: usize,
    hop: usize,
) -> Result<Vec<Spectrogram<T>>> {
    stft_with_window(clip, frame_size, hop, Window::Hann)
}

pub fn stft_with_window<T: Real>(
    clip: &MultichannelClip<T>,
    frame_size: usize,
    hop: usize,
    window: Window,
) -> Result<Vec<Spectrogram<T>>> {
    if !frame_size.is_power_of_two() || frame_size < 2 {
        return Err(Error::NotPowerOfTwo(frame_size));
    }
    if hop == 0 || hop > frame_size {
        return Err(Error::InvalidParameter(format!(
            "hop {hop} must lie in 1..={frame_size}"
        )));
    }
    if clip.len() < frame_size {
        return Err(Error::InsufficientSamples {
            needed: frame_size,
            got: clip.len(),
        });
    }
    let frames = frame_count(clip.len(), frame_size, hop);
    let width = frame_size / 2 + 1;
    let coefficients: Vec<T> = window.coefficients(frame_size);
    let fft = FftPlanner::new().plan_fft_forward(frame_size);
    let mut buffer = vec![Complex::default(); frame_size];
    let mut scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];

    let spectrograms = clip
        .channels()
        .iter()
        .map(|samples| {
            let mut bins = Vec::with_capacity(frames * width);
            for t in 0..frames {
                let frame = &samples[t * hop..t * hop + frame_size];
                for ((slot, &x), &w) in buffer.iter_mut().zip(frame).zip(&coefficients) {
                    *slot = Complex::new(x * w, T::zero());
                }
                fft.process_with_scratch(&mut buffer, &mut scratch);
                bins.extend_from_slice(&buffer[..width]);
            }
            Spectrogram {
                bins,
                frame_size,
                hop,
                frame_count: frames,
                sample_rate: clip.sample_rate(),
            }
        })
        .collect();
    Ok(spectrograms)
}

/// Unnormalized forward DFT of a real frame, all `N` bins.
pub fn forward_transform<T: Real>(frame: &[T]) -> Result<Vec<Complex<T>>> {
    if !frame.len().is_power_of_two() {
        return Err(Error::NotPowerOfTwo(frame.len()));
    }
    let mut buffer: Vec<Complex<T>> = frame.iter().map(|&x| Complex::new(x, T::zero())).collect();
    FftPlanner::new()
        .plan_fft_forward(frame.len())
        .process(&mut buffer);
    Ok(buffer)
}

/// Reusable `1/N`-scaled inverse transform returning the real part.
pub struct InverseTransform<T: Real> {
    fft: Arc<dyn Fft<T>>,
    scratch: Vec<Complex<T>>,
    scale: T,
}

impl<T: Real> InverseTransform<T> {
    pub fn new(len: usize) -> Result<Self> {
        if !len.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(len));
        }
        let fft = FftPlanner::new().plan_fft_inverse(len);
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        Ok(InverseTransform {
            fft,
            scratch,
            scale: T::one() / T::of(len as f64),
        })
    }

    pub fn len(&self) -> usize {
        self.fft.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fft.len() == 0
    }

    /// Transforms `spectrum` in place and writes the scaled real part to `out`.
    pub fn process(&mut self, spectrum: &mut [Complex<T>], out: &mut [T]) {
        self.fft.process_with_scratch(spectrum, &mut self.scratch);
        for (y, z) in out.iter_mut().zip(spectrum.iter()) {
            *y = z.re * self.scale;
        }
    }
}

/// Inverse DFT of a full-length conjugate-symmetric spectrum, scaled by `1/N`.
///
/// Output index `n` is lag `n` for `n < N/2` and lag `n - N` otherwise.
pub fn inverse_transform_correlation<T: Real>(spectrum_row: &[Complex<T>]) -> Result<Vec<T>> {
    let mut transform = InverseTransform::new(spectrum_row.len())?;
    let mut buffer = spectrum_row.to_vec();
    let mut out = vec![T::zero(); spectrum_row.len()];
    transform.process(&mut buffer, &mut out);
    Ok(out)
}

/// Expands bins `0..=N/2` into the full conjugate-symmetric `N`-point spectrum.
pub fn expand_half_spectrum<T: Real>(half: &[Complex<T>], out: &mut [Complex<T>]) {
    let n = out.len();
    debug_assert_eq!(half.len(), n / 2 + 1);
    out[..half.len()].copy_from_slice(half);
    for f in 1..n / 2 {
        out[n - f] = half[f].conj();
    }
}

/// Circular lag convention for an `n`-point correlation.
pub fn lag_of_index(index: usize, n: usize) -> i64 {
    if index < n / 2 {
        index as i64
    } else {
        index as i64 - n as i64
    }
}
