//! Stationary noise floor and the binary time-frequency mask shared by all
//! microphone pairs.

use crate::{Error, Real, Result, Spectrogram};

/// Per-bin noise power, averaged over silence frames and channels.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseProfile<T> {
    psd: Vec<T>,
    frames_observed: usize,
}

impl<T: Real> NoiseProfile<T> {
    pub fn new(psd: Vec<T>, frames_observed: usize) -> Result<Self> {
        if frames_observed == 0 {
            return Err(Error::InvalidParameter(
                "a noise profile needs at least one observed frame".into(),
            ));
        }
        if psd.iter().any(|p| !(*p >= T::zero())) {
            return Err(Error::InvalidParameter("noise power must be non-negative".into()));
        }
        Ok(NoiseProfile {
            psd,
            frames_observed,
        })
    }

    /// A zero noise floor: every bin with any energy passes the mask.
    pub fn silent(bin_count: usize) -> Self {
        NoiseProfile {
            psd: vec![T::zero(); bin_count],
            frames_observed: 1,
        }
    }

    pub fn psd(&self) -> &[T] {
        &self.psd
    }

    pub fn frames_observed(&self) -> usize {
        self.frames_observed
    }

    pub fn bin_count(&self) -> usize {
        self.psd.len()
    }
}

/// `M(t, f)` over every frame and half-spectrum bin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    values: Vec<bool>,
    frame_count: usize,
    bin_count: usize,
}

impl BinaryMask {
    pub fn from_rows(rows: Vec<Vec<bool>>) -> Result<Self> {
        let bin_count = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != bin_count) {
            return Err(Error::ShapeMismatch("mask rows differ in length".into()));
        }
        Ok(BinaryMask {
            frame_count: rows.len(),
            bin_count,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn bin_count(&self) -> usize {
        self.bin_count
    }

    /// 0 or 1.
    pub fn get(&self, t: usize, f: usize) -> u8 {
        self.values[t * self.bin_count + f] as u8
    }

    pub fn row(&self, t: usize) -> &[bool] {
        &self.values[t * self.bin_count..(t + 1) * self.bin_count]
    }

    /// Fraction of active bins in frame `t`.
    pub fn density(&self, t: usize) -> f64 {
        let active = self.row(t).iter().filter(|&&m| m).count();
        active as f64 / self.bin_count as f64
    }

    /// Fraction of active bins over the whole mask.
    pub fn total_density(&self) -> f64 {
        let active = self.values.iter().filter(|&&m| m).count();
        active as f64 / self.values.len().max(1) as f64
    }

    /// Per-frame reliability: density at or above `min_density`.
    pub fn reliable_frames(&self, min_density: f64) -> Vec<bool> {
        (0..self.frame_count)
            .map(|t| self.bins_active(t) > 0 && self.density(t) >= min_density)
            .collect()
    }

    fn bins_active(&self, t: usize) -> usize {
        self.row(t).iter().filter(|&&m| m).count()
    }
}

/// Mean of `|X_c(t,f)|^2` over all frames and channels of designated silence.
pub fn estimate_noise<T: Real>(silence: &[Spectrogram<T>]) -> Result<NoiseProfile<T>> {
    let first = silence
        .first()
        .ok_or_else(|| Error::InvalidParameter("no silence spectrograms".into()))?;
    let bins = first.bin_count();
    if silence.iter().any(|s| s.bin_count() != bins) {
        return Err(Error::ShapeMismatch("silence spectrograms differ in frame size".into()));
    }
    let frames: usize = silence.iter().map(Spectrogram::frame_count).sum();
    if frames == 0 {
        return Err(Error::InvalidParameter("silence has zero frames".into()));
    }
    let mut psd = vec![T::zero(); bins];
    for spec in silence {
        for frame in spec.frames() {
            for (p, z) in psd.iter_mut().zip(frame) {
                *p += z.norm_sqr();
            }
        }
    }
    let count = T::of(frames as f64);
    for p in &mut psd {
        *p /= count;
    }
    NoiseProfile::new(psd, first.frame_count())
}

/// `M(t,f) = 1` iff the channel-averaged power exceeds `threshold * psd(f)`.
pub fn compute_mask<T: Real>(
    spectrograms: &[Spectrogram<T>],
    noise: &NoiseProfile<T>,
    threshold: T,
) -> Result<BinaryMask> {
    let first = spectrograms
        .first()
        .ok_or_else(|| Error::ShapeMismatch("no spectrograms".into()))?;
    if !(threshold > T::zero()) {
        return Err(Error::InvalidParameter("mask threshold must be positive".into()));
    }
    let (frames, bins) = (first.frame_count(), first.bin_count());
    if spectrograms
        .iter()
        .any(|s| s.frame_count() != frames || s.bin_count() != bins)
    {
        return Err(Error::ShapeMismatch("channel spectrograms differ in shape".into()));
    }
    if noise.bin_count() != bins {
        return Err(Error::ShapeMismatch(format!(
            "noise profile has {} bins, spectrogram has {bins}",
            noise.bin_count()
        )));
    }
    let channels = T::of(spectrograms.len() as f64);
    let mut values = Vec::with_capacity(frames * bins);
    let mut power = vec![T::zero(); bins];
    for t in 0..frames {
        power.iter_mut().for_each(|p| *p = T::zero());
        for spec in spectrograms {
            for (p, z) in power.iter_mut().zip(spec.frame(t)) {
                *p += z.norm_sqr();
            }
        }
        values.extend(
            power
                .iter()
                .zip(noise.psd())
                .map(|(&p, &n)| p / channels > threshold * n),
        );
    }
    Ok(BinaryMask {
        values,
        frame_count: frames,
        bin_count: bins,
    })
}
