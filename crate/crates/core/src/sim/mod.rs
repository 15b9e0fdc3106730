//! Belt acoustic simulator.
//!
//! A point source at a given azimuth and distance radiates a seeded
//! waveform; each microphone receives it with its own fractional
//! propagation delay (64-tap Blackman-windowed sinc) and `1/r` attenuation,
//! plus independent white noise at the requested SNR relative to the nearest
//! microphone. There is no room, torso or diffraction model.

mod geometry;

use std::path::PathBuf;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

pub use geometry::{make_geometry, BeltGeometry, Point, Shape, DEFAULT_SPEED_OF_SOUND};

use crate::{Clip, Error, Result};

/// Fractional delay filter length.
pub const DELAY_TAPS: usize = 64;

/// Source RMS at 1 m, before attenuation.
pub const SOURCE_RMS: f64 = 0.25;

/// The 40 evaluation azimuths `0, 9, ..., 351`.
pub fn test_angles() -> Vec<f64> {
    (0..40).map(|k| 9.0 * k as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SignalKind {
    WhiteNoise,
    /// Gaussian noise restricted to `[low_hz, high_hz]`.
    BandLimitedNoise { low_hz: f64, high_hz: f64 },
    /// Harmonics `1..=harmonics` of `fundamental_hz` with random phases.
    ToneComplex { fundamental_hz: f64, harmonics: usize },
    /// First channel of a WAV file, looped to the scenario duration.
    WavFile { path: PathBuf },
}

impl SignalKind {
    pub fn label(&self) -> String {
        match self {
            SignalKind::WhiteNoise => "white-noise".into(),
            SignalKind::BandLimitedNoise { low_hz, high_hz } => {
                format!("band-limited-noise({low_hz}-{high_hz} Hz)")
            }
            SignalKind::ToneComplex {
                fundamental_hz,
                harmonics,
            } => format!("tone-complex({fundamental_hz} Hz x{harmonics})"),
            SignalKind::WavFile { path } => format!("wav-file({})", path.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeltScenario {
    pub geometry: BeltGeometry,
    /// Degrees.
    pub source_angle: f64,
    /// Metres.
    pub source_distance: f64,
    pub signal: SignalKind,
    /// Seconds.
    pub duration: f64,
    /// `f64::INFINITY` disables noise.
    pub snr_db: f64,
    pub seed: u64,
    pub sample_rate: u32,
}

impl Default for BeltScenario {
    fn default() -> Self {
        BeltScenario {
            geometry: BeltGeometry::default(),
            source_angle: 0.0,
            source_distance: 2.0,
            signal: SignalKind::WhiteNoise,
            duration: 2.0,
            snr_db: 20.0,
            seed: 0,
            sample_rate: 44_100,
        }
    }
}

/// Ground truth stored next to each synthesized clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub source_angle: f64,
    pub source_distance: f64,
    pub signal: String,
    pub snr_db: Option<f64>,
    pub seed: u64,
    /// Per-channel noise standard deviation actually added.
    pub noise_std: f64,
    /// Spherical delays `t_u - t_v` in samples, pair enumeration order.
    pub true_tdoas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub clip: Clip,
    pub truth: GroundTruth,
}

/// Mixes a base seed with an index (splitmix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn validate(scenario: &BeltScenario) -> Result<usize> {
    if !(scenario.duration > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "duration must be positive, got {}",
            scenario.duration
        )));
    }
    if scenario.sample_rate == 0 {
        return Err(Error::InvalidParameter("sample rate must be positive".into()));
    }
    let radius = scenario.geometry.shape.max_radius();
    if !(scenario.source_distance > radius) {
        return Err(Error::SourceInsideBelt {
            distance: scenario.source_distance,
            radius,
        });
    }
    if scenario.snr_db.is_nan() {
        return Err(Error::InvalidParameter("snr_db is NaN".into()));
    }
    let samples = (scenario.duration * scenario.sample_rate as f64).round() as usize;
    if samples == 0 {
        return Err(Error::InvalidParameter("duration shorter than one sample".into()));
    }
    Ok(samples)
}

fn normalize_rms(x: &mut [f64], target: f64) {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        let g = target / rms;
        x.iter_mut().for_each(|v| *v *= g);
    }
}

/// Source waveform of `len` samples at [`SOURCE_RMS`].
pub fn source_waveform(signal: &SignalKind, len: usize, sample_rate: u32, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let fs = sample_rate as f64;
    let mut x: Vec<f64> = match signal {
        SignalKind::WhiteNoise => (0..len).map(|_| StandardNormal.sample(rng)).collect(),
        SignalKind::BandLimitedNoise { low_hz, high_hz } => {
            if !(0.0 <= *low_hz && low_hz < high_hz && *high_hz <= fs / 2.0) {
                return Err(Error::UnsupportedSignal(format!(
                    "band {low_hz}-{high_hz} Hz outside 0..{} Hz",
                    fs / 2.0
                )));
            }
            let mut spectrum: Vec<Complex<f64>> = (0..len)
                .map(|_| Complex::new(StandardNormal.sample(rng), 0.0))
                .collect();
            let mut planner = FftPlanner::new();
            planner.plan_fft_forward(len).process(&mut spectrum);
            for (k, z) in spectrum.iter_mut().enumerate() {
                let f = k.min(len - k) as f64 * fs / len as f64;
                if f < *low_hz || f > *high_hz {
                    *z = Complex::default();
                }
            }
            planner.plan_fft_inverse(len).process(&mut spectrum);
            spectrum.into_iter().map(|z| z.re).collect()
        }
        SignalKind::ToneComplex {
            fundamental_hz,
            harmonics,
        } => {
            if !(*fundamental_hz > 0.0) || *harmonics == 0 {
                return Err(Error::UnsupportedSignal(
                    "tone complex needs a positive fundamental and at least one harmonic".into(),
                ));
            }
            let phases: Vec<f64> = (0..*harmonics)
                .map(|_| rand::Rng::random_range(rng, 0.0..std::f64::consts::TAU))
                .collect();
            (0..len)
                .map(|n| {
                    let t = n as f64 / fs;
                    phases
                        .iter()
                        .enumerate()
                        .map(|(h, &p)| {
                            let f = fundamental_hz * (h + 1) as f64;
                            if f < fs / 2.0 {
                                (std::f64::consts::TAU * f * t + p).sin()
                            } else {
                                0.0
                            }
                        })
                        .sum()
                })
                .collect()
        }
        SignalKind::WavFile { path } => {
            let audio = crate::io::wav::read_wav(path)?;
            if audio.sample_rate != sample_rate {
                return Err(Error::UnsupportedSignal(format!(
                    "{} is sampled at {} Hz, scenario uses {sample_rate} Hz",
                    path.display(),
                    audio.sample_rate
                )));
            }
            let source = &audio.channels[0];
            if source.is_empty() {
                return Err(Error::UnsupportedSignal(format!("{} is empty", path.display())));
            }
            source.iter().copied().cycle().take(len).collect()
        }
    };
    normalize_rms(&mut x, SOURCE_RMS);
    Ok(x)
}

/// Taps `h[k]`, `k = -31..=32`, delaying by `frac` in `[0, 1)` samples.
pub fn fractional_delay_taps(frac: f64) -> [f64; DELAY_TAPS] {
    let half = (DELAY_TAPS / 2) as f64;
    let mut taps = [0.0; DELAY_TAPS];
    for (i, tap) in taps.iter_mut().enumerate() {
        let k = i as f64 - (half - 1.0);
        let x = k - frac;
        let sinc = if x == 0.0 {
            1.0
        } else {
            (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
        };
        let phase = std::f64::consts::TAU * x / DELAY_TAPS as f64;
        let blackman = 0.42 + 0.5 * phase.cos() + 0.08 * (2.0 * phase).cos();
        *tap = sinc * blackman;
    }
    taps
}

/// `y[n] = sum_k h[k] x[offset + n - floor(delay) - k]` for `n < len`.
///
/// `x` must extend `offset` samples before and [`DELAY_TAPS`] after the
/// output span.
fn delay_into(x: &[f64], offset: usize, delay: f64, gain: f64, out: &mut [f64]) {
    let whole = delay.floor();
    let taps = fractional_delay_taps(delay - whole);
    let whole = whole as usize;
    let lowest = DELAY_TAPS / 2 - 1;
    for (n, y) in out.iter_mut().enumerate() {
        // k runs from -31 to 32; index = offset + n - whole - k.
        let top = offset + n - whole + lowest;
        let acc: f64 = taps
            .iter()
            .enumerate()
            .map(|(i, &h)| h * x[top - i])
            .sum();
        *y = gain * acc;
    }
}

fn noise_std_for(power: f64, snr_db: f64) -> f64 {
    if snr_db.is_infinite() && snr_db > 0.0 {
        0.0
    } else {
        (power / 10f64.powf(snr_db / 10.0)).sqrt()
    }
}

fn add_noise(channels: &mut [Vec<f64>], std: f64, rng: &mut ChaCha8Rng) {
    if std == 0.0 {
        return;
    }
    for ch in channels {
        for x in ch.iter_mut() {
            let n: f64 = StandardNormal.sample(rng);
            *x += std * n;
        }
    }
}

/// Renders one scenario.
pub fn synthesize(scenario: &BeltScenario) -> Result<Synthesis> {
    let samples = validate(scenario)?;
    let fs = scenario.sample_rate as f64;
    let geometry = &scenario.geometry;
    let src = geometry.source_position(scenario.source_angle, scenario.source_distance);
    let distances: Vec<f64> = geometry
        .mic_positions
        .iter()
        .map(|p| ((src[0] - p[0]).powi(2) + (src[1] - p[1]).powi(2)).sqrt())
        .collect();
    let nearest = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let delays: Vec<f64> = distances
        .iter()
        .map(|d| (d - nearest) * fs / geometry.speed_of_sound)
        .collect();
    let max_delay = delays.iter().copied().fold(0.0, f64::max);
    let offset = max_delay.ceil() as usize + DELAY_TAPS;

    let mut signal_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(scenario.seed, u64::MAX));
    let source = source_waveform(
        &scenario.signal,
        offset + samples + DELAY_TAPS,
        scenario.sample_rate,
        &mut signal_rng,
    )?;

    let mut channels: Vec<Vec<f64>> = delays
        .par_iter()
        .zip(&distances)
        .map(|(&delay, &r)| {
            let mut out = vec![0.0; samples];
            delay_into(&source, offset, delay, 1.0 / r, &mut out);
            out
        })
        .collect();

    let nearest_mic = distances
        .iter()
        .enumerate()
        .fold(0, |best, (i, &d)| if d < distances[best] { i } else { best });
    let power = channels[nearest_mic].iter().map(|x| x * x).sum::<f64>() / samples as f64;
    let noise_std = noise_std_for(power, scenario.snr_db);
    add_noise(&mut channels, noise_std, &mut noise_rng);

    let truth = GroundTruth {
        source_angle: scenario.source_angle,
        source_distance: scenario.source_distance,
        signal: scenario.signal.label(),
        snr_db: scenario.snr_db.is_finite().then_some(scenario.snr_db),
        seed: scenario.seed,
        noise_std,
        true_tdoas: geometry.true_tdoas(scenario.source_angle, scenario.source_distance, fs)?,
    };
    Ok(Synthesis {
        clip: Clip::new(channels, scenario.sample_rate)?,
        truth,
    })
}

/// Sensor noise alone at a given standard deviation: the designated silence
/// that goes with a scenario.
pub fn synthesize_silence(
    mic_count: usize,
    duration: f64,
    sample_rate: u32,
    noise_std: f64,
    seed: u64,
) -> Result<Clip> {
    if !(duration > 0.0) {
        return Err(Error::InvalidParameter("silence duration must be positive".into()));
    }
    let samples = (duration * sample_rate as f64).round() as usize;
    let mut channels = vec![vec![0.0; samples]; mic_count];
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::MAX - 1));
    add_noise(&mut channels, noise_std, &mut rng);
    Clip::new(channels, sample_rate)
}

/// One scenario per angle; scenario `i` uses `derive_seed(template.seed, i)`.
pub fn run_sweep(template: &BeltScenario, angles: &[f64]) -> Result<Vec<Synthesis>> {
    if angles.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one angle".into()));
    }
    validate(template)?;
    angles
        .par_iter()
        .enumerate()
        .map(|(i, &angle)| {
            synthesize(&BeltScenario {
                source_angle: angle,
                seed: derive_seed(template.seed, i as u64),
                ..template.clone()
            })
        })
        .collect()
}

/// Silence matching the noise level of a sweep's first clip.
pub fn sweep_silence(template: &BeltScenario, sweep: &[Synthesis], duration: f64) -> Result<Clip> {
    let std = sweep.first().map_or(0.0, |s| s.truth.noise_std);
    synthesize_silence(
        template.geometry.mic_count(),
        duration,
        template.sample_rate,
        std,
        template.seed,
    )
}
