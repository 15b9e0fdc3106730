//! Sound source localization for wearable microphone belts.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`dsp`] frames each channel into a Hann-windowed STFT.
//! 2. [`masking`] keeps the time-frequency bins that rise above a stationary
//!    noise floor measured during silence.
//! 3. [`tdoa`] runs masked GCC-PHAT on every microphone pair and takes the
//!    per-pair mode of the frame-wise peak lags.
//! 4. [`calibration`] turns eight anchor measurements into a 360-row lookup
//!    table plus one azimuth per haptic motor, and [`localization`] scores a
//!    measured TDoA vector against every row with a squared exponential
//!    kernel and picks the nearest motor.
//!
//! [`sim`] synthesizes belt recordings with known geometry, [`evaluation`]
//! computes MAE and motor match rate over sweeps, and [`io`] holds the WAV,
//! profile, manifest and report formats used by the `beltloc` binary.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`.

pub mod calibration;
pub mod config;
pub mod dsp;
mod error;
pub mod evaluation;
pub mod io;
pub mod localization;
pub mod masking;
pub mod sim;
pub mod tdoa;

use std::fmt::{Debug, Display};
use std::str::FromStr;

pub use calibration::{calibrate, CalibrationAnchor, CalibrationProfile, LookupTable};
pub use config::Config;
pub use dsp::{stft, MultichannelClip, Spectrogram};
pub use error::{Category, Error, Result};
pub use evaluation::{evaluate_sweep, EvaluationReport};
pub use localization::{localize, DoaEstimate, KernelParams};
pub use masking::{compute_mask, estimate_noise, BinaryMask, NoiseProfile};
pub use tdoa::{estimate_tdoas, PairIndex, TdoaVector};

/// Floating point scalar the pipeline runs on: `f32` or `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + rustfft::FftNum
    + Default
    + Display
    + Debug
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, used for configuration constants.
    fn of(value: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(value).expect("f64 is representable")
    }

    /// Widening conversion to `f64`.
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type Clip = MultichannelClip<f64>;
pub type Spectrum = Spectrogram<f64>;
pub type Noise = NoiseProfile<f64>;
pub type Tdoas = TdoaVector<f64>;
pub type Profile = CalibrationProfile<f64>;
pub type Estimate = DoaEstimate<f64>;
pub type Kernel = KernelParams<f64>;

pub type Clip32 = MultichannelClip<f32>;
pub type Profile32 = CalibrationProfile<f32>;
pub type Estimate32 = DoaEstimate<f32>;
