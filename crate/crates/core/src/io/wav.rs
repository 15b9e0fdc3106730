//! RIFF/WAVE reading and writing: 16/24/32-bit integer PCM or 32-bit float,
//! up to eight interleaved channels.
//!
//! Integer samples map to `[-1, 1)` by dividing by `2^(bits-1)`; writing
//! multiplies back and rounds, so integer files survive a read/write cycle
//! unchanged.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::io::with_atomic_file;
use crate::{Error, MultichannelClip, Real, Result};

pub const MAX_CHANNELS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WavEncoding {
    Pcm16,
    Pcm24,
    Pcm32,
    #[default]
    Float32,
}

impl WavEncoding {
    fn spec(self, channels: u16, sample_rate: u32) -> WavSpec {
        let (bits_per_sample, sample_format) = match self {
            WavEncoding::Pcm16 => (16, SampleFormat::Int),
            WavEncoding::Pcm24 => (24, SampleFormat::Int),
            WavEncoding::Pcm32 => (32, SampleFormat::Int),
            WavEncoding::Float32 => (32, SampleFormat::Float),
        };
        WavSpec {
            channels,
            sample_rate,
            bits_per_sample,
            sample_format,
        }
    }

    fn full_scale(self) -> f64 {
        match self {
            WavEncoding::Pcm16 => 32_768.0,
            WavEncoding::Pcm24 => 8_388_608.0,
            WavEncoding::Pcm32 => 2_147_483_648.0,
            WavEncoding::Float32 => 1.0,
        }
    }
}

/// Decoded audio; unlike a clip it may be mono.
#[derive(Debug, Clone, PartialEq)]
pub struct WavAudio {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate: u32,
    pub encoding: WavEncoding,
}

impl WavAudio {
    pub fn into_clip<T: Real>(self) -> Result<MultichannelClip<T>> {
        MultichannelClip::new(self.channels, self.sample_rate).map(|c| c.cast())
    }
}

fn map_hound(err: hound::Error, path: &Path) -> Error {
    match err {
        hound::Error::FormatError(msg) => Error::MalformedWav(format!("{}: {msg}", path.display())),
        hound::Error::UnfinishedSample => {
            Error::MalformedWav(format!("{}: truncated sample data", path.display()))
        }
        hound::Error::Unsupported | hound::Error::InvalidSampleFormat | hound::Error::TooWide => {
            Error::UnsupportedCodec(format!("{}: {err}", path.display()))
        }
        // The file is already open, so read failures mean it is truncated.
        hound::Error::IoError(e) => Error::MalformedWav(format!("{}: {e}", path.display())),
    }
}

pub fn read_wav(path: &Path) -> Result<WavAudio> {
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let reader = WavReader::new(BufReader::new(file)).map_err(|e| map_hound(e, path))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels > MAX_CHANNELS {
        return Err(Error::TooManyChannels(channels));
    }
    if channels == 0 {
        return Err(Error::MalformedWav(format!("{}: zero channels", path.display())));
    }
    let encoding = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => WavEncoding::Pcm16,
        (SampleFormat::Int, 24) => WavEncoding::Pcm24,
        (SampleFormat::Int, 32) => WavEncoding::Pcm32,
        (SampleFormat::Float, 32) => WavEncoding::Float32,
        (format, bits) => {
            return Err(Error::UnsupportedCodec(format!(
                "{}: {bits}-bit {format:?}",
                path.display()
            )))
        }
    };
    let interleaved: Vec<f64> = match encoding {
        WavEncoding::Float32 => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>(),
        _ => {
            let scale = encoding.full_scale();
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
        }
    }
    .map_err(|e| map_hound(e, path))?;
    if interleaved.len() % channels != 0 {
        return Err(Error::MalformedWav(format!(
            "{}: {} samples do not fill {channels} channels",
            path.display(),
            interleaved.len()
        )));
    }
    let mut out = vec![Vec::with_capacity(interleaved.len() / channels); channels];
    for frame in interleaved.chunks_exact(channels) {
        for (ch, &x) in out.iter_mut().zip(frame) {
            ch.push(x);
        }
    }
    Ok(WavAudio {
        channels: out,
        sample_rate: spec.sample_rate,
        encoding,
    })
}

/// Reads a WAV file as a clip (at least two channels).
pub fn read_clip<T: Real>(path: &Path) -> Result<MultichannelClip<T>> {
    read_wav(path)?.into_clip()
}

pub fn write_wav<T: Real>(clip: &MultichannelClip<T>, encoding: WavEncoding, path: &Path) -> Result<()> {
    write_channels(clip.channels(), clip.sample_rate(), encoding, path)
}

pub fn write_channels<T: Real>(
    channels: &[Vec<T>],
    sample_rate: u32,
    encoding: WavEncoding,
    path: &Path,
) -> Result<()> {
    if channels.is_empty() || channels.len() > MAX_CHANNELS {
        return Err(Error::TooManyChannels(channels.len()));
    }
    let len = channels[0].len();
    if channels.iter().any(|c| c.len() != len) {
        return Err(Error::ShapeMismatch("channels differ in length".into()));
    }
    let spec = encoding.spec(channels.len() as u16, sample_rate);
    with_atomic_file(path, |file| {
        let write_err = |e: hound::Error| match e {
            hound::Error::IoError(e) => Error::io(format!("writing {}", path.display()), e),
            other => map_hound(other, path),
        };
        let mut writer = WavWriter::new(BufWriter::new(file), spec).map_err(write_err)?;
        let scale = encoding.full_scale();
        let (lo, hi) = (-scale, scale - 1.0);
        for n in 0..len {
            for ch in channels {
                let x = ch[n].as_f64();
                let result = match encoding {
                    WavEncoding::Float32 => writer.write_sample(x as f32),
                    WavEncoding::Pcm16 => writer.write_sample((x * scale).round().clamp(lo, hi) as i16),
                    WavEncoding::Pcm24 | WavEncoding::Pcm32 => {
                        writer.write_sample((x * scale).round().clamp(lo, hi) as i32)
                    }
                };
                result.map_err(write_err)?;
            }
        }
        writer.finalize().map_err(write_err)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_channels(count: usize, len: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(count as u64);
        (0..count)
            .map(|_| (0..len).map(|_| rng.random_range(-1.0..1.0) as f32 as f64).collect())
            .collect()
    }

    #[test]
    fn float_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("eight.wav");
        let clip = MultichannelClip::new(random_channels(8, 1000), 44_100).unwrap();
        write_wav(&clip, WavEncoding::Float32, &path).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.encoding, WavEncoding::Float32);
        assert_eq!(back.sample_rate, 44_100);
        for (a, b) in back.channels.iter().flatten().zip(clip.channels().iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn integer_round_trips_are_sample_identical() {
        let dir = tempfile::tempdir().unwrap();
        for encoding in [WavEncoding::Pcm16, WavEncoding::Pcm24, WavEncoding::Pcm32] {
            let path = dir.path().join(format!("{encoding:?}.wav"));
            let clip = MultichannelClip::new(random_channels(3, 500), 16_000).unwrap();
            write_wav(&clip, encoding, &path).unwrap();
            let first = read_wav(&path).unwrap();
            assert_eq!(first.encoding, encoding);
            let again = dir.path().join("again.wav");
            write_channels(&first.channels, first.sample_rate, encoding, &again).unwrap();
            assert_eq!(read_wav(&again).unwrap(), first);
        }
    }

    #[test]
    fn full_scale_convention() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("edge.wav");
        write_channels(&[vec![-1.0, 0.0, 32_767.0 / 32_768.0]], 8000, WavEncoding::Pcm16, &path).unwrap();
        let mut reader = WavReader::open(&path).unwrap();
        let raw: Vec<i16> = reader.samples::<i16>().map(|s| s.unwrap()).collect();
        assert_eq!(raw, vec![-32_768, 0, 32_767]);
        let audio = read_wav(&path).unwrap();
        assert_eq!(audio.channels[0], vec![-1.0, 0.0, 32_767.0 / 32_768.0]);
    }

    #[test]
    fn error_kinds_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let garbage = dir.path().join("garbage.wav");
        std::fs::write(&garbage, b"RIFF\x10\x00\x00\x00WAVEjunk").unwrap();
        let err = read_wav(&garbage);
        assert!(matches!(err, Err(Error::MalformedWav(_))), "{err:?}");

        let eight_bit = dir.path().join("u8.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 8,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&eight_bit, spec).unwrap();
        w.write_sample(3i8).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&eight_bit), Err(Error::UnsupportedCodec(_))));

        let wide = dir.path().join("wide.wav");
        let spec = WavSpec {
            channels: 9,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&wide, spec).unwrap();
        for _ in 0..9 {
            w.write_sample(0i16).unwrap();
        }
        w.finalize().unwrap();
        assert!(matches!(read_wav(&wide), Err(Error::TooManyChannels(9))));

        assert!(matches!(read_wav(&dir.path().join("missing.wav")), Err(Error::Io { .. })));
    }

    #[test]
    fn mono_reads_but_is_not_a_clip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mono.wav");
        write_channels(&[vec![0.5f64; 10]], 8000, WavEncoding::Float32, &path).unwrap();
        let audio = read_wav(&path).unwrap();
        assert_eq!(audio.channels.len(), 1);
        assert!(audio.into_clip::<f64>().is_err());
    }
}
