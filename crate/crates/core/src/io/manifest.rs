//! Batch manifests (TOML).
//!
//! A `scenario` manifest describes what to synthesize: belt geometry, an
//! anchor calibration set and any number of sweeps. `simulate` renders it to
//! WAV files plus a `recordings` manifest that lists them; `evaluate` accepts
//! either kind. File paths inside a manifest are relative to the manifest's
//! directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::ANCHOR_ANGLES;
use crate::io::{check_version, resolve_relative, FORMAT_VERSION};
use crate::sim::{
    derive_seed, make_geometry, run_sweep, synthesize, sweep_silence, synthesize_silence, test_angles,
    BeltGeometry, BeltScenario, GroundTruth, Shape, SignalKind, Synthesis, DEFAULT_SPEED_OF_SOUND,
};
use crate::{Clip, Error, Result};

fn default_radius() -> f64 {
    0.15
}
fn default_arc_span() -> f64 {
    280.0
}
fn default_arc_center() -> f64 {
    180.0
}
fn default_speed() -> f64 {
    DEFAULT_SPEED_OF_SOUND
}
fn default_mics() -> usize {
    8
}
fn default_sample_rate() -> u32 {
    44_100
}
fn default_distance() -> f64 {
    2.0
}
fn default_snr() -> f64 {
    20.0
}
fn default_anchor_duration() -> f64 {
    3.0
}
fn default_sweep_duration() -> f64 {
    2.0
}
fn default_silence_duration() -> f64 {
    2.0
}
fn default_calibration_output() -> PathBuf {
    PathBuf::from("calibration")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeName {
    Circle,
    Ellipse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub shape: ShapeName,
    /// Circle radius, metres.
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default)]
    pub semi_x: Option<f64>,
    #[serde(default)]
    pub semi_y: Option<f64>,
    #[serde(default = "default_arc_span")]
    pub arc_span: f64,
    #[serde(default = "default_arc_center")]
    pub arc_center: f64,
    #[serde(default = "default_speed")]
    pub speed_of_sound: f64,
    #[serde(default = "default_mics")]
    pub mic_count: usize,
}

impl Default for GeometrySpec {
    fn default() -> Self {
        GeometrySpec {
            shape: ShapeName::Circle,
            radius: default_radius(),
            semi_x: None,
            semi_y: None,
            arc_span: default_arc_span(),
            arc_center: default_arc_center(),
            speed_of_sound: default_speed(),
            mic_count: default_mics(),
        }
    }
}

impl GeometrySpec {
    pub fn build(&self) -> Result<BeltGeometry> {
        let shape = match self.shape {
            ShapeName::Circle => Shape::Circle { radius: self.radius },
            ShapeName::Ellipse => match (self.semi_x, self.semi_y) {
                (Some(semi_x), Some(semi_y)) => Shape::Ellipse { semi_x, semi_y },
                _ => return Err(Error::Config("ellipse geometry needs semi_x and semi_y".into())),
            },
        };
        make_geometry(
            shape,
            self.arc_span,
            self.arc_center,
            self.mic_count,
            2 * self.mic_count.max(1) - 1,
            self.speed_of_sound,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSpec {
    #[serde(default = "default_anchor_signal")]
    pub signal: SignalKind,
    #[serde(default = "default_anchor_duration")]
    pub duration: f64,
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    #[serde(default = "default_distance")]
    pub source_distance: f64,
    #[serde(default = "default_silence_duration")]
    pub silence_duration: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_calibration_output")]
    pub output: PathBuf,
}

fn default_anchor_signal() -> SignalKind {
    SignalKind::WhiteNoise
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub name: String,
    pub signal: SignalKind,
    /// Defaults to the 40 evaluation azimuths `0, 9, ..., 351`.
    #[serde(default)]
    pub angles: Option<Vec<f64>>,
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    #[serde(default = "default_sweep_duration")]
    pub duration: f64,
    #[serde(default = "default_distance")]
    pub source_distance: f64,
    #[serde(default = "default_silence_duration")]
    pub silence_duration: f64,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; defaults to the sweep name.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl SweepSpec {
    pub fn angles(&self) -> Vec<f64> {
        self.angles.clone().unwrap_or_else(test_angles)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from(&self.name))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioManifest {
    pub format_version: u32,
    pub name: String,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: u32,
    #[serde(default)]
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub calibration: Option<CalibrationSpec>,
    #[serde(default)]
    pub sweeps: Vec<SweepSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorEntry {
    pub angle: u32,
    pub wav: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationEntry {
    pub silence: PathBuf,
    pub anchors: Vec<AnchorEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipEntry {
    pub wav: PathBuf,
    pub truth: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepEntry {
    pub name: String,
    pub silence: PathBuf,
    pub clips: Vec<ClipEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordingsManifest {
    pub format_version: u32,
    pub name: String,
    #[serde(default)]
    pub calibration: Option<CalibrationEntry>,
    #[serde(default)]
    pub sweeps: Vec<SweepEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Manifest {
    Scenario(ScenarioManifest),
    Recordings(RecordingsManifest),
}

impl Manifest {
    pub fn format_version(&self) -> u32 {
        match self {
            Manifest::Scenario(m) => m.format_version,
            Manifest::Recordings(m) => m.format_version,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Manifest::Scenario(m) => &m.name,
            Manifest::Recordings(m) => &m.name,
        }
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Probe {
            format_version: Option<u32>,
        }
        let format_err = |message: String| Error::Format {
            path: origin.to_string(),
            message,
        };
        let probe: Probe = toml::from_str(text).map_err(|e| format_err(e.to_string()))?;
        check_version(probe.format_version.ok_or_else(|| format_err("missing format_version".into()))?)?;
        let manifest: Manifest = toml::from_str(text).map_err(|e| format_err(e.to_string()))?;
        manifest.check_paths()?;
        Ok(manifest)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format {
            path: String::new(),
            message: e.to_string(),
        })
    }

    /// Loads a manifest; the returned directory anchors its relative paths.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let manifest = Self::from_toml_str(&text, &path.display().to_string())?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((manifest, dir))
    }

    fn check_paths(&self) -> Result<()> {
        let mut paths: Vec<&Path> = Vec::new();
        match self {
            Manifest::Scenario(m) => {
                if let Some(c) = &m.calibration {
                    paths.push(&c.output);
                    if let SignalKind::WavFile { path } = &c.signal {
                        paths.push(path);
                    }
                }
                for s in &m.sweeps {
                    if let Some(o) = &s.output {
                        paths.push(o);
                    }
                    if let SignalKind::WavFile { path } = &s.signal {
                        paths.push(path);
                    }
                }
            }
            Manifest::Recordings(m) => {
                if let Some(c) = &m.calibration {
                    paths.push(&c.silence);
                    paths.extend(c.anchors.iter().map(|a| a.wav.as_path()));
                }
                for s in &m.sweeps {
                    paths.push(&s.silence);
                    for c in &s.clips {
                        paths.push(&c.wav);
                        paths.push(&c.truth);
                    }
                }
            }
        }
        for p in paths {
            resolve_relative(Path::new(""), p)?;
        }
        Ok(())
    }
}

/// A rendered calibration set: one clip per anchor angle plus silence.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedCalibration {
    pub anchors: Vec<(u32, Synthesis)>,
    pub silence: Clip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedSweep {
    pub name: String,
    pub items: Vec<Synthesis>,
    pub silence: Clip,
}

impl ScenarioManifest {
    /// Replaces every seed with one derived from `seed`.
    pub fn reseed(&mut self, seed: u64) {
        if let Some(c) = &mut self.calibration {
            c.seed = derive_seed(seed, 0);
        }
        for (i, s) in self.sweeps.iter_mut().enumerate() {
            s.seed = derive_seed(seed, i as u64 + 1);
        }
    }

    /// Makes WAV-file signal paths absolute against `base_dir`.
    pub fn resolve_signal_paths(&mut self, base_dir: &Path) -> Result<()> {
        let signals = self
            .calibration
            .iter_mut()
            .map(|c| &mut c.signal)
            .chain(self.sweeps.iter_mut().map(|s| &mut s.signal));
        for signal in signals {
            if let SignalKind::WavFile { path } = signal {
                *path = resolve_relative(base_dir, path)?;
            }
        }
        Ok(())
    }

    fn template(&self, geometry: &BeltGeometry) -> BeltScenario {
        BeltScenario {
            geometry: geometry.clone(),
            sample_rate: self.sample_rate,
            ..BeltScenario::default()
        }
    }

    pub fn render_calibration(&self) -> Result<Option<RenderedCalibration>> {
        let Some(spec) = &self.calibration else {
            return Ok(None);
        };
        let geometry = self.geometry.build()?;
        let base = BeltScenario {
            signal: spec.signal.clone(),
            duration: spec.duration,
            snr_db: spec.snr_db,
            source_distance: spec.source_distance,
            seed: spec.seed,
            ..self.template(&geometry)
        };
        let anchors = ANCHOR_ANGLES
            .iter()
            .enumerate()
            .map(|(i, &angle)| {
                let s = synthesize(&BeltScenario {
                    source_angle: angle as f64,
                    seed: derive_seed(spec.seed, i as u64),
                    ..base.clone()
                })?;
                Ok((angle, s))
            })
            .collect::<Result<Vec<_>>>()?;
        let std = anchors[0].1.truth.noise_std;
        let silence = synthesize_silence(
            geometry.mic_count(),
            spec.silence_duration,
            self.sample_rate,
            std,
            spec.seed,
        )?;
        Ok(Some(RenderedCalibration { anchors, silence }))
    }

    pub fn render_sweep(&self, index: usize) -> Result<RenderedSweep> {
        let spec = self
            .sweeps
            .get(index)
            .ok_or_else(|| Error::InvalidParameter(format!("no sweep {index}")))?;
        let geometry = self.geometry.build()?;
        let template = BeltScenario {
            signal: spec.signal.clone(),
            duration: spec.duration,
            snr_db: spec.snr_db,
            source_distance: spec.source_distance,
            seed: spec.seed,
            ..self.template(&geometry)
        };
        let items = run_sweep(&template, &spec.angles())?;
        let silence = sweep_silence(&template, &items, spec.silence_duration)?;
        Ok(RenderedSweep {
            name: spec.name.clone(),
            items,
            silence,
        })
    }
}

/// Ground-truth sidecar written next to each simulated clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthFile {
    pub format: String,
    pub format_version: u32,
    #[serde(flatten)]
    pub truth: GroundTruth,
}

const TRUTH_FORMAT: &str = "beltloc-truth";

pub fn truth_to_string(truth: &GroundTruth) -> Result<String> {
    let file = TruthFile {
        format: TRUTH_FORMAT.into(),
        format_version: FORMAT_VERSION,
        truth: truth.clone(),
    };
    let value = serde_json::to_value(&file).map_err(|e| Error::Format {
        path: String::new(),
        message: e.to_string(),
    })?;
    Ok(crate::io::to_json_text(&value))
}

pub fn load_truth(path: &Path) -> Result<GroundTruth> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let format_err = |message: String| Error::Format {
        path: path.display().to_string(),
        message,
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| format_err(e.to_string()))?;
    if value.get("format").and_then(|f| f.as_str()) != Some(TRUTH_FORMAT) {
        return Err(format_err(format!("not a {TRUTH_FORMAT} file")));
    }
    let version = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| format_err("missing format_version".into()))?;
    check_version(u32::try_from(version).unwrap_or(u32::MAX))?;
    let file: TruthFile = serde_json::from_value(value).map_err(|e| format_err(e.to_string()))?;
    Ok(file.truth)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCENARIO: &str = r#"
kind = "scenario"
format_version = 1
name = "demo"

[geometry]
shape = "circle"
radius = 0.15

[calibration]
duration = 1.5
seed = 3

[[sweeps]]
name = "narrow"
signal = { kind = "band-limited-noise", low_hz = 100, high_hz = 500 }
angles = [0, 90.5]
seed = 11
"#;

    #[test]
    fn parses_scenario_with_defaults() {
        let Manifest::Scenario(m) = Manifest::from_toml_str(SCENARIO, "demo").unwrap() else {
            panic!("wrong kind");
        };
        assert_eq!(m.sample_rate, 44_100);
        assert_eq!(m.geometry.build().unwrap(), BeltGeometry::default());
        let cal = m.calibration.as_ref().unwrap();
        assert_eq!((cal.duration, cal.snr_db, cal.seed), (1.5, 20.0, 3));
        let sweep = &m.sweeps[0];
        assert_eq!(sweep.angles(), vec![0.0, 90.5]);
        assert_eq!(
            sweep.signal,
            SignalKind::BandLimitedNoise {
                low_hz: 100.0,
                high_hz: 500.0
            }
        );
        assert_eq!(sweep.output_dir(), PathBuf::from("narrow"));
    }

    #[test]
    fn rejects_bad_manifests() {
        let v2 = SCENARIO.replace("format_version = 1", "format_version = 2");
        assert!(matches!(
            Manifest::from_toml_str(&v2, "x"),
            Err(Error::UnsupportedVersion { found: 2, .. })
        ));
        let absolute = format!("{SCENARIO}output = \"/tmp/abs\"\n");
        assert!(matches!(Manifest::from_toml_str(&absolute, "x"), Err(Error::Config(_))));
        let unknown = SCENARIO.replace("radius = 0.15", "radius = 0.15\ncolour = \"red\"");
        assert!(matches!(Manifest::from_toml_str(&unknown, "x"), Err(Error::Format { .. })));
        let no_version = SCENARIO.replace("format_version = 1", "");
        assert!(Manifest::from_toml_str(&no_version, "x").is_err());
    }

    #[test]
    fn recordings_round_trip() {
        let m = Manifest::Recordings(RecordingsManifest {
            format_version: 1,
            name: "r".into(),
            calibration: Some(CalibrationEntry {
                silence: "cal/silence.wav".into(),
                anchors: vec![AnchorEntry {
                    angle: 45,
                    wav: "cal/anchor_045.wav".into(),
                }],
            }),
            sweeps: vec![SweepEntry {
                name: "w".into(),
                silence: "w/silence.wav".into(),
                clips: vec![ClipEntry {
                    wav: "w/a.wav".into(),
                    truth: "w/a.truth.json".into(),
                }],
            }],
        });
        let text = m.to_toml_string().unwrap();
        assert_eq!(Manifest::from_toml_str(&text, "r").unwrap(), m);
    }

    #[test]
    fn reseeding_is_deterministic_and_distinct() {
        let Manifest::Scenario(mut a) = Manifest::from_toml_str(SCENARIO, "demo").unwrap() else {
            unreachable!()
        };
        let mut b = a.clone();
        a.reseed(5);
        b.reseed(5);
        assert_eq!(a, b);
        assert_ne!(a.calibration.as_ref().unwrap().seed, a.sweeps[0].seed);
    }

    #[test]
    fn truth_sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let truth = GroundTruth {
            source_angle: 9.0,
            source_distance: 2.0,
            signal: "white-noise".into(),
            snr_db: None,
            seed: 4,
            noise_std: 0.0,
            true_tdoas: vec![0.1, -3.25],
        };
        let path = dir.path().join("t.truth.json");
        std::fs::write(&path, truth_to_string(&truth).unwrap()).unwrap();
        assert_eq!(load_truth(&path).unwrap(), truth);
        std::fs::write(&path, "{\"format\":\"beltloc-truth\",\"format_version\":7}").unwrap();
        assert!(matches!(load_truth(&path), Err(Error::UnsupportedVersion { found: 7, .. })));
    }
}
