//! Calibration profile file (JSON).
//!
//! Numbers are written in shortest round-trip form and parsed back exactly,
//! so a profile survives save/load bit for bit in either precision.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibration::{display_angle, CalibrationAnchor, LookupTable, ProfileMetadata};
use crate::io::{check_version, to_json_text, write_atomic, FORMAT_VERSION};
use crate::{CalibrationProfile, Error, Real, Result, TdoaVector};

const FORMAT_NAME: &str = "beltloc-profile";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelFile {
    sigma: f64,
    length_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnchorFile {
    angle: u32,
    tdoas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    format: String,
    format_version: u32,
    sample_rate: u32,
    frame_size: usize,
    hop: usize,
    tau_max: usize,
    kernel: KernelFile,
    created_unix: Option<i64>,
    tool_version: String,
    motor_angles: Vec<f64>,
    motor_angles_display: Vec<i64>,
    anchors: Vec<AnchorFile>,
    /// 360 rows, one per degree.
    table: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct VersionProbe {
    format: Option<String>,
    format_version: Option<u32>,
}

fn widen<T: Real>(values: &[T]) -> Vec<f64> {
    values.iter().map(|v| v.as_f64()).collect()
}

fn narrow<T: Real>(values: &[f64]) -> Vec<T> {
    values.iter().map(|&v| T::of(v)).collect()
}

pub fn profile_to_string<T: Real>(profile: &CalibrationProfile<T>) -> Result<String> {
    let meta = &profile.metadata;
    let file = ProfileFile {
        format: FORMAT_NAME.into(),
        format_version: FORMAT_VERSION,
        sample_rate: meta.sample_rate,
        frame_size: meta.frame_size,
        hop: meta.hop,
        tau_max: meta.tau_max,
        kernel: KernelFile {
            sigma: meta.kernel_sigma,
            length_scale: meta.kernel_length_scale,
        },
        created_unix: meta.created_unix,
        tool_version: meta.tool_version.clone(),
        motor_angles: widen(profile.motor_angles()),
        motor_angles_display: profile.motor_angles_display(),
        anchors: profile
            .anchors()
            .iter()
            .map(|a| AnchorFile {
                angle: a.angle,
                tdoas: widen(a.tdoas.delays()),
            })
            .collect(),
        table: profile.table().rows().map(widen).collect(),
    };
    let value = serde_json::to_value(&file).map_err(|e| Error::Format {
        path: String::new(),
        message: e.to_string(),
    })?;
    Ok(to_json_text(&value))
}

/// Parses and validates a profile. `origin` names the source in errors.
pub fn profile_from_str<T: Real>(text: &str, origin: &str) -> Result<CalibrationProfile<T>> {
    let format_err = |message: String| Error::Format {
        path: origin.to_string(),
        message,
    };
    let probe: VersionProbe = serde_json::from_str(text).map_err(|e| format_err(e.to_string()))?;
    if probe.format.as_deref() != Some(FORMAT_NAME) {
        return Err(format_err(format!("not a {FORMAT_NAME} file")));
    }
    check_version(probe.format_version.ok_or_else(|| format_err("missing format_version".into()))?)?;
    let file: ProfileFile = serde_json::from_str(text).map_err(|e| format_err(e.to_string()))?;

    let anchors = file
        .anchors
        .iter()
        .map(|a| {
            Ok(CalibrationAnchor {
                angle: a.angle,
                tdoas: TdoaVector::new(narrow(&a.tdoas))?,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::InvariantViolation(format!("anchors: {e}")))?;
    let table = LookupTable::from_rows(file.table.iter().map(|r| narrow(r)).collect())
        .map_err(|e| Error::InvariantViolation(format!("table: {e}")))?;
    let motor_angles: Vec<T> = narrow(&file.motor_angles);
    let display: Vec<i64> = motor_angles.iter().map(|&a| display_angle(a)).collect();
    if display != file.motor_angles_display {
        return Err(Error::InvariantViolation(format!(
            "motor_angles_display {:?} is not the floor of motor_angles {:?}",
            file.motor_angles_display, display
        )));
    }
    let metadata = ProfileMetadata {
        sample_rate: file.sample_rate,
        frame_size: file.frame_size,
        hop: file.hop,
        tau_max: file.tau_max,
        kernel_sigma: file.kernel.sigma,
        kernel_length_scale: file.kernel.length_scale,
        created_unix: file.created_unix,
        tool_version: file.tool_version,
    };
    CalibrationProfile::new(anchors, table, motor_angles, metadata)
}

pub fn save_profile<T: Real>(profile: &CalibrationProfile<T>, path: &Path) -> Result<()> {
    write_atomic(path, profile_to_string(profile)?.as_bytes())
}

pub fn load_profile<T: Real>(path: &Path) -> Result<CalibrationProfile<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    profile_from_str(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::{profile_from_anchors, ANCHOR_ANGLES};
    use crate::Config;
    use proptest::prelude::*;

    fn anchors<T: Real>(scale: f64, offsets: &[f64]) -> Vec<CalibrationAnchor<T>> {
        // Pair 0 behaves like a side pair so the even-motor search succeeds;
        // the rest carry arbitrary values.
        let geometry = crate::sim::BeltGeometry::default();
        ANCHOR_ANGLES
            .iter()
            .map(|&angle| {
                let tdoas = geometry
                    .true_tdoas(angle as f64, 2.0, 44_100.0)
                    .unwrap()
                    .iter()
                    .zip(offsets.iter().cycle())
                    .map(|(t, o)| T::of(t * scale + o))
                    .collect();
                CalibrationAnchor {
                    angle,
                    tdoas: TdoaVector::new(tdoas).unwrap(),
                }
            })
            .collect()
    }

    #[test]
    fn round_trip_is_bit_exact_f64_and_f32() {
        let config = Config::default();
        let p64 = profile_from_anchors(anchors::<f64>(1.0, &[1e-9, -0.0, 0.1]), &config).unwrap();
        let back: CalibrationProfile<f64> = profile_from_str(&profile_to_string(&p64).unwrap(), "mem").unwrap();
        assert_eq!(back, p64);
        let bits = |p: &CalibrationProfile<f64>| p.table().values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&p64));

        let p32 = profile_from_anchors(anchors::<f32>(1.0, &[0.3]), &config).unwrap();
        let back: CalibrationProfile<f32> = profile_from_str(&profile_to_string(&p32).unwrap(), "mem").unwrap();
        assert_eq!(back, p32);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn round_trip_property(scale in 0.5f64..1.5, offsets in proptest::collection::vec(-1.0f64..1.0, 1..5)) {
            let mut config = Config::default();
            config.tau_max = 128;
            if let Ok(profile) = profile_from_anchors(anchors::<f64>(scale, &offsets), &config) {
                let text = profile_to_string(&profile).unwrap();
                let back: CalibrationProfile<f64> = profile_from_str(&text, "mem").unwrap();
                prop_assert_eq!(&back, &profile);
                prop_assert_eq!(profile_to_string(&back).unwrap(), text);
            }
        }
    }

    fn edit(text: &str, f: impl FnOnce(&mut serde_json::Value)) -> String {
        let mut v: serde_json::Value = serde_json::from_str(text).unwrap();
        f(&mut v);
        v.to_string()
    }

    #[test]
    fn rejects_broken_files() {
        let profile = profile_from_anchors(anchors::<f64>(1.0, &[0.0]), &Config::default()).unwrap();
        let text = profile_to_string(&profile).unwrap();

        let swapped = edit(&text, |v| {
            let m = v["motor_angles"].as_array_mut().unwrap();
            m.swap(3, 4);
            let d = v["motor_angles_display"].as_array_mut().unwrap();
            d.swap(3, 4);
        });
        let err = profile_from_str::<f64>(&swapped, "mem").unwrap_err();
        assert!(err.to_string().contains("strictly increasing"), "{err}");

        let display = edit(&text, |v| v["motor_angles_display"][0] = 999.into());
        assert!(matches!(profile_from_str::<f64>(&display, "mem"), Err(Error::InvariantViolation(_))));

        let anchor = edit(&text, |v| v["table"][90][2] = 1.25.into());
        let err = profile_from_str::<f64>(&anchor, "mem").unwrap_err();
        assert!(err.to_string().contains("row 90"), "{err}");

        let version = edit(&text, |v| v["format_version"] = 2.into());
        assert!(matches!(
            profile_from_str::<f64>(&version, "mem"),
            Err(Error::UnsupportedVersion { found: 2, expected: 1 })
        ));

        let short = edit(&text, |v| {
            v["table"].as_array_mut().unwrap().pop();
        });
        assert!(profile_from_str::<f64>(&short, "mem").is_err());
        assert!(matches!(profile_from_str::<f64>("{", "mem"), Err(Error::Format { .. })));
    }

    #[test]
    fn saved_file_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let profile = profile_from_anchors(anchors::<f64>(1.0, &[0.0]), &Config::default()).unwrap();
        save_profile(&profile, &path).unwrap();
        let first = std::fs::read(&path).unwrap();
        save_profile(&load_profile::<f64>(&path).unwrap(), &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
    }
}
