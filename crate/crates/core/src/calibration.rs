//! Anchor measurements to lookup table and motor azimuths.
//!
//! Eight white-noise recordings at `0, 45, ..., 315` degrees give one TDoA
//! vector each. Linear interpolation between neighbouring anchors (wrapping
//! from 315 back to 0) fills a 360-row table. Motor `2k` sits midway between
//! microphones `k` and `k+1`, so its azimuth is where the pair `(k, k+1)`
//! curve crosses zero. Odd motors are midpoints of their even neighbours and
//! the two end motors are extrapolated by half a spacing.

use rayon::prelude::*;

use crate::masking::estimate_noise;
use crate::tdoa::{channels_for_pairs, estimate_tdoas, PairIndex};
use crate::{dsp, Config, Error, MultichannelClip, Real, Result, TdoaVector};

/// Calibration directions, degrees.
pub const ANCHOR_ANGLES: [u32; 8] = [0, 45, 90, 135, 180, 225, 270, 315];

/// Rows in the lookup table (1 degree resolution).
pub const TABLE_ROWS: usize = 360;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationAnchor<T> {
    /// Degrees.
    pub angle: u32,
    pub tdoas: TdoaVector<T>,
}

/// Expected TDoA vector for every integer azimuth.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupTable<T> {
    pair_count: usize,
    values: Vec<T>,
}

impl<T: Real> LookupTable<T> {
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        if rows.len() != TABLE_ROWS {
            return Err(Error::ShapeMismatch(format!(
                "lookup table needs {TABLE_ROWS} rows, got {}",
                rows.len()
            )));
        }
        let pair_count = rows[0].len();
        if channels_for_pairs(pair_count).is_none() || rows.iter().any(|r| r.len() != pair_count) {
            return Err(Error::ShapeMismatch("lookup table rows have inconsistent pair counts".into()));
        }
        Ok(LookupTable {
            pair_count,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn pair_count(&self) -> usize {
        self.pair_count
    }

    pub fn channel_count(&self) -> usize {
        channels_for_pairs(self.pair_count).expect("validated")
    }

    /// Row for azimuth `angle` (degrees, 0..360).
    pub fn row(&self, angle: usize) -> &[T] {
        &self.values[angle * self.pair_count..(angle + 1) * self.pair_count]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.values.chunks_exact(self.pair_count)
    }

    /// TDoA curve of one pair over all 360 azimuths.
    pub fn curve(&self, pair: PairIndex) -> Vec<T> {
        let column = pair.position(self.channel_count());
        self.rows().map(|row| row[column]).collect()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileMetadata {
    pub sample_rate: u32,
    pub frame_size: usize,
    pub hop: usize,
    pub tau_max: usize,
    pub kernel_sigma: f64,
    pub kernel_length_scale: f64,
    /// Seconds since the Unix epoch, when the caller supplies one.
    pub created_unix: Option<i64>,
    pub tool_version: String,
}

impl ProfileMetadata {
    pub fn from_config(config: &Config) -> Self {
        ProfileMetadata {
            sample_rate: config.sample_rate,
            frame_size: config.frame_size,
            hop: config.hop,
            tau_max: config.tau_max,
            kernel_sigma: config.kernel.sigma,
            kernel_length_scale: config.kernel.length_scale,
            created_unix: None,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// The persisted calibration: anchors, lookup table and motor azimuths.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationProfile<T> {
    anchors: Vec<CalibrationAnchor<T>>,
    table: LookupTable<T>,
    motor_angles: Vec<T>,
    pub metadata: ProfileMetadata,
}

impl<T: Real> CalibrationProfile<T> {
    /// Assembles a profile and checks every invariant.
    pub fn new(
        anchors: Vec<CalibrationAnchor<T>>,
        table: LookupTable<T>,
        motor_angles: Vec<T>,
        metadata: ProfileMetadata,
    ) -> Result<Self> {
        let profile = CalibrationProfile {
            anchors: sorted_anchors(anchors)?,
            table,
            motor_angles,
            metadata,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn anchors(&self) -> &[CalibrationAnchor<T>] {
        &self.anchors
    }

    pub fn table(&self) -> &LookupTable<T> {
        &self.table
    }

    /// `theta_1 .. theta_M`, degrees.
    pub fn motor_angles(&self) -> &[T] {
        &self.motor_angles
    }

    /// Floor of each motor angle.
    pub fn motor_angles_display(&self) -> Vec<i64> {
        self.motor_angles.iter().map(|&a| display_angle(a)).collect()
    }

    pub fn channel_count(&self) -> usize {
        self.table.channel_count()
    }

    pub fn validate(&self) -> Result<()> {
        let tau_max = T::of(self.metadata.tau_max as f64);
        if let Some((i, v)) = self
            .table
            .values()
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.abs() <= tau_max))
        {
            return Err(Error::InvariantViolation(format!(
                "table entry {} (row {}) = {v} exceeds tau_max {}",
                i,
                i / self.table.pair_count(),
                self.metadata.tau_max
            )));
        }
        for anchor in &self.anchors {
            if anchor.tdoas.len() != self.table.pair_count() {
                return Err(Error::InvariantViolation(format!(
                    "anchor {} has {} delays, table has {} pairs",
                    anchor.angle,
                    anchor.tdoas.len(),
                    self.table.pair_count()
                )));
            }
            let row = self.table.row(anchor.angle as usize);
            let exact = row
                .iter()
                .zip(anchor.tdoas.delays())
                .all(|(a, b)| a.to_bits_eq(*b));
            if !exact {
                return Err(Error::InvariantViolation(format!(
                    "table row {} differs from its anchor measurement",
                    anchor.angle
                )));
            }
        }
        let motors = 2 * self.channel_count() - 1;
        if self.motor_angles.len() != motors {
            return Err(Error::InvariantViolation(format!(
                "expected {motors} motor angles, got {}",
                self.motor_angles.len()
            )));
        }
        if self.motor_angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvariantViolation("motor angles must be finite".into()));
        }
        if let Some(i) = (1..motors).find(|&i| !(self.motor_angles[i - 1] < self.motor_angles[i])) {
            return Err(Error::InvariantViolation(format!(
                "motor angles not strictly increasing: theta_{} = {} >= theta_{} = {}",
                i,
                self.motor_angles[i - 1],
                i + 1,
                self.motor_angles[i]
            )));
        }
        Ok(())
    }
}

trait BitsEq {
    fn to_bits_eq(self, other: Self) -> bool;
}

impl<T: Real> BitsEq for T {
    fn to_bits_eq(self, other: Self) -> bool {
        // Both f32 and f64 widen to f64 exactly.
        self.as_f64().to_bits() == other.as_f64().to_bits()
    }
}

/// Floor, the rounding used when angles are displayed as integers.
pub fn display_angle<T: Real>(angle: T) -> i64 {
    angle.floor().as_f64() as i64
}

fn sorted_anchors<T: Real>(mut anchors: Vec<CalibrationAnchor<T>>) -> Result<Vec<CalibrationAnchor<T>>> {
    anchors.sort_by_key(|a| a.angle);
    for pair in anchors.windows(2) {
        if pair[0].angle == pair[1].angle {
            return Err(Error::DuplicateAnchor(pair[0].angle));
        }
    }
    for &angle in &ANCHOR_ANGLES {
        if !anchors.iter().any(|a| a.angle == angle) {
            return Err(Error::MissingAnchor(angle));
        }
    }
    if let Some(extra) = anchors.iter().find(|a| !ANCHOR_ANGLES.contains(&a.angle)) {
        return Err(Error::InvalidParameter(format!(
            "anchor angle {} is not one of {ANCHOR_ANGLES:?}",
            extra.angle
        )));
    }
    let pairs = anchors[0].tdoas.len();
    if anchors.iter().any(|a| a.tdoas.len() != pairs) {
        return Err(Error::ShapeMismatch("anchors differ in pair count".into()));
    }
    Ok(anchors)
}

/// Piecewise-linear, circular interpolation of the anchors onto 360 rows.
pub fn build_lookup_table<T: Real>(anchors: &[CalibrationAnchor<T>]) -> Result<LookupTable<T>> {
    let anchors = sorted_anchors(anchors.to_vec())?;
    let step = (360 / ANCHOR_ANGLES.len()) as u32;
    let mut rows = Vec::with_capacity(TABLE_ROWS);
    for angle in 0..TABLE_ROWS as u32 {
        let segment = (angle / step) as usize;
        let offset = angle - segment as u32 * step;
        let lower = anchors[segment].tdoas.delays();
        if offset == 0 {
            rows.push(lower.to_vec());
            continue;
        }
        let upper = anchors[(segment + 1) % anchors.len()].tdoas.delays();
        let fraction = T::of(offset as f64) / T::of(step as f64);
        rows.push(
            lower
                .iter()
                .zip(upper)
                .map(|(&a, &b)| a + fraction * (b - a))
                .collect(),
        );
    }
    LookupTable::from_rows(rows)
}

/// Azimuths where a circular 1-degree curve crosses zero.
///
/// Sign changes are refined linearly between the bracketing degrees; exact
/// zeros are returned as is, and a run of consecutive zeros counts once at
/// its centre.
pub fn zero_crossings<T: Real>(curve: &[T]) -> Vec<T> {
    let n = curve.len();
    if curve.iter().all(|v| v.is_zero()) {
        return Vec::new();
    }
    let full = T::of(n as f64);
    let mut crossings = Vec::new();
    for i in 0..n {
        let (a, b) = (curve[i], curve[(i + 1) % n]);
        if a.is_zero() {
            // Only the start of a zero run emits; it reports the run midpoint.
            if curve[(i + n - 1) % n].is_zero() {
                continue;
            }
            let run = (0..n).take_while(|k| curve[(i + k) % n].is_zero()).count();
            let centre = T::of(i as f64) + T::of((run - 1) as f64) / T::of(2.0);
            crossings.push(if centre >= full { centre - full } else { centre });
        } else if !b.is_zero() && (a < T::zero()) != (b < T::zero()) {
            crossings.push(T::of(i as f64) + a / (a - b));
        }
    }
    crossings.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    crossings
}

/// `theta_2, theta_4, ..., theta_{2M-2}` from the adjacent-pair zero crossings.
///
/// Each adjacent pair usually crosses zero twice (source in front of the
/// pair and behind it). One crossing is picked per pair so the angles are
/// strictly increasing; among admissible choices the one closest to equal
/// spacing wins.
pub fn find_even_motor_angles<T: Real>(table: &LookupTable<T>) -> Result<Vec<T>> {
    let channels = table.channel_count();
    let candidates = (1..channels)
        .map(|k| {
            let pair = PairIndex { u: k, v: k + 1 };
            let crossings = zero_crossings(&table.curve(pair));
            if crossings.is_empty() {
                Err(Error::CalibrationDegenerate(format!(
                    "pair ({},{}) never crosses zero",
                    pair.u, pair.v
                )))
            } else {
                Ok(crossings)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    select_increasing(&candidates).ok_or_else(|| {
        Error::CalibrationDegenerate(
            "no choice of zero crossings gives strictly increasing motor angles".into(),
        )
    })
}

fn select_increasing<T: Real>(candidates: &[Vec<T>]) -> Option<Vec<T>> {
    fn spacing_cost<T: Real>(angles: &[T]) -> T {
        if angles.len() < 3 {
            return T::zero();
        }
        let mean = (angles[angles.len() - 1] - angles[0]) / T::of((angles.len() - 1) as f64);
        angles
            .windows(2)
            .map(|w| {
                let d = w[1] - w[0] - mean;
                d * d
            })
            .fold(T::zero(), |a, b| a + b)
    }

    fn search<T: Real>(
        candidates: &[Vec<T>],
        chosen: &mut Vec<T>,
        best: &mut Option<(T, Vec<T>)>,
    ) {
        let depth = chosen.len();
        if depth == candidates.len() {
            let cost = spacing_cost(chosen);
            if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                *best = Some((cost, chosen.clone()));
            }
            return;
        }
        for &angle in &candidates[depth] {
            if chosen.last().is_none_or(|&prev| angle > prev) {
                chosen.push(angle);
                search(candidates, chosen, best);
                chosen.pop();
            }
        }
    }

    let mut best = None;
    search(candidates, &mut Vec::with_capacity(candidates.len()), &mut best);
    best.map(|(_, angles)| angles)
}

/// `theta_{2k+1} = (theta_{2k} + theta_{2k+2}) / 2`.
pub fn interpolate_odd_motor_angles<T: Real>(even: &[T]) -> Vec<T> {
    let half = T::of(0.5);
    even.windows(2).map(|w| (w[0] + w[1]) * half).collect()
}

/// `theta_1 = (3 theta_2 - theta_3) / 2`, `theta_M = (3 theta_{M-1} - theta_{M-2}) / 2`.
pub fn extrapolate_end_motor_angles<T: Real>(
    theta_2: T,
    theta_3: T,
    second_last_odd: T,
    last_even: T,
) -> (T, T) {
    let three = T::of(3.0);
    let half = T::of(0.5);
    (
        (three * theta_2 - theta_3) * half,
        (three * last_even - second_last_odd) * half,
    )
}

/// Full motor angle list `theta_1 .. theta_{2E+1}` from `E` even angles.
pub fn motor_angles_from_even<T: Real>(even: &[T]) -> Result<Vec<T>> {
    if even.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two even motor angles".into(),
        ));
    }
    let odd = interpolate_odd_motor_angles(even);
    let (first, last) =
        extrapolate_end_motor_angles(even[0], odd[0], odd[odd.len() - 1], even[even.len() - 1]);
    let mut angles = Vec::with_capacity(2 * even.len() + 1);
    angles.push(first);
    for (i, &e) in even.iter().enumerate() {
        angles.push(e);
        if let Some(&o) = odd.get(i) {
            angles.push(o);
        }
    }
    angles.push(last);
    Ok(angles)
}

/// Profile from already-measured anchor TDoAs.
pub fn profile_from_anchors<T: Real>(
    anchors: Vec<CalibrationAnchor<T>>,
    config: &Config,
) -> Result<CalibrationProfile<T>> {
    let table = build_lookup_table(&anchors)?;
    let even = find_even_motor_angles(&table)?;
    let motors = motor_angles_from_even(&even)?;
    CalibrationProfile::new(anchors, table, motors, ProfileMetadata::from_config(config))
        .map_err(|e| match e {
            Error::InvariantViolation(msg) => Error::CalibrationFailed(format!(
                "{msg}; even motor angles {:?}",
                even.iter().map(|a| a.as_f64()).collect::<Vec<_>>()
            )),
            other => other,
        })
}

/// Calibrates from eight labelled recordings and a silence recording.
pub fn calibrate<T: Real>(
    recordings: &[(u32, MultichannelClip<T>)],
    silence: &MultichannelClip<T>,
    config: &Config,
) -> Result<CalibrationProfile<T>> {
    config.validate()?;
    for (angle, clip) in recordings.iter().chain(std::iter::once(&(u32::MAX, silence.clone()))) {
        if clip.sample_rate() != config.sample_rate {
            return Err(Error::Config(format!(
                "recording {} has sample rate {}, configuration expects {}",
                if *angle == u32::MAX { "silence".to_string() } else { format!("at {angle} deg") },
                clip.sample_rate(),
                config.sample_rate
            )));
        }
    }
    if let Some((angle, clip)) = recordings
        .iter()
        .find(|(_, c)| c.len() < c.sample_rate() as usize)
    {
        return Err(Error::CalibrationFailed(format!(
            "anchor {angle} has {} samples, at least one second ({}) is needed",
            clip.len(),
            clip.sample_rate()
        )));
    }
    let noise = estimate_noise(&dsp::stft(silence, config.frame_size, config.hop)?)?;
    let anchors = recordings
        .par_iter()
        .map(|(angle, clip)| {
            Ok(CalibrationAnchor {
                angle: *angle,
                tdoas: estimate_tdoas(clip, &noise, config)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    profile_from_anchors(anchors, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn anchors_from(f: impl Fn(u32, usize) -> f64, pairs: usize) -> Vec<CalibrationAnchor<f64>> {
        ANCHOR_ANGLES
            .iter()
            .map(|&angle| CalibrationAnchor {
                angle,
                tdoas: TdoaVector::new((0..pairs).map(|p| f(angle, p)).collect()).unwrap(),
            })
            .collect()
    }

    #[test]
    fn table_reproduces_anchors_and_interpolates() {
        let anchors = anchors_from(
            |angle, p| match (angle, p) {
                (0, 0) => 10.0,
                (45, 0) => -8.0,
                _ => (angle as f64 / 45.0 + p as f64).sin() * 20.0,
            },
            28,
        );
        let table = build_lookup_table(&anchors).unwrap();
        for a in &anchors {
            assert_eq!(table.row(a.angle as usize), a.tdoas.delays());
        }
        assert!((table.row(22)[0] - 1.2).abs() < 1e-12);
        // Wraps from 315 toward 0.
        let expected = anchors[7].tdoas.delays()[3]
            + (anchors[0].tdoas.delays()[3] - anchors[7].tdoas.delays()[3]) * (30.0 / 45.0);
        assert!((table.row(345)[3] - expected).abs() < 1e-12);
    }

    #[test]
    fn negative_zero_anchor_is_kept_bit_exact() {
        let anchors = anchors_from(|angle, _| if angle == 90 { -0.0 } else { 1.0 }, 28);
        let table = build_lookup_table(&anchors).unwrap();
        assert_eq!(table.row(90)[0].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn missing_and_duplicate_anchors_are_rejected() {
        let mut anchors = anchors_from(|_, _| 0.0, 28);
        anchors.pop();
        assert!(matches!(build_lookup_table(&anchors), Err(Error::MissingAnchor(315))));
        let mut anchors = anchors_from(|_, _| 0.0, 28);
        anchors[7].angle = 270;
        assert!(matches!(build_lookup_table(&anchors), Err(Error::DuplicateAnchor(270))));
    }

    #[test]
    fn crossing_between_degrees_is_refined() {
        let mut curve = vec![0.0; 360];
        for (i, v) in curve.iter_mut().enumerate() {
            *v = if i < 170 { 4.0 + (169 - i.min(169)) as f64 } else { -4.0 - (i - 170) as f64 * 0.1 };
        }
        curve[170] = 0.0;
        curve[169] = 4.0;
        curve[171] = -4.0;
        let found = zero_crossings(&curve);
        assert!(found.contains(&170.0), "{found:?}");

        let mut curve = vec![1.0; 360];
        curve[200] = -1.0;
        curve[201] = -3.0;
        for v in &mut curve[202..] {
            *v = -3.0;
        }
        let found = zero_crossings(&curve);
        assert_eq!(found, vec![199.5, 359.75]);
    }

    #[test]
    fn zero_runs_and_flat_curves() {
        let mut curve = vec![2.0; 360];
        for v in &mut curve[100..103] {
            *v = 0.0;
        }
        for v in &mut curve[103..] {
            *v = -2.0;
        }
        assert_eq!(zero_crossings(&curve), vec![101.0, 359.5]);
        assert!(zero_crossings(&[0.0; 360]).is_empty());
        assert!(zero_crossings(&[1.0; 360]).is_empty());
    }

    #[test]
    fn increasing_assignment_prefers_even_spacing() {
        let candidates = vec![vec![10.0, 200.0], vec![50.0, 230.0], vec![90.0, 260.0]];
        assert_eq!(select_increasing(&candidates).unwrap(), vec![10.0, 50.0, 90.0]);
        let candidates = vec![vec![300.0], vec![100.0]];
        assert!(select_increasing(&candidates).is_none());
    }

    #[test]
    fn odd_and_end_motor_arithmetic() {
        assert_eq!(interpolate_odd_motor_angles(&[51.0, 109.0]), vec![80.0]);
        let odd = interpolate_odd_motor_angles(&[105.0, 150.0]);
        assert_eq!(odd, vec![127.5]);
        assert_eq!(display_angle(odd[0]), 127);
        let (first, _) = extrapolate_end_motor_angles(51.0, 80.0, 0.0, 0.0);
        assert_eq!((first, display_angle(first)), (36.5, 36));
        let (_, last) = extrapolate_end_motor_angles(0.0, 0.0, 279.0, 298.0);
        assert_eq!((last, display_angle(last)), (307.5, 307));
        let (first, _) = extrapolate_end_motor_angles(40.0, 40.0, 0.0, 0.0);
        assert_eq!(first, 40.0);
        let odd = interpolate_odd_motor_angles(&[10.0, 30.0, 50.0, 70.0]);
        assert_eq!(odd, vec![20.0, 40.0, 60.0]);
    }

    #[test]
    fn motor_list_layout() {
        let even = [60.0, 100.0, 140.0, 180.0, 220.0, 260.0, 300.0];
        let all = motor_angles_from_even(&even).unwrap();
        assert_eq!(all.len(), 15);
        assert_eq!(all[1], 60.0);
        assert_eq!(all[2], 80.0);
        assert_eq!(all[13], 300.0);
        assert_eq!(all[0], 50.0);
        assert_eq!(all[14], 310.0);
    }

    #[test]
    fn profile_validation_names_the_invariant() {
        let anchors = anchors_from(|angle, p| ((angle as f64).to_radians() + p as f64).sin() * 5.0, 28);
        let table = build_lookup_table(&anchors).unwrap();
        let metadata = ProfileMetadata::from_config(&Config::default());
        let mut motors: Vec<f64> = (0..15).map(|i| 36.0 + 20.0 * i as f64).collect();
        CalibrationProfile::new(anchors.clone(), table.clone(), motors.clone(), metadata.clone()).unwrap();
        motors.swap(3, 4);
        let err = CalibrationProfile::new(anchors.clone(), table.clone(), motors, metadata.clone()).unwrap_err();
        assert!(err.to_string().contains("strictly increasing"), "{err}");
        let tight = ProfileMetadata { tau_max: 3, ..metadata };
        let motors: Vec<f64> = (0..15).map(|i| 36.0 + 20.0 * i as f64).collect();
        let err = CalibrationProfile::new(anchors, table, motors, tight).unwrap_err();
        assert!(err.to_string().contains("exceeds tau_max"), "{err}");
    }
}
