//! Sweep metrics: circular mean absolute error and motor match rate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::localization::{circular_distance, localize, select_motor};
use crate::{CalibrationProfile, Config, Error, MultichannelClip, NoiseProfile, Real, Result};

/// Error charged to a clip that could not be localized.
pub const FAILURE_ERROR: f64 = 180.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleResult {
    pub reference_angle: f64,
    pub predicted_angle: Option<f64>,
    pub error: f64,
    pub predicted_motor: Option<usize>,
    pub reference_motor: usize,
    pub matched: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub scenario: String,
    pub profile: String,
    pub per_angle: Vec<AngleResult>,
    /// Degrees.
    pub mae: f64,
    pub match_rate: f64,
    pub failures: usize,
}

impl EvaluationReport {
    /// Builds the summary fields from the rows.
    pub fn from_rows(scenario: String, profile: String, per_angle: Vec<AngleResult>) -> Result<Self> {
        if per_angle.is_empty() {
            return Err(Error::InvalidParameter("report needs at least one row".into()));
        }
        let n = per_angle.len() as f64;
        let mae = per_angle.iter().map(|r| r.error).sum::<f64>() / n;
        let match_rate = per_angle.iter().filter(|r| r.matched).count() as f64 / n;
        let failures = per_angle.iter().filter(|r| r.failure.is_some()).count();
        Ok(EvaluationReport {
            scenario,
            profile,
            per_angle,
            mae,
            match_rate,
            failures,
        })
    }

    /// True when the summary fields agree with the rows.
    pub fn is_consistent(&self) -> bool {
        match Self::from_rows(self.scenario.clone(), self.profile.clone(), self.per_angle.clone()) {
            Ok(again) => {
                again.mae == self.mae
                    && again.match_rate == self.match_rate
                    && again.failures == self.failures
                    && self.per_angle.iter().all(|r| {
                        r.matched == (r.predicted_motor == Some(r.reference_motor))
                    })
            }
            Err(_) => false,
        }
    }
}

/// Angular distance on the circle, in `[0, 180]`.
pub fn circular_error(a: f64, b: f64) -> f64 {
    circular_distance(a, b)
}

/// Mean circular error between predictions and references.
pub fn compute_mae(predictions: &[f64], references: &[f64]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != references.len() {
        return Err(Error::InvalidParameter(format!(
            "need equal non-empty lists, got {} and {}",
            predictions.len(),
            references.len()
        )));
    }
    let total: f64 = predictions
        .iter()
        .zip(references)
        .map(|(&p, &r)| circular_error(p, r))
        .sum();
    Ok(total / predictions.len() as f64)
}

/// Motor that should fire for a source at `angle`, by the same rule used
/// for predictions.
pub fn reference_motor<T: Real>(angle: f64, profile: &CalibrationProfile<T>) -> usize {
    select_motor(T::of(angle), profile.motor_angles()).0
}

/// One evaluation row for a localized (or failed) clip.
pub fn score_prediction<T: Real>(
    reference_angle: f64,
    prediction: Result<(f64, usize)>,
    profile: &CalibrationProfile<T>,
) -> AngleResult {
    let reference_motor = reference_motor(reference_angle, profile);
    match prediction {
        Ok((angle, motor)) => AngleResult {
            reference_angle,
            predicted_angle: Some(angle),
            error: circular_error(angle, reference_angle),
            predicted_motor: Some(motor),
            reference_motor,
            matched: motor == reference_motor,
            failure: None,
        },
        Err(e) => AngleResult {
            reference_angle,
            predicted_angle: None,
            error: FAILURE_ERROR,
            predicted_motor: None,
            reference_motor,
            matched: false,
            failure: Some(e.to_string()),
        },
    }
}

/// Localizes every `(clip, reference angle)` and assembles the report.
/// Per-clip failures are recorded as misses.
pub fn evaluate_sweep<T: Real>(
    items: &[(MultichannelClip<T>, f64)],
    profile: &CalibrationProfile<T>,
    noise: &NoiseProfile<T>,
    config: &Config,
    scenario: &str,
    profile_label: &str,
) -> Result<EvaluationReport> {
    if items.is_empty() {
        return Err(Error::InvalidParameter("sweep is empty".into()));
    }
    let rows = items
        .par_iter()
        .map(|(clip, reference)| {
            let prediction = localize(clip, profile, noise, config)
                .map(|e| (e.best_angle as f64, e.motor_index));
            score_prediction(*reference, prediction, profile)
        })
        .collect();
    EvaluationReport::from_rows(scenario.to_string(), profile_label.to_string(), rows)
}
