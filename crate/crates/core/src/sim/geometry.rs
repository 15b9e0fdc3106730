//! Belt layouts: microphones and motors spaced evenly in arc length along a
//! circular or elliptical waist, with a gap where the belt closes.

use serde::{Deserialize, Serialize};

use crate::tdoa::PairIndex;
use crate::{Error, Result};

pub type Point = [f64; 2];

/// Waist cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Shape {
    Circle {
        radius: f64,
    },
    /// Semi-axes along x and y, metres.
    Ellipse {
        semi_x: f64,
        semi_y: f64,
    },
}

impl Shape {
    fn semi_axes(self) -> (f64, f64) {
        match self {
            Shape::Circle { radius } => (radius, radius),
            Shape::Ellipse { semi_x, semi_y } => (semi_x, semi_y),
        }
    }

    /// Point at curve parameter `t` (radians).
    pub fn point(self, t: f64) -> Point {
        let (a, b) = self.semi_axes();
        [a * t.cos(), b * t.sin()]
    }

    fn speed(self, t: f64) -> f64 {
        let (a, b) = self.semi_axes();
        (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt()
    }

    /// Largest distance from the centre to the curve.
    pub fn max_radius(self) -> f64 {
        let (a, b) = self.semi_axes();
        a.max(b)
    }

    fn validate(self) -> Result<()> {
        let (a, b) = self.semi_axes();
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "belt semi-axes must be positive, got {a} and {b}"
            )));
        }
        Ok(())
    }
}

/// Cumulative arc length over one revolution, for converting arc length to
/// curve parameter on an ellipse.
struct ArcLength {
    shape: Shape,
    cumulative: Vec<f64>,
    step: f64,
}

impl ArcLength {
    const CELLS: usize = 8192;

    fn new(shape: Shape) -> Self {
        let step = std::f64::consts::TAU / Self::CELLS as f64;
        let mut cumulative = Vec::with_capacity(Self::CELLS + 1);
        cumulative.push(0.0);
        for i in 0..Self::CELLS {
            let t0 = i as f64 * step;
            let s = cumulative[i] + simpson(|t| shape.speed(t), t0, t0 + step);
            cumulative.push(s);
        }
        ArcLength {
            shape,
            cumulative,
            step,
        }
    }

    fn perimeter(&self) -> f64 {
        self.cumulative[Self::CELLS]
    }

    /// Arc length from parameter 0 to `t`, `t` in `[0, 2 pi]`.
    fn length_at(&self, t: f64) -> f64 {
        let cell = ((t / self.step) as usize).min(Self::CELLS - 1);
        let t0 = cell as f64 * self.step;
        self.cumulative[cell] + simpson(|x| self.shape.speed(x), t0, t)
    }

    /// Parameter reached after arc length `s` from parameter 0.
    fn parameter_at(&self, s: f64) -> f64 {
        let p = self.perimeter();
        let s = s.rem_euclid(p);
        let cell = self.cumulative.partition_point(|&c| c <= s).clamp(1, Self::CELLS) - 1;
        let t0 = cell as f64 * self.step;
        let mut t = t0 + (s - self.cumulative[cell]) / self.shape.speed(t0).max(1e-12);
        for _ in 0..8 {
            let err = self.length_at(t.clamp(0.0, std::f64::consts::TAU)) - s;
            t -= err / self.shape.speed(t).max(1e-12);
        }
        t
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
}

/// Microphone and motor layout in the belt frame.
///
/// Azimuths are measured counter-clockwise from the +x axis. Motors are
/// evenly spaced in arc length; microphone `k` sits on motor `2k - 1`, so
/// motor `2k` is the arc midpoint of microphones `k` and `k + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeltGeometry {
    pub shape: Shape,
    /// Degrees of perimeter covered by the belt.
    pub arc_span: f64,
    /// Curve parameter (degrees) at the middle of the belt.
    pub arc_center: f64,
    /// m/s.
    pub speed_of_sound: f64,
    pub mic_positions: Vec<Point>,
    pub motor_positions: Vec<Point>,
    /// Curve parameters (radians) of each motor.
    pub motor_parameters: Vec<f64>,
}

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

impl Default for BeltGeometry {
    /// Circle of radius 0.15 m, 280 degree arc centred behind the `x = 0` gap.
    fn default() -> Self {
        make_geometry(Shape::Circle { radius: 0.15 }, 280.0, 180.0, 8, 15, DEFAULT_SPEED_OF_SOUND)
            .expect("default geometry is valid")
    }
}

/// Lays out `motor_count = 2 * mic_count - 1` motors evenly over `arc_span`
/// degrees of perimeter centred on curve parameter `arc_center`.
pub fn make_geometry(
    shape: Shape,
    arc_span: f64,
    arc_center: f64,
    mic_count: usize,
    motor_count: usize,
    speed_of_sound: f64,
) -> Result<BeltGeometry> {
    shape.validate()?;
    if mic_count < 2 || motor_count != 2 * mic_count - 1 {
        return Err(Error::InvalidParameter(format!(
            "{motor_count} motors cannot interleave {mic_count} microphones (need 2 * mics - 1)"
        )));
    }
    if !(speed_of_sound > 0.0) {
        return Err(Error::InvalidParameter("speed of sound must be positive".into()));
    }
    if !(arc_span < 360.0) || !(arc_span / (motor_count - 1) as f64 >= 1.0) {
        return Err(Error::ArcTooSmall {
            arc_span,
            motors: motor_count,
        });
    }

    let motor_parameters: Vec<f64> = match shape {
        Shape::Circle { .. } => (0..motor_count)
            .map(|i| {
                let deg = arc_center - arc_span / 2.0 + arc_span * i as f64 / (motor_count - 1) as f64;
                deg.to_radians()
            })
            .collect(),
        Shape::Ellipse { .. } => {
            let arc = ArcLength::new(shape);
            let perimeter = arc.perimeter();
            let length = perimeter * arc_span / 360.0;
            let centre_t = arc_center.to_radians().rem_euclid(std::f64::consts::TAU);
            let centre_s = arc.length_at(centre_t);
            (0..motor_count)
                .map(|i| {
                    let s = centre_s - length / 2.0 + length * i as f64 / (motor_count - 1) as f64;
                    arc.parameter_at(s)
                })
                .collect()
        }
    };
    let motor_positions: Vec<Point> = motor_parameters.iter().map(|&t| shape.point(t)).collect();
    let mic_positions = motor_positions.iter().step_by(2).copied().collect();
    Ok(BeltGeometry {
        shape,
        arc_span,
        arc_center,
        speed_of_sound,
        mic_positions,
        motor_positions,
        motor_parameters,
    })
}

impl BeltGeometry {
    pub fn mic_count(&self) -> usize {
        self.mic_positions.len()
    }

    pub fn motor_count(&self) -> usize {
        self.motor_positions.len()
    }

    /// Source position for an azimuth (degrees) and distance (metres).
    pub fn source_position(&self, angle: f64, distance: f64) -> Point {
        let a = angle.to_radians();
        [distance * a.cos(), distance * a.sin()]
    }

    /// Azimuth (degrees, `[0, 360)`) of each motor as seen from the centre.
    pub fn motor_azimuths(&self) -> Vec<f64> {
        self.motor_positions
            .iter()
            .map(|p| p[1].atan2(p[0]).to_degrees().rem_euclid(360.0))
            .collect()
    }

    fn check_outside(&self, distance: f64) -> Result<()> {
        let radius = self.shape.max_radius();
        if !(distance > radius) {
            return Err(Error::SourceInsideBelt { distance, radius });
        }
        Ok(())
    }

    /// Spherical-propagation delay `t_u - t_v` in samples.
    pub fn true_tdoa(&self, angle: f64, distance: f64, pair: PairIndex, sample_rate: f64) -> Result<f64> {
        self.check_outside(distance)?;
        if pair.v > self.mic_count() {
            return Err(Error::InvalidParameter(format!(
                "pair ({},{}) exceeds {} microphones",
                pair.u,
                pair.v,
                self.mic_count()
            )));
        }
        let src = self.source_position(angle, distance);
        let d = |p: Point| ((src[0] - p[0]).powi(2) + (src[1] - p[1]).powi(2)).sqrt();
        let du = d(self.mic_positions[pair.u - 1]);
        let dv = d(self.mic_positions[pair.v - 1]);
        Ok((du - dv) * sample_rate / self.speed_of_sound)
    }

    /// Every pair's spherical delay, in pair enumeration order.
    pub fn true_tdoas(&self, angle: f64, distance: f64, sample_rate: f64) -> Result<Vec<f64>> {
        crate::tdoa::pairs(self.mic_count())
            .into_iter()
            .map(|p| self.true_tdoa(angle, distance, p, sample_rate))
            .collect()
    }

    /// Plane-wave delay `t_u - t_v` in samples for a source at infinity.
    pub fn plane_wave_tdoa(&self, angle: f64, pair: PairIndex, sample_rate: f64) -> f64 {
        let a = angle.to_radians();
        let e = [a.cos(), a.sin()];
        let (pu, pv) = (self.mic_positions[pair.u - 1], self.mic_positions[pair.v - 1]);
        ((pv[0] - pu[0]) * e[0] + (pv[1] - pu[1]) * e[1]) * sample_rate / self.speed_of_sound
    }
}
