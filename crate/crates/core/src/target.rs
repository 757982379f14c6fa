//! Point-scatterer models of a walking person and of a person standing still
//! with two hand-held reflectors.
//!
//! Coordinates: x lateral, y height above the floor, z down-range (the same
//! x-z plane as the channel grid). At aspect 0 the walker faces the radar,
//! i.e. moves towards -z.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arraystore::DenseArray;

#[derive(Debug, Error, PartialEq)]
pub enum TargetError {
    #[error("non-physical height {0} m")]
    Height(f64),
    #[error("sampling rate and duration must be positive (fs {fs}, duration {duration})")]
    Sampling { fs: f64, duration: f64 },
    #[error("duration {duration} s does not hold a whole number of strides at {stride_hz} Hz")]
    Strides { duration: f64, stride_hz: f64 },
    #[error("orientation {0} deg outside [-90, 90]")]
    Orientation(f64),
    #[error("malformed track arrays: {0}")]
    Arrays(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyPart {
    Head,
    Torso,
    UpperArmLeft,
    UpperArmRight,
    ForearmLeft,
    ForearmRight,
    ThighLeft,
    ThighRight,
    ShinLeft,
    ShinRight,
    LegLeft,
    LegRight,
    ReflectorLeft,
    ReflectorRight,
}

impl BodyPart {
    /// Reflectivity weight of the part.
    pub fn reflectivity(self) -> f64 {
        match self {
            BodyPart::Torso => 1.0,
            BodyPart::Head => 0.3,
            BodyPart::ReflectorLeft | BodyPart::ReflectorRight => 5.0,
            _ => 0.2,
        }
    }
}

/// Scatterer positions and reflectivities sampled in time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScattererTrack {
    pub parts: Vec<BodyPart>,
    pub fs: f64,
    pub n_samples: usize,
    /// Scatterer-major: sample `t` of scatterer `b` at `b * n_samples + t`.
    pub positions: Vec<[f64; 3]>,
    pub reflectivity: Vec<f64>,
}

impl ScattererTrack {
    pub fn n_scatterers(&self) -> usize {
        self.parts.len()
    }

    #[inline]
    pub fn position(&self, b: usize, t: usize) -> [f64; 3] {
        self.positions[b * self.n_samples + t]
    }

    #[inline]
    pub fn sigma(&self, b: usize, t: usize) -> f64 {
        self.reflectivity[b * self.n_samples + t]
    }

    pub fn index_of(&self, part: BodyPart) -> Option<usize> {
        self.parts.iter().position(|&p| p == part)
    }

    /// Time-averaged torso position.
    pub fn torso_centroid(&self) -> [f64; 3] {
        let b = self.index_of(BodyPart::Torso).unwrap_or(0);
        let mut c = [0.0; 3];
        for t in 0..self.n_samples {
            let p = self.position(b, t);
            (0..3).for_each(|i| c[i] += p[i]);
        }
        c.map(|v| v / self.n_samples as f64)
    }

    /// Samples `start..start + len` of every scatterer.
    pub fn window(&self, start: usize, len: usize) -> ScattererTrack {
        let mut positions = Vec::with_capacity(len * self.parts.len());
        let mut reflectivity = Vec::with_capacity(len * self.parts.len());
        for b in 0..self.parts.len() {
            let r = b * self.n_samples + start..b * self.n_samples + start + len;
            positions.extend_from_slice(&self.positions[r.clone()]);
            reflectivity.extend_from_slice(&self.reflectivity[r]);
        }
        ScattererTrack { parts: self.parts.clone(), fs: self.fs, n_samples: len, positions, reflectivity }
    }

    /// Positions as a B x T x 3 array and reflectivities as B x T.
    pub fn to_arrays(&self) -> (DenseArray, DenseArray) {
        let parts = serde_json::json!({ "parts": self.parts, "fs": self.fs });
        let (b, t) = (self.parts.len(), self.n_samples);
        let pos = self.positions.iter().flatten().copied().collect();
        (
            DenseArray::real(vec![b, t, 3], "scatterer_positions", pos).with_meta(parts.clone()),
            DenseArray::real(vec![b, t], "scatterer_reflectivity", self.reflectivity.clone()).with_meta(parts),
        )
    }

    pub fn from_arrays(pos: DenseArray, refl: DenseArray) -> Result<Self, TargetError> {
        let bad = |m: &str| TargetError::Arrays(m.to_string());
        if pos.shape.len() != 3 || pos.shape[2] != 3 || refl.shape != pos.shape[..2] {
            return Err(bad("shapes"));
        }
        let parts: Vec<BodyPart> = serde_json::from_value(pos.meta["parts"].clone()).map_err(|e| bad(&e.to_string()))?;
        let fs = pos.meta["fs"].as_f64().ok_or_else(|| bad("fs"))?;
        if parts.len() != pos.shape[0] {
            return Err(bad("part labels"));
        }
        let n_samples = pos.shape[1];
        let flat = pos.into_real().map_err(|e| bad(&e.to_string()))?;
        let positions = flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let reflectivity = refl.into_real().map_err(|e| bad(&e.to_string()))?;
        Ok(Self { parts, fs, n_samples, positions, reflectivity })
    }
}

/// Gait parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkParams {
    pub height: f64,
    pub stride_hz: f64,
    /// Gait phase at t = 0 (rad).
    pub phase: f64,
    pub fs: f64,
    pub duration: f64,
    /// Torso position in the x-z plane.
    pub centre: (f64, f64),
}

impl Default for WalkParams {
    fn default() -> Self {
        Self { height: 1.8, stride_hz: 1.25, phase: 0.0, fs: 1000.0, duration: 0.8, centre: (0.0, 2.5) }
    }
}

const THIGH_SWING: f64 = 30.0;
const SHIN_SWING: f64 = 25.0;
const SHIN_LAG: f64 = PI / 4.0;
const ARM_SWING: f64 = 25.0;
const ELBOW_BEND: f64 = 20.0;
/// Vertical head bob, relative to height, at twice the stride rate.
const HEAD_BOB: f64 = 0.012;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Side {
    Left,
    Right,
}

impl WalkParams {
    fn theta(&self, t: f64) -> f64 {
        2.0 * PI * self.stride_hz * t + self.phase
    }

    fn base(&self, side: Side, lateral: f64, height: f64) -> [f64; 3] {
        let s = if side == Side::Left { -1.0 } else { 1.0 };
        [self.centre.0 + s * lateral * self.height, height * self.height, self.centre.1]
    }

    /// Point `len` along a segment hanging from `from` at `angle` (deg)
    /// forward of vertical.
    fn limb(from: [f64; 3], len: f64, angle: f64) -> [f64; 3] {
        let a = angle.to_radians();
        [from[0], from[1] - len * a.cos(), from[2] - len * a.sin()]
    }

    /// Gait phase of one side: the right side lags by half a cycle.
    fn side_phase(&self, t: f64, side: Side) -> f64 {
        self.theta(t) + if side == Side::Right { PI } else { 0.0 }
    }

    fn hip(&self, side: Side) -> [f64; 3] {
        self.base(side, 0.05, 0.53)
    }

    fn shoulder(&self, side: Side) -> [f64; 3] {
        self.base(side, 0.13, 0.818)
    }

    fn thigh_angle(&self, t: f64, side: Side) -> f64 {
        THIGH_SWING * self.side_phase(t, side).sin()
    }

    fn shin_angle(&self, t: f64, side: Side) -> f64 {
        SHIN_SWING * (self.side_phase(t, side) - SHIN_LAG).sin()
    }

    fn arm_angle(&self, t: f64, side: Side) -> f64 {
        // arms swing against the leg on the same side
        ARM_SWING * (self.side_phase(t, side) + PI).sin()
    }

    pub fn knee(&self, t: f64, side: Side) -> [f64; 3] {
        Self::limb(self.hip(side), 0.245 * self.height, self.thigh_angle(t, side))
    }

    pub fn ankle(&self, t: f64, side: Side) -> [f64; 3] {
        Self::limb(self.knee(t, side), 0.246 * self.height, self.shin_angle(t, side))
    }

    pub fn elbow(&self, t: f64, side: Side) -> [f64; 3] {
        Self::limb(self.shoulder(side), 0.186 * self.height, self.arm_angle(t, side))
    }

    fn scatterer(&self, part: BodyPart, t: f64) -> [f64; 3] {
        let h = self.height;
        let mid = |a: [f64; 3], b: [f64; 3]| [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, (a[2] + b[2]) / 2.0];
        let forearm = |side| {
            let e = self.elbow(t, side);
            mid(e, Self::limb(e, 0.146 * h, self.arm_angle(t, side) + ELBOW_BEND))
        };
        match part {
            BodyPart::Head => {
                let mut p = [self.centre.0, 0.93 * h, self.centre.1];
                p[1] += HEAD_BOB * h * (2.0 * self.theta(t)).sin();
                p
            }
            BodyPart::Torso => [self.centre.0, 0.674 * h, self.centre.1],
            BodyPart::UpperArmLeft => mid(self.shoulder(Side::Left), self.elbow(t, Side::Left)),
            BodyPart::UpperArmRight => mid(self.shoulder(Side::Right), self.elbow(t, Side::Right)),
            BodyPart::ForearmLeft => forearm(Side::Left),
            BodyPart::ForearmRight => forearm(Side::Right),
            BodyPart::ThighLeft => mid(self.hip(Side::Left), self.knee(t, Side::Left)),
            BodyPart::ThighRight => mid(self.hip(Side::Right), self.knee(t, Side::Right)),
            BodyPart::ShinLeft => mid(self.knee(t, Side::Left), self.ankle(t, Side::Left)),
            BodyPart::ShinRight => mid(self.knee(t, Side::Right), self.ankle(t, Side::Right)),
            _ => unreachable!("not part of the walking model"),
        }
    }
}

pub const WALK_PARTS: [BodyPart; 10] = [
    BodyPart::Head,
    BodyPart::Torso,
    BodyPart::UpperArmLeft,
    BodyPart::UpperArmRight,
    BodyPart::ForearmLeft,
    BodyPart::ForearmRight,
    BodyPart::ThighLeft,
    BodyPart::ThighRight,
    BodyPart::ShinLeft,
    BodyPart::ShinRight,
];

/// Sinusoidal-pendulum gait with the whole-body translation removed.
pub fn synth_walk(p: &WalkParams) -> Result<ScattererTrack, TargetError> {
    if !(p.height > 0.0) || !p.height.is_finite() {
        return Err(TargetError::Height(p.height));
    }
    if !(p.fs > 0.0 && p.duration > 0.0) {
        return Err(TargetError::Sampling { fs: p.fs, duration: p.duration });
    }
    let strides = p.stride_hz * p.duration;
    if !(strides >= 1.0 - 1e-9) || (strides - strides.round()).abs() > 1e-9 {
        return Err(TargetError::Strides { duration: p.duration, stride_hz: p.stride_hz });
    }
    let n = (p.fs * p.duration).round() as usize;
    let mut positions = Vec::with_capacity(n * WALK_PARTS.len());
    let mut reflectivity = Vec::with_capacity(n * WALK_PARTS.len());
    for part in WALK_PARTS {
        for j in 0..n {
            positions.push(p.scatterer(part, j as f64 / p.fs));
            reflectivity.push(part.reflectivity());
        }
    }
    Ok(ScattererTrack { parts: WALK_PARTS.to_vec(), fs: p.fs, n_samples: n, positions, reflectivity })
}

/// Rotate (x, z) offsets by `angle` about (cx, cz). Positive angles turn the
/// forward direction -z towards +x.
fn rotate(p: [f64; 3], c: [f64; 3], angle_deg: f64) -> [f64; 3] {
    let (s, co) = angle_deg.to_radians().sin_cos();
    let (dx, dz) = (p[0] - c[0], p[2] - c[2]);
    [c[0] + co * dx - s * dz, p[1], c[2] + s * dx + co * dz]
}

/// Rigid rotation of the whole track about the vertical axis through the
/// torso centroid.
pub fn apply_aspect(track: &ScattererTrack, angle_deg: f64) -> ScattererTrack {
    let c = track.torso_centroid();
    let mut out = track.clone();
    out.positions.iter_mut().for_each(|p| *p = rotate(*p, c, angle_deg));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectParams {
    pub height: f64,
    pub shoulder_width: f64,
    /// Range from the array plane to the torso.
    pub standoff: f64,
}

impl Default for SubjectParams {
    fn default() -> Self {
        Self { height: 1.75, shoulder_width: 0.44, standoff: 2.0 }
    }
}

impl SubjectParams {
    /// Four subjects of different builds.
    pub fn roster() -> Vec<SubjectParams> {
        [(1.60, 0.38), (1.68, 0.41), (1.76, 0.44), (1.85, 0.47)]
            .into_iter()
            .map(|(height, shoulder_width)| SubjectParams { height, shoulder_width, standoff: 2.0 })
            .collect()
    }
}

/// A standing person holding a corner reflector in each hand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaticPose {
    pub parts: Vec<BodyPart>,
    pub positions: Vec<[f64; 3]>,
    pub reflectivity: Vec<f64>,
    pub orientation_deg: f64,
}

impl StaticPose {
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn empty() -> Self {
        Self { parts: vec![], positions: vec![], reflectivity: vec![], orientation_deg: 0.0 }
    }

    pub fn position_of(&self, part: BodyPart) -> Option<[f64; 3]> {
        self.parts.iter().position(|&p| p == part).map(|i| self.positions[i])
    }

    /// Whether every point lies within `half_angle` degrees of boresight
    /// (+z) in both azimuth and elevation, seen from `origin`.
    pub fn within_fov(&self, origin: [f64; 3], half_angle: f64) -> bool {
        self.positions.iter().all(|p| {
            let d = [p[0] - origin[0], p[1] - origin[1], p[2] - origin[2]];
            let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            d[2] > 0.0 && (d[0] / r).asin().to_degrees().abs() <= half_angle && (d[1] / r).asin().to_degrees().abs() <= half_angle
        })
    }
}

/// Static pose facing the radar, turned by `orientation_deg` about the
/// vertical axis through the torso.
pub fn static_pose(subject: &SubjectParams, orientation_deg: f64) -> Result<StaticPose, TargetError> {
    if !(-90.0..=90.0).contains(&orientation_deg) {
        return Err(TargetError::Orientation(orientation_deg));
    }
    if !(subject.height > 0.0) {
        return Err(TargetError::Height(subject.height));
    }
    let h = subject.height;
    let half = subject.shoulder_width / 2.0;
    let z = subject.standoff;
    let torso = [0.0, h / 2.0, z];
    let raw = [
        (BodyPart::Torso, torso),
        (BodyPart::Head, [0.0, 0.93 * h, z]),
        (BodyPart::LegLeft, [-0.45 * half, 0.25 * h, z]),
        (BodyPart::LegRight, [0.45 * half, 0.25 * h, z]),
        (BodyPart::UpperArmLeft, [-(half + 0.06), 0.7 * h, z]),
        (BodyPart::UpperArmRight, [half + 0.06, 0.7 * h, z]),
        (BodyPart::ReflectorLeft, [-(half + 0.22), 0.55 * h, z - 0.15]),
        (BodyPart::ReflectorRight, [half + 0.22, 0.55 * h, z - 0.15]),
    ];
    Ok(StaticPose {
        parts: raw.iter().map(|r| r.0).collect(),
        positions: raw.iter().map(|r| rotate(r.1, torso, orientation_deg)).collect(),
        reflectivity: raw.iter().map(|r| r.0.reflectivity()).collect(),
        orientation_deg,
    })
}

#[cfg(test)]
mod tests;
