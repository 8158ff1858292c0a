//! Planar chain geometry and anthropometry.
//!
//! The chain has five landmarks `A_1..A_5` (toe, ankle, knee, hip, shoulder)
//! joined by four segments (foot, shank, thigh, head-arms-trunk). Segment `j`
//! runs from `A_j` to `A_{j+1}` and its center of mass sits at
//! `G_j = A_j + alpha_j (A_{j+1} - A_j)`.
//!
//! Angles are measured counter-clockwise in radians. The first joint angle is
//! the foot orientation from the horizontal axis; every other joint angle is
//! the turn between consecutive segment vectors. Absolute segment angles are
//! their running sum, unwrapped over time.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;

pub const LANDMARKS: usize = 5;
pub const SEGMENTS: usize = 4;

/// Standard gravity (m/s²). The gravity vector is `(0, -GRAVITY)`.
pub const GRAVITY: f64 = 9.81;

/// Minimum admissible segment length (m).
pub const MIN_SEGMENT_LENGTH: f64 = 1e-6;

/// Relative deviation of per-frame segment lengths above which a
/// diagnostic is raised.
pub const LENGTH_DEVIATION_WARNING: f64 = 0.10;

pub const SEGMENT_NAMES: [&str; SEGMENTS] = ["foot", "shank", "thigh", "hat"];

/// One row of an anthropometric table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentParams {
    /// Center-of-mass position from the distal landmark, relative to length.
    pub alpha: f64,
    /// Segment mass over total body mass.
    pub mass_fraction: f64,
    /// Radius of gyration about the segment COM, relative to length.
    pub gyration_ratio: f64,
}

impl SegmentParams {
    pub const fn new(alpha: f64, mass_fraction: f64, gyration_ratio: f64) -> Self {
        SegmentParams { alpha, mass_fraction, gyration_ratio }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    foot: SegmentParams,
    shank: SegmentParams,
    thigh: SegmentParams,
    hat: SegmentParams,
}

/// Per-segment COM ratios, mass fractions and gyration ratios.
///
/// Serialized as TOML with one inline table per segment:
///
/// ```toml
/// foot  = { alpha = 0.5000, mass_fraction = 0.0290, gyration_ratio = 0.4750 }
/// shank = { alpha = 0.5670, mass_fraction = 0.0930, gyration_ratio = 0.3020 }
/// thigh = { alpha = 0.5670, mass_fraction = 0.2000, gyration_ratio = 0.3230 }
/// hat   = { alpha = 0.6260, mass_fraction = 0.6780, gyration_ratio = 0.4960 }
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableFile", into = "TableFile")]
pub struct AnthropometricTable {
    segments: [SegmentParams; SEGMENTS],
}

impl TryFrom<TableFile> for AnthropometricTable {
    type Error = Error;
    fn try_from(f: TableFile) -> Result<Self> {
        AnthropometricTable::new([f.foot, f.shank, f.thigh, f.hat])
    }
}

impl From<AnthropometricTable> for TableFile {
    fn from(t: AnthropometricTable) -> Self {
        let [foot, shank, thigh, hat] = t.segments;
        TableFile { foot, shank, thigh, hat }
    }
}

impl AnthropometricTable {
    pub fn new(segments: [SegmentParams; SEGMENTS]) -> Result<Self> {
        for (name, s) in SEGMENT_NAMES.iter().zip(&segments) {
            for (field, v) in
                [("alpha", s.alpha), ("mass_fraction", s.mass_fraction), ("gyration_ratio", s.gyration_ratio)]
            {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidTable(format!("{name}.{field} = {v} outside [0, 1]")));
                }
            }
        }
        let sum: f64 = segments.iter().map(|s| s.mass_fraction).sum();
        if !(0.99..=1.01).contains(&sum) {
            return Err(Error::InvalidTable(format!("mass fractions sum to {sum}, expected within [0.99, 1.01]")));
        }
        Ok(AnthropometricTable { segments })
    }

    /// Winter's cadaver-derived coefficients for the four-segment chain,
    /// stored verbatim.
    pub fn winter() -> Self {
        AnthropometricTable {
            segments: [
                SegmentParams::new(0.5000, 0.0290, 0.4750),
                SegmentParams::new(0.5670, 0.0930, 0.3020),
                SegmentParams::new(0.5670, 0.2000, 0.3230),
                SegmentParams::new(0.6260, 0.6780, 0.4960),
            ],
        }
    }

    pub fn segments(&self) -> &[SegmentParams; SEGMENTS] {
        &self.segments
    }

    pub fn alphas(&self) -> [f64; SEGMENTS] {
        self.segments.map(|s| s.alpha)
    }

    pub fn gyration_ratios(&self) -> [f64; SEGMENTS] {
        self.segments.map(|s| s.gyration_ratio)
    }

    /// Mass fractions rescaled to sum to exactly one.
    pub fn normalized_fractions(&self) -> [f64; SEGMENTS] {
        let sum: f64 = self.segments.iter().map(|s| s.mass_fraction).sum();
        self.segments.map(|s| s.mass_fraction / sum)
    }

    pub fn segment_masses(&self, total_mass: f64) -> [f64; SEGMENTS] {
        self.normalized_fractions().map(|f| f * total_mass)
    }

    /// Copy with the trunk COM ratio replaced.
    pub fn with_trunk_alpha(&self, alpha4: f64) -> Result<Self> {
        let mut segments = self.segments;
        segments[3].alpha = alpha4;
        AnthropometricTable::new(segments)
    }

    /// Moments of inertia `m_j (r_j l_j)²` for the given body mass and
    /// segment lengths.
    pub fn inertias(&self, total_mass: f64, lengths: &[f64; SEGMENTS]) -> Result<[f64; SEGMENTS]> {
        let masses = self.segment_masses(total_mass);
        let mut out = [0.0; SEGMENTS];
        for j in 0..SEGMENTS {
            out[j] = inertia_from_gyration(masses[j], lengths[j], self.segments[j].gyration_ratio)?;
        }
        Ok(out)
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::InvalidTable(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        let TableFile { foot, shank, thigh, hat } = (*self).into();
        let row = |name: &str, s: SegmentParams| {
            format!(
                "{name:<5} = {{ alpha = {}, mass_fraction = {}, gyration_ratio = {} }}\n",
                s.alpha, s.mass_fraction, s.gyration_ratio
            )
        };
        [row("foot", foot), row("shank", shank), row("thigh", thigh), row("hat", hat)].concat()
    }
}

/// Segment masses and COM ratios of one subject, as used by the dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyModel {
    pub total_mass: f64,
    pub masses: [f64; SEGMENTS],
    pub alphas: [f64; SEGMENTS],
}

impl BodyModel {
    pub fn new(table: &AnthropometricTable, total_mass: f64) -> Result<Self> {
        if !(total_mass.is_finite() && total_mass > 0.0) {
            return Err(Error::Input(format!("total mass {total_mass} must be positive")));
        }
        Ok(BodyModel { total_mass, masses: table.segment_masses(total_mass), alphas: table.alphas() })
    }

    pub fn with_trunk_alpha(mut self, alpha4: f64) -> Self {
        self.alphas[3] = alpha4;
        self
    }

    /// Weights `w` such that the body COM is `sum_k w_k A_k`.
    pub fn com_weights(&self) -> [f64; LANDMARKS] {
        let mut w = [0.0; LANDMARKS];
        for j in 0..SEGMENTS {
            let f = self.masses[j] / self.total_mass;
            w[j] += f * (1.0 - self.alphas[j]);
            w[j + 1] += f * self.alphas[j];
        }
        w
    }

    pub fn com(&self, landmarks: &[Vec2; LANDMARKS]) -> Vec2 {
        weighted(landmarks, &self.com_weights())
    }
}

pub(crate) fn weighted(points: &[Vec2; LANDMARKS], w: &[f64; LANDMARKS]) -> Vec2 {
    points.iter().zip(w).fold(Vec2::ZERO, |acc, (p, w)| acc + *p * *w)
}

/// Uniformly sampled landmark positions (the camera stream).
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerRecord {
    /// Time of the first frame (s).
    pub start: f64,
    /// Sampling rate (Hz).
    pub rate: f64,
    pub frames: Vec<[Vec2; LANDMARKS]>,
}

impl MarkerRecord {
    pub fn new(start: f64, rate: f64, frames: Vec<[Vec2; LANDMARKS]>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::Input("marker record needs at least 2 frames".into()));
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::Input(format!("marker rate {rate} must be positive")));
        }
        if let Some(i) = frames.iter().position(|f| f.iter().any(|p| !p.is_finite())) {
            return Err(Error::Input(format!("non-finite landmark coordinate in frame {i}")));
        }
        Ok(MarkerRecord { start, rate, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start + i as f64 / self.rate
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// One coordinate channel (`axis` 0 = x, 1 = y) of landmark `j`.
    pub fn channel(&self, j: usize, axis: usize) -> Vec<f64> {
        self.frames.iter().map(|f| if axis == 0 { f[j].x } else { f[j].y }).collect()
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

fn segment_vectors(landmarks: &[Vec2; LANDMARKS]) -> Result<[Vec2; SEGMENTS]> {
    let mut v = [Vec2::ZERO; SEGMENTS];
    for j in 0..SEGMENTS {
        v[j] = landmarks[j + 1] - landmarks[j];
        let length = v[j].norm();
        if !(length > MIN_SEGMENT_LENGTH) {
            return Err(Error::DegenerateSegment { segment: j + 1, length });
        }
    }
    Ok(v)
}

/// Joint angles `theta_1..theta_4`, each in `(-pi, pi]`.
pub fn joint_angles(landmarks: &[Vec2; LANDMARKS]) -> Result<[f64; SEGMENTS]> {
    let v = segment_vectors(landmarks)?;
    let mut theta = [0.0; SEGMENTS];
    theta[0] = wrap_angle(v[0].y.atan2(v[0].x));
    for j in 1..SEGMENTS {
        theta[j] = wrap_angle(v[j - 1].cross(v[j]).atan2(v[j - 1].dot(v[j])));
    }
    Ok(theta)
}

/// Absolute segment angles of a time series of joint angles: running sums
/// of `theta`, unwrapped so consecutive samples never jump by more than `pi`.
pub fn segment_angles(joint: &[[f64; SEGMENTS]]) -> Vec<[f64; SEGMENTS]> {
    let mut out: Vec<[f64; SEGMENTS]> = Vec::with_capacity(joint.len());
    for theta in joint {
        let mut phi = [0.0; SEGMENTS];
        let mut acc = 0.0;
        for j in 0..SEGMENTS {
            acc += theta[j];
            phi[j] = acc;
        }
        if let Some(prev) = out.last() {
            for j in 0..SEGMENTS {
                let turns = ((prev[j] - phi[j]) / (2.0 * PI)).round();
                phi[j] += turns * 2.0 * PI;
            }
        }
        out.push(phi);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentLengths {
    pub lengths: [f64; SEGMENTS],
    /// Largest `|l_frame - l| / l` over frames, per segment.
    pub max_relative_deviation: [f64; SEGMENTS],
}

impl SegmentLengths {
    /// Human-readable diagnostics for segments whose per-frame length
    /// strays more than [`LENGTH_DEVIATION_WARNING`] from the median.
    pub fn warnings(&self) -> Vec<String> {
        (0..SEGMENTS)
            .filter(|&j| self.max_relative_deviation[j] > LENGTH_DEVIATION_WARNING)
            .map(|j| {
                format!(
                    "{} length deviates up to {:.1}% from its median {:.4} m",
                    SEGMENT_NAMES[j],
                    100.0 * self.max_relative_deviation[j],
                    self.lengths[j]
                )
            })
            .collect()
    }
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Per-segment median of the frame-wise landmark distances.
pub fn segment_lengths(frames: &[[Vec2; LANDMARKS]]) -> Result<SegmentLengths> {
    if frames.is_empty() {
        return Err(Error::Input("segment lengths need at least one frame".into()));
    }
    let mut lengths = [0.0; SEGMENTS];
    let mut dev = [0.0; SEGMENTS];
    for j in 0..SEGMENTS {
        let per_frame: Vec<f64> = frames.iter().map(|f| (f[j + 1] - f[j]).norm()).collect();
        let l = median(&mut per_frame.clone());
        if !(l > MIN_SEGMENT_LENGTH) {
            return Err(Error::DegenerateSegment { segment: j + 1, length: l });
        }
        lengths[j] = l;
        dev[j] = per_frame.iter().map(|x| (x - l).abs() / l).fold(0.0, f64::max);
    }
    Ok(SegmentLengths { lengths, max_relative_deviation: dev })
}

/// Segment centers of mass `G_j = A_j + alpha_j (A_{j+1} - A_j)`.
pub fn segment_coms(landmarks: &[Vec2; LANDMARKS], alphas: &[f64; SEGMENTS]) -> [Vec2; SEGMENTS] {
    std::array::from_fn(|j| landmarks[j] + (landmarks[j + 1] - landmarks[j]) * alphas[j])
}

/// Body center of mass: segment COMs weighted by normalized mass fractions.
pub fn body_com(landmarks: &[Vec2; LANDMARKS], table: &AnthropometricTable) -> Vec2 {
    let g = segment_coms(landmarks, &table.alphas());
    let f = table.normalized_fractions();
    g.iter().zip(f).fold(Vec2::ZERO, |acc, (gj, fj)| acc + *gj * fj)
}

/// `I = m (r l)²`.
pub fn inertia_from_gyration(mass: f64, length: f64, gyration_ratio: f64) -> Result<f64> {
    if !(gyration_ratio > 0.0 && gyration_ratio <= 1.0) {
        return Err(Error::GyrationRange(gyration_ratio));
    }
    if !(mass > 0.0 && length > 0.0) {
        return Err(Error::Input(format!("mass {mass} and length {length} must be positive")));
    }
    Ok(mass * (gyration_ratio * length).powi(2))
}

/// Inverse of [`inertia_from_gyration`], extended with the sign of the
/// inertia so non-physical (negative) estimates map to negative ratios.
pub fn gyration_from_inertia(inertia: f64, mass: f64, length: f64) -> f64 {
    inertia.signum() * (inertia.abs() / mass).sqrt() / length
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chain(points: [(f64, f64); 5]) -> [Vec2; 5] {
        points.map(|(x, y)| Vec2::new(x, y))
    }

    #[test]
    fn vertical_foot_is_quarter_turn() {
        let a = chain([(0.0, 0.0), (0.0, 1.0), (0.0, 2.0), (0.0, 3.0), (0.0, 4.0)]);
        let t = joint_angles(&a).unwrap();
        assert!((t[0] - PI / 2.0).abs() < 1e-15);
        assert_eq!(&t[1..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn straight_and_right_turn_joints() {
        let a = chain([(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0), (4.0, 0.0)]);
        assert_eq!(joint_angles(&a).unwrap()[1], 0.0);
        let a = chain([(0.0, 0.0), (1.0, 0.0), (1.0, -1.0), (1.0, -2.0), (1.0, -3.0)]);
        assert!((joint_angles(&a).unwrap()[1] + PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn folded_joint_is_plus_pi() {
        let a = chain([(0.0, 0.0), (1.0, 0.0), (0.0, 0.0), (1.0, 0.0), (0.0, 0.0)]);
        let t = joint_angles(&a).unwrap();
        assert_eq!(t[1], PI);
        assert_eq!(t[0], 0.0);
    }

    #[test]
    fn coincident_landmarks_name_the_segment() {
        let a = chain([(0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]);
        match joint_angles(&a) {
            Err(Error::DegenerateSegment { segment, .. }) => assert_eq!(segment, 2),
            other => panic!("expected degenerate segment, got {other:?}"),
        }
    }

    #[test]
    fn segment_angles_telescope() {
        let phi = segment_angles(&[[PI / 2.0, 0.0, 0.0, 0.0]]);
        assert_eq!(phi[0], [PI / 2.0; 4]);
        let phi = segment_angles(&[[PI / 2.0, -PI / 4.0, 0.0, 0.0]]);
        assert!((phi[0][1] - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn segment_angles_unwrap_through_pi() {
        // Foot turning steadily through the +-pi cut.
        let steps: Vec<f64> = (0..200).map(|i| 2.5 + 0.01 * i as f64).collect();
        let joint: Vec<[f64; 4]> = steps.iter().map(|&a| [wrap_angle(a), 0.1, 0.0, 0.0]).collect();
        let phi = segment_angles(&joint);
        for (k, a) in steps.iter().enumerate() {
            assert!((phi[k][0] - a).abs() < 1e-12);
            assert!((phi[k][1] - (a + 0.1)).abs() < 1e-12);
        }
        // Reference: cumulative sum first, then a plain unwrap.
        let mut reference = Vec::new();
        let mut prev: Option<f64> = None;
        for t in &joint {
            let mut v = t[0] + t[1];
            if let Some(p) = prev {
                while v - p > PI {
                    v -= 2.0 * PI;
                }
                while v - p < -PI {
                    v += 2.0 * PI;
                }
            }
            prev = Some(v);
            reference.push(v);
        }
        for (k, r) in reference.iter().enumerate() {
            assert!((phi[k][1] - r).abs() < 1e-12);
        }
    }

    #[test]
    fn lengths_use_median() {
        let mut frames = vec![chain([(0.0, 0.0), (0.0, 0.4), (0.0, 0.8), (0.0, 1.2), (0.0, 1.6)]); 99];
        frames.push(chain([(0.0, 0.0), (0.0, 0.9), (0.0, 1.3), (0.0, 1.7), (0.0, 2.1)]));
        let l = segment_lengths(&frames).unwrap();
        assert!((l.lengths[0] - 0.4).abs() < 1e-12);
        assert!(l.max_relative_deviation[0] > 1.0);
        assert_eq!(l.warnings().len(), 1);
    }

    #[test]
    fn com_of_symmetric_chain_is_centered() {
        let t = AnthropometricTable::new([SegmentParams::new(0.5, 0.25, 0.3); 4]).unwrap();
        let a = chain([(-0.2, 0.0), (-0.1, 0.5), (0.0, 1.0), (0.1, 0.5), (0.2, 0.0)]);
        assert!(body_com(&a, &t).x.abs() < 1e-15);
    }

    #[test]
    fn com_single_segment_table() {
        let t = AnthropometricTable::new([
            SegmentParams::new(0.5, 0.0, 0.3),
            SegmentParams::new(0.3, 1.0, 0.3),
            SegmentParams::new(0.5, 0.0, 0.3),
            SegmentParams::new(0.5, 0.0, 0.3),
        ])
        .unwrap();
        let a = chain([(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (2.0, 5.0), (3.0, 3.0)]);
        let g = body_com(&a, &t);
        assert!((g - Vec2::new(0.3, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn winter_com_matches_brute_force() {
        let t = AnthropometricTable::winter();
        let a = chain([(0.0, 0.0), (-0.12, 0.07), (0.13, 0.42), (-0.29, 0.53), (0.10, 0.92)]);
        let fr = [0.0290, 0.0930, 0.2000, 0.6780];
        let al = [0.5000, 0.5670, 0.5670, 0.6260];
        let total: f64 = fr.iter().sum();
        let (mut gx, mut gy) = (0.0, 0.0);
        for j in 0..4 {
            gx += fr[j] / total * (a[j].x + al[j] * (a[j + 1].x - a[j].x));
            gy += fr[j] / total * (a[j].y + al[j] * (a[j + 1].y - a[j].y));
        }
        let g = body_com(&a, &t);
        assert!((g.x - gx).abs() < 1e-15 && (g.y - gy).abs() < 1e-15);
        let model = BodyModel::new(&t, 70.0).unwrap();
        assert!((model.com(&a) - g).norm() < 1e-15);
    }

    #[test]
    fn inertia_identity_and_winter_trunk() {
        assert_eq!(inertia_from_gyration(1.0, 1.0, 1.0).unwrap(), 1.0);
        let m4: f64 = 69.1 * 0.6780;
        let l4 = (4.2067 / m4).sqrt() / 0.4960;
        let i4 = inertia_from_gyration(m4, l4, 0.4960).unwrap();
        assert!((i4 - 4.2067).abs() < 1e-12);
        assert!((gyration_from_inertia(i4, m4, l4) - 0.4960).abs() < 1e-12);
    }

    #[test]
    fn gyration_out_of_range() {
        assert!(matches!(inertia_from_gyration(1.0, 1.0, 0.0), Err(Error::GyrationRange(_))));
        assert!(matches!(inertia_from_gyration(1.0, 1.0, 1.2), Err(Error::GyrationRange(_))));
    }

    #[test]
    fn table_validation() {
        assert!(AnthropometricTable::new([SegmentParams::new(0.5, 0.2, 0.3); 4]).is_err());
        assert!(AnthropometricTable::new([SegmentParams::new(1.5, 0.25, 0.3); 4]).is_err());
        let w = AnthropometricTable::winter();
        let sum: f64 = w.segments().iter().map(|s| s.mass_fraction).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let n = w.normalized_fractions();
        assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn table_toml_round_trip() {
        let w = AnthropometricTable::winter();
        let s = w.to_toml_string();
        assert_eq!(AnthropometricTable::from_toml_str(&s).unwrap(), w);
        assert!(AnthropometricTable::from_toml_str("foot = { alpha = 0.5 }").is_err());
    }

    fn arb_chain() -> impl Strategy<Value = [Vec2; 5]> {
        prop::array::uniform5((-2.0..2.0f64, -2.0..2.0f64)).prop_map(|p| p.map(|(x, y)| Vec2::new(x, y)))
    }

    proptest! {
        #[test]
        fn joint_angles_are_wrapped(a in arb_chain()) {
            if let Ok(t) = joint_angles(&a) {
                for v in t {
                    prop_assert!(v > -PI && v <= PI);
                }
            }
        }

        #[test]
        fn com_translates_with_landmarks(a in arb_chain(), dx in -5.0..5.0f64, dy in -5.0..5.0f64) {
            let t = AnthropometricTable::winter();
            let shifted = a.map(|p| p + Vec2::new(dx, dy));
            let d = body_com(&shifted, &t) - body_com(&a, &t);
            prop_assert!((d.x - dx).abs() < 1e-12 && (d.y - dy).abs() < 1e-12);
        }

        #[test]
        fn lengths_invariant_under_rotation(a in arb_chain(), angle in -PI..PI) {
            let rot = |p: Vec2| Vec2::new(p.x * angle.cos() - p.y * angle.sin(), p.x * angle.sin() + p.y * angle.cos());
            if let (Ok(l0), Ok(l1)) = (segment_lengths(&[a]), segment_lengths(&[a.map(rot)])) {
                for j in 0..4 {
                    prop_assert!((l0.lengths[j] - l1.lengths[j]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn normalization_keeps_ratios(f in prop::array::uniform4(0.05..0.5f64)) {
            let s: f64 = f.iter().sum();
            let rows = f.map(|x| SegmentParams::new(0.5, x / s * 1.005, 0.3));
            let t = AnthropometricTable::new(rows).unwrap();
            let n = t.normalized_fractions();
            for j in 1..4 {
                prop_assert!((n[j] / n[0] - f[j] / f[0]).abs() < 1e-12 * (f[j] / f[0]).max(1.0));
            }
        }
    }
}
