//! Bottom-up Newton-Euler inverse dynamics on the push-off window.
//!
//! Joint `k` sits at landmark `A_k`; `R_k` is the force exerted on segment
//! `k` from below and `C_k` the torque. `R_1` and `C_1` are the measured
//! ground reaction and its torque about the toe. Walking up the chain,
//!
//! ```text
//! R_{k+1} = R_k - m_k (a_Gk - g)
//! C_{k+1} = C_k + M_k - I_k phi''_k
//! M_k     = -dx (a R_{y,k} + (1-a) R_{y,k+1}) + dy (a R_{x,k} + (1-a) R_{x,k+1})
//! ```
//!
//! with `(dx, dy) = A_{k+1} - A_k` and `a = alpha_k`. Above the head nothing
//! acts, so `R_5` and `C_5` are residuals.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::lls::norm;
use crate::model::{joint_angles, segment_angles, BodyModel, GRAVITY, LANDMARKS, SEGMENTS};
use crate::quad::{cumulative_double_trapezoid, cumulative_trapezoid};
use crate::spline::{LandmarkState, SmoothedKinematics};
use crate::sync::{ForceRecord, PushOffWindow};

/// Number of time integrations applied to the torque balance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Degree {
    Zero,
    One,
    Two,
}

impl Degree {
    pub const ALL: [Degree; 3] = [Degree::Zero, Degree::One, Degree::Two];

    pub fn as_u8(self) -> u8 {
        match self {
            Degree::Zero => 0,
            Degree::One => 1,
            Degree::Two => 2,
        }
    }
}

impl TryFrom<u8> for Degree {
    type Error = Error;
    fn try_from(d: u8) -> Result<Self> {
        match d {
            0 => Ok(Degree::Zero),
            1 => Ok(Degree::One),
            2 => Ok(Degree::Two),
            _ => Err(Error::Degree(d)),
        }
    }
}

impl From<Degree> for u8 {
    fn from(d: Degree) -> u8 {
        d.as_u8()
    }
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Everything the dynamics needs, sampled on the force grid of the window.
#[derive(Debug, Clone)]
pub struct PushOff {
    /// Force-clock times (s).
    pub times: Vec<f64>,
    pub dt: f64,
    pub landmarks: Vec<[LandmarkState; LANDMARKS]>,
    /// Segment orientation, angular velocity and acceleration.
    pub phi: Vec<[f64; SEGMENTS]>,
    pub phi_dot: Vec<[f64; SEGMENTS]>,
    pub phi_ddot: Vec<[f64; SEGMENTS]>,
    pub rx: Vec<f64>,
    pub ry: Vec<f64>,
    pub c: Vec<f64>,
    pub model: BodyModel,
}

impl PushOff {
    /// Samples the smoothed kinematics at the synchronized camera times of
    /// the window.
    pub fn assemble(
        kin: &SmoothedKinematics,
        force: &ForceRecord,
        window: PushOffWindow,
        nu: i64,
        model: BodyModel,
    ) -> Result<Self> {
        let landmarks =
            window.marker_times(force, nu).into_iter().map(|t| kin.states(t)).collect::<Result<Vec<_>>>()?;
        let idx = window.indices();
        Self::from_states(
            window.times(force),
            force.dt(),
            landmarks,
            force.rx[idx.clone()].to_vec(),
            force.ry[idx.clone()].to_vec(),
            force.c[idx].to_vec(),
            model,
        )
    }

    /// Derives the segment angles and their analytic derivatives from the
    /// landmark states.
    pub fn from_states(
        times: Vec<f64>,
        dt: f64,
        landmarks: Vec<[LandmarkState; LANDMARKS]>,
        rx: Vec<f64>,
        ry: Vec<f64>,
        c: Vec<f64>,
        model: BodyModel,
    ) -> Result<Self> {
        let n = times.len();
        if n < 2 || landmarks.len() != n || rx.len() != n || ry.len() != n || c.len() != n {
            return Err(Error::Input("push-off series differ in length or are empty".into()));
        }
        let joints = landmarks.iter().map(|s| joint_angles(&s.map(|l| l.pos))).collect::<Result<Vec<_>>>()?;
        let phi = segment_angles(&joints);
        let mut phi_dot = Vec::with_capacity(n);
        let mut phi_ddot = Vec::with_capacity(n);
        for s in &landmarks {
            let mut w = [0.0; SEGMENTS];
            let mut dw = [0.0; SEGMENTS];
            for j in 0..SEGMENTS {
                let d = s[j + 1].pos - s[j].pos;
                let v = s[j + 1].vel - s[j].vel;
                let a = s[j + 1].acc - s[j].acc;
                let r2 = d.norm_sq();
                w[j] = d.cross(v) / r2;
                dw[j] = d.cross(a) / r2 - 2.0 * w[j] * d.dot(v) / r2;
            }
            phi_dot.push(w);
            phi_ddot.push(dw);
        }
        Ok(PushOff { times, dt, landmarks, phi, phi_dot, phi_ddot, rx, ry, c, model })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// `R_1..R_5` per sample.
pub fn joint_forces(push: &PushOff) -> Vec<[Vec2; LANDMARKS]> {
    let m = &push.model;
    let g = Vec2::new(0.0, -GRAVITY);
    push.landmarks
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut r = [Vec2::ZERO; LANDMARKS];
            r[0] = Vec2::new(push.rx[i], push.ry[i]);
            for k in 0..SEGMENTS {
                let a = m.alphas[k];
                let acc = s[k].acc * (1.0 - a) + s[k + 1].acc * a;
                r[k + 1] = r[k] - (acc - g) * m.masses[k];
            }
            r
        })
        .collect()
}

/// `M_1..M_4` per sample.
pub fn intersegment_moments(push: &PushOff, forces: &[[Vec2; LANDMARKS]]) -> Vec<[f64; SEGMENTS]> {
    push.landmarks
        .iter()
        .zip(forces)
        .map(|(s, r)| {
            let mut out = [0.0; SEGMENTS];
            for (j, o) in out.iter_mut().enumerate() {
                let a = push.model.alphas[j];
                let d = s[j + 1].pos - s[j].pos;
                *o = -d.x * (a * r[j].y + (1.0 - a) * r[j + 1].y) + d.y * (a * r[j].x + (1.0 - a) * r[j + 1].x);
            }
            out
        })
        .collect()
}

/// `C_1..C_5` per sample; `C_5` is the degree-0 residual torque.
pub fn joint_torques(push: &PushOff, moments: &[[f64; SEGMENTS]], inertias: &[f64; SEGMENTS]) -> Vec<[f64; LANDMARKS]> {
    moments
        .iter()
        .enumerate()
        .map(|(i, mm)| {
            let mut c = [0.0; LANDMARKS];
            c[0] = push.c[i];
            for k in 0..SEGMENTS {
                c[k + 1] = c[k] + mm[k] - inertias[k] * push.phi_ddot[i][k];
            }
            c
        })
        .collect()
}

/// Measured side and segment-rotation side of the torque balance; their
/// difference is the residual torque.
#[derive(Debug, Clone, PartialEq)]
pub struct TorqueSides {
    pub exp: Vec<f64>,
    pub ang: Vec<f64>,
}

impl TorqueSides {
    pub fn residual(&self) -> Vec<f64> {
        self.exp.iter().zip(&self.ang).map(|(e, a)| e - a).collect()
    }
}

/// Angular channel of the given degree: `phi''`, `phi' - phi'(t0)` or
/// `phi - phi(t0)`.
pub fn angular_channel(push: &PushOff, degree: Degree) -> Vec<[f64; SEGMENTS]> {
    let rel = |s: &[[f64; SEGMENTS]]| -> Vec<[f64; SEGMENTS]> {
        let s0 = s[0];
        s.iter().map(|v| std::array::from_fn(|j| v[j] - s0[j])).collect()
    };
    match degree {
        Degree::Zero => push.phi_ddot.clone(),
        Degree::One => rel(&push.phi_dot),
        Degree::Two => rel(&push.phi),
    }
}

/// `C + sum M_j` integrated `degree` times from the window start.
pub fn load_channel(push: &PushOff, moments: &[[f64; SEGMENTS]], degree: Degree) -> Vec<f64> {
    let load: Vec<f64> = push.c.iter().zip(moments).map(|(c, m)| c + m.iter().sum::<f64>()).collect();
    integrate(&load, push.dt, degree)
}

fn integrate(y: &[f64], dt: f64, degree: Degree) -> Vec<f64> {
    match degree {
        Degree::Zero => y.to_vec(),
        Degree::One => cumulative_trapezoid(y, dt),
        Degree::Two => cumulative_double_trapezoid(y, dt),
    }
}

pub fn torque_sides(
    push: &PushOff,
    moments: &[[f64; SEGMENTS]],
    inertias: &[f64; SEGMENTS],
    degree: Degree,
) -> TorqueSides {
    let exp = integrate(&push.c, push.dt, degree);
    let sum_m: Vec<f64> = moments.iter().map(|m| m.iter().sum()).collect();
    let int_m = integrate(&sum_m, push.dt, degree);
    let ang = angular_channel(push, degree)
        .iter()
        .zip(&int_m)
        .map(|(w, m)| -m + w.iter().zip(inertias).map(|(w, i)| w * i).sum::<f64>())
        .collect();
    TorqueSides { exp, ang }
}

pub fn residual_torque(
    push: &PushOff,
    moments: &[[f64; SEGMENTS]],
    inertias: &[f64; SEGMENTS],
    degree: Degree,
) -> Vec<f64> {
    torque_sides(push, moments, inertias, degree).residual()
}

/// `||exp - ang|| / (||exp|| + ||ang||)`, in `[0, 1]`.
pub fn epsilon(exp: &[f64], ang: &[f64]) -> Result<f64> {
    if exp.len() != ang.len() {
        return Err(Error::Input(format!("series lengths differ: {} and {}", exp.len(), ang.len())));
    }
    let den = norm(exp) + norm(ang);
    if den == 0.0 {
        return Err(Error::UndefinedMetric);
    }
    let diff: Vec<f64> = exp.iter().zip(ang).map(|(a, b)| a - b).collect();
    Ok((norm(&diff) / den).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AnthropometricTable;
    use proptest::prelude::*;

    fn still(points: [Vec2; LANDMARKS]) -> [LandmarkState; LANDMARKS] {
        points.map(|pos| LandmarkState { pos, ..Default::default() })
    }

    fn posture() -> [Vec2; LANDMARKS] {
        [
            Vec2::new(0.0, 0.0),
            Vec2::new(-0.12, 0.07),
            Vec2::new(0.05, 0.48),
            Vec2::new(-0.25, 0.80),
            Vec2::new(0.05, 1.35),
        ]
    }

    fn static_push(model: BodyModel, c: f64) -> PushOff {
        let n = 20;
        PushOff::from_states(
            (0..n).map(|i| i as f64 * 1e-3).collect(),
            1e-3,
            vec![still(posture()); n],
            vec![0.0; n],
            vec![model.total_mass * GRAVITY; n],
            vec![c; n],
            model,
        )
        .unwrap()
    }

    #[test]
    fn static_joint_forces_carry_weight_above() {
        let model = BodyModel::new(&AnthropometricTable::winter(), 70.0).unwrap();
        let push = static_push(model, 0.0);
        let r = joint_forces(&push);
        for k in 0..LANDMARKS {
            let above: f64 = model.masses[k..].iter().sum::<f64>() * GRAVITY;
            assert!((r[5][k].y - above).abs() < 1e-9);
            assert_eq!(r[5][k].x, 0.0);
        }
        assert!(r[5][4].norm() < 1e-9);
    }

    #[test]
    fn static_torque_balance() {
        let model = BodyModel::new(&AnthropometricTable::winter(), 70.0).unwrap();
        let com = model.com(&posture());
        // Weight acting at the COM balanced about the toe.
        let c = com.x * model.total_mass * GRAVITY;
        let push = static_push(model, c);
        let m = intersegment_moments(&push, &joint_forces(&push));
        let r0 = residual_torque(&push, &m, &[1.0; 4], Degree::Zero);
        assert!(r0.iter().all(|v| v.abs() < 1e-9), "{:?}", r0[0]);
    }

    #[test]
    fn single_heavy_segment_statics() {
        // All mass in the foot: C = alpha * l * m * g for a horizontal foot.
        let seg = |f| crate::model::SegmentParams::new(0.3, f, 0.4);
        let table = AnthropometricTable::new([seg(1.0), seg(0.0), seg(0.0), seg(0.0)]).unwrap();
        let model = BodyModel::new(&table, 10.0).unwrap();
        let pts =
            [Vec2::new(0.0, 0.0), Vec2::new(0.5, 0.0), Vec2::new(0.5, 0.4), Vec2::new(0.5, 0.8), Vec2::new(0.5, 1.2)];
        let n = 12;
        let push = PushOff::from_states(
            (0..n).map(|i| i as f64 * 1e-3).collect(),
            1e-3,
            vec![still(pts); n],
            vec![0.0; n],
            vec![10.0 * GRAVITY; n],
            vec![0.3 * 0.5 * 10.0 * GRAVITY; n],
            model,
        )
        .unwrap();
        let r = joint_forces(&push);
        assert!(r[0][1].norm() < 1e-12);
        let m = intersegment_moments(&push, &r);
        let c = joint_torques(&push, &m, &[0.1; 4]);
        assert!(c[0][4].abs() < 1e-12);
        assert!(c[0][1].abs() < 1e-12);
    }

    #[test]
    fn massless_segments_pass_force_through() {
        let seg = |f| crate::model::SegmentParams::new(0.5, f, 0.4);
        let table = AnthropometricTable::new([seg(0.0), seg(0.0), seg(0.0), seg(1.0)]).unwrap();
        let model = BodyModel::new(&table, 70.0).unwrap();
        let mut push = static_push(model, 0.0);
        push.rx = (0..push.len()).map(|i| i as f64).collect();
        let r = joint_forces(&push);
        for (i, ri) in r.iter().enumerate() {
            assert_eq!(ri[1], Vec2::new(push.rx[i], push.ry[i]));
        }
    }

    #[test]
    fn moment_reductions() {
        let model = BodyModel::new(&AnthropometricTable::winter(), 70.0).unwrap();
        let push = static_push(model, 0.0);
        let zero = vec![[Vec2::ZERO; LANDMARKS]; push.len()];
        assert!(intersegment_moments(&push, &zero).iter().all(|m| m.iter().all(|v| *v == 0.0)));

        let pts =
            [Vec2::new(0.0, 0.0), Vec2::new(0.2, 0.0), Vec2::new(0.2, 0.4), Vec2::new(0.2, 0.8), Vec2::new(0.2, 1.2)];
        let mut flat = static_push(model, 0.0);
        flat.landmarks = vec![still(pts); flat.len()];
        let mut r = [Vec2::ZERO; LANDMARKS];
        r[0] = Vec2::new(0.0, 300.0);
        r[1] = Vec2::new(0.0, 250.0);
        let m = intersegment_moments(&flat, &vec![r; flat.len()]);
        let a = model.alphas[0];
        assert!((m[0][0] - (-0.2 * (a * 300.0 + (1.0 - a) * 250.0))).abs() < 1e-12);
    }

    #[test]
    fn recursion_telescopes() {
        let model = BodyModel::new(&AnthropometricTable::winter(), 70.0).unwrap();
        let mut push = static_push(model, 12.0);
        for (i, row) in push.phi_ddot.iter_mut().enumerate() {
            *row = [0.1 * i as f64, -2.0, 3.5, 0.7];
        }
        let m = intersegment_moments(&push, &joint_forces(&push));
        let inert = [0.01, 0.06, 0.12, 4.0];
        let c = joint_torques(&push, &m, &inert);
        let direct = residual_torque(&push, &m, &inert, Degree::Zero);
        for (ci, d) in c.iter().zip(&direct) {
            assert!((ci[4] - d).abs() < 1e-9);
        }
    }

    #[test]
    fn integrated_residuals_start_at_zero() {
        let model = BodyModel::new(&AnthropometricTable::winter(), 70.0).unwrap();
        let mut push = static_push(model, 5.0);
        for (i, row) in push.phi_dot.iter_mut().enumerate() {
            *row = [0.3 + i as f64, 0.2, 0.1, -0.4];
        }
        let m = intersegment_moments(&push, &joint_forces(&push));
        for d in [Degree::One, Degree::Two] {
            assert_eq!(residual_torque(&push, &m, &[1.0; 4], d)[0], 0.0);
        }
    }

    #[test]
    fn degree_parsing() {
        assert_eq!(Degree::try_from(2).unwrap(), Degree::Two);
        assert!(matches!(Degree::try_from(3), Err(Error::Degree(3))));
    }

    #[test]
    fn epsilon_bounds() {
        let a = [1.0, -2.0, 3.0];
        assert_eq!(epsilon(&a, &a).unwrap(), 0.0);
        let b = a.map(|v| -v);
        assert!((epsilon(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(epsilon(&[0.0; 3], &[0.0; 3]), Err(Error::UndefinedMetric)));
    }

    proptest! {
        #[test]
        fn epsilon_in_unit_interval_and_scale_free(
            a in prop::collection::vec(-1e3..1e3f64, 1..40),
            b in prop::collection::vec(-1e3..1e3f64, 1..40),
            lambda in 1e-6..1e6f64,
        ) {
            let n = a.len().min(b.len());
            let (a, b) = (&a[..n], &b[..n]);
            prop_assume!(norm(a) + norm(b) > 0.0);
            let e = epsilon(a, b).unwrap();
            prop_assert!((0.0..=1.0).contains(&e));
            let sa: Vec<f64> = a.iter().map(|v| v * lambda).collect();
            let sb: Vec<f64> = b.iter().map(|v| v * lambda).collect();
            prop_assert!((epsilon(&sa, &sb).unwrap() - e).abs() < 1e-12);
        }
    }
}
