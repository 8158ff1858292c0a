//! Synthetic squat jumps with known ground truth.
//!
//! The toe `A_1` stays at the origin. Each joint angle follows a rest-to-rest
//! quintic `theta_j(t) = theta_j0 + delta_j s^3 (10 - 15 s + 6 s^2)` with
//! `s = (t - onset_j) / duration_j` clamped to `[0, 1]`, so positions,
//! velocities and accelerations are continuous and every angular velocity
//! is zero at push-off onset. Landmark states follow analytically from the
//! segment orientations `phi_j = sum_{k<=j} theta_k`.
//!
//! The plate channels are computed from momentum balance of the whole
//! chain, independently of the joint recursion:
//!
//! ```text
//! R = sum_j m_j (a_Gj - g)
//! C = sum_j [ G_j x m_j (a_Gj - g) + I_j phi''_j ]      (about A_1)
//! ```
//!
//! [`closure_check`] then runs the inverse dynamics on these exact signals,
//! which pins the sign conventions of both sides.
//!
//! Force sample `i` describes the body at camera time `(i + nu) / f'`, and
//! the events are reported in the force clock. Noise is drawn from
//! `ChaCha8Rng` seeded with the scenario seed: all marker coordinates first
//! (frame by frame, `x` before `y`), then `R_x`, `R_y`, `C` per force sample.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::invdyn::{intersegment_moments, joint_forces, residual_torque, Degree, PushOff};
use crate::model::{
    inertia_from_gyration, AnthropometricTable, BodyModel, MarkerRecord, SegmentParams, GRAVITY, LANDMARKS,
    MIN_SEGMENT_LENGTH, SEGMENTS,
};
use crate::pipeline::Trial;
use crate::spline::LandmarkState;
use crate::sync::{Events, ForceRecord, LAG_RANGE};

/// Push-off duration of the generated motion (s).
pub const PUSH_OFF: f64 = 0.35;

/// Joint-angle profiles, relative to the push-off onset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Motion {
    /// Segment orientations from the horizontal at rest (deg).
    pub initial_deg: [f64; SEGMENTS],
    /// Joint-angle excursions (deg).
    pub delta_deg: [f64; SEGMENTS],
    /// Start of each joint's movement after push-off onset (s).
    pub onset: [f64; SEGMENTS],
    pub duration: [f64; SEGMENTS],
}

impl Default for Motion {
    fn default() -> Self {
        Motion {
            initial_deg: [150.0, 55.0, 165.0, 45.0],
            delta_deg: [-16.0, 33.0, -55.0, 60.0],
            onset: [0.10, 0.05, 0.02, 0.0],
            duration: [0.25, 0.30, 0.33, 0.35],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    /// Total body mass (kg).
    pub mass: f64,
    /// Foot, shank, thigh, trunk lengths (m).
    pub lengths: [f64; SEGMENTS],
    /// Segment table; the trunk row's `alpha` and `gyration_ratio` are
    /// replaced by `alpha4` and `r4_tilde`.
    pub table: AnthropometricTable,
    pub alpha4: f64,
    pub r4_tilde: f64,
    /// Injected lag (force samples).
    pub nu: i64,
    /// Marker noise sd (m), all coordinates.
    pub sigma_marker: f64,
    /// Force noise sd (N), both components.
    pub sigma_force: f64,
    /// Torque noise sd (N m).
    pub sigma_torque: f64,
    /// Camera-clock time of push-off onset (s).
    pub onset: f64,
    /// Record length (s).
    pub duration: f64,
    pub marker_rate: f64,
    pub force_rate: f64,
    pub motion: Motion,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            seed: 0,
            mass: 70.0,
            lengths: [0.14, 0.43, 0.43, 0.55],
            table: AnthropometricTable::winter(),
            alpha4: 0.45,
            r4_tilde: 0.55,
            nu: 0,
            sigma_marker: 0.0,
            sigma_force: 0.0,
            sigma_torque: 0.2,
            onset: 1.0,
            duration: 2.5,
            marker_rate: 100.0,
            force_rate: 1000.0,
            motion: Motion::default(),
        }
    }
}

impl Scenario {
    pub fn noiseless(mut self) -> Self {
        self.sigma_marker = 0.0;
        self.sigma_force = 0.0;
        self.sigma_torque = 0.0;
        self
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(s).map_err(|e| Error::Scenario(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Table used to generate the data.
    pub fn true_table(&self) -> Result<AnthropometricTable> {
        let mut segs = *self.table.segments();
        let t = segs[3];
        segs[3] = SegmentParams::new(self.alpha4, t.mass_fraction, self.r4_tilde);
        AnthropometricTable::new(segs).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scenario(m));
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return bad(format!("mass {} must be positive", self.mass));
        }
        if let Some(l) = self.lengths.iter().find(|l| !(**l > MIN_SEGMENT_LENGTH)) {
            return bad(format!("segment length {l} too small"));
        }
        if !(0.0..=1.0).contains(&self.alpha4) {
            return bad(format!("alpha4 {} outside [0, 1]", self.alpha4));
        }
        if !(self.r4_tilde > 0.0 && self.r4_tilde <= 1.0) {
            return bad(format!("r4_tilde {} outside (0, 1]", self.r4_tilde));
        }
        if !LAG_RANGE.contains(&self.nu) {
            return bad(format!("lag {} outside the scanned range", self.nu));
        }
        for (name, s) in [
            ("sigma_marker", self.sigma_marker),
            ("sigma_force", self.sigma_force),
            ("sigma_torque", self.sigma_torque),
        ] {
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!("{name} {s} must be non-negative"));
            }
        }
        if !(self.marker_rate > 0.0 && self.force_rate > 0.0) {
            return bad("sampling rates must be positive".into());
        }
        for j in 0..SEGMENTS {
            let (o, d) = (self.motion.onset[j], self.motion.duration[j]);
            if !(o >= 0.0 && d > 0.0 && o + d <= PUSH_OFF + 1e-12) {
                return bad(format!("joint {} profile [{o}, {o} + {d}] leaves the push-off", j + 1));
            }
        }
        let t0 = self.onset - self.nu as f64 / self.force_rate;
        if t0 < 0.0 || t0 + PUSH_OFF > self.duration {
            return bad(format!("push-off [{t0}, {}] s outside the record", t0 + PUSH_OFF));
        }
        self.true_table()?;
        let truth = Truth::new(self)?;
        let steps = 70;
        for k in 0..=steps {
            let s = truth.state(self.onset + PUSH_OFF * k as f64 / steps as f64);
            if let Some(j) = (1..LANDMARKS).find(|&j| s.landmarks[j].pos.y <= 0.0) {
                return bad(format!("landmark {} goes below the ground", j + 1));
            }
        }
        Ok(())
    }
}

/// Exact state of the chain at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainState {
    pub landmarks: [LandmarkState; LANDMARKS],
    pub phi: [f64; SEGMENTS],
    pub phi_dot: [f64; SEGMENTS],
    pub phi_ddot: [f64; SEGMENTS],
}

/// Ground truth of a scenario; evaluates every signal analytically in the
/// camera clock.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub scenario: Scenario,
    pub table: AnthropometricTable,
    pub model: BodyModel,
    pub inertias: [f64; SEGMENTS],
    pub alpha4: f64,
    pub nu: i64,
    /// Force-clock events.
    pub events: Events,
}

impl Truth {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        let table = scenario.true_table()?;
        let model = BodyModel::new(&table, scenario.mass)?;
        let mut inertias = [0.0; SEGMENTS];
        for j in 0..SEGMENTS {
            inertias[j] =
                inertia_from_gyration(model.masses[j], scenario.lengths[j], table.segments()[j].gyration_ratio)?;
        }
        let t0 = scenario.onset - scenario.nu as f64 / scenario.force_rate;
        Ok(Truth {
            scenario: scenario.clone(),
            table,
            model,
            inertias,
            alpha4: scenario.alpha4,
            nu: scenario.nu,
            events: Events { t0, tf: t0 + PUSH_OFF },
        })
    }

    pub fn state(&self, t: f64) -> ChainState {
        let m = &self.scenario.motion;
        let mut th = [[0.0; 3]; SEGMENTS];
        for j in 0..SEGMENTS {
            let d = m.delta_deg[j].to_radians();
            let dur = m.duration[j];
            let s = ((t - self.scenario.onset - m.onset[j]) / dur).clamp(0.0, 1.0);
            let base = if j == 0 {
                m.initial_deg[0].to_radians()
            } else {
                (m.initial_deg[j] - m.initial_deg[j - 1]).to_radians()
            };
            th[j] = [
                base + d * s * s * s * (10.0 - 15.0 * s + 6.0 * s * s),
                d / dur * 30.0 * s * s * (1.0 - s) * (1.0 - s),
                d / (dur * dur) * 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s),
            ];
        }
        let mut phi = [0.0; SEGMENTS];
        let mut phi_dot = [0.0; SEGMENTS];
        let mut phi_ddot = [0.0; SEGMENTS];
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for j in 0..SEGMENTS {
            a += th[j][0];
            b += th[j][1];
            c += th[j][2];
            phi[j] = a;
            phi_dot[j] = b;
            phi_ddot[j] = c;
        }
        let mut lm = [LandmarkState::default(); LANDMARKS];
        for j in 0..SEGMENTS {
            let u = Vec2::from_angle(phi[j]);
            let n = u.perp();
            let l = self.scenario.lengths[j];
            lm[j + 1] = LandmarkState {
                pos: lm[j].pos + u * l,
                vel: lm[j].vel + n * (l * phi_dot[j]),
                acc: lm[j].acc + (n * phi_ddot[j] - u * (phi_dot[j] * phi_dot[j])) * l,
            };
        }
        ChainState { landmarks: lm, phi, phi_dot, phi_ddot }
    }

    /// Segment COM positions and accelerations.
    fn segment_coms(&self, s: &ChainState) -> [(Vec2, Vec2); SEGMENTS] {
        std::array::from_fn(|j| {
            let a = self.model.alphas[j];
            let (p, q) = (s.landmarks[j], s.landmarks[j + 1]);
            (p.pos * (1.0 - a) + q.pos * a, p.acc * (1.0 - a) + q.acc * a)
        })
    }

    /// Body COM position, velocity, acceleration.
    pub fn com(&self, t: f64) -> [Vec2; 3] {
        let s = self.state(t);
        let w = self.model.com_weights();
        let mut out = [Vec2::ZERO; 3];
        for (k, wk) in w.iter().enumerate() {
            out[0] += s.landmarks[k].pos * *wk;
            out[1] += s.landmarks[k].vel * *wk;
            out[2] += s.landmarks[k].acc * *wk;
        }
        out
    }

    /// Ground reaction force and its torque about the toe.
    pub fn plate(&self, t: f64) -> (Vec2, f64) {
        let s = self.state(t);
        let g = Vec2::new(0.0, -GRAVITY);
        let mut r = Vec2::ZERO;
        let mut c = 0.0;
        for (j, (pos, acc)) in self.segment_coms(&s).into_iter().enumerate() {
            let f = (acc - g) * self.model.masses[j];
            r += f;
            c += (pos - s.landmarks[0].pos).cross(f) + self.inertias[j] * s.phi_ddot[j];
        }
        (r, c)
    }

    pub fn peak_com_acceleration(&self) -> f64 {
        (0..=350).map(|k| self.com(self.scenario.onset + k as f64 * 1e-3)[2].norm()).fold(0.0, f64::max)
    }

    /// Exact push-off samples on a 1 ms grid, camera clock.
    pub fn exact_push_off(&self) -> Result<PushOff> {
        let n = (PUSH_OFF * 1000.0).round() as usize + 1;
        let times: Vec<f64> = (0..n).map(|k| self.scenario.onset + k as f64 * 1e-3).collect();
        let mut states = Vec::with_capacity(n);
        let (mut rx, mut ry, mut c) = (Vec::new(), Vec::new(), Vec::new());
        for &t in &times {
            states.push(self.state(t).landmarks);
            let (r, ct) = self.plate(t);
            rx.push(r.x);
            ry.push(r.y);
            c.push(ct);
        }
        PushOff::from_states(times, 1e-3, states, rx, ry, c, self.model)
    }
}

/// Largest residual force (N) and residual torque (N m) on the exact signals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Closure {
    pub force: f64,
    pub torque: f64,
}

pub fn closure_check(truth: &Truth) -> Result<Closure> {
    closure_check_with(truth, &truth.inertias)
}

/// As [`closure_check`] but scoring the torque balance with `inertias`.
pub fn closure_check_with(truth: &Truth, inertias: &[f64; SEGMENTS]) -> Result<Closure> {
    let push = truth.exact_push_off()?;
    let forces = joint_forces(&push);
    let moments = intersegment_moments(&push, &forces);
    let torque = residual_torque(&push, &moments, inertias, Degree::Zero);
    Ok(Closure {
        force: forces.iter().map(|r| r[4].norm()).fold(0.0, f64::max),
        torque: torque.iter().map(|v| v.abs()).fold(0.0, f64::max),
    })
}

/// Samples the scenario into a trial in the ingestion layout.
pub fn generate(scenario: &Scenario) -> Result<(Trial, Truth)> {
    scenario.validate()?;
    let truth = Truth::new(scenario)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let normal = |s: f64| Normal::new(0.0, s).map_err(|e| Error::Scenario(e.to_string()));
    let (nm, nf, nc) = (normal(scenario.sigma_marker)?, normal(scenario.sigma_force)?, normal(scenario.sigma_torque)?);

    let frames_n = (scenario.duration * scenario.marker_rate).round() as usize + 1;
    let mut frames = Vec::with_capacity(frames_n);
    for k in 0..frames_n {
        let s = truth.state(k as f64 / scenario.marker_rate);
        let mut f = [Vec2::ZERO; LANDMARKS];
        for (j, p) in f.iter_mut().enumerate() {
            let pos = s.landmarks[j].pos;
            let dx = nm.sample(&mut rng);
            let dy = nm.sample(&mut rng);
            *p = Vec2::new(pos.x + dx, pos.y + dy);
        }
        frames.push(f);
    }
    let markers = MarkerRecord::new(0.0, scenario.marker_rate, frames)?;

    let force_n = (scenario.duration * scenario.force_rate).round() as usize + 1;
    let (mut rx, mut ry, mut c) =
        (Vec::with_capacity(force_n), Vec::with_capacity(force_n), Vec::with_capacity(force_n));
    for i in 0..force_n {
        let t = (i as i64 + scenario.nu) as f64 / scenario.force_rate;
        let (r, ct) = truth.plate(t);
        rx.push(r.x + nf.sample(&mut rng));
        ry.push(r.y + nf.sample(&mut rng));
        c.push(ct + nc.sample(&mut rng));
    }
    let force = ForceRecord::new(0.0, scenario.force_rate, rx, ry, c)?;
    Ok((Trial { markers, force, events: Some(truth.events), mass: scenario.mass }, truth))
}
