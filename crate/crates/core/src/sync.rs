//! Force/kinematics alignment and the trunk COM ratio.
//!
//! Force sample `i` (force-clock time `t_i`) is taken to describe the body
//! at camera-clock time `t_i + nu / rate`. Push-off events are expressed in
//! the force clock, so the force window is fixed and only the kinematic
//! read-out moves with `nu`.
//!
//! For a lag `nu` and trunk ratio `alpha4` the residual of the doubly
//! integrated vertical momentum balance is
//!
//! ```text
//! Ry_res(t_i) = D_i - m (y_G(t_i + nu dt) - y_G(t_0 + nu dt))
//! D_i         = int_{t_0}^{t_i} int_{t_0}^{u} (R_y - m g) ds du
//! ```
//!
//! and `y_G = P + alpha4 Q` where `P` is the body COM height with the trunk
//! COM placed at the hip and `Q` the extra height per unit `alpha4`. The
//! residual is therefore affine in `alpha4` and its squared norm is a
//! quadratic per lag, which makes the `(nu, alpha4)` scan cheap.

use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::lls::{lls_solve, norm, Matrix};
use crate::model::{BodyModel, GRAVITY, LANDMARKS};
use crate::optim::golden_section_minimize;
use crate::quad::cumulative_double_trapezoid;
use crate::spline::{SmoothedKinematics, SmoothingSpline};

/// Lags scanned by default, in force samples.
pub const LAG_RANGE: RangeInclusive<i64> = -500..=500;
pub const ALPHA_GRID_POINTS: usize = 201;
pub const ALPHA_TOLERANCE: f64 = 1e-4;
/// Force below which the feet are off the plate (N).
pub const TAKEOFF_THRESHOLD: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ForceRecord {
    pub start: f64,
    pub rate: f64,
    pub rx: Vec<f64>,
    pub ry: Vec<f64>,
    /// Ground reaction torque about the toe landmark (N m).
    pub c: Vec<f64>,
}

impl ForceRecord {
    pub fn new(start: f64, rate: f64, rx: Vec<f64>, ry: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if !(rate > 0.0) || !start.is_finite() {
            return Err(Error::Input(format!("invalid force time base: start {start}, rate {rate}")));
        }
        if rx.len() != ry.len() || ry.len() != c.len() {
            return Err(Error::Input("force channels differ in length".into()));
        }
        if ry.len() < 2 {
            return Err(Error::Input("force record needs at least 2 samples".into()));
        }
        if let Some(i) =
            rx.iter().zip(&ry).zip(&c).position(|((a, b), c)| !(a.is_finite() && b.is_finite() && c.is_finite()))
        {
            return Err(Error::Input(format!("non-finite force sample {i}")));
        }
        Ok(ForceRecord { start, rate, rx, ry, c })
    }

    pub fn len(&self) -> usize {
        self.ry.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ry.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.rate
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start + i as f64 / self.rate
    }
}

/// Push-off onset and take-off, force clock (s).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Events {
    pub t0: f64,
    pub tf: f64,
}

/// Force-sample indices `first..=last` covering `[t0, tf]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PushOffWindow {
    pub first: usize,
    pub last: usize,
}

impl PushOffWindow {
    /// `first` is the sample nearest `t0`; `last` the final sample at or
    /// before `tf`.
    pub fn new(force: &ForceRecord, events: Events) -> Result<Self> {
        if !(events.tf > events.t0) {
            return Err(Error::Range(format!("take-off {} not after onset {}", events.tf, events.t0)));
        }
        let first = ((events.t0 - force.start) * force.rate).round();
        let last = ((events.tf - force.start) * force.rate + 1e-9).floor();
        let end = force.time(force.len() - 1);
        if first < 0.0 || last >= force.len() as f64 {
            return Err(Error::Range(format!(
                "push-off [{}, {}] s exceeds the force record [{}, {}] s",
                events.t0, events.tf, force.start, end
            )));
        }
        let (first, last) = (first as usize, last as usize);
        if last <= first {
            return Err(Error::Range("push-off window holds a single sample".into()));
        }
        Ok(PushOffWindow { first, last })
    }

    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn indices(&self) -> RangeInclusive<usize> {
        self.first..=self.last
    }

    /// Force-clock times of the window samples.
    pub fn times(&self, force: &ForceRecord) -> Vec<f64> {
        self.indices().map(|i| force.time(i)).collect()
    }

    /// Camera-clock times of the window samples under lag `nu`.
    pub fn marker_times(&self, force: &ForceRecord, nu: i64) -> Vec<f64> {
        self.indices().map(|i| force.start + (i as i64 + nu) as f64 / force.rate).collect()
    }
}

/// Cutoff-equivalent smoothing for onset detection on a 1 kHz record.
const ONSET_SMOOTHING: f64 = 1.0 - 4e-6;
/// Quiet-standing period used as derivative noise reference (samples).
const ONSET_REFERENCE: usize = 200;
const ONSET_SUSTAIN: usize = 20;
/// Derivative threshold floor (N/s).
const ONSET_FLOOR: f64 = 1.0;

/// Onset: first sample where the smoothed `|dR_y/dt|` exceeds
/// `max(5 * rms over the first 200 ms, 1 N/s)` for 20 consecutive samples.
/// Take-off: first later sample with `R_y < 5 N`.
pub fn detect_events(force: &ForceRecord) -> Result<Events> {
    let n = force.len();
    if n < ONSET_REFERENCE + ONSET_SUSTAIN + 1 {
        return Err(Error::Input(format!("force record too short for event detection ({n} samples)")));
    }
    let times: Vec<f64> = (0..n).map(|i| force.time(i)).collect();
    let spline = SmoothingSpline::fit(&times, &force.ry, ONSET_SMOOTHING)?;
    let slope: Vec<f64> = times.iter().map(|&t| spline.eval(t, 1)).collect::<Result<_>>()?;
    let rms = (slope[..ONSET_REFERENCE].iter().map(|d| d * d).sum::<f64>() / ONSET_REFERENCE as f64).sqrt();
    let threshold = (5.0 * rms).max(ONSET_FLOOR);
    let mut run = 0;
    let mut onset = None;
    for (i, d) in slope.iter().enumerate().skip(ONSET_REFERENCE) {
        if d.abs() > threshold {
            run += 1;
            if run == ONSET_SUSTAIN {
                onset = Some(i + 1 - ONSET_SUSTAIN);
                break;
            }
        } else {
            run = 0;
        }
    }
    let first = onset.ok_or_else(|| Error::Input("no push-off onset found in R_y".into()))?;
    let take_off = (first..n)
        .find(|&i| force.ry[i] < TAKEOFF_THRESHOLD)
        .ok_or_else(|| Error::Input("no take-off (R_y < 5 N) found; supply events explicitly".into()))?;
    Ok(Events { t0: force.time(first), tf: force.time(take_off) })
}

/// `D_i`: double integral of `R_y - m g` from the window start.
pub fn double_integrated_excess_force(force: &ForceRecord, window: PushOffWindow, mass: f64) -> Vec<f64> {
    let excess: Vec<f64> = force.ry[window.indices()].iter().map(|r| r - mass * GRAVITY).collect();
    cumulative_double_trapezoid(&excess, force.dt())
}

/// Vertical double-integral residual over the window for a given COM height
/// read-out `y_com` (camera clock).
pub fn residual_double_integral(
    force: &ForceRecord,
    window: PushOffWindow,
    mass: f64,
    nu: i64,
    y_com: impl Fn(f64) -> Result<f64>,
) -> Result<Vec<f64>> {
    let d = double_integrated_excess_force(force, window, mass);
    let times = window.marker_times(force, nu);
    let y0 = y_com(times[0]).map_err(|e| lag_range(nu, e))?;
    times.iter().zip(&d).map(|(&t, di)| Ok(di - mass * (y_com(t).map_err(|e| lag_range(nu, e))? - y0))).collect()
}

fn lag_range(nu: i64, e: Error) -> Error {
    match e {
        Error::OutOfDomain { t, start, end } => Error::Range(format!(
            "lag {nu} moves the window to t = {t} s, outside the marker record [{start}, {end}] s"
        )),
        other => other,
    }
}

/// COM height split `y_G = P + alpha4 Q` sampled on the force grid for every
/// candidate lag, with the per-lag quadratic `||res||^2 = a alpha^2 + b alpha + c`.
#[derive(Debug, Clone)]
pub struct LagScan {
    mass: f64,
    lags: Vec<i64>,
    quad: Vec<[f64; 3]>,
    d: Vec<f64>,
    /// `P` and `Q` at offset `k - k_min` from the window start.
    p: Vec<f64>,
    q: Vec<f64>,
    k_min: i64,
}

impl LagScan {
    /// Lags whose shifted window leaves the spline domain are skipped.
    pub fn new(
        kin: &SmoothedKinematics,
        force: &ForceRecord,
        window: PushOffWindow,
        model: &BodyModel,
        lags: RangeInclusive<i64>,
    ) -> Result<Self> {
        let (lo, hi) = (*lags.start(), *lags.end());
        let n = window.len() as i64;
        let w0 = model.with_trunk_alpha(0.0).com_weights();
        let w1 = model.with_trunk_alpha(1.0).com_weights();
        let (dom_lo, dom_hi) = kin.domain();
        let k_min = lo;
        let k_max = hi + n - 1;
        let mut p = Vec::with_capacity((k_max - k_min + 1) as usize);
        let mut q = Vec::with_capacity(p.capacity());
        for k in k_min..=k_max {
            let t = force.start + (window.first as i64 + k) as f64 / force.rate;
            if t < dom_lo - 1e-9 || t > dom_hi + 1e-9 {
                p.push(f64::NAN);
                q.push(f64::NAN);
                continue;
            }
            let mut y = [0.0; LANDMARKS];
            for (j, yj) in y.iter_mut().enumerate() {
                *yj = kin.position(j, t)?.y;
            }
            let (mut pv, mut qv) = (0.0, 0.0);
            for j in 0..LANDMARKS {
                pv += w0[j] * y[j];
                qv += (w1[j] - w0[j]) * y[j];
            }
            p.push(pv);
            q.push(qv);
        }
        let d = double_integrated_excess_force(force, window, model.total_mass);
        let m = model.total_mass;
        let mut scan = LagScan { mass: m, lags: Vec::new(), quad: Vec::new(), d, p, q, k_min };
        for nu in lo..=hi {
            let base = (nu - k_min) as usize;
            let seg = base..base + n as usize;
            if scan.p[seg.clone()].iter().any(|v| v.is_nan()) {
                continue;
            }
            let (p0, q0) = (scan.p[base], scan.q[base]);
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for (di, k) in scan.d.iter().zip(seg) {
                let u = di - m * (scan.p[k] - p0);
                let w = -m * (scan.q[k] - q0);
                a += w * w;
                b += 2.0 * u * w;
                c += u * u;
            }
            scan.lags.push(nu);
            scan.quad.push([a, b, c]);
        }
        if scan.lags.is_empty() {
            return Err(Error::Range(format!(
                "no lag in [{lo}, {hi}] keeps the push-off window inside the marker record"
            )));
        }
        Ok(scan)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Lags that were evaluable.
    pub fn lags(&self) -> &[i64] {
        &self.lags
    }

    pub fn window_len(&self) -> usize {
        self.d.len()
    }

    fn offset(&self, nu: i64) -> Result<usize> {
        if !self.lags.contains(&nu) {
            return Err(Error::Range(format!("lag {nu} was not scanned or leaves the marker record")));
        }
        Ok((nu - self.k_min) as usize)
    }

    /// Affine parts `(u, w)` of the residual `u + alpha4 w` at lag `nu`.
    pub fn affine_parts(&self, nu: i64) -> Result<(Vec<f64>, Vec<f64>)> {
        let base = self.offset(nu)?;
        let (p0, q0) = (self.p[base], self.q[base]);
        Ok(self
            .d
            .iter()
            .enumerate()
            .map(|(i, di)| {
                let k = base + i;
                (di - self.mass * (self.p[k] - p0), -self.mass * (self.q[k] - q0))
            })
            .unzip())
    }

    pub fn residual(&self, nu: i64, alpha4: f64) -> Result<Vec<f64>> {
        let (u, w) = self.affine_parts(nu)?;
        Ok(u.iter().zip(&w).map(|(u, w)| u + alpha4 * w).collect())
    }

    /// Kinematic COM height over the window at lag `nu`.
    pub fn com_height(&self, nu: i64, alpha4: f64) -> Option<Vec<f64>> {
        let base = nu - self.k_min;
        (0..self.d.len() as i64)
            .map(|i| {
                let k = base + i;
                if k < 0 || k as usize >= self.p.len() {
                    return None;
                }
                let v = self.p[k as usize] + alpha4 * self.q[k as usize];
                v.is_finite().then_some(v)
            })
            .collect()
    }

    /// `(eta, nu)`: smallest residual norm over the scanned lags. Ties go to
    /// the smaller `|nu|`.
    pub fn eta(&self, alpha4: f64) -> (f64, i64) {
        let mut best = (f64::INFINITY, 0i64);
        let mut found = false;
        for (&nu, [a, b, c]) in self.lags.iter().zip(&self.quad) {
            let v = (a * alpha4 * alpha4 + b * alpha4 + c).max(0.0).sqrt();
            if !v.is_finite() {
                continue;
            }
            let better = v < best.0 || (v == best.0 && nu.abs() < best.1.abs());
            if !found || better {
                best = (v, nu);
                found = true;
            }
        }
        if found {
            best
        } else {
            (f64::NAN, 0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EtaPoint {
    pub alpha4: f64,
    pub eta: f64,
    pub nu: i64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SyncResult {
    pub nu: i64,
    pub alpha4: f64,
    /// Residual norm at `(nu, alpha4)` (N m s^2).
    pub eta: f64,
    pub curve: Vec<EtaPoint>,
}

/// Global minimizer of `eta` over `alpha4` in `[0, 1]`: a 201-point grid,
/// then golden-section refinement around the best grid point.
pub fn synchronize(scan: &LagScan) -> Result<SyncResult> {
    let curve: Vec<EtaPoint> = (0..ALPHA_GRID_POINTS)
        .map(|k| {
            let alpha4 = k as f64 / (ALPHA_GRID_POINTS - 1) as f64;
            let (eta, nu) = scan.eta(alpha4);
            EtaPoint { alpha4, eta, nu }
        })
        .collect();
    let best = curve
        .iter()
        .filter(|p| p.eta.is_finite())
        .min_by(|a, b| a.eta.total_cmp(&b.eta))
        .ok_or_else(|| Error::Synchronization("eta is non-finite on the whole alpha4 grid".into()))?;
    let step = 1.0 / (ALPHA_GRID_POINTS - 1) as f64;
    let (lo, hi) = ((best.alpha4 - step).max(0.0), (best.alpha4 + step).min(1.0));
    let (alpha_ref, eta_ref) = golden_section_minimize(
        |a| {
            let e = scan.eta(a).0;
            if e.is_finite() {
                e
            } else {
                f64::INFINITY
            }
        },
        lo,
        hi,
        ALPHA_TOLERANCE,
    );
    let alpha4 = if eta_ref <= best.eta { alpha_ref } else { best.alpha4 };
    let nu = scan.eta(alpha4).1;
    let eta = norm(&scan.residual(nu, alpha4)?);
    Ok(SyncResult { nu, alpha4, eta, curve })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alpha4Fit {
    pub alpha4: f64,
    /// The unconstrained solution fell outside `[0, 1]`.
    pub clamped: bool,
    pub unclamped: f64,
}

/// One-unknown least squares `w alpha4 = -u` at fixed lag.
pub fn alpha4_least_squares(scan: &LagScan, nu: i64) -> Result<Alpha4Fit> {
    let (u, w) = scan.affine_parts(nu)?;
    let rms = norm(&w) / (scan.mass * (w.len() as f64).sqrt());
    if !(rms > 1e-12) {
        return Err(Error::Degenerate("trunk COM does not move over the push-off; alpha4 is not identifiable".into()));
    }
    let target: Vec<f64> = u.iter().map(|v| -v).collect();
    let x = lls_solve(&Matrix::column(&w), &target)?[0];
    let alpha4 = x.clamp(0.0, 1.0);
    Ok(Alpha4Fit { alpha4, clamped: alpha4 != x, unclamped: x })
}

/// COM height over the window: from the force record anchored at the
/// synchronized kinematic start height, from synchronized kinematics, and
/// from kinematics read without the lag (`NaN` where unavailable).
#[derive(Debug, Clone, PartialEq)]
pub struct ComHeights {
    pub t: Vec<f64>,
    pub from_force: Vec<f64>,
    pub synchronized: Vec<f64>,
    pub unsynchronized: Vec<f64>,
}

pub fn ycom_three_ways(
    scan: &LagScan,
    force: &ForceRecord,
    window: PushOffWindow,
    sync: &SyncResult,
) -> Result<ComHeights> {
    let synchronized = scan
        .com_height(sync.nu, sync.alpha4)
        .ok_or_else(|| Error::Range(format!("lag {} leaves the marker record", sync.nu)))?;
    let n = synchronized.len();
    let unsynchronized = scan.com_height(0, sync.alpha4).unwrap_or_else(|| {
        let base = -scan.k_min;
        (0..n as i64)
            .map(|i| {
                let k = base + i;
                if k < 0 || k as usize >= scan.p.len() {
                    f64::NAN
                } else {
                    scan.p[k as usize] + sync.alpha4 * scan.q[k as usize]
                }
            })
            .collect()
    });
    let y0 = synchronized[0];
    let from_force = scan.d.iter().map(|d| y0 + d / scan.mass).collect();
    Ok(ComHeights { t: window.times(force), from_force, synchronized, unsynchronized })
}

/// Residual ground reaction `R + m g - m a_G` over the window (x, y).
pub fn residual_force(
    kin: &SmoothedKinematics,
    force: &ForceRecord,
    window: PushOffWindow,
    model: &BodyModel,
    nu: i64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let w = model.com_weights();
    let m = model.total_mass;
    let times = window.marker_times(force, nu);
    let mut rx = Vec::with_capacity(times.len());
    let mut ry = Vec::with_capacity(times.len());
    for (i, &t) in window.indices().zip(&times) {
        let (mut ax, mut ay) = (0.0, 0.0);
        for (j, wj) in w.iter().enumerate() {
            let s = kin.state(j, t).map_err(|e| lag_range(nu, e))?;
            ax += wj * s.acc.x;
            ay += wj * s.acc.y;
        }
        rx.push(force.rx[i] - m * ax);
        ry.push(force.ry[i] - m * GRAVITY - m * ay);
    }
    Ok((rx, ry))
}

/// `||R_res_x|| + ||R_res_y||`.
pub fn residual_force_norm(
    kin: &SmoothedKinematics,
    force: &ForceRecord,
    window: PushOffWindow,
    model: &BodyModel,
    nu: i64,
) -> Result<f64> {
    let (rx, ry) = residual_force(kin, force, window, model, nu)?;
    Ok(norm(&rx) + norm(&ry))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec2;
    use crate::model::{AnthropometricTable, MarkerRecord};

    fn constant_force(n: usize, ry: f64) -> ForceRecord {
        ForceRecord::new(0.0, 1000.0, vec![0.0; n], vec![ry; n], vec![0.0; n]).unwrap()
    }

    #[test]
    fn window_indices() {
        let f = constant_force(1001, 700.0);
        let w = PushOffWindow::new(&f, Events { t0: 0.2004, tf: 0.55 }).unwrap();
        assert_eq!((w.first, w.last), (200, 550));
        let w = PushOffWindow::new(&f, Events { t0: 0.2, tf: 0.5509 }).unwrap();
        assert_eq!(w.last, 550);
        assert!(matches!(PushOffWindow::new(&f, Events { t0: 0.5, tf: 1.2 }), Err(Error::Range(_))));
        assert!(PushOffWindow::new(&f, Events { t0: 0.5, tf: 0.4 }).is_err());
    }

    #[test]
    fn static_standing_has_zero_residual() {
        let m = 70.0;
        let f = constant_force(1001, m * GRAVITY);
        let w = PushOffWindow::new(&f, Events { t0: 0.2, tf: 0.55 }).unwrap();
        let r = residual_double_integral(&f, w, m, 0, |_| Ok(0.93)).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn constant_acceleration_has_zero_residual() {
        let (m, a) = (70.0, 3.0);
        let f = constant_force(1001, m * (GRAVITY + a));
        let w = PushOffWindow::new(&f, Events { t0: 0.2, tf: 0.55 }).unwrap();
        let r = residual_double_integral(&f, w, m, 0, |t| Ok(0.5 * a * (t - 0.2) * (t - 0.2))).unwrap();
        let tol = 1e-6 * m * GRAVITY * 0.35 * 0.35;
        assert!(r.iter().all(|v| v.abs() < tol));
    }

    #[test]
    fn force_offset_adds_parabola() {
        let m = 60.0;
        let n = 1001;
        let ry: Vec<f64> = (0..n).map(|i| 600.0 + 50.0 * (i as f64 * 0.01).sin()).collect();
        let f0 = ForceRecord::new(0.0, 1000.0, vec![0.0; n], ry.clone(), vec![0.0; n]).unwrap();
        let delta = 12.5;
        let f1 =
            ForceRecord::new(0.0, 1000.0, vec![0.0; n], ry.iter().map(|v| v + delta).collect(), vec![0.0; n]).unwrap();
        let w = PushOffWindow::new(&f0, Events { t0: 0.1, tf: 0.6 }).unwrap();
        let y = |t: f64| Ok(t.cos());
        let r0 = residual_double_integral(&f0, w, m, 3, y).unwrap();
        let r1 = residual_double_integral(&f1, w, m, 3, y).unwrap();
        for (i, (a, b)) in r0.iter().zip(&r1).enumerate() {
            let t = i as f64 * 1e-3;
            assert!((b - a - 0.5 * delta * t * t).abs() < 1e-9);
        }
    }

    /// Trunk rises linearly, everything else fixed; the force record holds
    /// weight plus the trunk's share of momentum change (zero here), shifted.
    fn moving_trunk_trial() -> (MarkerRecord, ForceRecord, BodyModel) {
        let frames: Vec<[Vec2; 5]> = (0..101)
            .map(|i| {
                let t = i as f64 * 0.01;
                let s = (t * 2.0).sin() * 0.1;
                [
                    Vec2::new(0.0, 0.0),
                    Vec2::new(-0.14, 0.05),
                    Vec2::new(0.0, 0.45),
                    Vec2::new(-0.1, 0.85 + 0.5 * s),
                    Vec2::new(0.0, 1.4 + s),
                ]
            })
            .collect();
        let markers = MarkerRecord::new(0.0, 100.0, frames).unwrap();
        let model = BodyModel::new(&AnthropometricTable::winter(), 70.0).unwrap().with_trunk_alpha(0.4);
        let n = 1001;
        let force = constant_force(n, 70.0 * GRAVITY);
        (markers, force, model)
    }

    #[test]
    fn residual_is_affine_in_alpha() {
        let (markers, force, model) = moving_trunk_trial();
        let kin = SmoothedKinematics::fit(&markers, [1.0; 5]).unwrap();
        let w = PushOffWindow::new(&force, Events { t0: 0.3, tf: 0.65 }).unwrap();
        let scan = LagScan::new(&kin, &force, w, &model, -50..=50).unwrap();
        let r0 = scan.residual(7, 0.0).unwrap();
        let r1 = scan.residual(7, 1.0).unwrap();
        let r3 = scan.residual(7, 0.3).unwrap();
        for i in 0..r0.len() {
            assert!((r3[i] - (0.7 * r0[i] + 0.3 * r1[i])).abs() < 1e-10);
        }
        let (e, _) = scan.eta(0.3);
        let direct = scan.lags().iter().map(|&nu| norm(&scan.residual(nu, 0.3).unwrap())).fold(f64::INFINITY, f64::min);
        assert!((e - direct).abs() < 1e-6 * (1.0 + direct));
    }

    #[test]
    fn scan_matches_direct_residual() {
        let (markers, force, model) = moving_trunk_trial();
        let kin = SmoothedKinematics::fit(&markers, [1.0; 5]).unwrap();
        let w = PushOffWindow::new(&force, Events { t0: 0.3, tf: 0.65 }).unwrap();
        let scan = LagScan::new(&kin, &force, w, &model, -20..=20).unwrap();
        let direct = residual_double_integral(&force, w, model.total_mass, -13, |t| {
            let mut lm = [Vec2::ZERO; 5];
            for (j, p) in lm.iter_mut().enumerate() {
                *p = kin.position(j, t)?;
            }
            Ok(model.com(&lm).y)
        })
        .unwrap();
        let fast = scan.residual(-13, 0.4).unwrap();
        for (a, b) in direct.iter().zip(&fast) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn out_of_record_lags_are_skipped() {
        let (markers, force, model) = moving_trunk_trial();
        let kin = SmoothedKinematics::fit(&markers, [1.0; 5]).unwrap();
        let w = PushOffWindow::new(&force, Events { t0: 0.3, tf: 0.65 }).unwrap();
        let scan = LagScan::new(&kin, &force, w, &model, -500..=500).unwrap();
        assert_eq!(*scan.lags().first().unwrap(), -300);
        assert_eq!(*scan.lags().last().unwrap(), 350);
        assert!(scan.residual(400, 0.5).is_err());
        let err = residual_double_integral(&force, w, 70.0, 400, |t| Ok(kin.position(0, t)?.y)).unwrap_err();
        assert!(matches!(err, Error::Range(_)));
    }

    #[test]
    fn motionless_trunk_is_degenerate() {
        let frames = vec![
            [
                Vec2::new(0.0, 0.0),
                Vec2::new(-0.1, 0.05),
                Vec2::new(0.0, 0.45),
                Vec2::new(-0.1, 0.85),
                Vec2::new(0.0, 1.4)
            ];
            60
        ];
        let markers = MarkerRecord::new(0.0, 100.0, frames).unwrap();
        let kin = SmoothedKinematics::fit(&markers, [1.0; 5]).unwrap();
        let force = constant_force(601, 686.7);
        let model = BodyModel::new(&AnthropometricTable::winter(), 70.0).unwrap();
        let w = PushOffWindow::new(&force, Events { t0: 0.1, tf: 0.45 }).unwrap();
        let scan = LagScan::new(&kin, &force, w, &model, -10..=10).unwrap();
        assert!(matches!(alpha4_least_squares(&scan, 0), Err(Error::Degenerate(_))));
        let sync = synchronize(&scan).unwrap();
        let three = ycom_three_ways(&scan, &force, w, &sync).unwrap();
        for i in 0..three.t.len() {
            assert!((three.from_force[i] - three.synchronized[i]).abs() < 1e-9);
            assert!((three.unsynchronized[i] - three.synchronized[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn onset_and_takeoff_detection() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 2.0).unwrap();
        let n = 2001;
        let ry: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 * 1e-3;
                let clean = if t < 0.8 {
                    700.0
                } else if t < 1.1 {
                    let s = (t - 0.8) / 0.3;
                    700.0 + 800.0 * (std::f64::consts::PI * s).sin().powi(2)
                } else if t < 1.15 {
                    700.0 * (1.15 - t) / 0.05
                } else {
                    0.0
                };
                (clean + noise.sample(&mut rng)).max(0.0)
            })
            .collect();
        let f = ForceRecord::new(0.0, 1000.0, vec![0.0; n], ry, vec![0.0; n]).unwrap();
        let ev = detect_events(&f).unwrap();
        assert!((ev.t0 - 0.8).abs() < 0.03, "t0 = {}", ev.t0);
        assert!(ev.tf > 1.14 && ev.tf <= 1.15, "tf = {}", ev.tf);
        let flat = constant_force(n, 700.0);
        assert!(detect_events(&flat).is_err());
    }
}
