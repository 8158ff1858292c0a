//! Cubic smoothing splines.
//!
//! [`SmoothingSpline::fit`] returns the natural cubic spline `F` minimizing
//!
//! ```text
//! s_p * sum_i (Y_i - F(X_i))^2 + (1 - s_p) * int F''(t)^2 dt
//! ```
//!
//! Writing `a` for the knot values and `g` for the interior second
//! derivatives, the first-derivative continuity conditions read
//! `Q^T a = R g` with `Q` tridiagonal (divided differences) and `R` the
//! Gram matrix of the hat functions, so the roughness is `g^T R g`. The
//! minimizer solves the pentadiagonal system
//!
//! ```text
//! (s_p R + (1 - s_p) Q^T Q) u = Q^T Y,    a = Y - (1 - s_p) Q u,    g = s_p u
//! ```
//!
//! which stays well posed at both ends of `[0, 1]`: `s_p = 1` interpolates
//! and `s_p = 0` leaves the least-squares line (`a` is the projection of
//! `Y` onto the null space of `Q^T`, the linear functions).

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::model::{MarkerRecord, LANDMARKS};

/// Slack allowed when evaluating at the end knots (s).
const DOMAIN_SLACK: f64 = 1e-9;

/// Smoothing used before the lag is known: close to interpolation.
pub const PROVISIONAL_SMOOTHING: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingSpline {
    knots: Vec<f64>,
    /// Per interval: value, slope, half curvature, cubic coefficient.
    coeffs: Vec<[f64; 4]>,
    /// Second derivative at every knot (zero at both ends).
    curvature: Vec<f64>,
    smoothing: f64,
}

impl SmoothingSpline {
    pub fn fit(xs: &[f64], ys: &[f64], smoothing: f64) -> Result<Self> {
        let n = xs.len();
        if ys.len() != n {
            return Err(Error::SplineInput(format!("{} abscissae but {} ordinates", n, ys.len())));
        }
        if n < 4 {
            return Err(Error::SplineInput(format!("need at least 4 samples, got {n}")));
        }
        if !(0.0..=1.0).contains(&smoothing) {
            return Err(Error::SmoothingRange(smoothing));
        }
        if let Some(i) = xs.iter().chain(ys).position(|v| !v.is_finite()) {
            return Err(Error::SplineInput(format!("non-finite sample at position {}", i % n)));
        }
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        if let Some(i) = h.iter().position(|&d| d <= 0.0) {
            return Err(Error::SplineInput(format!(
                "abscissae must be strictly increasing (x[{}] = {}, x[{}] = {})",
                i,
                xs[i],
                i + 1,
                xs[i + 1]
            )));
        }

        let p = smoothing;
        let m = n - 2;
        // Column k of Q touches rows k, k+1, k+2.
        let q = |k: usize| -> [f64; 3] {
            let (a, b) = (1.0 / h[k], 1.0 / h[k + 1]);
            [a, -(a + b), b]
        };
        let mut diag = vec![0.0; m];
        let mut off1 = vec![0.0; m.saturating_sub(1)];
        let mut off2 = vec![0.0; m.saturating_sub(2)];
        let mut rhs = vec![0.0; m];
        for k in 0..m {
            let qk = q(k);
            diag[k] = p * (h[k] + h[k + 1]) / 3.0 + (1.0 - p) * (qk[0] * qk[0] + qk[1] * qk[1] + qk[2] * qk[2]);
            rhs[k] = qk[0] * ys[k] + qk[1] * ys[k + 1] + qk[2] * ys[k + 2];
            if k + 1 < m {
                let qn = q(k + 1);
                off1[k] = p * h[k + 1] / 6.0 + (1.0 - p) * (qk[1] * qn[0] + qk[2] * qn[1]);
            }
            if k + 2 < m {
                let qn = q(k + 2);
                off2[k] = (1.0 - p) * qk[2] * qn[0];
            }
        }
        let u = solve_pentadiagonal(&diag, &off1, &off2, &rhs)?;

        let mut values = ys.to_vec();
        for (r, v) in values.iter_mut().enumerate() {
            let mut qu = 0.0;
            if r >= 2 {
                qu += q(r - 2)[2] * u[r - 2];
            }
            if r >= 1 && r - 1 < m {
                qu += q(r - 1)[1] * u[r - 1];
            }
            if r < m {
                qu += q(r)[0] * u[r];
            }
            *v -= (1.0 - p) * qu;
        }
        let mut curvature = vec![0.0; n];
        for k in 0..m {
            curvature[k + 1] = p * u[k];
        }

        let coeffs = (0..n - 1)
            .map(|i| {
                let (g0, g1) = (curvature[i], curvature[i + 1]);
                let slope = (values[i + 1] - values[i]) / h[i] - h[i] * (2.0 * g0 + g1) / 6.0;
                [values[i], slope, 0.5 * g0, (g1 - g0) / (6.0 * h[i])]
            })
            .collect();
        Ok(SmoothingSpline { knots: xs.to_vec(), coeffs, curvature, smoothing })
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let (start, end) = self.domain();
        if !(t >= start - DOMAIN_SLACK && t <= end + DOMAIN_SLACK) {
            return Err(Error::OutOfDomain { t, start, end });
        }
        let t = t.clamp(start, end);
        let i = self.knots.partition_point(|&x| x <= t).saturating_sub(1).min(self.coeffs.len() - 1);
        Ok((i, t - self.knots[i]))
    }

    /// Value (`order` 0) or derivative of order 1 or 2 at `t`.
    pub fn eval(&self, t: f64, order: usize) -> Result<f64> {
        let (i, d) = self.locate(t)?;
        let [a, b, c, e] = self.coeffs[i];
        match order {
            0 => Ok(a + d * (b + d * (c + d * e))),
            1 => Ok(b + d * (2.0 * c + 3.0 * d * e)),
            2 => Ok(2.0 * c + 6.0 * d * e),
            _ => Err(Error::Range(format!("derivative order {order} not in 0..=2"))),
        }
    }

    /// Value, first and second derivative at `t`.
    pub fn eval_all(&self, t: f64) -> Result<[f64; 3]> {
        let (i, d) = self.locate(t)?;
        let [a, b, c, e] = self.coeffs[i];
        Ok([a + d * (b + d * (c + d * e)), b + d * (2.0 * c + 3.0 * d * e), 2.0 * c + 6.0 * d * e])
    }

    /// `int F''(t)^2 dt` over the knot span.
    pub fn roughness(&self) -> f64 {
        self.knots
            .windows(2)
            .zip(self.curvature.windows(2))
            .map(|(x, g)| (x[1] - x[0]) / 3.0 * (g[0] * g[0] + g[0] * g[1] + g[1] * g[1]))
            .sum()
    }
}

/// Solves a symmetric positive definite pentadiagonal system by banded
/// Cholesky. `off1[i] = A[i][i+1]`, `off2[i] = A[i][i+2]`.
fn solve_pentadiagonal(diag: &[f64], off1: &[f64], off2: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut l0 = vec![0.0; n];
    let mut l1 = vec![0.0; n];
    let mut l2 = vec![0.0; n];
    for i in 0..n {
        if i >= 2 {
            l2[i] = off2[i - 2] / l0[i - 2];
        }
        if i >= 1 {
            l1[i] = (off1[i - 1] - l2[i] * l1[i - 1]) / l0[i - 1];
        }
        let d = diag[i] - l1[i] * l1[i] - l2[i] * l2[i];
        if !(d > 0.0) {
            return Err(Error::SplineInput("smoothing system is not positive definite".into()));
        }
        l0[i] = d.sqrt();
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = rhs[i];
        if i >= 1 {
            s -= l1[i] * z[i - 1];
        }
        if i >= 2 {
            s -= l2[i] * z[i - 2];
        }
        z[i] = s / l0[i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        if i + 1 < n {
            s -= l1[i + 1] * x[i + 1];
        }
        if i + 2 < n {
            s -= l2[i + 2] * x[i + 2];
        }
        x[i] = s / l0[i];
    }
    Ok(x)
}

/// Position, velocity and acceleration of one landmark.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LandmarkState {
    pub pos: Vec2,
    pub vel: Vec2,
    pub acc: Vec2,
}

/// One smoothing spline per landmark coordinate, on the camera time base.
#[derive(Debug, Clone)]
pub struct SmoothedKinematics {
    times: Vec<f64>,
    channels: Vec<[SmoothingSpline; 2]>,
    params: [f64; LANDMARKS],
}

impl SmoothedKinematics {
    pub fn fit(markers: &MarkerRecord, params: [f64; LANDMARKS]) -> Result<Self> {
        let times = markers.times();
        let channels =
            (0..LANDMARKS).map(|j| fit_landmark(&times, markers, j, params[j])).collect::<Result<Vec<_>>>()?;
        Ok(SmoothedKinematics { times, channels, params })
    }

    /// Replaces the fit of landmark `j` with smoothing `s_p`.
    pub fn refit(&mut self, markers: &MarkerRecord, j: usize, smoothing: f64) -> Result<()> {
        self.channels[j] = fit_landmark(&self.times, markers, j, smoothing)?;
        self.params[j] = smoothing;
        Ok(())
    }

    pub fn params(&self) -> [f64; LANDMARKS] {
        self.params
    }

    pub fn domain(&self) -> (f64, f64) {
        self.channels[0][0].domain()
    }

    pub fn spline(&self, j: usize, axis: usize) -> &SmoothingSpline {
        &self.channels[j][axis]
    }

    pub fn position(&self, j: usize, t: f64) -> Result<Vec2> {
        let [x, y] = &self.channels[j];
        Ok(Vec2::new(x.eval(t, 0)?, y.eval(t, 0)?))
    }

    pub fn state(&self, j: usize, t: f64) -> Result<LandmarkState> {
        let [x, y] = &self.channels[j];
        let (x, y) = (x.eval_all(t)?, y.eval_all(t)?);
        Ok(LandmarkState { pos: Vec2::new(x[0], y[0]), vel: Vec2::new(x[1], y[1]), acc: Vec2::new(x[2], y[2]) })
    }

    pub fn states(&self, t: f64) -> Result<[LandmarkState; LANDMARKS]> {
        let mut out = [LandmarkState::default(); LANDMARKS];
        for (j, s) in out.iter_mut().enumerate() {
            *s = self.state(j, t)?;
        }
        Ok(out)
    }
}

fn fit_landmark(times: &[f64], markers: &MarkerRecord, j: usize, smoothing: f64) -> Result<[SmoothingSpline; 2]> {
    Ok([
        SmoothingSpline::fit(times, &markers.channel(j, 0), smoothing)?,
        SmoothingSpline::fit(times, &markers.channel(j, 1), smoothing)?,
    ])
}

/// Number of points of the `1 - s_p` search grid.
pub const SELECTION_GRID_POINTS: usize = 31;
/// Coordinate-descent sweeps over the landmarks.
pub const SELECTION_SWEEPS: usize = 2;

/// Candidate smoothing parameters: `1 - s_p` log-spaced over `[1e-10, 1e-1]`.
pub fn selection_grid() -> Vec<f64> {
    (0..SELECTION_GRID_POINTS)
        .map(|k| {
            let e = -10.0 + 9.0 * k as f64 / (SELECTION_GRID_POINTS - 1) as f64;
            1.0 - 10f64.powf(e)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub params: [f64; LANDMARKS],
    /// Grid index chosen for each landmark.
    pub grid_index: [usize; LANDMARKS],
    pub objective: f64,
    pub initial_objective: f64,
}

/// Per-landmark smoothing parameters by coordinate descent over
/// [`selection_grid`], starting from `kin`'s current parameters.
///
/// `objective` scores a candidate fit (lower is better); the pipeline uses
/// the residual ground-reaction norm. Each landmark is swept in turn, twice.
pub fn select_parameters(
    markers: &MarkerRecord,
    mut kin: SmoothedKinematics,
    objective: impl Fn(&SmoothedKinematics) -> Result<f64>,
) -> Result<(SmoothedKinematics, Selection)> {
    let grid = selection_grid();
    let initial_objective = objective(&kin)?;
    let mut best = initial_objective;
    let mut grid_index = [0usize; LANDMARKS];
    for _ in 0..SELECTION_SWEEPS {
        for j in 0..LANDMARKS {
            let current = kin.params()[j];
            let mut scores = Vec::with_capacity(grid.len());
            for &sp in &grid {
                kin.refit(markers, j, sp)?;
                scores.push(objective(&kin)?);
            }
            let pick = scores
                .iter()
                .enumerate()
                .filter(|(_, v)| v.is_finite())
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(k, v)| (k, *v));
            match pick {
                Some((k, v)) => {
                    kin.refit(markers, j, grid[k])?;
                    grid_index[j] = k;
                    best = v;
                }
                None => {
                    kin.refit(markers, j, current)?;
                    let dump: Vec<String> =
                        grid.iter().zip(&scores).map(|(sp, v)| format!("1-s_p={:.1e}: {v}", 1.0 - sp)).collect();
                    return Err(Error::Selection(format!(
                        "landmark {}: non-finite residual at every grid point [{}]",
                        j + 1,
                        dump.join(", ")
                    )));
                }
            }
        }
    }
    let params = kin.params();
    Ok((kin, Selection { params, grid_index, objective: best, initial_objective }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize, h: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * h).collect()
    }

    #[test]
    fn interpolates_at_one() {
        let xs = grid(30, 0.1);
        let ys: Vec<f64> = xs.iter().map(|x| (3.0 * x).sin() + x * x).collect();
        let s = SmoothingSpline::fit(&xs, &ys, 1.0).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!((s.eval(*x, 0).unwrap() - y).abs() < 1e-9);
        }
        assert!(s.eval(0.0, 2).unwrap().abs() < 1e-12);
        assert!(s.eval(2.9, 2).unwrap().abs() < 1e-9);
    }

    #[test]
    fn straight_line_at_zero() {
        let xs = grid(12, 0.5);
        let ys: Vec<f64> = xs.iter().map(|x| (x * 7.0).cos()).collect();
        let s = SmoothingSpline::fit(&xs, &ys, 0.0).unwrap();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let slope = sxy / sxx;
        for x in &xs {
            let line = my + slope * (x - mx);
            assert!((s.eval(*x, 0).unwrap() - line).abs() < 1e-9);
        }
    }

    #[test]
    fn line_data_is_reproduced_for_any_parameter() {
        let xs = grid(15, 0.2);
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 - 2.0 * x).collect();
        for p in [0.0, 0.3, 0.999, 1.0] {
            let s = SmoothingSpline::fit(&xs, &ys, p).unwrap();
            assert!(s.roughness() < 1e-20);
            for x in &xs {
                assert!((s.eval(*x, 0).unwrap() - (1.5 - 2.0 * x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quadratic_curvature() {
        let xs = grid(41, 0.05);
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let s = SmoothingSpline::fit(&xs, &ys, 1.0).unwrap();
        // Natural end conditions pull the curvature to zero at the ends; the
        // disturbance decays geometrically towards the middle.
        assert!((s.eval(1.0, 2).unwrap() - 2.0).abs() < 1e-6);
        assert!((s.eval(1.0125, 2).unwrap() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn derivative_matches_central_differences() {
        let xs = grid(60, 0.01);
        let ys: Vec<f64> = xs.iter().map(|x| (8.0 * x).sin()).collect();
        let s = SmoothingSpline::fit(&xs, &ys, 0.999_999).unwrap();
        let h = 1e-4;
        for k in 1..200 {
            let t = 0.02 + k as f64 * 0.0027;
            for order in 0..2 {
                let fd = (s.eval(t + h, order).unwrap() - s.eval(t - h, order).unwrap()) / (2.0 * h);
                let an = s.eval(t, order + 1).unwrap();
                assert!((fd - an).abs() <= 1e-4 * an.abs().max(1.0), "t={t} order={order}");
            }
        }
    }

    #[test]
    fn continuous_at_knots() {
        let xs = grid(20, 0.1);
        let ys: Vec<f64> = xs.iter().map(|x| (5.0 * x).exp().sin()).collect();
        let s = SmoothingSpline::fit(&xs, &ys, 0.9).unwrap();
        for &x in &xs[1..19] {
            for order in 0..3 {
                let l = s.eval(x - 1e-12, order).unwrap();
                let r = s.eval(x + 1e-12, order).unwrap();
                assert!((l - r).abs() <= 1e-8 * l.abs().max(1.0), "order {order} at {x}");
            }
        }
    }

    #[test]
    fn input_errors() {
        let xs = [0.0, 1.0, 1.0, 2.0];
        assert!(matches!(SmoothingSpline::fit(&xs, &[0.0; 4], 0.5), Err(Error::SplineInput(_))));
        let xs = [0.0, 1.0, 2.0, 3.0];
        assert!(matches!(SmoothingSpline::fit(&xs, &[0.0; 4], 1.5), Err(Error::SmoothingRange(_))));
        assert!(SmoothingSpline::fit(&xs[..3], &[0.0; 3], 0.5).is_err());
        let s = SmoothingSpline::fit(&xs, &[0.0, 1.0, 0.0, 1.0], 0.5).unwrap();
        assert!(matches!(s.eval(3.5, 0), Err(Error::OutOfDomain { .. })));
        assert!(matches!(s.eval(-0.1, 1), Err(Error::OutOfDomain { .. })));
        assert!(s.eval(3.0, 3).is_err());
    }

    #[test]
    fn roughness_decreases_with_more_smoothing() {
        let xs = grid(50, 0.02);
        let ys: Vec<f64> =
            xs.iter().enumerate().map(|(i, x)| x.sin() + if i % 3 == 0 { 0.01 } else { -0.005 }).collect();
        let mut prev = f64::INFINITY;
        for sp in selection_grid().iter() {
            let r = SmoothingSpline::fit(&xs, &ys, *sp).unwrap().roughness();
            assert!(r <= prev * (1.0 + 1e-9), "roughness rose at s_p = {sp}");
            prev = r;
        }
    }

    #[test]
    fn grid_spans_decades() {
        let g = selection_grid();
        assert_eq!(g.len(), 31);
        assert!(((1.0 - g[0]) / 1e-10 - 1.0).abs() < 1e-5);
        assert!(((1.0 - g[30]) - 0.1).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn linear_in_ordinates(
            y1 in prop::collection::vec(-1.0..1.0f64, 12),
            y2 in prop::collection::vec(-1.0..1.0f64, 12),
            a in -3.0..3.0f64,
            b in -3.0..3.0f64,
            sp in 0.0..1.0f64,
        ) {
            let xs = grid(12, 0.1);
            let mix: Vec<f64> = y1.iter().zip(&y2).map(|(u, v)| a * u + b * v).collect();
            let f1 = SmoothingSpline::fit(&xs, &y1, sp).unwrap();
            let f2 = SmoothingSpline::fit(&xs, &y2, sp).unwrap();
            let fm = SmoothingSpline::fit(&xs, &mix, sp).unwrap();
            for k in 0..50 {
                let t = k as f64 * 1.1 / 49.0;
                for order in 0..3 {
                    let lhs = fm.eval(t, order).unwrap();
                    let rhs = a * f1.eval(t, order).unwrap() + b * f2.eval(t, order).unwrap();
                    prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()));
                }
            }
        }
    }
}
