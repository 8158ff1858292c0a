//! Cumulative trapezoidal quadrature on uniform grids.

/// Running integral of uniformly sampled `y` with step `dt`, starting at 0.
pub fn cumulative_trapezoid(y: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.len());
    let mut acc = 0.0;
    for (i, v) in y.iter().enumerate() {
        if i > 0 {
            acc += 0.5 * dt * (y[i - 1] + v);
        }
        out.push(acc);
    }
    out
}

/// Running double integral `int_0^t int_0^u y(s) ds du`.
pub fn cumulative_double_trapezoid(y: &[f64], dt: f64) -> Vec<f64> {
    cumulative_trapezoid(&cumulative_trapezoid(y, dt), dt)
}
