//! Segment inertia estimation from the torque balance.
//!
//! Written per sample, the balance is `sum_j I_j w_j(t) = L(t)` where `w`
//! is the angular channel of the chosen degree and `L` the matching
//! integral of `C + sum M_j`.
//!
//! * Method A solves for all four inertias.
//! * Method B keeps `I_1..I_3` from the reference table and solves the
//!   single unknown `I_4` from `y = I_4 x`.
//! * Method C takes all four from the reference table and only scores them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::invdyn::{angular_channel, epsilon, load_channel, torque_sides, Degree, PushOff};
use crate::lls::{lls_solve, Matrix};
use crate::model::SEGMENTS;

/// Minimum rows per unknown.
pub const ROWS_PER_UNKNOWN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    A,
    B,
    C,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::A, Method::B, Method::C];
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Method::A),
            "B" | "b" => Ok(Method::B),
            "C" | "c" => Ok(Method::C),
            other => Err(Error::Method(other.to_string())),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::A => "A",
            Method::B => "B",
            Method::C => "C",
        })
    }
}

/// Overdetermined system `a x = b`. Method C carries the Method A layout.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub method: Method,
    pub degree: Degree,
    pub a: Matrix,
    pub b: Vec<f64>,
    /// Window samples whose design row was identically zero.
    pub dropped: Vec<usize>,
}

/// `reference` supplies the fixed inertias of Method B (first three).
pub fn build_system(
    push: &PushOff,
    moments: &[[f64; SEGMENTS]],
    degree: Degree,
    method: Method,
    reference: &[f64; SEGMENTS],
) -> Result<LinearSystem> {
    if push.is_empty() {
        return Err(Error::Input("empty push-off window".into()));
    }
    let w = angular_channel(push, degree);
    let load = load_channel(push, moments, degree);
    let mut rows = Vec::with_capacity(w.len());
    let mut b = Vec::with_capacity(w.len());
    let mut dropped = Vec::new();
    for (i, (wi, li)) in w.iter().zip(&load).enumerate() {
        let (row, target) = match method {
            Method::A | Method::C => (wi.to_vec(), *li),
            Method::B => {
                let known: f64 = (0..3).map(|j| reference[j] * wi[j]).sum();
                (vec![wi[3]], li - known)
            }
        };
        if row.iter().all(|v| *v == 0.0) {
            dropped.push(i);
            continue;
        }
        rows.push(row);
        b.push(target);
    }
    let cols = if method == Method::B { 1 } else { SEGMENTS };
    if rows.len() < ROWS_PER_UNKNOWN * cols {
        return Err(Error::Input(format!(
            "push-off window gives {} usable rows, need at least {} for {} unknown(s)",
            rows.len(),
            ROWS_PER_UNKNOWN * cols,
            cols
        )));
    }
    Ok(LinearSystem { method, degree, a: Matrix::from_rows(&rows)?, b, dropped })
}

/// `1 - SS_res / SS_tot` with a mean-centered total sum.
pub fn r_squared(system: &LinearSystem, x: &[f64]) -> f64 {
    let fit = system.a.mul_vec(x);
    let mean = system.b.iter().sum::<f64>() / system.b.len() as f64;
    let ss_res: f64 = fit.iter().zip(&system.b).map(|(f, b)| (b - f).powi(2)).sum();
    let ss_tot: f64 = system.b.iter().map(|b| (b - mean).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

/// Normalized trunk radius of gyration `sqrt(I_4 / m_4) / l_4`, carrying the
/// sign of `I_4`.
pub fn trunk_gyration_ratio(i4: f64, m4: f64, l4: f64) -> f64 {
    i4.signum() * (i4.abs() / m4).sqrt() / l4
}

pub fn gyration_ratio_valid(r4: f64) -> bool {
    r4 > 0.0 && r4 <= 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub method: Method,
    pub degree: Degree,
    pub inertias: [f64; SEGMENTS],
    /// Entries copied from the reference table rather than solved.
    pub fixed: [bool; SEGMENTS],
    pub epsilon: f64,
    pub r2: f64,
    pub r4_tilde: f64,
    pub valid: bool,
}

/// Solves (A, B) or scores (C) one `(method, degree)` cell.
pub fn estimate(
    method: Method,
    degree: Degree,
    push: &PushOff,
    moments: &[[f64; SEGMENTS]],
    reference: &[f64; SEGMENTS],
    trunk_length: f64,
) -> Result<EstimationResult> {
    let (inertias, fixed, r2) = match method {
        Method::A => {
            let sys = build_system(push, moments, degree, Method::A, reference)?;
            let x = lls_solve(&sys.a, &sys.b)?;
            let r2 = r_squared(&sys, &x);
            ([x[0], x[1], x[2], x[3]], [false; SEGMENTS], r2)
        }
        Method::B => {
            let sys = build_system(push, moments, degree, Method::B, reference)?;
            let x = lls_solve(&sys.a, &sys.b).map_err(|e| match e {
                Error::Singular { .. } => Error::Singular { columns: vec![4] },
                other => other,
            })?;
            let r2 = r_squared(&sys, &x);
            ([reference[0], reference[1], reference[2], x[0]], [true, true, true, false], r2)
        }
        Method::C => {
            let sys = build_system(push, moments, degree, Method::C, reference)?;
            let r2 = r_squared(&sys, reference);
            (*reference, [true; SEGMENTS], r2)
        }
    };
    let sides = torque_sides(push, moments, &inertias, degree);
    let eps = epsilon(&sides.exp, &sides.ang)?;
    let r4_tilde = trunk_gyration_ratio(inertias[3], push.model.masses[3], trunk_length);
    Ok(EstimationResult {
        method,
        degree,
        inertias,
        fixed,
        epsilon: eps,
        r2,
        r4_tilde,
        valid: gyration_ratio_valid(r4_tilde),
    })
}

/// Method B scatter `(x_i, y_i)` with `y = I_4 x`.
pub fn method_b_scatter(
    push: &PushOff,
    moments: &[[f64; SEGMENTS]],
    degree: Degree,
    reference: &[f64; SEGMENTS],
) -> Result<Vec<(f64, f64)>> {
    let sys = build_system(push, moments, degree, Method::B, reference)?;
    Ok((0..sys.b.len()).map(|i| (sys.a.get(i, 0), sys.b[i])).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Filtered<T> {
    pub retained: Vec<T>,
    pub removed: usize,
}

/// Keeps items whose trunk gyration ratio lies in `(0, 1]`.
pub fn gyration_filter<T>(items: Vec<T>, r4: impl Fn(&T) -> f64) -> Filtered<T> {
    let total = items.len();
    let retained: Vec<T> = items.into_iter().filter(|t| gyration_ratio_valid(r4(t))).collect();
    Filtered { removed: total - retained.len(), retained }
}

pub mod stats {
    //! Sample statistics used by the batch summary.

    pub fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    /// Sample standard deviation (`n - 1` denominator); `NaN` below 2 values.
    pub fn sd(v: &[f64]) -> f64 {
        if v.len() < 2 {
            return f64::NAN;
        }
        let m = mean(v);
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    }

    /// Quantile by linear interpolation between order statistics at
    /// position `(n - 1) q`.
    pub fn quantile(v: &[f64], q: f64) -> f64 {
        if v.is_empty() {
            return f64::NAN;
        }
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        let h = (s.len() - 1) as f64 * q;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(s.len() - 1);
        s[lo] + (h - lo as f64) * (s[hi] - s[lo])
    }

    pub fn median(v: &[f64]) -> f64 {
        quantile(v, 0.5)
    }
}

/// One trial's contribution to a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub name: String,
    pub alpha4: f64,
    pub r4_tilde: f64,
    pub results: Vec<EstimationResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q25: f64,
    pub q75: f64,
    pub q975: f64,
}

impl Distribution {
    pub fn of(v: &[f64]) -> Self {
        Distribution {
            n: v.len(),
            mean: stats::mean(v),
            sd: stats::sd(v),
            q025: stats::quantile(v, 0.025),
            q25: stats::quantile(v, 0.25),
            q75: stats::quantile(v, 0.75),
            q975: stats::quantile(v, 0.975),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: Method,
    pub degree: Degree,
    pub n: usize,
    pub log10_epsilon_mean: f64,
    pub log10_epsilon_sd: f64,
    pub log10_one_minus_r2_mean: f64,
    pub log10_one_minus_r2_sd: f64,
}

/// `numerator/denominator`: how many times smaller the geometric-mean error
/// of `numerator` is than that of `denominator`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub numerator: String,
    pub denominator: String,
    /// Degree (for method pairs) or method (for degree pairs) held fixed.
    pub at: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub trials: usize,
    pub cells: Vec<CellSummary>,
    pub ratios: Vec<Ratio>,
    pub alpha4: Distribution,
    pub r4_tilde: Distribution,
}

fn finite_log10(v: impl Iterator<Item = f64>) -> Vec<f64> {
    v.map(f64::log10).filter(|x| x.is_finite()).collect()
}

/// `10^(mean log10 eps_other - mean log10 eps_base)`.
pub fn geometric_mean_ratio(base: &[f64], other: &[f64]) -> f64 {
    let lb = finite_log10(base.iter().copied());
    let lo = finite_log10(other.iter().copied());
    10f64.powf(stats::mean(&lo) - stats::mean(&lb))
}

/// Summary over (already filtered) trials.
pub fn aggregate(trials: &[TrialOutcome]) -> Result<BatchSummary> {
    if trials.len() < 2 {
        return Err(Error::Input(format!("aggregation needs at least 2 trials, got {}", trials.len())));
    }
    let eps = |m: Method, d: Degree| -> Vec<f64> {
        trials
            .iter()
            .flat_map(|t| t.results.iter().filter(|r| r.method == m && r.degree == d).map(|r| r.epsilon))
            .collect()
    };
    let mut cells = Vec::new();
    for m in Method::ALL {
        for d in Degree::ALL {
            let rs: Vec<&EstimationResult> =
                trials.iter().flat_map(|t| t.results.iter().filter(move |r| r.method == m && r.degree == d)).collect();
            if rs.is_empty() {
                continue;
            }
            let le = finite_log10(rs.iter().map(|r| r.epsilon));
            let lr = finite_log10(rs.iter().map(|r| 1.0 - r.r2));
            cells.push(CellSummary {
                method: m,
                degree: d,
                n: rs.len(),
                log10_epsilon_mean: stats::mean(&le),
                log10_epsilon_sd: stats::sd(&le),
                log10_one_minus_r2_mean: stats::mean(&lr),
                log10_one_minus_r2_sd: stats::sd(&lr),
            });
        }
    }
    let mut ratios = Vec::new();
    for d in Degree::ALL {
        for (x, y) in [(Method::A, Method::B), (Method::B, Method::C)] {
            let (ex, ey) = (eps(x, d), eps(y, d));
            if !ex.is_empty() && !ey.is_empty() {
                ratios.push(Ratio {
                    numerator: x.to_string(),
                    denominator: y.to_string(),
                    at: format!("degree {d}"),
                    value: geometric_mean_ratio(&ex, &ey),
                });
            }
        }
    }
    for m in Method::ALL {
        for (x, y) in [(Degree::One, Degree::Zero), (Degree::Two, Degree::One)] {
            let (ex, ey) = (eps(m, x), eps(m, y));
            if !ex.is_empty() && !ey.is_empty() {
                ratios.push(Ratio {
                    numerator: x.to_string(),
                    denominator: y.to_string(),
                    at: format!("method {m}"),
                    value: geometric_mean_ratio(&ex, &ey),
                });
            }
        }
    }
    let alphas: Vec<f64> = trials.iter().map(|t| t.alpha4).collect();
    let r4: Vec<f64> = trials.iter().map(|t| t.r4_tilde).collect();
    Ok(BatchSummary {
        trials: trials.len(),
        cells,
        ratios,
        alpha4: Distribution::of(&alphas),
        r4_tilde: Distribution::of(&r4),
    })
}
