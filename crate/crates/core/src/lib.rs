//! Planar inverse dynamics and segment inertia estimation for squat jumps.
//!
//! A trial is a 100 Hz record of five landmarks (toe, ankle, knee, hip,
//! shoulder) and a 1000 Hz force-plate record on an unknown clock offset.
//! [`pipeline::run_trial`] smooths the landmarks ([`spline`]), recovers the
//! offset and the trunk's centre-of-mass ratio ([`sync`]), runs the chain
//! recursion ([`invdyn`]) and fits or scores the inertias ([`estimate`]).
//! [`synth`] builds trials with known answers.
//!
//! ```
//! use bsip::pipeline::{run_trial, RunConfig};
//! use bsip::synth::{generate, Scenario};
//!
//! let (trial, truth) = generate(&Scenario { nu: 25, ..Scenario::default() }.noiseless())?;
//! let run = run_trial(&trial, &truth.table, &RunConfig::default())?;
//! assert_eq!(run.report.nu, 25);
//! # Ok::<(), bsip::Error>(())
//! ```

// `!(x > y)` is the NaN-rejecting form used for every range check.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod estimate;
pub mod geom;
pub mod invdyn;
pub mod io;
pub mod lls;
pub mod model;
pub mod optim;
pub mod pipeline;
pub mod quad;
pub mod spline;
pub mod sync;
pub mod synth;

pub use error::{Error, Result, Stage};
pub use geom::Vec2;

// Book chapters compile as doctests so the guide cannot drift.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/smoothing.md")]
    mod smoothing {}
    #[doc = include_str!("../../../book/src/synchronization.md")]
    mod synchronization {}
    #[doc = include_str!("../../../book/src/inverse_dynamics.md")]
    mod inverse_dynamics {}
    #[doc = include_str!("../../../book/src/estimation.md")]
    mod estimation {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
