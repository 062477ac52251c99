//! Set-based reachability analysis for discrete-time systems driven by ReLU
//! feedforward controllers.
//!
//! Every set in this crate is a [`ConstrainedZonotope`]
//! `{G ξ + c : ‖ξ‖∞ ≤ 1, A ξ = b}` or a finite [`SetUnion`] of them. The
//! main entry points are:
//!
//! - [`nnet`]: exact (case-splitting) and over-approximated (triangle
//!   relaxation) output sets of a [`FeedforwardNetwork`];
//! - [`reach`]: closed-loop reachable sets for linear and polynomial
//!   plant models;
//! - [`verify`]: LP certificates that reachable sets avoid unsafe regions.
//!
//! Linear programs are solved through the small contract in [`lp`].

pub mod czono;
pub mod error;
pub mod expr;
pub mod interval;
pub mod linalg;
pub mod lp;
pub mod nnet;
pub mod reach;
pub mod sample;
pub mod verify;

pub use czono::{ConstrainedZonotope, SetUnion};
pub use error::{Error, Result};
pub use expr::{Expr, NonlinearModel};
pub use interval::{Interval, IntervalMatrix};
pub use nnet::{FeedforwardNetwork, Layer};
pub use reach::{LinearModel, Method, ReachResult};
pub use verify::{UnsafeSet, Verdict, VerificationReport};
