//! Merit-function evolution strategies for constrained derivative-free
//! optimization.
//!
//! The solver minimizes a black-box objective subject to two kinds of
//! constraints:
//!
//! * **relaxable** constraints `c_i(x) <= 0`, which may be violated during
//!   the run and are driven to feasibility through a penalty merit function
//!   `M(x) = f(x) + delta_bar * g(x)` (with `g` an aggregate violation
//!   measure) plus a dedicated restoration phase that minimizes `g` directly
//!   when violation decreases but merit does not;
//! * **unrelaxable** constraints (bounds, optionally linear inequalities),
//!   which every incumbent must satisfy. These are enforced either by an
//!   extreme barrier (`+inf` outside the region, no evaluation spent) or by
//!   an l2 projection of the sampled points onto the bound box.
//!
//! Offspring are drawn from an adaptive Gaussian distribution (CMA-style
//! covariance and step-length adaptation) and the weighted mean of the best
//! `mu` offspring is accepted only under a sufficient-decrease test driven
//! by a forcing function `rho(sigma)`, which is what yields the convergence
//! behavior the design targets (step sizes of unsuccessful iterations tend
//! to zero).
//!
//! The crate also ships the classic constrained test problems `G1`-`G13`
//! plus three engineering design problems (pressure vessel, tension
//! compression spring, welded beam) in [`bench`], and a seeded experiment
//! harness with table/CSV/JSON reporting in [`harness`]. The `mfes` binary
//! exposes both on the command line.

pub mod bench;
pub mod engine;
pub mod harness;
pub mod problem;
pub mod solver;

pub use problem::{
    EvalCounts, EvaluatedPoint, Evaluator, ExtendedReal, MeritParams, ProblemSpec, ViolationNorm,
};
pub use solver::{DirectionMode, RunRecord, SolverConfig, TraceEvent};
