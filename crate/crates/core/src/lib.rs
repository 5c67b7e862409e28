//! Convex relaxations for finite-alphabet team decision problems of the
//! form `S → X → Y → Ŝ`: an encoder sees the source `S` and picks a channel
//! input `X`, the channel produces `Y`, and a decoder picks `Ŝ` from `Y`
//! alone. The encoder's choice shapes what the decoder learns, so the set
//! of achievable joint laws is not convex and exact search grows as
//! `nX^nS · nŜ^nY`.
//!
//! The crate replaces that set with the polytope of joints obeying the
//! f-divergence data-processing inequality `I_f(S;Ŝ) ≤ I_f(X;Y)`, which
//! gives certified lower bounds:
//!
//! * [`model`]: instances, codes, joints and the end-to-end pair
//!   `a = Q(ŝ|s)`, `b = Q(x)`; nonconvexity witnesses and the separability
//!   test for costs.
//! * [`info`]: f-divergences, f-mutual information, their gradients and
//!   Blahut–Arimoto for rate-distortion and capacity-cost.
//! * [`exact`]: enumeration of deterministic codes and alternating best
//!   response when enumeration is out of budget.
//! * [`relax`]: the relaxation for separable costs, with a cross term, and
//!   for general tensors; KKT residuals and the bound report.
//! * [`inverse`]: costs under which a given code is optimal.
//! * [`gaussian`]: discretized Gaussian test channel, cross-term and
//!   Witsenhausen instances with their closed forms.
//! * [`cli`]: the `teamrelax` command-line front end.
//!
//! ```
//! use teamrelax::info::FGenerator;
//! use teamrelax::model::{Cost, Instance, SeparableCost};
//! use teamrelax::relax::solve_relaxation_separable;
//!
//! // uniform bit over BSC(0.1), Hamming distortion
//! let cost = SeparableCost::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.0, 0.0]);
//! let inst = Instance::new(vec![0.5, 0.5], vec![vec![0.9, 0.1], vec![0.1, 0.9]], 2, Cost::Separable(cost)).unwrap();
//! let sol = solve_relaxation_separable(&inst, &FGenerator::NegLog, 1e-8).unwrap();
//! assert!((sol.value - 0.1).abs() < 1e-6);
//! ```

pub mod cli;
pub mod error;
pub mod exact;
pub mod gaussian;
pub mod info;
pub mod inverse;
pub mod json;
pub mod model;
pub mod relax;
mod simplex;

pub use error::{Error, Result};
