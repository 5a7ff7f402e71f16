//! Numerics for the tail behaviour of random fixed point equations
//! `X =_D AX + B` and `X =_D AX ∨ B` when `log A` is arithmetic.
//!
//! When `log A` lives on a lattice `hZ` the tails of the stationary
//! solutions are not regularly varying: they oscillate with a
//! log-periodic profile `q` satisfying `q(x e^h) = q(x)`. This crate
//! provides the machinery to compute and cross-check that profile:
//!
//! * [`law`] — arithmetic probability laws on `hZ` with an optional atom
//!   at `A = 0`, span detection, convolution and moment functionals;
//! * [`cramer`] — the Cramér root `E A^κ = 1`, exponential tilting, the
//!   truncated-mean normalizer and regime classification
//!   (finite mean / infinite mean with regularly varying tail / defective);
//! * [`renewal`] — renewal mass sequences `u_n` for proper and defective
//!   tilted laws, with Blackwell, strong-renewal and defective limit checks;
//! * [`qprofile`] — the implicit renewal function ψ, summability
//!   diagnostics, and the profile `q` computed three independent ways
//!   (lattice sums, exponential smoothing, direct tail normalization);
//! * [`sim`] — reproducible Monte Carlo samplers for the perpetuity, the
//!   maximum equation and sandwich-bounded iterated function systems;
//! * [`oracles`] — exact closed-form solutions (the St. Petersburg pair
//!   and the target-profile constructor) used as ground truth everywhere.
//!
//! The data-parallel inner loops (convolution blocks, Monte Carlo paths,
//! grid evaluation) run on rayon when the `parallel` feature is enabled
//! (default) and fall back to sequential loops otherwise. Results are
//! bit-identical in both modes.

pub mod conv;
pub mod cramer;
pub mod exec;
pub mod law;
pub mod oracles;
pub mod qprofile;
pub mod renewal;
pub mod report;
pub mod sim;
pub mod special;
pub mod stats;
pub mod tail;

pub use cramer::{CramerInfo, KappaSolution, Regime};
pub use law::{ArithmeticLaw, BDist, Generator, JointAbLaw};
pub use qprofile::{PeriodicQ, PsiFunction};
pub use renewal::{RenewalSequence, Window};
pub use sim::{IfsDescriptor, IfsMap, SimConfig, StopRule};
pub use tail::TailFunction;
