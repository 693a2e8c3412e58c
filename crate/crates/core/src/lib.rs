//! Hard-instance laboratory for noiseless binary classification under
//! geometric margin conditions.
//!
//! The crate builds adversarial classifier/distribution families indexed by
//! a binary hypercube — a baseline boundary plus disjoint localized bumps,
//! paired with densities that vanish polynomially at the decision boundary —
//! verifies numerically every inequality the lower-bound argument needs
//! (margin masses, L1/disagreement/Hellinger budgets, Hölder moduli,
//! Fourier moments), computes the closed-form minimax floors, and
//! benchmarks concrete learners against them.
//!
//! Modules follow the pipeline:
//!
//! * [`geometry`] — horizon-function classifiers and boundary distances;
//! * [`construction`] — grid partition, bumps, and the hypercube family;
//! * [`classes`] — per-class planning (Hölder, Barron, convex-Lipschitz);
//! * [`densities`] — the adversarial density and its exact sampler;
//! * [`verification`] — the inequality checks and integration utilities;
//! * [`assouad`] — witness regions, projection, and the testing bound;
//! * [`learners`] — the benchmark roster and worst-case risk tables;
//! * [`harness`] — experiment configs, the runner, and rate fits.

pub mod assouad;
pub mod classes;
pub mod construction;
pub mod densities;
pub mod descriptor;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod learners;
pub mod numerics;
pub mod verification;

pub use error::{Error, Result};
