//! Reconstruction of surface topography from resonance-frequency scans of a
//! vibrating cantilever, using model-based successive approximation.
//!
//! A scanned surface shifts the natural frequency of a nearby oscillating
//! beam. Inverting an accurate interaction model directly is expensive and
//! ill-conditioned, so the solver in [`solver`] iterates a cheap invertible
//! model against the accurate forward model: each sweep inverts the simple
//! model at a working target, evaluates the full model there, and feeds the
//! measurement mismatch back into the target. When the two models' Jacobians
//! are aligned the working target converges to the point where the full model
//! reproduces the measurements.
//!
//! The crates' pieces:
//!
//! * [`solver`]: the fixed-point engine, iteration traces, and the Jacobian
//!   alignment check.
//! * [`beam`]: clamped-free Euler-Bernoulli modes and the Rayleigh-quotient
//!   frequency shift of a distributed stiffness profile.
//! * [`topography`]: contours, piecewise-constant sections, and the groove
//!   test geometry.
//! * [`vdw`]: Lennard-Jones material constants and the distributed
//!   surface-interaction model with its invertible per-segment approximation.
//! * [`magnetic`]: the discrete magnet-array analog and power-law calibration
//!   from gap/frequency data.
//! * [`harness`]: scan simulation, per-phase reconstruction, and error
//!   reporting.
//! * [`scenario`]: end-to-end scenario configuration and runners.
//! * [`io`]: CSV/JSON artifact readers and writers.

pub mod beam;
pub mod demo;
pub mod harness;
pub mod io;
pub mod magnetic;
pub mod quad;
pub mod scenario;
pub mod solver;
pub mod topography;
pub mod vdw;
