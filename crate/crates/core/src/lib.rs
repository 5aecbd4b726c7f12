//! Simulation and certification of feedback-stabilized complex
//! Ginzburg–Landau dynamics on intervals and rectangles.
//!
//! The state lives on a uniform grid; transforms to the Laplacian
//! eigenbasis are exact for band-limited fields, and the integrator treats
//! the linear part exactly in that basis.

// Negated float comparisons reject NaN inputs on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod certificates;
pub mod controllers;
pub mod domain;
pub mod dynamics;
pub mod error;
pub mod initial;

pub use analysis::{
    fit_decay_rate, interpolant_margin, parseval_residual, verify_envelope, DecayFit, EnvelopeReport,
};
pub use certificates::{
    certify_modal_h1, certify_modal_l2, certify_nodal, certify_steering1, certify_steering2, certify_volume,
    envelope_at, Certificate, Hypothesis, InitialNorms, Theorem,
};
pub use controllers::{Controller, ControllerSpec, NodalPlacement, SteeringTarget};
pub use domain::{
    build_domain, compute_norms, eigen_system, from_modal, to_modal, Boundary, Domain, DomainSpec, EigenSystem,
    Field, ModalCoeffs, Norms, C64,
};
pub use dynamics::{simulate, CgleParams, RunSettings, Trajectory, TrajectoryRecord};
pub use error::{Error, Result};
pub use initial::InitialCondition;
