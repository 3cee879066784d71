//! Harness for comparing offline (open-loop) and online (closed-loop)
//! testing of lane-keeping steering controllers.
//!
//! The crate is organised bottom-up:
//!
//! * [`domain`]: scenario attribute model, constraints and sampling
//! * [`covergen`]: constraint-aware n-way covering arrays
//! * [`sim`]: road geometry, kinematic vehicle, observations, lane-deviation metric
//! * [`controllers`]: oracle and degraded steering controllers
//! * [`offline`]: prediction-error metrics, sequence matching, agreement analysis
//! * [`evaluation`]: one scenario through both testing modes
//! * [`mining`]: forest-based attribute selection, rule induction, rule confirmation

pub mod controllers;
pub mod covergen;
pub mod domain;
pub mod evaluation;
pub mod mining;
pub mod offline;
pub mod rng;
pub mod sim;
