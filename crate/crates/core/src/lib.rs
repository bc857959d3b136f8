//! Emphatic temporal-difference learning on finite MDPs.
//!
//! The crate holds the model ([`mdp`]), the exact limit quantities
//! ([`oracle`]), trajectory simulation ([`trajectory`]), trace recursions
//! ([`traces`]), the learning algorithms ([`learners`]) and numerical probes of
//! the convergence argument ([`diagnostics`]). It is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod diagnostics;
pub mod error;
pub mod learners;
pub mod linalg;
pub mod mdp;
pub mod oracle;
pub mod rng;
pub mod scenarios;
pub mod traces;
pub mod trajectory;

pub use error::{LearnerError, OracleError, SpecError};
