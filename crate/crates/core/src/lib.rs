//! Simulation toolkit for bipartite no-signalling correlations and the
//! information measures used to compare them.
//!
//! The crate is organised bottom-up:
//!
//! - [`infotheory`]: exact Shannon quantities over dense joint tables.
//! - [`boxes`]: two-party conditional distributions p(a,b|x,y), CHSH values and
//!   a local / no-signalling / Tsirelson classifier.
//! - [`quantum`]: density matrices up to two qubits, von Neumann entropy,
//!   Holevo quantity and qubit measurement search.
//! - [`accessible_info`]: accessible information over explicit measurement
//!   menus, with and without classical side information.
//! - [`rac`]: the nested random access coding protocol driven by boxes,
//!   exact and Monte-Carlo efficiency `J`.
//! - [`coding`]: codebooks, letter frequencies, tolerance, and finite
//!   blocklength error-probability experiments over discrete channels.
//! - [`gbit`]: the one-gbit decoding-bias region implied by the chain rule
//!   compared with the qubit disc.
//! - [`cli`]: batch front end used by the `infocausal` binary.

#![forbid(unsafe_code)]

pub mod accessible_info;
pub mod boxes;
pub mod cli;
pub mod coding;
pub mod error;
pub mod gbit;
pub mod infotheory;
pub mod quantum;
pub mod rac;
pub mod rng;

pub use error::{Error, Result};
