//! Density classification by morphological adaptation.
//!
//! Two substrates classify the majority of an odd ballot of binary votes:
//!
//! * a particle model of a slime-mould-like material ([`agents`]) that is
//!   seeded along a square wave encoding the votes ([`encoding`]), pinned
//!   briefly by an attractant stimulus, then left to relax into a straight
//!   band whose vertical position gives the winner and majority size
//!   ([`analysis`]);
//! * a one-dimensional averaging automaton ([`ca`]) that mimics the same
//!   relaxation on a ring of real-valued cells.
//!
//! [`harness`] drives seeded runs, batches and sweeps and writes CSV and PGM
//! output.

pub mod agents;
pub mod analysis;
pub mod ca;
pub mod encoding;
pub mod error;
pub mod harness;
pub mod lattice;

pub use error::{Error, Result};
