//! Contract design for hidden-action principal-agent problems.
//!
//! The crate is `no_std` and only needs `alloc`. It covers exact optimal
//! contracts via linear programming, approximately incentive-compatible
//! contracts for succinct product settings, linear and separable contract
//! families, robustness transforms, sampling-based estimation, and the
//! instance families used to stress all of the above.
//!
//! File formats, the command line tool and anything touching the OS live in
//! the `contract-forge` companion crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod blackbox;
pub mod delta_solver;
pub mod error;
pub mod exact;
pub mod generators;
pub mod linear;
pub mod lpcore;
pub mod model;
pub mod oracle;
pub mod tol;
pub mod transform;

mod math;

pub use error::{Error, Result};
pub use model::{
    AgentChoice, Contract, ExplicitSetting, IcNotion, Instance, Outcome, ProductSetting, Setting, SparseContract,
};
pub use tol::Tolerances;
