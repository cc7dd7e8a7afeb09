//! Derivative-free multi-modal global optimization with leader–follower
//! particle dynamics (localized GKBO), a polarized CBO baseline and a Monte
//! Carlo benchmark harness.

pub mod bench;
pub mod cli;
pub mod ensemble;
pub mod error;
pub mod gkbo;
pub mod objectives;
pub mod pcbo;

pub use ensemble::{Ensemble, Label, WeightVector};
pub use error::{Error, Result};
pub use gkbo::{run_gkbo, ClusterState, Diffusion, GkboState, RunReport, SolverConfig};
pub use objectives::{FunctionKind, ObjectiveSpec};

pub use pcbo::{run_pcbo, PcboConfig};
