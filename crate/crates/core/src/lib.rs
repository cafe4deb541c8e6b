//! Multi-leader multi-follower games whose followers play a parametric linear
//! complementarity problem.
//!
//! The crate covers the game model and its file format ([`model`]), the
//! follower solution map ([`lcp`]), detection of potential structure
//! ([`structure`]), global solution of the complementarity-constrained
//! reformulations ([`mpec`]) and certification of equilibrium and stationarity
//! claims ([`certify`]).

pub mod catalog;
pub mod certify;
pub mod error;
pub mod lcp;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod mpec;
pub mod poly;
pub mod qp;
pub mod structure;

pub use error::{Error, Result};
pub use lcp::{ParametricLcp, Pattern, P_MAX};
pub use model::{parse_game, serialize_game, Formulation, Game, LeaderProblem, Point, Polyhedron, VariableLayout, TAU_FEAS};
pub use poly::Polynomial;
