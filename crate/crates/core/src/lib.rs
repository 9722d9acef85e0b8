// Negated float comparisons are deliberate: they send NaN down the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod busemann;
pub mod coarsegrain;
pub mod criterion;
pub mod distributions;
pub mod error;
pub mod lattice;
pub mod legendre;
pub mod lpp;
pub mod numeric;
pub mod rng;

pub use distributions::WeightLaw;
pub use error::{LabError, Result};
pub use lattice::{LatticePath, Point, Step};
