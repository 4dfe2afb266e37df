//! Dense, sparse and banded linear algebra generic over [`Scalar`](crate::Scalar).

pub mod band;
pub mod dense;
pub mod sparse;

pub use band::{BandLu, BandMatrix};
pub use dense::{Cholesky, DMat, Lu, SymmetricEigen};
pub use sparse::{CsrMatrix, TripletBuilder};
