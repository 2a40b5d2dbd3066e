//! H-representation polyhedra and finite unions of them.
//!
//! Every set operation the safe-set recursion needs is here: membership,
//! emptiness, intersection, Pontryagin difference (by support-function LPs),
//! translation, affine preimage, Cartesian product, Fourier–Motzkin
//! projection and LP-based redundancy removal. All halfspaces are closed.

mod io;
mod polyhedron;
mod union;

pub use io::{PieceDoc, UnionDoc};
pub use polyhedron::HPolyhedron;
pub use union::{sample_in, sampled_subset, PolyUnion, SubsetEvidence};
