//! Quantum-correlation coefficients for finite-dimensional bipartite states.
//!
//! * [`linalg`]: dense complex matrices, Hermitian eigendecomposition, square roots.
//! * [`bipartite`]: density matrices on `C^{d1} ⊗ C^{d2}` and their marginals.
//! * [`measures`]: finitely supported decompositions and the ⊠ construction.
//! * [`correlation`]: the coefficients `d` and `d₀` by multi-start minimisation,
//!   and a separability verdict.
//! * [`posmaps`]: positive maps via Choi matrices, partial transpose, Kadison defect.
//! * [`gns`]: GNS representations and the intertwiners of locally decomposable maps.
//! * [`io`]: JSON formats for states, matrices, maps, ensembles and reports.

pub mod bipartite;
pub mod correlation;
pub mod error;
pub mod gns;
pub mod io;
pub mod linalg;
pub mod measures;
pub mod posmaps;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, C64};
