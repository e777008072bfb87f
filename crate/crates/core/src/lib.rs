//! Computational kernel for compact-quantum-group experiments:
//!
//! - exact Haar states on the free and classical orthogonal, unitary and
//!   permutation families (Weingarten calculus over exact rationals, direct
//!   averaging for finite groups, power counting for the torus);
//! - the word algebra with its Hopf structure maps (coproduct, antipode,
//!   counit, involution) over the free *-algebra on the generators;
//! - state convolution and its dynamics through transfer matrices, with
//!   pullbacks along concrete quotient morphisms, free-product states and
//!   convergence experiments toward the Haar state;
//! - unital completely positive maps into matrix algebras, with normalized-
//!   trace multiplicativity defects, defect Gram matrices and factorization-
//!   net reports.

pub mod caps;
pub mod error;
pub mod experiments;
pub mod group;
pub mod haar;
pub mod partition;
pub mod ratmat;
pub mod state;
pub mod ucp;
pub mod value;
pub mod word;

pub use caps::Caps;
pub use error::{Error, Result};
pub use group::{Family, GroupSpec, Morphism, Rotation};
pub use state::{ConvergenceReport, StateOracle, TransferMatrix};
pub use ucp::UcpMap;
pub use value::Value;
pub use word::{Letter, Word, WordSum};
