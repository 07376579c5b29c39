//! Numerical laboratory for logarithmic convexity of weighted heat flows.
//!
//! The crate evolves heat and inverse-square Schrödinger flows in Dirichlet
//! eigenbases, measures frequency functions and Carleman commutator forms for
//! explicit weights, certifies the sign of radial commutator expansions, and
//! propagates the explicit constant chains that turn one-time interpolation
//! into observability and spectral inequalities.

// Positivity guards are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certifier;
pub mod constants;
pub mod domain_spectral;
pub mod error;
pub mod frequency_lab;
pub mod heat_engine;
pub mod numerics;
pub mod report;
pub mod weights;

pub use certifier::{CoefficientTable, RadialWeightParams, SignCertificate};
pub use constants::{ConstantChain, ConstantEntry};
pub use domain_spectral::{DomainKind, DomainSpec, EigenSystem, Field, Grid, Region, RegionSel};
pub use error::{LabError, Result};
pub use report::InequalityReport;
pub use weights::{eval_weight_stack, WeightFamily, WeightSpec, WeightStack};
