//! A numerical laboratory for blow-up of the subconformal focusing
//! semilinear wave equation `∂²u/∂t² = Δu + |u|^{p-1} u`.
//!
//! The crate simulates blow-up in physical variables and in similarity
//! variables, fits solutions to the explicit soliton families, evaluates the
//! Lyapunov functional, and reconstructs and certifies blow-up surfaces.

pub mod config;
pub mod energy;
pub mod experiments;
pub mod error;
pub mod extended;
pub mod modulation;
pub mod profiles;
pub mod quadrature;
pub mod selfsim;
pub mod simvars;
pub mod surface;
pub mod wave;

pub use error::{Error, Result};
pub use profiles::{ModelParams, ProfileParams, Sign};
pub use simvars::{Bump, FieldSnapshot, SelfSimFrame, YGrid};
