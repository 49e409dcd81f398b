//! Numerical core for the cut-off model of two vortex-patch interfaces
//! meeting at a corner: kernels, quadrature, the quadratic model case, the
//! linearized operator, the V-state solver, time dynamics and the
//! quadratic-form checks used by the invertibility argument.

pub mod analysis_checks;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod kernels;
pub mod linop;
pub mod model_case;
pub mod par;
pub mod quadrature;
pub mod vstate;

pub use error::{Error, Result};
pub use par::Exec;
