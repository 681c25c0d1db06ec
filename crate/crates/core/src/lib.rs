//! Boundary feedback stabilisation of geometrically exact beams in intrinsic
//! variables: model coefficients, quadratic Lyapunov certificates,
//! closed-loop simulation and pose reconstruction.

pub mod algebra;
pub mod beam;
pub mod certificate;
pub mod harness;
pub mod model;
pub mod pose;
pub mod presets;
pub mod solver;
