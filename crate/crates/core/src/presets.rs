//! Parameter sets shipped with the tool.

use crate::algebra::Vector3;
use crate::beam::{optimal_feedback, BeamParams};

/// Unit-order beam: `ρ = a = G = k₁ = k₂ = k₃ = I₂ = I₃ = ℓ = 1`, `E = 4`,
/// with the `C_κ`-optimal gains.
pub fn toy_params() -> BeamParams {
    with_optimal_gains(BeamParams {
        rho: 1.0,
        area: 1.0,
        young: 4.0,
        shear: 1.0,
        i2: 1.0,
        i3: 1.0,
        k1: 1.0,
        k2: 1.0,
        k3: 1.0,
        length: 1.0,
        mu1: 1.0,
        mu2: 1.0,
    })
}

/// Solid circular steel rod, radius 0.1 m, length 1 m.
pub fn steel_params() -> BeamParams {
    let radius: f64 = 0.1;
    let area = std::f64::consts::PI * radius * radius;
    let i = std::f64::consts::PI * radius.powi(4) / 4.0;
    let young = 210e9;
    let poisson = 0.3;
    with_optimal_gains(BeamParams {
        rho: 7850.0,
        area,
        young,
        shear: young / (2.0 * (1.0 + poisson)),
        i2: i,
        i3: i,
        k1: 1.0,
        k2: 0.9,
        k3: 0.9,
        length: 1.0,
        mu1: 1.0,
        mu2: 1.0,
    })
}

/// Constant twist and bending curvature of the helical preset (1/m).
pub fn helical_curvature() -> Vector3 {
    Vector3::new(0.5, 0.0, 1.0)
}

fn with_optimal_gains(mut p: BeamParams) -> BeamParams {
    let (mu1, mu2) = optimal_feedback(&p).expect("preset parameters are positive");
    p.mu1 = mu1;
    p.mu2 = mu2;
    p
}
