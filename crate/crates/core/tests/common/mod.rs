//! Shared oracles for the integration tests.
#![allow(dead_code)]

use beamstab::algebra::Vector12;
use beamstab::model::{Grid, Representation, StateField};

/// Exact solution of `∂_t r + 𝐃 ∂_x r = 0` with `r₊(0) = κ r₋(0)`,
/// `r₋(ℓ) = −r₊(ℓ)`, traced back along characteristics. `minus0`/`plus0`
/// give the family-`k` initial profiles.
pub struct Characteristics<'a> {
    pub length: f64,
    pub speeds: [f64; 6],
    pub kappa: [f64; 6],
    pub minus0: &'a dyn Fn(usize, f64) -> f64,
    pub plus0: &'a dyn Fn(usize, f64) -> f64,
}

impl Characteristics<'_> {
    pub fn minus(&self, k: usize, x: f64, t: f64) -> f64 {
        let c = self.speeds[k];
        if x + c * t <= self.length {
            (self.minus0)(k, x + c * t)
        } else {
            -self.plus(k, self.length, t - (self.length - x) / c)
        }
    }

    pub fn plus(&self, k: usize, x: f64, t: f64) -> f64 {
        let c = self.speeds[k];
        if x - c * t >= 0.0 {
            (self.plus0)(k, x - c * t)
        } else {
            let back = self.minus(k, 0.0, t - x / c);
            self.kappa[k] * back
        }
    }

    pub fn field(&self, grid: Grid, t: f64) -> StateField {
        let mut s = StateField::zeros(grid, Representation::Diagonal);
        s.time = t;
        for (i, v) in s.values.iter_mut().enumerate() {
            let x = grid.x(i);
            *v = Vector12::from_fn(|j, _| if j < 6 { self.minus(j, x, t) } else { self.plus(j - 6, x, t) });
        }
        s
    }
}

/// `cos⁴` bump of unit height on `[a, b]`.
pub fn bump(x: f64, a: f64, b: f64) -> f64 {
    if x <= a || x >= b {
        0.0
    } else {
        let s = (x - a) / (b - a);
        (std::f64::consts::PI * (s - 0.5)).cos().powi(4)
    }
}

/// Discrete `L¹` norm (trapezoid) of all twelve components.
pub fn l1(values: &[Vector12], h: f64) -> f64 {
    let f: Vec<f64> = values.iter().map(|v| v.abs().sum()).collect();
    beamstab::algebra::trapezoid(&f, h)
}
