//! Energies, Sobolev norms and the Lyapunov functional of a state field.

use crate::algebra::{gradient, trapezoid, Vector12};
use crate::beam::BeamMatrices;
use crate::certificate::LyapunovCertificate;
use crate::model::{g_diag, PrecurvedReference, StateField};

/// `(𝓔^𝒫, 𝓔^𝒟)`: trapezoid quadrature of `⟨y, Q^𝒫 y⟩` and `⟨r, Q^𝒟 r⟩`.
pub fn energies(state: &StateField, m: &BeamMatrices) -> (f64, f64) {
    let h = state.grid.dx();
    let y = state.physical(m);
    let r = state.diagonal(m);
    let ep: Vec<f64> = y.values.iter().map(|v| v.dot(&(m.qp * v))).collect();
    let ed: Vec<f64> = r.values.iter().map(|v| v.dot(&(m.qd * v))).collect();
    (trapezoid(&ep, h), trapezoid(&ed, h))
}

/// Which terms of the right-hand side are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Terms {
    pub lower_order: bool,
    pub nonlinearity: bool,
}

impl Default for Terms {
    fn default() -> Self {
        Self { lower_order: true, nonlinearity: true }
    }
}

/// `∂_t r = −𝐃 ∂_x r − B r + g(r)` with centred differences, one-sided at
/// the ends.
pub fn time_derivative(
    r: &[Vector12],
    h: f64,
    m: &BeamMatrices,
    reference: &PrecurvedReference,
    terms: Terms,
) -> Vec<Vector12> {
    let dr = gradient(r, h);
    r.iter()
        .zip(&dr)
        .enumerate()
        .map(|(i, (ri, dri))| {
            let mut out = -(m.big_d * dri);
            if terms.lower_order {
                out -= reference.b[i] * ri;
            }
            if terms.nonlinearity {
                out += g_diag(m, ri);
            }
            out
        })
        .collect()
}

/// Second time derivative from the differentiated equation applied to
/// `s = ∂_t r`: `−𝐃 ∂_x s − B s + (Jac g)(r) s`.
fn second_time_derivative(
    r: &[Vector12],
    s: &[Vector12],
    h: f64,
    m: &BeamMatrices,
    reference: &PrecurvedReference,
    terms: Terms,
) -> Vec<Vector12> {
    let ds = gradient(s, h);
    (0..r.len())
        .map(|i| {
            let mut out = -(m.big_d * ds[i]);
            if terms.lower_order {
                out -= reference.b[i] * s[i];
            }
            if terms.nonlinearity {
                // Exact for a quadratic map.
                out += g_diag(m, &(r[i] + s[i])) - g_diag(m, &r[i]) - g_diag(m, &s[i]);
            }
            out
        })
        .collect()
}

/// `𝓛 = Σ_{j≤k} ∫⟨∂_t^j r, Q ∂_t^j r⟩`. Without a certificate, `Q = Q^𝒟`.
pub fn lyapunov_value(
    state: &StateField,
    cert: Option<&LyapunovCertificate>,
    m: &BeamMatrices,
    reference: &PrecurvedReference,
    order: u8,
    terms: Terms,
) -> f64 {
    let h = state.grid.dx();
    let r = state.diagonal(m).values;
    let qd = m.qd.diagonal();
    let weight = |i: usize| cert.map_or(qd, |c| c.q[i]);
    let quad = |f: &[Vector12]| {
        let vals: Vec<f64> = f
            .iter()
            .enumerate()
            .map(|(i, v)| v.component_mul(&weight(i)).dot(v))
            .collect();
        trapezoid(&vals, h)
    };
    let mut total = quad(&r);
    if order >= 1 {
        let s = time_derivative(&r, h, m, reference, terms);
        total += quad(&s);
        if order >= 2 {
            total += quad(&second_time_derivative(&r, &s, h, m, reference, terms));
        }
    }
    total
}

/// `‖f‖_{H^k}` for `k = 0, 1, 2` with the same difference stencils as
/// [`time_derivative`].
pub fn sobolev_norm(values: &[Vector12], h: f64, k: u8) -> f64 {
    let sq = |f: &[Vector12]| trapezoid(&f.iter().map(|v| v.norm_squared()).collect::<Vec<_>>(), h);
    let mut total = sq(values);
    if k >= 1 {
        let d1 = gradient(values, h);
        total += sq(&d1);
        if k >= 2 {
            total += sq(&gradient(&d1, h));
        }
    }
    total.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::norm2;
    use crate::model::{straight_reference, Grid, Representation};
    use crate::presets;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn smooth_state(grid: Grid, rng: &mut ChaCha8Rng, amp: f64) -> StateField {
        let coeffs: Vec<[f64; 3]> = (0..12).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect();
        let mut s = StateField::zeros(grid, Representation::Physical);
        for (i, v) in s.values.iter_mut().enumerate() {
            let x = grid.x(i);
            *v = Vector12::from_fn(|k, _| {
                let c = coeffs[k];
                amp * (c[0] + c[1] * (3.0 * x).sin() + c[2] * (5.0 * x).cos())
            });
        }
        s
    }

    #[test]
    fn zero_state() {
        let m = BeamMatrices::new(&presets::toy_params()).unwrap();
        let r = straight_reference(&m, 16).unwrap();
        let s = StateField::zeros(r.grid, Representation::Diagonal);
        assert_eq!(energies(&s, &m), (0.0, 0.0));
        assert_eq!(lyapunov_value(&s, None, &m, &r, 2, Terms::default()), 0.0);
    }

    #[test]
    fn physical_and_diagonal_energies_agree() {
        let m = BeamMatrices::new(&presets::steel_params()).unwrap();
        let grid = Grid::new(1.0, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = smooth_state(grid, &mut rng, 1e-3);
        let (ep, ed) = energies(&s, &m);
        assert!((ep - ed).abs() <= 1e-12 * ep);
    }

    #[test]
    fn constant_unit_velocity() {
        let m = BeamMatrices::new(&presets::toy_params()).unwrap();
        let grid = Grid::new(1.0, 10).unwrap();
        let mut s = StateField::zeros(grid, Representation::Physical);
        for v in s.values.iter_mut() {
            v[0] = 1.0;
        }
        let p = m.params;
        let (ep, _) = energies(&s, &m);
        assert!((ep - p.rho * p.area * p.length).abs() < 1e-15);
    }

    #[test]
    fn lyapunov_is_equivalent_to_h1() {
        let m = BeamMatrices::new(&presets::toy_params()).unwrap();
        let r = straight_reference(&m, 128).unwrap();
        let h = r.grid.dx();
        let qd = m.qd.diagonal();
        let (qmin, qmax) = (qd.min(), qd.max());
        let d = m.d.diagonal();
        let (dmin, dmax) = (d.min(), d.max());
        let b = norm2(&r.b[0]);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let s = smooth_state(r.grid, &mut rng, 1e-3).diagonal(&m);
            let lyap = lyapunov_value(&s, None, &m, &r, 1, Terms::default());
            let h1 = sobolev_norm(&s.values, h, 1).powi(2);
            let l2 = sobolev_norm(&s.values, h, 0).powi(2);
            let g: Vec<Vector12> = s.values.iter().map(|v| g_diag(&m, v)).collect();
            let g2 = sobolev_norm(&g, h, 0).powi(2);
            let upper = qmax * (l2 + 3.0 * (dmax * dmax * (h1 - l2) + b * b * l2 + g2));
            assert!(lyap <= upper);
            let lower_h1 = (1.0 + 3.0 * b * b / (dmin * dmin)) * lyap / qmin + 3.0 * g2 / (dmin * dmin);
            assert!(h1 <= lower_h1);
        }
    }

    #[test]
    fn sobolev_norm_of_linear_profile() {
        let grid = Grid::new(1.0, 64).unwrap();
        let f: Vec<Vector12> = (0..=64).map(|i| Vector12::repeat(grid.x(i))).collect();
        // ∫x² = 1/3 and ∫1 = 1 per component; trapezoid error O(h²).
        let n1 = sobolev_norm(&f, grid.dx(), 1);
        assert!((n1 * n1 - 12.0 * (1.0 / 3.0 + 1.0)).abs() < 1e-3);
        let n2 = sobolev_norm(&f, grid.dx(), 2);
        assert!((n2 - n1).abs() < 1e-10);
    }
}
