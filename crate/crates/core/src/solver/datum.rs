//! Smooth pseudo-random initial data satisfying the boundary compatibility
//! conditions, and the residual check for given data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{endpoint_derivative, Matrix6, Vector12, Vector6};
use crate::beam::BeamMatrices;
use crate::model::{gbar, PrecurvedReference, Representation, StateField};
use crate::solver::norms::sobolev_norm;

/// Points in the one-sided endpoint derivative used by the order-1 check.
/// Generated data are degree-7 polynomials, for which this is exact.
const ENDPOINT_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompatibilityReport {
    /// `|v⁰(ℓ)|∞`.
    pub velocity_end: f64,
    /// `|𝐂⁻¹s⁰(0) − μ v⁰(0)|∞`.
    pub feedback: f64,
    /// Same residuals for `y¹ = −A ∂_x y⁰ − B̄ y⁰ + ḡ(y⁰)`, when requested.
    pub velocity_end_1: Option<f64>,
    pub feedback_1: Option<f64>,
    /// Magnitudes the residuals are compared with: `max |v|` over the field
    /// and `|𝐂⁻¹s⁰(0)|∞ + |μ v⁰(0)|∞` (order 0), then the same for `y¹`.
    pub scales: [f64; 4],
}

impl CompatibilityReport {
    /// Whether every residual is below `tol` relative to its scale (absolute
    /// when the scale vanishes).
    pub fn holds(&self, tol: f64) -> bool {
        let ok = |res: f64, scale: f64| res <= tol * scale.max(1.0e-300) || res == 0.0;
        ok(self.velocity_end, self.scales[0])
            && ok(self.feedback, self.scales[1])
            && self.velocity_end_1.is_none_or(|r| ok(r, self.scales[2]))
            && self.feedback_1.is_none_or(|r| ok(r, self.scales[3]))
    }

    pub fn max_residual(&self) -> f64 {
        [self.velocity_end, self.feedback, self.velocity_end_1.unwrap_or(0.0), self.feedback_1.unwrap_or(0.0)]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

fn split6(y: &Vector12) -> (Vector6, Vector6) {
    (y.fixed_rows::<6>(0).into_owned(), y.fixed_rows::<6>(6).into_owned())
}

fn join6(v: &Vector6, s: &Vector6) -> Vector12 {
    Vector12::from_fn(|i, _| if i < 6 { v[i] } else { s[i - 6] })
}

fn mu_matrix(m: &BeamMatrices) -> Matrix6 {
    Matrix6::from_diagonal(&Vector6::from_column_slice(&m.mu))
}

/// `y¹ = −A y′ − B̄ y + ḡ(y)` at one point.
fn first_time_derivative(m: &BeamMatrices, bbar: &crate::algebra::Matrix12, y: &Vector12, dy: &Vector12) -> Vector12 {
    -(m.a * dy) - bbar * y + gbar(m, y)
}

/// Residuals of the order-0 (and optionally order-1) compatibility
/// conditions at `x = 0` (feedback) and `x = ℓ` (clamped end).
pub fn check_compatibility(
    y0: &StateField,
    m: &BeamMatrices,
    reference: &PrecurvedReference,
    order: u8,
) -> CompatibilityReport {
    let y = y0.physical(m).values;
    let n = y.len();
    let c_inv = Matrix6::from_diagonal(&m.flex.diagonal().map(|v| 1.0 / v));
    let mu = mu_matrix(m);
    let feedback_terms = |y: &Vector12| {
        let (v, s) = split6(y);
        (c_inv * s, mu * v)
    };
    let v_scale = y.iter().map(|v| v.fixed_rows::<6>(0).amax()).fold(0.0, f64::max);
    let (a0, b0) = feedback_terms(&y[0]);
    let mut report = CompatibilityReport {
        velocity_end: split6(&y[n - 1]).0.amax(),
        feedback: (a0 - b0).amax(),
        velocity_end_1: None,
        feedback_1: None,
        scales: [v_scale, a0.amax() + b0.amax(), 0.0, 0.0],
    };
    if order >= 1 {
        let h = y0.grid.dx();
        let d0 = endpoint_derivative(&y, h, ENDPOINT_POINTS, false);
        let dl = endpoint_derivative(&y, h, ENDPOINT_POINTS, true);
        let y1_0 = first_time_derivative(m, &reference.bbar[0], &y[0], &d0);
        let y1_l = first_time_derivative(m, &reference.bbar[n - 1], &y[n - 1], &dl);
        let (a1, b1) = feedback_terms(&y1_0);
        let v1_l = split6(&y1_l).0;
        report.velocity_end_1 = Some(v1_l.amax());
        report.feedback_1 = Some((a1 - b1).amax());
        // Velocity part of y¹ is dominated by (𝐌𝐂)⁻¹ s′; use its size.
        let mc_inv_ds = (m.mass * m.flex).try_inverse().unwrap() * split6(&dl).1;
        report.scales[2] = mc_inv_ds.amax() + v1_l.amax();
        report.scales[3] = a1.amax() + b1.amax();
    }
    report
}

fn hermite(s: f64) -> [f64; 4] {
    let (s2, s3) = (s * s, s * s * s);
    [2.0 * s3 - 3.0 * s2 + 1.0, s3 - 2.0 * s2 + s, -2.0 * s3 + 3.0 * s2, s3 - s2]
}

/// Random ingredients of a datum before scaling.
struct Ingredients {
    poly: [Vector12; 4],
    v0: Vector6,
    s_end: Vector6,
}

/// Generates a smooth datum with `‖y⁰‖_{H¹} = amplitude` (physical
/// variables). The profile is a degree-3 random polynomial times
/// `(x(ℓ−x))²/(ℓ/2)⁴`, plus cubic Hermite terms that impose the boundary
/// values (order 0) and, for `order = 1`, the boundary slopes required by the
/// first-order conditions. Strain components are scaled by `D⁻¹` so that both
/// characteristic families carry comparable amplitude.
pub fn generate_initial_datum(
    m: &BeamMatrices,
    reference: &PrecurvedReference,
    amplitude: f64,
    seed: u64,
    order: u8,
) -> StateField {
    let grid = reference.grid;
    if amplitude == 0.0 {
        return StateField::zeros(grid, Representation::Physical);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d_inv = m.d.diagonal().map(|v| 1.0 / v);
    let mut draw = |strain: bool| {
        let v = Vector6::from_fn(|_, _| rng.random_range(-1.0..1.0));
        if strain { v.component_mul(&d_inv) } else { v }
    };
    let ing = Ingredients {
        poly: std::array::from_fn(|_| join6(&draw(false), &draw(true))),
        v0: draw(false),
        s_end: draw(true),
    };

    let build = |c: f64| -> StateField {
        let ell = grid.length;
        let cmu = m.flex * mu_matrix(m);
        let y_0 = c * join6(&ing.v0, &(cmu * ing.v0));
        let y_l = c * join6(&Vector6::zeros(), &ing.s_end);
        let (dv0, ds_l) = if order >= 1 {
            let bl = reference.bbar[grid.cells] * y_l;
            let gl = gbar(m, &y_l);
            let ds_l = m.mass * m.flex * (split6(&bl).0 - split6(&gl).0);
            let b0 = reference.bbar[0] * y_0;
            let g0 = gbar(m, &y_0);
            let v1 = -split6(&b0).0 + split6(&g0).0;
            let dv0 = cmu * v1 + split6(&b0).1 - split6(&g0).1;
            (dv0, ds_l)
        } else {
            (Vector6::zeros(), Vector6::zeros())
        };
        let mut out = StateField::zeros(grid, Representation::Physical);
        for (i, val) in out.values.iter_mut().enumerate() {
            let x = grid.x(i);
            let s = x / ell;
            let bump = (s * (1.0 - s)).powi(2) * 16.0;
            let p = &ing.poly;
            let poly = p[0] + p[1] * (2.0 * s - 1.0) + p[2] * (2.0 * s - 1.0).powi(2) + p[3] * (2.0 * s - 1.0).powi(3);
            let [h00, h10, h01, h11] = hermite(s);
            *val = c * bump * poly
                + h00 * y_0
                + h01 * y_l
                + h10 * ell * join6(&dv0, &Vector6::zeros())
                + h11 * ell * join6(&Vector6::zeros(), &ds_l);
        }
        out
    };

    let h = grid.dx();
    let mut c = 1.0;
    for _ in 0..40 {
        let norm = sobolev_norm(&build(c).values, h, 1);
        let next = c * amplitude / norm;
        let done = ((next - c) / c).abs() < 1e-15;
        c = next;
        if done {
            break;
        }
    }
    build(c)
}
