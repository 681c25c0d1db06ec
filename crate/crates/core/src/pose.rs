//! Positions and rotations from intrinsic velocities and strains: unit
//! quaternions integrated along `x` at the initial time and then along `t`
//! at every node, centreline positions by quadrature, and the residuals of
//! the equations that the construction does not enforce.

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::algebra::{gradient, gradient_wide, hat, Matrix3, Matrix4, Vector12, Vector3, Vector4};
use crate::model::{Grid, PrecurvedReference, StateField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoseError {
    #[error("quaternion has zero norm")]
    ZeroQuaternion,
    #[error("matrix is not a rotation (defect {defect:e})")]
    NotARotation { defect: f64 },
    #[error("initial quaternion has norm {norm}, expected 1")]
    NonUnitInput { norm: f64 },
    #[error("initial centreline ends {distance:e} away from the clamped position")]
    EndpointMismatch { distance: f64 },
    #[error("invalid state lattice: {0}")]
    Lattice(String),
}

/// Samples in the difference stencil of `residual_r`.
const RESIDUAL_STENCIL: usize = 7;

/// Rotation and position fields on a space-time lattice, indexed
/// `[time][node]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseField {
    pub grid: Grid,
    pub times: Vec<f64>,
    pub quaternions: Vec<Vec<Vector4>>,
    pub rotations: Vec<Vec<Matrix3>>,
    pub positions: Vec<Vec<Vector3>>,
    /// Per time, `max_x |∂_x q − 𝒰_b(y₄ + Υ_c) q|`.
    pub residual_r: Vec<f64>,
    /// Per time, `max_x |∂_x(R y₁) − ∂_t(R(y₃ + e₁))|`.
    pub residual_p: Vec<f64>,
    /// Per time, `max_x |p − p₂|` with `p₂` integrated in `x` from the
    /// clamped end.
    pub route_gap: Vec<f64>,
    /// `max | |q| − 1 |` over the lattice.
    pub norm_defect: f64,
}

/// `R = (q₀² − |q|²) I + 2 q qᵀ + 2 q₀ q̂`, after normalising `q`.
pub fn rotation_from_quaternion(q: &Vector4) -> Result<Matrix3, PoseError> {
    let n = q.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(PoseError::ZeroQuaternion);
    }
    let q = q / n;
    let (q0, v) = (q[0], Vector3::new(q[1], q[2], q[3]));
    Ok(Matrix3::identity() * (q0 * q0 - v.dot(&v)) + 2.0 * v * v.transpose() + 2.0 * q0 * hat(&v))
}

/// Unit quaternion of a rotation. Picks the largest of the trace and the
/// diagonal entries as pivot, then fixes the sign by `q₀ ≥ 0` (first nonzero
/// component positive when `q₀ = 0`).
pub fn quaternion_from_rotation(r: &Matrix3) -> Result<Vector4, PoseError> {
    let defect = (r.transpose() * r - Matrix3::identity()).amax().max((r.determinant() - 1.0).abs());
    if !(defect <= 1e-8) {
        return Err(PoseError::NotARotation { defect });
    }
    let tr = r.trace();
    let pivots = [tr, r[(0, 0)], r[(1, 1)], r[(2, 2)]];
    let k = (0..4).fold(0, |best, i| if pivots[i] > pivots[best] { i } else { best });
    let q = match k {
        0 => {
            let q0 = 0.5 * (1.0 + tr).sqrt();
            let f = 0.25 / q0;
            Vector4::new(q0, f * (r[(2, 1)] - r[(1, 2)]), f * (r[(0, 2)] - r[(2, 0)]), f * (r[(1, 0)] - r[(0, 1)]))
        }
        1 => {
            let q1 = 0.5 * (1.0 + 2.0 * r[(0, 0)] - tr).sqrt();
            let f = 0.25 / q1;
            Vector4::new(f * (r[(2, 1)] - r[(1, 2)]), q1, f * (r[(0, 1)] + r[(1, 0)]), f * (r[(0, 2)] + r[(2, 0)]))
        }
        2 => {
            let q2 = 0.5 * (1.0 + 2.0 * r[(1, 1)] - tr).sqrt();
            let f = 0.25 / q2;
            Vector4::new(f * (r[(0, 2)] - r[(2, 0)]), f * (r[(0, 1)] + r[(1, 0)]), q2, f * (r[(1, 2)] + r[(2, 1)]))
        }
        _ => {
            let q3 = 0.5 * (1.0 + 2.0 * r[(2, 2)] - tr).sqrt();
            let f = 0.25 / q3;
            Vector4::new(f * (r[(1, 0)] - r[(0, 1)]), f * (r[(0, 2)] + r[(2, 0)]), f * (r[(1, 2)] + r[(2, 1)]), q3)
        }
    };
    let q = q.normalize();
    let lead = q.iter().copied().find(|c| *c != 0.0).unwrap_or(1.0);
    Ok(if q[0] < 0.0 || (q[0] == 0.0 && lead < 0.0) { -q } else { q })
}

/// `𝒰(v) = ½ [0, −vᵀ; v, v̂]`.
pub fn umap(v: &Vector3) -> Matrix4 {
    let mut u = Matrix4::zeros();
    let vh = hat(v);
    for i in 0..3 {
        u[(0, i + 1)] = -0.5 * v[i];
        u[(i + 1, 0)] = 0.5 * v[i];
        for j in 0..3 {
            u[(i + 1, j + 1)] = 0.5 * vh[(i, j)];
        }
    }
    u
}

fn part(y: &Vector12, k: usize) -> Vector3 {
    Vector3::new(y[3 * k], y[3 * k + 1], y[3 * k + 2])
}

/// `½ [0, −vᵀ; v, −v̂]`, the generator for which `q′ = 𝒰_b(v) q` is
/// equivalent to `R′ = R v̂` under [`rotation_from_quaternion`]. With
/// [`umap`] in its place the parametrised rotation instead satisfies
/// `R′ = v̂ R`.
pub fn umap_body(v: &Vector3) -> Matrix4 {
    let mut u = umap(v);
    for i in 1..4 {
        for j in 1..4 {
            u[(i, j)] = -u[(i, j)];
        }
    }
    u
}

/// One RK4 step of `q′ = 𝒰(f) q` with `f` linear between `f0` and `f1`.
fn rk4(q: &Vector4, f0: &Vector3, f1: &Vector3, step: f64) -> Vector4 {
    let (u0, um, u1) = (umap_body(f0), umap_body(&(0.5 * (f0 + f1))), umap_body(f1));
    let k1 = u0 * q;
    let k2 = um * (q + 0.5 * step * k1);
    let k3 = um * (q + 0.5 * step * k2);
    let k4 = u1 * (q + step * k3);
    q + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

fn uniform_step(times: &[f64]) -> Result<f64, PoseError> {
    if times.len() < 3 {
        return Err(PoseError::Lattice(format!("need at least 3 time records, got {}", times.len())));
    }
    let dt = times[1] - times[0];
    let uniform = times.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.abs());
    if !(dt > 0.0 && uniform) {
        return Err(PoseError::Lattice("time records must be uniformly spaced and increasing".into()));
    }
    Ok(dt)
}

/// Values of each state, which must be physical and on the reference grid.
fn physical_values(states: &[StateField], reference: &PrecurvedReference) -> Result<Vec<Vec<Vector12>>, PoseError> {
    if let Some(s) = states.iter().find(|s| s.grid != reference.grid) {
        return Err(PoseError::Lattice(format!("state at t = {} is on a different grid", s.time)));
    }
    states
        .iter()
        .map(|s| match s.repr {
            crate::model::Representation::Physical => Ok(s.values.clone()),
            crate::model::Representation::Diagonal => {
                Err(PoseError::Lattice("states must be in physical variables".into()))
            }
        })
        .collect()
}

/// Solves `∂_t q = 𝒰_b(y₂) q`, `∂_x q = 𝒰_b(y₄ + Υ_c) q`, `q(ℓ, 0) = q_in`,
/// i.e. `∂_t R = R ŷ₂`, `∂_x R = R (ŷ₄ + Υ̂_c)`:
/// RK4 along `x` from `ℓ` at the first time, then RK4 along `t` at every
/// node. The `x` equation is audited afterwards in `residual_r`. Positions
/// are left at zero.
pub fn reconstruct_rotation(
    states: &[StateField],
    reference: &PrecurvedReference,
    q_in: &Vector4,
    renormalize: bool,
) -> Result<PoseField, PoseError> {
    let norm = q_in.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(PoseError::NonUnitInput { norm });
    }
    let times: Vec<f64> = states.iter().map(|s| s.time).collect();
    let dt = uniform_step(&times)?;
    let y = physical_values(states, reference)?;
    let grid = reference.grid;
    let (nx, nt, h) = (grid.nodes(), times.len(), grid.dx());
    let fix = |q: Vector4| if renormalize { q.normalize() } else { q };

    let x_gen: Vec<Vec<Vector3>> =
        y.iter().map(|row| row.iter().zip(&reference.curvature).map(|(v, c)| part(v, 3) + c).collect()).collect();

    let mut first = vec![Vector4::zeros(); nx];
    first[nx - 1] = *q_in;
    for i in (0..nx - 1).rev() {
        first[i] = fix(rk4(&first[i + 1], &x_gen[0][i + 1], &x_gen[0][i], -h));
    }

    let columns: Vec<Vec<Vector4>> = (0..nx)
        .into_par_iter()
        .map(|i| {
            let mut col = Vec::with_capacity(nt);
            col.push(first[i]);
            for t in 1..nt {
                let next = rk4(&col[t - 1], &part(&y[t - 1][i], 1), &part(&y[t][i], 1), dt);
                col.push(fix(next));
            }
            col
        })
        .collect();
    let quaternions: Vec<Vec<Vector4>> = (0..nt).map(|t| (0..nx).map(|i| columns[i][t]).collect()).collect();
    let rotations = quaternions
        .iter()
        .map(|row| row.iter().map(rotation_from_quaternion).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    let residual_r = quaternions
        .iter()
        .zip(&x_gen)
        .map(|(row, gen)| {
            gradient_wide(row, h, RESIDUAL_STENCIL)
                .iter()
                .zip(row.iter().zip(gen))
                .map(|(dq, (q, f))| (dq - umap_body(f) * q).norm())
                .fold(0.0, f64::max)
        })
        .collect();
    let norm_defect = quaternions.iter().flatten().map(|q| (q.norm() - 1.0).abs()).fold(0.0, f64::max);
    Ok(PoseField {
        grid,
        times,
        quaternions,
        rotations,
        positions: vec![vec![Vector3::zeros(); nx]; nt],
        residual_r,
        residual_p: vec![0.0; nt],
        route_gap: vec![0.0; nt],
        norm_defect,
    })
}

/// Cumulative trapezoid integral of `f` from the last sample, `∫_{x_i}^{x_N}`.
fn integral_to_end(f: &[Vector3], h: f64) -> Vec<Vector3> {
    let mut out = vec![Vector3::zeros(); f.len()];
    for i in (0..f.len() - 1).rev() {
        out[i] = out[i + 1] + 0.5 * h * (f[i] + f[i + 1]);
    }
    out
}

/// Initial centreline consistent with `∂_x p = R (y₃ + e₁)` at the first
/// record and `p(ℓ) = h_p`.
pub fn initial_centerline(pose: &PoseField, states: &[StateField], h_p: &Vector3) -> Vec<Vector3> {
    let tangent: Vec<Vector3> = pose.rotations[0]
        .iter()
        .zip(&states[0].values)
        .map(|(r, y)| r * (part(y, 2) + Vector3::x()))
        .collect();
    integral_to_end(&tangent, pose.grid.dx()).into_iter().map(|v| h_p - v).collect()
}

/// Fills `positions` by trapezoid quadrature of `∂_t p = R y₁` from `p0`,
/// together with `residual_p` and the gap to the `x`-quadrature route
/// `p₂ = h_p − ∫_x^ℓ R (y₃ + e₁)`.
pub fn reconstruct_centerline(
    pose: &mut PoseField,
    states: &[StateField],
    p0: &[Vector3],
    h_p: &Vector3,
) -> Result<(), PoseError> {
    let (nt, nx) = (pose.times.len(), pose.grid.nodes());
    if states.len() != nt || p0.len() != nx {
        return Err(PoseError::Lattice("pose, states and initial centreline sizes differ".into()));
    }
    let distance = (p0[nx - 1] - h_p).norm();
    if distance > 1e-10 {
        return Err(PoseError::EndpointMismatch { distance });
    }
    let dt = uniform_step(&pose.times)?;
    let h = pose.grid.dx();
    let velocity: Vec<Vec<Vector3>> = (0..nt)
        .map(|t| (0..nx).map(|i| pose.rotations[t][i] * part(&states[t].values[i], 0)).collect())
        .collect();
    let tangent: Vec<Vec<Vector3>> = (0..nt)
        .map(|t| {
            (0..nx)
                .map(|i| pose.rotations[t][i] * (part(&states[t].values[i], 2) + Vector3::x()))
                .collect()
        })
        .collect();

    pose.positions[0] = p0.to_vec();
    for t in 1..nt {
        for i in 0..nx {
            pose.positions[t][i] = pose.positions[t - 1][i] + 0.5 * dt * (velocity[t - 1][i] + velocity[t][i]);
        }
    }

    let mut dt_tangent = vec![vec![Vector3::zeros(); nx]; nt];
    for i in 0..nx {
        let col: Vec<Vector3> = (0..nt).map(|t| tangent[t][i]).collect();
        for (t, d) in gradient(&col, dt).into_iter().enumerate() {
            dt_tangent[t][i] = d;
        }
    }
    for t in 0..nt {
        let dx_velocity = gradient(&velocity[t], h);
        pose.residual_p[t] =
            dx_velocity.iter().zip(&dt_tangent[t]).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let along = integral_to_end(&tangent[t], h);
        pose.route_gap[t] = (0..nx)
            .map(|i| (pose.positions[t][i] - (h_p - along[i])).norm())
            .fold(0.0, f64::max);
    }
    Ok(())
}

/// Per time, `sup_x (|R y₁| + ‖R ŷ₂‖ + |y₃| + |y₄|)`, the spectral norm of
/// `R ŷ₂` being `|y₂|`.
pub fn decay_observable(pose: &PoseField, states: &[StateField]) -> Vec<f64> {
    states
        .iter()
        .zip(&pose.rotations)
        .map(|(s, rot)| {
            s.values
                .iter()
                .zip(rot)
                .map(|(y, r)| {
                    (r * part(y, 0)).norm()
                        + (r * hat(&part(y, 1))).norm() / std::f64::consts::SQRT_2
                        + part(y, 2).norm()
                        + part(y, 3).norm()
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

impl PoseField {
    /// Snapshot at time index `t`: `x, p1..p3, q0..q3`.
    pub fn snapshot_csv(&self, t: usize) -> String {
        let mut out = format!("# t = {:.16e}\nx,p1,p2,p3,q0,q1,q2,q3\n", self.times[t]);
        for i in 0..self.grid.nodes() {
            let _ = write!(out, "{:.16e}", self.grid.x(i));
            for v in self.positions[t][i].iter().chain(self.quaternions[t][i].iter()) {
                let _ = write!(out, ",{v:.16e}");
            }
            out.push('\n');
        }
        out
    }

    /// `t, residualR, residualP, route_gap, observable` per record.
    pub fn residuals_csv(&self, observable: &[f64]) -> String {
        let mut out = String::from("t,residualR,residualP,route_gap,observable\n");
        for t in 0..self.times.len() {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[t],
                self.residual_r[t],
                self.residual_p[t],
                self.route_gap[t],
                observable.get(t).copied().unwrap_or(f64::NAN)
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::BeamMatrices;
    use crate::model::{curved_reference, straight_reference, Representation};
    use crate::presets;
    use proptest::prelude::*;

    fn axis_rotation(axis: usize, angle: f64) -> Matrix3 {
        let mut u = Vector3::zeros();
        u[axis] = angle;
        nalgebra::Rotation3::new(u).into_inner()
    }

    fn still(grid: Grid, records: usize, dt: f64) -> Vec<StateField> {
        (0..records)
            .map(|k| {
                let mut s = StateField::zeros(grid, Representation::Physical);
                s.time = k as f64 * dt;
                s
            })
            .collect()
    }

    #[test]
    fn quaternion_examples() {
        assert_eq!(rotation_from_quaternion(&Vector4::new(1.0, 0.0, 0.0, 0.0)).unwrap(), Matrix3::identity());
        let theta: f64 = 0.7;
        let q = Vector4::new((theta / 2.0).cos(), (theta / 2.0).sin(), 0.0, 0.0);
        let r = rotation_from_quaternion(&q).unwrap();
        assert!((r - axis_rotation(0, theta)).amax() < 1e-15);
        assert_eq!(rotation_from_quaternion(&-q).unwrap(), r);
        assert_eq!(rotation_from_quaternion(&Vector4::zeros()), Err(PoseError::ZeroQuaternion));

        assert_eq!(quaternion_from_rotation(&Matrix3::identity()).unwrap(), Vector4::new(1.0, 0.0, 0.0, 0.0));
        let half_turn = Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, 1.0));
        assert_eq!(quaternion_from_rotation(&half_turn).unwrap(), Vector4::new(0.0, 0.0, 0.0, 1.0));
        assert!(matches!(
            quaternion_from_rotation(&(2.0 * Matrix3::identity())),
            Err(PoseError::NotARotation { .. })
        ));
    }

    #[test]
    fn umap_examples() {
        assert_eq!(umap(&Vector3::zeros()), Matrix4::zeros());
        let u = umap(&Vector3::new(0.3, -1.2, 2.0));
        assert_eq!(u + u.transpose(), Matrix4::zeros());
    }

    #[test]
    fn generators_act_on_opposite_sides() {
        let q = Vector4::new(0.5, 0.3, -0.6, 0.4).normalize();
        let f = Vector3::new(0.3, -0.7, 0.2);
        let r = rotation_from_quaternion(&q).unwrap();
        let e = 1e-6;
        let along = |u: Matrix4| {
            let dq = u * q;
            (rotation_from_quaternion(&(q + e * dq)).unwrap() - rotation_from_quaternion(&(q - e * dq)).unwrap()) / (2.0 * e)
        };
        assert!((along(umap_body(&f)) - r * hat(&f)).amax() < 1e-8);
        assert!((along(umap(&f)) - hat(&f) * r).amax() < 1e-8);
    }

    proptest! {
        #[test]
        fn quaternion_round_trip(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0, d in -1.0f64..1.0) {
            let q = Vector4::new(a, b, c, d);
            prop_assume!(q.norm() > 1e-3);
            let r = rotation_from_quaternion(&q).unwrap();
            prop_assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-14);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-14);
            let back = quaternion_from_rotation(&r).unwrap();
            prop_assert!(back[0] >= 0.0);
            prop_assert!((rotation_from_quaternion(&back).unwrap() - r).amax() < 1e-10);
            let qn = q.normalize();
            prop_assert!((back - qn).amax() < 1e-10 || (back + qn).amax() < 1e-10);
        }

        #[test]
        fn umap_preserves_norm(v in proptest::array::uniform3(-5.0f64..5.0), q in proptest::array::uniform4(-1.0f64..1.0)) {
            let q = Vector4::from(q);
            for u in [umap(&Vector3::from(v)), umap_body(&Vector3::from(v))] {
                prop_assert!(q.dot(&(u * q)).abs() <= 1e-14 * (1.0 + q.norm_squared()));
            }
        }
    }

    #[test]
    fn straight_beam_at_rest() {
        let m = BeamMatrices::new(&presets::toy_params()).unwrap();
        let r = straight_reference(&m, 16).unwrap();
        let states = still(r.grid, 5, 0.1);
        let mut pose = reconstruct_rotation(&states, &r, &Vector4::new(1.0, 0.0, 0.0, 0.0), true).unwrap();
        assert!(pose.quaternions.iter().flatten().all(|q| *q == Vector4::new(1.0, 0.0, 0.0, 0.0)));
        assert!(pose.rotations.iter().flatten().all(|r| *r == Matrix3::identity()));
        let h_p = Vector3::new(1.0, 0.0, 0.0);
        let p0 = initial_centerline(&pose, &states, &h_p);
        reconstruct_centerline(&mut pose, &states, &p0, &h_p).unwrap();
        for row in &pose.positions {
            for (i, p) in row.iter().enumerate() {
                assert!((p - Vector3::new(r.grid.x(i), 0.0, 0.0)).amax() < 1e-15);
            }
        }
        assert_eq!(decay_observable(&pose, &states), vec![0.0; 5]);
    }

    #[test]
    fn constant_twist_is_axis_rotation() {
        let m = BeamMatrices::new(&presets::toy_params()).unwrap();
        let tau = 0.8;
        let r = curved_reference(&m, 32, |_| Vector3::new(tau, 0.0, 0.0)).unwrap();
        let states = still(r.grid, 4, 0.05);
        let pose = reconstruct_rotation(&states, &r, &Vector4::new(1.0, 0.0, 0.0, 0.0), true).unwrap();
        for (t, row) in pose.rotations.iter().enumerate() {
            for (i, rot) in row.iter().enumerate() {
                let exact = axis_rotation(0, tau * (r.grid.x(i) - r.grid.length));
                assert!((rot - exact).amax() < 1e-8, "t {t} node {i}");
            }
            assert!(pose.residual_r[t] < 1e-8);
        }
    }

    #[test]
    fn negated_input_gives_same_rotations() {
        let m = BeamMatrices::new(&presets::toy_params()).unwrap();
        let r = curved_reference(&m, 16, |x| Vector3::new(0.3, x, -0.5)).unwrap();
        let mut states = still(r.grid, 6, 0.1);
        for (k, s) in states.iter_mut().enumerate() {
            for (i, v) in s.values.iter_mut().enumerate() {
                *v = Vector12::from_fn(|j, _| 0.01 * ((j + 1) as f64 * r.grid.x(i) + k as f64).sin());
            }
        }
        let q_in = quaternion_from_rotation(&r.rotations[16]).unwrap();
        let a = reconstruct_rotation(&states, &r, &q_in, true).unwrap();
        let b = reconstruct_rotation(&states, &r, &-q_in, true).unwrap();
        for (ra, rb) in a.quaternions.iter().flatten().zip(b.quaternions.iter().flatten()) {
            assert_eq!(*ra, -rb);
        }
        for (ra, rb) in a.rotations.iter().flatten().zip(b.rotations.iter().flatten()) {
            assert!((ra - rb).amax() <= 1e-14);
        }
    }

    #[test]
    fn rigid_translation_is_integrated_exactly() {
        let m = BeamMatrices::new(&presets::toy_params()).unwrap();
        let r = straight_reference(&m, 16).unwrap();
        let c = Vector3::new(0.2, -0.1, 0.05);
        let mut states = still(r.grid, 11, 0.1);
        for s in states.iter_mut() {
            for v in s.values.iter_mut() {
                v.fixed_rows_mut::<3>(0).copy_from(&c);
            }
        }
        let mut pose = reconstruct_rotation(&states, &r, &Vector4::new(1.0, 0.0, 0.0, 0.0), true).unwrap();
        let h_p = Vector3::new(1.0, 0.0, 0.0);
        let p0 = initial_centerline(&pose, &states, &h_p);
        reconstruct_centerline(&mut pose, &states, &p0, &h_p).unwrap();
        for (t, row) in pose.positions.iter().enumerate() {
            for (i, p) in row.iter().enumerate() {
                let exact = p0[i] + pose.times[t] * c;
                assert!((p - exact).amax() < 1e-14);
            }
        }
        assert!(pose.residual_p.iter().all(|r| *r < 1e-12));
        let err = reconstruct_centerline(&mut pose, &states, &p0, &Vector3::zeros());
        assert!(matches!(err, Err(PoseError::EndpointMismatch { .. })));
    }

    #[test]
    fn rejects_bad_input() {
        let m = BeamMatrices::new(&presets::toy_params()).unwrap();
        let r = straight_reference(&m, 16).unwrap();
        let states = still(r.grid, 4, 0.1);
        assert!(matches!(
            reconstruct_rotation(&states, &r, &Vector4::new(2.0, 0.0, 0.0, 0.0), true),
            Err(PoseError::NonUnitInput { .. })
        ));
        assert!(matches!(
            reconstruct_rotation(&states[..2], &r, &Vector4::new(1.0, 0.0, 0.0, 0.0), true),
            Err(PoseError::Lattice(_))
        ));
    }

    #[test]
    fn observable_is_rotation_invariant() {
        let m = BeamMatrices::new(&presets::toy_params()).unwrap();
        let r = curved_reference(&m, 16, |_| presets::helical_curvature()).unwrap();
        let mut states = still(r.grid, 4, 0.1);
        for s in states.iter_mut() {
            for (i, v) in s.values.iter_mut().enumerate() {
                *v = Vector12::from_fn(|j, _| 0.01 * (j as f64 - 5.0) * (1.0 + r.grid.x(i)));
            }
        }
        let q_in = quaternion_from_rotation(&r.rotations[16]).unwrap();
        let pose = reconstruct_rotation(&states, &r, &q_in, true).unwrap();
        let obs = decay_observable(&pose, &states);
        for (s, o) in states.iter().zip(&obs) {
            let direct = s
                .values
                .iter()
                .map(|y| part(y, 0).norm() + part(y, 1).norm() + part(y, 2).norm() + part(y, 3).norm())
                .fold(0.0, f64::max);
            assert!((o - direct).abs() < 1e-12 * direct);
        }
    }
}
