//! Coefficients of the intrinsic beam system in physical and diagonal
//! variables: the precurved reference and its lower-order coupling, the
//! quadratic nonlinearity, the change of variables `r = L y` and the map from
//! a pose field (positions and rotations) to velocities and strains.

use std::fmt::Write as _;
use thiserror::Error;

use crate::algebra::{
    blocks, gradient, hat, vee, Matrix12, Matrix3, Matrix6, Vector12, Vector3,
};
use crate::beam::BeamMatrices;
use crate::pose::PoseField;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("grid needs at least 2 cells, got {0}")]
    GridTooSmall(usize),
    #[error("curvature is not finite at x = {x}")]
    NonFiniteCurvature { x: f64 },
    #[error("state is in {found:?} variables, expected {expected:?}")]
    Representation { expected: Representation, found: Representation },
    #[error("rotation sample at node {node}, time index {time} is not orthogonal (defect {defect:.3e})")]
    NonOrthogonal { node: usize, time: usize, defect: f64 },
    #[error("pose lattice needs uniform time samples and at least 3 records")]
    BadTimeLattice,
    #[error("reference table: {0}")]
    Table(String),
}

/// Uniform grid of `cells + 1` nodes on `[0, length]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub length: f64,
    pub cells: usize,
}

impl Grid {
    pub fn new(length: f64, cells: usize) -> Result<Self, ModelError> {
        if cells < 2 {
            return Err(ModelError::GridTooSmall(cells));
        }
        Ok(Self { length, cells })
    }

    pub fn nodes(&self) -> usize {
        self.cells + 1
    }

    pub fn dx(&self) -> f64 {
        self.length / self.cells as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.cells {
            self.length
        } else {
            i as f64 * self.dx()
        }
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.nodes()).map(|i| self.x(i)).collect()
    }
}

/// Initial strain matrix `𝐄 = [Υ̂_c 0; ê₁ Υ̂_c]`.
pub fn strain_matrix(curvature: &Vector3) -> Matrix6 {
    let k = hat(curvature);
    let mut e = Matrix6::zeros();
    e.fixed_view_mut::<3, 3>(0, 0).copy_from(&k);
    e.fixed_view_mut::<3, 3>(3, 3).copy_from(&k);
    e.fixed_view_mut::<3, 3>(3, 0).copy_from(&hat(&Vector3::x()));
    e
}

/// Lower-order coupling in physical variables, `B̄ = [0 −𝐌⁻¹𝐄𝐂⁻¹; 𝐄ᵀ 0]`.
pub fn assemble_bbar(m: &BeamMatrices, e: &Matrix6) -> Matrix12 {
    let m_inv = Matrix6::from_diagonal(&m.mass.diagonal().map(|v| 1.0 / v));
    let c_inv = Matrix6::from_diagonal(&m.flex.diagonal().map(|v| 1.0 / v));
    let zero = Matrix6::zeros();
    blocks(&zero, &(-(m_inv * e * c_inv)), &e.transpose(), &zero)
}

/// Lower-order coupling in diagonal variables, `B = L B̄ L⁻¹`.
pub fn diagonal_coupling(m: &BeamMatrices, bbar: &Matrix12) -> Matrix12 {
    m.l * bbar * m.l_inv
}

/// `ℬ = ¼ 𝐄 D 𝐌`. The energy matrix acts on the diagonal coupling as
/// `Q^𝒟 B = [−(ℬ−ℬᵀ) ℬ+ℬᵀ; −(ℬ+ℬᵀ) ℬ−ℬᵀ]` with this `ℬ`.
pub fn energy_coupling(m: &BeamMatrices, e: &Matrix6) -> Matrix6 {
    0.25 * e * m.d * m.mass
}

/// Expected `Q^𝒟 B` assembled from [`energy_coupling`].
pub fn skew_product_form(m: &BeamMatrices, e: &Matrix6) -> Matrix12 {
    let b = energy_coupling(m, e);
    let minus = b - b.transpose();
    let plus = b + b.transpose();
    blocks(&(-minus), &plus, &(-plus), &minus)
}

/// Reference configuration sampled at grid nodes.
#[derive(Debug, Clone)]
pub struct PrecurvedReference {
    pub grid: Grid,
    /// `R(x)`.
    pub rotations: Vec<Matrix3>,
    /// `Υ_c(x) = vec(Rᵀ dR/dx)`.
    pub curvature: Vec<Vector3>,
    /// `𝐄(x)`.
    pub strain: Vec<Matrix6>,
    pub bbar: Vec<Matrix12>,
    pub b: Vec<Matrix12>,
}

impl PrecurvedReference {
    fn from_samples(
        m: &BeamMatrices,
        grid: Grid,
        rotations: Vec<Matrix3>,
        curvature: Vec<Vector3>,
    ) -> Self {
        let strain: Vec<Matrix6> = curvature.iter().map(strain_matrix).collect();
        let bbar: Vec<Matrix12> = strain.iter().map(|e| assemble_bbar(m, e)).collect();
        let b = bbar.iter().map(|bb| diagonal_coupling(m, bb)).collect();
        Self { grid, rotations, curvature, strain, bbar, b }
    }

    /// Whether every curvature sample vanishes.
    pub fn is_straight(&self) -> bool {
        self.curvature.iter().all(|k| *k == Vector3::zeros())
    }

    /// Reference centreline `p(x) = ∫₀ˣ R e₁`, trapezoid rule from `p(0) = 0`.
    pub fn centerline(&self) -> Vec<Vector3> {
        let h = self.grid.dx();
        let mut p = vec![Vector3::zeros()];
        for w in self.rotations.windows(2) {
            let last = *p.last().unwrap();
            p.push(last + 0.5 * h * (w[0].column(0) + w[1].column(0)));
        }
        p
    }

    /// CSV table `x, R11..R33 (row-major), U1..U3`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,R11,R12,R13,R21,R22,R23,R31,R32,R33,U1,U2,U3\n");
        for i in 0..self.grid.nodes() {
            let _ = write!(out, "{:.16e}", self.grid.x(i));
            let r = &self.rotations[i];
            for row in 0..3 {
                for col in 0..3 {
                    let _ = write!(out, ",{:.16e}", r[(row, col)]);
                }
            }
            for k in self.curvature[i].iter() {
                let _ = write!(out, ",{k:.16e}");
            }
            out.push('\n');
        }
        out
    }

    /// Reads a table written by [`Self::to_csv`]; coefficients are
    /// reassembled for `m`.
    pub fn from_csv(m: &BeamMatrices, text: &str) -> Result<Self, ModelError> {
        let mut xs = Vec::new();
        let mut rotations = Vec::new();
        let mut curvature = Vec::new();
        for (lineno, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| ModelError::Table(format!("line {}: {e}", lineno + 1)))?;
            if vals.len() != 13 {
                return Err(ModelError::Table(format!(
                    "line {}: expected 13 columns, got {}",
                    lineno + 1,
                    vals.len()
                )));
            }
            xs.push(vals[0]);
            rotations.push(Matrix3::from_row_slice(&vals[1..10]));
            curvature.push(Vector3::new(vals[10], vals[11], vals[12]));
        }
        if xs.len() < 3 {
            return Err(ModelError::Table("need at least 3 rows".into()));
        }
        let grid = Grid::new(*xs.last().unwrap(), xs.len() - 1)?;
        let h = grid.dx();
        for (i, x) in xs.iter().enumerate() {
            if (x - grid.x(i)).abs() > 1e-9 * grid.length.max(h) {
                return Err(ModelError::Table(format!("row {} is not on a uniform grid", i + 1)));
            }
        }
        Ok(Self::from_samples(m, grid, rotations, curvature))
    }
}

/// Straight untwisted reference: `R ≡ I`, `Υ_c ≡ 0`.
pub fn straight_reference(m: &BeamMatrices, cells: usize) -> Result<PrecurvedReference, ModelError> {
    let grid = Grid::new(m.params.length, cells)?;
    let n = grid.nodes();
    Ok(PrecurvedReference::from_samples(
        m,
        grid,
        vec![Matrix3::identity(); n],
        vec![Vector3::zeros(); n],
    ))
}

/// Curved reference from a curvature profile `x ↦ Υ_c(x)`. The rotation field
/// solves `dR/dx = R Υ̂_c` from `R(0) = I` with classical RK4 steps between
/// nodes, each followed by a polar projection back onto SO(3).
pub fn curved_reference<F>(
    m: &BeamMatrices,
    cells: usize,
    curvature: F,
) -> Result<PrecurvedReference, ModelError>
where
    F: Fn(f64) -> Vector3,
{
    let grid = Grid::new(m.params.length, cells)?;
    let h = grid.dx();
    let sample = |x: f64| {
        let k = curvature(x);
        if k.iter().all(|v| v.is_finite()) {
            Ok(k)
        } else {
            Err(ModelError::NonFiniteCurvature { x })
        }
    };
    let mut rotations = Vec::with_capacity(grid.nodes());
    let mut samples = Vec::with_capacity(grid.nodes());
    let mut r = Matrix3::identity();
    rotations.push(r);
    samples.push(sample(0.0)?);
    for i in 0..cells {
        let x = grid.x(i);
        let k0 = hat(&samples[i]);
        let kh = hat(&sample(x + 0.5 * h)?);
        let k1 = sample(grid.x(i + 1))?;
        let s1 = r * k0;
        let s2 = (r + 0.5 * h * s1) * kh;
        let s3 = (r + 0.5 * h * s2) * kh;
        let s4 = (r + h * s3) * hat(&k1);
        r = polar_projection(&(r + h / 6.0 * (s1 + 2.0 * s2 + 2.0 * s3 + s4)));
        rotations.push(r);
        samples.push(k1);
    }
    Ok(PrecurvedReference::from_samples(m, grid, rotations, samples))
}

/// Closest rotation matrix in the Frobenius norm.
pub fn polar_projection(a: &Matrix3) -> Matrix3 {
    let svd = a.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        r = u * vt;
    }
    r
}

fn split(y: &Vector12) -> [Vector3; 4] {
    std::array::from_fn(|k| Vector3::new(y[3 * k], y[3 * k + 1], y[3 * k + 2]))
}

fn join(parts: [Vector3; 4]) -> Vector12 {
    Vector12::from_fn(|i, _| parts[i / 3][i % 3])
}

/// Quadratic nonlinearity of the physical system, `ḡ(y) = 𝒢̄(y) y`.
pub fn gbar(m: &BeamMatrices, y: &Vector12) -> Vector12 {
    let p = &m.params;
    let [y1, y2, y3, y4] = split(y);
    let s1y3 = m.s1 * y3;
    let s2y4 = m.s2 * y4;
    let ra = p.rho * p.area;
    let g1 = -(ra * y2.cross(&y1) + s1y3.cross(&y4)) / ra;
    let t2 = p.rho * y2.cross(&(m.j * y2)) + s1y3.cross(&y3) + s2y4.cross(&y4);
    let g2 = -Vector3::from_fn(|i, _| t2[i] / (p.rho * m.j[(i, i)]));
    let g3 = -(y2.cross(&y3) + y1.cross(&y4));
    let g4 = -y2.cross(&y4);
    join([g1, g2, g3, g4])
}

/// The matrix `𝒢̄(y)` with `ḡ(y) = 𝒢̄(y) y`.
pub fn gbar_matrix(m: &BeamMatrices, y: &Vector12) -> Matrix12 {
    let p = &m.params;
    let [_, y2, y3, y4] = split(y);
    let y1 = split(y)[0];
    let mut g = Matrix12::zeros();
    let mut put = |r: usize, c: usize, b: Matrix3| g.fixed_view_mut::<3, 3>(3 * r, 3 * c).copy_from(&b);
    put(0, 0, p.rho * p.area * hat(&y2));
    put(0, 3, hat(&(m.s1 * y3)));
    put(1, 1, p.rho * hat(&y2) * m.j);
    put(1, 2, hat(&(m.s1 * y3)));
    put(1, 3, hat(&(m.s2 * y4)));
    put(2, 2, hat(&y2));
    put(2, 3, hat(&y1));
    put(3, 3, hat(&y2));
    let scale = Vector12::from_fn(|i, _| if i < 6 { -1.0 / m.mass[(i, i)] } else { -1.0 });
    Matrix12::from_diagonal(&scale) * g
}

/// Nonlinearity in diagonal variables, `g(r) = L ḡ(L⁻¹ r)`.
pub fn g_diag(m: &BeamMatrices, r: &Vector12) -> Vector12 {
    m.l * gbar(m, &(m.l_inv * r))
}

/// `𝒢(r) = L 𝒢̄(L⁻¹ r) L⁻¹`, so that `g(r) = 𝒢(r) r`.
pub fn g_matrix(m: &BeamMatrices, r: &Vector12) -> Matrix12 {
    m.l * gbar_matrix(m, &(m.l_inv * r)) * m.l_inv
}

/// Weighted row-sum norm `ℛ∞(Λ̃ K Λ̃⁻¹)` of the boundary coupling
/// `K = [0 −I; κ 0]` with `Λ̃ = diag((1+ε)|κ|, I)`. Zero entries of `κ` are
/// replaced by `ε` so the weight stays invertible.
pub fn boundary_weighted_norm(kappa: &Matrix6, eps: f64) -> f64 {
    let id = Matrix6::identity();
    let k = blocks(&Matrix6::zeros(), &(-id), kappa, &Matrix6::zeros());
    let w = Vector12::from_fn(|i, _| {
        if i < 6 {
            ((1.0 + eps) * kappa[(i, i)].abs()).max(eps)
        } else {
            1.0
        }
    });
    let scaled = Matrix12::from_fn(|i, j| w[i] * k[(i, j)] / w[j]);
    crate::algebra::norm_inf(&scaled)
}

/// Default `ε` for [`is_boundary_dissipative`].
pub const DISSIPATIVITY_EPS: f64 = 1e-3;

/// Whether the boundary conditions are dissipative in the weighted row-sum
/// sense for the given `ε` (use [`DISSIPATIVITY_EPS`] unless overridden).
pub fn is_boundary_dissipative(kappa: &Matrix6, eps: f64) -> bool {
    boundary_weighted_norm(kappa, eps) < 1.0
}

/// Whether a state holds physical (`y`) or diagonal (`r = L y`) variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Physical,
    Diagonal,
}

/// Grid samples of the 12-component state at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    pub grid: Grid,
    pub repr: Representation,
    pub values: Vec<Vector12>,
    pub time: f64,
}

impl StateField {
    pub fn zeros(grid: Grid, repr: Representation) -> Self {
        Self { grid, repr, values: vec![Vector12::zeros(); grid.nodes()], time: 0.0 }
    }

    fn expect(&self, repr: Representation) -> Result<(), ModelError> {
        if self.repr == repr {
            Ok(())
        } else {
            Err(ModelError::Representation { expected: repr, found: self.repr })
        }
    }

    fn mapped(&self, repr: Representation, t: &Matrix12) -> Self {
        Self {
            grid: self.grid,
            repr,
            values: self.values.iter().map(|v| t * v).collect(),
            time: self.time,
        }
    }

    pub fn to_diagonal(&self, m: &BeamMatrices) -> Result<Self, ModelError> {
        self.expect(Representation::Physical)?;
        Ok(self.mapped(Representation::Diagonal, &m.l))
    }

    pub fn to_physical(&self, m: &BeamMatrices) -> Result<Self, ModelError> {
        self.expect(Representation::Diagonal)?;
        Ok(self.mapped(Representation::Physical, &m.l_inv))
    }

    /// Same state in physical variables, converting if needed.
    pub fn physical(&self, m: &BeamMatrices) -> Self {
        match self.repr {
            Representation::Physical => self.clone(),
            Representation::Diagonal => self.mapped(Representation::Physical, &m.l_inv),
        }
    }

    /// Same state in diagonal variables, converting if needed.
    pub fn diagonal(&self, m: &BeamMatrices) -> Self {
        match self.repr {
            Representation::Diagonal => self.clone(),
            Representation::Physical => self.mapped(Representation::Diagonal, &m.l),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.amax()).fold(0.0, f64::max)
    }
}

/// Velocities and strains of a pose field, evaluated by finite differences
/// (centred second order inside, one-sided second order at the lattice
/// edges). Returns one physical state per pose time.
pub fn strains_velocities_from_pose(
    pose: &PoseField,
    reference: &PrecurvedReference,
) -> Result<Vec<StateField>, ModelError> {
    let nt = pose.times.len();
    if nt < 3 {
        return Err(ModelError::BadTimeLattice);
    }
    let dt = pose.times[1] - pose.times[0];
    for w in pose.times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1e-300) || dt <= 0.0 {
            return Err(ModelError::BadTimeLattice);
        }
    }
    for (ti, row) in pose.rotations.iter().enumerate() {
        for (i, r) in row.iter().enumerate() {
            let defect = (r.transpose() * r - Matrix3::identity()).amax();
            if defect > 1e-8 {
                return Err(ModelError::NonOrthogonal { node: i, time: ti, defect });
            }
        }
    }
    let grid = pose.grid;
    let nx = grid.nodes();
    let h = grid.dx();

    let dx_r: Vec<Vec<Matrix3>> = pose.rotations.iter().map(|row| gradient(row, h)).collect();
    let dx_p: Vec<Vec<Vector3>> = pose.positions.iter().map(|row| gradient(row, h)).collect();
    let mut dt_r = vec![vec![Matrix3::zeros(); nx]; nt];
    let mut dt_p = vec![vec![Vector3::zeros(); nx]; nt];
    for i in 0..nx {
        let col_r: Vec<Matrix3> = (0..nt).map(|t| pose.rotations[t][i]).collect();
        let col_p: Vec<Vector3> = (0..nt).map(|t| pose.positions[t][i]).collect();
        for (t, (dr, dp)) in gradient(&col_r, dt).into_iter().zip(gradient(&col_p, dt)).enumerate() {
            dt_r[t][i] = dr;
            dt_p[t][i] = dp;
        }
    }

    Ok((0..nt)
        .map(|t| {
            let values = (0..nx)
                .map(|i| {
                    let rt = pose.rotations[t][i].transpose();
                    let v = rt * dt_p[t][i];
                    let w = vee(&(rt * dt_r[t][i]));
                    let gamma = rt * dx_p[t][i] - Vector3::x();
                    let upsilon = vee(&(rt * dx_r[t][i])) - reference.curvature[i];
                    join([v, w, gamma, upsilon])
                })
                .collect();
            StateField { grid, repr: Representation::Physical, values, time: pose.times[t] }
        })
        .collect())
}
