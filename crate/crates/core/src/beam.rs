//! Beam constants and the constant matrices derived from them: mass and
//! flexibility matrices, the characteristic decomposition of the flux
//! matrix, energy matrices and the boundary reflection matrix `κ`.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

use crate::algebra::{blocks, diag3, diag6, Matrix12, Matrix3, Matrix6, Vector6};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("beam parameters must be finite and strictly positive; offending: {}", .fields.join(", "))]
    NonPositive { fields: Vec<String> },
}

/// Physical and geometric constants of a uniform isotropic beam, plus the two
/// boundary feedback gains applied at `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamParams {
    /// Mass density (kg/m³).
    pub rho: f64,
    /// Cross-section area (m²).
    pub area: f64,
    /// Young modulus (Pa).
    pub young: f64,
    /// Shear modulus (Pa).
    pub shear: f64,
    /// Area moments of inertia (m⁴).
    pub i2: f64,
    pub i3: f64,
    /// Polar-moment and shear correction factors.
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    /// Beam length (m).
    pub length: f64,
    /// Translational and rotational feedback gains.
    pub mu1: f64,
    pub mu2: f64,
}

impl BeamParams {
    fn named(&self) -> [(&'static str, f64); 12] {
        [
            ("rho", self.rho),
            ("area", self.area),
            ("young", self.young),
            ("shear", self.shear),
            ("i2", self.i2),
            ("i3", self.i3),
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("length", self.length),
            ("mu1", self.mu1),
            ("mu2", self.mu2),
        ]
    }

    /// Checks every field and reports all offenders at once.
    pub fn validate(&self) -> Result<(), ParamError> {
        self.validate_fields(true)
    }

    fn validate_fields(&self, with_gains: bool) -> Result<(), ParamError> {
        let fields: Vec<String> = self
            .named()
            .iter()
            .filter(|(name, _)| with_gains || !name.starts_with("mu"))
            .filter(|(_, v)| !(v.is_finite() && *v > 0.0))
            .map(|(name, _)| name.to_string())
            .collect();
        if fields.is_empty() {
            Ok(())
        } else {
            Err(ParamError::NonPositive { fields })
        }
    }

    /// Inertia matrix `J = diag((I₂+I₃)k₁, I₂, I₃)`.
    pub fn inertia(&self) -> Matrix3 {
        diag3((self.i2 + self.i3) * self.k1, self.i2, self.i3)
    }

    /// Diagonal of the mass matrix `ρ·diag(a I₃, J)`.
    pub fn mass_diagonal(&self) -> [f64; 6] {
        let j1 = (self.i2 + self.i3) * self.k1;
        let r = self.rho;
        [r * self.area, r * self.area, r * self.area, r * j1, r * self.i2, r * self.i3]
    }

    /// Positive characteristic speeds `λ₇..λ₁₂`.
    pub fn wave_speeds(&self) -> [f64; 6] {
        let s = |modulus: f64| (modulus / self.rho).sqrt();
        let e = s(self.young);
        [e, s(self.k2 * self.shear), s(self.k3 * self.shear), s(self.shear), e, e]
    }

    /// Diagonal of `𝐌D`, the boundary impedances.
    pub fn impedances(&self) -> [f64; 6] {
        let m = self.mass_diagonal();
        let d = self.wave_speeds();
        std::array::from_fn(|i| m[i] * d[i])
    }

    /// Gain vector `μ = diag(μ₁, μ₁, μ₁, μ₂, μ₂, μ₂)`.
    pub fn gains(&self) -> [f64; 6] {
        [self.mu1, self.mu1, self.mu1, self.mu2, self.mu2, self.mu2]
    }
}

/// All constant matrices of the intrinsic model, derived once from
/// [`BeamParams`]. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamMatrices {
    pub params: BeamParams,
    pub j: Matrix3,
    pub s1: Matrix3,
    pub s2: Matrix3,
    /// Mass matrix `𝐌`.
    pub mass: Matrix6,
    /// Flexibility matrix `𝐂`.
    pub flex: Matrix6,
    /// `D = (𝐌𝐂)^{-1/2}`.
    pub d: Matrix6,
    /// `diag(−D, D)`.
    pub big_d: Matrix12,
    pub l: Matrix12,
    pub l_inv: Matrix12,
    /// Flux matrix of the physical system.
    pub a: Matrix12,
    /// Energy matrix in physical variables, `diag(𝐌, 𝐂⁻¹)`.
    pub qp: Matrix12,
    /// Energy matrix in diagonal variables.
    pub qd: Matrix12,
    /// Feedback gains actually applied (diagonal of `μ`).
    pub mu: [f64; 6],
    /// Boundary reflection matrix at `x = 0`.
    pub kappa: Matrix6,
    /// Eigenvalues of the flux matrix, ordered `−D` then `D`.
    pub lambda: [f64; 12],
    /// `diag(𝐌D, 𝐌D)`.
    pub big_lambda: Matrix12,
    /// `max κᵢ²`.
    pub c_kappa: f64,
}

impl BeamMatrices {
    /// Derives every matrix using the gains `μ₁, μ₂` stored in `params`.
    pub fn new(params: &BeamParams) -> Result<Self, ParamError> {
        params.validate()?;
        Self::assemble(params, params.gains())
    }

    /// Derives every matrix with an arbitrary positive diagonal gain `μ`,
    /// e.g. the transparent choice `μ = 𝐌D`. The gains in `params` are
    /// ignored.
    pub fn with_feedback(params: &BeamParams, mu: [f64; 6]) -> Result<Self, ParamError> {
        let mut fields = match params.validate_fields(false) {
            Ok(()) => Vec::new(),
            Err(ParamError::NonPositive { fields }) => fields,
        };
        for (i, m) in mu.iter().enumerate() {
            if !(m.is_finite() && *m > 0.0) {
                fields.push(format!("mu[{i}]"));
            }
        }
        if !fields.is_empty() {
            return Err(ParamError::NonPositive { fields });
        }
        Self::assemble(params, mu)
    }

    fn assemble(p: &BeamParams, mu: [f64; 6]) -> Result<Self, ParamError> {
        let j = p.inertia();
        let s1 = p.area * diag3(p.young, p.k2 * p.shear, p.k3 * p.shear);
        let s2 = j * diag3(p.shear, p.young, p.young);
        let mass = diag6(&p.mass_diagonal());
        let mut stiff = Matrix6::zeros();
        stiff.fixed_view_mut::<3, 3>(0, 0).copy_from(&s1);
        stiff.fixed_view_mut::<3, 3>(3, 3).copy_from(&s2);
        let flex = Matrix6::from_diagonal(&stiff.diagonal().map(|v| 1.0 / v));

        let speeds: Vector6 = (mass * flex).diagonal().map(|v| 1.0 / v.sqrt());
        let d = Matrix6::from_diagonal(&speeds);
        let d_inv = Matrix6::from_diagonal(&speeds.map(|v| 1.0 / v));
        let id = Matrix6::identity();
        let zero = Matrix6::zeros();

        let big_d = blocks(&(-d), &zero, &zero, &d);
        let l = blocks(&id, &d, &id, &(-d));
        let l_inv = 0.5 * blocks(&id, &id, &d_inv, &(-d_inv));
        let mc_inv = Matrix6::from_diagonal(&(mass * flex).diagonal().map(|v| 1.0 / v));
        let a = blocks(&zero, &(-mc_inv), &(-id), &zero);
        let qp = blocks(&mass, &zero, &zero, &stiff);
        let qd = l_inv.transpose() * qp * l_inv;

        let md = mass * d;
        let kappa = Matrix6::from_diagonal(&Vector6::from_fn(|i, _| {
            let b = md[(i, i)];
            (b - mu[i]) / (b + mu[i])
        }));
        let c_kappa = c_kappa_of(&kappa);
        let lambda = std::array::from_fn(|i| if i < 6 { -speeds[i] } else { speeds[i - 6] });
        let big_lambda = blocks(&md, &zero, &zero, &md);

        Ok(Self {
            params: *p,
            j,
            s1,
            s2,
            mass,
            flex,
            d,
            big_d,
            l,
            l_inv,
            a,
            qp,
            qd,
            mu,
            kappa,
            lambda,
            big_lambda,
            c_kappa,
        })
    }

    /// Diagonal entries `𝐌₁..𝐌₆`.
    pub fn mass_diagonal(&self) -> [f64; 6] {
        std::array::from_fn(|i| self.mass[(i, i)])
    }

    pub fn kappa_diagonal(&self) -> [f64; 6] {
        std::array::from_fn(|i| self.kappa[(i, i)])
    }

    /// Largest characteristic speed `λ₇`.
    pub fn max_speed(&self) -> f64 {
        self.lambda[6..].iter().cloned().fold(0.0, f64::max)
    }

    /// Stresses (internal forces and moments) from strains, `F = 𝐂⁻¹ s`.
    pub fn stresses_from_strains(&self, s: &Vector6) -> Vector6 {
        Vector6::from_fn(|i, _| s[i] / self.flex[(i, i)])
    }

    /// Labelled CSV dump of all derived matrices.
    pub fn dump_csv(&self) -> String {
        let mut out = String::new();
        let scalar = |out: &mut String, name: &str, v: f64| {
            let _ = writeln!(out, "{name},{v:.16e}");
        };
        out.push_str("# scalars\nname,value\n");
        scalar(&mut out, "c_kappa", self.c_kappa);
        for (i, l) in self.lambda.iter().enumerate() {
            scalar(&mut out, &format!("lambda{}", i + 1), *l);
        }
        for (i, m) in self.mu.iter().enumerate() {
            scalar(&mut out, &format!("mu{}", i + 1), *m);
        }
        write_block(&mut out, "J", &self.j);
        write_block(&mut out, "S1", &self.s1);
        write_block(&mut out, "S2", &self.s2);
        write_block(&mut out, "M", &self.mass);
        write_block(&mut out, "C", &self.flex);
        write_block(&mut out, "D", &self.d);
        write_block(&mut out, "kappa", &self.kappa);
        write_block(&mut out, "bigD", &self.big_d);
        write_block(&mut out, "L", &self.l);
        write_block(&mut out, "Linv", &self.l_inv);
        write_block(&mut out, "A", &self.a);
        write_block(&mut out, "QP", &self.qp);
        write_block(&mut out, "QD", &self.qd);
        write_block(&mut out, "Lambda", &self.big_lambda);
        out
    }
}

fn write_block<const R: usize, const C: usize>(
    out: &mut String,
    name: &str,
    m: &nalgebra::SMatrix<f64, R, C>,
) {
    let _ = writeln!(out, "# {name}");
    out.push_str("row");
    for c in 0..C {
        let _ = write!(out, ",c{}", c + 1);
    }
    out.push('\n');
    for r in 0..R {
        let _ = write!(out, "r{}", r + 1);
        for c in 0..C {
            let _ = write!(out, ",{:.16e}", m[(r, c)]);
        }
        out.push('\n');
    }
}

/// `C_κ = max κᵢ²` for a diagonal `κ`.
pub fn c_kappa_of(kappa: &Matrix6) -> f64 {
    kappa.diagonal().iter().map(|k| k * k).fold(0.0, f64::max)
}

/// Feedback gains minimising `C_κ`: the geometric mean of the smallest and
/// largest impedance within each group of three. The gains stored in
/// `params` are ignored.
pub fn optimal_feedback(params: &BeamParams) -> Result<(f64, f64), ParamError> {
    params.validate_fields(false)?;
    let b = params.impedances();
    let geo = |s: &[f64]| {
        let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = s.iter().cloned().fold(0.0, f64::max);
        (lo * hi).sqrt()
    };
    Ok((geo(&b[0..3]), geo(&b[3..6])))
}
