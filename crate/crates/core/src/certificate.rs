//! Quadratic Lyapunov certificate `Q(x) = diag(w₋ I₆, w₊ I₆) Q^𝒟` for the
//! closed loop and its numerical verification.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::algebra::{blocks, max_eigenvalue, norm2, norm_inf, Matrix12, Matrix6, Vector12, Vector3};
use crate::beam::BeamMatrices;
use crate::model::{energy_coupling, g_matrix, strain_matrix, PrecurvedReference};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertError {
    #[error("phi(l) = {phi_l} outside the admissible window [{lo}, {hi}]")]
    WindowViolation { phi_l: f64, lo: f64, hi: f64 },
    #[error("C_kappa = {0} leaves no admissible weight ratio at x = 0")]
    CkappaDegenerate(f64),
    #[error("need 0 < phi(0) < phi(l), got phi(0) = {phi0}, phi(l) = {phi_l}")]
    BadPhi { phi0: f64, phi_l: f64 },
}

/// Which bound on the coupling sizes the weights: row sums (`q₁`) or the
/// largest eigenvalue of `Θ` (`q₂`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingBound {
    Dominance,
    Weyl,
}

impl CouplingBound {
    pub fn index(self) -> u8 {
        match self {
            Self::Dominance => 1,
            Self::Weyl => 2,
        }
    }

    pub fn from_index(m: u8) -> Option<Self> {
        match m {
            1 => Some(Self::Dominance),
            2 => Some(Self::Weyl),
            _ => None,
        }
    }
}

/// `Θ = −[0 𝐄D𝐌+(𝐄D𝐌)ᵀ; 𝐄D𝐌+(𝐄D𝐌)ᵀ 0]`.
pub fn theta_matrix(m: &BeamMatrices, e: &Matrix6) -> Matrix12 {
    let x = e * m.d * m.mass;
    let s = -(x + x.transpose());
    blocks(&Matrix6::zeros(), &s, &s, &Matrix6::zeros())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaValues {
    pub theta: [f64; 6],
    pub q1: f64,
    pub q2: f64,
}

/// `θ₁..θ₆`, `q₁ = max θᵢ` and `q₂ = σ_max(Θ) / minᵢ 𝐌ᵢλᵢ₊₆` at a point with
/// curvature `Υ_c`.
pub fn theta_functions(m: &BeamMatrices, curvature: &Vector3) -> ThetaValues {
    let l = &m.lambda;
    let (l7, l8, l9, l10) = (l[6], l[7], l[8], l[9]);
    let (j1, j2, j3) = (m.j[(0, 0)], m.j[(1, 1)], m.j[(2, 2)]);
    let a = m.params.area;
    let [u1, u2, u3] = [curvature[0].abs(), curvature[1].abs(), curvature[2].abs()];
    let theta = [
        (1.0 - l8 / l7).abs() * u3 + (1.0 - l9 / l7).abs() * u2,
        (1.0 - l7 / l8).abs() * u3 + (1.0 - l9 / l8).abs() * u1 + 1.0,
        (1.0 - l7 / l9).abs() * u2 + (1.0 - l8 / l9).abs() * u1 + 1.0,
        (1.0 - l7 * j2 / (l10 * j1)).abs() * u3 + (1.0 - l7 * j3 / (l10 * j1)).abs() * u2,
        a * l9 / (l7 * j2) + (1.0 - l10 * j1 / (l7 * j2)).abs() * u3 + (1.0 - j3 / j2).abs() * u1,
        a * l8 / (l7 * j3) + (1.0 - l10 * j1 / (l7 * j3)).abs() * u2 + (1.0 - j2 / j3).abs() * u1,
    ];
    let q1 = theta.iter().cloned().fold(0.0, f64::max);
    let md = m.params.impedances();
    let min_md = md.iter().cloned().fold(f64::INFINITY, f64::min);
    let q2 = max_eigenvalue(&theta_matrix(m, &strain_matrix(curvature))) / min_md;
    ThetaValues { theta, q1, q2 }
}

/// Weight generator `φ(x) = φ(ℓ) − e^{−αx}(1 − x/ℓ)(φ(ℓ) − φ(0))`, `α = 2c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phi {
    pub c: f64,
    pub phi0: f64,
    pub phi_l: f64,
    pub length: f64,
}

impl Phi {
    pub fn value(&self, x: f64) -> f64 {
        self.phi_l - (-2.0 * self.c * x).exp() * (1.0 - x / self.length) * (self.phi_l - self.phi0)
    }

    /// `φ(ℓ) − φ(x)`, without cancellation.
    pub fn deficit(&self, x: f64) -> f64 {
        (-2.0 * self.c * x).exp() * (1.0 - x / self.length) * (self.phi_l - self.phi0)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let alpha = 2.0 * self.c;
        (self.phi_l - self.phi0)
            * (-alpha * x).exp()
            * (alpha * (1.0 - x / self.length) + 1.0 / self.length)
    }
}

/// Samples of `φ` on the grid nodes; requires `0 < φ(0) < φ(ℓ)`.
pub fn build_phi(c: f64, phi0: f64, phi_l: f64, xs: &[f64]) -> Result<(Phi, Vec<f64>), CertError> {
    if !(phi0 > 0.0 && phi0 < phi_l) {
        return Err(CertError::BadPhi { phi0, phi_l });
    }
    let length = *xs.last().expect("non-empty grid");
    let phi = Phi { c, phi0, phi_l, length };
    Ok((phi, xs.iter().map(|&x| phi.value(x)).collect()))
}

/// Admissible `φ(ℓ)` for given `φ(0)`: `[φ(0), (1 + C_κ⁻¹)/2 · φ(0)]`.
pub fn phi_window(phi0: f64, c_kappa: f64) -> (f64, f64) {
    (phi0, 0.5 * (1.0 + 1.0 / c_kappa) * phi0)
}

/// Midpoint of the window, capped at `1.5 φ(0)`.
pub fn default_phi_l(phi0: f64, c_kappa: f64) -> f64 {
    let (lo, hi) = phi_window(phi0, c_kappa);
    (0.5 * (lo + hi)).min(1.5 * phi0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    /// Largest eigenvalue of `Q′𝐃 − QB − BᵀQ` per node.
    pub interior_max_eig: Vec<f64>,
    /// `min{|w₋′|, |w₊′|} − (w₊ − w₋) q₁` per node.
    pub dominance_slack: Vec<f64>,
    /// `min{|w₋′|, |w₊′|} − (w₊ − w₋) q₂` per node.
    pub weyl_slack: Vec<f64>,
    /// Diagonal of `κ² Q₊(0) − Q₋(0)`.
    pub boundary_left: [f64; 6],
    /// Diagonal of `Q₋(ℓ) − Q₊(ℓ)`.
    pub boundary_right: [f64; 6],
    pub interior_ok: bool,
    pub boundary_ok: bool,
}

impl VerificationReport {
    pub fn valid(&self) -> bool {
        self.interior_ok && self.boundary_ok
    }
}

#[derive(Debug, Clone)]
pub struct LyapunovCertificate {
    pub bound: CouplingBound,
    /// `C_{q_m}` used in `φ`.
    pub c: f64,
    pub c_kappa: f64,
    pub c_q1: f64,
    pub c_q2: f64,
    pub phi: Phi,
    pub x: Vec<f64>,
    pub phi_values: Vec<f64>,
    pub w_minus: Vec<f64>,
    pub w_plus: Vec<f64>,
    pub dw_minus: Vec<f64>,
    pub dw_plus: Vec<f64>,
    /// Diagonal of `Q(x)` per node.
    pub q: Vec<Vector12>,
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub report: VerificationReport,
}

impl LyapunovCertificate {
    pub fn valid(&self) -> bool {
        self.report.valid()
    }

    /// `Q(x)` at node `i` as a dense matrix.
    pub fn q_matrix(&self, i: usize) -> Matrix12 {
        Matrix12::from_diagonal(&self.q[i])
    }

    /// `Q′(x)` at node `i`, from the analytic `φ′`.
    pub fn dq_matrix(&self, m: &BeamMatrices, i: usize) -> Matrix12 {
        weight_matrix(self.dw_minus[i], self.dw_plus[i]) * m.qd
    }

    /// Per-node table `x, w₋, w₊, interior eigenvalue, dominance slack, Weyl slack`.
    pub fn report_csv(&self) -> String {
        let mut out =
            String::from("x,w_minus,w_plus,interior_max_eig,dominance_slack,weyl_slack\n");
        let r = &self.report;
        for i in 0..self.x.len() {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.x[i],
                self.w_minus[i],
                self.w_plus[i],
                r.interior_max_eig[i],
                r.dominance_slack[i],
                r.weyl_slack[i]
            );
        }
        out
    }

    /// Scalar summary `name,value`. The decay rate is a heuristic estimate.
    pub fn summary_csv(&self, decay: Option<&DecayEstimate>) -> String {
        let mut out = String::from("name,value\n");
        let mut put = |name: &str, v: f64| {
            let _ = writeln!(out, "{name},{v:.16e}");
        };
        put("c_kappa", self.c_kappa);
        put("c_q1", self.c_q1);
        put("c_q2", self.c_q2);
        put("m", self.bound.index() as f64);
        put("c", self.c);
        put("phi0", self.phi.phi0);
        put("phi_l", self.phi.phi_l);
        for (i, v) in self.report.boundary_left.iter().enumerate() {
            put(&format!("boundary_left{}", i + 1), *v);
        }
        for (i, v) in self.report.boundary_right.iter().enumerate() {
            put(&format!("boundary_right{}", i + 1), *v);
        }
        let worst = self.report.interior_max_eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        put("interior_max_eig", worst);
        put("valid", if self.valid() { 1.0 } else { 0.0 });
        if let Some(d) = decay {
            put("c_s", d.c_s);
            put("c_q", d.c_q);
            put("c_g", d.c_g);
            put("delta", d.delta);
            put("alpha_estimate_heuristic", d.alpha);
        }
        out
    }
}

fn weight_matrix(w_minus: f64, w_plus: f64) -> Matrix12 {
    Matrix12::from_diagonal(&Vector12::from_fn(|i, _| if i < 6 { w_minus } else { w_plus }))
}

/// Largest curvature bound over the nodes of `reference`.
pub fn coupling_constants(m: &BeamMatrices, reference: &PrecurvedReference) -> (Vec<ThetaValues>, f64, f64) {
    let values: Vec<ThetaValues> = reference.curvature.iter().map(|k| theta_functions(m, k)).collect();
    let c_q1 = values.iter().map(|v| v.q1).fold(0.0, f64::max);
    let c_q2 = values.iter().map(|v| v.q2).fold(0.0, f64::max);
    (values, c_q1, c_q2)
}

/// Builds the weights from `φ` and verifies the matrix conditions at every
/// node. `phi_l = None` picks [`default_phi_l`]. `phi_l = phi0` is accepted
/// and gives constant weights (which cannot certify anything).
pub fn build_certificate(
    m: &BeamMatrices,
    reference: &PrecurvedReference,
    bound: CouplingBound,
    phi0: f64,
    phi_l: Option<f64>,
) -> Result<LyapunovCertificate, CertError> {
    let c_kappa = m.c_kappa;
    if !(c_kappa < 1.0) {
        return Err(CertError::CkappaDegenerate(c_kappa));
    }
    if !(phi0 > 0.0 && phi0.is_finite()) {
        return Err(CertError::BadPhi { phi0, phi_l: phi_l.unwrap_or(f64::NAN) });
    }
    let phi_l = phi_l.unwrap_or_else(|| default_phi_l(phi0, c_kappa));
    let (lo, hi) = phi_window(phi0, c_kappa);
    if !(phi_l >= lo && phi_l <= hi) {
        return Err(CertError::WindowViolation { phi_l, lo, hi });
    }

    let (thetas, c_q1, c_q2) = coupling_constants(m, reference);
    let c = match bound {
        CouplingBound::Dominance => c_q1,
        CouplingBound::Weyl => c_q2,
    };
    let x = reference.grid.coordinates();
    let phi = Phi { c, phi0, phi_l, length: reference.grid.length };
    let phi_values: Vec<f64> = x.iter().map(|&xi| phi.value(xi)).collect();
    let w_minus = phi_values.clone();
    let w_plus: Vec<f64> = phi_values.iter().map(|p| 2.0 * phi_l - p).collect();
    let dw_minus: Vec<f64> = x.iter().map(|&xi| phi.derivative(xi)).collect();
    let dw_plus: Vec<f64> = dw_minus.iter().map(|d| -d).collect();
    let q = (0..x.len())
        .map(|i| (weight_matrix(w_minus[i], w_plus[i]) * m.qd).diagonal())
        .collect();

    let mut cert = LyapunovCertificate {
        bound,
        c,
        c_kappa,
        c_q1,
        c_q2,
        phi,
        x,
        phi_values,
        w_minus,
        w_plus,
        dw_minus,
        dw_plus,
        q,
        q1: thetas.iter().map(|t| t.q1).collect(),
        q2: thetas.iter().map(|t| t.q2).collect(),
        report: VerificationReport {
            interior_max_eig: Vec::new(),
            dominance_slack: Vec::new(),
            weyl_slack: Vec::new(),
            boundary_left: [0.0; 6],
            boundary_right: [0.0; 6],
            interior_ok: false,
            boundary_ok: false,
        },
    };
    cert.report = verify_certificate(&cert, m, reference);
    Ok(cert)
}

/// `Q′𝐃 − QB − BᵀQ` at node `i`, evaluated as
/// `Q′𝐃 + (w₊ − w₋)[0 S; S 0]` with `S = ℬ + ℬᵀ`. Forming `QB` directly
/// leaves roundoff of size `ε‖Q‖‖B‖` from its skew part, which swamps the
/// matrix once `φ′` has decayed (large `C_{q_m}`).
pub fn interior_matrix(
    cert: &LyapunovCertificate,
    m: &BeamMatrices,
    reference: &PrecurvedReference,
    i: usize,
) -> Matrix12 {
    let b = energy_coupling(m, &reference.strain[i]);
    let s = b + b.transpose();
    let gap = 2.0 * cert.phi.deficit(cert.x[i]);
    let z = Matrix6::zeros();
    cert.dq_matrix(m, i) * m.big_d + gap * blocks(&z, &s, &s, &z)
}

/// [`interior_matrix`] assembled literally from `Q` and `B`.
pub fn interior_matrix_direct(
    cert: &LyapunovCertificate,
    m: &BeamMatrices,
    reference: &PrecurvedReference,
    i: usize,
) -> Matrix12 {
    let q = cert.q_matrix(i);
    let qb = q * reference.b[i];
    cert.dq_matrix(m, i) * m.big_d - qb - qb.transpose()
}

/// Relative threshold for strict negativity of eigenvalues.
pub const NEGATIVITY_TOL: f64 = 1e-10;

/// Checks both boundary conditions and the interior condition at every node.
pub fn verify_certificate(
    cert: &LyapunovCertificate,
    m: &BeamMatrices,
    reference: &PrecurvedReference,
) -> VerificationReport {
    let n = cert.x.len();
    let mut interior_max_eig = Vec::with_capacity(n);
    let mut interior_ok = true;
    for i in 0..n {
        let t = interior_matrix(cert, m, reference, i);
        let eig = max_eigenvalue(&t);
        if !(eig < -NEGATIVITY_TOL * norm_inf(&t)) {
            interior_ok = false;
        }
        interior_max_eig.push(eig);
    }
    let slack = |i: usize, q: f64| {
        let gap = 2.0 * cert.phi.deficit(cert.x[i]);
        cert.dw_minus[i].abs().min(cert.dw_plus[i].abs()) - gap * q
    };
    let dominance_slack = (0..n).map(|i| slack(i, cert.q1[i])).collect();
    let weyl_slack = (0..n).map(|i| slack(i, cert.q2[i])).collect();

    let q0 = &cert.q[0];
    let ql = &cert.q[n - 1];
    let kappa = m.kappa_diagonal();
    let boundary_left: [f64; 6] = std::array::from_fn(|i| kappa[i] * kappa[i] * q0[i + 6] - q0[i]);
    let boundary_right: [f64; 6] = std::array::from_fn(|i| ql[i] - ql[i + 6]);
    let scale = q0.amax().max(ql.amax());
    let boundary_ok = boundary_left
        .iter()
        .chain(boundary_right.iter())
        .all(|v| *v <= NEGATIVITY_TOL * scale);

    VerificationReport {
        interior_max_eig,
        dominance_slack,
        weyl_slack,
        boundary_left,
        boundary_right,
        interior_ok,
        boundary_ok,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayEstimate {
    pub alpha: f64,
    pub c_s: f64,
    pub c_q: f64,
    pub c_g: f64,
    pub delta: f64,
}

/// `α = ½ C_Q (−C_𝒮 − 4 C_Q C_g δ)`, clipped at 0. Heuristic: `C_𝒮` is the
/// largest eigenvalue of `−φ′Λ + 2(φ(ℓ) − φ)Θ` over the nodes,
/// `C_Q = 1 / max diag Q`, and `C_g` is the largest `‖𝒢(r)‖₂` over
/// `samples` seeded random unit vectors.
pub fn decay_rate_estimate(
    cert: &LyapunovCertificate,
    m: &BeamMatrices,
    reference: &PrecurvedReference,
    delta: f64,
) -> DecayEstimate {
    let c_s = (0..cert.x.len())
        .map(|i| {
            let s = -cert.dw_minus[i] * m.big_lambda
                + 2.0 * cert.phi.deficit(cert.x[i]) * theta_matrix(m, &reference.strain[i]);
            max_eigenvalue(&s)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let c_q = 1.0 / cert.q.iter().map(|q| q.max()).fold(0.0, f64::max);
    let c_g = nonlinearity_bound(m, 256, 0x5eed);
    let alpha = (0.5 * c_q * (-c_s - 4.0 * c_q * c_g * delta)).max(0.0);
    DecayEstimate { alpha, c_s, c_q, c_g, delta }
}

/// Largest `‖𝒢(r)‖₂` over random unit vectors `r`.
pub fn nonlinearity_bound(m: &BeamMatrices, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            let r = Vector12::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize();
            norm2(&g_matrix(m, &r))
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{curved_reference, straight_reference};
    use crate::presets;

    fn toy() -> BeamMatrices {
        BeamMatrices::new(&presets::toy_params()).unwrap()
    }

    fn row_sum_theta(m: &BeamMatrices, e: &Matrix6) -> [f64; 6] {
        let m_inv = Matrix6::from_diagonal(&m.mass.diagonal().map(|v| 1.0 / v));
        let d_inv = Matrix6::from_diagonal(&m.d.diagonal().map(|v| 1.0 / v));
        let t = m_inv * d_inv * e * m.d * m.mass + e.transpose();
        std::array::from_fn(|i| t.row(i).iter().map(|v| v.abs()).sum())
    }

    #[test]
    fn straight_theta_values() {
        for p in [presets::toy_params(), presets::steel_params()] {
            let m = BeamMatrices::new(&p).unwrap();
            let t = theta_functions(&m, &Vector3::zeros());
            let l = &m.lambda;
            let expected = [
                0.0,
                1.0,
                1.0,
                0.0,
                p.area * l[8] / (l[6] * p.i2),
                p.area * l[7] / (l[6] * p.i3),
            ];
            for i in 0..6 {
                assert!((t.theta[i] - expected[i]).abs() <= 1e-12 * expected[i].max(1.0));
            }
        }
        let t = theta_functions(&toy(), &Vector3::zeros());
        assert_eq!(t.q1, 1.0);
    }

    #[test]
    fn theta_formulas_match_row_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in [presets::toy_params(), presets::steel_params()] {
            let m = BeamMatrices::new(&p).unwrap();
            for _ in 0..50 {
                let k = Vector3::from_fn(|_, _| rng.random_range(-3.0..3.0));
                let t = theta_functions(&m, &k);
                let oracle = row_sum_theta(&m, &strain_matrix(&k));
                for i in 0..6 {
                    assert!((t.theta[i] - oracle[i]).abs() <= 1e-10 * oracle[i].max(1.0));
                }
            }
        }
    }

    /// Number of eigenvalues of a symmetric matrix below `s`, via the signs
    /// of the pivots in an LDLᵀ factorisation of `A − sI` (Sylvester).
    fn count_below(a: &Matrix12, s: f64) -> usize {
        let mut m = a - Matrix12::identity() * s;
        let mut count = 0;
        for k in 0..12 {
            let mut piv = m[(k, k)];
            if piv == 0.0 {
                piv = 1e-300;
            }
            if piv < 0.0 {
                count += 1;
            }
            for i in k + 1..12 {
                let f = m[(i, k)] / piv;
                for j in k + 1..12 {
                    m[(i, j)] -= f * m[(k, j)];
                }
            }
        }
        count
    }

    fn bisection_max_eig(a: &Matrix12) -> f64 {
        let r = norm_inf(a);
        let (mut lo, mut hi) = (-r - 1.0, r + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if count_below(a, mid) == 12 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn q2_matches_bisection_oracle() {
        let m = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let k = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
            let theta = theta_matrix(&m, &strain_matrix(&k));
            assert!((theta - theta.transpose()).amax() == 0.0);
            assert!(theta.trace().abs() < 1e-14);
            let direct = max_eigenvalue(&theta);
            let oracle = bisection_max_eig(&theta);
            assert!((direct - oracle).abs() < 1e-10 * direct.abs().max(1.0));
            let t = theta_functions(&m, &k);
            let min_md = m.params.impedances().iter().cloned().fold(f64::INFINITY, f64::min);
            assert!((t.q2 - oracle / min_md).abs() < 1e-10);
        }
    }

    #[test]
    fn phi_endpoints_and_closed_form() {
        let xs: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let (phi, values) = build_phi(1.0, 1.0, 1.2, &xs).unwrap();
        assert_eq!(values[0], 1.0);
        assert_eq!(values[100], 1.2);
        for &x in &xs {
            let expected = 1.2 - 0.2 * (-2.0 * x).exp() * (1.0 - x);
            assert!((phi.value(x) - expected).abs() < 1e-15);
            let gap = phi.derivative(x) - 2.0 * (1.2 - phi.value(x));
            assert!((gap - 0.2 * (-2.0 * x).exp()).abs() < 1e-14);
        }
        assert!(build_phi(1.0, 1.0, 1.0, &xs).is_err());
        assert!(build_phi(1.0, 0.0, 1.0, &xs).is_err());
    }

    #[test]
    fn phi_inequalities_on_dense_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let c = rng.random_range(0.01..20.0);
            let phi0 = rng.random_range(0.1..10.0);
            let phi_l = phi0 * rng.random_range(1.001..3.0);
            let length = rng.random_range(0.1..5.0);
            let phi = Phi { c, phi0, phi_l, length };
            for k in 0..=500 {
                let x = length * k as f64 / 500.0;
                let (v, d) = (phi.value(x), phi.derivative(x));
                assert!(v > 0.0 && d > 0.0);
                assert!(d > 2.0 * c * phi.deficit(x));
                assert!((phi.deficit(x) - (phi_l - v)).abs() <= 4.0 * f64::EPSILON * phi_l);
            }
        }
    }

    #[test]
    fn toy_certificate_is_valid() {
        let m = toy();
        let r = straight_reference(&m, 64).unwrap();
        let phi_l = 1.1f64.min(0.5 * (1.0 + 1.0 / m.c_kappa));
        let cert = build_certificate(&m, &r, CouplingBound::Dominance, 1.0, Some(phi_l)).unwrap();
        assert!(cert.valid(), "{:?}", cert.report);
        assert_eq!(cert.c, 1.0);
        for i in 1..cert.x.len() {
            assert!(cert.w_minus[i] > cert.w_minus[i - 1]);
            assert!(cert.w_plus[i] < cert.w_plus[i - 1]);
        }
        let ratio = cert.w_plus[0] / cert.w_minus[0];
        assert!(ratio > 1.0 && ratio <= 1.0 / m.c_kappa);
        assert!(cert.w_minus.last() <= cert.w_plus.last());
    }

    #[test]
    fn constant_weights_cannot_certify() {
        let m = toy();
        for r in [
            straight_reference(&m, 32).unwrap(),
            curved_reference(&m, 32, |_| presets::helical_curvature()).unwrap(),
        ] {
            let cert = build_certificate(&m, &r, CouplingBound::Dominance, 1.0, Some(1.0)).unwrap();
            assert!(cert.w_minus.iter().all(|w| *w == 1.0));
            assert!(!cert.valid());
            assert!(cert.report.interior_max_eig.iter().all(|e| *e >= 0.0));
        }
    }

    #[test]
    fn explicit_weight_formula_agrees() {
        let m = toy();
        let r = curved_reference(&m, 40, |_| presets::helical_curvature()).unwrap();
        let cert = build_certificate(&m, &r, CouplingBound::Weyl, 0.8, Some(1.0)).unwrap();
        let (a, b, c, l) = (0.8, 1.0, cert.c, 1.0);
        for (i, &x) in cert.x.iter().enumerate() {
            let e = (-2.0 * c * x).exp() * (1.0 - x / l) * (b - a);
            assert!((cert.w_minus[i] - (b - e)).abs() < 1e-14);
            assert!((cert.w_plus[i] - (b + e)).abs() < 1e-14);
        }
    }

    #[test]
    fn boundary_matrices_are_diagonal_formulas() {
        let m = toy();
        let r = straight_reference(&m, 16).unwrap();
        let cert = build_certificate(&m, &r, CouplingBound::Dominance, 1.0, None).unwrap();
        let k = m.kappa_diagonal();
        let md = m.mass_diagonal();
        let (wm, wp) = (cert.w_minus[0], cert.w_plus[0]);
        for i in 0..6 {
            let expected = 0.5 * (wp * k[i] * k[i] - wm) * md[i];
            assert!((cert.report.boundary_left[i] - expected).abs() < 1e-14);
            assert!(cert.report.boundary_right[i].abs() < 1e-14);
            assert_eq!(expected <= 0.0, wp / wm <= 1.0 / (k[i] * k[i]));
        }
    }

    #[test]
    fn weighted_coupling_two_ways() {
        let m = BeamMatrices::new(&presets::steel_params()).unwrap();
        let r = curved_reference(&m, 16, |x| Vector3::new(1.0, -x, 2.0)).unwrap();
        let cert = build_certificate(&m, &r, CouplingBound::Dominance, 1.0, None).unwrap();
        for i in 0..cert.x.len() {
            let q = cert.q_matrix(i);
            let direct = q * r.b[i] + r.b[i].transpose() * q;
            let b = energy_coupling(&m, &r.strain[i]);
            let s = b + b.transpose();
            let expected = -(cert.w_plus[i] - cert.w_minus[i]) * blocks(&Matrix6::zeros(), &s, &s, &Matrix6::zeros());
            let scale = (q * r.b[i]).amax();
            assert!((direct - expected).amax() <= 1e-12 * scale);
        }
    }

    #[test]
    fn interior_forms_agree() {
        let m = toy();
        let r = curved_reference(&m, 32, |x| Vector3::new(0.5, x, 1.0)).unwrap();
        let cert = build_certificate(&m, &r, CouplingBound::Dominance, 1.0, None).unwrap();
        for i in 0..cert.x.len() {
            let direct = interior_matrix_direct(&cert, &m, &r, i);
            let scale = (cert.q_matrix(i) * r.b[i]).amax();
            assert!((interior_matrix(&cert, &m, &r, i) - direct).amax() <= 1e-13 * scale);
        }
    }

    #[test]
    fn steel_certificate_survives_decayed_weights() {
        let m = BeamMatrices::new(&presets::steel_params()).unwrap();
        let r = straight_reference(&m, 256).unwrap();
        let cert = build_certificate(&m, &r, CouplingBound::Dominance, 1.0, None).unwrap();
        assert!(cert.c > 100.0);
        assert!(cert.valid());
        let last = cert.x.len() - 1;
        let direct = max_eigenvalue(&interior_matrix_direct(&cert, &m, &r, last / 2));
        assert!(direct > cert.report.interior_max_eig[last / 2]);
    }

    #[test]
    fn window_checks() {
        let m = toy();
        let r = straight_reference(&m, 16).unwrap();
        let hi = phi_window(1.0, m.c_kappa).1;
        let err = build_certificate(&m, &r, CouplingBound::Dominance, 1.0, Some(hi * 1.01));
        assert!(matches!(err, Err(CertError::WindowViolation { .. })));
        let err = build_certificate(&m, &r, CouplingBound::Dominance, 1.0, Some(0.9));
        assert!(matches!(err, Err(CertError::WindowViolation { .. })));
        assert_eq!(default_phi_l(1.0, 0.0), 1.5);
    }

    #[test]
    fn sufficient_margins_imply_negative_definiteness() {
        let m = toy();
        let r = curved_reference(&m, 48, |x| Vector3::new(0.5 + x, 0.2, -1.0)).unwrap();
        for bound in [CouplingBound::Dominance, CouplingBound::Weyl] {
            let cert = build_certificate(&m, &r, bound, 1.0, None).unwrap();
            for i in 0..cert.x.len() {
                let s = Matrix12::from_diagonal(&Vector12::from_fn(|k, _| {
                    if k < 6 { -cert.dw_minus[i] } else { cert.dw_plus[i] }
                })) * m.big_lambda
                    + (cert.w_plus[i] - cert.w_minus[i]) * theta_matrix(&m, &r.strain[i]);
                if cert.report.dominance_slack[i] > 0.0 || cert.report.weyl_slack[i] > 0.0 {
                    assert!(max_eigenvalue(&s) < 0.0);
                    assert!(cert.report.interior_max_eig[i] < 0.0);
                }
            }
            assert!(cert.valid());
        }
    }

    #[test]
    fn decay_estimate_behaviour() {
        let m = toy();
        let r = straight_reference(&m, 64).unwrap();
        let cert = build_certificate(&m, &r, CouplingBound::Dominance, 1.0, None).unwrap();
        let d0 = decay_rate_estimate(&cert, &m, &r, 0.0);
        assert!(d0.c_s < 0.0);
        assert!((d0.alpha + 0.5 * d0.c_q * d0.c_s).abs() < 1e-15);
        let mut last = d0.alpha;
        for k in 1..20 {
            let a = decay_rate_estimate(&cert, &m, &r, 0.01 * k as f64).alpha;
            assert!(a <= last);
            last = a;
        }
    }
}
