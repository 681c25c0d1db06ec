//! Method-of-lines solver for the diagonal system
//! `∂_t r + 𝐃 ∂_x r + B(x) r = g(r)` with `r₊(0) = κ r₋(0)` and
//! `r₋(ℓ) = −r₊(ℓ)`.

pub mod datum;
pub mod fit;
pub mod norms;

use std::fmt::Write as _;

use thiserror::Error;

use crate::algebra::{Vector12, Vector6};
use crate::beam::BeamMatrices;
use crate::certificate::LyapunovCertificate;
use crate::model::{g_diag, PrecurvedReference, Representation, StateField};
use norms::{energies, lyapunov_value, sobolev_norm, Terms};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    CflViolation(String),
    #[error("solution exceeded {threshold:e} at t = {time}")]
    BlowupDetected { time: f64, threshold: f64 },
    #[error("{steps} steps exceed the cap of {cap}")]
    StepCap { steps: u64, cap: u64 },
    #[error("initial datum violates the zero-order compatibility conditions (residual {0:e})")]
    Incompatible(f64),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    /// First-order upwind.
    Upwind1,
    /// Second-order upwind (MUSCL reconstruction with minmod limiter).
    Upwind2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub cells: usize,
    pub cfl: f64,
    pub t_end: f64,
    pub output_stride: usize,
    pub scheme: Scheme,
    /// Number of time derivatives in the Lyapunov functional (1 or 2).
    pub lyapunov_order: u8,
    pub terms: Terms,
    pub store_snapshots: bool,
    pub blowup_threshold: f64,
    pub max_steps: u64,
}

impl SimConfig {
    pub fn new(cells: usize, t_end: f64) -> Self {
        Self {
            cells,
            cfl: 0.9,
            t_end,
            output_stride: 1,
            scheme: Scheme::Upwind1,
            lyapunov_order: 1,
            terms: Terms::default(),
            store_snapshots: false,
            blowup_threshold: 1e6,
            max_steps: 10_000_000,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let mut bad = Vec::new();
        if self.cells < 16 {
            bad.push(format!("cells = {} < 16", self.cells));
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.95) {
            bad.push(format!("cfl = {} outside (0, 0.95]", self.cfl));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            bad.push(format!("t_end = {} must be positive", self.t_end));
        }
        if self.output_stride == 0 {
            bad.push("output_stride must be at least 1".into());
        }
        if !(1..=2).contains(&self.lyapunov_order) {
            bad.push(format!("lyapunov_order = {} must be 1 or 2", self.lyapunov_order));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(SimError::CflViolation(bad.join("; ")))
        }
    }

    /// `(Δt, number of steps)`: the largest step with `λ₇ Δt ≤ cfl Δx` that
    /// divides `t_end` evenly.
    pub fn time_step(&self, length: f64, max_speed: f64) -> (f64, u64) {
        let dx = length / self.cells as f64;
        let steps = (self.t_end / (self.cfl * dx / max_speed)).ceil().max(1.0) as u64;
        (self.t_end / steps as f64, steps)
    }
}

/// Recorded time series.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub energy_p: Vec<f64>,
    pub energy_d: Vec<f64>,
    pub lyap: Vec<f64>,
    /// `‖y‖_{H¹}`.
    pub h1: Vec<f64>,
    /// `‖y‖_{H²}` when the functional has order 2.
    pub h2: Option<Vec<f64>>,
    /// `r₋(0), r₊(0), r₋(ℓ), r₊(ℓ)` per record.
    pub traces: Vec<[Vector6; 4]>,
    /// Diagonal-variable states at the records, when requested.
    pub snapshots: Vec<StateField>,
    pub dt: f64,
    pub steps: u64,
}

impl Trajectory {
    /// CSV with `header` lines prefixed by `# `, then
    /// `t,E_P,E_D,L,H1[,H2]` and 24 boundary trace columns.
    pub fn to_csv(&self, header: &str) -> String {
        let mut out = String::new();
        for line in header.lines() {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str("t,E_P,E_D,L,H1");
        if self.h2.is_some() {
            out.push_str(",H2");
        }
        for name in ["rm0", "rp0", "rmL", "rpL"] {
            for k in 1..=6 {
                let _ = write!(out, ",{name}_{k}");
            }
        }
        out.push('\n');
        for i in 0..self.times.len() {
            let _ = write!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[i], self.energy_p[i], self.energy_d[i], self.lyap[i], self.h1[i]
            );
            if let Some(h2) = &self.h2 {
                let _ = write!(out, ",{:.16e}", h2[i]);
            }
            for trace in &self.traces[i] {
                for v in trace.iter() {
                    let _ = write!(out, ",{v:.16e}");
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Snapshot table `x, r1..r12, y1..y12`.
pub fn snapshot_csv(state: &StateField, m: &BeamMatrices) -> String {
    let r = state.diagonal(m);
    let y = state.physical(m);
    let mut out = String::from("x");
    for k in 1..=12 {
        let _ = write!(out, ",r{k}");
    }
    for k in 1..=12 {
        let _ = write!(out, ",y{k}");
    }
    out.push('\n');
    for i in 0..state.grid.nodes() {
        let _ = write!(out, "{:.16e}", state.grid.x(i));
        for v in r.values[i].iter().chain(y.values[i].iter()) {
            let _ = write!(out, ",{v:.16e}");
        }
        out.push('\n');
    }
    out
}

/// Unsplit predictor–corrector stepper. Each family is transported by the
/// upwind flux through cell faces evaluated at the half step (including half
/// a step of source), and the source is then applied at the predicted
/// midpoint state.
struct Stepper<'a> {
    m: &'a BeamMatrices,
    reference: &'a PrecurvedReference,
    scheme: Scheme,
    terms: Terms,
    dt: f64,
    h: f64,
    /// Courant numbers `λ_k Δt/Δx` of the six speeds.
    courant: [f64; 6],
    kappa: [f64; 6],
    ext: Vec<Vector12>,
    slopes: Vec<Vector12>,
    src: Vec<Vector12>,
    flux: Vec<f64>,
    half: Vec<Vector12>,
}

const GHOSTS: usize = 2;

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

impl<'a> Stepper<'a> {
    fn new(m: &'a BeamMatrices, reference: &'a PrecurvedReference, config: &SimConfig, dt: f64) -> Self {
        let n = reference.grid.nodes();
        let h = reference.grid.dx();
        Self {
            m,
            reference,
            scheme: config.scheme,
            terms: config.terms,
            dt,
            h,
            courant: std::array::from_fn(|k| m.lambda[k + 6] * dt / h),
            kappa: m.kappa_diagonal(),
            ext: vec![Vector12::zeros(); n + 2 * GHOSTS],
            slopes: vec![Vector12::zeros(); n + 2 * GHOSTS],
            src: vec![Vector12::zeros(); n],
            flux: vec![0.0; n + 1],
            half: vec![Vector12::zeros(); n],
        }
    }

    /// Imposes the incoming characteristic values at both ends.
    fn apply_boundary(&self, r: &mut [Vector12]) {
        let n = r.len() - 1;
        for k in 0..6 {
            r[0][k + 6] = self.kappa[k] * r[0][k];
            r[n][k] = -r[n][k + 6];
        }
    }

    fn source(&self, i: usize, r: &Vector12) -> Vector12 {
        let mut v = Vector12::zeros();
        if self.terms.lower_order {
            v -= self.reference.b[i] * r;
        }
        if self.terms.nonlinearity {
            v += g_diag(self.m, r);
        }
        v
    }

    /// Fills ghost nodes. Outgoing families are extrapolated linearly.
    /// Incoming families follow the characteristic through the ghost back
    /// to the boundary and the reflected family out again, with the source
    /// accumulated along both paths (second-order accurate).
    fn fill_ghosts(&mut self, r: &[Vector12]) {
        let n = r.len() - 1;
        self.ext[GHOSTS..GHOSTS + n + 1].copy_from_slice(r);
        let (s0, sn) = (self.src[0], self.src[n]);
        for j in 1..=GHOSTS {
            let (left, right) = (GHOSTS - j, GHOSTS + n + j);
            let jf = j as f64;
            for k in 0..6 {
                let tau = jf * self.h / self.m.lambda[k + 6];
                // x = −jΔx
                self.ext[left][k + 6] = self.kappa[k] * (r[j][k] + tau * s0[k]) - tau * s0[k + 6];
                self.ext[left][k] = r[0][k] + jf * (r[0][k] - r[1][k]);
                // x = ℓ + jΔx
                self.ext[right][k] = -r[n - j][k + 6] - tau * (sn[k] + sn[k + 6]);
                self.ext[right][k + 6] = r[n][k + 6] + jf * (r[n][k + 6] - r[n - 1][k + 6]);
            }
        }
    }

    fn step(&mut self, r: &mut [Vector12]) {
        let n = r.len();
        let dt = self.dt;
        for i in 0..n {
            self.src[i] = self.source(i, &r[i]);
        }
        self.fill_ghosts(r);
        // Limited slopes along the direction of propagation.
        if self.scheme == Scheme::Upwind2 {
            for e in 1..self.ext.len() - 1 {
                let (prev, here, next) = (&self.ext[e - 1], &self.ext[e], &self.ext[e + 1]);
                self.slopes[e] = Vector12::from_fn(|c, _| {
                    let (back, fwd) = (here[c] - prev[c], next[c] - here[c]);
                    if c >= 6 { minmod(back, fwd) } else { minmod(-fwd, -back) }
                });
            }
        }
        for i in 0..n {
            let slope = &self.slopes[i + GHOSTS];
            self.half[i] = Vector12::from_fn(|c, _| r[i][c] - 0.5 * self.courant[c % 6] * slope[c] + 0.5 * dt * self.src[i][c]);
        }
        for c in 0..12 {
            let nu = self.courant[c % 6];
            let rightward = c >= 6;
            // Face f lies between nodes f−1 and f; its upstream node in
            // extended indexing.
            for f in 0..=n {
                let e = if rightward { f + GHOSTS - 1 } else { f + GHOSTS };
                let node_src = if (GHOSTS..GHOSTS + n).contains(&e) { self.src[e - GHOSTS][c] } else { 0.0 };
                self.flux[f] = self.ext[e][c] + 0.5 * (1.0 - nu) * self.slopes[e][c] + 0.5 * dt * node_src;
            }
            for i in 0..n {
                let (inflow, outflow) = if rightward { (self.flux[i], self.flux[i + 1]) } else { (self.flux[i + 1], self.flux[i]) };
                r[i][c] -= nu * (outflow - inflow);
            }
        }
        if self.terms.lower_order || self.terms.nonlinearity {
            for i in 0..n {
                r[i] += dt * self.source(i, &self.half[i]);
            }
        }
        self.apply_boundary(r);
    }
}

/// Simulates from the physical or diagonal datum `y0`. With `cert = None` the
/// recorded functional uses `Q = Q^𝒟`.
pub fn simulate(
    config: &SimConfig,
    m: &BeamMatrices,
    reference: &PrecurvedReference,
    y0: &StateField,
    cert: Option<&LyapunovCertificate>,
) -> Result<Trajectory, SimError> {
    config.validate()?;
    if reference.grid.cells != config.cells || y0.grid != reference.grid {
        return Err(SimError::GridMismatch(format!(
            "config has {} cells, reference {}, datum {}",
            config.cells, reference.grid.cells, y0.grid.cells
        )));
    }
    if let Some(c) = cert {
        if c.x.len() != reference.grid.nodes() {
            return Err(SimError::GridMismatch("certificate grid differs from the reference".into()));
        }
    }
    let compat = datum::check_compatibility(y0, m, reference, 0);
    if !compat.holds(1e-8) {
        return Err(SimError::Incompatible(compat.max_residual()));
    }
    let (dt, steps) = config.time_step(reference.grid.length, m.max_speed());
    if steps > config.max_steps {
        return Err(SimError::StepCap { steps, cap: config.max_steps });
    }

    let grid = reference.grid;
    let n = grid.nodes();
    let mut stepper = Stepper::new(m, reference, config, dt);
    let mut state = y0.diagonal(m);
    stepper.apply_boundary(&mut state.values);

    let mut traj = Trajectory {
        times: Vec::new(),
        energy_p: Vec::new(),
        energy_d: Vec::new(),
        lyap: Vec::new(),
        h1: Vec::new(),
        h2: (config.lyapunov_order >= 2).then(Vec::new),
        traces: Vec::new(),
        snapshots: Vec::new(),
        dt,
        steps,
    };
    let record = |traj: &mut Trajectory, state: &StateField| {
        let (ep, ed) = energies(state, m);
        let y = state.physical(m);
        let h = grid.dx();
        traj.times.push(state.time);
        traj.energy_p.push(ep);
        traj.energy_d.push(ed);
        traj.lyap.push(lyapunov_value(state, cert, m, reference, config.lyapunov_order, config.terms));
        traj.h1.push(sobolev_norm(&y.values, h, 1));
        if let Some(h2) = traj.h2.as_mut() {
            h2.push(sobolev_norm(&y.values, h, 2));
        }
        let r = &state.values;
        let minus = |v: &Vector12| v.fixed_rows::<6>(0).into_owned();
        let plus = |v: &Vector12| v.fixed_rows::<6>(6).into_owned();
        traj.traces.push([minus(&r[0]), plus(&r[0]), minus(&r[n - 1]), plus(&r[n - 1])]);
        if config.store_snapshots {
            traj.snapshots.push(state.clone());
        }
    };
    record(&mut traj, &state);

    for step in 1..=steps {
        stepper.step(&mut state.values);
        state.time = if step == steps { config.t_end } else { step as f64 * dt };

        let peak = state.max_abs();
        if !(peak <= config.blowup_threshold) {
            return Err(SimError::BlowupDetected { time: state.time, threshold: config.blowup_threshold });
        }
        if step % config.output_stride as u64 == 0 || step == steps {
            record(&mut traj, &state);
        }
    }
    debug_assert_eq!(state.repr, Representation::Diagonal);
    Ok(traj)
}
