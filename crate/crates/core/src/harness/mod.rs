//! Orchestration behind the command-line tool: certify, simulate,
//! reconstruct, sweep and matrix dumps, each writing CSV files into an
//! output directory.

pub mod scenario;

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::certificate::{build_certificate, decay_rate_estimate, DecayEstimate, LyapunovCertificate};
use crate::model::{strains_velocities_from_pose, StateField};
use crate::pose::{
    decay_observable, initial_centerline, quaternion_from_rotation, reconstruct_centerline,
    reconstruct_rotation, PoseField,
};
use crate::solver::datum::generate_initial_datum;
use crate::solver::fit::{fit_decay, DecayFit};
use crate::solver::{simulate, snapshot_csv, SimError, Trajectory};
pub use scenario::{Scenario, SweepAxis};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("certificate failed: {0}")]
    CertificateFailed(String),
    #[error("blow-up: {0}")]
    Blowup(String),
    #[error("{0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 3,
            Self::CertificateFailed(_) => 4,
            Self::Blowup(_) => 5,
            Self::Numerical(_) | Self::Io(_) => 1,
        }
    }
}

impl From<SimError> for HarnessError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::BlowupDetected { .. } => Self::Blowup(e.to_string()),
            _ => Self::Validation(e.to_string()),
        }
    }
}

/// Tool version and the full scenario, for the `# ` header of every file.
pub fn header(scn: &Scenario) -> String {
    format!("beamstab {}\n{}", env!("CARGO_PKG_VERSION"), scn.to_toml())
}

fn commented(header: &str, body: &str) -> String {
    let mut out = String::new();
    for line in header.lines() {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str(body);
    out
}

fn write(out: &Path, name: &str, contents: &str) -> Result<(), HarnessError> {
    std::fs::create_dir_all(out).map_err(|e| HarnessError::Io(format!("{}: {e}", out.display())))?;
    let path = out.join(name);
    std::fs::write(&path, contents).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

#[derive(Debug)]
pub struct CertifyOutcome {
    pub certificate: LyapunovCertificate,
    pub decay: DecayEstimate,
}

fn certify(scn: &Scenario) -> Result<CertifyOutcome, HarnessError> {
    scn.validate()?;
    let m = scn.matrices()?;
    let reference = scn.reference(&m)?;
    let certificate = build_certificate(&m, &reference, scn.bound(), scn.certificate.phi0, scn.certificate.phi_l)
        .map_err(|e| HarnessError::Validation(format!("{}: {e}", scn.name)))?;
    let decay = decay_rate_estimate(&certificate, &m, &reference, scn.datum.amplitude);
    Ok(CertifyOutcome { certificate, decay })
}

/// Writes `certificate.csv` and `certificate_summary.csv`. An invalid
/// certificate is still written, then reported as an error.
pub fn run_certify(scn: &Scenario, out: &Path) -> Result<CertifyOutcome, HarnessError> {
    let outcome = certify(scn)?;
    let head = header(scn);
    write(out, "certificate.csv", &commented(&head, &outcome.certificate.report_csv()))?;
    write(
        out,
        "certificate_summary.csv",
        &commented(&head, &outcome.certificate.summary_csv(Some(&outcome.decay))),
    )?;
    if !outcome.certificate.valid() {
        let r = &outcome.certificate.report;
        return Err(HarnessError::CertificateFailed(format!(
            "{}: interior conditions {}, boundary conditions {}",
            scn.name,
            if r.interior_ok { "hold" } else { "violated" },
            if r.boundary_ok { "hold" } else { "violated" }
        )));
    }
    Ok(outcome)
}

#[derive(Debug)]
pub struct SimulateOutcome {
    pub trajectory: Trajectory,
    /// Whether the recorded functional uses the certificate weights.
    pub certified_functional: bool,
    /// `(quantity, fit)` for `L`, `H1²` and, with order 2, `H2²`.
    pub fits: Vec<(&'static str, Option<DecayFit>)>,
}

fn simulate_scenario(scn: &Scenario, store_snapshots: bool) -> Result<SimulateOutcome, HarnessError> {
    scn.validate()?;
    let m = scn.matrices()?;
    let reference = scn.reference(&m)?;
    let cert = if scn.certificate.in_functional {
        build_certificate(&m, &reference, scn.bound(), scn.certificate.phi0, scn.certificate.phi_l)
            .ok()
            .filter(|c| c.valid())
    } else {
        None
    };
    let y0 = generate_initial_datum(&m, &reference, scn.datum.amplitude, scn.datum.seed, scn.datum.order);
    let trajectory = simulate(&scn.sim_config(store_snapshots), &m, &reference, &y0, cert.as_ref())?;

    let t0 = scn.round_trip();
    let squared = |v: &[f64]| v.iter().map(|x| x * x).collect::<Vec<f64>>();
    let mut fits = vec![
        ("L", fit_decay(&trajectory.times, &trajectory.lyap, t0).ok()),
        ("H1_squared", fit_decay(&trajectory.times, &squared(&trajectory.h1), t0).ok()),
    ];
    if let Some(h2) = &trajectory.h2 {
        fits.push(("H2_squared", fit_decay(&trajectory.times, &squared(h2), t0).ok()));
    }
    Ok(SimulateOutcome { trajectory, certified_functional: cert.is_some(), fits })
}

fn fits_csv(fits: &[(&str, Option<DecayFit>)]) -> String {
    let mut out = String::from("quantity,alpha,eta,r_squared\n");
    for (name, fit) in fits {
        let (a, e, r) = fit.map_or((f64::NAN, f64::NAN, f64::NAN), |f| (f.alpha, f.eta, f.r_squared));
        let _ = writeln!(out, "{name},{a:.16e},{e:.16e},{r:.16e}");
    }
    out
}

fn write_simulation(scn: &Scenario, out: &Path, sim: &SimulateOutcome) -> Result<String, HarnessError> {
    let functional = if sim.certified_functional { "certificate" } else { "QD" };
    let head = format!("{}functional = {functional}\n", header(scn));
    write(out, "trajectory.csv", &sim.trajectory.to_csv(&head))?;
    write(out, "fit.csv", &commented(&head, &fits_csv(&sim.fits)))?;
    if scn.sim.write_snapshots {
        let m = scn.matrices()?;
        for (k, s) in sim.trajectory.snapshots.iter().enumerate() {
            let body = format!("# t = {:.16e}\n{}", s.time, snapshot_csv(s, &m));
            write(out, &format!("snapshot_{k:05}.csv"), &body)?;
        }
    }
    Ok(head)
}

/// Writes `trajectory.csv`, `fit.csv` and, on request, per-record snapshots.
pub fn run_simulate(scn: &Scenario, out: &Path) -> Result<SimulateOutcome, HarnessError> {
    let sim = simulate_scenario(scn, false)?;
    write_simulation(scn, out, &sim)?;
    Ok(sim)
}

#[derive(Debug)]
pub struct ReconstructOutcome {
    pub simulation: SimulateOutcome,
    pub pose: PoseField,
    /// `sup |𝒩(p, R) − y|` over all records and nodes.
    pub transform_error: f64,
    pub observable: Vec<f64>,
    pub observable_fit: Option<DecayFit>,
}

/// Simulates, reconstructs the pose from the clamped-end data of the
/// reference at `x = ℓ`, and checks the round trip back to velocities and
/// strains. A trailing record off the uniform time lattice is skipped. Writes
/// the simulation files plus `pose_XXXXX.csv`,
/// `pose_residuals.csv` and `reconstruct_summary.csv`.
pub fn run_reconstruct(scn: &Scenario, out: &Path) -> Result<ReconstructOutcome, HarnessError> {
    let simulation = simulate_scenario(scn, true)?;
    let m = scn.matrices()?;
    let reference = scn.reference(&m)?;
    let mut states: Vec<StateField> = simulation.trajectory.snapshots.iter().map(|s| s.physical(&m)).collect();
    // The final record sits at t_end even when the stride does not divide
    // the step count; the pose lattice needs uniform spacing.
    if let [.., a, b, c] = states.as_slice() {
        let (h0, h1) = (b.time - a.time, c.time - b.time);
        if (h1 - h0).abs() > 1e-9 * h0 {
            states.pop();
        }
    }
    let numerical = |e: &dyn std::fmt::Display| HarnessError::Numerical(format!("reconstruction: {e}"));

    let end = reference.grid.cells;
    let q_in = quaternion_from_rotation(&reference.rotations[end]).map_err(|e| numerical(&e))?;
    let h_p = reference.centerline()[end];
    let mut pose = reconstruct_rotation(&states, &reference, &q_in, true).map_err(|e| numerical(&e))?;
    let p0 = initial_centerline(&pose, &states, &h_p);
    reconstruct_centerline(&mut pose, &states, &p0, &h_p).map_err(|e| numerical(&e))?;
    let back = strains_velocities_from_pose(&pose, &reference).map_err(|e| numerical(&e))?;
    let transform_error = back
        .iter()
        .zip(&states)
        .flat_map(|(a, b)| a.values.iter().zip(&b.values).map(|(u, v)| (u - v).amax()))
        .fold(0.0, f64::max);
    let observable = decay_observable(&pose, &states);
    let observable_fit = fit_decay(&pose.times, &observable, scn.round_trip()).ok();

    let head = write_simulation(scn, out, &simulation)?;
    for t in 0..pose.times.len() {
        write(out, &format!("pose_{t:05}.csv"), &pose.snapshot_csv(t))?;
    }
    write(out, "pose_residuals.csv", &commented(&head, &pose.residuals_csv(&observable)))?;
    let max = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
    let mut summary = String::from("name,value\n");
    let (c2, c1, r2) = observable_fit.map_or((f64::NAN, f64::NAN, f64::NAN), |f| (f.alpha, f.eta, f.r_squared));
    for (name, v) in [
        ("norm_defect", pose.norm_defect),
        ("transform_error", transform_error),
        ("residual_r_max", max(&pose.residual_r)),
        ("residual_p_max", max(&pose.residual_p)),
        ("route_gap_max", max(&pose.route_gap)),
        ("observable_c1", c1),
        ("observable_c2", c2),
        ("observable_r_squared", r2),
    ] {
        let _ = writeln!(summary, "{name},{v:.16e}");
    }
    write(out, "reconstruct_summary.csv", &commented(&head, &summary))?;
    Ok(ReconstructOutcome { simulation, pose, transform_error, observable, observable_fit })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub c_kappa: f64,
    pub certificate_valid: bool,
    pub alpha: f64,
    pub r_squared: f64,
    pub runtime: f64,
    pub error: Option<String>,
}

impl SweepRow {
    /// A failed run or a non-decaying functional.
    pub fn failed(&self) -> bool {
        self.error.is_some() || !(self.alpha > 0.0)
    }
}

pub fn sweep_scenario(base: &Scenario, axis: SweepAxis, value: f64) -> Scenario {
    let mut s = base.clone();
    s.sweep = None;
    match axis {
        SweepAxis::Mu1 | SweepAxis::Mu2 => {
            if s.feedback == scenario::FeedbackSpec::Optimal {
                let m = s.matrices().ok();
                if let Some(m) = m {
                    s.params.mu1 = m.mu[0];
                    s.params.mu2 = m.mu[3];
                }
            }
            s.feedback = scenario::FeedbackSpec::Gains;
            if axis == SweepAxis::Mu1 {
                s.params.mu1 = value;
            } else {
                s.params.mu2 = value;
            }
        }
        SweepAxis::Amplitude => s.datum.amplitude = value,
        SweepAxis::Cells => s.sim.cells = value as usize,
    }
    s
}

fn sweep_row(scn: &Scenario, value: f64, with_simulation: bool) -> SweepRow {
    let start = Instant::now();
    let mut row = SweepRow {
        value,
        c_kappa: f64::NAN,
        certificate_valid: false,
        alpha: f64::NAN,
        r_squared: f64::NAN,
        runtime: 0.0,
        error: None,
    };
    let mut run = || -> Result<(), HarnessError> {
        let cert = certify(scn)?;
        row.c_kappa = cert.certificate.c_kappa;
        row.certificate_valid = cert.certificate.valid();
        if with_simulation {
            let sim = simulate_scenario(scn, false)?;
            if let Some(Some(fit)) = sim.fits.first().map(|f| f.1) {
                row.alpha = fit.alpha;
                row.r_squared = fit.r_squared;
            }
        }
        Ok(())
    };
    if let Err(e) = run() {
        row.error = Some(e.to_string());
    }
    row.runtime = start.elapsed().as_secs_f64();
    row
}

/// Runs every value of `scn.sweep` as an independent scenario on a pool of
/// `workers` threads. Rows keep the input order. Writes `sweep.csv`,
/// `sweep_timing.csv` and `sweep_summary.csv`; row failures are recorded.
pub fn run_sweep(scn: &Scenario, out: &Path, workers: usize) -> Result<Vec<SweepRow>, HarnessError> {
    scn.validate()?;
    let spec = scn
        .sweep
        .clone()
        .ok_or_else(|| HarnessError::Validation("scenario has no [sweep] section".into()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::Io(e.to_string()))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        spec.values
            .par_iter()
            .map(|&v| sweep_row(&sweep_scenario(scn, spec.axis, v), v, spec.simulate))
            .collect()
    });

    let head = header(scn);
    let mut table = String::from("value,c_kappa,certificate_valid,alpha_L,r_squared,error\n");
    let mut timing = String::from("value,runtime_s\n");
    for r in &rows {
        let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        let _ = writeln!(
            table,
            "{:.16e},{:.16e},{},{:.16e},{:.16e},{err}",
            r.value, r.c_kappa, r.certificate_valid as u8, r.alpha, r.r_squared
        );
        let _ = writeln!(timing, "{:.16e},{:.6e}", r.value, r.runtime);
    }
    write(out, "sweep.csv", &commented(&head, &table))?;
    write(out, "sweep_timing.csv", &timing)?;

    let mut summary = String::from("name,value\n");
    if let Some(best) = rows
        .iter()
        .filter(|r| r.c_kappa.is_finite())
        .min_by(|a, b| a.c_kappa.total_cmp(&b.c_kappa))
    {
        let _ = writeln!(summary, "argmin_c_kappa,{:.16e}", best.value);
    }
    if spec.axis == SweepAxis::Amplitude && spec.simulate {
        let first = rows.iter().find(|r| r.failed()).map_or(f64::NAN, |r| r.value);
        let _ = writeln!(summary, "first_failing_amplitude,{first:.16e}");
    }
    write(out, "sweep_summary.csv", &commented(&head, &summary))?;
    Ok(rows)
}

/// Writes `matrices.csv` and `reference.csv`.
pub fn run_dump_matrices(scn: &Scenario, out: &Path) -> Result<(), HarnessError> {
    scn.validate()?;
    let m = scn.matrices()?;
    let reference = scn.reference(&m)?;
    let head = header(scn);
    write(out, "matrices.csv", &commented(&head, &m.dump_csv()))?;
    write(out, "reference.csv", &reference.to_csv())
}
