use beamstab::beam::BeamMatrices;
use beamstab::model::{curved_reference, strains_velocities_from_pose, StateField};
use beamstab::pose::{
    decay_observable, initial_centerline, quaternion_from_rotation, reconstruct_centerline, reconstruct_rotation,
    PoseField,
};
use beamstab::presets;
use beamstab::solver::datum::generate_initial_datum;
use beamstab::solver::fit::fit_decay;
use beamstab::solver::{simulate, Scheme, SimConfig};

struct Run {
    pose: PoseField,
    states: Vec<StateField>,
    transform_error: f64,
}

fn helical_run(cells: usize, t_end: f64, renormalize: bool) -> Run {
    let m = BeamMatrices::new(&presets::toy_params()).unwrap();
    let reference = curved_reference(&m, cells, |_| presets::helical_curvature()).unwrap();
    let y0 = generate_initial_datum(&m, &reference, 5e-2, 21, 1);
    let mut cfg = SimConfig::new(cells, t_end);
    cfg.scheme = Scheme::Upwind1;
    cfg.lyapunov_order = 2;
    cfg.store_snapshots = true;
    let traj = simulate(&cfg, &m, &reference, &y0, None).unwrap();
    let states: Vec<StateField> = traj.snapshots.iter().map(|s| s.physical(&m)).collect();
    let q_in = quaternion_from_rotation(&reference.rotations[cells]).unwrap();
    let h_p = reference.centerline()[cells];
    let mut pose = reconstruct_rotation(&states, &reference, &q_in, renormalize).unwrap();
    let p0 = initial_centerline(&pose, &states, &h_p);
    reconstruct_centerline(&mut pose, &states, &p0, &h_p).unwrap();
    let back = strains_velocities_from_pose(&pose, &reference).unwrap();
    let transform_error = back
        .iter()
        .zip(&states)
        .flat_map(|(a, b)| a.values.iter().zip(&b.values).map(|(u, v)| (u - v).amax()))
        .fold(0.0, f64::max);
    Run { pose, states, transform_error }
}

fn max(v: &[f64]) -> f64 {
    v.iter().cloned().fold(0.0, f64::max)
}

#[test]
fn helical_round_trip_converges_at_first_order() {
    let coarse = helical_run(64, 1.0, true);
    let fine = helical_run(128, 1.0, true);
    let ratios = [
        coarse.transform_error / fine.transform_error,
        max(&coarse.pose.residual_r) / max(&fine.pose.residual_r),
        max(&coarse.pose.residual_p) / max(&fine.pose.residual_p),
    ];
    for r in ratios {
        assert!((1.7..=2.3).contains(&r), "{ratios:?}");
    }
    assert!(fine.pose.norm_defect < 1e-10);
    assert!(max(&fine.pose.route_gap) < max(&coarse.pose.route_gap));
}

#[test]
fn unnormalised_quaternions_stay_unit() {
    let run = helical_run(32, 0.5, false);
    assert!(run.pose.norm_defect < 1e-10, "{}", run.pose.norm_defect);
}

#[test]
fn observable_decays() {
    let run = helical_run(32, 12.0, true);
    let obs = decay_observable(&run.pose, &run.states);
    let fit = fit_decay(&run.pose.times, &obs, 2.0).unwrap();
    assert!(fit.alpha > 0.0 && fit.eta > 0.0, "{fit:?}");
}
