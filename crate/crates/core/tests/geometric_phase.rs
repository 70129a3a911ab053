use std::f64::consts::PI;

use chaos_probe_core::dephasing::{effective_decoherence_factor, perturbed_eigensystems, TimeGrid};
use chaos_probe_core::geomphase::{geometric_phase, kinematic_phase, probe_trajectory};
use chaos_probe_core::operators::{
    build_coupling, build_environment, EnvironmentModel, IsingConfig, ProbeConfig, SpinRegister,
};

fn ising_phase(steps: usize) -> f64 {
    let reg = SpinRegister::new(5).unwrap();
    let env = build_environment(
        &EnvironmentModel::Ising(IsingConfig {
            hx: 1.0,
            hz: 0.5,
            j: 1.0,
        }),
        reg,
    )
    .unwrap();
    let pe = perturbed_eigensystems(&env, &build_coupling(0.1, reg).unwrap()).unwrap();
    let probe = ProbeConfig::new(1.0, 0.1, 3.0 * PI / 8.0, 0.0).unwrap();
    let grid = TimeGrid::new(1.0, 5, steps).unwrap();
    geometric_phase(&probe, &effective_decoherence_factor(&pe, &grid))
        .unwrap()
        .phi
}

#[test]
fn refinement_changes_phase_negligibly() {
    let coarse = ising_phase(200);
    let fine = ising_phase(400);
    assert!((coarse - fine).abs() < 1e-8, "{coarse} vs {fine}");
}

#[test]
fn grid_convergence_is_monotone() {
    let diffs: Vec<f64> = [50, 100, 200]
        .iter()
        .map(|&n| (ising_phase(2 * n) - ising_phase(n)).abs())
        .collect();
    assert!(diffs[0] > diffs[1] && diffs[1] > diffs[2], "{diffs:?}");
}

#[test]
fn dephasing_lowers_phase() {
    let reg = SpinRegister::new(4).unwrap();
    let env = build_environment(
        &EnvironmentModel::Ising(IsingConfig {
            hx: 1.0,
            hz: 0.5,
            j: 1.0,
        }),
        reg,
    )
    .unwrap();
    let pe = perturbed_eigensystems(&env, &build_coupling(0.3, reg).unwrap()).unwrap();
    let probe = ProbeConfig::new(1.0, 0.3, 3.0 * PI / 8.0, 0.0).unwrap();
    let grid = TimeGrid::new(1.0, 4, 200).unwrap();
    let trace = effective_decoherence_factor(&pe, &grid);
    let phi = kinematic_phase(&probe_trajectory(&probe, &trace).unwrap()).unwrap();
    let res = geometric_phase(&probe, &trace).unwrap();
    assert_eq!(phi, res.phi);
    assert!(res.delta.abs() > 1e-6 && res.delta.abs() < 1.0, "{res:?}");
}
