use nalgebra::DVector;
use ncphase_core::constrained;
use ncphase_core::darboux;
use ncphase_core::dynamics::{self, integrate, Method, OscillatorModel};
use ncphase_core::forms::{FieldConfig, Tolerances};
use ncphase_core::linalg::max_abs_vec;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn midpoint_error(dt: f64) -> f64 {
    let model = OscillatorModel::harmonic(1.0, 1.0).unwrap();
    let cfg = FieldConfig::planar(0.8, 0.3);
    let z0 = DVector::from_vec(vec![0.4, -0.2, 0.1, 0.7]);
    let t_final = 4.0;
    let steps = (t_final / dt).round() as usize;
    let traj = integrate(&cfg, &model, &z0, dt, steps, Method::Midpoint, &tol()).unwrap();
    let exact = dynamics::closed_form_solution_n2(&model, 0.8, 0.3, &z0, t_final, &tol()).unwrap();
    max_abs_vec(&(traj.final_state().unwrap() - exact))
}

#[test]
fn midpoint_is_second_order() {
    let e1 = midpoint_error(0.02);
    let e2 = midpoint_error(0.01);
    let ratio = e1 / e2;
    assert!((ratio - 4.0).abs() <= 0.4, "ratio {ratio}");
}

#[test]
fn midpoint_conserves_energy() {
    let model = OscillatorModel::harmonic(1.3, 0.7).unwrap();
    let cfg = FieldConfig::planar(0.5, -0.4);
    let z0 = DVector::from_vec(vec![1.0, 0.5, -0.3, 0.2]);
    let traj = integrate(&cfg, &model, &z0, 0.05, 100_000, Method::Midpoint, &tol()).unwrap();
    assert!(traj.relative_energy_drift() <= 1e-9, "{}", traj.relative_energy_drift());
}

#[test]
fn exact_propagation_conserves_energy_and_angular_momentum() {
    let model = OscillatorModel::harmonic(1.0, 2.0).unwrap();
    let cfg = FieldConfig::axial([0.0, 0.0, 0.7], [0.0, 0.0, 0.4]);
    let z0 = DVector::from_vec(vec![1.0, 0.5, -0.3, 0.2, 0.1, 0.9]);
    let traj = integrate(&cfg, &model, &z0, 0.1, 2000, Method::Exact, &tol()).unwrap();
    assert!(traj.relative_energy_drift() <= 1e-10);
    let l0 = traj.samples[0].lambda3.unwrap();
    for s in &traj.samples {
        assert!((s.lambda3.unwrap() - l0).abs() <= 1e-9);
    }
}

#[test]
fn darboux_coordinates_diagonalize_planar_flow() {
    // In (xi, pi) the Hamiltonian is an ordinary isotropic oscillator with
    // mass m' and stiffness kappa', so xi evolves with omega0'.
    let model = OscillatorModel::harmonic(1.0, 1.0).unwrap();
    let (b, c) = (1.2, 0.5);
    let f = dynamics::n2_frequencies(&model, b, c, &tol()).unwrap();
    let map = darboux::darboux_n2(b, c, &tol()).unwrap();
    let hess = map.t_inv.transpose() * model.hessian(2) * &map.t_inv;
    let expected_xx = f.kappa_prime;
    let expected_pp = 1.0 / f.m_prime;
    assert!((hess[(0, 0)] - expected_xx).abs() < 1e-12);
    assert!((hess[(1, 1)] - expected_xx).abs() < 1e-12);
    assert!((hess[(2, 2)] - expected_pp).abs() < 1e-12);
    assert!((hess[(3, 3)] - expected_pp).abs() < 1e-12);
}

#[test]
fn degenerate_chain_flow_matches_rotating_solution() {
    let model = OscillatorModel::harmonic(1.0, 1.0).unwrap();
    let cfg = FieldConfig::planar(1.0, -1.0);
    let chain = constrained::gnh_chain_for(&cfg, &model, &tol()).unwrap();
    let z0 = DVector::from_vec(vec![0.5, 0.25, -0.25, 0.5]);
    let traj = constrained::chain_trajectory(&chain, &model, &z0, 0.5, 100).unwrap();
    for s in &traj.samples {
        let closed = constrained::degenerate_flow_n2(&model, -1.0, &z0, s.t).unwrap();
        assert!(max_abs_vec(&(closed - DVector::from_column_slice(&s.z))) <= 1e-10);
        assert!(s.constraint_residual.unwrap() <= 1e-9);
    }
}
