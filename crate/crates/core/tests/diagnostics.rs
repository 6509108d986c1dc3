use angiofem::diagnostics::{
    ch_energy, constraint_report, line_probe, total_mass, DiagnosticsError, EnergyAddends, StepReport,
};
use angiofem::fem::{lumped_mass, FemSpace};
use angiofem::io::{generate_sphere_case, DomainSpec};
use angiofem::mesh::{box_mesh, SimplicialMesh, TensorKind};
use angiofem::model::{psi, ModelParams};
use angiofem::scheme::SimulationState;
use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};

fn unit_mesh() -> SimplicialMesh<f64> {
    box_mesh(&[2.0, 1.0], &[4, 2]).unwrap()
}

#[test]
fn mass_of_constants() {
    let mesh = unit_mesh();
    let w = lumped_mass(&mesh);
    assert_relative_eq!(total_mass(&vec![1.0; w.len()], &w).unwrap(), 2.0, epsilon = 1e-14);
    assert_eq!(total_mass(&vec![0.0; w.len()], &w).unwrap(), 0.0);
    assert!(matches!(total_mass(&[1.0], &w), Err(DiagnosticsError::Length { .. })));
}

#[test]
fn mass_matches_direct_sum() {
    let mesh = unit_mesh();
    let w = lumped_mass(&mesh);
    let mut rng = rand::rngs::StdRng::seed_from_u64(3);
    let f: Vec<f64> = (0..w.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut direct = 0.0;
    for j in 0..w.len() {
        direct += f[j] * w[j];
    }
    assert_relative_eq!(total_mass(&f, &w).unwrap(), direct, epsilon = 1e-15);
}

#[test]
fn energy_of_constant_and_empty_fields() {
    let mesh = unit_mesh();
    let p = ModelParams::<f64>::default();
    let mut s = SimulationState::healthy(mesh.n_nodes(), 0.1);
    assert_eq!(ch_energy(&s, &mesh, &p).unwrap(), 0.0);
    s.phi_v = vec![p.phi_bar; mesh.n_nodes()];
    let expected = p.pi * 2.0 * psi(p.phi_bar, p.phi_bar).unwrap();
    assert_relative_eq!(ch_energy(&s, &mesh, &p).unwrap(), expected, epsilon = 1e-12);
}

#[test]
fn energy_on_single_cell_by_hand() {
    // Right triangle (0,0),(1,0),(0,1): weights 1/6 each, gradient of
    // phi = a + b x + c y is (b, c) on an area of 1/2.
    let mesh = SimplicialMesh::new(
        2,
        vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        vec![0, 1, 2],
        vec![Default::default()],
    )
    .unwrap();
    let p = ModelParams::<f64>::default();
    let mut s = SimulationState::healthy(3, 0.1);
    s.phi_v = vec![0.2, 0.3, 0.1];
    s.phi_d = vec![0.1, 0.0, 0.05];
    let t = [0.3, 0.3, 0.15];
    let bulk: f64 = t.iter().map(|x| psi(*x, p.phi_bar).unwrap() / 6.0).sum();
    let (gx, gy) = (t[1] - t[0], t[2] - t[0]);
    let grad = 0.5 * (gx * gx + gy * gy);
    let expected = p.pi * bulk + 0.5 * p.pi * p.eps * p.eps * grad;
    assert_relative_eq!(ch_energy(&s, &mesh, &p).unwrap(), expected, epsilon = 1e-12);
}

#[test]
fn energy_rejects_saturated_nodes() {
    let mesh = unit_mesh();
    let mut s = SimulationState::healthy(mesh.n_nodes(), 0.1);
    s.phi_v[3] = 0.7;
    s.phi_d[3] = 0.3;
    assert!(matches!(
        ch_energy(&s, &mesh, &ModelParams::default()),
        Err(DiagnosticsError::Barrier { node: 3, .. })
    ));
}

#[test]
fn vessel_entropy_uses_continuous_extension() {
    let mesh = unit_mesh();
    let space = FemSpace::new(&mesh);
    let k = space.stiffness(TensorKind::Diffusion, None, None).unwrap();
    let mut s = SimulationState::healthy(mesh.n_nodes(), 0.1);
    s.phi_a[0] = 0.5;
    let e = EnergyAddends::compute(&s, space.lumped_mass(), &k).unwrap();
    assert!(e.vessel_entropy.is_finite());
    assert_relative_eq!(e.vessel_entropy, space.lumped_mass()[0] * 0.5 * (0.5f64.ln() - 1.0));
    assert_eq!(e.total(1.0, [0.0, 0.0, 0.0]), 1.0);
}

#[test]
fn probe_reproduces_linear_fields() {
    let mesh = box_mesh::<f64>(&[4.0, 2.0], &[8, 4]).unwrap();
    let mut s = SimulationState::healthy(mesh.n_nodes(), 0.1);
    s.c = mesh.coords().iter().map(|x| 0.1 + 0.2 * x[0]).collect();
    let table = line_probe(&s, &mesh, [0.0, 0.7, 0.0], [4.0, 0.7, 0.0], 17).unwrap();
    assert_eq!(table.len(), 17);
    for smp in &table {
        let v = smp.values.unwrap();
        assert_relative_eq!(v[4], 0.1 + 0.2 * smp.point[0], epsilon = 1e-12);
        assert_relative_eq!(v[3], 1.0, epsilon = 1e-12);
        assert_relative_eq!(smp.s, smp.point[0], epsilon = 1e-12);
    }
}

#[test]
fn probe_flags_points_outside() {
    let mesh = unit_mesh();
    let s = SimulationState::healthy(mesh.n_nodes(), 0.1);
    let table = line_probe(&s, &mesh, [1.0, 0.5, 0.0], [3.0, 0.5, 0.0], 5).unwrap();
    assert!(table[0].values.is_some());
    assert!(table[4].values.is_none());
    assert!(matches!(
        line_probe(&s, &mesh, [5.0, 5.0, 0.0], [6.0, 6.0, 0.0], 3),
        Err(DiagnosticsError::ProbeOutside)
    ));
    assert!(line_probe(&s, &mesh, [0.0; 3], [1.0, 0.0, 0.0], 1).is_err());
}

#[test]
fn probe_through_initial_sphere() {
    let p = ModelParams::<f64>::case1();
    let (mesh, s) = generate_sphere_case(&DomainSpec::default(), &p).unwrap();
    let table = line_probe(&s, &mesh, [0.0, 10.0, 0.0], [20.0, 10.0, 0.0], 81).unwrap();
    for smp in table {
        let r = (smp.point[0] - 10.0).abs();
        let v = smp.values.unwrap()[0];
        if r <= 2.5 - 0.5 {
            assert_relative_eq!(v, 0.6, epsilon = 1e-12);
        } else if r >= 2.5 + 0.5 {
            assert_eq!(v, 0.0);
        }
    }
}

#[test]
fn constraint_flags() {
    let mesh = unit_mesh();
    let mut s = SimulationState::healthy(mesh.n_nodes(), 0.1);
    assert!(constraint_report(&s, 1e-12, 1e-10).all_ok());
    s.n[2] = -1e-6;
    let r = constraint_report(&s, 1e-12, 1e-10);
    assert!(!r.n_in_range && !r.all_ok());
    s.n[2] = 1.0;
    s.phi_v[1] = 0.6;
    s.phi_d[1] = 0.4 - 1e-12;
    let r = constraint_report(&s, 1e-12, 1e-10);
    assert!(r.saturation_margin <= 1e-12 + 1e-16);
    assert!(!r.saturation_ok);
    assert!(constraint_report(&s, 1e-12, 1e-13).saturation_ok);
}

#[test]
fn report_row_reflects_state() {
    let mesh = unit_mesh();
    let space = FemSpace::new(&mesh);
    let k = space.stiffness(TensorKind::Identity, None, None).unwrap();
    let mut s = SimulationState::healthy(mesh.n_nodes(), 0.1);
    s.phi_v = vec![0.25; mesh.n_nodes()];
    let r = StepReport::new(&s, None, space.lumped_mass(), &k, &ModelParams::default(), 1e-12, 1e-10).unwrap();
    assert_relative_eq!(r.masses[0], 0.5, epsilon = 1e-14);
    assert_eq!(r.max[0], 0.25);
    let row = r.csv_row();
    assert!(row.starts_with("0,0.00000000e0,0.00000000e0,5.00000000e-1,"));
    assert!(StepReport::<f64>::csv_header().starts_with("step,t,dt,mass_phi_v"));
}
