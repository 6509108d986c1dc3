//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use angiofem::diagnostics::{ch_energy_with, constraint_report, total_mass};
use angiofem::fem::{lumped_mass, FemSpace};
use angiofem::io::{generate_sphere_case, DomainSpec};
use angiofem::mesh::{box_mesh, SimplicialMesh, TensorKind};
use angiofem::model::{
    mobility_factor, psi1_prime, psi2_prime, psi_prime, source_necrotic, source_nutrient, source_viable,
    uniform_steady_state, ModelParams, TherapySchedule,
};
use angiofem::scheme::{
    adaptive_dt, implicit_reaction_diffusion, project_scalar, step_forcing, Chemicals, CoupledSystem,
    ExplicitTerms, Integrator, Operators, SchemeOptions, SimulationState,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};

/// Outcome of one criterion: pass flag and a one-line measurement summary.
type Verdict = (bool, String);

fn sphere(params: &ModelParams<f64>) -> (SimplicialMesh<f64>, SimulationState<f64>) {
    generate_sphere_case(&DomainSpec::default(), params).unwrap()
}

fn c1_potential() -> Verdict {
    let mut well = 0.0f64;
    for phi_bar in [0.2f64, 0.389, 0.6] {
        well = well.max(psi_prime(phi_bar, phi_bar).unwrap().abs());
    }
    let mut split = 0.0f64;
    for i in 0..1000 {
        let phi = 0.999 * i as f64 / 999.0;
        let lhs = psi1_prime(phi, 0.389).unwrap() + psi2_prime(phi, 0.389);
        split = split.max((lhs - psi_prime(phi, 0.389).unwrap()).abs());
    }
    (
        well <= 1e-12 && split <= 1e-12,
        format!("max|psi'(phi_bar)| = {well:.2e}, max|psi1'+psi2'-psi'| = {split:.2e}"),
    )
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn c2_steady_state() -> Verdict {
    let mut ok = true;
    let mut msg = Vec::new();
    for (name, p, target) in [
        ("case1", ModelParams::<f64>::case1(), 0.540),
        ("case2", ModelParams::<f64>::case2(), 0.190),
    ] {
        let s = uniform_steady_state(&p).unwrap();
        let oracle = bisect(|phi| source_nutrient(phi, 0.0, 0.0, p.delta_n, 1.0, &p), p.hr_width, 0.999);
        ok &= (s - target).abs() <= 0.005 && (s - oracle).abs() <= 1e-10;
        msg.push(format!("{name} {s:.4} (bisection {oracle:.4})"));
    }
    (ok, msg.join(", "))
}

fn c3_base_step() -> Verdict {
    let p = ModelParams::<f64>::case2();
    let mesh = box_mesh::<f64>(&[2.0, 2.0], &[4, 4]).unwrap();
    let s = SimulationState::healthy(mesh.n_nodes(), 1.0);
    let dt = adaptive_dt(&s, &mesh, &p);
    ((dt - 0.095).abs() <= 0.0005, format!("dt = {dt:.6} day"))
}

fn c4_structure() -> Verdict {
    let p = ModelParams::<f64>::case2();
    let (mesh, mut s) = sphere(&p);
    let mut integ = Integrator::new(&mesh, p, TherapySchedule::default(), SchemeOptions::default()).unwrap();
    let (mut min_phase, mut margin, mut lo, mut hi) = (f64::INFINITY, f64::INFINITY, 0.0f64, 1.0f64);
    let mut halvings = 0;
    for step in 0..50 {
        match integ.advance(&s) {
            Ok((next, out)) => {
                s = next;
                halvings += out.halvings;
            }
            Err(e) => return (false, format!("abort at step {step}: {e}")),
        }
        let r = constraint_report(&s, 1e-12, 1e-10);
        min_phase = min_phase.min(r.min[0]).min(r.min[1]);
        margin = margin.min(r.saturation_margin);
        for i in 2..5 {
            lo = lo.min(r.min[i]);
            hi = hi.max(r.max[i]);
        }
    }
    let ok = min_phase >= 0.0 && margin >= 1e-10 && lo >= -1e-12 && hi <= 1.0 + 1e-12;
    (
        ok,
        format!(
            "50 steps to t = {:.3}, min(phi_v,phi_d) = {min_phase:.1e}, margin = {margin:.3}, (phi_a,n,c) in [{lo:.1e}, {hi:.6}], {halvings} halvings, 0 aborts",
            s.t
        ),
    )
}

/// Source-free run shared by the mass and energy criteria.
struct SourceFree {
    mass_v: f64,
    mass_d: f64,
    worst_energy_rise: f64,
    energies: (f64, f64),
    aborted: Option<String>,
}

fn source_free_run() -> SourceFree {
    let p = ModelParams::<f64>::case2().without_sources_and_chemotaxis();
    let (mesh, mut s) = sphere(&p);
    let mut integ = Integrator::new(&mesh, p.clone(), TherapySchedule::default(), SchemeOptions::default()).unwrap();
    let w = integ.operators().weights().to_vec();
    let k = integ.operators().k_iso.clone();
    let (m0v, m0d) = (total_mass(&s.phi_v, &w).unwrap(), total_mass(&s.phi_d, &w).unwrap());
    let scale = m0v + m0d;
    let e0 = ch_energy_with(&s, &w, &k, &p).unwrap();
    let mut e_prev = e0;
    let mut out = SourceFree {
        mass_v: 0.0,
        mass_d: 0.0,
        worst_energy_rise: f64::NEG_INFINITY,
        energies: (e0, e0),
        aborted: None,
    };
    for step in 0..50 {
        s = match integ.advance(&s) {
            Ok((next, _)) => next,
            Err(e) => {
                out.aborted = Some(format!("abort at step {step}: {e}"));
                return out;
            }
        };
        out.mass_v = out.mass_v.max((total_mass(&s.phi_v, &w).unwrap() - m0v).abs() / scale);
        out.mass_d = out.mass_d.max((total_mass(&s.phi_d, &w).unwrap() - m0d).abs() / scale);
        let e = ch_energy_with(&s, &w, &k, &p).unwrap();
        out.worst_energy_rise = out.worst_energy_rise.max((e - e_prev) / e_prev.abs());
        e_prev = e;
    }
    out.energies.1 = e_prev;
    out
}

fn c5_mass(run: &SourceFree) -> Verdict {
    if let Some(e) = &run.aborted {
        return (false, e.clone());
    }
    (
        run.mass_v <= 1e-9 && run.mass_d <= 1e-9,
        format!("max relative drift phi_v {:.2e}, phi_d {:.2e} over 50 steps", run.mass_v, run.mass_d),
    )
}

fn c6_energy(run: &SourceFree) -> Verdict {
    if let Some(e) = &run.aborted {
        return (false, e.clone());
    }
    (
        run.worst_energy_rise <= 1e-10,
        format!(
            "E_CH {:.6e} -> {:.6e}, largest relative step change {:+.2e}",
            run.energies.0, run.energies.1, run.worst_energy_rise
        ),
    )
}

fn square_k() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[1.0, -0.5, -0.5, 0.0, -0.5, 1.0, 0.0, -0.5, -0.5, 0.0, 1.0, -0.5, 0.0, -0.5, -0.5, 1.0],
    )
}

/// Hand-assembled Laplacian of the unit square with per-cell mean of `b`.
fn square_kb(b: &[f64]) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(4, 4);
    for (ids, right) in [([0usize, 1, 3], 1usize), ([0, 3, 2], 2)] {
        let c = ids.iter().map(|&i| b[i]).sum::<f64>() / 3.0;
        for &i in &ids {
            for &j in &ids {
                let v = match (i == j, i == right || j == right) {
                    (true, true) => 1.0,
                    (true, false) => 0.5,
                    (false, true) => -0.5,
                    (false, false) => 0.0,
                };
                k[(i, j)] += c * v;
            }
        }
    }
    k
}

fn c7_oracles() -> Verdict {
    let mesh = box_mesh::<f64>(&[1.0, 1.0], &[1, 1]).unwrap();
    let p = ModelParams::<f64>::case2();
    let ops = Operators::new(&mesh, &p).unwrap();
    let w = DVector::from_vec(vec![1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0]);
    let k = square_k();
    let mut prev = SimulationState::healthy(4, 0.05);
    prev.phi_v = vec![0.3, 0.5, 0.2, 0.4];
    prev.phi_d = vec![0.05, 0.1, 0.0, 0.2];
    prev.phi_a = vec![0.01, 0.0, 0.02, 0.0];
    let (sig_v, sig_d) = (vec![0.5, -1.0, 0.2, 2.0], vec![-0.5, 0.3, 1.0, 0.0]);
    let (dt, mu) = (0.05, 0.004);
    let phi_t = prev.phi_t();

    // Step 1.
    let (z_v, z_d) = step_forcing(&ops, &prev.phi_v, &prev.phi_d, &sig_v, &sig_d, &phi_t, mu, &p);
    let lap = &k * DVector::from_vec(phi_t.clone());
    let mut err1 = 0.0f64;
    for j in 0..4 {
        let common = p.pi * p.eps * p.eps * lap[j] / w[j] + p.pi * psi2_prime(phi_t[j], p.phi_bar);
        err1 = err1.max((z_v[j] - (prev.phi_v[j] - mu * (common - sig_v[j]))).abs());
        err1 = err1.max((z_d[j] - (prev.phi_d[j] - mu * (common - sig_d[j]))).abs());
    }

    // Step 3.
    let chem = Chemicals {
        n: vec![0.8, 0.25, 0.4, 0.3],
        c: vec![0.0; 4],
        phi_a: prev.phi_a.clone(),
    };
    let ex = ExplicitTerms::new(&mesh, &ops, &prev, &chem, &p, dt, mu, (0.0, 0.0), false).unwrap();
    let sys = CoupledSystem::new(&ops, &p, dt, mu).unwrap();
    let (half_v, half_d) = ([0.31, 0.48, 0.22, 0.41], [0.04, 0.12, 0.01, 0.19]);
    let got = sys.solve(&ops, &p, &ex, &half_v, &half_d, &z_v, &z_d, &sig_v, &sig_d, 1e-14).unwrap();
    let wm = DMatrix::from_diagonal(&w);
    let e = mu * p.pi * p.eps * p.eps;
    let mut a = DMatrix::zeros(16, 16);
    let blocks: [(usize, usize, DMatrix<f64>); 10] = [
        (0, 0, &wm / dt),
        (0, 1, &k / p.l_v),
        (1, 0, &wm + &k * e),
        (1, 1, &wm * -mu),
        (1, 2, &k * e),
        (2, 2, &wm / dt),
        (2, 3, &k / p.l_d),
        (3, 0, &k * e),
        (3, 2, &wm + &k * e),
        (3, 3, &wm * -mu),
    ];
    for (bi, bj, m) in blocks {
        a.view_mut((4 * bi, 4 * bj), (4, 4)).copy_from(&m);
    }
    let b_v: Vec<f64> = (0..4).map(|j| mobility_factor(prev.phi_v[j], phi_t[j], prev.phi_a[j])).collect();
    let b_d: Vec<f64> = (0..4).map(|j| mobility_factor(prev.phi_d[j], phi_t[j], prev.phi_a[j])).collect();
    let chemo = square_kb(&b_v) * DVector::from_vec(chem.n.clone()) * p.h_v_base;
    let lag_v = (&k - square_kb(&b_v)) * DVector::from_vec(sig_v.clone()) / p.l_v;
    let lag_d = (&k - square_kb(&b_d)) * DVector::from_vec(sig_d.clone()) / p.l_d;
    let mut rhs = DVector::zeros(16);
    for j in 0..4 {
        let gv = source_viable(prev.phi_v[j], prev.phi_d[j], prev.phi_a[j], chem.n[j], 0.0, &p);
        let gd = source_necrotic(prev.phi_v[j], prev.phi_d[j], chem.n[j], 0.0, &p);
        let psi2 = p.pi * psi2_prime(phi_t[j], p.phi_bar);
        rhs[j] = w[j] * (prev.phi_v[j] / dt + gv) + chemo[j] + lag_v[j];
        rhs[4 + j] = w[j] * (2.0 * half_v[j] - z_v[j] - mu * psi2);
        rhs[8 + j] = w[j] * (prev.phi_d[j] / dt + gd) + lag_d[j];
        rhs[12 + j] = w[j] * (2.0 * half_d[j] - z_d[j] - mu * psi2);
    }
    let x = a.lu().solve(&rhs).unwrap();
    let mut err3 = 0.0f64;
    for j in 0..4 {
        for (g, o) in [
            (got.phi_v[j], x[j]),
            (got.sigma_v[j], x[4 + j]),
            (got.phi_d[j], x[8 + j]),
            (got.sigma_d[j], x[12 + j]),
        ] {
            err3 = err3.max((g - o).abs() / o.abs().max(1.0));
        }
    }

    // Step 2 against bisection.
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let mut err2 = 0.0f64;
    for _ in 0..100 {
        let z: f64 = rng.gen_range(-0.5..1.5);
        let other: f64 = rng.gen_range(0.0..0.9);
        let mu_pi: f64 = 10f64.powf(rng.gen_range(-3.0..1.0));
        let g = |phi: f64| phi + mu_pi * psi1_prime(phi + other, p.phi_bar).unwrap() - z;
        let oracle = if g(0.0) >= 0.0 {
            0.0
        } else {
            bisect(|phi| if phi >= 1.0 - other { 1.0 } else { g(phi) }, 0.0, 1.0 - other)
        };
        match project_scalar(z, other, mu_pi, p.phi_bar, 0.5 * (1.0 - other), None, 1e-13, 10_000) {
            Ok((phi, _)) => err2 = err2.max((phi - oracle).abs()),
            Err(e) => return (false, format!("projection failed: {e}")),
        }
    }
    (
        err1 <= 1e-9 && err3 <= 1e-9 && err2 <= 1e-8,
        format!("step 1 err {err1:.1e}, step 3 err {err3:.1e}, projection err {err2:.1e} (100 triples)"),
    )
}

fn c8_order() -> Verdict {
    // u = exp(-t) cos(pi x) cos(pi y) on the unit square solves
    // u_t - lap u + u = 2 pi^2 u with homogeneous Neumann data.
    use std::f64::consts::PI;
    let (dt, t_end) = (1e-4f64, 0.1f64);
    let exact = |x: &[f64; 3], t: f64| (-t).exp() * (PI * x[0]).cos() * (PI * x[1]).cos();
    let mut errors = Vec::new();
    for m in [8usize, 16, 32] {
        let mesh = box_mesh::<f64>(&[1.0, 1.0], &[m, m]).unwrap();
        let space = FemSpace::new(&mesh);
        let k = space.stiffness(TensorKind::Identity, None, None).unwrap();
        let w = lumped_mass(&mesh);
        let reaction = vec![1.0; mesh.n_nodes()];
        let mut u: Vec<f64> = mesh.coords().iter().map(|x| exact(x, 0.0)).collect();
        let steps = (t_end / dt).round() as usize;
        for n in 1..=steps {
            let t = n as f64 * dt;
            let f: Vec<f64> = mesh.coords().iter().map(|x| 2.0 * PI * PI * exact(x, t)).collect();
            u = implicit_reaction_diffusion(&w, &k, dt, &reaction, &u, &f, 1e-13).unwrap();
        }
        let err: f64 = mesh
            .coords()
            .iter()
            .zip(&u)
            .zip(&w)
            .map(|((x, v), wj)| wj * (v - exact(x, t_end)).powi(2))
            .sum::<f64>()
            .sqrt();
        errors.push(err);
    }
    let o1 = (errors[0] / errors[1]).log2();
    let o2 = (errors[1] / errors[2]).log2();
    (
        o1.min(o2) >= 1.9,
        format!(
            "lumped L2 errors {:.3e}, {:.3e}, {:.3e}; observed orders {o1:.3}, {o2:.3}",
            errors[0], errors[1], errors[2]
        ),
    )
}

struct Angio {
    peak_end: f64,
    peak_run: f64,
    centroid_gap: (f64, f64),
    mean_distance: (f64, f64),
}

fn weighted_centroid(weights: &[f64], mesh: &SimplicialMesh<f64>) -> [f64; 3] {
    let total: f64 = weights.iter().sum();
    let mut c = [0.0; 3];
    for (x, wj) in mesh.coords().iter().zip(weights) {
        for d in 0..3 {
            c[d] += wj * x[d] / total;
        }
    }
    c
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Distance between the vessel and tumor centroids, and the vessel-weighted
/// mean distance to the tumor centroid.
fn angio_geometry(s: &SimulationState<f64>, mesh: &SimplicialMesh<f64>, w: &[f64]) -> (f64, f64) {
    let wa: Vec<f64> = s.phi_a.iter().zip(w).map(|(a, b)| a * b).collect();
    let wt: Vec<f64> = s.phi_t().iter().zip(w).map(|(a, b)| a * b).collect();
    let ca = weighted_centroid(&wa, mesh);
    let ct = weighted_centroid(&wt, mesh);
    let total: f64 = wa.iter().sum();
    let mean = mesh.coords().iter().zip(&wa).map(|(x, m)| m * dist(x, &ct)).sum::<f64>() / total;
    (dist(&ca, &ct), mean)
}

fn angio_run(p: ModelParams<f64>) -> Result<Angio, String> {
    let (mesh, mut s) = sphere(&p);
    let mut integ = Integrator::new(&mesh, p, TherapySchedule::default(), SchemeOptions::default()).unwrap();
    let w = integ.operators().weights().to_vec();
    let mut peak_run = 0.0f64;
    let mut early = None;
    while s.t < 10.0 - 1e-9 {
        let mut attempt = s.clone();
        attempt.dt = angiofem::io::clip_to_end(s.t, s.dt, 10.0);
        s = integ.advance(&attempt).map_err(|e| format!("abort at t = {:.3}: {e}", s.t))?.0;
        peak_run = peak_run.max(s.phi_a.iter().cloned().fold(0.0, f64::max));
        if early.is_none() && s.t >= 2.5 - 1e-9 {
            early = Some(angio_geometry(&s, &mesh, &w));
        }
    }
    let late = angio_geometry(&s, &mesh, &w);
    let early = early.unwrap();
    Ok(Angio {
        peak_end: s.phi_a.iter().cloned().fold(0.0, f64::max),
        peak_run,
        centroid_gap: (early.0, late.0),
        mean_distance: (early.1, late.1),
    })
}

fn c9_contrast() -> Verdict {
    let (c1, c2) = match (angio_run(ModelParams::case1()), angio_run(ModelParams::case2())) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return (false, e),
    };
    let ratio = c2.peak_end / c1.peak_end;
    let moves_in = c2.mean_distance.1 < c2.mean_distance.0;
    (
        ratio >= 3.0 && moves_in,
        format!(
            "peak phi_a at t=10: case1 {:.4}, case2 {:.4}, ratio {ratio:.2} (need >= 3; run maxima {:.4} / {:.4}); \
             case2 centroid gap {:.1e} -> {:.1e} mm, mean vessel distance to tumor centroid {:.3} -> {:.3} mm",
            c1.peak_end,
            c2.peak_end,
            c1.peak_run,
            c2.peak_run,
            c2.centroid_gap.0,
            c2.centroid_gap.1,
            c2.mean_distance.0,
            c2.mean_distance.1
        ),
    )
}

fn c10_recovery() -> Verdict {
    let p = ModelParams::<f64>::case2();
    let (mesh, mut s) = sphere(&p);
    s.dt = 64.0 * p.base_time_step();
    let mut integ = Integrator::new(&mesh, p, TherapySchedule::default(), SchemeOptions::default()).unwrap();
    match integ.advance(&s) {
        Ok((next, out)) => {
            let admissible = next.check(1e-12, 1e-10).is_ok() && constraint_report(&next, 1e-12, 1e-10).all_ok();
            (
                out.halvings >= 1 && admissible,
                format!("injected dt = {:.3}, {} halvings, committed dt = {:.4}", s.dt, out.halvings, out.dt),
            )
        }
        Err(e) => (false, format!("no step committed: {e}")),
    }
}

fn c11_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("case.cfg");
    std::fs::write(&cfg, "case = resection\nseed = 42\nt_end = 1\ncadence = 100\n").unwrap();
    let run = |out: &Path| {
        Command::new(env!("CARGO_BIN_EXE_angiofem"))
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .output()
            .unwrap()
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let (ra, rb) = (run(&a), run(&b));
    if !ra.status.success() || !rb.status.success() {
        return (false, format!("run failed: {}", String::from_utf8_lossy(&ra.stderr)));
    }
    let ca = std::fs::read(a.join("report.csv")).unwrap();
    let cb = std::fs::read(b.join("report.csv")).unwrap();
    let rows = ca.iter().filter(|c| **c == b'\n').count() - 1;
    (
        ca == cb,
        format!("two resection runs (seed 42, {rows} rows, {} bytes) identical: {}", ca.len(), ca == cb),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, budget: Duration, f: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(f));
        let elapsed = start.elapsed();
        let (ok, msg) = verdict.unwrap_or_else(|_| (false, "panicked".into()));
        let ok = ok && elapsed <= budget;
        if !ok {
            failed += 1;
        }
        println!(
            "{} [{id:>2}] {name}: {msg} ({:.1} s, budget {} s)",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    };
    let s = Duration::from_secs;
    report(1, "potential identities", s(1), &mut c1_potential);
    report(2, "uniform steady state", s(1), &mut c2_steady_state);
    report(3, "base time step", s(1), &mut c3_base_step);
    report(4, "structure preservation", s(300), &mut c4_structure);
    let start = Instant::now();
    let free = source_free_run();
    let shared = start.elapsed();
    report(5, "mass conservation", s(300), &mut || {
        let (ok, msg) = c5_mass(&free);
        (ok, format!("{msg}; shared run {:.1} s", shared.as_secs_f64()))
    });
    report(6, "reduced energy decay", s(300), &mut || c6_energy(&free));
    report(7, "oracle equivalence", s(10), &mut c7_oracles);
    report(8, "sub-solver convergence order", s(120), &mut c8_order);
    report(9, "case-1/case-2 angiogenesis contrast", s(900), &mut c9_contrast);
    report(10, "time-step halving recovery", s(60), &mut c10_recovery);
    report(11, "determinism", s(300), &mut c11_determinism);
    println!("acceptance: {} of 11 criteria passed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
