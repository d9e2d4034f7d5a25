use super::*;
use crate::model::{DissipationConfig, Interaction};
use crate::space::{cavity_op, make_space, CavityKind};
use crate::sparse::dense_to_vec;
use ndarray::Array2;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn quick_sim(t_final: f64, sample_dt: f64, n_max: usize) -> SimulationConfig {
    SimulationConfig {
        t_final,
        sample_dt,
        rel_tol: 1e-10,
        abs_tol: 1e-12,
        fock_policy: FockPolicy::Fixed { n_max },
        storage: StorageMode::Full,
        check_stride: 10,
    }
}

fn build_l(
    n: usize,
    n_max: usize,
    interaction: Interaction,
    g: f64,
    diss: DissipationConfig,
) -> Superoperator {
    let space = make_space(n, n_max).unwrap();
    let m = ModelConfig::resonant(interaction, g);
    let h0 = build_static_hamiltonian(space, &m);
    let dop = build_drive_operator(space);
    let cs = build_collapse_ops(space, &diss);
    build_liouvillian(h0, dop, cs).unwrap()
}

fn full_state(s: &Sample) -> &DensityMatrix {
    match &s.state {
        SampleState::Full(dm) => dm,
        _ => panic!("expected full storage"),
    }
}

#[test]
fn zero_hamiltonian_no_dissipation_is_constant() {
    let space = make_space(2, 2).unwrap();
    let zero = crate::space::Operator::new(
        space,
        Csr::zeros(space.total_dim(), space.total_dim()),
        true,
    )
    .unwrap();
    let dop = build_drive_operator(space);
    let l = build_liouvillian(zero, dop, vec![]).unwrap();
    let rho0 = initial_state(space, &InitialStateSpec::undriven(1)).unwrap();
    let traj = evolve(&rho0, &l, None, &quick_sim(3.0, 0.1, 2)).unwrap();
    for s in traj.samples() {
        let m = full_state(s).matrix();
        let dev: f64 = m
            .iter()
            .zip(rho0.matrix().iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-12);
    }
}

#[test]
fn jaynes_cummings_rabi_oscillation() {
    // N=1 TC, g = 0.1, no drive, no dissipation, rho0 = |g> ⊗ |1>:
    // excited population sin^2(g t), first full transfer at t = pi / (2 g)
    let g = 0.1;
    let l = build_l(1, 2, Interaction::TavisCummings, g, DissipationConfig::closed());
    let space = l.space();
    let rho0 = initial_state(space, &InitialStateSpec::undriven(1)).unwrap();
    let t_transfer = std::f64::consts::PI / (2.0 * g);
    let traj = evolve(&rho0, &l, None, &quick_sim(20.0, 0.01, 2)).unwrap();

    // excited qubit population = <m_idx = 1| rho_qub |m_idx = 1>
    let mut max_err = 0.0f64;
    let mut transfer_time = None;
    let mut best_pop = 0.0;
    for (t, s) in traj.times().iter().zip(traj.samples()) {
        let rho = full_state(s);
        let rq = crate::space::partial_trace(rho, Keep::Qubits);
        let pe = rq.matrix()[(1, 1)].re;
        let expect = (g * t).sin().powi(2);
        max_err = max_err.max((pe - expect).abs());
        if transfer_time.is_none() && pe > best_pop {
            best_pop = pe;
            if pe > 1.0 - 1e-6 {
                transfer_time = Some(*t);
            }
        }
    }
    assert!(max_err < 1e-7, "max deviation from sin^2(gt): {max_err}");
    let tt = transfer_time.expect("full transfer reached");
    assert!(
        (tt - t_transfer).abs() / t_transfer < 0.005,
        "transfer at {tt}, expected {t_transfer}"
    );
}

#[test]
fn amplitude_damping_photon_decay() {
    // kappa > 0, rho0 = |1><1| on the cavity: photon number decays as
    // exp(-kappa t), checked at t = 1/kappa within 1e-6
    let kappa = 0.5;
    let l = build_l(
        1,
        2,
        Interaction::TavisCummings,
        0.0,
        DissipationConfig::new(kappa, 0.0, 0.0).unwrap(),
    );
    let space = l.space();
    let rho0 = initial_state(space, &InitialStateSpec::undriven(1)).unwrap();
    let t_check = 1.0 / kappa;
    let traj = evolve(&rho0, &l, None, &quick_sim(t_check, t_check / 200.0, 2)).unwrap();
    let num = cavity_op(space, CavityKind::Number);
    for (t, s) in traj.times().iter().zip(traj.samples()) {
        let n = expect(num.matrix(), full_state(s).matrix()).re;
        let exact = (-kappa * t).exp();
        assert!(
            (n - exact).abs() < 1e-6,
            "t = {t}: photon number {n} vs {exact}"
        );
    }
}

/// Independent reference: fixed-step RK4 on the vectorized generator built
/// from the verbatim superoperator formula.
fn rk4_reference(
    l: &Superoperator,
    drive: Option<&DriveConfig>,
    rho0: &DensityMatrix,
    t_final: f64,
    dt: f64,
) -> Array2<C64> {
    let d = l.dim();
    let sp = l.static_part().clone();
    let dc = l.drive_commutator().clone();
    let eta = |t: f64| drive.map(|dr| model::drive_envelope(t, dr)).unwrap_or(0.0);
    let f = |t: f64, y: &[C64]| -> Vec<C64> {
        let mut out = sp.matvec(y);
        let a = eta(t);
        if a != 0.0 {
            dc.matvec_acc(y, c(a, 0.0), &mut out);
        }
        out
    };
    let mut y: Vec<C64> = dense_to_vec(rho0.matrix()).to_vec();
    let n_steps = (t_final / dt).round() as usize;
    let h = t_final / n_steps as f64;
    let mut t = 0.0;
    for _ in 0..n_steps {
        let k1 = f(t, &y);
        let y2: Vec<C64> = y.iter().zip(&k1).map(|(a, b)| a + 0.5 * h * b).collect();
        let k2 = f(t + 0.5 * h, &y2);
        let y3: Vec<C64> = y.iter().zip(&k2).map(|(a, b)| a + 0.5 * h * b).collect();
        let k3 = f(t + 0.5 * h, &y3);
        let y4: Vec<C64> = y.iter().zip(&k3).map(|(a, b)| a + h * b).collect();
        let k4 = f(t + h, &y4);
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += h;
    }
    Array2::from_shape_vec((d, d), y).unwrap()
}

#[test]
fn engine_matches_vectorized_reference() {
    // covers the sector-restricted paths (q = 0 for undriven TC, even q for
    // undriven Dicke) and the unrestricted driven path, with and without
    // dissipation
    let diss = DissipationConfig::new(0.05, 0.02, 0.3).unwrap();
    let cases = [
        (Interaction::TavisCummings, false, DissipationConfig::closed()),
        (Interaction::TavisCummings, false, diss),
        (Interaction::Dicke, false, diss),
        (Interaction::TavisCummings, true, diss),
        (Interaction::Dicke, true, DissipationConfig::closed()),
    ];
    for (interaction, driven, d) in cases {
        let l = build_l(2, 3, interaction, 0.2, d);
        let space = l.space();
        let drive = DriveConfig {
            eta0: 0.4,
            sigma: 0.8,
            t0: 1.5,
        };
        let (spec, dr) = if driven {
            (InitialStateSpec::driven(), Some(&drive))
        } else {
            (InitialStateSpec::undriven(2), None)
        };
        let rho0 = initial_state(space, &spec).unwrap();
        let t_final = 4.0;
        let traj = evolve(&rho0, &l, dr, &quick_sim(t_final, t_final / 8.0, 3)).unwrap();
        let reference = rk4_reference(&l, dr, &rho0, t_final, 2e-4);
        let got = full_state(traj.samples().last().unwrap()).matrix();
        let dev = got
            .iter()
            .zip(reference.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(
            dev < 1e-7,
            "{interaction:?} driven={driven}: deviation {dev:.3e}"
        );
    }
}

#[test]
fn restricted_coordinate_sets() {
    // undriven TC stays on q = 0; undriven Dicke on even q; drive forces all
    let l = build_l(2, 3, Interaction::TavisCummings, 0.2, DissipationConfig::closed());
    let site = SiteInfo::for_space(l.space());
    let rho0 = initial_state(l.space(), &InitialStateSpec::undriven(2)).unwrap();
    let ops = GeneratorOps {
        h0: l.h0().matrix(),
        drive_op: l.drive_op().matrix(),
        collapse: vec![],
    };
    let coords = engine::analyze_coords(&ops, &site, false, rho0.matrix());
    let d = l.dim();
    assert!(coords.len() < d * d / 2, "q=0 restriction applies");
    for k in 0..coords.len() {
        assert_eq!(
            site.sec[coords.xs[k] as usize],
            site.sec[coords.ys[k] as usize]
        );
    }

    let l = build_l(2, 3, Interaction::Dicke, 0.2, DissipationConfig::closed());
    let coords = engine::analyze_coords(
        &GeneratorOps {
            h0: l.h0().matrix(),
            drive_op: l.drive_op().matrix(),
            collapse: vec![],
        },
        &site,
        false,
        rho0.matrix(),
    );
    assert!(coords.len() < d * d);
    for k in 0..coords.len() {
        let q = site.sec[coords.xs[k] as usize] - site.sec[coords.ys[k] as usize];
        assert_eq!(q.rem_euclid(2), 0);
    }

    let coords = engine::analyze_coords(
        &GeneratorOps {
            h0: l.h0().matrix(),
            drive_op: l.drive_op().matrix(),
            collapse: vec![],
        },
        &site,
        true,
        rho0.matrix(),
    );
    assert!(coords.is_full);
    assert_eq!(coords.len(), d * d);
}

#[test]
fn purity_conserved_without_dissipation() {
    let l = build_l(3, 4, Interaction::Dicke, 0.3, DissipationConfig::closed());
    let rho0 = initial_state(l.space(), &InitialStateSpec::undriven(3)).unwrap();
    let traj = evolve(&rho0, &l, None, &quick_sim(50.0, 0.5, 4)).unwrap();
    for s in traj.samples() {
        assert!((s.scalars.purity - 1.0).abs() < 1e-7);
    }
}

#[test]
fn purity_contracts_under_dissipation() {
    let l = build_l(
        2,
        3,
        Interaction::TavisCummings,
        0.1,
        DissipationConfig::new(0.1, 0.05, 0.2).unwrap(),
    );
    let rho0 = initial_state(l.space(), &InitialStateSpec::undriven(2)).unwrap();
    let traj = evolve(&rho0, &l, None, &quick_sim(30.0, 0.1, 3)).unwrap();
    let purities: Vec<f64> = traj.samples().iter().map(|s| s.scalars.purity).collect();
    let mut running_max = purities[0];
    for &p in &purities[1..] {
        assert!(p <= running_max + 1e-7, "purity increased: {p} > {running_max}");
        running_max = running_max.max(p);
    }
}

#[test]
fn fock_convergence_checks() {
    // undriven N=2 with n_max = N + 5 -> converged
    let p = SimulationProblem {
        n_qubits: 2,
        model: ModelConfig::resonant(Interaction::TavisCummings, 0.1),
        drive: None,
        dissipation: DissipationConfig::new(1e-3, 1e-3, 1e-3).unwrap(),
        initial: InitialStateSpec::undriven(2),
        sim: SimulationConfig {
            t_final: 10.0,
            sample_dt: 0.1,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            fock_policy: FockPolicy::Fixed { n_max: 7 },
            storage: StorageMode::Thin,
            check_stride: 20,
        },
    };
    let run = simulate(&p).unwrap();
    let (ok, pop) = check_fock_convergence(&run.trajectory, 1e-6);
    assert!(ok, "top population {pop}");
    // eps = 1 is always satisfied
    assert!(check_fock_convergence(&run.trajectory, 1.0).0);

    // strongly driven with n_max = 1 -> not converged
    let p = SimulationProblem {
        n_qubits: 1,
        model: ModelConfig::resonant(Interaction::TavisCummings, 0.1),
        drive: Some(DriveConfig::default()),
        dissipation: DissipationConfig::closed(),
        initial: InitialStateSpec::driven(),
        sim: SimulationConfig {
            t_final: 10.0,
            sample_dt: 0.1,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            fock_policy: FockPolicy::Fixed { n_max: 1 },
            storage: StorageMode::Thin,
            check_stride: 20,
        },
    };
    let run = simulate(&p).unwrap();
    assert!(!check_fock_convergence(&run.trajectory, 1e-6).0);
}

#[test]
fn adaptive_fock_policy_converges() {
    let p = SimulationProblem {
        n_qubits: 2,
        model: ModelConfig::resonant(Interaction::TavisCummings, 0.1),
        drive: Some(DriveConfig::default()),
        dissipation: DissipationConfig::new(1e-3, 1e-3, 1e-3).unwrap(),
        initial: InitialStateSpec::driven(),
        sim: SimulationConfig {
            t_final: 20.0,
            sample_dt: 0.1,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            fock_policy: FockPolicy::Adaptive {
                start: Some(2),
                population_eps: 1e-6,
            },
            storage: StorageMode::Thin,
            check_stride: 20,
        },
    };
    let run = simulate(&p).unwrap();
    assert!(run.fock_converged);
    assert!(run.n_max_used > 2, "cutoff should have grown");
}

#[test]
fn cutoff_independence_when_watchdog_passes() {
    // doubling n_max changes sampled expectations by < 1e-5 relative once
    // the convergence check passes
    let mk = |n_max: usize| {
        let l = build_l(
            2,
            n_max,
            Interaction::TavisCummings,
            0.1,
            DissipationConfig::new(1e-3, 1e-3, 1e-3).unwrap(),
        );
        let rho0 = initial_state(l.space(), &InitialStateSpec::undriven(2)).unwrap();
        evolve(&rho0, &l, None, &quick_sim(20.0, 0.5, n_max)).unwrap()
    };
    let a = mk(7);
    assert!(check_fock_convergence(&a, 1e-6).0);
    let b = mk(14);
    for (sa, sb) in a.samples().iter().zip(b.samples()) {
        let ea = sa.scalars.e_total_raw;
        let eb = sb.scalars.e_total_raw;
        assert!((ea - eb).abs() <= 1e-5 * eb.abs().max(1.0));
    }
}
