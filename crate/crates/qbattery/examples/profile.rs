//! Rough per-configuration timing probe.
//!
//! Run: cargo run --release -p qbattery --example profile

use qbattery::model::{
    DissipationConfig, DriveConfig, InitialStateSpec, Interaction, ModelConfig,
};
use qbattery::observables::{compute_series, summarize};
use qbattery::propagator::{simulate, FockPolicy, SimulationConfig, SimulationProblem, StorageMode};

fn prob(
    n: usize,
    interaction: Interaction,
    driven: bool,
    diss: (f64, f64, f64),
    sample_dt: f64,
    rel_tol: f64,
) -> SimulationProblem {
    SimulationProblem {
        n_qubits: n,
        model: ModelConfig::resonant(interaction, 0.1),
        drive: Some(DriveConfig::default()),
        dissipation: DissipationConfig {
            kappa: diss.0,
            gamma_minus: diss.1,
            gamma_z: diss.2,
        },
        initial: if driven {
            InitialStateSpec::driven()
        } else {
            InitialStateSpec::undriven(n)
        },
        sim: SimulationConfig {
            t_final: 50.0,
            sample_dt,
            rel_tol,
            abs_tol: rel_tol * 1e-2,
            fock_policy: FockPolicy::Adaptive {
                start: None,
                population_eps: 1e-6,
            },
            storage: StorageMode::Thin,
            check_stride: 25,
        },
    }
}

fn main() {
    let cases = [
        ("TC undriven N=25 weak", prob(25, Interaction::TavisCummings, false, (1e-3, 1e-3, 1e-3), 0.5, 1e-6)),
        ("TC undriven N=25 strong", prob(25, Interaction::TavisCummings, false, (1e-3, 1.0, 1.0), 0.5, 1e-6)),
        ("Dicke undriven N=25 weak", prob(25, Interaction::Dicke, false, (1e-3, 1e-3, 1e-3), 0.5, 1e-6)),
        ("Dicke undriven N=25 strong", prob(25, Interaction::Dicke, false, (1e-3, 1.0, 1.0), 0.5, 1e-6)),
        ("TC driven N=25 gz=0.3", prob(25, Interaction::TavisCummings, true, (1e-3, 1e-3, 0.3), 0.5, 1e-6)),
        ("Dicke driven N=25 weak", prob(25, Interaction::Dicke, true, (1e-3, 1e-3, 1e-3), 0.5, 1e-6)),
        ("TC driven N=25 fine grid tol 1e-8", prob(25, Interaction::TavisCummings, true, (1e-3, 1e-3, 0.3), 0.01, 1e-8)),
        ("Dicke driven N=25 fine grid tol 1e-8", prob(25, Interaction::Dicke, true, (1e-3, 1e-3, 1e-3), 0.01, 1e-8)),
        ("TC undriven N=15 weak", prob(15, Interaction::TavisCummings, false, (1e-3, 1e-3, 1e-3), 0.5, 1e-6)),
        ("Dicke undriven N=15 mid", prob(15, Interaction::Dicke, false, (1e-3, 0.1, 0.1), 0.5, 1e-6)),
    ];
    for (name, p) in cases {
        let t0 = std::time::Instant::now();
        match simulate(&p) {
            Ok(run) => {
                let series = compute_series(&run.trajectory, run.space, &p.model).unwrap();
                let s = summarize(&series).unwrap();
                let st = run.trajectory.stats();
                println!(
                    "{name:42} {:7.2}s  steps={:6} rej={:4} rhs={:7} coords={:8} nmax={:2} e_max={:8.4} tau={:7.3} sq_f={:.4}",
                    t0.elapsed().as_secs_f64(),
                    st.n_steps,
                    st.n_rejected,
                    st.n_rhs,
                    st.n_coords,
                    run.n_max_used,
                    s.e_max,
                    s.tau,
                    s.s_q_final,
                );
            }
            Err(e) => println!("{name:42} FAILED: {e}"),
        }
    }
}
