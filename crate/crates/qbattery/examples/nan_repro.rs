use qbattery::model::*;
use qbattery::propagator::*;
use qbattery::observables::*;

fn main() {
    for gz in [1e-3, 0.3] {
        for n in [1usize, 2] {
            let p = SimulationProblem {
                n_qubits: n,
                model: ModelConfig::resonant(Interaction::TavisCummings, 0.1),
                drive: None,
                dissipation: DissipationConfig { kappa: 1e-3, gamma_minus: 1e-3, gamma_z: gz },
                initial: InitialStateSpec::undriven(n),
                sim: SimulationConfig {
                    t_final: 5.0, sample_dt: 0.05, rel_tol: 1e-8, abs_tol: 1e-10,
                    fock_policy: FockPolicy::Adaptive { start: None, population_eps: 1e-6 },
                    storage: StorageMode::Thin, check_stride: 25,
                },
            };
            print!("n={n} gz={gz}: ");
            match simulate(&p) {
                Ok(run) => {
                    let s = compute_series(&run.trajectory, run.space, &p.model);
                    match s {
                        Ok(s) => println!("ok steps={} e_max={:?}", run.trajectory.stats().n_steps,
                            s.e_qub.iter().cloned().fold(0.0f64, f64::max)),
                        Err(e) => println!("series error: {e}"),
                    }
                }
                Err(e) => println!("sim error: {e}"),
            }
        }
    }
}
