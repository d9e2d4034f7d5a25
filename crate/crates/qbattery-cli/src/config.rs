//! Run-configuration files: a single TOML document per run.
//!
//! Validation is by explicit schema walk so that errors name the offending
//! keys (`model.g`, `initial.scenario`, ...) instead of dumping a parser
//! trace.

use qbattery::model::{
    DissipationConfig, DriveConfig, InitialStateSpec, Interaction, ModelConfig, Scenario,
};
use qbattery::propagator::{FockPolicy, SimulationConfig, SimulationProblem, StorageMode};
use toml::Value;

pub struct RunConfig {
    pub problem: SimulationProblem,
    /// Whether the drive term is applied (scenario driven and not disabled).
    pub drive_enabled: bool,
    /// Canonical JSON echo of the parsed configuration.
    pub echo: serde_json::Value,
}

struct Walker<'a> {
    root: &'a Value,
    errors: Vec<String>,
}

impl<'a> Walker<'a> {
    fn table(&mut self, path: &str) -> Option<&'a toml::map::Map<String, Value>> {
        match lookup(self.root, path) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.errors.push(format!("{path} must be a table"));
                None
            }
        }
    }

    fn float(&mut self, path: &str) -> Option<f64> {
        match lookup(self.root, path) {
            None => None,
            Some(Value::Float(f)) => Some(*f),
            Some(Value::Integer(i)) => Some(*i as f64),
            Some(_) => {
                self.errors.push(format!("{path} must be a number"));
                None
            }
        }
    }

    fn integer(&mut self, path: &str) -> Option<i64> {
        match lookup(self.root, path) {
            None => None,
            Some(Value::Integer(i)) => Some(*i),
            Some(_) => {
                self.errors.push(format!("{path} must be an integer"));
                None
            }
        }
    }

    fn boolean(&mut self, path: &str) -> Option<bool> {
        match lookup(self.root, path) {
            None => None,
            Some(Value::Boolean(b)) => Some(*b),
            Some(_) => {
                self.errors.push(format!("{path} must be a boolean"));
                None
            }
        }
    }

    fn string(&mut self, path: &str) -> Option<&'a str> {
        match lookup(self.root, path) {
            None => None,
            Some(Value::String(s)) => Some(s.as_str()),
            Some(_) => {
                self.errors.push(format!("{path} must be a string"));
                None
            }
        }
    }

    fn require(&mut self, path: &str) {
        if lookup(self.root, path).is_none() {
            self.errors.push(format!("missing required key {path}"));
        }
    }
}

fn lookup<'a>(root: &'a Value, path: &str) -> Option<&'a Value> {
    let mut cur = root;
    for part in path.split('.') {
        cur = cur.as_table()?.get(part)?;
    }
    Some(cur)
}

const KNOWN_KEYS: &[&str] = &[
    "n_qubits",
    "model.interaction",
    "model.omega_q",
    "model.omega_c",
    "model.g",
    "drive.enabled",
    "drive.eta0",
    "drive.sigma",
    "drive.t0",
    "dissipation.kappa",
    "dissipation.gamma_minus",
    "dissipation.gamma_z",
    "initial.scenario",
    "initial.cavity_fock",
    "simulation.t_final",
    "simulation.sample_dt",
    "simulation.rel_tol",
    "simulation.abs_tol",
    "simulation.storage",
    "simulation.check_stride",
    "simulation.fock.mode",
    "simulation.fock.n_max",
    "simulation.fock.start",
    "simulation.fock.population_eps",
];

fn collect_unknown(prefix: &str, v: &Value, errors: &mut Vec<String>) {
    if let Value::Table(t) = v {
        for (k, child) in t {
            let path = if prefix.is_empty() {
                k.clone()
            } else {
                format!("{prefix}.{k}")
            };
            let known_exact = KNOWN_KEYS.contains(&path.as_str());
            let known_prefix = KNOWN_KEYS.iter().any(|kk| kk.starts_with(&format!("{path}.")));
            if !known_exact && !known_prefix {
                errors.push(format!("unknown key {path}"));
            } else if known_prefix {
                collect_unknown(&path, child, errors);
            }
        }
    }
}

/// Parse and validate a run configuration. Returns the assembled problem or
/// the full list of schema violations.
pub fn load_run_config(text: &str) -> Result<RunConfig, Vec<String>> {
    let root: Value = toml::from_str(text).map_err(|e| vec![format!("TOML parse error: {e}")])?;
    let mut w = Walker {
        root: &root,
        errors: Vec::new(),
    };
    collect_unknown("", &root, &mut w.errors);

    w.require("n_qubits");
    w.require("model.interaction");
    w.require("model.g");
    w.require("initial.scenario");

    let n_qubits = w.integer("n_qubits").unwrap_or(1);
    if n_qubits < 1 {
        w.errors.push("n_qubits must be >= 1".into());
    }

    let interaction = match w.string("model.interaction") {
        Some("dicke") => Interaction::Dicke,
        Some("tavis_cummings") => Interaction::TavisCummings,
        Some(other) => {
            w.errors.push(format!(
                "model.interaction must be \"dicke\" or \"tavis_cummings\", got \"{other}\""
            ));
            Interaction::TavisCummings
        }
        None => Interaction::TavisCummings,
    };
    let omega_q = w.float("model.omega_q").unwrap_or(1.0);
    let omega_c = w.float("model.omega_c").unwrap_or(1.0);
    let g = w.float("model.g").unwrap_or(0.0);

    let drive_enabled = w.boolean("drive.enabled").unwrap_or(true);
    let drive = DriveConfig {
        eta0: w.float("drive.eta0").unwrap_or(1.0),
        sigma: w.float("drive.sigma").unwrap_or(2.0),
        t0: w.float("drive.t0").unwrap_or(5.0),
    };

    let dissipation = DissipationConfig {
        kappa: w.float("dissipation.kappa").unwrap_or(0.0),
        gamma_minus: w.float("dissipation.gamma_minus").unwrap_or(0.0),
        gamma_z: w.float("dissipation.gamma_z").unwrap_or(0.0),
    };

    let scenario = match w.string("initial.scenario") {
        Some("driven") => Scenario::Driven,
        Some("undriven") => Scenario::Undriven,
        Some(other) => {
            w.errors.push(format!(
                "initial.scenario must be \"driven\" or \"undriven\", got \"{other}\""
            ));
            Scenario::Driven
        }
        None => Scenario::Driven,
    };
    let cavity_fock = w
        .integer("initial.cavity_fock")
        .unwrap_or(n_qubits)
        .max(0) as usize;

    let fock_policy = match w.string("simulation.fock.mode") {
        Some("fixed") => {
            let n_max = w.integer("simulation.fock.n_max");
            if n_max.is_none() {
                w.errors
                    .push("missing required key simulation.fock.n_max (fixed mode)".into());
            }
            FockPolicy::Fixed {
                n_max: n_max.unwrap_or(1).max(1) as usize,
            }
        }
        Some("adaptive") | None => FockPolicy::Adaptive {
            start: w.integer("simulation.fock.start").map(|v| v.max(1) as usize),
            population_eps: w.float("simulation.fock.population_eps").unwrap_or(1e-6),
        },
        Some(other) => {
            w.errors.push(format!(
                "simulation.fock.mode must be \"fixed\" or \"adaptive\", got \"{other}\""
            ));
            FockPolicy::Adaptive {
                start: None,
                population_eps: 1e-6,
            }
        }
    };
    let storage = match w.string("simulation.storage") {
        Some("thin") | None => StorageMode::Thin,
        Some("full") => StorageMode::Full,
        Some(other) => {
            w.errors.push(format!(
                "simulation.storage must be \"thin\" or \"full\", got \"{other}\""
            ));
            StorageMode::Thin
        }
    };
    let defaults = SimulationConfig::default();
    let sim = SimulationConfig {
        t_final: w.float("simulation.t_final").unwrap_or(defaults.t_final),
        sample_dt: w.float("simulation.sample_dt").unwrap_or(defaults.sample_dt),
        rel_tol: w.float("simulation.rel_tol").unwrap_or(defaults.rel_tol),
        abs_tol: w.float("simulation.abs_tol").unwrap_or(defaults.abs_tol),
        fock_policy,
        storage,
        check_stride: w
            .integer("simulation.check_stride")
            .map(|v| v.max(1) as usize)
            .unwrap_or(defaults.check_stride),
    };

    if !w.errors.is_empty() {
        return Err(w.errors);
    }

    let model = ModelConfig {
        interaction,
        omega_q,
        omega_c,
        g,
    };
    let initial = match scenario {
        Scenario::Driven => InitialStateSpec::driven(),
        Scenario::Undriven => InitialStateSpec::undriven(cavity_fock),
    };
    let problem = SimulationProblem {
        n_qubits: n_qubits as usize,
        model,
        drive: if drive_enabled { Some(drive) } else { None },
        dissipation,
        initial,
        sim,
    };
    // semantic validation via the library constructors
    let mut sem: Vec<String> = Vec::new();
    if let Err(e) = ModelConfig::new(interaction, omega_q, omega_c, g) {
        sem.push(format!("model: {e}"));
    }
    if let Err(e) = DriveConfig::new(drive.eta0, drive.sigma, drive.t0) {
        sem.push(format!("drive: {e}"));
    }
    if let Err(e) =
        DissipationConfig::new(dissipation.kappa, dissipation.gamma_minus, dissipation.gamma_z)
    {
        sem.push(format!("dissipation: {e}"));
    }
    if let Err(e) = sim.validate() {
        sem.push(format!("simulation: {e}"));
    }
    if !sem.is_empty() {
        return Err(sem);
    }

    let echo = serde_json::to_value(&problem).expect("problem serializes");
    Ok(RunConfig {
        problem,
        drive_enabled,
        echo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
n_qubits = 5

[model]
interaction = "tavis_cummings"
g = 0.1

[dissipation]
kappa = 1e-3
gamma_minus = 1e-3
gamma_z = 0.3

[initial]
scenario = "driven"

[simulation]
t_final = 50.0
sample_dt = 0.01
"#;

    #[test]
    fn good_config_parses() {
        let cfg = load_run_config(GOOD).unwrap();
        assert_eq!(cfg.problem.n_qubits, 5);
        assert_eq!(cfg.problem.model.g, 0.1);
        assert_eq!(cfg.problem.dissipation.gamma_z, 0.3);
        assert!(cfg.drive_enabled);
    }

    #[test]
    fn missing_g_is_named() {
        let bad = GOOD.replace("g = 0.1", "");
        let errs = load_run_config(&bad).unwrap_err();
        assert!(
            errs.iter().any(|e| e.contains("model.g")),
            "errors: {errs:?}"
        );
    }

    #[test]
    fn unknown_keys_are_named() {
        let bad = format!("{GOOD}\n[model2]\nz = 1\n");
        let errs = load_run_config(&bad).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("unknown key model2")));
    }

    #[test]
    fn bad_enum_value_reported() {
        let bad = GOOD.replace("tavis_cummings", "jaynes");
        let errs = load_run_config(&bad).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("model.interaction")));
    }
}
