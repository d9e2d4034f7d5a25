//! `qbattery` — simulate cavity-coupled N-qubit quantum batteries, sweep
//! parameter grids, fit finite-size scaling exponents and validate the
//! collective engine against a dense reference.

mod config;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use qbattery::observables::{compute_series, summarize};
use qbattery::output::{to_json_17, write_series_csv, RunManifest};
use qbattery::propagator::simulate;
use qbattery::scaling::{classify_regime, fit_power_law, hardware_map, ScalingFit};
use qbattery::sweep::{
    export_heatmap, read_records_csv, run_sweep_checkpointed, write_heatmap_csv,
    write_records_csv, Axis, Normalization, SweepRecord, SweepSpec, ValueField,
};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "qbattery",
    version,
    about = "Open-system dynamics and finite-size scaling of cavity-coupled quantum batteries"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a single configuration and write series.csv, summary.json and
    /// manifest.json into the output directory.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a parameter grid; writes records.csv plus a manifest, streaming
    /// checkpoints as points complete.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: QBATTERY_WORKERS or all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Skip tuples already present in records.partial.jsonl.
        #[arg(long)]
        resume: bool,
    },
    /// Fit power laws value ~ N^alpha from a records.csv.
    Fit {
        #[arg(long)]
        records: PathBuf,
        /// One of e_max, tau, p_max, s_q_max, s_c_max, s_q_final, s_c_final.
        #[arg(long)]
        observable: String,
        /// Comma-separated parameters that define fit groups
        /// (subset of interaction,scenario,g,kappa,gamma_minus,gamma_z).
        #[arg(long, default_value = "interaction,scenario,g,kappa,gamma_minus,gamma_z")]
        group_by: String,
        #[arg(long, default_value_t = 2.0)]
        mad_threshold: f64,
        /// Write the JSON fits here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the collective engine against the dense full-space reference
    /// at small N and print a pass/fail table.
    Validate {
        /// Restrict to one qubit number (1, 2 or 3); default: all.
        #[arg(long)]
        n: Option<usize>,
        /// "full" runs the complete 2x2x3 configuration matrix.
        #[arg(long, default_value = "full")]
        suite: String,
    },
    /// Convert measured T1/T2 coherence times to model rates.
    HardwareMap {
        #[arg(long)]
        t1: f64,
        #[arg(long)]
        t2: f64,
    },
    /// Export heatmap-ready long-format CSV from a records.csv.
    Heatmap {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long)]
        value: String,
        #[arg(long, default_value = "raw")]
        normalization: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = if e.to_string().contains("config schema") {
                2
            } else {
                1
            };
            std::process::exit(code);
        }
    }
}

fn out_dir(requested: &Path) -> anyhow::Result<PathBuf> {
    let base = match std::env::var_os("QBATTERY_OUT_ROOT") {
        Some(root) if requested.is_relative() => PathBuf::from(root).join(requested),
        _ => requested.to_path_buf(),
    };
    std::fs::create_dir_all(&base)
        .with_context(|| format!("cannot create output directory {}", base.display()))?;
    Ok(base)
}

fn default_workers() -> usize {
    std::env::var("QBATTERY_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Simulate { config, out } => cmd_simulate(&config, &out),
        Cmd::Sweep {
            config,
            out,
            workers,
            resume,
        } => cmd_sweep(&config, &out, workers.unwrap_or_else(default_workers), resume),
        Cmd::Fit {
            records,
            observable,
            group_by,
            mad_threshold,
            out,
        } => cmd_fit(&records, &observable, &group_by, mad_threshold, out.as_deref()),
        Cmd::Validate { n, suite } => cmd_validate(n, &suite),
        Cmd::HardwareMap { t1, t2 } => {
            let rates = hardware_map(t1, t2)?;
            println!("{}", to_json_17(&rates)?);
            Ok(())
        }
        Cmd::Heatmap {
            records,
            x,
            y,
            value,
            normalization,
            out,
        } => cmd_heatmap(&records, &x, &y, &value, &normalization, &out),
    }
}

fn cmd_simulate(config_path: &Path, out: &Path) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(config_path)
        .with_context(|| format!("cannot read config {}", config_path.display()))?;
    let cfg = match config::load_run_config(&text) {
        Ok(c) => c,
        Err(errs) => bail!(qbattery::Error::Schema(errs)),
    };
    let dir = out_dir(out)?;

    let run = simulate(&cfg.problem)?;
    let series = compute_series(&run.trajectory, run.space, &cfg.problem.model)?;
    let summary = summarize(&series)?;

    write_series_csv(&dir.join("series.csv"), &series)?;

    let mut summary_json = serde_json::to_value(summary)?;
    if let serde_json::Value::Object(map) = &mut summary_json {
        map.insert("fock_converged".into(), run.fock_converged.into());
        map.insert(
            "n_max_used".into(),
            serde_json::Value::from(run.n_max_used as u64),
        );
        map.insert(
            "max_top_fock_pop".into(),
            serde_json::Value::from(run.max_top_fock_pop),
        );
        map.insert("config".into(), cfg.echo.clone());
    }
    std::fs::write(
        dir.join("summary.json"),
        to_json_17(&summary_json)? + "\n",
    )?;

    let mut manifest = RunManifest::new("simulate", &text, cfg.echo);
    manifest.outputs = vec!["series.csv".into(), "summary.json".into()];
    manifest.write(&dir)?;
    println!(
        "simulate: t_final = {}, e_max = {:.6}, tau = {:.4}, outputs in {}",
        cfg.problem.sim.t_final,
        summary.e_max,
        summary.tau,
        dir.display()
    );
    Ok(())
}

fn cmd_sweep(config_path: &Path, out: &Path, workers: usize, resume: bool) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(config_path)
        .with_context(|| format!("cannot read config {}", config_path.display()))?;
    let spec: SweepSpec = toml::from_str(&text)
        .map_err(|e| qbattery::Error::Schema(vec![format!("sweep config: {e}")]))?;
    spec.validate()?;
    let dir = out_dir(out)?;

    let records = run_sweep_checkpointed(&spec, workers, &dir, resume)?;
    write_records_csv(&dir.join("records.csv"), &records)?;

    let failures: Vec<String> = records
        .iter()
        .filter_map(|r| {
            r.error
                .as_ref()
                .map(|e| format!("{}: {e}", r.point.key()))
        })
        .collect();
    let mut manifest = RunManifest::new("sweep", &text, serde_json::to_value(&spec)?);
    manifest.outputs = vec!["records.csv".into(), "records.partial.jsonl".into()];
    manifest.failures = failures.clone();
    manifest.write(&dir)?;

    println!(
        "sweep: {} records ({} failures) -> {}",
        records.len(),
        failures.len(),
        dir.join("records.csv").display()
    );
    Ok(())
}

fn group_key(r: &SweepRecord, fields: &[&str]) -> String {
    fields
        .iter()
        .map(|f| match *f {
            "interaction" => format!("interaction={}", r.point.interaction),
            "scenario" => format!("scenario={}", r.point.scenario),
            "g" => format!("g={}", r.point.g),
            "kappa" => format!("kappa={}", r.point.kappa),
            "gamma_minus" => format!("gamma_minus={}", r.point.gamma_minus),
            "gamma_z" => format!("gamma_z={}", r.point.gamma_z),
            other => format!("{other}=?"),
        })
        .collect::<Vec<_>>()
        .join(",")
}

fn cmd_fit(
    records_path: &Path,
    observable: &str,
    group_by: &str,
    mad_threshold: f64,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let field = ValueField::parse(observable)?;
    let records = read_records_csv(records_path)?;
    let fields: Vec<&str> = group_by
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    for f in &fields {
        if !["interaction", "scenario", "g", "kappa", "gamma_minus", "gamma_z"].contains(f) {
            bail!(qbattery::Error::InvalidArgument(format!(
                "unknown group-by field {f}"
            )));
        }
    }

    let mut groups: BTreeMap<String, Vec<&SweepRecord>> = BTreeMap::new();
    for r in &records {
        if r.summary.is_some() {
            groups.entry(group_key(r, &fields)).or_default().push(r);
        }
    }

    let mut fits: Vec<ScalingFit> = Vec::new();
    for (key, group) in groups {
        let pts: Vec<(f64, f64)> = group
            .iter()
            .map(|r| {
                (
                    r.point.n as f64,
                    field.extract(r.summary.as_ref().unwrap()),
                )
            })
            .collect();
        match fit_power_law(&pts, mad_threshold) {
            Ok(mut fit) => {
                fit.observable = field.name().to_string();
                let sample = group[0].point;
                fit.regime = match classify_regime(sample.gamma_minus, sample.gamma_z) {
                    Ok(r) => format!("{r} ({key})"),
                    Err(_) => key.clone(),
                };
                fits.push(fit);
            }
            Err(e) => eprintln!("skipping group [{key}]: {e}"),
        }
    }
    if fits.is_empty() {
        bail!(qbattery::Error::InsufficientData(
            "no group produced a fit".into()
        ));
    }
    let json = to_json_17(&fits)?;
    match out {
        Some(p) => std::fs::write(p, json + "\n")?,
        None => println!("{json}"),
    }
    for f in &fits {
        eprintln!(
            "alpha[{}] = {:+.4}  (r2 = {:.4}, used {} pts, removed {})  {}",
            f.observable, f.alpha, f.r_squared, f.n_points_used, f.n_outliers_removed, f.regime
        );
    }
    Ok(())
}

fn cmd_validate(n: Option<usize>, suite: &str) -> anyhow::Result<()> {
    if suite != "full" {
        bail!(qbattery::Error::InvalidArgument(format!(
            "unknown suite {suite}; only \"full\" is available"
        )));
    }
    let ns: Vec<usize> = match n {
        Some(v) if (1..=3).contains(&v) => vec![v],
        Some(v) => bail!(qbattery::Error::InvalidArgument(format!(
            "validate supports n in 1..=3, got {v}"
        ))),
        None => vec![1, 2, 3],
    };
    let tol = 1e-6;
    let mut all_ok = true;
    println!(
        "{:<3} {:<15} {:<9} {:<26} {:>12} {:>12} {:>12}  result",
        "N", "interaction", "scenario", "dissipation(k,g-,gz)", "max|dE_qub|", "max|dS_q|", "max|dS_c|"
    );
    for nq in ns {
        for case in qbattery::oracle::validation_matrix(nq) {
            let cmp = qbattery::oracle::compare_engines(&case)?;
            let ok = cmp.max_dev() < tol;
            all_ok &= ok;
            println!(
                "{:<3} {:<15} {:<9} {:<26} {:>12.3e} {:>12.3e} {:>12.3e}  {}",
                nq,
                case.model.interaction.to_string(),
                case.initial.scenario.to_string(),
                format!(
                    "({:.0e},{:.0e},{:.0e})",
                    case.dissipation.kappa,
                    case.dissipation.gamma_minus,
                    case.dissipation.gamma_z
                ),
                cmp.max_e_qub,
                cmp.max_s_q,
                cmp.max_s_c,
                if ok { "PASS" } else { "FAIL" }
            );
        }
    }
    if !all_ok {
        bail!(qbattery::Error::PhysicalityFailure {
            time: f64::NAN,
            what: format!("engine equivalence deviation exceeded {tol:.1e}")
        });
    }
    println!("all engine-equivalence checks passed (tolerance {tol:.1e})");
    Ok(())
}

fn cmd_heatmap(
    records_path: &Path,
    x: &str,
    y: &str,
    value: &str,
    normalization: &str,
    out: &Path,
) -> anyhow::Result<()> {
    let records = read_records_csv(records_path)?;
    let xa = Axis::parse(x)?;
    let ya = Axis::parse(y)?;
    let field = ValueField::parse(value)?;
    let norm = match normalization {
        "raw" => Normalization::Raw,
        "row_max" => Normalization::RowMax,
        "panel_max" => Normalization::PanelMax,
        other => bail!(qbattery::Error::InvalidArgument(format!(
            "unknown normalization {other}; expected raw, row_max or panel_max"
        ))),
    };
    let rows = export_heatmap(&records, xa, ya, field, norm)?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    write_heatmap_csv(out, &rows, x, y)?;
    println!("heatmap: {} rows -> {}", rows.len(), out.display());
    Ok(())
}
