//! Deterministic parameter-grid execution.
//!
//! Grid points run independently on a work pool; records are keyed and
//! sorted by the canonical parameter tuple, so `records.csv` is
//! byte-identical regardless of worker count or completion order. Completed
//! points stream to a checkpoint sidecar (`records.partial.jsonl`) and a
//! resumed run skips them.

use crate::error::{Error, Result};
use crate::model::{
    DissipationConfig, DriveConfig, Interaction, InitialStateSpec, ModelConfig, Scenario,
};
use crate::observables::{compute_series, summarize, ObservableSummary};
use crate::output::fmt_f64;
use crate::propagator::{simulate, SimulationConfig, SimulationProblem};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Mutex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub n_list: Vec<usize>,
    pub g_list: Vec<f64>,
    pub kappa_list: Vec<f64>,
    pub gamma_minus_list: Vec<f64>,
    pub gamma_z_list: Vec<f64>,
    pub scenarios: Vec<Scenario>,
    pub interactions: Vec<Interaction>,
    #[serde(default)]
    pub drive: Option<DriveConfig>,
    /// Initial cavity Fock number for undriven points (default: N).
    #[serde(default)]
    pub undriven_fock: Option<usize>,
    pub sim: SimulationConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, empty) in [
            ("n_list", self.n_list.is_empty()),
            ("g_list", self.g_list.is_empty()),
            ("kappa_list", self.kappa_list.is_empty()),
            ("gamma_minus_list", self.gamma_minus_list.is_empty()),
            ("gamma_z_list", self.gamma_z_list.is_empty()),
            ("scenarios", self.scenarios.is_empty()),
            ("interactions", self.interactions.is_empty()),
        ] {
            if empty {
                return Err(Error::InvalidArgument(format!("{name} must be non-empty")));
            }
        }
        self.sim.validate()
    }

    pub fn grid_size(&self) -> usize {
        self.n_list.len()
            * self.g_list.len()
            * self.kappa_list.len()
            * self.gamma_minus_list.len()
            * self.gamma_z_list.len()
            * self.scenarios.len()
            * self.interactions.len()
    }

    /// All grid points in canonical (sorted) order.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut pts = Vec::with_capacity(self.grid_size());
        for &interaction in &self.interactions {
            for &scenario in &self.scenarios {
                for &n in &self.n_list {
                    for &g in &self.g_list {
                        for &kappa in &self.kappa_list {
                            for &gamma_minus in &self.gamma_minus_list {
                                for &gamma_z in &self.gamma_z_list {
                                    pts.push(SweepPoint {
                                        interaction,
                                        scenario,
                                        n,
                                        g,
                                        kappa,
                                        gamma_minus,
                                        gamma_z,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        pts.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        pts.dedup_by_key(|p| p.key());
        pts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub interaction: Interaction,
    pub scenario: Scenario,
    pub n: usize,
    pub g: f64,
    pub kappa: f64,
    pub gamma_minus: f64,
    pub gamma_z: f64,
}

impl SweepPoint {
    /// Unique, exact text key for checkpointing and deduplication.
    pub fn key(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}|{}|{}",
            self.interaction,
            self.scenario,
            self.n,
            fmt_f64(self.g),
            fmt_f64(self.kappa),
            fmt_f64(self.gamma_minus),
            fmt_f64(self.gamma_z)
        )
    }

    fn sort_key(&self) -> (String, String, usize, u64, u64, u64, u64) {
        (
            self.interaction.to_string(),
            self.scenario.to_string(),
            self.n,
            self.g.to_bits(),
            self.kappa.to_bits(),
            self.gamma_minus.to_bits(),
            self.gamma_z.to_bits(),
        )
    }

    pub fn problem(&self, spec: &SweepSpec) -> SimulationProblem {
        let initial = match self.scenario {
            Scenario::Driven => InitialStateSpec::driven(),
            Scenario::Undriven => {
                InitialStateSpec::undriven(spec.undriven_fock.unwrap_or(self.n))
            }
        };
        SimulationProblem {
            n_qubits: self.n,
            model: ModelConfig {
                interaction: self.interaction,
                omega_q: 1.0,
                omega_c: 1.0,
                g: self.g,
            },
            drive: Some(spec.drive.unwrap_or_default()),
            dissipation: DissipationConfig {
                kappa: self.kappa,
                gamma_minus: self.gamma_minus,
                gamma_z: self.gamma_z,
            },
            initial,
            sim: spec.sim,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRecord {
    pub point: SweepPoint,
    pub summary: Option<ObservableSummary>,
    pub error: Option<String>,
    pub fock_converged: bool,
    pub max_top_fock_pop: f64,
    pub n_max_used: usize,
    pub wall_secs: f64,
}

/// Run one grid point to a record; failures become error markers.
pub fn run_point(point: &SweepPoint, spec: &SweepSpec) -> SweepRecord {
    let started = std::time::Instant::now();
    let p = point.problem(spec);
    let outcome = simulate(&p).and_then(|run| {
        let series = compute_series(&run.trajectory, run.space, &p.model)?;
        let summary = summarize(&series)?;
        Ok((summary, run))
    });
    match outcome {
        Ok((summary, run)) => SweepRecord {
            point: *point,
            summary: Some(summary),
            error: None,
            fock_converged: run.fock_converged,
            max_top_fock_pop: run.max_top_fock_pop,
            n_max_used: run.n_max_used,
            wall_secs: started.elapsed().as_secs_f64(),
        },
        Err(e) => SweepRecord {
            point: *point,
            summary: None,
            error: Some(e.to_string()),
            fock_converged: false,
            max_top_fock_pop: f64::NAN,
            n_max_used: 0,
            wall_secs: started.elapsed().as_secs_f64(),
        },
    }
}

/// Run the whole grid on `workers` threads; records come back in canonical
/// order regardless of execution order.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<Vec<SweepRecord>> {
    run_sweep_inner(spec, workers, None, &BTreeSet::new())
}

/// Like [`run_sweep`], with streaming checkpoints under `out_dir` and the
/// ability to skip already-completed tuples.
pub fn run_sweep_checkpointed(
    spec: &SweepSpec,
    workers: usize,
    out_dir: &Path,
    resume: bool,
) -> Result<Vec<SweepRecord>> {
    let ckpt = out_dir.join("records.partial.jsonl");
    let mut done: Vec<SweepRecord> = Vec::new();
    let mut done_keys = BTreeSet::new();
    if resume && ckpt.exists() {
        let f = std::fs::File::open(&ckpt)?;
        for line in std::io::BufReader::new(f).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<SweepRecord>(&line) {
                Ok(r) => {
                    done_keys.insert(r.point.key());
                    done.push(r);
                }
                Err(_) => continue, // torn tail line from an interrupted run
            }
        }
    }
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&ckpt)?;
    let sink = Mutex::new(std::io::BufWriter::new(file));
    let mut fresh = run_sweep_inner(spec, workers, Some(&sink), &done_keys)?;
    sink.lock()
        .expect("checkpoint writer poisoned")
        .flush()?;
    fresh.extend(done);
    fresh.sort_by(|a, b| a.point.sort_key().cmp(&b.point.sort_key()));
    fresh.dedup_by_key(|r| r.point.key());
    Ok(fresh)
}

fn run_sweep_inner(
    spec: &SweepSpec,
    workers: usize,
    sink: Option<&Mutex<std::io::BufWriter<std::fs::File>>>,
    skip: &BTreeSet<String>,
) -> Result<Vec<SweepRecord>> {
    spec.validate()?;
    if workers == 0 {
        return Err(Error::InvalidArgument("workers must be >= 1".into()));
    }
    let points: Vec<SweepPoint> = spec
        .points()
        .into_iter()
        .filter(|p| !skip.contains(&p.key()))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Resource(format!("worker pool: {e}")))?;
    let records: Vec<SweepRecord> = pool.install(|| {
        use rayon::prelude::*;
        points
            .par_iter()
            .map(|pt| {
                let rec = run_point(pt, spec);
                if let Some(s) = sink {
                    // single-writer persistence; a failed write is fatal
                    let mut w = s.lock().expect("checkpoint writer poisoned");
                    let line = serde_json::to_string(&rec).expect("record serializes");
                    writeln!(w, "{line}").expect("checkpoint write failed");
                }
                rec
            })
            .collect()
    });
    Ok(records)
}

const RECORD_COLUMNS: &str = "interaction,scenario,n,g,kappa,gamma_minus,gamma_z,\
e_max,tau,p_max,s_q_max,s_c_max,s_q_final,s_c_final,flat_energy,\
e_max_total,e_max_total_drive,fock_converged,max_top_fock_pop,n_max_used,error";

/// Render records as CSV text (canonical order assumed). Wall-clock timings
/// are deliberately excluded so reruns are byte-identical.
pub fn records_to_csv(records: &[SweepRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 256);
    out.push_str(RECORD_COLUMNS);
    out.push('\n');
    for r in records {
        let p = &r.point;
        out.push_str(&format!(
            "{},{},{},{},{},{},{}",
            p.interaction,
            p.scenario,
            p.n,
            fmt_f64(p.g),
            fmt_f64(p.kappa),
            fmt_f64(p.gamma_minus),
            fmt_f64(p.gamma_z)
        ));
        match &r.summary {
            Some(s) => {
                out.push_str(&format!(
                    ",{},{},{},{},{},{},{},{},{},{}",
                    fmt_f64(s.e_max),
                    fmt_f64(s.tau),
                    fmt_f64(s.p_max),
                    fmt_f64(s.s_q_max),
                    fmt_f64(s.s_c_max),
                    fmt_f64(s.s_q_final),
                    fmt_f64(s.s_c_final),
                    s.flat_energy,
                    fmt_f64(s.e_max_total),
                    fmt_f64(s.e_max_total_drive),
                ));
            }
            None => out.push_str(",,,,,,,,,,"),
        }
        out.push_str(&format!(
            ",{},{},{},{}\n",
            r.fock_converged,
            if r.max_top_fock_pop.is_nan() {
                String::new()
            } else {
                fmt_f64(r.max_top_fock_pop)
            },
            r.n_max_used,
            r.error.clone().unwrap_or_default().replace(',', ";"),
        ));
    }
    out
}

pub fn write_records_csv(path: &Path, records: &[SweepRecord]) -> Result<()> {
    std::fs::write(path, records_to_csv(records))?;
    Ok(())
}

/// Parse a records.csv produced by [`write_records_csv`].
pub fn read_records_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty records file".into()))?;
    if header != RECORD_COLUMNS {
        return Err(Error::Schema(vec![format!(
            "unexpected records.csv header: {header}"
        )]));
    }
    let mut out = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 21 {
            return Err(Error::Schema(vec![format!(
                "line {}: expected 21 fields, got {}",
                ln + 2,
                f.len()
            )]));
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Schema(vec![format!("line {}: bad {what}: {s}", ln + 2)]))
        };
        let interaction = match f[0] {
            "dicke" => Interaction::Dicke,
            "tavis_cummings" => Interaction::TavisCummings,
            other => {
                return Err(Error::Schema(vec![format!(
                    "line {}: unknown interaction {other}",
                    ln + 2
                )]))
            }
        };
        let scenario = match f[1] {
            "driven" => Scenario::Driven,
            "undriven" => Scenario::Undriven,
            other => {
                return Err(Error::Schema(vec![format!(
                    "line {}: unknown scenario {other}",
                    ln + 2
                )]))
            }
        };
        let point = SweepPoint {
            interaction,
            scenario,
            n: f[2]
                .parse()
                .map_err(|_| Error::Schema(vec![format!("line {}: bad n: {}", ln + 2, f[2])]))?,
            g: parse(f[3], "g")?,
            kappa: parse(f[4], "kappa")?,
            gamma_minus: parse(f[5], "gamma_minus")?,
            gamma_z: parse(f[6], "gamma_z")?,
        };
        let summary = if f[7].is_empty() {
            None
        } else {
            Some(ObservableSummary {
                e_max: parse(f[7], "e_max")?,
                tau: parse(f[8], "tau")?,
                p_max: parse(f[9], "p_max")?,
                s_q_max: parse(f[10], "s_q_max")?,
                s_c_max: parse(f[11], "s_c_max")?,
                s_q_final: parse(f[12], "s_q_final")?,
                s_c_final: parse(f[13], "s_c_final")?,
                flat_energy: f[14] == "true",
                e_max_total: parse(f[15], "e_max_total")?,
                e_max_total_drive: parse(f[16], "e_max_total_drive")?,
            })
        };
        out.push(SweepRecord {
            point,
            summary,
            error: if f[20].is_empty() {
                None
            } else {
                Some(f[20].to_string())
            },
            fock_converged: f[17] == "true",
            max_top_fock_pop: if f[18].is_empty() {
                f64::NAN
            } else {
                parse(f[18], "max_top_fock_pop")?
            },
            n_max_used: f[19].parse().unwrap_or(0),
            wall_secs: 0.0,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Raw,
    /// Divide by the maximum within each row (fixed y).
    RowMax,
    /// Divide by the maximum over the whole panel.
    PanelMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    N,
    G,
    Kappa,
    GammaMinus,
    GammaZ,
}

impl Axis {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "n" => Axis::N,
            "g" => Axis::G,
            "kappa" => Axis::Kappa,
            "gamma_minus" => Axis::GammaMinus,
            "gamma_z" => Axis::GammaZ,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown axis {other}; expected n, g, kappa, gamma_minus or gamma_z"
                )))
            }
        })
    }

    fn value(&self, p: &SweepPoint) -> f64 {
        match self {
            Axis::N => p.n as f64,
            Axis::G => p.g,
            Axis::Kappa => p.kappa,
            Axis::GammaMinus => p.gamma_minus,
            Axis::GammaZ => p.gamma_z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueField {
    EMax,
    Tau,
    PMax,
    SQMax,
    SCMax,
    SQFinal,
    SCFinal,
}

impl ValueField {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "e_max" => ValueField::EMax,
            "tau" => ValueField::Tau,
            "p_max" => ValueField::PMax,
            "s_q_max" => ValueField::SQMax,
            "s_c_max" => ValueField::SCMax,
            "s_q_final" => ValueField::SQFinal,
            "s_c_final" => ValueField::SCFinal,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown observable {other}"
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ValueField::EMax => "e_max",
            ValueField::Tau => "tau",
            ValueField::PMax => "p_max",
            ValueField::SQMax => "s_q_max",
            ValueField::SCMax => "s_c_max",
            ValueField::SQFinal => "s_q_final",
            ValueField::SCFinal => "s_c_final",
        }
    }

    pub fn extract(&self, s: &ObservableSummary) -> f64 {
        match self {
            ValueField::EMax => s.e_max,
            ValueField::Tau => s.tau,
            ValueField::PMax => s.p_max,
            ValueField::SQMax => s.s_q_max,
            ValueField::SCMax => s.s_c_max,
            ValueField::SQFinal => s.s_q_final,
            ValueField::SCFinal => s.s_c_final,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapRow {
    pub x: f64,
    pub y: f64,
    /// `None` marks a missing grid point (no interpolation).
    pub value: Option<f64>,
}

/// Long-format heatmap data over two parameter axes. The records must be
/// uniquely indexed by `(x_axis, y_axis)`; persisted values are always raw,
/// normalization is a presentation option.
pub fn export_heatmap(
    records: &[SweepRecord],
    x_axis: Axis,
    y_axis: Axis,
    value_field: ValueField,
    normalization: Normalization,
) -> Result<Vec<HeatmapRow>> {
    let mut xs: Vec<u64> = records.iter().map(|r| x_axis.value(&r.point).to_bits()).collect();
    xs.sort_unstable();
    xs.dedup();
    let mut ys: Vec<u64> = records.iter().map(|r| y_axis.value(&r.point).to_bits()).collect();
    ys.sort_unstable();
    ys.dedup();
    let xs: Vec<f64> = {
        let mut v: Vec<f64> = xs.into_iter().map(f64::from_bits).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    };
    let ys: Vec<f64> = {
        let mut v: Vec<f64> = ys.into_iter().map(f64::from_bits).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    };

    let mut grid: Vec<Vec<Option<f64>>> = vec![vec![None; xs.len()]; ys.len()];
    for r in records {
        let xv = x_axis.value(&r.point);
        let yv = y_axis.value(&r.point);
        let xi = xs.iter().position(|&x| x == xv).unwrap();
        let yi = ys.iter().position(|&y| y == yv).unwrap();
        if grid[yi][xi].is_some() {
            return Err(Error::InvalidArgument(
                "records are not uniquely indexed by the chosen axes; \
                 filter the other parameters first"
                    .into(),
            ));
        }
        grid[yi][xi] = r.summary.as_ref().map(|s| value_field.extract(s));
    }

    let panel_max = grid
        .iter()
        .flatten()
        .filter_map(|v| *v)
        .fold(0.0f64, |a, b| a.max(b.abs()));
    let mut rows = Vec::with_capacity(xs.len() * ys.len());
    for (yi, &y) in ys.iter().enumerate() {
        let row_max = grid[yi]
            .iter()
            .filter_map(|v| *v)
            .fold(0.0f64, |a, b| a.max(b.abs()));
        for (xi, &x) in xs.iter().enumerate() {
            let raw = grid[yi][xi];
            let value = raw.map(|v| match normalization {
                Normalization::Raw => v,
                Normalization::RowMax => {
                    if row_max == 0.0 {
                        0.0
                    } else {
                        v / row_max
                    }
                }
                Normalization::PanelMax => {
                    if panel_max == 0.0 {
                        0.0
                    } else {
                        v / panel_max
                    }
                }
            });
            rows.push(HeatmapRow { x, y, value });
        }
    }
    Ok(rows)
}

pub fn write_heatmap_csv(path: &Path, rows: &[HeatmapRow], x_name: &str, y_name: &str) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{x_name},{y_name},value")?;
    for r in rows {
        match r.value {
            Some(v) => writeln!(f, "{},{},{}", fmt_f64(r.x), fmt_f64(r.y), fmt_f64(v))?,
            None => writeln!(f, "{},{},", fmt_f64(r.x), fmt_f64(r.y))?,
        }
    }
    Ok(())
}
