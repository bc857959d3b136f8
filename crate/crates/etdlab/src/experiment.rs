//! Multi-seed runs of the learners against the oracle limits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use etdlab_core::learners::{ElstdState, EtdState, StepsizeSchedule};
use etdlab_core::linalg::{self, Matrix, Vector};
use etdlab_core::mdp::ProblemSpec;
use etdlab_core::oracle::AnalyticSolution;
use etdlab_core::traces::EmphasisMode;
use etdlab_core::trajectory::{Initial, Simulator};
use etdlab_core::{OracleError, SpecError};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::config::{Algorithm, ConfigError, ExperimentConfig};
use crate::stats::{self, Summary};

pub const RUN_CSV_HEADER: &str = "seed,t,err_theta_inf,err_C_inf,err_b_inf,trace_norm,aborted";
pub const TRAJECTORY_CSV_HEADER: &str = "t,s,a,s_next,reward,rho";
pub const METRICS: [&str; 4] = ["err_theta_inf", "err_C_inf", "err_b_inf", "trace_norm"];
/// Fewest seeds for which an L¹ curve is reported.
pub const L1_MIN_SEEDS: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("{0}")]
    Setup(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A spec together with its oracle limits and the resolved run settings.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub spec: ProblemSpec,
    pub solution: AnalyticSolution,
    pub radius: Option<f64>,
    pub warnings: Vec<String>,
}

/// Loads the spec, computes the oracle and checks that every requested
/// algorithm has a limit to be measured against.
pub fn prepare(cfg: &ExperimentConfig, algorithms: &[Algorithm]) -> Result<Prepared, ExperimentError> {
    cfg.check(algorithms)?;
    let spec = cfg.load_spec()?;
    if cfg.initial_state >= spec.n_states() {
        return Err(SpecError::StateOutOfRange {
            state: cfg.initial_state,
            n_states: spec.n_states(),
        }
        .into());
    }
    let solution = AnalyticSolution::compute(&spec)?;
    let mut warnings = Vec::new();
    if solution.theta_star.is_none() && algorithms.iter().any(|&a| a != Algorithm::Elstd) {
        return Err(ExperimentError::Setup(
            "the oracle matrix C is singular, so θ* is undefined for this spec".into(),
        ));
    }
    let threshold = solution.report.radius_threshold;
    let radius = if algorithms.contains(&Algorithm::EtdConstrained) {
        let r = match (cfg.constraint_radius, cfg.radius_factor) {
            (Some(r), _) => r,
            (None, Some(f)) if threshold.is_finite() => f * threshold,
            _ => {
                return Err(ExperimentError::Setup(
                    "radius_factor needs a negative definite C; give constraint_radius instead".into(),
                ))
            }
        };
        if r <= threshold {
            warnings.push(format!("radius below ‖b‖₂/c: r = {r}, threshold = {threshold}"));
        }
        Some(r)
    } else {
        None
    };
    for &alg in algorithms {
        let s = cfg.schedule_for(alg);
        if alg != Algorithm::Elstd && !s.is_order_one_over_t() {
            warnings.push(format!("{}: stepsize {} is not O(1/t); curve reported without a convergence claim", alg.name(), s.describe()));
        }
    }
    Ok(Prepared {
        spec,
        solution,
        radius,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Row {
    pub t: u64,
    pub err_theta_inf: Option<f64>,
    #[serde(rename = "err_C_inf")]
    pub err_c_inf: Option<f64>,
    pub err_b_inf: Option<f64>,
    pub trace_norm: Option<f64>,
    pub aborted: bool,
}

impl Row {
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "err_theta_inf" => self.err_theta_inf,
            "err_C_inf" => self.err_c_inf,
            "err_b_inf" => self.err_b_inf,
            "trace_norm" => self.trace_norm,
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub rows: Vec<Row>,
    /// Step whose update produced a non-finite value.
    pub aborted_at: Option<u64>,
    /// Constrained ETD: last step with an active projection.
    pub last_projection: Option<u64>,
    pub projections: u64,
    pub final_c: Option<Matrix>,
    pub final_b: Option<Vector>,
}

enum Learner {
    Etd(EtdState),
    Elstd(ElstdState),
}

struct Lane {
    schedule: StepsizeSchedule,
    learner: Learner,
    record: RunRecord,
}

impl Lane {
    fn new(prep: &Prepared, cfg: &ExperimentConfig, algorithm: Algorithm, seed: u64) -> Self {
        let n = prep.spec.n_features();
        let learner = match algorithm {
            Algorithm::Etd => Learner::Etd(EtdState::new(n, EmphasisMode::Emphatic, None)),
            Algorithm::EtdConstrained => Learner::Etd(EtdState::new(n, EmphasisMode::Emphatic, prep.radius)),
            Algorithm::TdOffpolicy => Learner::Etd(EtdState::new(n, EmphasisMode::Unit, None)),
            Algorithm::Elstd => Learner::Elstd(ElstdState::new(n)),
        };
        Self {
            schedule: cfg.schedule_for(algorithm),
            learner,
            record: RunRecord {
                algorithm,
                seed,
                rows: Vec::new(),
                aborted_at: None,
                last_projection: None,
                projections: 0,
                final_c: None,
                final_b: None,
            },
        }
    }

    fn row(&self, prep: &Prepared, t: u64) -> Row {
        if self.record.aborted_at.is_some() {
            return Row {
                t,
                err_theta_inf: None,
                err_c_inf: None,
                err_b_inf: None,
                trace_norm: None,
                aborted: true,
            };
        }
        let sol = &prep.solution;
        let theta_err = |theta: &[f64]| {
            sol.theta_star
                .as_ref()
                .map(|ts| theta.iter().zip(ts.iter()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
        };
        match &self.learner {
            Learner::Etd(st) => Row {
                t,
                err_theta_inf: theta_err(&st.theta),
                err_c_inf: None,
                err_b_inf: None,
                trace_norm: Some(st.trace.norm()),
                aborted: false,
            },
            Learner::Elstd(st) => Row {
                t,
                err_theta_inf: st.theta().and_then(|th| theta_err(th.as_slice())),
                err_c_inf: Some(linalg::max_abs(&(&st.c_hat - &sol.c))),
                err_b_inf: Some(linalg::inf_norm(&(&st.b_hat - &sol.b))),
                trace_norm: Some(st.trace.norm()),
                aborted: false,
            },
        }
    }

    fn finish(mut self) -> RunRecord {
        match self.learner {
            Learner::Etd(st) => {
                self.record.last_projection = st.last_projection;
                self.record.projections = st.projections;
            }
            Learner::Elstd(st) => {
                if self.record.aborted_at.is_none() {
                    self.record.final_c = Some(st.c_hat);
                    self.record.final_b = Some(st.b_hat);
                }
            }
        }
        self.record
    }
}

/// Runs every algorithm on one seed's transition stream. All learners see
/// the same transitions; each keeps its own state.
pub fn run_seed(prep: &Prepared, cfg: &ExperimentConfig, algorithms: &[Algorithm], seed: u64) -> Result<Vec<RunRecord>, ExperimentError> {
    let spec = &prep.spec;
    let sim = Simulator::new(spec)?;
    let mut cursor = sim.start(seed, &Initial::State(cfg.initial_state))?;
    let checkpoints = cfg.checkpoint_grid();
    let mut lanes: Vec<Lane> = algorithms.iter().map(|&a| Lane::new(prep, cfg, a, seed)).collect();
    let mut next = checkpoints.iter().peekable();
    let emit = |lanes: &mut Vec<Lane>, t: u64| {
        for lane in lanes.iter_mut() {
            let row = lane.row(prep, t);
            lane.record.rows.push(row);
        }
    };
    if next.peek() == Some(&&0) {
        emit(&mut lanes, 0);
        next.next();
    }
    for t in 0..cfg.horizon {
        let tr = cursor.step();
        for lane in lanes.iter_mut() {
            if lane.record.aborted_at.is_some() {
                continue;
            }
            let alpha = lane.schedule.alpha(t);
            let result = match &mut lane.learner {
                Learner::Etd(st) => st.observe(spec, &tr, alpha),
                Learner::Elstd(st) => st.observe(spec, &tr, alpha),
            };
            if result.is_err() {
                lane.record.aborted_at = Some(t);
            }
        }
        if next.peek() == Some(&&(t + 1)) {
            emit(&mut lanes, t + 1);
            next.next();
        }
    }
    Ok(lanes.into_iter().map(Lane::finish).collect())
}

/// Runs all seeds on a pool of `threads` workers. The result is indexed like
/// `cfg.seeds`, then by algorithm.
pub fn run_all(prep: &Prepared, cfg: &ExperimentConfig, algorithms: &[Algorithm], threads: usize) -> Result<Vec<Vec<RunRecord>>, ExperimentError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?;
    pool.install(|| cfg.seeds.par_iter().map(|&seed| run_seed(prep, cfg, algorithms, seed)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckpointSummary {
    pub t: u64,
    /// Number of seeds with a value at this checkpoint.
    pub n: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub q25: Option<f64>,
    pub q75: Option<f64>,
    pub boot_lo: Option<f64>,
    pub boot_hi: Option<f64>,
}

impl CheckpointSummary {
    fn new(t: u64, values: &[f64]) -> Self {
        let s: Option<Summary> = stats::summarize(values);
        Self {
            t,
            n: values.iter().filter(|x| x.is_finite()).count(),
            mean: s.map(|s| s.mean),
            median: s.map(|s| s.median),
            q25: s.map(|s| s.q25),
            q75: s.map(|s| s.q75),
            boot_lo: s.map(|s| s.boot_lo),
            boot_hi: s.map(|s| s.boot_hi),
        }
    }
}

/// Per-checkpoint estimate of `E‖iterate - limit‖` with its bootstrap band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct L1Curve {
    pub metric: String,
    pub points: Vec<CheckpointSummary>,
    /// The mean error at the last checkpoint exceeds the one at the first.
    pub last_exceeds_first: bool,
}

pub fn l1_curve(records: &[&RunRecord], metric: &str) -> Result<L1Curve, ExperimentError> {
    if records.len() < L1_MIN_SEEDS {
        return Err(ExperimentError::Setup(format!(
            "an L1 curve needs at least {L1_MIN_SEEDS} seeds, got {}",
            records.len()
        )));
    }
    let points: Vec<CheckpointSummary> = checkpoint_summaries(records, metric);
    let means: Vec<f64> = points.iter().filter_map(|p| p.mean).collect();
    let last_exceeds_first = match (means.first(), means.last()) {
        (Some(a), Some(b)) => b > a,
        _ => false,
    };
    Ok(L1Curve {
        metric: metric.to_string(),
        points,
        last_exceeds_first,
    })
}

fn checkpoint_summaries(records: &[&RunRecord], metric: &str) -> Vec<CheckpointSummary> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    (0..first.rows.len())
        .map(|i| {
            let values: Vec<f64> = records.iter().filter_map(|r| r.rows[i].metric(metric)).collect();
            CheckpointSummary::new(first.rows[i].t, &values)
        })
        .collect()
}

/// Entrywise comparison of the cross-seed mean of the final ELSTD estimates
/// with the oracle, using the bootstrap band of each mean widened threefold
/// about the mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Closure {
    pub c_mean: Vec<Vec<f64>>,
    pub b_mean: Vec<f64>,
    pub max_band_ratio: f64,
    pub within_inflated_band: bool,
}

fn closure(records: &[&RunRecord], sol: &AnalyticSolution) -> Option<Closure> {
    let cs: Vec<&Matrix> = records.iter().filter_map(|r| r.final_c.as_ref()).collect();
    let bs: Vec<&Vector> = records.iter().filter_map(|r| r.final_b.as_ref()).collect();
    if cs.len() < 2 {
        return None;
    }
    let n = sol.b.len();
    let mut worst = 0.0_f64;
    let mut check = |values: Vec<f64>, exact: f64| -> f64 {
        let mut v = values;
        v.sort_by(f64::total_cmp);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let (lo, hi) = stats::bootstrap_mean_band(&v);
        let half = if exact >= mean { hi - mean } else { mean - lo };
        let ratio = if half > 0.0 {
            (exact - mean).abs() / half
        } else if exact == mean {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(ratio);
        mean
    };
    let c_mean = (0..n)
        .map(|i| (0..n).map(|j| check(cs.iter().map(|c| c[(i, j)]).collect(), sol.c[(i, j)])).collect())
        .collect();
    let b_mean = (0..n).map(|i| check(bs.iter().map(|b| b[i]).collect(), sol.b[i])).collect();
    Some(Closure {
        c_mean,
        b_mean,
        max_band_ratio: worst,
        within_inflated_band: worst <= 3.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Normalizers {
    pub theta_star_inf: Option<f64>,
    #[serde(rename = "C_inf")]
    pub c_inf: f64,
    pub b_inf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgorithmSummary {
    pub algorithm: &'static str,
    pub schedule: String,
    pub metrics: BTreeMap<String, Vec<CheckpointSummary>>,
    pub abort_rate: f64,
    pub aborted_seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1: Option<L1Curve>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraint_radius: Option<f64>,
    /// Constrained ETD: the latest step, over all seeds, at which the projection was active.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub last_active_projection: Option<Option<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closure: Option<Closure>,
}

pub fn primary_metric(algorithm: Algorithm) -> &'static str {
    match algorithm {
        Algorithm::Elstd => "err_C_inf",
        _ => "err_theta_inf",
    }
}

/// Aggregates the records of one algorithm. Records are ordered by seed
/// first, so the result does not depend on the order of the seed list.
pub fn summarize_algorithm(prep: &Prepared, cfg: &ExperimentConfig, algorithm: Algorithm, records: &[&RunRecord]) -> AlgorithmSummary {
    let mut sorted: Vec<&RunRecord> = records.to_vec();
    sorted.sort_by_key(|r| r.seed);
    let metrics = METRICS
        .iter()
        .map(|m| (m.to_string(), checkpoint_summaries(&sorted, m)))
        .filter(|(_, v)| v.iter().any(|c| c.n > 0))
        .collect();
    let aborted_seeds: Vec<u64> = sorted.iter().filter(|r| r.aborted_at.is_some()).map(|r| r.seed).collect();
    let constrained = algorithm == Algorithm::EtdConstrained;
    AlgorithmSummary {
        algorithm: algorithm.name(),
        schedule: cfg.schedule_for(algorithm).describe(),
        metrics,
        abort_rate: aborted_seeds.len() as f64 / sorted.len().max(1) as f64,
        aborted_seeds,
        l1: l1_curve(&sorted, primary_metric(algorithm)).ok(),
        constraint_radius: if constrained { prep.radius } else { None },
        last_active_projection: constrained.then(|| sorted.iter().filter_map(|r| r.last_projection).max()),
        closure: if algorithm == Algorithm::Elstd { closure(&sorted, &prep.solution) } else { None },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub checkpoints: Vec<u64>,
    pub normalizers: Normalizers,
    pub warnings: Vec<String>,
    /// Abort rate across all algorithms and seeds.
    pub abort_rate: f64,
    pub algorithms: Vec<AlgorithmSummary>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub prepared: Prepared,
    /// Indexed like the config's seed list, then by algorithm.
    pub records: Vec<Vec<RunRecord>>,
    pub summary: ExperimentSummary,
}

impl ExperimentOutput {
    pub fn records_for(&self, algorithm: Algorithm) -> Vec<&RunRecord> {
        self.records.iter().flatten().filter(|r| r.algorithm == algorithm).collect()
    }

    pub fn summary_for(&self, algorithm: Algorithm) -> Option<&AlgorithmSummary> {
        self.summary.algorithms.iter().find(|s| s.algorithm == algorithm.name())
    }
}

/// Runs `algorithms` on shared transition streams and aggregates, without writing files.
pub fn execute(cfg: &ExperimentConfig, algorithms: &[Algorithm], threads: usize) -> Result<ExperimentOutput, ExperimentError> {
    let prepared = prepare(cfg, algorithms)?;
    let records = run_all(&prepared, cfg, algorithms, threads)?;
    let sol = &prepared.solution;
    let mut summaries = Vec::new();
    for &alg in algorithms {
        let recs: Vec<&RunRecord> = records.iter().flatten().filter(|r| r.algorithm == alg).collect();
        summaries.push(summarize_algorithm(&prepared, cfg, alg, &recs));
    }
    let total = records.iter().flatten().count();
    let aborted = records.iter().flatten().filter(|r| r.aborted_at.is_some()).count();
    let summary = ExperimentSummary {
        config: cfg.clone(),
        checkpoints: cfg.checkpoint_grid(),
        normalizers: Normalizers {
            theta_star_inf: sol.theta_star.as_ref().map(linalg::inf_norm),
            c_inf: linalg::max_abs(&sol.c),
            b_inf: linalg::inf_norm(&sol.b),
        },
        warnings: prepared.warnings.clone(),
        abort_rate: aborted as f64 / total.max(1) as f64,
        algorithms: summaries,
    };
    Ok(ExperimentOutput {
        prepared,
        records,
        summary,
    })
}

fn fmt_opt(out: &mut String, v: Option<f64>) {
    if let Some(x) = v {
        let _ = write!(out, "{x:?}");
    }
}

/// Run CSV in seed-list order; with `with_algorithm` each line starts with the algorithm name.
pub fn records_csv(records: &[Vec<RunRecord>], with_algorithm: bool) -> String {
    let mut out = String::new();
    if with_algorithm {
        out.push_str("algorithm,");
    }
    out.push_str(RUN_CSV_HEADER);
    out.push('\n');
    for per_seed in records {
        for rec in per_seed {
            for row in &rec.rows {
                if with_algorithm {
                    out.push_str(rec.algorithm.name());
                    out.push(',');
                }
                let _ = write!(out, "{},{},", rec.seed, row.t);
                fmt_opt(&mut out, row.err_theta_inf);
                out.push(',');
                fmt_opt(&mut out, row.err_c_inf);
                out.push(',');
                fmt_opt(&mut out, row.err_b_inf);
                out.push(',');
                fmt_opt(&mut out, row.trace_norm);
                out.push(',');
                out.push(if row.aborted { '1' } else { '0' });
                out.push('\n');
            }
        }
    }
    out
}

pub fn write_trajectory_csv(spec: &ProblemSpec, seed: u64, initial_state: usize, steps: u64, path: &Path) -> Result<(), ExperimentError> {
    let sim = Simulator::new(spec)?;
    let mut cursor = sim.start(seed, &Initial::State(initial_state))?;
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{TRAJECTORY_CSV_HEADER}").map_err(io_err(path))?;
    for t in 0..steps {
        let tr = cursor.step();
        writeln!(w, "{t},{},{},{},{:?},{:?}", tr.s, tr.a, tr.s_next, tr.reward, tr.rho).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_outputs(out: &ExperimentOutput, csv_name: &str, with_algorithm: bool) -> Result<(), ExperimentError> {
    let cfg = &out.summary.config;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let csv_path = dir.join(csv_name);
    fs::write(&csv_path, records_csv(&out.records, with_algorithm)).map_err(io_err(&csv_path))?;
    let json_path = dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&out.summary).expect("summary serializes");
    text.push('\n');
    fs::write(&json_path, text).map_err(io_err(&json_path))?;
    if let Some(steps) = cfg.trajectory_dump {
        write_trajectory_csv(&out.prepared.spec, cfg.seeds[0], cfg.initial_state, steps, &dir.join("trajectory.csv"))?;
    }
    Ok(())
}

/// `run`: one algorithm, `runs.csv` and `summary.json` in the output directory.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput, ExperimentError> {
    let out = execute(cfg, &[cfg.algorithm], threads)?;
    write_outputs(&out, "runs.csv", false)?;
    Ok(out)
}

/// `compare`: several algorithms on the same transition streams, written to
/// `compare.csv` (run CSV columns prefixed by `algorithm`) and `summary.json`.
pub fn compare_algorithms(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput, ExperimentError> {
    if cfg.algorithms.is_empty() {
        return Err(ConfigError::Invalid("compare needs a nonempty `algorithms` list".into()).into());
    }
    let out = execute(cfg, &cfg.algorithms, threads)?;
    write_outputs(&out, "compare.csv", true)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub name: String,
    pub output_dir: PathBuf,
    pub algorithm: &'static str,
    pub final_median: Option<f64>,
    pub abort_rate: f64,
}

/// `sweep`: a base config plus a `variants` list of named overrides. Each
/// variant's top-level keys replace the base's, and its outputs go to
/// `<output_dir>/<name>/`. An index of final medians is written to
/// `<output_dir>/sweep.json`.
pub fn sweep(path: &Path, threads: usize) -> Result<Vec<SweepEntry>, ExperimentError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut root: Value = serde_json::from_str(&text).map_err(ConfigError::Json)?;
    let obj = root
        .as_object_mut()
        .ok_or_else(|| ConfigError::Invalid("sweep file must be an object".into()))?;
    let variants = match obj.remove("variants") {
        Some(Value::Array(v)) if !v.is_empty() => v,
        _ => return Err(ConfigError::Invalid("sweep needs a nonempty `variants` array".into()).into()),
    };
    let base_dir = path.parent().unwrap_or(Path::new("."));
    let mut entries = Vec::new();
    let mut sweep_root = None;
    for variant in variants {
        let mut merged = obj.clone();
        let overrides = variant
            .as_object()
            .ok_or_else(|| ConfigError::Invalid("each variant must be an object".into()))?;
        let name = overrides
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| ConfigError::Invalid("each variant needs a string `name`".into()))?
            .to_string();
        if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
            return Err(ConfigError::Invalid(format!("variant name {name:?} is not a plain directory name")).into());
        }
        for (k, v) in overrides {
            if k != "name" {
                merged.insert(k.clone(), v.clone());
            }
        }
        let mut cfg: ExperimentConfig = serde_json::from_value(Value::Object(merged)).map_err(ConfigError::Json)?;
        cfg.resolve_paths(base_dir);
        let root_dir = cfg.output_dir.clone();
        cfg.output_dir = root_dir.join(&name);
        sweep_root.get_or_insert(root_dir);
        let out = run_experiment(&cfg, threads)?;
        let alg = &out.summary.algorithms[0];
        let final_median = alg
            .metrics
            .get(primary_metric(cfg.algorithm))
            .and_then(|v| v.last())
            .and_then(|c| c.median);
        entries.push(SweepEntry {
            name,
            output_dir: cfg.output_dir.clone(),
            algorithm: alg.algorithm,
            final_median,
            abort_rate: alg.abort_rate,
        });
    }
    if let Some(dir) = sweep_root {
        let p = dir.join("sweep.json");
        let mut text = serde_json::to_string_pretty(&entries).expect("sweep index serializes");
        text.push('\n');
        fs::write(&p, text).map_err(io_err(&p))?;
    }
    Ok(entries)
}
