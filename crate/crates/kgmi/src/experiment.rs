//! End-to-end experiment drivers behind the command-line interface. A JSON
//! config picks the graph, kernel, information measure, and pipeline mode
//! (population oracle, sampled estimator, or the deliberately head-blind
//! naive table), and each driver runs sample/oracle -> table -> train ->
//! decode -> score, leaving its artifacts in an output directory:
//! trajectory CSV, final attention state JSON, combined heatmap as CSV and
//! SVG, decoded adjacency CSV, and a report JSON embedding the resolved
//! config so every run can be reproduced from its own output.
//!
//! The sweep drivers reuse the same plumbing to measure how the stopping
//! epoch moves with sequence length (disjoint graph copies keep the
//! information gap fixed while T grows) and with the gap itself (perturbed
//! kernels at fixed T), fitting each against its predicted growth law.

use crate::attention::{train, Stopping, TrainOptions, TrainResult};
use crate::decoder::{
    adjacency_csv, decode, heatmap_svg, matrix_csv, score, two_head_heatmap, Collapse,
    DecodeOptions, DecodedGraph, ScoreReport,
};
use crate::estimator::{estimate_table, kappa_admissible, EstimatedTable};
use crate::exactdist::enumerate;
use crate::graph::{Dag, Mode};
use crate::infometric::{kgmi_table, naive_table, table_stats, tiled, FKind, KgmiTable};
use crate::kernel::{analyze, Kernel, KernelStats};
use crate::linalg::{linear_fit, Matrix};
use crate::sampler::Sampler;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invariant check failed: {0}")]
    Check(String),
    #[error("run failed: {0}")]
    Run(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn cfg_err(e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Config(e.to_string())
}

fn run_err(e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Run(e.to_string())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSpec {
    Name(String),
    Explicit {
        #[serde(rename = "T")]
        t: usize,
        /// 1-based (source, target) pairs, matching the graph JSON schema.
        edges: Vec<[usize; 2]>,
        mode: String,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelSpec {
    /// The benchmark kernel family, parameterized by its nine row
    /// perturbations.
    Perturbation { p: Vec<f64> },
    /// Explicit row-stochastic table over S^K tuple rows.
    Explicit { s: usize, k: usize, rows: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Population,
    Estimated,
    Naive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub graph: GraphSpec,
    pub kernel: KernelSpec,
    pub f: String,
    pub mode: RunMode,
    pub eta: f64,
    pub eps_attn: f64,
    /// Fixed epoch budget; when absent, population runs stop on the
    /// concentration threshold and estimated runs default to 10000 epochs.
    pub tau: Option<u64>,
    pub cap: u64,
    pub theta_c: f64,
    pub seed: u64,
    pub n: usize,
    pub kappa: f64,
    pub bootstrap: usize,
    pub log_every: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            graph: GraphSpec::Name("ten".into()),
            kernel: KernelSpec::Perturbation { p: vec![0.0; 9] },
            f: "kl".into(),
            mode: RunMode::Population,
            eta: 10.0,
            eps_attn: 0.1,
            tau: None,
            cap: 5_000_000,
            theta_c: 0.9,
            seed: 42,
            n: 50_000,
            kappa: 1e-3,
            bootstrap: 200,
            log_every: 25,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig, ExperimentError> {
        serde_json::from_str(text).map_err(cfg_err)
    }

    pub fn resolve_graph(&self) -> Result<Dag, ExperimentError> {
        match &self.graph {
            GraphSpec::Name(name) => Dag::by_name(name)
                .ok_or_else(|| ExperimentError::Config(format!("unknown graph '{name}'"))),
            GraphSpec::Explicit { t, edges, mode } => {
                let mode = match mode.as_str() {
                    "uniform" => Mode::Uniform,
                    "nonuniform" => Mode::NonUniform,
                    other => {
                        return Err(ExperimentError::Config(format!("unknown graph mode '{other}'")))
                    }
                };
                let zero_based: Vec<(usize, usize)> = edges
                    .iter()
                    .map(|&[j, i]| {
                        if j == 0 || i == 0 {
                            Err(ExperimentError::Config(format!(
                                "edge [{j},{i}] is not 1-based"
                            )))
                        } else {
                            Ok((j - 1, i - 1))
                        }
                    })
                    .collect::<Result<_, _>>()?;
                Dag::build(*t, &zero_based, mode).map_err(cfg_err)
            }
        }
    }

    pub fn resolve_kernel(&self) -> Result<Kernel, ExperimentError> {
        match &self.kernel {
            KernelSpec::Perturbation { p } => {
                let arr: [f64; 9] = p.clone().try_into().map_err(|_| {
                    ExperimentError::Config(format!(
                        "perturbation vector needs 9 entries, got {}",
                        p.len()
                    ))
                })?;
                Kernel::benchmark(&arr).map_err(cfg_err)
            }
            KernelSpec::Explicit { s, k, rows } => {
                let expect = s.pow(*k as u32);
                if rows.len() != expect || rows.iter().any(|r| r.len() != *s) {
                    return Err(ExperimentError::Config(format!(
                        "kernel rows must be {expect} x {s}"
                    )));
                }
                let m = Matrix::from_fn(expect, *s, |r, c| rows[r][c]);
                Kernel::new(*s, *k, m).map_err(cfg_err)
            }
        }
    }

    pub fn resolve_f(&self) -> Result<FKind, ExperimentError> {
        FKind::by_name(&self.f)
            .ok_or_else(|| ExperimentError::Config(format!("unknown f kind '{}'", self.f)))
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(ExperimentError::Config(format!("eta = {} must be positive", self.eta)));
        }
        if !(0.0 < self.eps_attn && self.eps_attn < 1.0) {
            return Err(ExperimentError::Config(format!(
                "eps_attn = {} must lie in (0,1)",
                self.eps_attn
            )));
        }
        if !(self.theta_c > 0.5 && self.theta_c < 1.0) {
            return Err(ExperimentError::Config(format!(
                "theta_c = {} must lie in (1/2,1)",
                self.theta_c
            )));
        }
        if self.mode == RunMode::Estimated && self.n == 0 {
            return Err(ExperimentError::Config("estimated mode needs n >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub version: String,
    pub delta: f64,
    pub i_max: f64,
    pub noise_floor: f64,
    pub stop_epoch: Option<u64>,
    pub epochs_run: u64,
    pub decoded_parents: Vec<Vec<usize>>,
    pub collapses: Vec<Collapse>,
    pub kappa_admissible: Option<bool>,
    pub score: ScoreReport,
}

pub struct RunOutcome {
    pub report: RunReport,
    pub dag: Dag,
    pub table: KgmiTable,
    pub estimated: Option<EstimatedTable>,
    pub training: TrainResult,
    pub decoded: DecodedGraph,
}

fn build_table(
    cfg: &RunConfig,
    dag: &Dag,
    stats: &KernelStats,
    f: FKind,
) -> Result<(KgmiTable, Option<EstimatedTable>, f64), ExperimentError> {
    match cfg.mode {
        RunMode::Population => {
            let dist = enumerate(dag, stats).map_err(run_err)?;
            Ok((kgmi_table(dag, stats, &dist, f), None, 0.0))
        }
        RunMode::Naive => {
            let dist = enumerate(dag, stats).map_err(run_err)?;
            Ok((naive_table(dag, &dist, f), None, 0.0))
        }
        RunMode::Estimated => {
            let sampler = Sampler::new(dag, stats).map_err(run_err)?;
            let ds = sampler.dataset(cfg.n, cfg.seed, true);
            let est = estimate_table(&ds, cfg.kappa, cfg.bootstrap, cfg.seed).map_err(run_err)?;
            let floor = est.table.root_column_magnitude(dag);
            let table = est.table.clone();
            Ok((table, Some(est), floor))
        }
    }
}

pub fn run(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<RunOutcome, ExperimentError> {
    cfg.validate()?;
    let started = Instant::now();
    let dag = cfg.resolve_graph()?;
    let kernel = cfg.resolve_kernel()?;
    let f = cfg.resolve_f()?;
    let stats = analyze(&kernel).map_err(cfg_err)?;
    let (table, estimated, noise_floor) = build_table(cfg, &dag, &stats, f)?;
    let tstats = table_stats(&table, &dag);
    let stopping = match cfg.tau {
        Some(n) => Stopping::FixedEpochs(n),
        None if cfg.mode == RunMode::Estimated => Stopping::FixedEpochs(10_000),
        None => Stopping::Threshold { cap: cfg.cap },
    };
    let opts = TrainOptions {
        eta: cfg.eta,
        eps_attn: cfg.eps_attn,
        stopping,
        log_every: cfg.log_every,
    };
    let training = train(&table, &dag, &opts).map_err(run_err)?;
    let decoded = decode(
        &training.attention,
        &table,
        &DecodeOptions { theta_c: cfg.theta_c, noise_floor },
    )
    .map_err(run_err)?;
    let mut rep = score(&decoded.adjacency, &dag.adjacency()).map_err(run_err)?;
    rep.runtime_seconds = started.elapsed().as_secs_f64();
    let report = RunReport {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        delta: tstats.delta,
        i_max: tstats.i_max,
        noise_floor,
        stop_epoch: training.stopped_at,
        epochs_run: training.epochs_run,
        decoded_parents: decoded.parents.clone(),
        collapses: decoded.collapses.clone(),
        kappa_admissible: estimated
            .as_ref()
            .map(|e| kappa_admissible(e.kappa, cfg.eps_attn)),
        score: rep,
    };
    let outcome = RunOutcome { report, dag, table, estimated, training, decoded };
    if let Some(dir) = out_dir {
        write_run_artifacts(&outcome, dir)?;
    }
    Ok(outcome)
}

fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|j| (0..m.cols()).map(|i| m.get(j, i)).collect()).collect()
}

pub fn trajectory_csv(res: &TrainResult) -> String {
    let mut out = String::from("t,L,gap,min_parent_attn,max_root_deviation,grad_inf_norm\n");
    for r in &res.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.epoch, r.objective, r.gap, r.min_star_attention, r.max_root_deviation, r.grad_inf_norm
        );
    }
    out
}

fn write_run_artifacts(outcome: &RunOutcome, dir: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("trajectory.csv"), trajectory_csv(&outcome.training))?;
    let state = serde_json::json!({
        "q": outcome.training.state.q.iter().map(matrix_rows).collect::<Vec<_>>(),
        "attention": outcome.training.attention.iter().map(matrix_rows).collect::<Vec<_>>(),
    });
    fs::write(dir.join("attention.json"), serde_json::to_string_pretty(&state).unwrap())?;
    fs::write(dir.join("adjacency.csv"), adjacency_csv(&outcome.decoded.adjacency))?;
    if outcome.training.attention.len() == 2 {
        let combined = two_head_heatmap(&outcome.training.attention).map_err(run_err)?;
        fs::write(dir.join("heatmap.csv"), matrix_csv(&combined))?;
        fs::write(dir.join("heatmap.svg"), heatmap_svg(&combined))?;
    }
    fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(&outcome.report).unwrap(),
    )?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub label: String,
    pub x: f64,
    pub epoch: u64,
}

#[derive(Debug, Serialize)]
pub struct SweepReport {
    pub config: RunConfig,
    pub points: Vec<SweepPoint>,
    /// x used in the fit (T^2 log T for the length sweep, 1/delta for the
    /// gap sweep).
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub strictly_monotone: bool,
}

fn threshold_stop(
    table: &KgmiTable,
    dag: &Dag,
    cfg: &RunConfig,
) -> Result<u64, ExperimentError> {
    let opts = TrainOptions {
        eta: cfg.eta,
        eps_attn: cfg.eps_attn,
        stopping: Stopping::Threshold { cap: cfg.cap },
        log_every: 0,
    };
    let res = train(table, dag, &opts).map_err(run_err)?;
    res.stopped_at.ok_or_else(|| {
        ExperimentError::Run(format!("no concentration within {} epochs", cfg.cap))
    })
}

/// Stopping epoch against sequence length: the base graph and table are
/// replicated as disjoint copies so the gap stays fixed while T grows.
pub fn sweep_t(
    cfg: &RunConfig,
    repeats: &[usize],
    out_dir: Option<&Path>,
) -> Result<SweepReport, ExperimentError> {
    cfg.validate()?;
    if repeats.is_empty() || repeats.contains(&0) {
        return Err(ExperimentError::Config("repeat counts must be positive".into()));
    }
    let dag = cfg.resolve_graph()?;
    let kernel = cfg.resolve_kernel()?;
    let f = cfg.resolve_f()?;
    let stats = analyze(&kernel).map_err(cfg_err)?;
    let dist = enumerate(&dag, &stats).map_err(run_err)?;
    let base = kgmi_table(&dag, &stats, &dist, f);
    let mut points = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &m in repeats {
        let gm = Dag::disjoint_copies(&dag, m);
        let tm = tiled(&base, m);
        let epoch = threshold_stop(&tm, &gm, cfg)?;
        let t = gm.node_count() as f64;
        points.push(SweepPoint { label: format!("m={m}"), x: t, epoch });
        xs.push(t * t * t.ln());
        ys.push(epoch as f64);
    }
    let (slope, intercept, r2) = linear_fit(&xs, &ys);
    let strictly_monotone = points.windows(2).all(|w| w[0].epoch < w[1].epoch);
    let report = SweepReport { config: cfg.clone(), points, slope, intercept, r2, strictly_monotone };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        let mut csv = String::from("m,T,epoch\n");
        for p in &report.points {
            let _ = writeln!(csv, "{},{},{}", p.label.trim_start_matches("m="), p.x, p.epoch);
        }
        fs::write(dir.join("t_sweep.csv"), csv)?;
        fs::write(dir.join("t_sweep.json"), serde_json::to_string_pretty(&report).unwrap())?;
    }
    Ok(report)
}

/// Stopping epoch against the information gap: same graph, perturbed
/// kernels.
pub fn sweep_delta(
    cfg: &RunConfig,
    pvecs: &[Vec<f64>],
    out_dir: Option<&Path>,
) -> Result<SweepReport, ExperimentError> {
    cfg.validate()?;
    if pvecs.is_empty() {
        return Err(ExperimentError::Config("need at least one perturbation vector".into()));
    }
    let dag = cfg.resolve_graph()?;
    let f = cfg.resolve_f()?;
    let mut points = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (idx, p) in pvecs.iter().enumerate() {
        let sub = RunConfig { kernel: KernelSpec::Perturbation { p: p.clone() }, ..cfg.clone() };
        let kernel = sub.resolve_kernel()?;
        let stats = analyze(&kernel).map_err(cfg_err)?;
        let dist = enumerate(&dag, &stats).map_err(run_err)?;
        let table = kgmi_table(&dag, &stats, &dist, f);
        let delta = table_stats(&table, &dag).delta;
        let epoch = threshold_stop(&table, &dag, cfg)?;
        points.push(SweepPoint { label: format!("kernel{idx}"), x: delta, epoch });
        xs.push(1.0 / delta);
        ys.push(epoch as f64);
    }
    let (slope, intercept, r2) = linear_fit(&xs, &ys);
    let mut by_delta: Vec<&SweepPoint> = points.iter().collect();
    by_delta.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap());
    let strictly_monotone = by_delta.windows(2).all(|w| w[0].epoch > w[1].epoch);
    let report = SweepReport { config: cfg.clone(), points, slope, intercept, r2, strictly_monotone };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        let mut csv = String::from("delta,inv_delta,epoch\n");
        for p in &report.points {
            let _ = writeln!(csv, "{},{},{}", p.x, 1.0 / p.x, p.epoch);
        }
        fs::write(dir.join("delta_sweep.csv"), csv)?;
        fs::write(dir.join("delta_sweep.json"), serde_json::to_string_pretty(&report).unwrap())?;
    }
    Ok(report)
}

/// Benchmark-kernel perturbations for the gap sweep, ordered by descending
/// gap (so stopping epochs come out ascending).
pub fn default_delta_pvecs() -> Vec<Vec<f64>> {
    let mut alternating = vec![0.05; 9];
    for (i, v) in alternating.iter_mut().enumerate() {
        if i % 2 == 1 {
            *v = -0.05;
        }
    }
    vec![vec![-0.08; 9], vec![0.0; 9], vec![0.05; 9], alternating]
}

#[derive(Debug, Serialize)]
pub struct ComparePoint {
    pub f: String,
    pub delta: f64,
    pub epoch: u64,
}

#[derive(Debug, Serialize)]
pub struct CompareReport {
    pub config: RunConfig,
    pub points: Vec<ComparePoint>,
    /// Epochs sorted by descending gap are nondecreasing: the bigger the
    /// gap, the faster the convergence.
    pub ordering_consistent: bool,
}

pub fn compare_f(
    cfg: &RunConfig,
    fs_list: &[FKind],
    out_dir: Option<&Path>,
) -> Result<CompareReport, ExperimentError> {
    cfg.validate()?;
    if fs_list.is_empty() {
        return Err(ExperimentError::Config("need at least one f kind".into()));
    }
    let dag = cfg.resolve_graph()?;
    let kernel = cfg.resolve_kernel()?;
    let stats = analyze(&kernel).map_err(cfg_err)?;
    let dist = enumerate(&dag, &stats).map_err(run_err)?;
    let mut points = Vec::new();
    let mut curves = Vec::new();
    for &f in fs_list {
        let table = kgmi_table(&dag, &stats, &dist, f);
        let delta = table_stats(&table, &dag).delta;
        let opts = TrainOptions {
            eta: cfg.eta,
            eps_attn: cfg.eps_attn,
            stopping: Stopping::Threshold { cap: cfg.cap },
            log_every: if cfg.log_every > 0 { cfg.log_every } else { 50 },
        };
        let res = train(&table, &dag, &opts).map_err(run_err)?;
        let epoch = res.stopped_at.ok_or_else(|| {
            ExperimentError::Run(format!("{}: no concentration within {}", f.name(), cfg.cap))
        })?;
        points.push(ComparePoint { f: f.name().to_string(), delta, epoch });
        let mut curve = String::from("t,gap\n");
        for r in &res.records {
            let _ = writeln!(curve, "{},{}", r.epoch, r.gap);
        }
        curves.push((f.name().to_string(), curve));
    }
    let mut by_delta: Vec<&ComparePoint> = points.iter().collect();
    by_delta.sort_by(|a, b| b.delta.partial_cmp(&a.delta).unwrap());
    let ordering_consistent = by_delta.windows(2).all(|w| w[0].epoch <= w[1].epoch);
    let report = CompareReport { config: cfg.clone(), points, ordering_consistent };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        let mut csv = String::from("f,delta,epoch\n");
        for p in &report.points {
            let _ = writeln!(csv, "{},{},{}", p.f, p.delta, p.epoch);
        }
        fs::write(dir.join("compare_f.csv"), csv)?;
        for (name, curve) in &curves {
            fs::write(dir.join(format!("gap_curve_{name}.csv")), curve)?;
        }
        fs::write(dir.join("compare_f.json"), serde_json::to_string_pretty(&report).unwrap())?;
    }
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct CollapseDemoSide {
    pub f: String,
    pub collapsed_nodes: Vec<usize>,
    pub all_nonroot_collapsed: bool,
    pub score: ScoreReport,
}

#[derive(Debug, Serialize)]
pub struct CollapseDemoReport {
    pub config: RunConfig,
    pub naive: Vec<CollapseDemoSide>,
    /// The guided run on the same instance: per non-root node, the two head
    /// argmaxes, which match the two true parents.
    pub guided_parents_recovered: bool,
    pub guided_score: ScoreReport,
}

/// Train the head-blind table and the head-aware table on the same
/// instance: the former collapses every non-root node onto a single shared
/// argmax, the latter separates the heads onto the true parents.
pub fn collapse_demo(
    cfg: &RunConfig,
    out_dir: Option<&Path>,
) -> Result<CollapseDemoReport, ExperimentError> {
    cfg.validate()?;
    let dag = cfg.resolve_graph()?;
    let mut naive_sides = Vec::new();
    for f in ["kl", "pearson_chi2"] {
        let sub = RunConfig {
            mode: RunMode::Naive,
            f: f.into(),
            log_every: 0,
            ..cfg.clone()
        };
        let out = run(&sub, None)?;
        let collapsed: Vec<usize> = out.decoded.collapses.iter().map(|c| c.node).collect();
        let all = (0..dag.node_count())
            .filter(|&i| !dag.is_root(i) && i > 1)
            .all(|i| collapsed.contains(&i));
        naive_sides.push(CollapseDemoSide {
            f: f.into(),
            collapsed_nodes: collapsed,
            all_nonroot_collapsed: all,
            score: out.report.score.clone(),
        });
    }
    let guided_cfg = RunConfig { mode: RunMode::Population, log_every: 0, ..cfg.clone() };
    let guided = run(&guided_cfg, None)?;
    let recovered = (0..dag.node_count())
        .filter(|&i| !dag.is_root(i))
        .all(|i| guided.decoded.parents[i] == dag.parents(i));
    let report = CollapseDemoReport {
        config: cfg.clone(),
        naive: naive_sides,
        guided_parents_recovered: recovered,
        guided_score: guided.report.score.clone(),
    };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        fs::write(
            dir.join("collapse_demo.json"),
            serde_json::to_string_pretty(&report).unwrap(),
        )?;
    }
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct EstimateReport {
    pub config: RunConfig,
    pub n: usize,
    pub kappa: f64,
    pub kappa_admissible: bool,
    pub bootstrap_resamples: usize,
    pub max_abs_error_vs_population: f64,
    pub max_se: f64,
    pub mean_se: f64,
}

/// Sample a dataset, estimate the chi-square table with bootstrap standard
/// errors, and report its distance from the population table.
pub fn estimate_table_run(
    cfg: &RunConfig,
    out_dir: Option<&Path>,
) -> Result<(EstimateReport, EstimatedTable), ExperimentError> {
    cfg.validate()?;
    let dag = cfg.resolve_graph()?;
    let kernel = cfg.resolve_kernel()?;
    let stats = analyze(&kernel).map_err(cfg_err)?;
    let sampler = Sampler::new(&dag, &stats).map_err(run_err)?;
    let ds = sampler.dataset(cfg.n, cfg.seed, true);
    let est = estimate_table(&ds, cfg.kappa, cfg.bootstrap, cfg.seed).map_err(run_err)?;
    let dist = enumerate(&dag, &stats).map_err(run_err)?;
    let pop = kgmi_table(&dag, &stats, &dist, FKind::PearsonChi2);
    let t = dag.node_count();
    let mut max_err = 0.0f64;
    let mut max_se = 0.0f64;
    let mut sum_se = 0.0;
    let mut cells = 0usize;
    for l in 0..est.table.k() {
        for i in 1..t {
            for j in 0..i {
                max_err = max_err
                    .max((est.table.heads[l].get(j, i) - pop.heads[l].get(j, i)).abs());
                let se = est.se[l].get(j, i);
                max_se = max_se.max(se);
                sum_se += se;
                cells += 1;
            }
        }
    }
    let report = EstimateReport {
        config: cfg.clone(),
        n: cfg.n,
        kappa: cfg.kappa,
        kappa_admissible: kappa_admissible(cfg.kappa, cfg.eps_attn),
        bootstrap_resamples: cfg.bootstrap,
        max_abs_error_vs_population: max_err,
        max_se,
        mean_se: sum_se / cells as f64,
    };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        for l in 0..est.table.k() {
            fs::write(dir.join(format!("estimated_head{}.csv", l + 1)), matrix_csv(&est.table.heads[l]))?;
            fs::write(dir.join(format!("se_head{}.csv", l + 1)), matrix_csv(&est.se[l]))?;
        }
        fs::write(dir.join("estimate_report.json"), serde_json::to_string_pretty(&report).unwrap())?;
    }
    Ok((report, est))
}

#[derive(Debug, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> CheckLine {
    CheckLine { name: name.into(), pass, detail }
}

/// Internal consistency battery over the configured instance. Returns one
/// line per check; the caller decides what a failure is worth.
pub fn check_invariants(cfg: &RunConfig) -> Result<Vec<CheckLine>, ExperimentError> {
    cfg.validate()?;
    let dag = cfg.resolve_graph()?;
    let kernel = cfg.resolve_kernel()?;
    let stats = analyze(&kernel).map_err(cfg_err)?;
    let mut lines = Vec::new();

    let lifted = kernel.lift();
    let n = lifted.rows();
    let mut residual = 0.0f64;
    for b in 0..n {
        let mut acc = 0.0;
        for a in 0..n {
            acc += stats.m[a] * lifted.get(a, b);
        }
        residual = residual.max((acc - stats.m[b]).abs());
    }
    lines.push(check(
        "stationarity-residual",
        residual < 1e-12,
        format!("max |M P - M| = {residual:.3e}"),
    ));

    let mut marg_dev = 0.0f64;
    for l in 0..kernel.k() {
        for s in 0..kernel.s() {
            let mut acc = 0.0;
            for sp in 0..kernel.s() {
                acc += stats.mu[sp] * stats.marginals[l].get(sp, s);
            }
            marg_dev = marg_dev.max((acc - stats.mu[s]).abs());
        }
    }
    lines.push(check(
        "marginal-stationarity",
        marg_dev < 1e-10,
        format!("max |mu pi_l - mu| = {marg_dev:.3e}"),
    ));

    let bound = 1.0 - stats.gamma / kernel.s() as f64;
    lines.push(check(
        "contraction-bound",
        stats.lambda <= bound + 1e-12,
        format!("lambda = {:.6} vs 1 - gamma/S = {bound:.6}", stats.lambda),
    ));

    let dist = enumerate(&dag, &stats).map_err(run_err)?;
    let f = cfg.resolve_f()?;
    let chi_direct = kgmi_table(&dag, &stats, &dist, FKind::PearsonChi2);
    let chi_closed = crate::infometric::chi2_closed_form(&dag, &stats, &dist);
    let mut chi_dev = 0.0f64;
    for l in 0..chi_direct.k() {
        for i in 0..dag.node_count() {
            for j in 0..i {
                chi_dev = chi_dev
                    .max((chi_direct.heads[l].get(j, i) - chi_closed.heads[l].get(j, i)).abs());
            }
        }
    }
    lines.push(check(
        "chi2-closed-form",
        chi_dev < 1e-10,
        format!("max entry deviation = {chi_dev:.3e}"),
    ));

    let diag = crate::graph::diagnostics(&dag);
    let mut conc_viol = 0.0f64;
    for i in 0..dag.node_count() {
        for j in 0..i {
            let pair = dist.pair(i, j);
            let d = diag.trek_dist[j][i];
            if diag.is_unreachable(d) {
                continue;
            }
            for si in 0..kernel.s() {
                for sj in 0..kernel.s() {
                    let mu_i = dist.marginal(i)[si];
                    let mu_j = dist.marginal(j)[sj];
                    let lhs = (pair.get(si, sj) - mu_i * mu_j).abs();
                    let rhs = (mu_i * mu_j).sqrt() * stats.lambda.powi(d as i32);
                    conc_viol = conc_viol.max(lhs - rhs);
                }
            }
        }
    }
    lines.push(check(
        "pairwise-concentration",
        conc_viol <= 1e-9,
        format!("max violation = {conc_viol:.3e}"),
    ));

    let table = kgmi_table(&dag, &stats, &dist, f);
    let opts = TrainOptions {
        eta: cfg.eta,
        eps_attn: cfg.eps_attn,
        stopping: Stopping::FixedEpochs(50),
        log_every: 10,
    };
    let res = train(&table, &dag, &opts).map_err(run_err)?;
    let worst_root = res
        .records
        .iter()
        .map(|r| r.max_root_deviation)
        .fold(0.0f64, f64::max);
    lines.push(check(
        "root-fixed-point",
        worst_root < 1e-10,
        format!("max root column deviation = {worst_root:.3e}"),
    ));
    let monotone = res
        .records
        .windows(2)
        .all(|w| w[1].objective >= w[0].objective - 1e-12);
    lines.push(check(
        "objective-nondecreasing",
        monotone,
        format!("{} logged records", res.records.len()),
    ));
    Ok(lines)
}
