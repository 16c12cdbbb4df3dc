//! Corpus-wide evaluation: run the solver over a task directory, score
//! predictions against the true test outputs, and emit deterministic
//! reports.
//!
//! Reports carry a config echo, one row per task, and aggregate
//! accuracies for H, W, C, HW, and HWC. Worker count never appears in the
//! report, so runs with different `--jobs` values produce identical bytes.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{ColorSet, GridSide, KnowledgeGraph, Node, NodeId, ObjectPolicy};
use crate::properties::{build_knowledge_graph, PropertyKind};
use crate::synthesizer::{
    solve_with_kg, synthesize_without_kg, DslSet, SolveError, SolveOutcome, SolverConfig,
    TargetKind, TargetSet,
};
use crate::task::{load_corpus, load_task, Task, TaskError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Kg,
    Nokg,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Kg => write!(f, "kg"),
            Mode::Nokg => write!(f, "nokg"),
        }
    }
}

/// One experiment run's configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub mode: Mode,
    pub dsl_set: DslSet,
    pub depth: usize,
    pub targets: TargetSet,
    pub jobs: usize,
    pub policy: ObjectPolicy,
    pub properties: Vec<PropertyKind>,
    pub report_path: Option<PathBuf>,
    pub csv_path: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(data_dir: PathBuf, mode: Mode, dsl_set: DslSet) -> RunConfig {
        RunConfig {
            data_dir,
            mode,
            dsl_set,
            depth: 2,
            targets: TargetSet::all(),
            jobs: 1,
            policy: ObjectPolicy::SameColor4,
            properties: crate::properties::FULL_REGISTRY.to_vec(),
            report_path: None,
            csv_path: None,
        }
    }

    fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            dsl_set: self.dsl_set,
            depth: self.depth,
            targets: self.targets,
            policy: self.policy,
            properties: self.properties.clone(),
        }
    }
}

/// The configuration fields echoed into a report. Worker count and output
/// paths are deliberately absent: they cannot affect results.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub data_dir: String,
    pub mode: Mode,
    pub dsl_set: DslSet,
    pub depth: usize,
    pub targets: Vec<TargetKind>,
    pub object_policy: ObjectPolicy,
    pub properties: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct CorrectFlags {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hw: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hwc: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct PredictedValues {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub colors: Option<ColorSet>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ActualValues {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub colors: Option<ColorSet>,
}

/// Per-task scoring row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_id: String,
    pub predicted: PredictedValues,
    pub actual: ActualValues,
    pub correct: CorrectFlags,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unspecified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetStats {
    pub correct: usize,
    pub incorrect: usize,
    pub accuracy: f64,
}

/// A full evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: ConfigEcho,
    pub total_tasks: usize,
    /// Aggregate rows keyed "H", "W", "C", "HW", "HWC"; combination rows
    /// are present only when all their component targets are enabled.
    pub aggregate: BTreeMap<String, TargetStats>,
    pub tasks: Vec<TaskResult>,
}

impl EvalReport {
    pub fn accuracy(&self, key: &str) -> Option<f64> {
        self.aggregate.get(key).map(|s| s.accuracy)
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad report {path}: {source}")]
    BadReport {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("reports cover different corpora or targets: {detail}")]
    MismatchedRuns { detail: String },
    #[error("{0}")]
    BadConfig(String),
    #[error("pair index {index} out of range: task has {train} train and {test} test pairs")]
    PairOutOfRange {
        index: usize,
        train: usize,
        test: usize,
    },
}

fn solve_task_catching(
    task: &Task,
    mode: Mode,
    config: &SolverConfig,
) -> Result<SolveOutcome, String> {
    let run = || match mode {
        Mode::Kg => solve_with_kg(task, config),
        Mode::Nokg => synthesize_without_kg(task, config),
    };
    match catch_unwind(AssertUnwindSafe(run)) {
        Ok(Ok(outcome)) => Ok(outcome),
        Ok(Err(err)) => Err(err.to_string()),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".to_string());
            Err(format!("solver panicked: {msg}"))
        }
    }
}

fn score_task(task: &Task, mode: Mode, config: &SolverConfig, targets: TargetSet) -> TaskResult {
    let actual = match task.test_pairs.first().and_then(|p| p.output.as_ref()) {
        Some(out) => ActualValues {
            height: Some(out.height()),
            width: Some(out.width()),
            colors: Some(out.palette()),
        },
        None => ActualValues::default(),
    };

    let (predicted, unspecified, error) = match solve_task_catching(task, mode, config) {
        Ok(outcome) => (
            PredictedValues {
                height: outcome.prediction.height,
                width: outcome.prediction.width,
                colors: outcome.prediction.colors,
            },
            outcome.trained.unspecified,
            None,
        ),
        Err(msg) => (PredictedValues::default(), false, Some(msg)),
    };

    let h = targets
        .height
        .then(|| predicted.height.map(|v| v as usize) == actual.height && actual.height.is_some());
    let w = targets
        .width
        .then(|| predicted.width.map(|v| v as usize) == actual.width && actual.width.is_some());
    let c = targets
        .colors
        .then(|| predicted.colors == actual.colors && actual.colors.is_some());
    let hw = match (h, w) {
        (Some(a), Some(b)) => Some(a && b),
        _ => None,
    };
    let hwc = match (hw, c) {
        (Some(a), Some(b)) => Some(a && b),
        _ => None,
    };

    TaskResult {
        task_id: task.id.clone(),
        predicted,
        actual,
        correct: CorrectFlags { h, w, c, hw, hwc },
        unspecified,
        error,
    }
}

fn aggregate_results(results: &[TaskResult]) -> BTreeMap<String, TargetStats> {
    let total = results.len();
    let mut out = BTreeMap::new();
    let rows: [(&str, fn(&CorrectFlags) -> Option<bool>); 5] = [
        ("H", |f| f.h),
        ("W", |f| f.w),
        ("C", |f| f.c),
        ("HW", |f| f.hw),
        ("HWC", |f| f.hwc),
    ];
    for (key, getter) in rows {
        // A row exists only if the flag is tracked for every task.
        if results.iter().any(|r| getter(&r.correct).is_none()) {
            continue;
        }
        let correct = results
            .iter()
            .filter(|r| getter(&r.correct) == Some(true))
            .count();
        out.insert(
            key.to_string(),
            TargetStats {
                correct,
                incorrect: total - correct,
                accuracy: if total == 0 {
                    0.0
                } else {
                    correct as f64 / total as f64 * 100.0
                },
            },
        );
    }
    out
}

/// Run one experiment over a corpus directory. Per-task failures are
/// caught and scored as incorrect; a corpus that fails to load aborts.
pub fn run_experiment(config: &RunConfig) -> Result<EvalReport, HarnessError> {
    if config.depth == 0 {
        return Err(HarnessError::BadConfig("depth must be at least 1".into()));
    }
    if config.targets.is_empty() {
        return Err(HarnessError::BadConfig(
            "at least one target must be enabled".into(),
        ));
    }
    let load = load_corpus(&config.data_dir)?;
    let solver_config = config.solver_config();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.max(1))
        .build()
        .map_err(|e| HarnessError::BadConfig(format!("worker pool: {e}")))?;
    let mut results: Vec<TaskResult> = pool.install(|| {
        load.tasks
            .par_iter()
            .map(|task| score_task(task, config.mode, &solver_config, config.targets))
            .collect()
    });

    // Files that failed to load still count as attempted (and incorrect).
    for (path, err) in &load.failures {
        let task_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        results.push(TaskResult {
            task_id,
            predicted: PredictedValues::default(),
            actual: ActualValues::default(),
            correct: CorrectFlags {
                h: config.targets.height.then_some(false),
                w: config.targets.width.then_some(false),
                c: config.targets.colors.then_some(false),
                hw: (config.targets.height && config.targets.width).then_some(false),
                hwc: (config.targets.height && config.targets.width && config.targets.colors)
                    .then_some(false),
            },
            unspecified: false,
            error: Some(err.to_string()),
        });
    }
    results.sort_by(|a, b| a.task_id.cmp(&b.task_id));

    let report = EvalReport {
        config: ConfigEcho {
            data_dir: config.data_dir.to_string_lossy().into_owned(),
            mode: config.mode,
            dsl_set: config.dsl_set,
            depth: config.depth,
            targets: config.targets.iter().collect(),
            object_policy: config.policy,
            properties: config.properties.iter().map(|p| p.id().to_string()).collect(),
        },
        total_tasks: results.len(),
        aggregate: aggregate_results(&results),
        tasks: results,
    };

    if let Some(path) = &config.report_path {
        write_report(&report, path)?;
    }
    if let Some(path) = &config.csv_path {
        write_csv(&report, path)?;
    }
    Ok(report)
}

pub fn write_report(report: &EvalReport, path: &Path) -> Result<(), HarnessError> {
    let json = serde_json::to_string_pretty(report).expect("report serialization cannot fail");
    fs::write(path, json + "\n").map_err(|source| HarnessError::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_report(path: &Path) -> Result<EvalReport, HarnessError> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| HarnessError::BadReport {
        path: path.to_path_buf(),
        source,
    })
}

fn colors_cell(colors: &Option<ColorSet>) -> String {
    match colors {
        Some(cs) => cs
            .to_vec()
            .iter()
            .map(u8::to_string)
            .collect::<Vec<_>>()
            .join("|"),
        None => String::new(),
    }
}

fn flag_cell(flag: Option<bool>) -> &'static str {
    match flag {
        Some(true) => "1",
        Some(false) => "0",
        None => "",
    }
}

/// Flat per-task table: one row per task with predictions, truth, and flags.
pub fn write_csv(report: &EvalReport, path: &Path) -> Result<(), HarnessError> {
    let mut out = String::from(
        "task_id,pred_h,pred_w,pred_c,actual_h,actual_w,actual_c,h,w,c,hw,hwc,unspecified,error\n",
    );
    for r in &report.tasks {
        let opt = |v: Option<i64>| v.map(|x| x.to_string()).unwrap_or_default();
        let optu = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.task_id,
            opt(r.predicted.height),
            opt(r.predicted.width),
            colors_cell(&r.predicted.colors),
            optu(r.actual.height),
            optu(r.actual.width),
            colors_cell(&r.actual.colors),
            flag_cell(r.correct.h),
            flag_cell(r.correct.w),
            flag_cell(r.correct.c),
            flag_cell(r.correct.hw),
            flag_cell(r.correct.hwc),
            if r.unspecified { "1" } else { "0" },
            r.error
                .as_deref()
                .map(|e| e.replace([',', '\n'], ";"))
                .unwrap_or_default(),
        ));
    }
    fs::write(path, out).map_err(|source| HarnessError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// One row of a two-run comparison.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub component: String,
    pub a_accuracy: f64,
    pub b_accuracy: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// Components where run B beats run A.
    pub ordering_violations: Vec<String>,
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>10} {:>10} {:>8}", "component", "run_a", "run_b", "delta")?;
        for row in &self.rows {
            writeln!(
                f,
                "{:<10} {:>10.2} {:>10.2} {:>8.2}",
                row.component, row.a_accuracy, row.b_accuracy, row.delta
            )?;
        }
        if self.ordering_violations.is_empty() {
            writeln!(f, "no ordering violations (run_a >= run_b on every component)")
        } else {
            writeln!(f, "ordering violations: {}", self.ordering_violations.join(", "))
        }
    }
}

/// Compare two reports over the same corpus: per-component accuracy deltas
/// (`a - b`) plus flags for rows where `b` beats `a`.
pub fn compare_runs(a: &EvalReport, b: &EvalReport) -> Result<Comparison, HarnessError> {
    let ids = |r: &EvalReport| -> Vec<String> { r.tasks.iter().map(|t| t.task_id.clone()).collect() };
    if ids(a) != ids(b) {
        return Err(HarnessError::MismatchedRuns {
            detail: "task lists differ".into(),
        });
    }
    if a.config.targets != b.config.targets {
        return Err(HarnessError::MismatchedRuns {
            detail: "target sets differ".into(),
        });
    }
    let mut rows = Vec::new();
    let mut ordering_violations = Vec::new();
    for key in ["H", "W", "C", "HW", "HWC"] {
        let (Some(sa), Some(sb)) = (a.aggregate.get(key), b.aggregate.get(key)) else {
            continue;
        };
        let delta = sa.accuracy - sb.accuracy;
        if delta < 0.0 {
            ordering_violations.push(key.to_string());
        }
        rows.push(ComparisonRow {
            component: key.to_string(),
            a_accuracy: sa.accuracy,
            b_accuracy: sb.accuracy,
            delta,
        });
    }
    Ok(Comparison {
        rows,
        ordering_violations,
    })
}

// ---------------------------------------------------------------------------
// Graph dumps
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct GraphDump {
    pub task_id: String,
    pub pair_index: usize,
    pub has_output: bool,
    pub nodes: Vec<NodeDump>,
    pub edges: Vec<EdgeDump>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "layer", rename_all = "snake_case")]
pub enum NodeDump {
    Pnode {
        id: u32,
        side: GridSide,
        row: usize,
        col: usize,
        color: u8,
    },
    Onode {
        id: u32,
        side: GridSide,
        pixels: Vec<[usize; 2]>,
        colors: ColorSet,
        bbox: BboxDump,
        size: usize,
    },
    Gnode {
        id: u32,
        side: GridSide,
        height: usize,
        width: usize,
        onode_ids: Vec<u32>,
        pnode_ids: Vec<u32>,
    },
    Vnode {
        id: u32,
        input_gnode: u32,
        output_gnode: u32,
    },
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BboxDump {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EdgeDump {
    pub src: u32,
    pub dst: u32,
    pub label: String,
}

pub fn graph_dump(graph: &KnowledgeGraph) -> GraphDump {
    let ids = |v: &[NodeId]| -> Vec<u32> { v.iter().map(|id| id.0).collect() };
    let nodes = graph
        .nodes()
        .iter()
        .map(|n| match n {
            Node::P(p) => NodeDump::Pnode {
                id: p.id.0,
                side: p.side,
                row: p.coord.row,
                col: p.coord.col,
                color: p.color.value(),
            },
            Node::O(o) => NodeDump::Onode {
                id: o.id.0,
                side: o.side,
                pixels: o.pixels.iter().map(|c| [c.row, c.col]).collect(),
                colors: o.colors,
                bbox: BboxDump {
                    top: o.bbox.top,
                    left: o.bbox.left,
                    height: o.bbox.height,
                    width: o.bbox.width,
                },
                size: o.size(),
            },
            Node::G(g) => NodeDump::Gnode {
                id: g.id.0,
                side: g.side,
                height: g.grid.height(),
                width: g.grid.width(),
                onode_ids: ids(&g.onode_ids),
                pnode_ids: ids(&g.pnode_ids),
            },
            Node::V(v) => NodeDump::Vnode {
                id: v.id.0,
                input_gnode: v.input_gnode.0,
                output_gnode: v.output_gnode.0,
            },
        })
        .collect();
    let edges = graph
        .edges()
        .iter()
        .map(|e| EdgeDump {
            src: e.src.0,
            dst: e.dst.0,
            label: e.label.id().to_string(),
        })
        .collect();
    GraphDump {
        task_id: graph.task_id.clone(),
        pair_index: graph.pair_index,
        has_output: graph.has_output,
        nodes,
        edges,
    }
}

/// Build and dump the graph for one pair of a task. Pair indices cover the
/// train pairs first, then the test pairs; test-pair graphs are built
/// without an output side.
pub fn dump_graph(
    task_path: &Path,
    pair_index: usize,
    out_path: &Path,
    properties: &[PropertyKind],
    policy: ObjectPolicy,
) -> Result<GraphDump, HarnessError> {
    let task = load_task(task_path)?;
    let graph = build_pair_graph(&task, pair_index, properties, policy)?;
    let dump = graph_dump(&graph);
    let json = serde_json::to_string_pretty(&dump).expect("dump serialization cannot fail");
    fs::write(out_path, json + "\n").map_err(|source| HarnessError::Write {
        path: out_path.to_path_buf(),
        source,
    })?;
    Ok(dump)
}

pub fn build_pair_graph(
    task: &Task,
    pair_index: usize,
    properties: &[PropertyKind],
    policy: ObjectPolicy,
) -> Result<KnowledgeGraph, HarnessError> {
    let train = task.train_pairs.len();
    let test = task.test_pairs.len();
    if pair_index < train {
        let pair = &task.train_pairs[pair_index];
        Ok(build_knowledge_graph(
            &task.id,
            pair_index,
            &pair.input,
            pair.output.as_ref(),
            properties,
            policy,
        )?)
    } else if pair_index < train + test {
        let pair = &task.test_pairs[pair_index - train];
        Ok(build_knowledge_graph(
            &task.id,
            pair_index,
            &pair.input,
            None,
            properties,
            policy,
        )?)
    } else {
        Err(HarnessError::PairOutOfRange {
            index: pair_index,
            train,
            test,
        })
    }
}

/// Human-readable solve trace: session constraint, surviving hypotheses
/// per target, and the prediction with its provenance.
pub fn render_solve_trace(task: &Task, outcome: &SolveOutcome) -> String {
    let mut out = String::new();
    out.push_str(&format!("task {}\n", task.id));
    for warning in &task.warnings {
        out.push_str(&format!("warning: {warning}\n"));
    }
    out.push_str(&format!(
        "specifier constraint: {}{}\n",
        outcome.trained.session_constraint,
        if outcome.trained.unspecified {
            " [unspecified: degraded to select-all]"
        } else {
            ""
        }
    ));
    for (target, survivors) in &outcome.trained.by_target {
        out.push_str(&format!(
            "{target}: {} surviving hypothesis(es)\n",
            survivors.len()
        ));
        for h in survivors.iter().take(10) {
            out.push_str(&format!("  {h}\n"));
        }
        if survivors.len() > 10 {
            out.push_str(&format!("  ... {} more\n", survivors.len() - 10));
        }
    }
    out.push_str("prediction:\n");
    let fmt_colors = |cs: &ColorSet| {
        cs.to_vec()
            .iter()
            .map(u8::to_string)
            .collect::<Vec<_>>()
            .join(",")
    };
    match outcome.prediction.height {
        Some(h) => out.push_str(&format!("  height = {h}\n")),
        None => out.push_str("  height = (no surviving hypothesis)\n"),
    }
    match outcome.prediction.width {
        Some(w) => out.push_str(&format!("  width = {w}\n")),
        None => out.push_str("  width = (no surviving hypothesis)\n"),
    }
    match &outcome.prediction.colors {
        Some(cs) => out.push_str(&format!("  colors = {{{}}}\n", fmt_colors(cs))),
        None => out.push_str("  colors = (no surviving hypothesis)\n"),
    }
    for (target, h) in &outcome.prediction.provenance {
        out.push_str(&format!("  {target} via {h}\n"));
    }
    out
}
