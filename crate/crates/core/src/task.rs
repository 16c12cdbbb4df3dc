//! Task loading and validation.
//!
//! Tasks live on disk in the community-standard per-task format: one
//! JSON file per task with `train` and `test` arrays of records, each
//! holding an `input` and (optionally, for test records) an `output`
//! matrix of integers 0-9.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A single cell color. Valid values are 0..=9; 0 is the background.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct Color(u8);

pub const BACKGROUND: Color = Color(0);

impl Color {
    pub fn new(value: u8) -> Option<Color> {
        (value <= 9).then_some(Color(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn is_background(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Maximum grid side length in the corpus.
pub const MAX_SIDE: usize = 30;

/// A dense row-major grid of colors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Grid {
    height: usize,
    width: usize,
    cells: Vec<Color>,
}

impl Grid {
    /// Build a grid from rows of raw color values, validating shape and range.
    ///
    /// `context` names the grid in error messages, e.g. `train[0].input`.
    pub fn from_rows(rows: &[Vec<i64>], context: &str) -> Result<Grid, TaskError> {
        let height = rows.len();
        if height == 0 {
            return Err(TaskError::BadDimensions {
                context: context.to_string(),
                height: 0,
                width: 0,
            });
        }
        let width = rows[0].len();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(TaskError::RaggedGrid {
                    context: context.to_string(),
                    row: r,
                    expected: width,
                    got: row.len(),
                });
            }
        }
        if width == 0 || height > MAX_SIDE || width > MAX_SIDE {
            return Err(TaskError::BadDimensions {
                context: context.to_string(),
                height,
                width,
            });
        }
        let mut cells = Vec::with_capacity(height * width);
        for (r, row) in rows.iter().enumerate() {
            for (c, &value) in row.iter().enumerate() {
                let color = u8::try_from(value).ok().and_then(Color::new).ok_or(
                    TaskError::ColorOutOfRange {
                        context: context.to_string(),
                        row: r,
                        col: c,
                        value,
                    },
                )?;
                cells.push(color);
            }
        }
        Ok(Grid {
            height,
            width,
            cells,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, row: usize, col: usize) -> Color {
        debug_assert!(row < self.height && col < self.width);
        self.cells[row * self.width + col]
    }

    pub fn cells(&self) -> &[Color] {
        &self.cells
    }

    /// The set of colors present in the grid, background included.
    pub fn palette(&self) -> crate::graph::ColorSet {
        let mut set = crate::graph::ColorSet::empty();
        for &c in &self.cells {
            set.insert(c);
        }
        set
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.height)
            .map(|r| (0..self.width).map(|c| self.get(r, c).value()).collect())
            .collect()
    }
}

/// One input/output example pair. Test pairs may lack the output.
#[derive(Debug, Clone)]
pub struct Pair {
    pub input: Grid,
    pub output: Option<Grid>,
}

/// A loaded task: ordered train pairs plus test pairs.
#[derive(Debug, Clone)]
pub struct Task {
    pub id: String,
    pub train_pairs: Vec<Pair>,
    pub test_pairs: Vec<Pair>,
    /// Non-fatal oddities found at load time (e.g. fewer than two train pairs).
    pub warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at byte {offset} (line {line}, column {column}): {message}")]
    Parse {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("color out of range at ({row},{col}) in {context}: {value}")]
    ColorOutOfRange {
        context: String,
        row: usize,
        col: usize,
        value: i64,
    },
    #[error("ragged grid in {context}: row {row} has {got} cells, expected {expected}")]
    RaggedGrid {
        context: String,
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("grid dimensions {height}x{width} outside 1..={max} in {context}", max = MAX_SIDE)]
    BadDimensions {
        context: String,
        height: usize,
        width: usize,
    },
    #[error("{section} record {index} is missing its output grid")]
    MissingOutput { section: String, index: usize },
    #[error("task has no {section} records")]
    EmptySection { section: String },
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<TaskError>,
    },
    #[error("corpus directory {path} contains no task files")]
    EmptyCorpus { path: PathBuf },
}

#[derive(Deserialize, Serialize)]
struct RawPair {
    input: Vec<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<Vec<Vec<i64>>>,
}

#[derive(Deserialize, Serialize)]
struct RawTask {
    train: Vec<RawPair>,
    test: Vec<RawPair>,
}

fn byte_offset_of(text: &str, line: usize, column: usize) -> usize {
    // serde_json reports 1-based line and column.
    let mut remaining = line.saturating_sub(1);
    let mut offset = 0;
    for (i, b) in text.bytes().enumerate() {
        if remaining == 0 {
            break;
        }
        if b == b'\n' {
            remaining -= 1;
            offset = i + 1;
        }
    }
    offset + column.saturating_sub(1)
}

/// Parse a task from its JSON text. The id is supplied by the caller.
pub fn parse_task(text: &str, id: &str) -> Result<Task, TaskError> {
    let raw: RawTask = serde_json::from_str(text).map_err(|e| TaskError::Parse {
        offset: byte_offset_of(text, e.line(), e.column()),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    if raw.train.is_empty() {
        return Err(TaskError::EmptySection {
            section: "train".into(),
        });
    }
    if raw.test.is_empty() {
        return Err(TaskError::EmptySection {
            section: "test".into(),
        });
    }

    let mut train_pairs = Vec::with_capacity(raw.train.len());
    for (i, p) in raw.train.iter().enumerate() {
        let input = Grid::from_rows(&p.input, &format!("train[{i}].input"))?;
        let output = match &p.output {
            Some(rows) => Grid::from_rows(rows, &format!("train[{i}].output"))?,
            None => {
                return Err(TaskError::MissingOutput {
                    section: "train".into(),
                    index: i,
                })
            }
        };
        train_pairs.push(Pair {
            input,
            output: Some(output),
        });
    }

    let mut test_pairs = Vec::with_capacity(raw.test.len());
    for (i, p) in raw.test.iter().enumerate() {
        let input = Grid::from_rows(&p.input, &format!("test[{i}].input"))?;
        let output = match &p.output {
            Some(rows) => Some(Grid::from_rows(rows, &format!("test[{i}].output"))?),
            None => None,
        };
        test_pairs.push(Pair { input, output });
    }

    let mut warnings = Vec::new();
    if train_pairs.len() < 2 {
        warnings.push(format!(
            "task {id} has {} train pair(s); constraint abduction needs at least two",
            train_pairs.len()
        ));
    }

    Ok(Task {
        id: id.to_string(),
        train_pairs,
        test_pairs,
        warnings,
    })
}

/// Load and validate one task file. The task id is the file name stem.
pub fn load_task(path: &Path) -> Result<Task, TaskError> {
    let text = fs::read_to_string(path).map_err(|source| TaskError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_task(&text, &id).map_err(|source| TaskError::InFile {
        path: path.to_path_buf(),
        source: Box::new(source),
    })
}

/// Serialize a task back to the on-disk JSON format.
pub fn task_to_json(task: &Task) -> String {
    let raw = RawTask {
        train: task
            .train_pairs
            .iter()
            .map(|p| RawPair {
                input: grid_rows_i64(&p.input),
                output: p.output.as_ref().map(grid_rows_i64),
            })
            .collect(),
        test: task
            .test_pairs
            .iter()
            .map(|p| RawPair {
                input: grid_rows_i64(&p.input),
                output: p.output.as_ref().map(grid_rows_i64),
            })
            .collect(),
    };
    serde_json::to_string(&raw).expect("task serialization cannot fail")
}

fn grid_rows_i64(grid: &Grid) -> Vec<Vec<i64>> {
    grid.to_rows()
        .into_iter()
        .map(|row| row.into_iter().map(i64::from).collect())
        .collect()
}

/// Outcome of loading a whole corpus directory.
#[derive(Debug)]
pub struct CorpusLoad {
    /// Tasks sorted by id for deterministic iteration.
    pub tasks: Vec<Task>,
    /// Files that failed to load, with their errors.
    pub failures: Vec<(PathBuf, TaskError)>,
}

/// Load every `.json` task file in a directory, sorted by task id.
///
/// Individual file failures are collected; the remaining tasks are still
/// returned. A directory with no task files at all is an error.
pub fn load_corpus(dir: &Path) -> Result<CorpusLoad, TaskError> {
    let entries = fs::read_dir(dir).map_err(|source| TaskError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(TaskError::EmptyCorpus {
            path: dir.to_path_buf(),
        });
    }
    let mut tasks = Vec::with_capacity(paths.len());
    let mut failures = Vec::new();
    for path in paths {
        match load_task(&path) {
            Ok(task) => tasks.push(task),
            Err(err) => failures.push((path, err)),
        }
    }
    tasks.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(CorpusLoad { tasks, failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_file(dir: &Path, name: &str, contents: &str) -> PathBuf {
        let path = dir.join(name);
        fs::write(&path, contents).unwrap();
        path
    }

    #[test]
    fn minimal_task_loads() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            dir.path(),
            "tiny.json",
            r#"{"train":[{"input":[[0]],"output":[[0]]}],"test":[{"input":[[0]]}]}"#,
        );
        let task = load_task(&path).unwrap();
        assert_eq!(task.id, "tiny");
        assert_eq!(task.train_pairs.len(), 1);
        assert_eq!(task.test_pairs.len(), 1);
        assert!(task.test_pairs[0].output.is_none());
        // Single train pair is tolerated but flagged.
        assert_eq!(task.warnings.len(), 1);
    }

    #[test]
    fn out_of_range_color_names_the_cell() {
        let err = parse_task(
            r#"{"train":[{"input":[[0,11]],"output":[[0]]}],"test":[{"input":[[0]]}]}"#,
            "t",
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("color out of range at (0,1)"), "{msg}");
        assert!(msg.contains("11"), "{msg}");
    }

    #[test]
    fn parse_error_reports_byte_offset() {
        let text = "{\"train\": [\n  {\"input\": [[0]], \"output\": }\n]}";
        let err = parse_task(text, "t").unwrap_err();
        match err {
            TaskError::Parse { offset, line, .. } => {
                assert_eq!(line, 2);
                assert_eq!(&text[offset..offset + 1], "}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn ragged_and_oversize_grids_rejected() {
        let err = parse_task(
            r#"{"train":[{"input":[[0,0],[0]],"output":[[0]]}],"test":[{"input":[[0]]}]}"#,
            "t",
        )
        .unwrap_err();
        assert!(err.to_string().contains("ragged"), "{err}");

        let big_row: Vec<i64> = vec![0; 31];
        let raw = serde_json::to_string(&RawTask {
            train: vec![RawPair {
                input: vec![big_row],
                output: Some(vec![vec![0]]),
            }],
            test: vec![RawPair {
                input: vec![vec![0]],
                output: None,
            }],
        })
        .unwrap();
        let err = parse_task(&raw, "t").unwrap_err();
        assert!(err.to_string().contains("1x31"), "{err}");
    }

    #[test]
    fn corpus_sorted_and_failures_collected() {
        let dir = tempfile::tempdir().unwrap();
        let good = r#"{"train":[{"input":[[1]],"output":[[1]]},{"input":[[2]],"output":[[2]]}],"test":[{"input":[[3]]}]}"#;
        write_file(dir.path(), "bbb.json", good);
        write_file(dir.path(), "aaa.json", good);
        write_file(dir.path(), "ccc.json", good);
        let load = load_corpus(dir.path()).unwrap();
        let ids: Vec<_> = load.tasks.iter().map(|t| t.id.as_str()).collect();
        assert_eq!(ids, ["aaa", "bbb", "ccc"]);
        assert!(load.failures.is_empty());

        write_file(dir.path(), "bad.json", "{ not json");
        let load = load_corpus(dir.path()).unwrap();
        assert_eq!(load.tasks.len(), 3);
        assert_eq!(load.failures.len(), 1);
        assert!(load.failures[0].0.ends_with("bad.json"));
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_corpus(dir.path()),
            Err(TaskError::EmptyCorpus { .. })
        ));
    }

    #[test]
    fn grid_round_trips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let text = r#"{"train":[{"input":[[1,2],[3,4]],"output":[[5]]},{"input":[[0]],"output":[[9]]}],"test":[{"input":[[7,8]]}]}"#;
        let path = write_file(dir.path(), "rt.json", text);
        let task = load_task(&path).unwrap();
        let reparsed = parse_task(&task_to_json(&task), "rt").unwrap();
        assert_eq!(task.train_pairs[0].input, reparsed.train_pairs[0].input);
        assert_eq!(task.train_pairs[1].output, reparsed.train_pairs[1].output);
        assert_eq!(task.test_pairs[0].input, reparsed.test_pairs[0].input);
    }
}
