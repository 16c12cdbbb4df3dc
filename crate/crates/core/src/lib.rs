//! Abductive symbolic solver for ARC tasks.
//!
//! The pipeline turns each example pair of a task into a four-layer
//! knowledge graph (pixels, objects, grids, pair), abduces constraints
//! that pick out solution-relevant nodes, and searches depth-bounded
//! compositions of typed transformation DSLs for paths that explain
//! every example pair. Surviving hypotheses are applied to the test
//! input to predict the output grid's height, width, and color set.
//!
//! Modules follow the pipeline order:
//! - [`task`]: load and validate tasks from the standard on-disk corpus
//! - [`graph`]: node layers and graph construction from grids
//! - [`properties`]: property predicates that draw the graph's edges
//! - [`specifier`]: feature extraction and constraint abduction
//! - [`synthesizer`]: typed path enumeration, training, and prediction
//! - [`harness`]: corpus-wide evaluation runs and reports

pub mod graph;
pub mod harness;
pub mod properties;
pub mod specifier;
pub mod synthesizer;
pub mod task;

pub use graph::{ColorSet, Coordinate, GridSide, KnowledgeGraph, NodeId, NodeLayer, ObjectPolicy};
pub use task::{Color, Grid, Task};
