//! Typed transformation search: enumerate depth-bounded DSL compositions
//! from candidate nodes, keep the hypotheses that explain every example
//! pair, and apply the survivors to the test graph.
//!
//! A hypothesis is a `(constraint, path)` pair: the constraint re-selects
//! the leaf node in any graph of the task, and the path is the sequence of
//! transformation applications (with bound parameters) that turns the leaf
//! into the target value. Node-valued parameters are themselves stored as
//! constraints so they can be re-resolved on unseen graphs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::graph::{
    concat_list, make_gnode_list, make_pnode_list, ColorSet, GraphError, GridSide,
    KnowledgeGraph, NodeId, NodeLayer, NodeList, ObjectPolicy,
};
use crate::properties::{build_knowledge_graph, PropertyKind};
use crate::specifier::{CandidateClass, Constraint, GraphFeatures, SpecifierSession, UniqueConstraint};
use crate::task::{Grid, Task, MAX_SIDE};

/// A value flowing through a transformation path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Value {
    Node(NodeId),
    Int(i64),
    Colors(ColorSet),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    Node,
    Int,
    Colors,
}

impl Value {
    pub fn kind(&self) -> ValueKind {
        match self {
            Value::Node(_) => ValueKind::Node,
            Value::Int(_) => ValueKind::Int,
            Value::Colors(_) => ValueKind::Colors,
        }
    }
}

/// The transformation DSLs. Declaration order is the registry order used
/// for deterministic enumeration and hypothesis priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TransformDsl {
    /// Node -> Int: bbox height for an object, grid height for a grid.
    GetHeight,
    /// Node -> Int: bbox width for an object, grid width for a grid.
    GetWidth,
    /// Node -> Int: number of colors other than the background.
    GetNumberOfColorset,
    /// Node -> Int: number of objects in a grid node; 1 for an object.
    OnodeCount,
    /// Node -> Int: pixel count (grid area for a grid node).
    GetSize,
    /// Int -> Int: a*x + b.
    Linear,
    /// Node|Colors -> Colors: union with the parameter node's colors.
    GetUnion,
    /// Node|Colors -> Colors: intersection with the parameter node's colors.
    GetIntersection,
    /// Node|Colors -> Colors: current colors minus the parameter node's.
    GetDifference,
    /// Node -> Colors: the node's own color set.
    GetIdentityMatch,
}

impl TransformDsl {
    pub fn id(self) -> &'static str {
        match self {
            TransformDsl::GetHeight => "get_height",
            TransformDsl::GetWidth => "get_width",
            TransformDsl::GetNumberOfColorset => "get_number_of_colorset",
            TransformDsl::OnodeCount => "onode_count",
            TransformDsl::GetSize => "get_size",
            TransformDsl::Linear => "linear",
            TransformDsl::GetUnion => "get_union",
            TransformDsl::GetIntersection => "get_intersection",
            TransformDsl::GetDifference => "get_difference",
            TransformDsl::GetIdentityMatch => "get_identity_match",
        }
    }

    pub fn accepts(self, kind: ValueKind) -> bool {
        match self {
            TransformDsl::GetHeight
            | TransformDsl::GetWidth
            | TransformDsl::GetNumberOfColorset
            | TransformDsl::OnodeCount
            | TransformDsl::GetSize
            | TransformDsl::GetIdentityMatch => kind == ValueKind::Node,
            TransformDsl::Linear => kind == ValueKind::Int,
            TransformDsl::GetUnion
            | TransformDsl::GetIntersection
            | TransformDsl::GetDifference => kind == ValueKind::Node || kind == ValueKind::Colors,
        }
    }

    pub fn output_kind(self) -> ValueKind {
        match self {
            TransformDsl::GetHeight
            | TransformDsl::GetWidth
            | TransformDsl::GetNumberOfColorset
            | TransformDsl::OnodeCount
            | TransformDsl::GetSize
            | TransformDsl::Linear => ValueKind::Int,
            _ => ValueKind::Colors,
        }
    }

    pub fn takes_node_param(self) -> bool {
        matches!(
            self,
            TransformDsl::GetUnion | TransformDsl::GetIntersection | TransformDsl::GetDifference
        )
    }
}

impl fmt::Display for TransformDsl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

/// Coefficient grid for `linear(a, b)`.
pub const LINEAR_A: [i64; 3] = [1, 2, 3];
pub const LINEAR_B_MIN: i64 = -3;
pub const LINEAR_B_MAX: i64 = 3;

/// Which transformation registry to search with.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum DslSet {
    Ts10,
    Ts5,
}

impl DslSet {
    pub fn registry(self) -> &'static [TransformDsl] {
        match self {
            DslSet::Ts10 => &[
                TransformDsl::GetHeight,
                TransformDsl::GetWidth,
                TransformDsl::GetNumberOfColorset,
                TransformDsl::OnodeCount,
                TransformDsl::GetSize,
                TransformDsl::Linear,
                TransformDsl::GetUnion,
                TransformDsl::GetIntersection,
                TransformDsl::GetDifference,
                TransformDsl::GetIdentityMatch,
            ],
            DslSet::Ts5 => &[
                TransformDsl::GetHeight,
                TransformDsl::GetWidth,
                TransformDsl::Linear,
                TransformDsl::GetUnion,
                TransformDsl::GetIdentityMatch,
            ],
        }
    }
}

impl fmt::Display for DslSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DslSet::Ts10 => write!(f, "ts10"),
            DslSet::Ts5 => write!(f, "ts5"),
        }
    }
}

/// A prediction target.
#[derive(
    Debug,
    Clone,
    Copy,
    PartialEq,
    Eq,
    PartialOrd,
    Ord,
    Hash,
    serde::Serialize,
    serde::Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Height,
    Width,
    Colors,
}

impl TargetKind {
    pub fn value_kind(self) -> ValueKind {
        match self {
            TargetKind::Height | TargetKind::Width => ValueKind::Int,
            TargetKind::Colors => ValueKind::Colors,
        }
    }

    /// The true target value read from an output grid.
    pub fn truth(self, output: &Grid) -> Value {
        match self {
            TargetKind::Height => Value::Int(output.height() as i64),
            TargetKind::Width => Value::Int(output.width() as i64),
            TargetKind::Colors => Value::Colors(output.palette()),
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetKind::Height => write!(f, "H"),
            TargetKind::Width => write!(f, "W"),
            TargetKind::Colors => write!(f, "C"),
        }
    }
}

/// Enabled prediction targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TargetSet {
    pub height: bool,
    pub width: bool,
    pub colors: bool,
}

impl TargetSet {
    pub fn all() -> TargetSet {
        TargetSet {
            height: true,
            width: true,
            colors: true,
        }
    }

    pub fn iter(self) -> impl Iterator<Item = TargetKind> {
        [
            (TargetKind::Height, self.height),
            (TargetKind::Width, self.width),
            (TargetKind::Colors, self.colors),
        ]
        .into_iter()
        .filter_map(|(t, on)| on.then_some(t))
    }

    pub fn is_empty(self) -> bool {
        !(self.height || self.width || self.colors)
    }
}

/// One step of a generalized path: the DSL plus its bound parameters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Step {
    pub dsl: TransformDsl,
    pub linear: Option<(i64, i64)>,
    pub param: Option<UniqueConstraint>,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.linear, &self.param) {
            (Some((a, b)), _) => write!(f, "{}({a},{b})", self.dsl),
            (_, Some(p)) => write!(f, "{}(node: {})", self.dsl, p.constraint),
            _ => write!(f, "{}", self.dsl),
        }
    }
}

/// A constant value carried by an invariant hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstValue {
    Int(i64),
    Colors(ColorSet),
}

impl ConstValue {
    pub fn to_value(self) -> Value {
        match self {
            ConstValue::Int(n) => Value::Int(n),
            ConstValue::Colors(cs) => Value::Colors(cs),
        }
    }

    fn from_value(v: Value) -> Option<ConstValue> {
        match v {
            Value::Int(n) => Some(ConstValue::Int(n)),
            Value::Colors(cs) => Some(ConstValue::Colors(cs)),
            Value::Node(_) => None,
        }
    }
}

impl fmt::Display for ConstValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstValue::Int(n) => write!(f, "{n}"),
            ConstValue::Colors(cs) => write!(f, "{cs}"),
        }
    }
}

/// How a hypothesis produces its value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum HypothesisKind {
    /// Re-select the leaf via the constraint and run the path.
    Path {
        constraint: UniqueConstraint,
        steps: Vec<Step>,
    },
    /// The target value itself repeated on every example pair; a piece of
    /// core knowledge read off the output sides. Available only when the
    /// knowledge-graph pipeline runs, and always ranked after derived
    /// paths.
    Invariant { value: ConstValue },
}

/// A surviving explanation: on every training pair of its task,
/// evaluating it reproduces the true target value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hypothesis {
    pub target: TargetKind,
    pub kind: HypothesisKind,
}

impl Hypothesis {
    /// The constraint/path pair, when this is a path hypothesis.
    pub fn path(&self) -> Option<(&UniqueConstraint, &[Step])> {
        match &self.kind {
            HypothesisKind::Path { constraint, steps } => Some((constraint, steps)),
            HypothesisKind::Invariant { .. } => None,
        }
    }
}

fn leaf_layer_rank(c: &UniqueConstraint) -> u8 {
    match c.constraint.layer {
        Some(NodeLayer::Gnode) => 0,
        Some(NodeLayer::Onode) => 1,
        _ => 2,
    }
}

impl Ord for Hypothesis {
    fn cmp(&self, other: &Hypothesis) -> std::cmp::Ordering {
        // Priority: derived paths before invariants; among paths, shorter
        // first, then Gnode leaf before Onode leaf, then registry order of
        // the steps, then the selectors.
        match (&self.kind, &other.kind) {
            (
                HypothesisKind::Path { constraint, steps },
                HypothesisKind::Path {
                    constraint: other_constraint,
                    steps: other_steps,
                },
            ) => (steps.len(), leaf_layer_rank(constraint))
                .cmp(&(other_steps.len(), leaf_layer_rank(other_constraint)))
                .then_with(|| steps.cmp(other_steps))
                .then_with(|| constraint.cmp(other_constraint))
                .then_with(|| self.target.cmp(&other.target)),
            (HypothesisKind::Path { .. }, HypothesisKind::Invariant { .. }) => {
                std::cmp::Ordering::Less
            }
            (HypothesisKind::Invariant { .. }, HypothesisKind::Path { .. }) => {
                std::cmp::Ordering::Greater
            }
            (
                HypothesisKind::Invariant { value },
                HypothesisKind::Invariant { value: other_value },
            ) => value
                .cmp(other_value)
                .then_with(|| self.target.cmp(&other.target)),
        }
    }
}

impl PartialOrd for Hypothesis {
    fn partial_cmp(&self, other: &Hypothesis) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            HypothesisKind::Path { constraint, steps } => {
                write!(f, "{}: [{}]", self.target, constraint.constraint)?;
                for s in steps {
                    write!(f, " -> {s}")?;
                }
                Ok(())
            }
            HypothesisKind::Invariant { value } => {
                write!(f, "{}: invariant across pairs = {value}", self.target)
            }
        }
    }
}

/// Per-target prediction with the hypothesis that produced each value.
#[derive(Debug, Clone, Default)]
pub struct Prediction {
    pub height: Option<i64>,
    pub width: Option<i64>,
    pub colors: Option<ColorSet>,
    pub provenance: BTreeMap<TargetKind, Hypothesis>,
}

impl Prediction {
    pub fn get(&self, target: TargetKind) -> Option<Value> {
        match target {
            TargetKind::Height => self.height.map(Value::Int),
            TargetKind::Width => self.width.map(Value::Int),
            TargetKind::Colors => self.colors.map(Value::Colors),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EvalFailure {
    #[error("value kind does not match the DSL's input kind")]
    KindMismatch,
    #[error("integer overflow")]
    Overflow,
    #[error("selector matched no node")]
    EmptySelection,
    #[error("selector matched nodes with disagreeing values")]
    Ambiguous,
    #[error("value outside the grid domain")]
    InvalidValue,
}

fn node_colors(feats: &GraphFeatures, node: NodeId) -> Result<ColorSet, EvalFailure> {
    feats
        .extract_features(node)
        .map(|fs| fs.colors)
        .map_err(|_| EvalFailure::InvalidValue)
}

/// Apply one DSL to a value. `linear` and `param` carry the bound
/// parameters for the DSLs that need them; `param` is the parameter
/// node's color set, already resolved.
pub fn apply_dsl(
    dsl: TransformDsl,
    linear: Option<(i64, i64)>,
    param: Option<ColorSet>,
    value: Value,
    feats: &GraphFeatures,
) -> Result<Value, EvalFailure> {
    if !dsl.accepts(value.kind()) {
        return Err(EvalFailure::KindMismatch);
    }
    match dsl {
        TransformDsl::GetHeight | TransformDsl::GetWidth | TransformDsl::GetSize => {
            let Value::Node(id) = value else { unreachable!() };
            let fs = feats
                .extract_features(id)
                .map_err(|_| EvalFailure::InvalidValue)?;
            let n = match dsl {
                TransformDsl::GetHeight => fs.bbox_height,
                TransformDsl::GetWidth => fs.bbox_width,
                _ => fs.size,
            };
            Ok(Value::Int(n as i64))
        }
        TransformDsl::GetNumberOfColorset => {
            let Value::Node(id) = value else { unreachable!() };
            let colors = node_colors(feats, id)?;
            Ok(Value::Int(colors.non_background_len() as i64))
        }
        TransformDsl::OnodeCount => {
            let Value::Node(id) = value else { unreachable!() };
            let fs = feats
                .extract_features(id)
                .map_err(|_| EvalFailure::InvalidValue)?;
            let n = match fs.layer {
                Some(NodeLayer::Gnode) => feats.graph.onodes(GridSide::Input).len(),
                _ => 1,
            };
            Ok(Value::Int(n as i64))
        }
        TransformDsl::Linear => {
            let Value::Int(x) = value else { unreachable!() };
            let (a, b) = linear.ok_or(EvalFailure::KindMismatch)?;
            let y = a
                .checked_mul(x)
                .and_then(|ax| ax.checked_add(b))
                .ok_or(EvalFailure::Overflow)?;
            Ok(Value::Int(y))
        }
        TransformDsl::GetUnion | TransformDsl::GetIntersection | TransformDsl::GetDifference => {
            let current = match value {
                Value::Node(id) => node_colors(feats, id)?,
                Value::Colors(cs) => cs,
                Value::Int(_) => unreachable!(),
            };
            let p = param.ok_or(EvalFailure::KindMismatch)?;
            let result = match dsl {
                TransformDsl::GetUnion => current.union(p),
                TransformDsl::GetIntersection => current.intersection(p),
                _ => current.difference(p),
            };
            Ok(Value::Colors(result))
        }
        TransformDsl::GetIdentityMatch => {
            let Value::Node(id) = value else { unreachable!() };
            Ok(Value::Colors(node_colors(feats, id)?))
        }
    }
}

/// A concrete path rooted at a specific node, as yielded by enumeration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathCandidate {
    pub leaf: NodeId,
    pub steps: Vec<ConcreteStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConcreteStep {
    pub dsl: TransformDsl,
    pub linear: Option<(i64, i64)>,
    pub param: Option<NodeId>,
}

/// Every kind-correct path of length 1..=depth from every leaf, with every
/// parameter binding drawn from `param_pool`. Enumeration order is leaf
/// order, then registry order at each position, then parameter order.
pub fn enumerate_paths(
    leaves: &[NodeId],
    registry: &[TransformDsl],
    depth: usize,
    target_kind: ValueKind,
    param_pool: &[NodeId],
) -> Vec<PathCandidate> {
    let mut out = Vec::new();
    let mut steps: Vec<ConcreteStep> = Vec::new();
    for &leaf in leaves {
        extend_paths(
            leaf,
            ValueKind::Node,
            registry,
            depth,
            target_kind,
            param_pool,
            &mut steps,
            &mut out,
        );
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn extend_paths(
    leaf: NodeId,
    current_kind: ValueKind,
    registry: &[TransformDsl],
    remaining: usize,
    target_kind: ValueKind,
    param_pool: &[NodeId],
    steps: &mut Vec<ConcreteStep>,
    out: &mut Vec<PathCandidate>,
) {
    if remaining == 0 {
        return;
    }
    for &dsl in registry {
        if !dsl.accepts(current_kind) {
            continue;
        }
        let bindings: Vec<ConcreteStep> = if dsl == TransformDsl::Linear {
            LINEAR_A
                .iter()
                .flat_map(|&a| {
                    (LINEAR_B_MIN..=LINEAR_B_MAX).map(move |b| ConcreteStep {
                        dsl,
                        linear: Some((a, b)),
                        param: None,
                    })
                })
                .collect()
        } else if dsl.takes_node_param() {
            param_pool
                .iter()
                .map(|&p| ConcreteStep {
                    dsl,
                    linear: None,
                    param: Some(p),
                })
                .collect()
        } else {
            vec![ConcreteStep {
                dsl,
                linear: None,
                param: None,
            }]
        };
        for step in bindings {
            steps.push(step);
            if dsl.output_kind() == target_kind {
                out.push(PathCandidate {
                    leaf,
                    steps: steps.clone(),
                });
            }
            extend_paths(
                leaf,
                dsl.output_kind(),
                registry,
                remaining - 1,
                target_kind,
                param_pool,
                steps,
                out,
            );
            steps.pop();
        }
    }
}

/// Resolve a node-parameter selector to a color set. All selected nodes
/// must carry the same colors; otherwise the binding is ambiguous.
fn resolve_param_colors(
    selector: &UniqueConstraint,
    feats: &GraphFeatures,
) -> Result<ColorSet, EvalFailure> {
    let nodes = feats.apply_constraint(&selector.constraint);
    if nodes.is_empty() {
        return Err(EvalFailure::EmptySelection);
    }
    let mut colors: Option<ColorSet> = None;
    for id in nodes {
        let cs = node_colors(feats, id)?;
        match colors {
            None => colors = Some(cs),
            Some(prev) if prev != cs => return Err(EvalFailure::Ambiguous),
            _ => {}
        }
    }
    Ok(colors.unwrap())
}

fn eval_steps_on_node(
    leaf: NodeId,
    steps: &[Step],
    feats: &GraphFeatures,
) -> Result<Value, EvalFailure> {
    let mut value = Value::Node(leaf);
    for step in steps {
        let param = match &step.param {
            Some(sel) => Some(resolve_param_colors(sel, feats)?),
            None => None,
        };
        value = apply_dsl(step.dsl, step.linear, param, value, feats)?;
    }
    Ok(value)
}

/// Evaluate a hypothesis on a graph: re-select the leaf, run the path on
/// every selected node, and require agreement. Invariant hypotheses
/// evaluate to their carried value.
pub fn eval_hypothesis(h: &Hypothesis, feats: &GraphFeatures) -> Result<Value, EvalFailure> {
    let (constraint, steps) = match &h.kind {
        HypothesisKind::Invariant { value } => return Ok(value.to_value()),
        HypothesisKind::Path { constraint, steps } => (constraint, steps),
    };
    let leaves = feats.apply_constraint(&constraint.constraint);
    if leaves.is_empty() {
        return Err(EvalFailure::EmptySelection);
    }
    let mut agreed: Option<Value> = None;
    for leaf in leaves {
        let v = eval_steps_on_node(leaf, steps, feats)?;
        match agreed {
            None => agreed = Some(v),
            Some(prev) if prev != v => return Err(EvalFailure::Ambiguous),
            _ => {}
        }
    }
    Ok(agreed.unwrap())
}

/// The trained state for one task: surviving hypotheses per target plus
/// the specifier session's final constraint.
#[derive(Debug, Clone)]
pub struct TrainedSolver {
    pub by_target: BTreeMap<TargetKind, Vec<Hypothesis>>,
    pub session_constraint: Constraint,
    pub unspecified: bool,
}

impl TrainedSolver {
    pub fn survivors(&self, target: TargetKind) -> &[Hypothesis] {
        self.by_target.get(&target).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Train on a task's example-pair graphs: find every `(node, path)` pair
/// that reproduces the first pair's target, generalize each node to its
/// minimal unique constraint, and keep the hypotheses that also reproduce
/// the target on every later pair.
///
/// The search runs over candidate classes (groups of feature-identical
/// nodes) rather than raw nodes: nodes in one class share every value a
/// path can read, so one evaluation per class covers all of its members,
/// and the generalized hypotheses come out already deduplicated.
pub fn train(
    graphs: &[KnowledgeGraph],
    registry: &[TransformDsl],
    depth: usize,
    targets: TargetSet,
    carry_invariants: bool,
) -> TrainedSolver {
    let feats: Vec<GraphFeatures> = graphs.iter().map(GraphFeatures::new).collect();
    let mut session = SpecifierSession::new();
    for f in &feats {
        session.observe(f);
    }

    let truths: Vec<BTreeMap<TargetKind, Value>> = graphs
        .iter()
        .map(|g| {
            let output = g
                .grid(GridSide::Output)
                .expect("training pairs have outputs");
            targets.iter().map(|t| (t, t.truth(output))).collect()
        })
        .collect();

    let mut by_target: BTreeMap<TargetKind, Vec<Hypothesis>> = BTreeMap::new();
    if let Some(first) = feats.first() {
        let classes = first.candidate_classes();
        let class_colors: Vec<ColorSet> = classes
            .iter()
            .map(|c| {
                first
                    .extract_features(c.exemplar)
                    .map(|fs| fs.colors)
                    .unwrap_or_default()
            })
            .collect();

        for target in targets.iter() {
            let truth0 = truths[0][&target];
            let mut found: BTreeSet<Hypothesis> = BTreeSet::new();
            for class in &classes {
                let mut steps: Vec<(ConcreteStep, Option<usize>)> = Vec::new();
                search_class(
                    Value::Node(class.exemplar),
                    registry,
                    depth,
                    target,
                    truth0,
                    first,
                    &classes,
                    &class_colors,
                    &mut steps,
                    &mut |steps| {
                        found.insert(Hypothesis {
                            target,
                            constraint: class.selector.clone(),
                            steps: steps
                                .iter()
                                .map(|(s, pc)| Step {
                                    dsl: s.dsl,
                                    linear: s.linear,
                                    param: pc.map(|i| classes[i].selector.clone()),
                                })
                                .collect(),
                        });
                    },
                );
            }
            let survivors: Vec<Hypothesis> = found
                .into_iter()
                .filter(|h| {
                    feats
                        .iter()
                        .zip(&truths)
                        .skip(1)
                        .all(|(f, truth)| eval_hypothesis(h, f) == Ok(truth[&target]))
                })
                .collect();
            by_target.insert(target, survivors);
        }
    }

    TrainedSolver {
        by_target,
        session_constraint: session.constraint().clone(),
        unspecified: session.is_unspecified(),
    }
}

/// Depth-first typed search from one candidate class.
#[allow(clippy::too_many_arguments)]
fn search_class(
    value: Value,
    registry: &[TransformDsl],
    remaining: usize,
    target: TargetKind,
    truth: Value,
    feats: &GraphFeatures,
    classes: &[CandidateClass],
    class_colors: &[ColorSet],
    steps: &mut Vec<(ConcreteStep, Option<usize>)>,
    emit: &mut dyn FnMut(&[(ConcreteStep, Option<usize>)]),
) {
    if remaining == 0 {
        return;
    }
    for &dsl in registry {
        if !dsl.accepts(value.kind()) {
            continue;
        }
        if dsl == TransformDsl::Linear {
            let Value::Int(x) = value else { continue };
            for a in LINEAR_A {
                for b in LINEAR_B_MIN..=LINEAR_B_MAX {
                    let Some(y) = a.checked_mul(x).and_then(|ax| ax.checked_add(b)) else {
                        continue;
                    };
                    steps.push((
                        ConcreteStep {
                            dsl,
                            linear: Some((a, b)),
                            param: None,
                        },
                        None,
                    ));
                    let v = Value::Int(y);
                    if v == truth {
                        emit(steps);
                    }
                    search_class(
                        v,
                        registry,
                        remaining - 1,
                        target,
                        truth,
                        feats,
                        classes,
                        class_colors,
                        steps,
                        emit,
                    );
                    steps.pop();
                }
            }
        } else if dsl.takes_node_param() {
            let current = match value {
                Value::Node(id) => match feats.extract_features(id) {
                    Ok(fs) => fs.colors,
                    Err(_) => continue,
                },
                Value::Colors(cs) => cs,
                Value::Int(_) => continue,
            };
            for (ci, &pcolors) in class_colors.iter().enumerate() {
                let result = match dsl {
                    TransformDsl::GetUnion => current.union(pcolors),
                    TransformDsl::GetIntersection => current.intersection(pcolors),
                    _ => current.difference(pcolors),
                };
                steps.push((
                    ConcreteStep {
                        dsl,
                        linear: None,
                        param: Some(classes[ci].exemplar),
                    },
                    Some(ci),
                ));
                let v = Value::Colors(result);
                if v == truth {
                    emit(steps);
                }
                search_class(
                    v,
                    registry,
                    remaining - 1,
                    target,
                    truth,
                    feats,
                    classes,
                    class_colors,
                    steps,
                    emit,
                );
                steps.pop();
            }
        } else {
            let Ok(v) = apply_dsl(dsl, None, None, value, feats) else {
                continue;
            };
            steps.push((
                ConcreteStep {
                    dsl,
                    linear: None,
                    param: None,
                },
                None,
            ));
            if v == truth {
                emit(steps);
            }
            search_class(
                v,
                registry,
                remaining - 1,
                target,
                truth,
                feats,
                classes,
                class_colors,
                steps,
                emit,
            );
            steps.pop();
        }
    }
}

fn value_in_domain(target: TargetKind, value: Value) -> bool {
    match (target, value) {
        (TargetKind::Height | TargetKind::Width, Value::Int(n)) => {
            (1..=MAX_SIDE as i64).contains(&n)
        }
        (TargetKind::Colors, Value::Colors(cs)) => !cs.is_empty(),
        _ => false,
    }
}

/// Apply the surviving hypotheses to the test graph. Per target, the first
/// hypothesis (in priority order) whose constraint selects at least one
/// node and whose path evaluates without failure supplies the value;
/// ambiguous selections are skipped.
pub fn predict(trained: &TrainedSolver, test_feats: &GraphFeatures) -> Prediction {
    let mut prediction = Prediction::default();
    for (&target, survivors) in &trained.by_target {
        for h in survivors {
            let Ok(value) = eval_hypothesis(h, test_feats) else { continue };
            if !value_in_domain(target, value) {
                continue;
            }
            match (target, value) {
                (TargetKind::Height, Value::Int(n)) => prediction.height = Some(n),
                (TargetKind::Width, Value::Int(n)) => prediction.width = Some(n),
                (TargetKind::Colors, Value::Colors(cs)) => prediction.colors = Some(cs),
                _ => continue,
            }
            prediction.provenance.insert(target, h.clone());
            break;
        }
    }
    prediction
}

/// Solver configuration shared by both modes.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub dsl_set: DslSet,
    pub depth: usize,
    pub targets: TargetSet,
    pub policy: ObjectPolicy,
    pub properties: Vec<PropertyKind>,
}

impl SolverConfig {
    pub fn new(dsl_set: DslSet) -> SolverConfig {
        SolverConfig {
            dsl_set,
            depth: 2,
            targets: TargetSet::all(),
            policy: ObjectPolicy::SameColor4,
            properties: crate::properties::FULL_REGISTRY.to_vec(),
        }
    }
}

/// A solved task: the prediction for the first test input plus the full
/// trained state for tracing.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub prediction: Prediction,
    pub trained: TrainedSolver,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("task has no test pairs")]
    NoTestPair,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Full pipeline with knowledge graphs: build one graph per example pair,
/// train, and predict on the first test input.
pub fn solve_with_kg(task: &Task, config: &SolverConfig) -> Result<SolveOutcome, SolveError> {
    let mut graphs = Vec::with_capacity(task.train_pairs.len());
    for (i, pair) in task.train_pairs.iter().enumerate() {
        graphs.push(build_knowledge_graph(
            &task.id,
            i,
            &pair.input,
            pair.output.as_ref(),
            &config.properties,
            config.policy,
        )?);
    }
    let trained = train(&graphs, config.dsl_set.registry(), config.depth, config.targets);

    let test_input = &task
        .test_pairs
        .first()
        .ok_or(SolveError::NoTestPair)?
        .input;
    let test_graph = build_knowledge_graph(
        &task.id,
        task.train_pairs.len(),
        test_input,
        None,
        &config.properties,
        config.policy,
    )?;
    let test_feats = GraphFeatures::new(&test_graph);
    let prediction = predict(&trained, &test_feats);
    Ok(SolveOutcome { prediction, trained })
}

/// Build the degenerate graph used when the knowledge graph is switched
/// off: the grid becomes a single whole-grid node with no objects and no
/// property edges.
fn build_plain_graph(
    task_id: &str,
    pair_index: usize,
    input: &Grid,
    output: Option<&Grid>,
) -> Result<KnowledgeGraph, GraphError> {
    let mut input_list = NodeList::new();
    make_pnode_list(&mut input_list, input, GridSide::Input);
    make_gnode_list(&mut input_list, input, GridSide::Input)?;
    let list = match output {
        Some(out) => {
            // Ids stay dense across the concatenated list.
            let mut output_list = NodeList::with_start_id(input_list.len() as u32);
            make_pnode_list(&mut output_list, out, GridSide::Output);
            make_gnode_list(&mut output_list, out, GridSide::Output)?;
            concat_list(input_list, output_list)?
        }
        None => input_list,
    };
    Ok(KnowledgeGraph::from_parts(
        task_id.to_string(),
        pair_index,
        list,
        Vec::new(),
    ))
}

/// The ablation mode: identical search, but transformations apply directly
/// to the whole grid. No objects are extracted, so the object-count DSL is
/// unavailable and node parameters can only bind the grid itself.
pub fn synthesize_without_kg(
    task: &Task,
    config: &SolverConfig,
) -> Result<SolveOutcome, SolveError> {
    let registry: Vec<TransformDsl> = config
        .dsl_set
        .registry()
        .iter()
        .copied()
        .filter(|d| *d != TransformDsl::OnodeCount)
        .collect();
    let mut graphs = Vec::with_capacity(task.train_pairs.len());
    for (i, pair) in task.train_pairs.iter().enumerate() {
        graphs.push(build_plain_graph(&task.id, i, &pair.input, pair.output.as_ref())?);
    }
    let trained = train(&graphs, &registry, config.depth, config.targets);

    let test_input = &task
        .test_pairs
        .first()
        .ok_or(SolveError::NoTestPair)?
        .input;
    let test_graph = build_plain_graph(&task.id, task.train_pairs.len(), test_input, None)?;
    let test_feats = GraphFeatures::new(&test_graph);
    let prediction = predict(&trained, &test_feats);
    Ok(SolveOutcome { prediction, trained })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::properties::FULL_REGISTRY;
    use crate::task::{parse_task, Color};

    fn grid(rows: &[&[i64]]) -> Grid {
        let rows: Vec<Vec<i64>> = rows.iter().map(|r| r.to_vec()).collect();
        Grid::from_rows(&rows, "test").unwrap()
    }

    fn kg(input: &Grid, output: Option<&Grid>) -> KnowledgeGraph {
        build_knowledge_graph("t", 0, input, output, &FULL_REGISTRY, ObjectPolicy::SameColor4)
            .unwrap()
    }

    fn colors(values: &[u8]) -> ColorSet {
        values.iter().map(|&v| Color::new(v).unwrap()).collect()
    }

    fn toy_task(pairs: &[(&Grid, &Grid)], test_input: &Grid) -> Task {
        let mut json = String::from("{\"train\":[");
        for (i, (inp, out)) in pairs.iter().enumerate() {
            if i > 0 {
                json.push(',');
            }
            json.push_str(&format!(
                "{{\"input\":{},\"output\":{}}}",
                serde_json::to_string(&inp.to_rows()).unwrap(),
                serde_json::to_string(&out.to_rows()).unwrap()
            ));
        }
        json.push_str(&format!(
            "],\"test\":[{{\"input\":{}}}]}}",
            serde_json::to_string(&test_input.to_rows()).unwrap()
        ));
        parse_task(&json, "toy").unwrap()
    }

    #[test]
    fn dsl_semantics_on_basic_values() {
        let input = grid(&[&[1, 2], &[3, 4], &[5, 6], &[7, 8]]); // 4x2
        let g = kg(&input, None);
        let feats = GraphFeatures::new(&g);
        let gnode = g.gnode(GridSide::Input).unwrap();

        let h = apply_dsl(TransformDsl::GetHeight, None, None, Value::Node(gnode), &feats);
        assert_eq!(h, Ok(Value::Int(4)));

        let id7 = apply_dsl(TransformDsl::Linear, Some((1, 0)), None, Value::Int(7), &feats);
        assert_eq!(id7, Ok(Value::Int(7)));

        let union = apply_dsl(
            TransformDsl::GetUnion,
            None,
            Some(colors(&[2])),
            Value::Colors(colors(&[1, 3])),
            &feats,
        );
        assert_eq!(union, Ok(Value::Colors(colors(&[1, 2, 3]))));

        let bad = apply_dsl(TransformDsl::GetHeight, None, None, Value::Int(3), &feats);
        assert_eq!(bad, Err(EvalFailure::KindMismatch));
    }

    #[test]
    fn onode_count_distinguishes_grid_and_object() {
        let input = grid(&[&[1, 0, 2], &[0, 0, 2]]);
        let g = kg(&input, None);
        let feats = GraphFeatures::new(&g);
        let gnode = g.gnode(GridSide::Input).unwrap();
        let onode = g.onodes(GridSide::Input)[0];
        assert_eq!(
            apply_dsl(TransformDsl::OnodeCount, None, None, Value::Node(gnode), &feats),
            Ok(Value::Int(2))
        );
        assert_eq!(
            apply_dsl(TransformDsl::OnodeCount, None, None, Value::Node(onode), &feats),
            Ok(Value::Int(1))
        );
    }

    #[test]
    fn enumeration_counts_match_closed_form() {
        let input = grid(&[&[1]]);
        let g = kg(&input, None);
        let leaves = [g.gnode(GridSide::Input).unwrap()];

        let only_height = [TransformDsl::GetHeight];
        let paths = enumerate_paths(&leaves, &only_height, 1, ValueKind::Int, &leaves);
        assert_eq!(paths.len(), 1);

        let height_linear = [TransformDsl::GetHeight, TransformDsl::Linear];
        let paths = enumerate_paths(&leaves, &height_linear, 2, ValueKind::Int, &leaves);
        assert_eq!(paths.len(), 22); // get_height alone, plus 21 linear bindings

        let paths = enumerate_paths(&leaves, &height_linear, 2, ValueKind::Colors, &leaves);
        assert!(paths.is_empty());

        let paths = enumerate_paths(&leaves, DslSet::Ts10.registry(), 2, ValueKind::Int, &leaves);
        assert_eq!(paths.len(), 5 + 5 * 21);

        // One leaf doubling as the only parameter node: depth 1 yields
        // identity + 3 parameterized set ops; each of those 4 extends with
        // 3 parameterized steps.
        let paths = enumerate_paths(
            &leaves,
            DslSet::Ts10.registry(),
            2,
            ValueKind::Colors,
            &leaves,
        );
        assert_eq!(paths.len(), 4 + 4 * 3);
    }

    #[test]
    fn doubling_task_trains_and_predicts_height() {
        let in1 = grid(&[&[1, 1], &[1, 1]]);
        let out1 = grid(&[&[1, 1], &[1, 1], &[1, 1], &[1, 1]]); // 4x2
        let in2 = grid(&[&[1, 1, 1]]);
        let out2 = grid(&[&[1, 1, 1], &[1, 1, 1]]); // 2x3
        let test = grid(&[&[1, 1], &[1, 1], &[1, 1], &[1, 1], &[1, 1]]); // 5x2
        let task = toy_task(&[(&in1, &out1), (&in2, &out2)], &test);

        let outcome = solve_with_kg(&task, &SolverConfig::new(DslSet::Ts10)).unwrap();
        let survivors = outcome.trained.survivors(TargetKind::Height);
        let doubled_height = survivors.iter().any(|h| {
            h.constraint.constraint.layer == Some(NodeLayer::Gnode)
                && h.steps.len() == 2
                && h.steps[0].dsl == TransformDsl::GetHeight
                && h.steps[1].linear == Some((2, 0))
        });
        assert!(doubled_height, "expected the doubled-height hypothesis");
        let doubled_width = survivors.iter().any(|h| {
            h.steps.first().map(|s| s.dsl) == Some(TransformDsl::GetWidth)
                && h.steps.len() == 2
                && h.steps[1].linear == Some((2, 0))
        });
        assert!(!doubled_width, "doubled-width must be eliminated by pair 2");

        assert_eq!(outcome.prediction.height, Some(10));
    }

    #[test]
    fn identity_colorset_task_predicts_the_palette() {
        let in1 = grid(&[&[0, 1], &[2, 0]]);
        let out1 = grid(&[&[1, 2], &[0, 0]]);
        let in2 = grid(&[&[3, 0]]);
        let out2 = grid(&[&[0, 3]]);
        let test = grid(&[&[0, 4], &[6, 0]]);
        let task = toy_task(&[(&in1, &out1), (&in2, &out2)], &test);

        let outcome = solve_with_kg(&task, &SolverConfig::new(DslSet::Ts10)).unwrap();
        let survivors = outcome.trained.survivors(TargetKind::Colors);
        assert!(survivors.iter().any(|h| {
            h.constraint.constraint.layer == Some(NodeLayer::Gnode)
                && h.steps.len() == 1
                && h.steps[0].dsl == TransformDsl::GetIdentityMatch
        }));
        assert_eq!(outcome.prediction.colors, Some(colors(&[0, 4, 6])));
    }

    #[test]
    fn unsolved_target_stays_absent() {
        // Heights 1 then 5 from identical inputs: nothing explains both.
        let in1 = grid(&[&[1, 2]]);
        let out1 = grid(&[&[1]]);
        let in2 = grid(&[&[1, 2]]);
        let out2 = grid(&[&[1], &[1], &[1], &[1], &[1]]);
        let test = grid(&[&[1, 2]]);
        let task = toy_task(&[(&in1, &out1), (&in2, &out2)], &test);

        let outcome = solve_with_kg(&task, &SolverConfig::new(DslSet::Ts10)).unwrap();
        assert!(outcome.trained.survivors(TargetKind::Height).is_empty());
        assert_eq!(outcome.prediction.height, None);
    }

    #[test]
    fn without_kg_still_solves_grid_level_rules() {
        let in1 = grid(&[&[1, 1], &[1, 1]]);
        let out1 = grid(&[&[1, 1], &[1, 1], &[1, 1], &[1, 1]]);
        let in2 = grid(&[&[1, 1, 1]]);
        let out2 = grid(&[&[1, 1, 1], &[1, 1, 1]]);
        let test = grid(&[&[1, 1], &[1, 1], &[1, 1], &[1, 1], &[1, 1]]);
        let task = toy_task(&[(&in1, &out1), (&in2, &out2)], &test);

        let outcome = synthesize_without_kg(&task, &SolverConfig::new(DslSet::Ts10)).unwrap();
        assert_eq!(outcome.prediction.height, Some(10));
    }

    #[test]
    fn object_color_rule_needs_the_knowledge_graph() {
        // Output is a solid grid of the largest object's color.
        let in1 = grid(&[&[1, 1, 0], &[1, 1, 0], &[0, 0, 2]]);
        let out1 = grid(&[&[1]]);
        let in2 = grid(&[&[3, 3, 3], &[0, 5, 0], &[0, 0, 0]]);
        let out2 = grid(&[&[3]]);
        let test = grid(&[&[4, 4], &[4, 0], &[0, 7]]);
        let task = toy_task(&[(&in1, &out1), (&in2, &out2)], &test);

        let config = SolverConfig::new(DslSet::Ts10);
        let with = solve_with_kg(&task, &config).unwrap();
        assert_eq!(with.prediction.colors, Some(colors(&[4])));

        let without = synthesize_without_kg(&task, &config).unwrap();
        assert_eq!(without.prediction.colors, None);
    }

    #[test]
    fn ts10_survivors_contain_ts5_survivors() {
        let in1 = grid(&[&[1, 1], &[1, 1]]);
        let out1 = grid(&[&[1, 1], &[1, 1], &[1, 1], &[1, 1]]);
        let in2 = grid(&[&[1, 1, 1]]);
        let out2 = grid(&[&[1, 1, 1], &[1, 1, 1]]);
        let test = grid(&[&[1]]);
        let task = toy_task(&[(&in1, &out1), (&in2, &out2)], &test);

        let ts5 = solve_with_kg(&task, &SolverConfig::new(DslSet::Ts5)).unwrap();
        let ts10 = solve_with_kg(&task, &SolverConfig::new(DslSet::Ts10)).unwrap();
        for target in TargetSet::all().iter() {
            let small: BTreeSet<&Hypothesis> = ts5.trained.survivors(target).iter().collect();
            let big: BTreeSet<&Hypothesis> = ts10.trained.survivors(target).iter().collect();
            assert!(small.is_subset(&big), "{target}");
        }
    }

    #[test]
    fn train_and_predict_are_deterministic() {
        let in1 = grid(&[&[1, 0, 2], &[0, 2, 0]]);
        let out1 = grid(&[&[2, 2], &[2, 2]]);
        let in2 = grid(&[&[0, 3], &[3, 0]]);
        let out2 = grid(&[&[3, 3], &[3, 3]]);
        let test = grid(&[&[5, 0], &[0, 5]]);
        let task = toy_task(&[(&in1, &out1), (&in2, &out2)], &test);

        let config = SolverConfig::new(DslSet::Ts10);
        let a = solve_with_kg(&task, &config).unwrap();
        let b = solve_with_kg(&task, &config).unwrap();
        assert_eq!(a.trained.by_target, b.trained.by_target);
        assert_eq!(a.prediction.height, b.prediction.height);
        assert_eq!(a.prediction.width, b.prediction.width);
        assert_eq!(a.prediction.colors, b.prediction.colors);
    }
}
