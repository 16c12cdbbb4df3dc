//! Feature extraction and constraint abduction.
//!
//! The specifier looks at each example pair's graph and works out which
//! features pick out the solution-relevant nodes. On the first pair every
//! input object plus the input grid itself is a candidate. From the second
//! pair on, only feature clauses that stay satisfiable survive; the running
//! intersection becomes the constraint applied to the test graph.
//!
//! A constraint is a conjunction of [`Clause`]s over a node's feature set,
//! optionally restricted to one layer. Clause ordering encodes the
//! tie-break preference: unary properties, then edge summaries (same-side
//! before cross-grid), then intrinsic values.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::graph::{ColorSet, EdgeLabel, KnowledgeGraph, Node, NodeId, NodeLayer};
use crate::properties::{Arity, PropertyKind, SideRule};

/// Direction of an incident edge from the summarized node's viewpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeDirection {
    Sym,
    Out,
    In,
}

impl fmt::Display for EdgeDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeDirection::Sym => write!(f, "sym"),
            EdgeDirection::Out => write!(f, "out"),
            EdgeDirection::In => write!(f, "in"),
        }
    }
}

/// Summary of one incident edge: label, direction, peer layer, and whether
/// the peer sits on the other grid side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeSummary {
    pub label: PropertyKind,
    pub direction: EdgeDirection,
    pub peer: NodeLayer,
    pub cross: bool,
}

/// One required feature predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Clause {
    /// The node has the unary property.
    Unary(PropertyKind),
    /// The node has at least one incident edge with this exact summary.
    Edge(EdgeSummary),
    /// The node has at least one incident edge with this label and
    /// direction, regardless of peer layer or side.
    EdgeAny(PropertyKind, EdgeDirection),
    LayerIs(NodeLayer),
    SizeIs(usize),
    ColorsAre(ColorSet),
    BboxHeightIs(usize),
    BboxWidthIs(usize),
}

impl Clause {
    /// Preference rank: unary first, then edge summaries (same-side
    /// before cross-grid), then intrinsic values.
    fn rank(&self) -> u8 {
        match self {
            Clause::Unary(_) => 0,
            Clause::Edge(s) if !s.cross => 1,
            Clause::EdgeAny(p, _) if p.side_rule() != SideRule::CrossSide => 2,
            Clause::Edge(_) => 3,
            Clause::EdgeAny(..) => 4,
            Clause::LayerIs(_) => 5,
            Clause::SizeIs(_) => 6,
            Clause::ColorsAre(_) => 7,
            Clause::BboxHeightIs(_) => 8,
            Clause::BboxWidthIs(_) => 9,
        }
    }

    fn tiebreak(&self) -> (u8, u8, u8, u8, u32) {
        match self {
            Clause::Unary(p) => (*p as u8, 0, 0, 0, 0),
            Clause::Edge(s) => (
                s.label as u8,
                s.direction as u8,
                s.peer as u8,
                s.cross as u8,
                0,
            ),
            Clause::EdgeAny(p, d) => (*p as u8, *d as u8, 0, 0, 0),
            Clause::LayerIs(l) => (*l as u8, 0, 0, 0, 0),
            Clause::SizeIs(n) => (0, 0, 0, 0, *n as u32),
            Clause::ColorsAre(cs) => {
                (0, 0, 0, 0, cs.iter().fold(0u32, |a, c| a | (1 << c.value())))
            }
            Clause::BboxHeightIs(n) => (0, 0, 0, 0, *n as u32),
            Clause::BboxWidthIs(n) => (0, 0, 0, 0, *n as u32),
        }
    }

    /// Whether evaluating the clause needs the output grid side.
    pub fn requires_output(&self) -> bool {
        match self {
            Clause::Edge(s) => s.cross,
            Clause::EdgeAny(p, _) => p.side_rule() == SideRule::CrossSide,
            _ => false,
        }
    }
}

impl PartialOrd for Clause {
    fn partial_cmp(&self, other: &Clause) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Clause {
    fn cmp(&self, other: &Clause) -> std::cmp::Ordering {
        (self.rank(), self.tiebreak()).cmp(&(other.rank(), other.tiebreak()))
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Clause::Unary(p) => write!(f, "{}", p.id()),
            Clause::Edge(s) => write!(
                f,
                "edge({}, {}, peer={}, {})",
                s.label.id(),
                s.direction,
                s.peer,
                if s.cross { "cross" } else { "same-side" }
            ),
            Clause::EdgeAny(p, d) => write!(f, "edge({}, {}, any)", p.id(), d),
            Clause::LayerIs(l) => write!(f, "layer={l}"),
            Clause::SizeIs(n) => write!(f, "size={n}"),
            Clause::ColorsAre(cs) => write!(f, "colors={cs}"),
            Clause::BboxHeightIs(n) => write!(f, "bbox_h={n}"),
            Clause::BboxWidthIs(n) => write!(f, "bbox_w={n}"),
        }
    }
}

/// Everything the graph says about one node: its unary properties, a
/// multiset of incident-edge summaries, and its intrinsic values.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureSet {
    pub unary_properties: BTreeSet<PropertyKind>,
    pub incident_edges: BTreeMap<EdgeSummary, u32>,
    pub layer: Option<NodeLayer>,
    pub size: usize,
    pub colors: ColorSet,
    pub bbox_height: usize,
    pub bbox_width: usize,
}

impl FeatureSet {
    /// All clauses the node satisfies, in preference order.
    pub fn clauses(&self) -> Vec<Clause> {
        let mut out: BTreeSet<Clause> = BTreeSet::new();
        for &p in &self.unary_properties {
            out.insert(Clause::Unary(p));
        }
        for s in self.incident_edges.keys() {
            out.insert(Clause::Edge(*s));
            out.insert(Clause::EdgeAny(s.label, s.direction));
        }
        if let Some(layer) = self.layer {
            out.insert(Clause::LayerIs(layer));
        }
        out.insert(Clause::SizeIs(self.size));
        out.insert(Clause::ColorsAre(self.colors));
        out.insert(Clause::BboxHeightIs(self.bbox_height));
        out.insert(Clause::BboxWidthIs(self.bbox_width));
        out.into_iter().collect()
    }

    pub fn satisfies(&self, clause: &Clause) -> bool {
        match clause {
            Clause::Unary(p) => self.unary_properties.contains(p),
            Clause::Edge(s) => self.incident_edges.contains_key(s),
            Clause::EdgeAny(p, d) => self
                .incident_edges
                .keys()
                .any(|s| s.label == *p && s.direction == *d),
            Clause::LayerIs(l) => self.layer == Some(*l),
            Clause::SizeIs(n) => self.size == *n,
            Clause::ColorsAre(cs) => self.colors == *cs,
            Clause::BboxHeightIs(n) => self.bbox_height == *n,
            Clause::BboxWidthIs(n) => self.bbox_width == *n,
        }
    }
}

/// A conjunctive node selector. An empty clause set with no layer
/// restriction selects every candidate (all input Onodes plus the Gnode).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Constraint {
    pub layer: Option<NodeLayer>,
    pub clauses: BTreeSet<Clause>,
}

impl Constraint {
    pub fn empty() -> Constraint {
        Constraint::default()
    }

    pub fn is_empty(&self) -> bool {
        self.layer.is_none() && self.clauses.is_empty()
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if let Some(layer) = self.layer {
            parts.push(format!("layer={layer}"));
        }
        for c in &self.clauses {
            parts.push(c.to_string());
        }
        if parts.is_empty() {
            write!(f, "(select all)")
        } else {
            write!(f, "{}", parts.join(" & "))
        }
    }
}

/// The specifier's output for one graph: candidate nodes, the constraint
/// that selected them, and the pooled feature clauses of those candidates
/// (the incident-edge information travels with the selection).
#[derive(Debug, Clone)]
pub struct CoreKnowledge {
    pub candidate_nodes: Vec<NodeId>,
    pub constraint_used: Constraint,
    pub feature_pool: BTreeSet<Clause>,
}

#[derive(Debug, Error)]
pub enum SpecifierError {
    #[error("node {id} is not an abduction candidate (input-side Onode or Gnode)")]
    NotACandidate { id: NodeId },
}

/// Compact bitset over the candidate universe.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Bits(Vec<u64>);

impl Bits {
    fn zeros(len: usize) -> Bits {
        Bits(vec![0; len.div_ceil(64)])
    }

    fn ones(len: usize) -> Bits {
        let mut bits = vec![u64::MAX; len.div_ceil(64)];
        let tail = len % 64;
        if tail != 0 {
            if let Some(last) = bits.last_mut() {
                *last = (1u64 << tail) - 1;
            }
        }
        Bits(bits)
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn get(&self, i: usize) -> bool {
        self.0[i / 64] & (1 << (i % 64)) != 0
    }

    fn and_assign(&mut self, other: &Bits) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a &= b;
        }
    }

    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(wi, &w)| {
            (0..64).filter_map(move |b| (w & (1 << b) != 0).then_some(wi * 64 + b))
        })
    }

    fn is_exactly(&self, i: usize) -> bool {
        self.count() == 1 && self.get(i)
    }
}

/// Per-graph feature index over the candidate universe (input-side Onodes
/// plus the input Gnode). Built once per graph; shared by the specifier
/// and the synthesizer.
pub struct GraphFeatures<'g> {
    pub graph: &'g KnowledgeGraph,
    universe: Vec<NodeId>,
    index_of: HashMap<NodeId, usize>,
    features: Vec<FeatureSet>,
    clause_bits: RefCell<HashMap<Clause, Bits>>,
    selector_memo: RefCell<HashMap<NodeId, UniqueConstraint>>,
}

impl<'g> GraphFeatures<'g> {
    pub fn new(graph: &'g KnowledgeGraph) -> GraphFeatures<'g> {
        let universe = graph.candidate_nodes();
        let index_of: HashMap<NodeId, usize> =
            universe.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut features: Vec<FeatureSet> = universe
            .iter()
            .map(|&id| intrinsic_features(graph, id))
            .collect();

        for edge in graph.edges() {
            let EdgeLabel::Property(p) = edge.label else { continue };
            if p.arity() == Arity::Unary {
                // Unary edges mark the source node; the receiving Gnode
                // does not summarize them.
                if let Some(&i) = index_of.get(&edge.src) {
                    features[i].unary_properties.insert(p);
                }
                continue;
            }
            let symmetric = p.arity() == Arity::Pairwise;
            for (node, peer) in [(edge.src, edge.dst), (edge.dst, edge.src)] {
                let Some(&i) = index_of.get(&node) else { continue };
                let direction = if symmetric {
                    EdgeDirection::Sym
                } else if node == edge.src {
                    EdgeDirection::Out
                } else {
                    EdgeDirection::In
                };
                let peer_node = graph.node(peer);
                let cross = peer_node.side() != graph.node(node).side();
                let summary = EdgeSummary {
                    label: p,
                    direction,
                    peer: peer_node.layer(),
                    cross,
                };
                *features[i].incident_edges.entry(summary).or_insert(0) += 1;
            }
        }

        GraphFeatures {
            graph,
            universe,
            index_of,
            features,
            clause_bits: RefCell::new(HashMap::new()),
            selector_memo: RefCell::new(HashMap::new()),
        }
    }

    pub fn universe(&self) -> &[NodeId] {
        &self.universe
    }

    /// The complete feature set of a candidate node. Pnodes, Vnodes, and
    /// output-side nodes are not candidates.
    pub fn extract_features(&self, node: NodeId) -> Result<&FeatureSet, SpecifierError> {
        self.index_of
            .get(&node)
            .map(|&i| &self.features[i])
            .ok_or(SpecifierError::NotACandidate { id: node })
    }

    fn satisfier_bits(&self, clause: &Clause) -> Bits {
        if let Some(bits) = self.clause_bits.borrow().get(clause) {
            return bits.clone();
        }
        let mut bits = Bits::zeros(self.universe.len());
        for (i, fs) in self.features.iter().enumerate() {
            if fs.satisfies(clause) {
                bits.set(i);
            }
        }
        self.clause_bits.borrow_mut().insert(*clause, bits.clone());
        bits
    }

    fn layer_bits(&self, layer: NodeLayer) -> Bits {
        self.satisfier_bits(&Clause::LayerIs(layer))
    }

    /// Candidates satisfying every evaluable clause. Clauses that need the
    /// output side are skipped when the graph has none.
    pub fn apply_constraint(&self, constraint: &Constraint) -> Vec<NodeId> {
        let mut bits = match constraint.layer {
            Some(layer) => self.layer_bits(layer),
            None => Bits::ones(self.universe.len()),
        };
        for clause in &constraint.clauses {
            if !self.graph.has_output && clause.requires_output() {
                continue;
            }
            bits.and_assign(&self.satisfier_bits(clause));
        }
        bits.iter_ones().map(|i| self.universe[i]).collect()
    }

    fn pool_of(&self, nodes: &[NodeId]) -> BTreeSet<Clause> {
        let mut pool = BTreeSet::new();
        for &id in nodes {
            if let Some(&i) = self.index_of.get(&id) {
                pool.extend(self.features[i].clauses());
            }
        }
        pool
    }

    fn core_knowledge(&self, candidates: Vec<NodeId>, constraint: Constraint) -> CoreKnowledge {
        CoreKnowledge {
            feature_pool: self.pool_of(&candidates),
            candidate_nodes: candidates,
            constraint_used: constraint,
        }
    }

    /// A clause holds in this graph if at least one candidate satisfies it.
    pub fn clause_satisfiable(&self, clause: &Clause) -> bool {
        self.satisfier_bits(clause).count() > 0
    }

    /// Smallest clause set (under the node's layer restriction) whose
    /// satisfier set is exactly `{node}`. Ties at the same size resolve to
    /// the first subset in clause-preference order. Falls back to the full
    /// feature set, flagged non-unique, when no subset designates the node.
    pub fn minimal_unique_constraint(
        &self,
        node: NodeId,
    ) -> Result<UniqueConstraint, SpecifierError> {
        if let Some(hit) = self.selector_memo.borrow().get(&node) {
            return Ok(hit.clone());
        }
        let &index = self
            .index_of
            .get(&node)
            .ok_or(SpecifierError::NotACandidate { id: node })?;
        let layer = self.features[index].layer.expect("candidates have layers");
        let result = self.search_minimal(index, layer);
        self.selector_memo.borrow_mut().insert(node, result.clone());
        Ok(result)
    }

    fn search_minimal(&self, index: usize, layer: NodeLayer) -> UniqueConstraint {
        let layer_bits = self.layer_bits(layer);
        let constraint_with = |clauses: BTreeSet<Clause>| Constraint {
            layer: Some(layer),
            clauses,
        };

        if layer_bits.is_exactly(index) {
            return UniqueConstraint {
                constraint: constraint_with(BTreeSet::new()),
                unique: true,
            };
        }

        // Candidate clauses in preference order; the layer restriction is
        // structural and not counted toward the subset size.
        let clauses: Vec<Clause> = self.features[index]
            .clauses()
            .into_iter()
            .filter(|c| !matches!(c, Clause::LayerIs(_)))
            .collect();
        let clause_bits: Vec<Bits> = clauses.iter().map(|c| self.satisfier_bits(c)).collect();

        // If even the full conjunction is ambiguous, nothing smaller helps.
        let mut full = layer_bits.clone();
        for bits in &clause_bits {
            full.and_assign(bits);
        }
        if !full.is_exactly(index) {
            return UniqueConstraint {
                constraint: constraint_with(clauses.into_iter().collect()),
                unique: false,
            };
        }

        // Breadth-first over subset sizes; small feature sets get the full
        // exhaustive search, large ones are capped before the greedy pass.
        let exhaustive_cap = if clauses.len() <= 20 { clauses.len() } else { 3 };
        for size in 1..=exhaustive_cap {
            if let Some(subset) =
                first_unique_subset(&clauses, &clause_bits, &layer_bits, index, size)
            {
                return UniqueConstraint {
                    constraint: constraint_with(subset),
                    unique: true,
                };
            }
        }

        // Greedily drop clauses (least preferred first) while uniqueness
        // holds; the result is irredundant.
        let mut kept = vec![true; clauses.len()];
        for i in (0..clauses.len()).rev() {
            kept[i] = false;
            let mut bits = layer_bits.clone();
            for (j, cb) in clause_bits.iter().enumerate() {
                if kept[j] {
                    bits.and_assign(cb);
                }
            }
            if !bits.is_exactly(index) {
                kept[i] = true;
            }
        }
        let subset: BTreeSet<Clause> = clauses
            .iter()
            .zip(&kept)
            .filter_map(|(c, &k)| k.then_some(*c))
            .collect();
        UniqueConstraint {
            constraint: constraint_with(subset),
            unique: true,
        }
    }

    /// Group the candidates by identical feature sets. Nodes in one class
    /// are indistinguishable to any constraint; each class carries the
    /// selector that re-identifies its nodes in other graphs.
    pub fn candidate_classes(&self) -> Vec<CandidateClass> {
        let mut by_features: BTreeMap<Vec<Clause>, Vec<NodeId>> = BTreeMap::new();
        for (i, &id) in self.universe.iter().enumerate() {
            by_features
                .entry(self.features[i].clauses())
                .or_default()
                .push(id);
        }
        let mut classes = Vec::new();
        for (_, members) in by_features {
            let exemplar = members[0];
            let selector = self
                .minimal_unique_constraint(exemplar)
                .expect("universe members are candidates");
            classes.push(CandidateClass {
                exemplar,
                members,
                selector,
            });
        }
        classes.sort_by_key(|c| c.exemplar);
        classes
    }
}

/// One group of indistinguishable candidates.
#[derive(Debug, Clone)]
pub struct CandidateClass {
    pub exemplar: NodeId,
    pub members: Vec<NodeId>,
    pub selector: UniqueConstraint,
}

fn first_unique_subset(
    clauses: &[Clause],
    clause_bits: &[Bits],
    layer_bits: &Bits,
    index: usize,
    size: usize,
) -> Option<BTreeSet<Clause>> {
    let n = clauses.len();
    if size > n {
        return None;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        let mut bits = layer_bits.clone();
        for &i in &idx {
            bits.and_assign(&clause_bits[i]);
        }
        if bits.is_exactly(index) {
            return Some(idx.iter().map(|&i| clauses[i]).collect());
        }
        // Next combination in lexicographic order.
        let mut pos = size;
        loop {
            if pos == 0 {
                return None;
            }
            pos -= 1;
            if idx[pos] + 1 <= n - (size - pos) {
                idx[pos] += 1;
                for later in pos + 1..size {
                    idx[later] = idx[later - 1] + 1;
                }
                break;
            }
        }
    }
}

fn intrinsic_features(graph: &KnowledgeGraph, id: NodeId) -> FeatureSet {
    match graph.node(id) {
        Node::O(o) => FeatureSet {
            layer: Some(NodeLayer::Onode),
            size: o.size(),
            colors: o.colors,
            bbox_height: o.bbox.height,
            bbox_width: o.bbox.width,
            ..FeatureSet::default()
        },
        Node::G(g) => FeatureSet {
            layer: Some(NodeLayer::Gnode),
            size: g.grid.height() * g.grid.width(),
            colors: g.grid.palette(),
            bbox_height: g.grid.height(),
            bbox_width: g.grid.width(),
            ..FeatureSet::default()
        },
        _ => FeatureSet::default(),
    }
}

/// A minimal designating constraint plus whether it is actually unique.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UniqueConstraint {
    pub constraint: Constraint,
    pub unique: bool,
}

/// First-pair candidates: every input-side Onode plus the input Gnode,
/// under the empty constraint.
pub fn specify_initial(feats: &GraphFeatures) -> CoreKnowledge {
    feats.core_knowledge(feats.universe().to_vec(), Constraint::empty())
}

/// Outcome of one constraint update.
#[derive(Debug, Clone)]
pub struct ConstraintUpdate {
    pub constraint: Constraint,
    /// Set when the intersection came up empty and the constraint
    /// degraded to select-all.
    pub unspecified: bool,
}

/// Keep the clauses that both held for some previous candidate and stay
/// satisfiable in the current graph. An empty previous constraint
/// bootstraps from the previous candidates' pooled features; afterwards
/// the clause set only ever shrinks (running intersection).
pub fn update_constraints(
    prev: &Constraint,
    prev_candidates: &CoreKnowledge,
    current: &GraphFeatures,
) -> ConstraintUpdate {
    let pool: Vec<Clause> = if prev.clauses.is_empty() {
        prev_candidates.feature_pool.iter().copied().collect()
    } else {
        prev.clauses.iter().copied().collect()
    };
    let kept: BTreeSet<Clause> = pool
        .into_iter()
        .filter(|c| current.clause_satisfiable(c))
        .collect();
    if kept.is_empty() {
        ConstraintUpdate {
            constraint: Constraint::empty(),
            unspecified: true,
        }
    } else {
        ConstraintUpdate {
            constraint: Constraint {
                layer: None,
                clauses: kept,
            },
            unspecified: false,
        }
    }
}

/// Apply a constraint to a graph; cross-grid clauses are skipped when the
/// graph has no output side.
pub fn apply_constraints(constraint: &Constraint, feats: &GraphFeatures) -> CoreKnowledge {
    let candidates = feats.apply_constraint(constraint);
    feats.core_knowledge(candidates, constraint.clone())
}

/// Train-phase accumulator: tracks the running constraint and the
/// unspecified flag across one task's example pairs.
#[derive(Debug, Clone, Default)]
pub struct SpecifierSession {
    constraint: Constraint,
    last: Option<CoreKnowledge>,
    unspecified: bool,
}

impl SpecifierSession {
    pub fn new() -> SpecifierSession {
        SpecifierSession::default()
    }

    pub fn constraint(&self) -> &Constraint {
        &self.constraint
    }

    pub fn is_unspecified(&self) -> bool {
        self.unspecified
    }

    /// Observe the next example pair's graph and return its candidates.
    pub fn observe(&mut self, feats: &GraphFeatures) -> CoreKnowledge {
        let knowledge = match &self.last {
            None => specify_initial(feats),
            Some(_) if self.unspecified => apply_constraints(&Constraint::empty(), feats),
            Some(prev) => {
                let update = update_constraints(&self.constraint, prev, feats);
                self.unspecified = update.unspecified;
                self.constraint = update.constraint;
                apply_constraints(&self.constraint, feats)
            }
        };
        self.last = Some(knowledge.clone());
        knowledge
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GridSide, ObjectPolicy};
    use crate::properties::{build_knowledge_graph, FULL_REGISTRY};
    use crate::task::{Color, Grid};

    fn grid(rows: &[&[i64]]) -> Grid {
        let rows: Vec<Vec<i64>> = rows.iter().map(|r| r.to_vec()).collect();
        Grid::from_rows(&rows, "test").unwrap()
    }

    fn kg(input: &Grid, output: Option<&Grid>) -> KnowledgeGraph {
        build_knowledge_graph("t", 0, input, output, &FULL_REGISTRY, ObjectPolicy::SameColor4)
            .unwrap()
    }

    #[test]
    fn initial_candidates_are_onodes_plus_gnode() {
        let g = kg(&grid(&[&[1, 0, 2]]), None);
        let feats = GraphFeatures::new(&g);
        let ck = specify_initial(&feats);
        assert_eq!(ck.candidate_nodes.len(), 3);
        assert!(ck.constraint_used.is_empty());

        let empty = kg(&grid(&[&[0, 0], &[0, 0]]), None);
        let feats = GraphFeatures::new(&empty);
        assert_eq!(specify_initial(&feats).candidate_nodes.len(), 1);

        // Two single-pixel objects of different colors.
        let two = kg(&grid(&[&[2, 0], &[0, 1]]), None);
        let feats = GraphFeatures::new(&two);
        assert_eq!(specify_initial(&feats).candidate_nodes.len(), 3);
    }

    #[test]
    fn features_of_a_single_pixel_object() {
        let g = kg(&grid(&[&[0, 0, 0], &[0, 3, 0], &[0, 0, 0]]), None);
        let feats = GraphFeatures::new(&g);
        let onode = g.onodes(GridSide::Input)[0];
        let fs = feats.extract_features(onode).unwrap();
        assert_eq!(fs.size, 1);
        assert_eq!(fs.colors.to_vec(), vec![3]);
        assert!(fs.unary_properties.contains(&PropertyKind::IsSinglePixel));
        assert!(fs.unary_properties.contains(&PropertyKind::IsLargestObject));

        // Pnodes are not candidates.
        let pnode = NodeId(0);
        assert!(feats.extract_features(pnode).is_err());
    }

    #[test]
    fn largest_object_carries_the_unary_feature() {
        let g = kg(&grid(&[&[1, 1, 0], &[1, 0, 0], &[0, 0, 2]]), None);
        let feats = GraphFeatures::new(&g);
        let largest = g
            .onodes(GridSide::Input)
            .iter()
            .copied()
            .max_by_key(|&id| g.as_onode(id).unwrap().size())
            .unwrap();
        let fs = feats.extract_features(largest).unwrap();
        assert!(fs.unary_properties.contains(&PropertyKind::IsLargestObject));
        assert!(!fs.unary_properties.contains(&PropertyKind::IsSmallestObject));
    }

    #[test]
    fn update_keeps_transferable_clauses_and_drops_stale_values() {
        // Pair 1: one object, color 2. Pair 2: one object, color 3.
        let g1 = kg(&grid(&[&[2, 2, 0], &[0, 0, 0]]), Some(&grid(&[&[1]])));
        let g2 = kg(&grid(&[&[0, 0, 0], &[3, 3, 3]]), Some(&grid(&[&[1]])));
        let f1 = GraphFeatures::new(&g1);
        let f2 = GraphFeatures::new(&g2);

        let initial = specify_initial(&f1);
        assert!(initial
            .feature_pool
            .contains(&Clause::ColorsAre([Color::new(2).unwrap()].into_iter().collect())));

        let update = update_constraints(&Constraint::empty(), &initial, &f2);
        assert!(!update.unspecified);
        let kept = &update.constraint.clauses;
        assert!(kept.contains(&Clause::Unary(PropertyKind::IsLargestObject)));
        // The pair-1 color value does not recur in pair 2 and is dropped.
        let stale = Clause::ColorsAre([Color::new(2).unwrap()].into_iter().collect());
        assert!(!kept.contains(&stale));
    }

    #[test]
    fn update_degrades_to_select_all_when_nothing_transfers() {
        let g2 = kg(&grid(&[&[3]]), Some(&grid(&[&[1]])));
        let f2 = GraphFeatures::new(&g2);
        // A synthetic pool with a clause no pair-2 candidate satisfies.
        let prev = CoreKnowledge {
            candidate_nodes: vec![],
            constraint_used: Constraint::empty(),
            feature_pool: [Clause::SizeIs(999)].into_iter().collect(),
        };
        let update = update_constraints(&Constraint::empty(), &prev, &f2);
        assert!(update.unspecified);
        assert!(update.constraint.is_empty());
    }

    #[test]
    fn session_is_idempotent_on_repeated_graphs() {
        let g1 = kg(&grid(&[&[1, 0], &[0, 2]]), Some(&grid(&[&[1]])));
        let g2 = kg(&grid(&[&[1, 1, 0], &[0, 0, 2]]), Some(&grid(&[&[1]])));
        let f1 = GraphFeatures::new(&g1);
        let f2 = GraphFeatures::new(&g2);
        let mut session = SpecifierSession::new();
        session.observe(&f1);
        let first = session.observe(&f2);
        let constraint_after_first = session.constraint().clone();
        let second = session.observe(&f2);
        assert_eq!(session.constraint(), &constraint_after_first);
        assert_eq!(first.candidate_nodes, second.candidate_nodes);
    }

    #[test]
    fn session_clause_set_shrinks_monotonically() {
        let g1 = kg(&grid(&[&[1, 1, 0], &[0, 0, 2]]), Some(&grid(&[&[1]])));
        let g2 = kg(&grid(&[&[1, 0, 0], &[0, 0, 5]]), Some(&grid(&[&[1]])));
        let g3 = kg(&grid(&[&[4, 4, 4], &[0, 0, 0]]), Some(&grid(&[&[1]])));
        let f1 = GraphFeatures::new(&g1);
        let f2 = GraphFeatures::new(&g2);
        let f3 = GraphFeatures::new(&g3);
        let mut session = SpecifierSession::new();
        session.observe(&f1);
        session.observe(&f2);
        let after_two = session.constraint().clauses.clone();
        session.observe(&f3);
        let after_three = session.constraint().clauses.clone();
        assert!(after_three.is_subset(&after_two));
    }

    #[test]
    fn minimal_constraint_for_the_only_object_is_layer_restricted_empty() {
        let g = kg(&grid(&[&[0, 7], &[7, 7]]), None);
        let feats = GraphFeatures::new(&g);
        let onode = g.onodes(GridSide::Input)[0];
        let result = feats.minimal_unique_constraint(onode).unwrap();
        assert!(result.unique);
        assert_eq!(result.constraint.layer, Some(NodeLayer::Onode));
        assert!(result.constraint.clauses.is_empty());
    }

    #[test]
    fn minimal_constraint_prefers_the_superlative() {
        // Three objects, one strictly largest.
        let g = kg(&grid(&[&[1, 1, 1, 0], &[0, 0, 0, 0], &[2, 0, 3, 3]]), None);
        let feats = GraphFeatures::new(&g);
        let largest = g
            .onodes(GridSide::Input)
            .iter()
            .copied()
            .max_by_key(|&id| g.as_onode(id).unwrap().size())
            .unwrap();
        let result = feats.minimal_unique_constraint(largest).unwrap();
        assert!(result.unique);
        assert_eq!(
            result.constraint.clauses.iter().collect::<Vec<_>>(),
            vec![&Clause::Unary(PropertyKind::IsLargestObject)]
        );
    }

    #[test]
    fn identical_objects_are_non_unique() {
        // Two single pixels of the same color, both on the border,
        // indistinguishable by any feature.
        let g = kg(&grid(&[&[4, 0, 4]]), None);
        let feats = GraphFeatures::new(&g);
        let onode = g.onodes(GridSide::Input)[0];
        let result = feats.minimal_unique_constraint(onode).unwrap();
        assert!(!result.unique);
        assert!(!result.constraint.clauses.is_empty());

        let classes = feats.candidate_classes();
        let pair_class = classes.iter().find(|c| c.members.len() == 2).unwrap();
        assert!(!pair_class.selector.unique);
    }

    #[test]
    fn apply_skips_cross_clauses_on_test_graphs() {
        let input = grid(&[&[1, 1, 0], &[0, 0, 2]]);
        let train = kg(&input, Some(&grid(&[&[1, 1]])));
        let train_feats = GraphFeatures::new(&train);
        // Find a constraint that uses a cross edge on the train graph.
        let big = train
            .onodes(GridSide::Input)
            .iter()
            .copied()
            .max_by_key(|&id| train.as_onode(id).unwrap().size())
            .unwrap();
        let fs = train_feats.extract_features(big).unwrap();
        let cross_summary = fs.incident_edges.keys().find(|s| s.cross).copied();
        let Some(cross_summary) = cross_summary else {
            panic!("expected a cross edge on the largest object");
        };
        let mut clauses = BTreeSet::new();
        clauses.insert(Clause::Edge(cross_summary));
        clauses.insert(Clause::SizeIs(2));
        let constraint = Constraint {
            layer: Some(NodeLayer::Onode),
            clauses,
        };
        // On the train graph both clauses apply.
        assert_eq!(train_feats.apply_constraint(&constraint), vec![big]);
        // On the test graph the cross clause is skipped, the rest applied.
        let test = kg(&input, None);
        let test_feats = GraphFeatures::new(&test);
        let selected = test_feats.apply_constraint(&constraint);
        assert_eq!(selected.len(), 1);
        assert_eq!(test_feats.extract_features(selected[0]).unwrap().size, 2);
    }

    #[test]
    fn apply_with_superlative_picks_the_larger() {
        let g = kg(&grid(&[&[1, 1, 1, 0, 2], &[1, 1, 0, 0, 2]]), None);
        let feats = GraphFeatures::new(&g);
        let constraint = Constraint {
            layer: Some(NodeLayer::Onode),
            clauses: [Clause::Unary(PropertyKind::IsLargestObject)]
                .into_iter()
                .collect(),
        };
        let selected = feats.apply_constraint(&constraint);
        assert_eq!(selected.len(), 1);
        assert_eq!(feats.extract_features(selected[0]).unwrap().size, 5);
    }
}
