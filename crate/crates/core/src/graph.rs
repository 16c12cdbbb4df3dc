//! The four-layer node model and node-list construction.
//!
//! Every example pair becomes one graph: a Pnode per pixel, an Onode per
//! extracted object, one Gnode per grid side, and a Vnode tying the two
//! sides together. Structural membership edges (pixel-of-object,
//! pixel-of-grid, object-of-grid, grid-of-pair) are emitted during node
//! construction; property edges are added separately by
//! [`crate::properties`].

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::properties::PropertyKind;
use crate::task::{Color, Grid};

/// Node identifier, unique and stable within one graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum GridSide {
    Input,
    Output,
}

impl fmt::Display for GridSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridSide::Input => write!(f, "input"),
            GridSide::Output => write!(f, "output"),
        }
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum NodeLayer {
    Pnode,
    Onode,
    Gnode,
    Vnode,
}

impl fmt::Display for NodeLayer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeLayer::Pnode => write!(f, "pnode"),
            NodeLayer::Onode => write!(f, "onode"),
            NodeLayer::Gnode => write!(f, "gnode"),
            NodeLayer::Vnode => write!(f, "vnode"),
        }
    }
}

/// Grid coordinate: (row, col), zero-based.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct Coordinate {
    pub row: usize,
    pub col: usize,
}

impl Coordinate {
    pub fn new(row: usize, col: usize) -> Coordinate {
        Coordinate { row, col }
    }
}

/// A set of colors, stored as a ten-bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ColorSet(u16);

impl ColorSet {
    pub fn empty() -> ColorSet {
        ColorSet(0)
    }

    pub fn insert(&mut self, color: Color) {
        self.0 |= 1 << color.value();
    }

    pub fn contains(self, color: Color) -> bool {
        self.0 & (1 << color.value()) != 0
    }

    pub fn union(self, other: ColorSet) -> ColorSet {
        ColorSet(self.0 | other.0)
    }

    pub fn intersection(self, other: ColorSet) -> ColorSet {
        ColorSet(self.0 & other.0)
    }

    pub fn difference(self, other: ColorSet) -> ColorSet {
        ColorSet(self.0 & !other.0)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Number of colors other than the background.
    pub fn non_background_len(self) -> usize {
        (self.0 & !1).count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Color> {
        (0u8..10).filter_map(move |v| {
            (self.0 & (1 << v) != 0).then(|| Color::new(v).unwrap())
        })
    }

    pub fn to_vec(self) -> Vec<u8> {
        self.iter().map(Color::value).collect()
    }
}

impl FromIterator<Color> for ColorSet {
    fn from_iter<I: IntoIterator<Item = Color>>(iter: I) -> ColorSet {
        let mut set = ColorSet::empty();
        for c in iter {
            set.insert(c);
        }
        set
    }
}

impl fmt::Display for ColorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, c) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "}}")
    }
}

impl Serialize for ColorSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter().map(|c| c.value()))
    }
}

impl<'de> Deserialize<'de> for ColorSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<ColorSet, D::Error> {
        let values: Vec<u8> = Vec::deserialize(deserializer)?;
        let mut set = ColorSet::empty();
        for v in values {
            let c = Color::new(v)
                .ok_or_else(|| serde::de::Error::custom(format!("color out of range: {v}")))?;
            set.insert(c);
        }
        Ok(set)
    }
}

/// Tight bounding box of a pixel set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bbox {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pnode {
    pub id: NodeId,
    pub side: GridSide,
    pub coord: Coordinate,
    pub color: Color,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Onode {
    pub id: NodeId,
    pub side: GridSide,
    /// Member pixel coordinates, sorted row-major. Never empty.
    pub pixels: Vec<Coordinate>,
    pub colors: ColorSet,
    pub bbox: Bbox,
}

impl Onode {
    pub fn size(&self) -> usize {
        self.pixels.len()
    }

    /// Pixel offsets relative to the bbox corner; equal masks mean equal shape.
    pub fn shape_mask(&self) -> Vec<Coordinate> {
        self.pixels
            .iter()
            .map(|p| Coordinate::new(p.row - self.bbox.top, p.col - self.bbox.left))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gnode {
    pub id: NodeId,
    pub side: GridSide,
    pub grid: Grid,
    pub onode_ids: Vec<NodeId>,
    pub pnode_ids: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vnode {
    pub id: NodeId,
    pub input_gnode: NodeId,
    pub output_gnode: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    P(Pnode),
    O(Onode),
    G(Gnode),
    V(Vnode),
}

impl Node {
    pub fn id(&self) -> NodeId {
        match self {
            Node::P(n) => n.id,
            Node::O(n) => n.id,
            Node::G(n) => n.id,
            Node::V(n) => n.id,
        }
    }

    pub fn layer(&self) -> NodeLayer {
        match self {
            Node::P(_) => NodeLayer::Pnode,
            Node::O(_) => NodeLayer::Onode,
            Node::G(_) => NodeLayer::Gnode,
            Node::V(_) => NodeLayer::Vnode,
        }
    }

    /// The grid side the node belongs to; a Vnode spans both.
    pub fn side(&self) -> Option<GridSide> {
        match self {
            Node::P(n) => Some(n.side),
            Node::O(n) => Some(n.side),
            Node::G(n) => Some(n.side),
            Node::V(_) => None,
        }
    }
}

/// Reserved structural edge labels, distinct from the property registry.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    PixelOfObject,
    PixelOfGrid,
    ObjectOfGrid,
    GridOfPair,
}

impl Membership {
    pub fn id(self) -> &'static str {
        match self {
            Membership::PixelOfObject => "pixel_of_object",
            Membership::PixelOfGrid => "pixel_of_grid",
            Membership::ObjectOfGrid => "object_of_grid",
            Membership::GridOfPair => "grid_of_pair",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeLabel {
    Property(PropertyKind),
    Member(Membership),
}

impl EdgeLabel {
    pub fn id(self) -> &'static str {
        match self {
            EdgeLabel::Property(p) => p.id(),
            EdgeLabel::Member(m) => m.id(),
        }
    }
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub label: EdgeLabel,
}

/// How objects are extracted from a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObjectPolicy {
    /// Maximal same-color 4-connected components of non-background cells.
    #[default]
    SameColor4,
    /// Same-color components under 8-connectivity.
    SameColor8,
    /// Multi-color components: any non-background cells touching under
    /// 8-connectivity form one object.
    MultiColor8,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("a Gnode for the {side} side already exists")]
    GnodeAlreadyPresent { side: GridSide },
    #[error("node id {id} appears in both lists")]
    IdCollision { id: NodeId },
    #[error("Vnode construction needs both Gnodes, found {found}")]
    NeedTwoGnodes { found: usize },
    #[error("no Pnodes present for the {side} side")]
    MissingPnodes { side: GridSide },
    #[error("unknown node id {id}")]
    UnknownNode { id: NodeId },
}

/// A growing node list plus the structural membership edges emitted so far.
#[derive(Debug, Clone, Default)]
pub struct NodeList {
    pub nodes: Vec<Node>,
    pub membership_edges: Vec<Edge>,
    next_id: u32,
}

impl NodeList {
    pub fn new() -> NodeList {
        NodeList::default()
    }

    /// Start id allocation at a fixed offset (used to keep the output
    /// side's ids disjoint from the input side's).
    pub fn with_start_id(start: u32) -> NodeList {
        NodeList {
            next_id: start,
            ..NodeList::default()
        }
    }

    fn alloc(&mut self) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn pnodes(&self, side: GridSide) -> impl Iterator<Item = &Pnode> {
        self.nodes.iter().filter_map(move |n| match n {
            Node::P(p) if p.side == side => Some(p),
            _ => None,
        })
    }

    pub fn onodes(&self, side: GridSide) -> impl Iterator<Item = &Onode> {
        self.nodes.iter().filter_map(move |n| match n {
            Node::O(o) if o.side == side => Some(o),
            _ => None,
        })
    }

    pub fn gnode(&self, side: GridSide) -> Option<&Gnode> {
        self.nodes.iter().find_map(|n| match n {
            Node::G(g) if g.side == side => Some(g),
            _ => None,
        })
    }
}

/// Append one Pnode per cell in row-major order.
pub fn make_pnode_list(list: &mut NodeList, grid: &Grid, side: GridSide) {
    for row in 0..grid.height() {
        for col in 0..grid.width() {
            let id = list.alloc();
            list.nodes.push(Node::P(Pnode {
                id,
                side,
                coord: Coordinate::new(row, col),
                color: grid.get(row, col),
            }));
        }
    }
}

/// Extract objects under `policy` and append one Onode per object,
/// ordered by first pixel (row-major), then by smallest member color.
///
/// Emits pixel-of-object membership edges from the side's Pnodes.
pub fn make_onode_list(
    list: &mut NodeList,
    grid: &Grid,
    side: GridSide,
    policy: ObjectPolicy,
) -> Result<(), GraphError> {
    let pnode_ids: Vec<(Coordinate, NodeId)> = list
        .pnodes(side)
        .map(|p| (p.coord, p.id))
        .collect();
    if pnode_ids.len() != grid.height() * grid.width() {
        return Err(GraphError::MissingPnodes { side });
    }
    let pnode_at = |coord: Coordinate| -> NodeId {
        // Pnodes were appended row-major, so their order matches scan order.
        pnode_ids[coord.row * grid.width() + coord.col].1
    };

    let mut components = connected_components(grid, policy);
    components.sort_by_key(|pixels| {
        let first = pixels[0];
        let min_color = pixels.iter().map(|&p| grid.get(p.row, p.col)).min().unwrap();
        (first, min_color)
    });

    for pixels in components {
        let colors: ColorSet = pixels.iter().map(|&p| grid.get(p.row, p.col)).collect();
        let top = pixels.iter().map(|p| p.row).min().unwrap();
        let left = pixels.iter().map(|p| p.col).min().unwrap();
        let bottom = pixels.iter().map(|p| p.row).max().unwrap();
        let right = pixels.iter().map(|p| p.col).max().unwrap();
        let id = list.alloc();
        for &p in &pixels {
            list.membership_edges.push(Edge {
                src: pnode_at(p),
                dst: id,
                label: EdgeLabel::Member(Membership::PixelOfObject),
            });
        }
        list.nodes.push(Node::O(Onode {
            id,
            side,
            pixels,
            colors,
            bbox: Bbox {
                top,
                left,
                height: bottom - top + 1,
                width: right - left + 1,
            },
        }));
    }
    Ok(())
}

fn connected_components(grid: &Grid, policy: ObjectPolicy) -> Vec<Vec<Coordinate>> {
    let (h, w) = (grid.height(), grid.width());
    let mut visited = vec![false; h * w];
    let mut components = Vec::new();
    let neighbors_8 = policy != ObjectPolicy::SameColor4;
    let same_color_only = policy != ObjectPolicy::MultiColor8;

    for row in 0..h {
        for col in 0..w {
            let idx = row * w + col;
            if visited[idx] || grid.get(row, col).is_background() {
                continue;
            }
            let seed_color = grid.get(row, col);
            let mut pixels = Vec::new();
            let mut queue = vec![Coordinate::new(row, col)];
            visited[idx] = true;
            while let Some(p) = queue.pop() {
                pixels.push(p);
                let deltas: &[(isize, isize)] = if neighbors_8 {
                    &[
                        (-1, -1),
                        (-1, 0),
                        (-1, 1),
                        (0, -1),
                        (0, 1),
                        (1, -1),
                        (1, 0),
                        (1, 1),
                    ]
                } else {
                    &[(-1, 0), (0, -1), (0, 1), (1, 0)]
                };
                for &(dr, dc) in deltas {
                    let (nr, nc) = (p.row as isize + dr, p.col as isize + dc);
                    if nr < 0 || nc < 0 || nr as usize >= h || nc as usize >= w {
                        continue;
                    }
                    let (nr, nc) = (nr as usize, nc as usize);
                    let nidx = nr * w + nc;
                    if visited[nidx] {
                        continue;
                    }
                    let c = grid.get(nr, nc);
                    if c.is_background() {
                        continue;
                    }
                    if same_color_only && c != seed_color {
                        continue;
                    }
                    visited[nidx] = true;
                    queue.push(Coordinate::new(nr, nc));
                }
            }
            pixels.sort();
            components.push(pixels);
        }
    }
    components
}

/// Append the side's single Gnode, referencing all of its Pnodes and Onodes.
///
/// Emits pixel-of-grid and object-of-grid membership edges.
pub fn make_gnode_list(
    list: &mut NodeList,
    grid: &Grid,
    side: GridSide,
) -> Result<NodeId, GraphError> {
    if list.gnode(side).is_some() {
        return Err(GraphError::GnodeAlreadyPresent { side });
    }
    let pnode_ids: Vec<NodeId> = list.pnodes(side).map(|p| p.id).collect();
    if pnode_ids.len() != grid.height() * grid.width() {
        return Err(GraphError::MissingPnodes { side });
    }
    let onode_ids: Vec<NodeId> = list.onodes(side).map(|o| o.id).collect();
    let id = list.alloc();
    for &p in &pnode_ids {
        list.membership_edges.push(Edge {
            src: p,
            dst: id,
            label: EdgeLabel::Member(Membership::PixelOfGrid),
        });
    }
    for &o in &onode_ids {
        list.membership_edges.push(Edge {
            src: o,
            dst: id,
            label: EdgeLabel::Member(Membership::ObjectOfGrid),
        });
    }
    list.nodes.push(Node::G(Gnode {
        id,
        side,
        grid: grid.clone(),
        onode_ids,
        pnode_ids,
    }));
    Ok(id)
}

/// Order-preserving concatenation of two node lists with disjoint id spaces.
pub fn concat_list(a: NodeList, b: NodeList) -> Result<NodeList, GraphError> {
    let mut seen = std::collections::HashSet::with_capacity(a.len() + b.len());
    for node in a.nodes.iter().chain(b.nodes.iter()) {
        if !seen.insert(node.id()) {
            return Err(GraphError::IdCollision { id: node.id() });
        }
    }
    let mut nodes = a.nodes;
    nodes.extend(b.nodes);
    let mut membership_edges = a.membership_edges;
    membership_edges.extend(b.membership_edges);
    Ok(NodeList {
        nodes,
        membership_edges,
        next_id: a.next_id.max(b.next_id),
    })
}

/// Append the Vnode linking the input and output Gnodes.
///
/// Test-input graphs, which lack an output Gnode, skip this step.
pub fn make_vnode_list(list: &mut NodeList) -> Result<NodeId, GraphError> {
    let input = list.gnode(GridSide::Input).map(|g| g.id);
    let output = list.gnode(GridSide::Output).map(|g| g.id);
    let found = input.iter().chain(output.iter()).count();
    let (Some(input_gnode), Some(output_gnode)) = (input, output) else {
        return Err(GraphError::NeedTwoGnodes { found });
    };
    let id = list.alloc();
    for g in [input_gnode, output_gnode] {
        list.membership_edges.push(Edge {
            src: g,
            dst: id,
            label: EdgeLabel::Member(Membership::GridOfPair),
        });
    }
    list.nodes.push(Node::V(Vnode {
        id,
        input_gnode,
        output_gnode,
    }));
    Ok(id)
}

/// Build the full node list for a pair: input side, optional output side,
/// concatenation, and (when the output is present) the Vnode.
pub fn build_node_lists(
    input: &Grid,
    output: Option<&Grid>,
    policy: ObjectPolicy,
) -> Result<NodeList, GraphError> {
    let mut input_list = NodeList::new();
    make_pnode_list(&mut input_list, input, GridSide::Input);
    make_onode_list(&mut input_list, input, GridSide::Input, policy)?;
    make_gnode_list(&mut input_list, input, GridSide::Input)?;

    let Some(output) = output else {
        return Ok(input_list);
    };

    let mut output_list = NodeList::with_start_id(input_list.next_id);
    make_pnode_list(&mut output_list, output, GridSide::Output);
    make_onode_list(&mut output_list, output, GridSide::Output, policy)?;
    make_gnode_list(&mut output_list, output, GridSide::Output)?;

    let mut list = concat_list(input_list, output_list)?;
    make_vnode_list(&mut list)?;
    Ok(list)
}

/// One immutable knowledge graph for a single example pair.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    pub task_id: String,
    pub pair_index: usize,
    pub has_output: bool,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    input_gnode: NodeId,
    output_gnode: Option<NodeId>,
    vnode: Option<NodeId>,
    input_onodes: Vec<NodeId>,
    output_onodes: Vec<NodeId>,
}

impl KnowledgeGraph {
    pub(crate) fn from_parts(
        task_id: String,
        pair_index: usize,
        list: NodeList,
        property_edges: Vec<Edge>,
    ) -> KnowledgeGraph {
        let mut edges = list.membership_edges;
        edges.extend(property_edges);
        let nodes = list.nodes;
        let input_gnode = nodes
            .iter()
            .find_map(|n| match n {
                Node::G(g) if g.side == GridSide::Input => Some(g.id),
                _ => None,
            })
            .expect("input Gnode always present");
        let output_gnode = nodes.iter().find_map(|n| match n {
            Node::G(g) if g.side == GridSide::Output => Some(g.id),
            _ => None,
        });
        let vnode = nodes.iter().find_map(|n| match n {
            Node::V(v) => Some(v.id),
            _ => None,
        });
        let side_onodes = |side: GridSide| -> Vec<NodeId> {
            nodes
                .iter()
                .filter_map(|n| match n {
                    Node::O(o) if o.side == side => Some(o.id),
                    _ => None,
                })
                .collect()
        };
        KnowledgeGraph {
            task_id,
            pair_index,
            has_output: output_gnode.is_some(),
            input_onodes: side_onodes(GridSide::Input),
            output_onodes: side_onodes(GridSide::Output),
            nodes,
            edges,
            input_gnode,
            output_gnode,
            vnode,
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn try_node(&self, id: NodeId) -> Result<&Node, GraphError> {
        self.nodes.get(id.index()).ok_or(GraphError::UnknownNode { id })
    }

    pub fn as_onode(&self, id: NodeId) -> Option<&Onode> {
        match self.node(id) {
            Node::O(o) => Some(o),
            _ => None,
        }
    }

    pub fn as_gnode(&self, id: NodeId) -> Option<&Gnode> {
        match self.node(id) {
            Node::G(g) => Some(g),
            _ => None,
        }
    }

    pub fn gnode(&self, side: GridSide) -> Option<NodeId> {
        match side {
            GridSide::Input => Some(self.input_gnode),
            GridSide::Output => self.output_gnode,
        }
    }

    pub fn vnode(&self) -> Option<NodeId> {
        self.vnode
    }

    pub fn onodes(&self, side: GridSide) -> &[NodeId] {
        match side {
            GridSide::Input => &self.input_onodes,
            GridSide::Output => &self.output_onodes,
        }
    }

    /// The abduction candidates: all input-side Onodes plus the input Gnode.
    pub fn candidate_nodes(&self) -> Vec<NodeId> {
        let mut out = self.input_onodes.clone();
        out.push(self.input_gnode);
        out
    }

    pub fn grid(&self, side: GridSide) -> Option<&Grid> {
        self.gnode(side)
            .and_then(|id| self.as_gnode(id))
            .map(|g| &g.grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rows: &[&[i64]]) -> Grid {
        let rows: Vec<Vec<i64>> = rows.iter().map(|r| r.to_vec()).collect();
        Grid::from_rows(&rows, "test").unwrap()
    }

    /// Independent component counter: fixpoint label propagation, no BFS.
    fn oracle_component_count(g: &Grid, policy: ObjectPolicy) -> usize {
        let (h, w) = (g.height(), g.width());
        let mut labels: Vec<usize> = (0..h * w).collect();
        let eight = policy != ObjectPolicy::SameColor4;
        let same_color = policy != ObjectPolicy::MultiColor8;
        let connected = |r1: usize, c1: usize, r2: usize, c2: usize| -> bool {
            let dr = r1.abs_diff(r2);
            let dc = c1.abs_diff(c2);
            let adjacent = if eight {
                dr <= 1 && dc <= 1 && (dr, dc) != (0, 0)
            } else {
                dr + dc == 1
            };
            adjacent
                && !g.get(r1, c1).is_background()
                && !g.get(r2, c2).is_background()
                && (!same_color || g.get(r1, c1) == g.get(r2, c2))
        };
        loop {
            let mut changed = false;
            for r1 in 0..h {
                for c1 in 0..w {
                    for r2 in 0..h {
                        for c2 in 0..w {
                            if connected(r1, c1, r2, c2) {
                                let (a, b) = (r1 * w + c1, r2 * w + c2);
                                let m = labels[a].min(labels[b]);
                                if labels[a] != m || labels[b] != m {
                                    labels[a] = m;
                                    labels[b] = m;
                                    changed = true;
                                }
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut distinct: Vec<usize> = (0..h * w)
            .filter(|&i| !g.cells()[i].is_background())
            .map(|i| labels[i])
            .collect();
        distinct.sort_unstable();
        distinct.dedup();
        distinct.len()
    }

    #[test]
    fn pnode_per_cell_row_major() {
        let g = grid(&[&[0, 0], &[0, 3]]);
        let mut list = NodeList::new();
        make_pnode_list(&mut list, &g, GridSide::Input);
        let pnodes: Vec<&Pnode> = list.pnodes(GridSide::Input).collect();
        assert_eq!(pnodes.len(), 4);
        assert_eq!(pnodes[3].coord, Coordinate::new(1, 1));
        assert_eq!(pnodes[3].color.value(), 3);

        let one = grid(&[&[5]]);
        let mut list = NodeList::new();
        make_pnode_list(&mut list, &one, GridSide::Input);
        assert_eq!(list.len(), 1);

        let big_rows: Vec<Vec<i64>> = vec![vec![1; 30]; 30];
        let big = Grid::from_rows(&big_rows, "t").unwrap();
        let mut list = NodeList::new();
        make_pnode_list(&mut list, &big, GridSide::Input);
        assert_eq!(list.len(), 900);
    }

    #[test]
    fn onodes_are_same_color_components() {
        let g = grid(&[&[1, 1, 0], &[0, 0, 2]]);
        let mut list = NodeList::new();
        make_pnode_list(&mut list, &g, GridSide::Input);
        make_onode_list(&mut list, &g, GridSide::Input, ObjectPolicy::SameColor4).unwrap();
        let onodes: Vec<&Onode> = list.onodes(GridSide::Input).collect();
        assert_eq!(onodes.len(), 2);
        assert_eq!(
            onodes[0].pixels,
            vec![Coordinate::new(0, 0), Coordinate::new(0, 1)]
        );
        assert_eq!(onodes[0].colors.to_vec(), vec![1]);
        assert_eq!(onodes[1].pixels, vec![Coordinate::new(1, 2)]);
        assert_eq!(onodes[1].colors.to_vec(), vec![2]);
    }

    #[test]
    fn all_background_grid_has_no_onodes() {
        let g = grid(&[&[0, 0], &[0, 0]]);
        let mut list = NodeList::new();
        make_pnode_list(&mut list, &g, GridSide::Input);
        make_onode_list(&mut list, &g, GridSide::Input, ObjectPolicy::SameColor4).unwrap();
        assert_eq!(list.onodes(GridSide::Input).count(), 0);
    }

    #[test]
    fn diagonal_pixels_split_on_connectivity() {
        let g = grid(&[&[3, 0], &[0, 3]]);
        for (policy, expected) in [(ObjectPolicy::SameColor4, 2), (ObjectPolicy::SameColor8, 1)] {
            let mut list = NodeList::new();
            make_pnode_list(&mut list, &g, GridSide::Input);
            make_onode_list(&mut list, &g, GridSide::Input, policy).unwrap();
            assert_eq!(list.onodes(GridSide::Input).count(), expected);
            assert_eq!(oracle_component_count(&g, policy), expected);
        }
    }

    #[test]
    fn component_extraction_matches_oracle_on_mixed_grid() {
        let g = grid(&[
            &[1, 1, 0, 2, 0],
            &[0, 1, 0, 2, 2],
            &[5, 0, 0, 0, 2],
            &[5, 5, 0, 7, 0],
        ]);
        for policy in [
            ObjectPolicy::SameColor4,
            ObjectPolicy::SameColor8,
            ObjectPolicy::MultiColor8,
        ] {
            let mut list = NodeList::new();
            make_pnode_list(&mut list, &g, GridSide::Input);
            make_onode_list(&mut list, &g, GridSide::Input, policy).unwrap();
            assert_eq!(
                list.onodes(GridSide::Input).count(),
                oracle_component_count(&g, policy),
                "{policy:?}"
            );
        }
    }

    #[test]
    fn gnode_counts_and_double_call_error() {
        let g = grid(&[&[1, 1, 0], &[0, 0, 2]]);
        let mut list = NodeList::new();
        make_pnode_list(&mut list, &g, GridSide::Input);
        make_onode_list(&mut list, &g, GridSide::Input, ObjectPolicy::SameColor4).unwrap();
        make_gnode_list(&mut list, &g, GridSide::Input).unwrap();
        let gnode = list.gnode(GridSide::Input).unwrap();
        assert_eq!(gnode.onode_ids.len(), 2);
        assert_eq!(gnode.pnode_ids.len(), 6);
        assert!(matches!(
            make_gnode_list(&mut list, &g, GridSide::Input),
            Err(GraphError::GnodeAlreadyPresent { .. })
        ));

        let sq = grid(&[&[1, 2, 3], &[4, 5, 6], &[7, 8, 9]]);
        let mut list = NodeList::new();
        make_pnode_list(&mut list, &sq, GridSide::Input);
        make_onode_list(&mut list, &sq, GridSide::Input, ObjectPolicy::SameColor4).unwrap();
        make_gnode_list(&mut list, &sq, GridSide::Input).unwrap();
        assert_eq!(list.gnode(GridSide::Input).unwrap().pnode_ids.len(), 9);
    }

    #[test]
    fn vnode_needs_both_sides() {
        let g = grid(&[&[1]]);
        let list = build_node_lists(&g, Some(&g), ObjectPolicy::SameColor4).unwrap();
        let vnodes = list.nodes.iter().filter(|n| matches!(n, Node::V(_))).count();
        assert_eq!(vnodes, 1);

        let test_only = build_node_lists(&g, None, ObjectPolicy::SameColor4).unwrap();
        let vnodes = test_only
            .nodes
            .iter()
            .filter(|n| matches!(n, Node::V(_)))
            .count();
        assert_eq!(vnodes, 0);

        let mut half = NodeList::new();
        make_pnode_list(&mut half, &g, GridSide::Input);
        make_gnode_list(&mut half, &g, GridSide::Input).unwrap();
        assert!(matches!(
            make_vnode_list(&mut half),
            Err(GraphError::NeedTwoGnodes { found: 1 })
        ));
    }

    #[test]
    fn concat_preserves_order_and_rejects_collisions() {
        let g = grid(&[&[1]]);
        let mut a = NodeList::new();
        make_pnode_list(&mut a, &g, GridSide::Input);
        let mut b = NodeList::with_start_id(1);
        make_pnode_list(&mut b, &g, GridSide::Output);
        let joined = concat_list(a.clone(), b).unwrap();
        assert_eq!(joined.len(), 2);
        assert_eq!(joined.nodes[0].id(), NodeId(0));
        assert_eq!(joined.nodes[1].id(), NodeId(1));

        let empty = NodeList::new();
        let joined = concat_list(empty, a.clone()).unwrap();
        assert_eq!(joined.len(), 1);

        let mut clash = NodeList::new();
        make_pnode_list(&mut clash, &g, GridSide::Output);
        assert!(matches!(
            concat_list(a, clash),
            Err(GraphError::IdCollision { .. })
        ));
    }

    #[test]
    fn construction_is_deterministic() {
        let g_in = grid(&[&[1, 0, 2], &[1, 0, 0], &[0, 3, 3]]);
        let g_out = grid(&[&[4, 4], &[0, 4]]);
        let a = build_node_lists(&g_in, Some(&g_out), ObjectPolicy::SameColor4).unwrap();
        let b = build_node_lists(&g_in, Some(&g_out), ObjectPolicy::SameColor4).unwrap();
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.membership_edges, b.membership_edges);
    }
}
