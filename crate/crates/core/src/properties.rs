//! Property predicate registry and edge generation.
//!
//! Each property is a pure predicate over one or two nodes. Pairwise
//! properties draw an edge between two nodes that share the property,
//! unary properties draw an edge from the node to its grid's Gnode, and
//! containment properties draw a directed edge. The full registry holds
//! 22 properties; a configuration file can enable a subset for ablations.

use std::collections::HashMap;

use crate::graph::{
    build_node_lists, Coordinate, Edge, EdgeLabel, GraphError, GridSide, KnowledgeGraph, NodeId,
    NodeLayer, NodeList, ObjectPolicy, Onode,
};
use crate::task::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Arity {
    Pairwise,
    Unary,
    Containment,
}

/// Which side combinations a pairwise property applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SideRule {
    SameSide,
    CrossSide,
    Both,
}

/// The property predicates. Declaration order is the canonical registry
/// order used for deterministic edge generation and tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PropertyKind {
    // Pairwise: two nodes share a property value.
    SameColor,
    SameHeight,
    SameWidth,
    SameSize,
    SameShape,
    SamePosition,
    SameCoordinate,
    SameColorset,
    SameObjectCount,
    // Relational.
    Adjacent4,
    Adjacent8,
    HorizontallyAligned,
    VerticallyAligned,
    ContainsBbox,
    InsideBbox,
    Overlaps,
    // Unary: a node has a property on its own side.
    IsLargestObject,
    IsSmallestObject,
    IsUniqueColored,
    IsSquare,
    IsSinglePixel,
    TouchesBorder,
}

/// The full 22-property registry in canonical order.
pub const FULL_REGISTRY: [PropertyKind; 22] = [
    PropertyKind::SameColor,
    PropertyKind::SameHeight,
    PropertyKind::SameWidth,
    PropertyKind::SameSize,
    PropertyKind::SameShape,
    PropertyKind::SamePosition,
    PropertyKind::SameCoordinate,
    PropertyKind::SameColorset,
    PropertyKind::SameObjectCount,
    PropertyKind::Adjacent4,
    PropertyKind::Adjacent8,
    PropertyKind::HorizontallyAligned,
    PropertyKind::VerticallyAligned,
    PropertyKind::ContainsBbox,
    PropertyKind::InsideBbox,
    PropertyKind::Overlaps,
    PropertyKind::IsLargestObject,
    PropertyKind::IsSmallestObject,
    PropertyKind::IsUniqueColored,
    PropertyKind::IsSquare,
    PropertyKind::IsSinglePixel,
    PropertyKind::TouchesBorder,
];

impl PropertyKind {
    pub fn id(self) -> &'static str {
        match self {
            PropertyKind::SameColor => "same_color",
            PropertyKind::SameHeight => "same_height",
            PropertyKind::SameWidth => "same_width",
            PropertyKind::SameSize => "same_size",
            PropertyKind::SameShape => "same_shape",
            PropertyKind::SamePosition => "same_position",
            PropertyKind::SameCoordinate => "same_coordinate",
            PropertyKind::SameColorset => "same_colorset",
            PropertyKind::SameObjectCount => "same_object_count",
            PropertyKind::Adjacent4 => "adjacent_4",
            PropertyKind::Adjacent8 => "adjacent_8",
            PropertyKind::HorizontallyAligned => "horizontally_aligned",
            PropertyKind::VerticallyAligned => "vertically_aligned",
            PropertyKind::ContainsBbox => "contains_bbox",
            PropertyKind::InsideBbox => "inside_bbox",
            PropertyKind::Overlaps => "overlaps",
            PropertyKind::IsLargestObject => "is_largest_object",
            PropertyKind::IsSmallestObject => "is_smallest_object",
            PropertyKind::IsUniqueColored => "is_unique_colored",
            PropertyKind::IsSquare => "is_square",
            PropertyKind::IsSinglePixel => "is_single_pixel",
            PropertyKind::TouchesBorder => "touches_border",
        }
    }

    pub fn from_id(id: &str) -> Option<PropertyKind> {
        FULL_REGISTRY.iter().copied().find(|p| p.id() == id)
    }

    pub fn arity(self) -> Arity {
        match self {
            PropertyKind::ContainsBbox | PropertyKind::InsideBbox => Arity::Containment,
            PropertyKind::IsLargestObject
            | PropertyKind::IsSmallestObject
            | PropertyKind::IsUniqueColored
            | PropertyKind::IsSquare
            | PropertyKind::IsSinglePixel
            | PropertyKind::TouchesBorder => Arity::Unary,
            _ => Arity::Pairwise,
        }
    }

    /// Layers the property pairs within (or, for unary, applies to).
    pub fn applicable_layers(self) -> &'static [NodeLayer] {
        match self {
            PropertyKind::SameCoordinate => &[NodeLayer::Pnode],
            PropertyKind::Adjacent4 | PropertyKind::Adjacent8 => {
                &[NodeLayer::Pnode, NodeLayer::Onode]
            }
            PropertyKind::SameColor
            | PropertyKind::SameShape
            | PropertyKind::SamePosition
            | PropertyKind::Overlaps
            | PropertyKind::HorizontallyAligned
            | PropertyKind::VerticallyAligned
            | PropertyKind::ContainsBbox
            | PropertyKind::InsideBbox
            | PropertyKind::IsLargestObject
            | PropertyKind::IsSmallestObject
            | PropertyKind::IsUniqueColored
            | PropertyKind::IsSquare
            | PropertyKind::IsSinglePixel
            | PropertyKind::TouchesBorder => &[NodeLayer::Onode],
            PropertyKind::SameHeight
            | PropertyKind::SameWidth
            | PropertyKind::SameSize
            | PropertyKind::SameColorset => &[NodeLayer::Onode, NodeLayer::Gnode],
            PropertyKind::SameObjectCount => &[NodeLayer::Gnode],
        }
    }

    pub fn side_rule(self) -> SideRule {
        match self {
            PropertyKind::SamePosition | PropertyKind::SameCoordinate | PropertyKind::Overlaps => {
                SideRule::CrossSide
            }
            PropertyKind::Adjacent4
            | PropertyKind::Adjacent8
            | PropertyKind::HorizontallyAligned
            | PropertyKind::VerticallyAligned
            | PropertyKind::ContainsBbox
            | PropertyKind::InsideBbox => SideRule::SameSide,
            _ => SideRule::Both,
        }
    }
}

/// All edges one property contributes to a graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeBatch {
    pub property: PropertyKind,
    pub edges: Vec<Edge>,
}

/// Per-side facts needed by the unary predicates.
struct SideContext {
    gnode: NodeId,
    grid_height: usize,
    grid_width: usize,
    max_onode_size: usize,
    min_onode_size: usize,
    colorset_counts: HashMap<u64, usize>,
}

fn colorset_key(o: &Onode) -> u64 {
    o.colors.to_vec().iter().fold(0u64, |acc, &c| acc | (1 << c))
}

fn side_context(list: &NodeList, side: GridSide) -> Option<SideContext> {
    let gnode = list.gnode(side)?;
    let mut max_onode_size = 0;
    let mut min_onode_size = usize::MAX;
    let mut colorset_counts = HashMap::new();
    for o in list.onodes(side) {
        max_onode_size = max_onode_size.max(o.size());
        min_onode_size = min_onode_size.min(o.size());
        *colorset_counts.entry(colorset_key(o)).or_insert(0) += 1;
    }
    Some(SideContext {
        gnode: gnode.id,
        grid_height: gnode.grid.height(),
        grid_width: gnode.grid.width(),
        max_onode_size,
        min_onode_size,
        colorset_counts,
    })
}

fn pixels_contain(o: &Onode, coord: Coordinate) -> bool {
    o.pixels.binary_search(&coord).is_ok()
}

fn onodes_adjacent(a: &Onode, b: &Onode, eight: bool) -> bool {
    let (small, big) = if a.size() <= b.size() { (a, b) } else { (b, a) };
    for &p in &small.pixels {
        let deltas: &[(isize, isize)] = if eight {
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
            if nr < 0 || nc < 0 {
                continue;
            }
            if pixels_contain(big, Coordinate::new(nr as usize, nc as usize)) {
                return true;
            }
        }
    }
    false
}

fn onodes_overlap(a: &Onode, b: &Onode) -> bool {
    let (small, big) = if a.size() <= b.size() { (a, b) } else { (b, a) };
    small.pixels.iter().any(|&p| pixels_contain(big, p))
}

fn bbox_strictly_contains(outer: &Onode, inner: &Onode) -> bool {
    let o = outer.bbox;
    let i = inner.bbox;
    o != i
        && o.top <= i.top
        && o.left <= i.left
        && o.top + o.height >= i.top + i.height
        && o.left + o.width >= i.left + i.width
}

fn onode_pair_holds(property: PropertyKind, a: &Onode, b: &Onode) -> bool {
    match property {
        PropertyKind::SameColor => a.colors == b.colors && a.colors.len() == 1,
        PropertyKind::SameHeight => a.bbox.height == b.bbox.height,
        PropertyKind::SameWidth => a.bbox.width == b.bbox.width,
        PropertyKind::SameSize => a.size() == b.size(),
        PropertyKind::SameShape => a.shape_mask() == b.shape_mask(),
        PropertyKind::SamePosition => a.bbox.top == b.bbox.top && a.bbox.left == b.bbox.left,
        PropertyKind::SameColorset => a.colors == b.colors,
        PropertyKind::Adjacent4 => onodes_adjacent(a, b, false),
        PropertyKind::Adjacent8 => onodes_adjacent(a, b, true),
        PropertyKind::HorizontallyAligned => a.bbox.top == b.bbox.top,
        PropertyKind::VerticallyAligned => a.bbox.left == b.bbox.left,
        PropertyKind::Overlaps => onodes_overlap(a, b),
        _ => false,
    }
}

fn unary_holds(property: PropertyKind, o: &Onode, ctx: &SideContext) -> bool {
    match property {
        PropertyKind::IsLargestObject => o.size() == ctx.max_onode_size,
        PropertyKind::IsSmallestObject => o.size() == ctx.min_onode_size,
        PropertyKind::IsUniqueColored => ctx.colorset_counts[&colorset_key(o)] == 1,
        PropertyKind::IsSquare => o.bbox.height == o.bbox.width,
        PropertyKind::IsSinglePixel => o.size() == 1,
        PropertyKind::TouchesBorder => o.pixels.iter().any(|p| {
            p.row == 0
                || p.col == 0
                || p.row + 1 == ctx.grid_height
                || p.col + 1 == ctx.grid_width
        }),
        _ => false,
    }
}

fn sides_allowed(rule: SideRule, a: GridSide, b: GridSide) -> bool {
    match rule {
        SideRule::SameSide => a == b,
        SideRule::CrossSide => a != b,
        SideRule::Both => true,
    }
}

/// Generate every edge one property contributes, deterministically.
///
/// Pairwise properties emit one edge per unordered satisfying pair, with
/// `src < dst`. Containment emits directed edges (`contains_bbox`:
/// container to contained; `inside_bbox`: contained to container). Unary
/// properties emit an edge from the node to its side's Gnode.
pub fn make_edge_list(list: &NodeList, property: PropertyKind) -> EdgeBatch {
    let mut edges = Vec::new();
    let label = EdgeLabel::Property(property);
    let layers = property.applicable_layers();
    let rule = property.side_rule();
    let input_ctx = side_context(list, GridSide::Input);
    let output_ctx = side_context(list, GridSide::Output);

    match property.arity() {
        Arity::Unary => {
            for (o, ctx) in list
                .onodes(GridSide::Input)
                .filter_map(|o| input_ctx.as_ref().map(|c| (o, c)))
                .chain(
                    list.onodes(GridSide::Output)
                        .filter_map(|o| output_ctx.as_ref().map(|c| (o, c))),
                )
            {
                if unary_holds(property, o, ctx) {
                    edges.push(Edge {
                        src: o.id,
                        dst: ctx.gnode,
                        label,
                    });
                }
            }
        }
        Arity::Containment => {
            for side in [GridSide::Input, GridSide::Output] {
                let onodes: Vec<&Onode> = list.onodes(side).collect();
                for a in &onodes {
                    for b in &onodes {
                        if a.id == b.id {
                            continue;
                        }
                        let holds = match property {
                            PropertyKind::ContainsBbox => bbox_strictly_contains(a, b),
                            PropertyKind::InsideBbox => bbox_strictly_contains(b, a),
                            _ => false,
                        };
                        if holds {
                            edges.push(Edge {
                                src: a.id,
                                dst: b.id,
                                label,
                            });
                        }
                    }
                }
            }
        }
        Arity::Pairwise => {
            if layers.contains(&NodeLayer::Pnode) {
                pnode_layer_edges(list, property, &mut edges);
            }
            if layers.contains(&NodeLayer::Onode) {
                let onodes: Vec<&Onode> = list
                    .onodes(GridSide::Input)
                    .chain(list.onodes(GridSide::Output))
                    .collect();
                for (i, a) in onodes.iter().enumerate() {
                    for b in onodes.iter().skip(i + 1) {
                        if sides_allowed(rule, a.side, b.side)
                            && onode_pair_holds(property, a, b)
                        {
                            edges.push(Edge {
                                src: a.id.min(b.id),
                                dst: a.id.max(b.id),
                                label,
                            });
                        }
                    }
                }
            }
            if layers.contains(&NodeLayer::Gnode) {
                if let (Some(gi), Some(go)) = (
                    list.gnode(GridSide::Input),
                    list.gnode(GridSide::Output),
                ) {
                    let holds = match property {
                        PropertyKind::SameHeight => gi.grid.height() == go.grid.height(),
                        PropertyKind::SameWidth => gi.grid.width() == go.grid.width(),
                        PropertyKind::SameSize => {
                            gi.grid.height() * gi.grid.width()
                                == go.grid.height() * go.grid.width()
                        }
                        PropertyKind::SameColorset => gi.grid.palette() == go.grid.palette(),
                        PropertyKind::SameObjectCount => {
                            gi.onode_ids.len() == go.onode_ids.len()
                        }
                        _ => false,
                    };
                    if holds {
                        edges.push(Edge {
                            src: gi.id.min(go.id),
                            dst: gi.id.max(go.id),
                            label,
                        });
                    }
                }
            }
        }
    }
    edges.sort();
    edges.dedup();
    EdgeBatch { property, edges }
}

/// Pnode-layer pairwise properties, computed by direct neighborhood scans
/// rather than the quadratic pair loop.
fn pnode_layer_edges(list: &NodeList, property: PropertyKind, edges: &mut Vec<Edge>) {
    let label = EdgeLabel::Property(property);
    match property {
        PropertyKind::Adjacent4 | PropertyKind::Adjacent8 => {
            let diagonal = property == PropertyKind::Adjacent8;
            for side in [GridSide::Input, GridSide::Output] {
                let Some(gnode) = list.gnode(side) else { continue };
                let (h, w) = (gnode.grid.height(), gnode.grid.width());
                let id_at = |r: usize, c: usize| gnode.pnode_ids[r * w + c];
                for r in 0..h {
                    for c in 0..w {
                        // Emit toward higher scan positions only; each
                        // unordered pair appears once.
                        if c + 1 < w {
                            edges.push(Edge {
                                src: id_at(r, c),
                                dst: id_at(r, c + 1),
                                label,
                            });
                        }
                        if r + 1 < h {
                            edges.push(Edge {
                                src: id_at(r, c),
                                dst: id_at(r + 1, c),
                                label,
                            });
                            if diagonal {
                                if c + 1 < w {
                                    edges.push(Edge {
                                        src: id_at(r, c),
                                        dst: id_at(r + 1, c + 1),
                                        label,
                                    });
                                }
                                if c > 0 {
                                    edges.push(Edge {
                                        src: id_at(r, c),
                                        dst: id_at(r + 1, c - 1),
                                        label,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        PropertyKind::SameCoordinate => {
            let (Some(gi), Some(go)) = (
                list.gnode(GridSide::Input),
                list.gnode(GridSide::Output),
            ) else {
                return;
            };
            let (hi, wi) = (gi.grid.height(), gi.grid.width());
            let (ho, wo) = (go.grid.height(), go.grid.width());
            for r in 0..hi.min(ho) {
                for c in 0..wi.min(wo) {
                    edges.push(Edge {
                        src: gi.pnode_ids[r * wi + c],
                        dst: go.pnode_ids[r * wo + c],
                        label,
                    });
                }
            }
        }
        _ => {}
    }
}

/// Compose node construction with all registered edge batches into a
/// finished immutable graph.
pub fn build_knowledge_graph(
    task_id: &str,
    pair_index: usize,
    input: &Grid,
    output: Option<&Grid>,
    registry: &[PropertyKind],
    policy: ObjectPolicy,
) -> Result<KnowledgeGraph, GraphError> {
    let list = build_node_lists(input, output, policy)?;
    let mut property_edges = Vec::new();
    for &property in registry {
        if output.is_none() && property.side_rule() == SideRule::CrossSide {
            continue;
        }
        property_edges.extend(make_edge_list(&list, property).edges);
    }
    Ok(KnowledgeGraph::from_parts(
        task_id.to_string(),
        pair_index,
        list,
        property_edges,
    ))
}

/// Parse a registry configuration: one property id per line, `#` comments.
pub fn parse_registry(text: &str) -> Result<Vec<PropertyKind>, String> {
    let mut registry = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let kind = PropertyKind::from_id(line)
            .ok_or_else(|| format!("line {}: unknown property id '{line}'", lineno + 1))?;
        if !registry.contains(&kind) {
            registry.push(kind);
        }
    }
    if registry.is_empty() {
        return Err("registry configuration enables no properties".into());
    }
    Ok(registry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Node;

    fn grid(rows: &[&[i64]]) -> Grid {
        let rows: Vec<Vec<i64>> = rows.iter().map(|r| r.to_vec()).collect();
        Grid::from_rows(&rows, "test").unwrap()
    }

    fn node_list(input: &Grid, output: Option<&Grid>) -> NodeList {
        build_node_lists(input, output, ObjectPolicy::SameColor4).unwrap()
    }

    #[test]
    fn registry_has_exactly_22_properties() {
        assert_eq!(FULL_REGISTRY.len(), 22);
        let mut ids: Vec<&str> = FULL_REGISTRY.iter().map(|p| p.id()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 22);
        for p in FULL_REGISTRY {
            assert_eq!(PropertyKind::from_id(p.id()), Some(p));
        }
    }

    #[test]
    fn same_coordinate_matches_positions_across_grids() {
        let g = grid(&[&[1, 2], &[3, 4]]);
        let list = node_list(&g, Some(&g));
        let batch = make_edge_list(&list, PropertyKind::SameCoordinate);
        assert_eq!(batch.edges.len(), 4);
        for e in &batch.edges {
            let (Node::P(a), Node::P(b)) = (
                &list.nodes[e.src.0 as usize],
                &list.nodes[e.dst.0 as usize],
            ) else {
                panic!("same_coordinate must connect Pnodes");
            };
            assert_eq!(a.coord, b.coord);
            assert_ne!(a.side, b.side);
        }
    }

    #[test]
    fn adjacent_4_on_two_pixel_strip() {
        let g = grid(&[&[1, 1]]);
        let list = node_list(&g, None);
        let batch = make_edge_list(&list, PropertyKind::Adjacent4);
        let pnode_edges: Vec<&Edge> = batch
            .edges
            .iter()
            .filter(|e| {
                matches!(list.nodes[e.src.0 as usize], Node::P(_))
                    && matches!(list.nodes[e.dst.0 as usize], Node::P(_))
            })
            .collect();
        assert_eq!(pnode_edges.len(), 1);
    }

    #[test]
    fn largest_object_edges_follow_brute_force_max() {
        // Sizes 4, 2, 1: exactly one largest.
        let g = grid(&[
            &[1, 1, 0, 2],
            &[1, 1, 0, 2],
            &[0, 0, 0, 0],
            &[3, 0, 0, 0],
        ]);
        let list = node_list(&g, None);
        let sizes: Vec<usize> = list.onodes(GridSide::Input).map(|o| o.size()).collect();
        let max = *sizes.iter().max().unwrap();
        let expect = sizes.iter().filter(|&&s| s == max).count();
        assert_eq!(expect, 1);
        let batch = make_edge_list(&list, PropertyKind::IsLargestObject);
        assert_eq!(batch.edges.len(), 1);
        let largest = list
            .onodes(GridSide::Input)
            .max_by_key(|o| o.size())
            .unwrap();
        assert_eq!(batch.edges[0].src, largest.id);
        assert_eq!(batch.edges[0].dst, list.gnode(GridSide::Input).unwrap().id);

        // Two tied largest objects: one edge each.
        let tie = grid(&[&[1, 1, 0], &[0, 0, 0], &[2, 2, 0]]);
        let list = node_list(&tie, None);
        let batch = make_edge_list(&list, PropertyKind::IsLargestObject);
        assert_eq!(batch.edges.len(), 2);
    }

    #[test]
    fn full_pair_graph_has_expected_node_counts() {
        let input = grid(&[&[0, 0], &[0, 3]]);
        let output = grid(&[&[7]]);
        let kg = build_knowledge_graph(
            "t",
            0,
            &input,
            Some(&output),
            &FULL_REGISTRY,
            ObjectPolicy::SameColor4,
        )
        .unwrap();
        let count = |layer: NodeLayer| kg.nodes().iter().filter(|n| n.layer() == layer).count();
        assert_eq!(count(NodeLayer::Pnode), 5);
        assert_eq!(count(NodeLayer::Onode), 2);
        assert_eq!(count(NodeLayer::Gnode), 2);
        assert_eq!(count(NodeLayer::Vnode), 1);
        assert!(kg.has_output);
    }

    #[test]
    fn test_only_graph_skips_vnode_and_cross_properties() {
        let input = grid(&[&[0, 0], &[0, 3]]);
        let kg = build_knowledge_graph(
            "t",
            0,
            &input,
            None,
            &FULL_REGISTRY,
            ObjectPolicy::SameColor4,
        )
        .unwrap();
        assert!(!kg.has_output);
        assert_eq!(kg.vnode(), None);
        assert!(kg.edges().iter().all(|e| {
            e.label != EdgeLabel::Property(PropertyKind::SameCoordinate)
                && e.label != EdgeLabel::Property(PropertyKind::SamePosition)
                && e.label != EdgeLabel::Property(PropertyKind::Overlaps)
        }));
    }

    #[test]
    fn edge_generation_is_deterministic() {
        let input = grid(&[&[1, 0, 2], &[1, 0, 2], &[0, 5, 0]]);
        let output = grid(&[&[2, 2], &[1, 0]]);
        let a = build_knowledge_graph(
            "t",
            0,
            &input,
            Some(&output),
            &FULL_REGISTRY,
            ObjectPolicy::SameColor4,
        )
        .unwrap();
        let b = build_knowledge_graph(
            "t",
            0,
            &input,
            Some(&output),
            &FULL_REGISTRY,
            ObjectPolicy::SameColor4,
        )
        .unwrap();
        assert_eq!(a.edges(), b.edges());
    }

    #[test]
    fn layer_discipline_holds_for_every_edge() {
        let input = grid(&[&[1, 1, 0], &[0, 2, 0], &[3, 0, 3]]);
        let output = grid(&[&[1, 0], &[0, 1]]);
        let kg = build_knowledge_graph(
            "t",
            0,
            &input,
            Some(&output),
            &FULL_REGISTRY,
            ObjectPolicy::SameColor4,
        )
        .unwrap();
        for e in kg.edges() {
            let EdgeLabel::Property(p) = e.label else { continue };
            let src_layer = kg.node(e.src).layer();
            let dst_layer = kg.node(e.dst).layer();
            match p.arity() {
                Arity::Unary => {
                    assert!(p.applicable_layers().contains(&src_layer), "{p:?}");
                    assert_eq!(dst_layer, NodeLayer::Gnode);
                }
                _ => {
                    assert!(p.applicable_layers().contains(&src_layer), "{p:?}");
                    assert!(p.applicable_layers().contains(&dst_layer), "{p:?}");
                }
            }
        }
    }

    #[test]
    fn containment_edges_are_directed_and_strict() {
        // Color-2 ring around a color-5 pixel: ring bbox contains pixel bbox.
        let g = grid(&[&[2, 2, 2], &[2, 5, 2], &[2, 2, 2]]);
        let list = node_list(&g, None);
        let contains = make_edge_list(&list, PropertyKind::ContainsBbox);
        let inside = make_edge_list(&list, PropertyKind::InsideBbox);
        assert_eq!(contains.edges.len(), 1);
        assert_eq!(inside.edges.len(), 1);
        assert_eq!(contains.edges[0].src, inside.edges[0].dst);
        assert_eq!(contains.edges[0].dst, inside.edges[0].src);
    }

    #[test]
    fn registry_config_round_trip() {
        let text = "# dimensions only\nsame_height\nsame_width\n\nis_largest_object # keep\n";
        let registry = parse_registry(text).unwrap();
        assert_eq!(
            registry,
            vec![
                PropertyKind::SameHeight,
                PropertyKind::SameWidth,
                PropertyKind::IsLargestObject
            ]
        );
        assert!(parse_registry("no_such_property\n").is_err());
        assert!(parse_registry("# nothing\n").is_err());
    }
}
