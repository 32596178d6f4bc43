//! Static R-tree over bounding boxes, bulk-loaded with Sort-Tile-Recursive
//! packing.

use crate::geo::{bbox_union, BoundingBox};

const NODE_CAPACITY: usize = 16;

#[derive(Debug, Clone)]
struct Node {
    bbox: BoundingBox,
    /// First child: an index into `items` for leaves, into `nodes` otherwise.
    start: usize,
    len: usize,
    leaf: bool,
}

#[derive(Debug, Clone)]
pub struct SpatialIndex {
    items: Vec<(BoundingBox, usize)>,
    nodes: Vec<Node>,
    root: Option<usize>,
}

fn hull<'a>(boxes: impl Iterator<Item = &'a BoundingBox>) -> BoundingBox {
    boxes
        .copied()
        .reduce(|a, b| bbox_union(&a, &b))
        .expect("non-empty group")
}

/// Closed-interval overlap; a conservative filter for internal nodes.
fn closed_overlap(a: &BoundingBox, b: &BoundingBox) -> bool {
    a.minx <= b.maxx && b.minx <= a.maxx && a.miny <= b.maxy && b.miny <= a.maxy && a.mint <= b.maxt && b.mint <= a.maxt
}

/// Order `v` into STR tiles: vertical slices by centre x, each sorted by centre y.
fn str_order<T>(v: &mut [T], key: impl Fn(&T) -> &BoundingBox) {
    let n = v.len();
    let leaves = n.div_ceil(NODE_CAPACITY);
    let slices = (leaves as f64).sqrt().ceil().max(1.0) as usize;
    let per_slice = slices * NODE_CAPACITY;
    v.sort_by(|a, b| key(a).center().0.total_cmp(&key(b).center().0));
    for chunk in v.chunks_mut(per_slice) {
        chunk.sort_by(|a, b| key(a).center().1.total_cmp(&key(b).center().1));
    }
}

impl SpatialIndex {
    /// Bulk-load `(box, id)` entries.
    pub fn new(mut items: Vec<(BoundingBox, usize)>) -> Self {
        if items.is_empty() {
            return SpatialIndex {
                items,
                nodes: Vec::new(),
                root: None,
            };
        }
        str_order(&mut items, |e| &e.0);
        let mut nodes = Vec::new();
        let mut level: Vec<Node> = items
            .chunks(NODE_CAPACITY)
            .enumerate()
            .map(|(i, g)| Node {
                bbox: hull(g.iter().map(|e| &e.0)),
                start: i * NODE_CAPACITY,
                len: g.len(),
                leaf: true,
            })
            .collect();
        loop {
            if level.len() == 1 {
                nodes.push(level.pop().expect("one node"));
                break;
            }
            str_order(&mut level, |n| &n.bbox);
            let base = nodes.len();
            let parents = level
                .chunks(NODE_CAPACITY)
                .enumerate()
                .map(|(i, g)| Node {
                    bbox: hull(g.iter().map(|n| &n.bbox)),
                    start: base + i * NODE_CAPACITY,
                    len: g.len(),
                    leaf: false,
                })
                .collect();
            nodes.append(&mut level);
            level = parents;
        }
        let root = Some(nodes.len() - 1);
        SpatialIndex { items, nodes, root }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Hull of every entry.
    pub fn bounds(&self) -> Option<BoundingBox> {
        self.root.map(|r| self.nodes[r].bbox)
    }

    /// Ids of entries whose boxes intersect `q`, ascending.
    pub fn query(&self, q: &BoundingBox) -> Vec<usize> {
        let mut out = Vec::new();
        let Some(root) = self.root else { return out };
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            let n = &self.nodes[i];
            if !closed_overlap(&n.bbox, q) {
                continue;
            }
            if n.leaf {
                out.extend(
                    self.items[n.start..n.start + n.len]
                        .iter()
                        .filter(|(b, _)| b.intersects(q))
                        .map(|(_, id)| *id),
                );
            } else {
                stack.extend(n.start..n.start + n.len);
            }
        }
        out.sort_unstable();
        out
    }
}
