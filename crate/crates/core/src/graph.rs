//! Four-connected grid graphs and the cached shortest-path distance oracle.
//!
//! Nodes are the passable cells of a grid, numbered in row-major order.
//! Small hand-made gadget graphs (used to reproduce worked examples) go
//! through [`Grid::from_edges`], which lays the nodes out on a single row
//! purely so that they still have printable coordinates.

use std::collections::VecDeque;
use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

/// Index of a passable cell, in `[0, node_count)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Marker used inside distance tables for nodes that cannot reach the target.
pub const UNREACHABLE: u32 = u32::MAX;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MapError {
    #[error("line {line}: {msg}")]
    Header { line: usize, msg: String },
    #[error("line {line}: expected {expected} cells, found {found}")]
    RowLength {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: unknown glyph {glyph:?}")]
    Glyph { line: usize, glyph: char },
    #[error("expected {expected} map rows, found {found}")]
    RowCount { expected: usize, found: usize },
}

/// Exact single-target BFS distances over the whole graph.
#[derive(Clone, Debug)]
pub struct DistanceTable {
    goal: NodeId,
    dist: Vec<u32>,
}

impl DistanceTable {
    fn compute(adj: &[Vec<NodeId>], goal: NodeId) -> Self {
        let mut dist = vec![UNREACHABLE; adj.len()];
        let mut queue = VecDeque::new();
        dist[goal.index()] = 0;
        queue.push_back(goal);
        while let Some(u) = queue.pop_front() {
            let d = dist[u.index()] + 1;
            for &w in &adj[u.index()] {
                if dist[w.index()] == UNREACHABLE {
                    dist[w.index()] = d;
                    queue.push_back(w);
                }
            }
        }
        DistanceTable { goal, dist }
    }

    pub fn goal(&self) -> NodeId {
        self.goal
    }

    /// Distance from `v` to the goal, `None` when unreachable.
    #[inline]
    pub fn get(&self, v: NodeId) -> Option<u32> {
        match self.dist[v.index()] {
            UNREACHABLE => None,
            d => Some(d),
        }
    }

    /// Raw entry; [`UNREACHABLE`] for disconnected nodes.
    #[inline]
    pub fn raw(&self, v: NodeId) -> u32 {
        self.dist[v.index()]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.dist
    }
}

/// An undirected graph over the passable cells of a `width × height` grid.
///
/// Distance tables are built lazily, once per target node, and kept for the
/// lifetime of the grid. The cache is thread-safe.
#[derive(Clone, Debug)]
pub struct Grid {
    width: usize,
    height: usize,
    passable: Vec<bool>,
    cell_to_node: Vec<Option<NodeId>>,
    node_to_cell: Vec<usize>,
    adj: Vec<Vec<NodeId>>,
    tables: Vec<OnceLock<DistanceTable>>,
}

impl Grid {
    /// Builds a grid from a row-major passability mask.
    pub fn from_mask(width: usize, height: usize, passable: Vec<bool>) -> Self {
        assert!(width > 0 && height > 0, "grid must be non-empty");
        assert_eq!(passable.len(), width * height, "mask size mismatch");
        let mut cell_to_node = vec![None; width * height];
        let mut node_to_cell = Vec::new();
        for (cell, &open) in passable.iter().enumerate() {
            if open {
                cell_to_node[cell] = Some(NodeId(node_to_cell.len() as u32));
                node_to_cell.push(cell);
            }
        }
        let mut adj = Vec::with_capacity(node_to_cell.len());
        for &cell in &node_to_cell {
            let (x, y) = (cell % width, cell / width);
            let mut ns = Vec::with_capacity(4);
            // fixed order: up, left, right, down
            if y > 0 {
                ns.extend(cell_to_node[cell - width]);
            }
            if x > 0 {
                ns.extend(cell_to_node[cell - 1]);
            }
            if x + 1 < width {
                ns.extend(cell_to_node[cell + 1]);
            }
            if y + 1 < height {
                ns.extend(cell_to_node[cell + width]);
            }
            adj.push(ns);
        }
        let tables = (0..node_to_cell.len()).map(|_| OnceLock::new()).collect();
        Grid {
            width,
            height,
            passable,
            cell_to_node,
            node_to_cell,
            adj,
            tables,
        }
    }

    /// Obstacle-free `width × height` grid.
    pub fn open(width: usize, height: usize) -> Self {
        Self::from_mask(width, height, vec![true; width * height])
    }

    /// Builds a grid from rows of map glyphs (`.`/`G` passable).
    pub fn from_rows<S: AsRef<str>>(rows: &[S]) -> Result<Self, MapError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().chars().count());
        if width == 0 {
            return Err(MapError::Header {
                line: 1,
                msg: "empty map".into(),
            });
        }
        let mut mask = Vec::with_capacity(width * height);
        for (i, row) in rows.iter().enumerate() {
            parse_row(row.as_ref(), width, i + 1, &mut mask)?;
        }
        Ok(Self::from_mask(width, height, mask))
    }

    /// Generic undirected graph on `n` nodes given as an edge list.
    ///
    /// Intended for small hand-built gadgets in tests; node `i` is placed at
    /// coordinate `(i, 0)`.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            assert!(a < n && b < n && a != b, "bad edge ({a}, {b})");
            if !adj[a].contains(&NodeId(b as u32)) {
                adj[a].push(NodeId(b as u32));
                adj[b].push(NodeId(a as u32));
            }
        }
        for ns in &mut adj {
            ns.sort();
        }
        Grid {
            width: n,
            height: 1,
            passable: vec![true; n],
            cell_to_node: (0..n).map(|i| Some(NodeId(i as u32))).collect(),
            node_to_cell: (0..n).collect(),
            adj,
            tables: (0..n).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn node_count(&self) -> usize {
        self.node_to_cell.len()
    }

    pub fn is_passable(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height && self.passable[y * self.width + x]
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_count() as u32).map(NodeId)
    }

    pub fn node_at(&self, x: usize, y: usize) -> Option<NodeId> {
        if x < self.width && y < self.height {
            self.cell_to_node[y * self.width + x]
        } else {
            None
        }
    }

    /// `(x, y)` cell of a node; `x` is the column.
    pub fn coords(&self, v: NodeId) -> (usize, usize) {
        let cell = self.node_to_cell[v.index()];
        (cell % self.width, cell / self.width)
    }

    /// Passable neighbors of `v`. Never contains `v` itself.
    #[inline]
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.adj[v.index()]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[v.index()].len()
    }

    pub fn are_adjacent(&self, u: NodeId, v: NodeId) -> bool {
        self.adj[u.index()].contains(&v)
    }

    /// Distance table towards `goal`, computed on first use.
    pub fn distance_table(&self, goal: NodeId) -> &DistanceTable {
        self.tables[goal.index()].get_or_init(|| DistanceTable::compute(&self.adj, goal))
    }

    /// Exact shortest-path length ignoring agents; `None` if disconnected.
    pub fn dist(&self, u: NodeId, v: NodeId) -> Option<u32> {
        self.distance_table(v).get(u)
    }

    /// Connected-component label per node.
    pub fn components(&self) -> Vec<u32> {
        let mut label = vec![u32::MAX; self.node_count()];
        let mut next = 0;
        let mut queue = VecDeque::new();
        for s in 0..self.node_count() {
            if label[s] != u32::MAX {
                continue;
            }
            label[s] = next;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for &w in &self.adj[u] {
                    if label[w.index()] == u32::MAX {
                        label[w.index()] = next;
                        queue.push_back(w.index());
                    }
                }
            }
            next += 1;
        }
        label
    }

    /// Serializes back to MovingAI text. Gadget graphs built with
    /// [`Grid::from_edges`] have no faithful map form.
    pub fn to_movingai(&self) -> String {
        let mut out = format!(
            "type octile\nheight {}\nwidth {}\nmap\n",
            self.height, self.width
        );
        for y in 0..self.height {
            for x in 0..self.width {
                out.push(if self.passable[y * self.width + x] { '.' } else { '@' });
            }
            out.push('\n');
        }
        out
    }
}

fn parse_row(row: &str, width: usize, line: usize, mask: &mut Vec<bool>) -> Result<(), MapError> {
    let row = row.trim_end_matches(['\r', '\n']);
    let found = row.chars().count();
    if found != width {
        return Err(MapError::RowLength {
            line,
            expected: width,
            found,
        });
    }
    for glyph in row.chars() {
        mask.push(match glyph {
            '.' | 'G' => true,
            '@' | 'O' | 'T' | 'S' | 'W' => false,
            _ => return Err(MapError::Glyph { line, glyph }),
        });
    }
    Ok(())
}

/// Parses a MovingAI `.map` file.
pub fn parse_map(text: &str) -> Result<Grid, MapError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let mut height = None;
    let mut width = None;
    let mut seen_type = false;
    loop {
        let Some((line, l)) = lines.next() else {
            return Err(MapError::Header {
                line: text.lines().count() + 1,
                msg: "missing `map` line".into(),
            });
        };
        let mut parts = l.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some("type"), Some(_), None) if !seen_type => seen_type = true,
            (Some(key @ ("height" | "width")), Some(value), None) => {
                let v: usize = value.parse().ok().filter(|&v| v > 0).ok_or_else(|| {
                    MapError::Header {
                        line,
                        msg: format!("invalid {key} {value:?}"),
                    }
                })?;
                let slot = if key == "height" { &mut height } else { &mut width };
                if slot.replace(v).is_some() {
                    return Err(MapError::Header {
                        line,
                        msg: format!("duplicate {key}"),
                    });
                }
            }
            (Some("map"), None, None) => break,
            _ => {
                return Err(MapError::Header {
                    line,
                    msg: format!("unexpected header line {l:?}"),
                })
            }
        }
    }
    let missing = |what: &str| MapError::Header {
        line: 1,
        msg: format!("missing {what}"),
    };
    if !seen_type {
        return Err(missing("type"));
    }
    let height = height.ok_or_else(|| missing("height"))?;
    let width = width.ok_or_else(|| missing("width"))?;
    let mut mask = Vec::with_capacity(width * height);
    let mut rows = 0;
    for (line, l) in lines {
        if rows == height {
            if l.trim().is_empty() {
                continue;
            }
            return Err(MapError::RowCount {
                expected: height,
                found: rows + 1,
            });
        }
        parse_row(l, width, line, &mut mask)?;
        rows += 1;
    }
    if rows != height {
        return Err(MapError::RowCount {
            expected: height,
            found: rows,
        });
    }
    Ok(Grid::from_mask(width, height, mask))
}
