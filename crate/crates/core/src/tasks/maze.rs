//! Partial mazes on a fixed grid: early-stopped Wilson's algorithm,
//! adjacency-list serialization, unique tree paths, and DFS traces with
//! backtracking.
//!
//! Node labels are the grid cell's row-major index, rendered as `[k]`.
//! Length = node count, so the generator stops (truncating the final
//! loop-erased walk) once the requested count is reached exactly.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Instance, TaskError};
use crate::corpus::TaskId;

/// Rectangular grid; cells are labelled row-major 0..rows*cols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub rows: u16,
    pub cols: u16,
}

/// The 8x8 grid used by the experiments (labels fit the `[0]`..`[63]`
/// vocabulary).
pub const GRID_8X8: Grid = Grid { rows: 8, cols: 8 };

impl Grid {
    pub fn cell_count(&self) -> usize {
        self.rows as usize * self.cols as usize
    }

    /// 4-neighbors of a cell, in up/down/left/right order.
    pub fn neighbors(&self, cell: u16) -> Vec<u16> {
        let (r, c) = (cell / self.cols, cell % self.cols);
        let mut out = Vec::with_capacity(4);
        if r > 0 {
            out.push(cell - self.cols);
        }
        if r + 1 < self.rows {
            out.push(cell + self.cols);
        }
        if c > 0 {
            out.push(cell - 1);
        }
        if c + 1 < self.cols {
            out.push(cell + 1);
        }
        out
    }

    pub fn are_neighbors(&self, a: u16, b: u16) -> bool {
        self.neighbors(a).contains(&b)
    }
}

/// A tree over a subset of grid cells plus a start/goal query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MazeGraph {
    pub grid: Grid,
    /// Adjacency lists keyed by node label; neighbor lists sorted.
    pub adj: BTreeMap<u16, Vec<u16>>,
    pub start: u16,
    pub goal: u16,
}

/// DFS trace: segments of node labels. The first segment starts at the
/// start node; each later one starts at the backtrack target; the final
/// segment ends at the goal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DfsTrace {
    pub segments: Vec<Vec<u16>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MazeError {
    /// Path query between nodes not joined in the tree; signals a generator
    /// bug.
    Disconnected,
}

impl core::fmt::Display for MazeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            MazeError::Disconnected => write!(f, "query nodes are not connected"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MazeError {}

impl MazeGraph {
    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.values().map(Vec::len).sum::<usize>() / 2
    }

    pub fn nodes(&self) -> impl Iterator<Item = u16> + '_ {
        self.adj.keys().copied()
    }

    pub fn neighbors(&self, node: u16) -> &[u16] {
        self.adj.get(&node).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn has_edge(&self, a: u16, b: u16) -> bool {
        self.neighbors(a).contains(&b)
    }

    /// Tree invariants plus the grid embedding: every edge joins
    /// 4-neighbors under row-major cell labels.
    pub fn is_valid_tree(&self) -> bool {
        self.is_tree()
            && self
                .edges()
                .iter()
                .all(|&(u, v)| self.grid.are_neighbors(u, v))
    }

    /// Tree invariants alone: |E| = |V|-1, symmetric adjacency, connected,
    /// start/goal distinct members. (The published worked example uses
    /// illustrative node labels, so it satisfies this but not the grid
    /// embedding.)
    pub fn is_tree(&self) -> bool {
        let n = self.node_count();
        if n < 2 || self.edge_count() != n - 1 {
            return false;
        }
        for (&u, nbrs) in &self.adj {
            for &v in nbrs {
                if !self.has_edge(v, u) {
                    return false;
                }
            }
        }
        if self.start == self.goal
            || !self.adj.contains_key(&self.start)
            || !self.adj.contains_key(&self.goal)
        {
            return false;
        }
        // connectivity by traversal
        let mut seen = BTreeMap::new();
        let mut stack = vec![self.start];
        seen.insert(self.start, ());
        while let Some(u) = stack.pop() {
            for &v in self.neighbors(u) {
                if seen.insert(v, ()).is_none() {
                    stack.push(v);
                }
            }
        }
        seen.len() == n
    }

    /// Canonical sorted edge list (a < b).
    pub fn edges(&self) -> Vec<(u16, u16)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (&u, nbrs) in &self.adj {
            for &v in nbrs {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }
}

fn add_edge(adj: &mut BTreeMap<u16, Vec<u16>>, a: u16, b: u16) {
    adj.entry(a).or_default().push(b);
    adj.entry(b).or_default().push(a);
}

/// Early-stopped Wilson's algorithm: loop-erased random walks from uniform
/// unvisited cells, attached to the growing tree until `num_nodes` cells are
/// in it. If the final walk would overshoot, only its tree-adjacent suffix
/// is kept so the count is exact. Running to the full cell count yields a
/// uniform spanning tree.
pub fn generate_partial_maze(grid: Grid, num_nodes: usize, rng: &mut ChaCha8Rng) -> MazeGraph {
    let total = grid.cell_count();
    assert!(
        (2..=total).contains(&num_nodes),
        "node count {num_nodes} outside 2..={total}"
    );

    let mut in_tree = vec![false; total];
    let mut next = vec![u16::MAX; total];
    let mut adj: BTreeMap<u16, Vec<u16>> = BTreeMap::new();

    let root = rng.random_range(0..total) as u16;
    in_tree[root as usize] = true;
    let mut count = 1usize;

    while count < num_nodes {
        let mut free: Vec<u16> = (0..total as u16).filter(|&c| !in_tree[c as usize]).collect();
        free.shuffle(rng);
        let walk_start = free[0];

        // random walk, remembering only the latest exit per cell (implicit
        // loop erasure)
        let mut u = walk_start;
        while !in_tree[u as usize] {
            let nbrs = grid.neighbors(u);
            let v = nbrs[rng.random_range(0..nbrs.len())];
            next[u as usize] = v;
            u = v;
        }

        // retrace the loop-erased path walk_start -> ... -> tree
        let mut path = Vec::new();
        let mut u = walk_start;
        while !in_tree[u as usize] {
            path.push(u);
            u = next[u as usize];
        }
        let hit = u; // first tree node on the path

        let room = num_nodes - count;
        let keep = path.len().min(room);
        // keep the suffix adjacent to the tree: path[len-keep ..]
        let kept = &path[path.len() - keep..];
        for (i, &node) in kept.iter().enumerate() {
            in_tree[node as usize] = true;
            let link = if i + 1 < kept.len() { kept[i + 1] } else { hit };
            add_edge(&mut adj, node, link);
        }
        count += keep;
    }

    // ensure the root appears even in the degenerate 2-node case
    debug_assert!(adj.contains_key(&root));
    for nbrs in adj.values_mut() {
        nbrs.sort_unstable();
    }

    let nodes: Vec<u16> = adj.keys().copied().collect();
    let si = rng.random_range(0..nodes.len());
    let mut gi = rng.random_range(0..nodes.len() - 1);
    if gi >= si {
        gi += 1;
    }
    MazeGraph {
        grid,
        adj,
        start: nodes[si],
        goal: nodes[gi],
    }
}

fn node_tok(label: u16) -> String {
    alloc::format!("[{label}]")
}

/// Serialization with explicit entry and neighbor orders (the rng-shuffled
/// variant is [`serialize_instance`]): `"[a]:[b][c], ... ?[start]>[goal]?"`.
pub fn serialize_with_orders(
    g: &MazeGraph,
    node_order: &[u16],
    neighbor_order: &BTreeMap<u16, Vec<u16>>,
) -> String {
    let mut out = String::new();
    for (i, &node) in node_order.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&node_tok(node));
        out.push(':');
        for &nbr in &neighbor_order[&node] {
            out.push_str(&node_tok(nbr));
        }
    }
    out.push_str(" ?");
    out.push_str(&node_tok(g.start));
    out.push('>');
    out.push_str(&node_tok(g.goal));
    out.push('?');
    out
}

/// Adjacency-list serialization with per-instance shuffled entry and
/// neighbor orders.
pub fn serialize_instance(g: &MazeGraph, rng: &mut ChaCha8Rng) -> String {
    let mut node_order: Vec<u16> = g.nodes().collect();
    node_order.shuffle(rng);
    let mut neighbor_order = BTreeMap::new();
    for &node in &node_order {
        let mut nbrs = g.neighbors(node).to_vec();
        nbrs.shuffle(rng);
        neighbor_order.insert(node, nbrs);
    }
    serialize_with_orders(g, &node_order, &neighbor_order)
}

/// Parses a serialized instance back into a graph (neighbor lists
/// re-sorted). Used as the round-trip oracle and by semantic evaluation.
pub fn parse_instance(grid: Grid, text: &str) -> Option<MazeGraph> {
    let (entries, query) = text.split_once(" ?")?;
    let query = query.strip_suffix('?')?;
    let (s, g) = query.split_once('>')?;
    let parse_label = |t: &str| -> Option<u16> {
        t.strip_prefix('[')?.strip_suffix(']')?.parse().ok()
    };
    let start = parse_label(s)?;
    let goal = parse_label(g)?;

    let mut adj: BTreeMap<u16, Vec<u16>> = BTreeMap::new();
    for entry in entries.split(", ") {
        let (node, nbrs) = entry.split_once(':')?;
        let node = parse_label(node)?;
        let mut list = Vec::new();
        let mut rest = nbrs;
        while !rest.is_empty() {
            let close = rest.find(']')?;
            list.push(parse_label(&rest[..=close])?);
            rest = &rest[close + 1..];
        }
        adj.insert(node, list);
    }
    // symmetry check, then canonical sort
    for (&u, nbrs) in &adj {
        for &v in nbrs {
            if !adj.get(&v)?.contains(&u) {
                return None;
            }
        }
    }
    for nbrs in adj.values_mut() {
        nbrs.sort_unstable();
    }
    Some(MazeGraph {
        grid,
        adj,
        start,
        goal,
    })
}

/// The unique simple path between two nodes of the tree.
pub fn tree_shortest_path(g: &MazeGraph, start: u16, goal: u16) -> Result<Vec<u16>, MazeError> {
    let mut parent: BTreeMap<u16, u16> = BTreeMap::new();
    let mut stack = vec![start];
    parent.insert(start, start);
    while let Some(u) = stack.pop() {
        if u == goal {
            break;
        }
        for &v in g.neighbors(u) {
            if !parent.contains_key(&v) {
                parent.insert(v, u);
                stack.push(v);
            }
        }
    }
    if !parent.contains_key(&goal) {
        return Err(MazeError::Disconnected);
    }
    let mut path = vec![goal];
    let mut u = goal;
    while u != start {
        u = parent[&u];
        path.push(u);
    }
    path.reverse();
    Ok(path)
}

pub fn render_path(path: &[u16]) -> String {
    path.iter().map(|&n| node_tok(n)).collect()
}

/// Depth-first search with rng-shuffled neighbor expansion, recorded as
/// backtracking segments. Each segment runs from a branch node through newly
/// visited nodes until a dead end; the search stops at the goal.
pub fn dfs_trace(g: &MazeGraph, start: u16, goal: u16, rng: &mut ChaCha8Rng) -> DfsTrace {
    debug_assert_ne!(start, goal);
    let mut order: BTreeMap<u16, Vec<u16>> = BTreeMap::new();
    for node in g.nodes() {
        let mut nbrs = g.neighbors(node).to_vec();
        nbrs.shuffle(rng);
        order.insert(node, nbrs);
    }

    let mut visited: BTreeMap<u16, ()> = BTreeMap::new();
    visited.insert(start, ());
    let mut stack = vec![start];
    let mut segments: Vec<Vec<u16>> = Vec::new();
    let mut segment = vec![start];

    loop {
        let cur = *stack.last().expect("goal is reachable in a tree");
        let next = order[&cur]
            .iter()
            .copied()
            .find(|v| !visited.contains_key(v));
        match next {
            Some(v) => {
                visited.insert(v, ());
                segment.push(v);
                stack.push(v);
                if v == goal {
                    segments.push(segment);
                    return DfsTrace { segments };
                }
            }
            None => {
                // dead end: close the segment and backtrack to the deepest
                // stack node with an unvisited neighbor
                segments.push(core::mem::take(&mut segment));
                loop {
                    stack.pop();
                    let top = *stack.last().expect("goal is reachable in a tree");
                    if order[&top].iter().any(|v| !visited.contains_key(v)) {
                        segment = vec![top];
                        break;
                    }
                }
            }
        }
    }
}

pub fn render_trace(trace: &DfsTrace) -> String {
    let mut out = String::new();
    for (i, seg) in trace.segments.iter().enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        out.push_str(&render_path(seg));
    }
    out
}

/// Parses `"[a][b]; [c][d]"` back into segments. None on malformed text.
pub fn parse_trace(text: &str) -> Option<DfsTrace> {
    let mut segments = Vec::new();
    for part in text.split("; ") {
        let mut seg = Vec::new();
        let mut rest = part;
        if rest.is_empty() {
            return None;
        }
        while !rest.is_empty() {
            let close = rest.find(']')?;
            let label = rest[..=close].strip_prefix('[')?.strip_suffix(']')?;
            seg.push(label.parse().ok()?);
            rest = &rest[close + 1..];
        }
        segments.push(seg);
    }
    Some(DfsTrace { segments })
}

/// True iff the trace is a depth-first traversal of `g` from start that
/// stops at goal, under SOME legal neighbor ordering.
///
/// Simulates the search: within a segment every hop must reach an unvisited
/// tree neighbor; a segment may only end at a dead end (or at the goal, for
/// the final segment); each backtrack must land on the deepest stack node
/// that still has an unvisited neighbor.
pub fn validate_dfs_trace(g: &MazeGraph, start: u16, goal: u16, trace: &DfsTrace) -> bool {
    if trace.segments.is_empty() || start == goal {
        return false;
    }
    let mut visited: BTreeMap<u16, ()> = BTreeMap::new();
    visited.insert(start, ());
    let mut stack = vec![start];

    let last_seg = trace.segments.len() - 1;
    for (si, seg) in trace.segments.iter().enumerate() {
        // segment head: start node, or the unique backtrack target
        if si == 0 {
            if seg.first() != Some(&start) {
                return false;
            }
        } else {
            loop {
                match stack.last() {
                    None => return false,
                    Some(&top) => {
                        if g.neighbors(top).iter().any(|v| !visited.contains_key(v)) {
                            break;
                        }
                        stack.pop();
                    }
                }
            }
            if seg.first() != Some(stack.last().unwrap()) {
                return false;
            }
        }
        for win in seg.windows(2) {
            let (u, v) = (win[0], win[1]);
            if !g.has_edge(u, v) || visited.contains_key(&v) {
                return false;
            }
            visited.insert(v, ());
            stack.push(v);
        }
        let tail = *seg.last().unwrap();
        if tail == goal {
            // the search stops here; nothing may follow
            return si == last_seg;
        }
        // non-goal segment end must be a dead end
        if g.neighbors(tail).iter().any(|v| !visited.contains_key(v)) {
            return false;
        }
    }
    false // never reached the goal
}

/// Draws a maze instance: partial maze with `length` nodes on the 8x8 grid,
/// shuffled serialization, and the task's answer string.
pub fn sample_maze_instance(
    task: TaskId,
    length: u32,
    rng: &mut ChaCha8Rng,
) -> Result<Instance, TaskError> {
    if !(2..=GRID_8X8.cell_count() as u32).contains(&length) {
        return Err(TaskError::BadLength { task, length });
    }
    let g = generate_partial_maze(GRID_8X8, length as usize, rng);
    let input = serialize_instance(&g, rng);
    let target = match task {
        TaskId::ShortestPath => {
            let path = tree_shortest_path(&g, g.start, g.goal).expect("tree is connected");
            render_path(&path)
        }
        TaskId::DfsTrace => render_trace(&dfs_trace(&g, g.start, g.goal, rng)),
        _ => unreachable!("not a maze task"),
    };
    Ok(Instance {
        task,
        length,
        input,
        target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    /// The 16-node worked example graph.
    pub(crate) fn example_graph() -> MazeGraph {
        let edges = [
            (0, 10),
            (15, 4),
            (15, 5),
            (11, 1),
            (11, 3),
            (11, 5),
            (4, 2),
            (14, 9),
            (14, 5),
            (10, 9),
            (10, 13),
            (7, 5),
            (13, 8),
            (12, 8),
            (12, 6),
        ];
        let mut adj: BTreeMap<u16, Vec<u16>> = BTreeMap::new();
        for (a, b) in edges {
            add_edge(&mut adj, a, b);
        }
        for nbrs in adj.values_mut() {
            nbrs.sort_unstable();
        }
        MazeGraph {
            grid: Grid { rows: 4, cols: 4 },
            adj,
            start: 12,
            goal: 2,
        }
    }

    #[test]
    fn example_graph_is_a_tree() {
        let g = example_graph();
        assert_eq!(g.node_count(), 16);
        assert_eq!(g.edge_count(), 15);
        assert!(g.is_tree());
    }

    #[test]
    fn example_shortest_path() {
        let g = example_graph();
        let path = tree_shortest_path(&g, 12, 2).unwrap();
        assert_eq!(render_path(&path), "[12][8][13][10][9][14][5][15][4][2]");
        // tree symmetry
        let rev = tree_shortest_path(&g, 2, 12).unwrap();
        assert_eq!(rev.iter().rev().copied().collect::<Vec<_>>(), path);
    }

    #[test]
    fn example_trace_validates() {
        let g = example_graph();
        let trace =
            parse_trace("[12][6]; [12][8][13][10][9][14][5][11][1]; [11][3]; [5][15][4][2]")
                .unwrap();
        assert!(validate_dfs_trace(&g, 12, 2, &trace));
    }

    #[test]
    fn invalid_traces_rejected() {
        let g = example_graph();
        // hop across a non-edge
        let t = parse_trace("[12][13]").unwrap();
        assert!(!validate_dfs_trace(&g, 12, 2, &t));
        // stops short of goal
        let t = parse_trace("[12][6]").unwrap();
        assert!(!validate_dfs_trace(&g, 12, 2, &t));
        // leaves a branch unexplored before backtracking
        let t = parse_trace("[12][8]; [12][6]").unwrap();
        assert!(!validate_dfs_trace(&g, 12, 2, &t));
        // continues past goal
        let t = parse_trace("[12][8][13][10][9][14][5][15][4][2]; [5][7]").unwrap();
        assert!(!validate_dfs_trace(&g, 12, 2, &t));
        // wrong backtrack target
        let t = parse_trace("[12][6]; [8][13][10][9][14][5][15][4][2]").unwrap();
        assert!(!validate_dfs_trace(&g, 12, 2, &t));
    }

    #[test]
    fn two_node_maze_and_serialization() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = generate_partial_maze(GRID_8X8, 2, &mut rng);
        assert!(g.is_valid_tree());
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);
        let text = serialize_instance(&g, &mut rng);
        let parsed = parse_instance(GRID_8X8, &text).unwrap();
        assert_eq!(parsed.edges(), g.edges());
        assert_eq!(parsed.start, g.start);
        assert_eq!(parsed.goal, g.goal);
    }

    #[test]
    fn full_run_spans_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = generate_partial_maze(GRID_8X8, 64, &mut rng);
        assert_eq!(g.node_count(), 64);
        assert_eq!(g.edge_count(), 63);
        assert!(g.is_valid_tree());
    }

    #[test]
    fn exact_node_counts_across_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2usize, 3, 16, 32, 47, 64] {
            for _ in 0..20 {
                let g = generate_partial_maze(GRID_8X8, n, &mut rng);
                assert_eq!(g.node_count(), n);
                assert!(g.is_valid_tree(), "n={n}");
            }
        }
    }

    #[test]
    fn serialize_parse_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let n = rng.random_range(2..=64);
            let g = generate_partial_maze(GRID_8X8, n, &mut rng);
            let text = serialize_instance(&g, &mut rng);
            let parsed = parse_instance(GRID_8X8, &text).unwrap();
            assert_eq!(parsed.edges(), g.edges());
        }
    }

    #[test]
    fn generated_traces_validate_and_paths_match_bfs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let n = rng.random_range(2..=64);
            let g = generate_partial_maze(GRID_8X8, n, &mut rng);
            let trace = dfs_trace(&g, g.start, g.goal, &mut rng);
            assert!(validate_dfs_trace(&g, g.start, g.goal, &trace));
            let path = tree_shortest_path(&g, g.start, g.goal).unwrap();
            assert_eq!(path.first(), Some(&g.start));
            assert_eq!(path.last(), Some(&g.goal));
        }
    }

    #[test]
    fn adjacent_start_goal_single_segment() {
        // path graph 0-1 on a tiny grid
        let mut adj = BTreeMap::new();
        add_edge(&mut adj, 0, 1);
        let g = MazeGraph {
            grid: Grid { rows: 1, cols: 2 },
            adj,
            start: 0,
            goal: 1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let trace = dfs_trace(&g, 0, 1, &mut rng);
        assert_eq!(render_trace(&trace), "[0][1]");
    }
}
