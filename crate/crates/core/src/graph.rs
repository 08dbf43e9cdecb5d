//! Embedded arenas and the symmetry machinery behind disorientation.
//!
//! Robots carry no compass and no chirality, so two snapshots that differ by a
//! symmetry of the arena are indistinguishable. Everything a robot may base a
//! decision on is therefore expressed in a canonical frame: the image of the
//! decorated arena under the symmetry that minimizes its serialization.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::text::{records, ParseError, Record};

pub type VertexId = usize;
pub type Color = u8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("vertex `{0}` declared twice")]
    DuplicateVertex(String),
    #[error("vertices `{0}` and `{1}` share coordinates")]
    DuplicateCoordinates(String, String),
    #[error("edge references undeclared vertex `{0}`")]
    UnknownVertex(String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("duplicate edge `{0}`-`{1}`")]
    DuplicateEdge(String, String),
    #[error("graph is disconnected: `{0}` is unreachable from `{1}`")]
    Disconnected(String, String),
    #[error("graph has no vertices")]
    Empty,
}

/// An undirected simple graph whose vertices carry plane coordinates.
///
/// Vertex indices follow the lexicographic order of the vertex names, so the
/// numbering (and every canonical key derived from it) does not depend on the
/// order records appear in a scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedGraph {
    names: Vec<String>,
    coords: Vec<(f64, f64)>,
    adj: Vec<Vec<VertexId>>,
}

impl EmbeddedGraph {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, v: VertexId) -> &str {
        &self.names[v]
    }

    pub fn coords(&self, v: VertexId) -> (f64, f64) {
        self.coords[v]
    }

    pub fn vertex(&self, name: &str) -> Option<VertexId> {
        self.names.binary_search_by(|n| n.as_str().cmp(name)).ok()
    }

    pub fn neighbors(&self, v: VertexId) -> &[VertexId] {
        &self.adj[v]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.adj[v].len()
    }

    pub fn adjacent(&self, a: VertexId, b: VertexId) -> bool {
        self.adj[a].binary_search(&b).is_ok()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> {
        0..self.names.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.adj.iter().enumerate().flat_map(|(a, ns)| ns.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
    }

    /// Degree of every vertex, in index order.
    pub fn degree_sequence(&self) -> Vec<usize> {
        self.adj.iter().map(Vec::len).collect()
    }

    /// Hop distances from `src` to every vertex.
    pub fn distances_from(&self, src: VertexId) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.len()];
        let mut queue = VecDeque::from([src]);
        dist[src] = 0;
        while let Some(v) = queue.pop_front() {
            for &w in &self.adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    fn sq_dist(&self, a: VertexId, b: VertexId) -> f64 {
        let (ax, ay) = self.coords[a];
        let (bx, by) = self.coords[b];
        (ax - bx).powi(2) + (ay - by).powi(2)
    }

    /// Writes the graph section of a scenario file.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        for v in self.vertices() {
            let (x, y) = self.coords[v];
            out.push_str(&format!("vertex {} {} {}\n", self.names[v], x, y));
        }
        for (a, b) in self.edges() {
            out.push_str(&format!("edge {} {}\n", self.names[a], self.names[b]));
        }
        out
    }
}

/// Accumulates `vertex`/`edge` records and validates them into a graph.
#[derive(Debug, Default, Clone)]
pub struct GraphBuilder {
    vertices: Vec<(String, f64, f64)>,
    edges: Vec<(String, String)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex(&mut self, name: &str, x: f64, y: f64) -> &mut Self {
        self.vertices.push((name.to_string(), x, y));
        self
    }

    pub fn edge(&mut self, a: &str, b: &str) -> &mut Self {
        self.edges.push((a.to_string(), b.to_string()));
        self
    }

    /// Consumes a `vertex` or `edge` record. Returns `Ok(false)` for other keywords.
    pub fn accept(&mut self, rec: &Record<'_>) -> Result<bool, ParseError> {
        match rec.keyword() {
            "vertex" => {
                let args = rec.expect_args(3)?;
                let x = args[1].parse::<f64>("x coordinate")?;
                let y = args[2].parse::<f64>("y coordinate")?;
                if !x.is_finite() || !y.is_finite() {
                    return Err(args[1].error("coordinates must be finite"));
                }
                self.vertex(args[0].text, x, y);
                Ok(true)
            }
            "edge" => {
                let args = rec.expect_args(2)?;
                self.edge(args[0].text, args[1].text);
                Ok(true)
            }
            _ => Ok(false),
        }
    }

    pub fn build(&self) -> Result<EmbeddedGraph, GraphError> {
        if self.vertices.is_empty() {
            return Err(GraphError::Empty);
        }
        let mut sorted: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
        for (name, x, y) in &self.vertices {
            if sorted.insert(name.as_str(), (*x, *y)).is_some() {
                return Err(GraphError::DuplicateVertex(name.clone()));
            }
        }
        let names: Vec<String> = sorted.keys().map(|s| s.to_string()).collect();
        let coords: Vec<(f64, f64)> = sorted.values().copied().collect();
        for a in 0..names.len() {
            for b in a + 1..names.len() {
                if coords[a] == coords[b] {
                    return Err(GraphError::DuplicateCoordinates(names[a].clone(), names[b].clone()));
                }
            }
        }
        let index = |name: &str| {
            names.binary_search_by(|n| n.as_str().cmp(name)).map_err(|_| GraphError::UnknownVertex(name.to_string()))
        };
        let mut edge_set = BTreeSet::new();
        for (a, b) in &self.edges {
            let (ia, ib) = (index(a)?, index(b)?);
            if ia == ib {
                return Err(GraphError::SelfLoop(a.clone()));
            }
            if !edge_set.insert((ia.min(ib), ia.max(ib))) {
                return Err(GraphError::DuplicateEdge(a.clone(), b.clone()));
            }
        }
        let mut adj = vec![Vec::new(); names.len()];
        for &(a, b) in &edge_set {
            adj[a].push(b);
            adj[b].push(a);
        }
        for ns in &mut adj {
            ns.sort_unstable();
        }
        let graph = EmbeddedGraph { names, coords, adj };
        let dist = graph.distances_from(0);
        if let Some(v) = dist.iter().position(|&d| d == usize::MAX) {
            return Err(GraphError::Disconnected(graph.names[v].clone(), graph.names[0].clone()));
        }
        Ok(graph)
    }
}

/// Parses a text made only of `vertex <id> <x> <y>` and `edge <id> <id>` records.
pub fn load_graph(text: &str) -> Result<EmbeddedGraph, GraphError> {
    let mut builder = GraphBuilder::new();
    for rec in records(text) {
        if !builder.accept(&rec)? {
            return Err(rec.error(format!("unexpected record `{}` in graph section", rec.keyword())).into());
        }
    }
    builder.build()
}

/// What an observer can tell about one vertex: how many robots stand on it and,
/// when lights are externally visible, the multiset of their colors.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub count: u8,
    pub colors: Vec<Color>,
}

impl Cell {
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

/// Per-vertex observable summary, indexed by vertex.
pub type Decoration = Vec<Cell>;

/// A vertex permutation preserving adjacency and a decoration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symmetry {
    pub permutation: Vec<VertexId>,
    pub isometric: bool,
}

impl Symmetry {
    pub fn identity(n: usize) -> Self {
        Self { permutation: (0..n).collect(), isometric: true }
    }

    pub fn apply(&self, v: VertexId) -> VertexId {
        self.permutation[v]
    }

    pub fn compose(&self, inner: &Symmetry) -> Symmetry {
        Symmetry {
            permutation: inner.permutation.iter().map(|&v| self.permutation[v]).collect(),
            isometric: self.isometric && inner.isometric,
        }
    }

    pub fn inverse(&self) -> Symmetry {
        let mut inv = vec![0; self.permutation.len()];
        for (v, &img) in self.permutation.iter().enumerate() {
            inv[img] = v;
        }
        Symmetry { permutation: inv, isometric: self.isometric }
    }
}

fn is_isometry(g: &EmbeddedGraph, perm: &[VertexId]) -> bool {
    let n = g.len();
    let scale = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).map(|(a, b)| g.sq_dist(a, b)).fold(1.0f64, f64::max);
    let eps = 1e-9 * scale;
    (0..n).all(|a| (a + 1..n).all(|b| (g.sq_dist(a, b) - g.sq_dist(perm[a], perm[b])).abs() <= eps))
}

/// Enumerates adjacency-preserving permutations by backtracking along a BFS
/// order, so each vertex after the first is constrained by an assigned neighbor.
fn search_symmetries(
    g: &EmbeddedGraph,
    deco: Option<&Decoration>,
    fixed: Option<VertexId>,
    isometric_only: bool,
) -> Vec<Symmetry> {
    let n = g.len();
    let root = fixed.unwrap_or(0);
    let dist = g.distances_from(root);
    let mut order: Vec<VertexId> = (0..n).collect();
    order.sort_by_key(|&v| (dist[v], v));
    // parent[i]: an earlier vertex in `order` adjacent to order[i]
    let parent: Vec<Option<VertexId>> =
        order.iter().map(|&v| g.neighbors(v).iter().copied().find(|&w| dist[w] + 1 == dist[v])).collect();

    let same_cell = |a: VertexId, b: VertexId| match deco {
        Some(d) => d[a] == d[b],
        None => true,
    };

    let mut image = vec![usize::MAX; n];
    let mut used = vec![false; n];
    let mut out = Vec::new();

    fn rec(
        i: usize,
        g: &EmbeddedGraph,
        order: &[VertexId],
        parent: &[Option<VertexId>],
        fixed: Option<VertexId>,
        same_cell: &dyn Fn(VertexId, VertexId) -> bool,
        image: &mut Vec<VertexId>,
        used: &mut Vec<bool>,
        out: &mut Vec<Vec<VertexId>>,
    ) {
        if i == order.len() {
            out.push(image.clone());
            return;
        }
        let v = order[i];
        let candidates: Vec<VertexId> = match (i, fixed, parent[i]) {
            (0, Some(f), _) => vec![f],
            (_, _, Some(p)) => g.neighbors(image[p]).to_vec(),
            _ => g.vertices().collect(),
        };
        for c in candidates {
            if used[c] || g.degree(c) != g.degree(v) || !same_cell(v, c) {
                continue;
            }
            let consistent = order[..i].iter().all(|&w| g.adjacent(v, w) == g.adjacent(c, image[w]));
            if !consistent {
                continue;
            }
            image[v] = c;
            used[c] = true;
            rec(i + 1, g, order, parent, fixed, same_cell, image, used, out);
            used[c] = false;
            image[v] = usize::MAX;
        }
    }

    let mut perms = Vec::new();
    rec(0, g, &order, &parent, fixed, &same_cell, &mut image, &mut used, &mut perms);
    for perm in perms {
        let isometric = is_isometry(g, &perm);
        if isometric_only && !isometric {
            continue;
        }
        out.push(Symmetry { permutation: perm, isometric });
    }
    out.sort();
    out
}

/// All automorphisms of `g` (restricted to plane isometries when asked).
pub fn automorphisms(g: &EmbeddedGraph, isometric_only: bool) -> Vec<Symmetry> {
    search_symmetries(g, None, None, isometric_only)
}

/// Decoration-preserving automorphisms that fix `fixed`.
pub fn decorated_symmetries(
    g: &EmbeddedGraph,
    deco: &Decoration,
    fixed: VertexId,
    isometric_only: bool,
) -> Vec<Symmetry> {
    assert_eq!(deco.len(), g.len(), "decoration size mismatch");
    search_symmetries(g, Some(deco), Some(fixed), isometric_only)
}

/// Canonical, equality-comparable summary of a decorated snapshot seen from one vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ViewKey {
    pub observer: VertexId,
    pub cells: Vec<Cell>,
}

impl fmt::Display for ViewKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "o{}", self.observer)?;
        for cell in &self.cells {
            f.write_str("/")?;
            if cell.count == 0 {
                f.write_str("-")?;
                continue;
            }
            write!(f, "{}", cell.count)?;
            if !cell.colors.is_empty() {
                let cs: Vec<String> = cell.colors.iter().map(|c| c.to_string()).collect();
                write!(f, ":{}", cs.join("."))?;
            }
        }
        Ok(())
    }
}

impl FromStr for ViewKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split('/');
        let head = parts.next().unwrap_or_default();
        let observer =
            head.strip_prefix('o').and_then(|n| n.parse().ok()).ok_or_else(|| format!("bad view key head `{head}`"))?;
        let mut cells = Vec::new();
        for part in parts {
            if part == "-" {
                cells.push(Cell::default());
                continue;
            }
            let (count, colors) = match part.split_once(':') {
                Some((c, cols)) => (c, Some(cols)),
                None => (part, None),
            };
            let count = count.parse().map_err(|_| format!("bad multiplicity `{count}`"))?;
            let colors = match colors {
                Some(cols) => cols
                    .split('.')
                    .map(|c| c.parse().map_err(|_| format!("bad color `{c}`")))
                    .collect::<Result<Vec<Color>, _>>()?,
                None => Vec::new(),
            };
            cells.push(Cell { count, colors });
        }
        Ok(ViewKey { observer, cells })
    }
}

fn image_key(sym: &Symmetry, deco: &Decoration, observer: VertexId) -> ViewKey {
    let mut cells = vec![Cell::default(); deco.len()];
    for (v, cell) in deco.iter().enumerate() {
        cells[sym.apply(v)] = cell.clone();
    }
    ViewKey { observer: sym.apply(observer), cells }
}

/// A snapshot expressed in canonical coordinates.
#[derive(Debug, Clone)]
pub struct CanonicalSnapshot {
    pub key: ViewKey,
    /// Maps arena vertices to canonical-frame vertices.
    pub to_frame: Symmetry,
    /// Observer's neighbors grouped into orbits, in actual arena vertices.
    /// Orbits are sorted by their smallest canonical image.
    pub orbits: Vec<Vec<VertexId>>,
}

impl CanonicalSnapshot {
    /// The same orbits, in canonical-frame vertices.
    pub fn frame_orbits(&self) -> Vec<Vec<VertexId>> {
        self.orbits
            .iter()
            .map(|orbit| {
                let mut o: Vec<VertexId> = orbit.iter().map(|&v| self.to_frame.apply(v)).collect();
                o.sort_unstable();
                o
            })
            .collect()
    }
}

/// Which symmetries a disoriented robot cannot break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SymmetryMode {
    /// All graph automorphisms.
    #[default]
    Automorphic,
    /// Only automorphisms realized by an isometry of the embedding.
    Isometric,
}

/// An arena graph together with its (cached) symmetry group.
#[derive(Debug, Clone)]
pub struct Arena {
    graph: EmbeddedGraph,
    mode: SymmetryMode,
    group: Vec<Symmetry>,
}

impl Arena {
    pub fn new(graph: EmbeddedGraph, mode: SymmetryMode) -> Self {
        let group = automorphisms(&graph, mode == SymmetryMode::Isometric);
        Self { graph, mode, group }
    }

    pub fn graph(&self) -> &EmbeddedGraph {
        &self.graph
    }

    pub fn mode(&self) -> SymmetryMode {
        self.mode
    }

    pub fn group(&self) -> &[Symmetry] {
        &self.group
    }

    /// Canonical form of `(deco, observer)` under the arena's symmetry group.
    pub fn canonicalize(&self, deco: &Decoration, observer: VertexId) -> CanonicalSnapshot {
        let mut best: Option<ViewKey> = None;
        let mut minimizers: Vec<&Symmetry> = Vec::new();
        for sym in &self.group {
            let key = image_key(sym, deco, observer);
            match best.as_ref().map(|b| key.cmp(b)) {
                None | Some(Ordering::Less) => {
                    best = Some(key);
                    minimizers.clear();
                    minimizers.push(sym);
                }
                Some(Ordering::Equal) => minimizers.push(sym),
                Some(Ordering::Greater) => {}
            }
        }
        let key = best.expect("symmetry group contains the identity");
        let mut by_label: BTreeMap<VertexId, Vec<VertexId>> = BTreeMap::new();
        for &u in self.graph.neighbors(observer) {
            let label = minimizers.iter().map(|s| s.apply(u)).min().unwrap();
            by_label.entry(label).or_default().push(u);
        }
        CanonicalSnapshot { key, to_frame: minimizers[0].clone(), orbits: by_label.into_values().collect() }
    }

    pub fn canonical_key(&self, deco: &Decoration, observer: VertexId) -> ViewKey {
        self.canonicalize(deco, observer).key
    }

    /// True when some arena symmetry maps the vertex multiset `a` onto `b`.
    pub fn equivalent_placements(&self, a: &[VertexId], b: &[VertexId]) -> bool {
        if a.len() != b.len() {
            return false;
        }
        let mut target = b.to_vec();
        target.sort_unstable();
        self.group.iter().any(|sym| {
            let mut img: Vec<VertexId> = a.iter().map(|&v| sym.apply(v)).collect();
            img.sort_unstable();
            img == target
        })
    }
}

/// Canonical key of `(g, deco, observer)` under all automorphisms of `g`.
pub fn canonical_key(g: &EmbeddedGraph, deco: &Decoration, observer: VertexId) -> ViewKey {
    Arena::new(g.clone(), SymmetryMode::Automorphic).canonical_key(deco, observer)
}
