//! Resistive line networks and their Laplacians.
//!
//! Buses are numbered `0..node_count`. Lines are undirected and purely
//! resistive; the Laplacian is weighted by the line conductances `1/R`.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    /// Line resistance in ohms.
    pub resistance: f64,
}

impl Edge {
    pub fn new(i: usize, j: usize, resistance: f64) -> Self {
        Edge { i, j, resistance }
    }

    pub fn conductance(&self) -> f64 {
        1.0 / self.resistance
    }
}

/// A validated, connected resistor network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    node_count: usize,
    edges: Vec<Edge>,
    /// Integer lattice coordinates, one per node, when the network was generated.
    coords: Option<Vec<Vec<i64>>>,
    /// Declared uniform bounds `(R_min, R_max)` on the line resistances.
    resistance_bounds: Option<(f64, f64)>,
}

impl Network {
    /// Validates an edge list and checks connectivity by breadth-first search.
    pub fn new(node_count: usize, edges: Vec<Edge>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::EmptyEdgeList);
        }
        let mut seen = BTreeSet::new();
        for e in &edges {
            for idx in [e.i, e.j] {
                if idx >= node_count {
                    return Err(Error::IndexOutOfRange { index: idx, len: node_count });
                }
            }
            if e.i == e.j {
                return Err(Error::InvalidEdge { i: e.i, j: e.j, resistance: e.resistance, reason: "self-loop" });
            }
            if !(e.resistance > 0.0 && e.resistance.is_finite()) {
                return Err(Error::InvalidEdge {
                    i: e.i,
                    j: e.j,
                    resistance: e.resistance,
                    reason: "resistance must be positive and finite",
                });
            }
            if !seen.insert((e.i.min(e.j), e.i.max(e.j))) {
                return Err(Error::InvalidEdge { i: e.i, j: e.j, resistance: e.resistance, reason: "duplicate edge" });
            }
        }
        let net = Network { node_count, edges, coords: None, resistance_bounds: None };
        let reached = net.reachable_from(0, None);
        if reached < node_count {
            return Err(Error::DisconnectedGraph { reached, nodes: node_count });
        }
        Ok(net)
    }

    pub fn with_coords(mut self, coords: Vec<Vec<i64>>) -> Result<Self> {
        if coords.len() != self.node_count {
            return Err(Error::DimensionMismatch("one coordinate tuple per node"));
        }
        self.coords = Some(coords);
        Ok(self)
    }

    /// Declares `R_min <= R_ij <= R_max`, checked against every line.
    pub fn with_resistance_bounds(mut self, r_min: f64, r_max: f64) -> Result<Self> {
        if !(r_min > 0.0 && r_min <= r_max) {
            return Err(Error::InvalidSize("resistance bounds must satisfy 0 < R_min <= R_max"));
        }
        if let Some(e) = self.edges.iter().find(|e| e.resistance < r_min || e.resistance > r_max) {
            return Err(Error::InvalidEdge {
                i: e.i,
                j: e.j,
                resistance: e.resistance,
                reason: "resistance outside declared bounds",
            });
        }
        self.resistance_bounds = Some((r_min, r_max));
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn coords(&self) -> Option<&[Vec<i64>]> {
        self.coords.as_deref()
    }

    pub fn resistance_bounds(&self) -> Option<(f64, f64)> {
        self.resistance_bounds
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for e in &self.edges {
            adj[e.i].push(e.j);
            adj[e.j].push(e.i);
        }
        adj
    }

    /// Number of nodes reachable from `start`, optionally ignoring one edge.
    fn reachable_from(&self, start: usize, skip_edge: Option<usize>) -> usize {
        let mut adj = vec![Vec::new(); self.node_count];
        for (k, e) in self.edges.iter().enumerate() {
            if Some(k) != skip_edge {
                adj[e.i].push(e.j);
                adj[e.j].push(e.i);
            }
        }
        let mut visited = vec![false; self.node_count];
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !visited[v] {
                    visited[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count
    }

    /// Breadth-first hop distances from `source`.
    pub fn hop_distances(&self, source: usize) -> Vec<usize> {
        let adj = self.adjacency();
        let mut dist = vec![usize::MAX; self.node_count];
        dist[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Copy without edge `index`; fails if that edge is a bridge.
    pub fn without_edge(&self, index: usize) -> Result<Network> {
        if index >= self.edges.len() {
            return Err(Error::IndexOutOfRange { index, len: self.edges.len() });
        }
        if self.edges.len() == 1 || self.reachable_from(0, Some(index)) < self.node_count {
            return Err(Error::DisconnectsGraph(index));
        }
        let mut out = self.clone();
        out.edges.remove(index);
        Ok(out)
    }

    /// Copy with the resistance of edge `index` multiplied by `factor`.
    pub fn with_scaled_edge(&self, index: usize, factor: f64) -> Result<Network> {
        if index >= self.edges.len() {
            return Err(Error::IndexOutOfRange { index, len: self.edges.len() });
        }
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidScaling(factor));
        }
        let mut out = self.clone();
        out.edges[index].resistance *= factor;
        out.resistance_bounds = None;
        Ok(out)
    }
}

/// Validated network from a node count and `(i, j, R)` triples.
pub fn build_network(node_count: usize, edges: &[(usize, usize, f64)]) -> Result<Network> {
    Network::new(node_count, edges.iter().map(|&(i, j, r)| Edge::new(i, j, r)).collect())
}

/// Box truncation `[0, m_1) x ... x [0, m_d)` of the integer lattice with
/// nearest-neighbour lines of resistance `resistance`.
///
/// Nodes are numbered in row-major order (last coordinate fastest), so node 0
/// is the origin corner.
pub fn generate_lattice(sides: &[usize], resistance: f64) -> Result<Network> {
    let d = sides.len();
    if !(1..=3).contains(&d) {
        return Err(Error::InvalidDimension(d));
    }
    if sides.iter().any(|&m| m < 2) {
        return Err(Error::InvalidSize("every lattice side length must be at least 2"));
    }
    if !(resistance > 0.0 && resistance.is_finite()) {
        return Err(Error::InvalidEdge { i: 0, j: 0, resistance, reason: "resistance must be positive and finite" });
    }
    let n: usize = sides.iter().product();
    let mut strides = vec![1usize; d];
    for k in (0..d.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * sides[k + 1];
    }
    let mut coords = Vec::with_capacity(n);
    let mut edges = Vec::new();
    for node in 0..n {
        let c: Vec<i64> = (0..d).map(|k| ((node / strides[k]) % sides[k]) as i64).collect();
        for k in 0..d {
            if (c[k] as usize) + 1 < sides[k] {
                edges.push(Edge::new(node, node + strides[k], resistance));
            }
        }
        coords.push(c);
    }
    Network::new(n, edges)?.with_coords(coords)?.with_resistance_bounds(resistance, resistance)
}

/// The h-fuzz of `base`: every pair of nodes at hop distance `2..=h` gains a
/// line of resistance `fuzz_resistance`. Existing lines keep their resistance.
pub fn generate_hfuzz(base: &Network, h: usize, fuzz_resistance: f64) -> Result<Network> {
    if h < 1 {
        return Err(Error::InvalidFuzzRadius(h));
    }
    if !(fuzz_resistance > 0.0 && fuzz_resistance.is_finite()) {
        return Err(Error::InvalidEdge {
            i: 0,
            j: 0,
            resistance: fuzz_resistance,
            reason: "resistance must be positive and finite",
        });
    }
    let mut edges = base.edges.clone();
    let adj = base.adjacency();
    for src in 0..base.node_count {
        // depth-limited BFS
        let mut dist = vec![usize::MAX; base.node_count];
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            if dist[u] == h {
                continue;
            }
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for (dst, &dd) in dist.iter().enumerate().skip(src + 1) {
            if dd >= 2 && dd <= h {
                edges.push(Edge::new(src, dst, fuzz_resistance));
            }
        }
    }
    let mut net = Network::new(base.node_count, edges)?;
    if let Some(c) = &base.coords {
        net = net.with_coords(c.clone())?;
    }
    if let Some((lo, hi)) = base.resistance_bounds {
        let (lo, hi) = (lo.min(fuzz_resistance), hi.max(fuzz_resistance));
        net = net.with_resistance_bounds(lo, hi)?;
    }
    Ok(net)
}

/// Conductance-weighted Laplacian.
pub fn laplacian(net: &Network) -> Matrix {
    let n = net.node_count;
    let mut l = Matrix::zeros(n, n);
    for e in &net.edges {
        let g = e.conductance();
        l[(e.i, e.j)] -= g;
        l[(e.j, e.i)] -= g;
        l[(e.i, e.i)] += g;
        l[(e.j, e.j)] += g;
    }
    l
}

/// Grounded Laplacian: `l` with row and column `ground` deleted.
pub fn reduced_laplacian(l: &Matrix, ground: usize) -> Result<Matrix> {
    l.without_row_col(ground)
}

/// Communication Laplacian `L_q = gamma * L_R`.
pub fn communication_laplacian(net: &Network, gamma: f64) -> Result<Matrix> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::NonPositiveGamma(gamma));
    }
    Ok(laplacian(net).scaled(gamma))
}
