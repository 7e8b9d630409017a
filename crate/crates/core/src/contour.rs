//! Level-set polylines of a [`ScalarField`] by marching squares.
//!
//! Crossings are linearly interpolated along cell edges; saddle cells are
//! resolved with the mean of the four corners. Cells touching a masked node
//! are skipped. A crossing that falls exactly on a grid node is shared by all
//! cells around that node, so polylines pass through such nodes unbroken.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::scanner::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ContourKind {
    /// `F = level`.
    LevelSet,
    /// Boundary of `F >= threshold`.
    RatioThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourSet {
    pub level: f64,
    pub kind: ContourKind,
    /// Points as `[alpha1, alpha2]`.
    pub polylines: Vec<Vec<[f64; 2]>>,
}

impl ContourSet {
    pub fn is_empty(&self) -> bool {
        self.polylines.is_empty()
    }

    pub fn n_vertices(&self) -> usize {
        self.polylines.iter().map(Vec::len).sum()
    }

    pub fn vertices(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.polylines.iter().flatten().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    Node(usize, usize),
    /// Edge from node `(i, j)` to `(i + 1, j)`.
    H(usize, usize),
    /// Edge from node `(i, j)` to `(i, j + 1)`.
    V(usize, usize),
}

struct Marcher<'a> {
    field: &'a ScalarField,
    level: f64,
    alphas: Vec<f64>,
    points: BTreeMap<Key, [f64; 2]>,
}

impl Marcher<'_> {
    fn above(&self, i: usize, j: usize) -> bool {
        self.field.values[[i, j]] >= self.level
    }

    /// Crossing on the edge between node `a` and its `+x` (`horizontal`) or
    /// `+y` neighbour.
    fn crossing(&mut self, i: usize, j: usize, horizontal: bool) -> Key {
        let (bi, bj) = if horizontal { (i + 1, j) } else { (i, j + 1) };
        let fa = self.field.values[[i, j]];
        let fb = self.field.values[[bi, bj]];
        let t = (self.level - fa) / (fb - fa);
        if t <= 0.0 {
            return self.node(i, j);
        }
        if t >= 1.0 {
            return self.node(bi, bj);
        }
        let key = if horizontal {
            Key::H(i, j)
        } else {
            Key::V(i, j)
        };
        let (ax, ay) = (self.alphas[i], self.alphas[j]);
        let (bx, by) = (self.alphas[bi], self.alphas[bj]);
        self.points
            .entry(key)
            .or_insert([ax + t * (bx - ax), ay + t * (by - ay)]);
        key
    }

    fn node(&mut self, i: usize, j: usize) -> Key {
        let key = Key::Node(i, j);
        let p = [self.alphas[i], self.alphas[j]];
        self.points.entry(key).or_insert(p);
        key
    }

    fn cell_segments(&mut self, i: usize, j: usize, out: &mut Vec<(Key, Key)>) {
        let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
        if corners.iter().any(|&(a, b)| self.field.mask[[a, b]]) {
            return;
        }
        let up = corners.map(|(a, b)| self.above(a, b));
        // edges: 0 = c0-c1, 1 = c1-c2, 2 = c3-c2, 3 = c0-c3
        let cut = [
            up[0] != up[1],
            up[1] != up[2],
            up[3] != up[2],
            up[0] != up[3],
        ];
        let edge_key = |m: &mut Self, e: usize| match e {
            0 => m.crossing(i, j, true),
            1 => m.crossing(i + 1, j, false),
            2 => m.crossing(i, j + 1, true),
            _ => m.crossing(i, j, false),
        };
        let n_cut = cut.iter().filter(|&&c| c).count();
        if n_cut == 2 {
            let mut es = (0..4).filter(|&e| cut[e]);
            let (a, b) = (es.next().unwrap(), es.next().unwrap());
            let ka = edge_key(self, a);
            let kb = edge_key(self, b);
            out.push((ka, kb));
        } else if n_cut == 4 {
            let v = &self.field.values;
            let centre = 0.25 * corners.iter().map(|&(a, b)| v[[a, b]]).sum::<f64>();
            let pairs = if (centre >= self.level) == up[0] {
                [(0, 1), (2, 3)]
            } else {
                [(3, 0), (1, 2)]
            };
            for (a, b) in pairs {
                let ka = edge_key(self, a);
                let kb = edge_key(self, b);
                out.push((ka, kb));
            }
        }
    }
}

pub fn extract_contours(field: &ScalarField, level: f64) -> ContourSet {
    extract_with_kind(field, level, ContourKind::LevelSet)
}

pub fn extract_with_kind(field: &ScalarField, level: f64, kind: ContourKind) -> ContourSet {
    let n = field.grid.n_points;
    let mut marcher = Marcher {
        field,
        level,
        alphas: field.grid.alphas(),
        points: BTreeMap::new(),
    };
    let mut raw = Vec::new();
    if level.is_finite() {
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                marcher.cell_segments(i, j, &mut raw);
            }
        }
    }
    let mut seen = BTreeSet::new();
    let segments: Vec<(Key, Key)> = raw
        .into_iter()
        .filter(|(a, b)| a != b)
        .filter(|&(a, b)| seen.insert(if a < b { (a, b) } else { (b, a) }))
        .collect();

    let mut adjacency: BTreeMap<Key, Vec<usize>> = BTreeMap::new();
    for (s, &(a, b)) in segments.iter().enumerate() {
        adjacency.entry(a).or_default().push(s);
        adjacency.entry(b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let next_from = |key: Key, used: &mut Vec<bool>| -> Option<Key> {
        let s = *adjacency.get(&key)?.iter().find(|&&s| !used[s])?;
        used[s] = true;
        let (a, b) = segments[s];
        Some(if a == key { b } else { a })
    };

    let mut polylines = Vec::new();
    for s in 0..segments.len() {
        if used[s] {
            continue;
        }
        used[s] = true;
        let (a, b) = segments[s];
        let mut forward = vec![a, b];
        while let Some(k) = next_from(*forward.last().unwrap(), &mut used) {
            forward.push(k);
        }
        let mut backward = Vec::new();
        let mut head = a;
        while let Some(k) = next_from(head, &mut used) {
            backward.push(k);
            head = k;
        }
        backward.reverse();
        backward.extend(forward);
        polylines.push(backward.iter().map(|k| marcher.points[k]).collect());
    }
    ContourSet {
        level,
        kind,
        polylines,
    }
}
