//! Depth-first CMJ forests and their Lukasiewicz, height and contour paths.
//!
//! Individuals are iid `(V_k, P_k)` listed in depth-first order, so a forest
//! of `n` individuals is fully described by the sequence of characteristics.
//! The Lukasiewicz path `S(k) = Σ_{j<k} (|P_j| − 1)` encodes the tree
//! structure (a new root starts whenever `S` reaches a new minimum). The
//! chronological height `H(k)` is the birth time of individual `k`, and the
//! contour `C` is the distance to the root of a unit-speed particle walking
//! along the chronological forest.

use std::io::{self, Write};
use std::ops::Sub;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{AtomicMeasure, Measure, MeasureView};
use crate::models::LifeSampler;

#[derive(Debug, Error, PartialEq)]
pub enum ForestError {
    #[error("a single tree exceeded {0} individuals (supercritical characteristic?)")]
    TreeCap(usize),
    #[error("node {node}: birth age {age} outside (0, {life}] of its parent")]
    Support { node: usize, age: f64, life: f64 },
    #[error("parent table contains a cycle through node {0}")]
    Cycle(usize),
    #[error("parent index {0} out of range")]
    BadParent(usize),
    #[error("{lives} life lengths for {measures} offspring measures")]
    Length { lives: usize, measures: usize },
}

/// Order in which the children of an individual are explored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiblingOrder {
    /// Youngest birth age first: the contour enters each child on the way up.
    Increasing,
    /// Latest birth age first: the contour climbs to the death point and
    /// enters each child on the way down.
    Decreasing,
}

impl Default for SiblingOrder {
    fn default() -> Self {
        SiblingOrder::Decreasing
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestOptions {
    pub order: SiblingOrder,
    pub contour: bool,
    pub max_tree_size: usize,
}

impl Default for ForestOptions {
    fn default() -> Self {
        Self {
            order: SiblingOrder::default(),
            contour: true,
            max_tree_size: usize::MAX,
        }
    }
}

/// A sequence of iid characteristics with its Lukasiewicz path.
#[derive(Debug, Clone, PartialEq)]
pub struct Walk {
    /// `S(0..=n)`.
    pub s: Vec<i64>,
    pub lives: Vec<f64>,
    offsets: Vec<usize>,
    atoms: Vec<f64>,
}

impl Walk {
    pub fn simulate<R: Rng + ?Sized>(sampler: &LifeSampler, n: usize, rng: &mut R) -> Walk {
        let mut walk = Walk::with_capacity(n);
        walk.extend(sampler, n, rng);
        walk
    }

    /// Appends `extra` fresh individuals; earlier paths are unchanged.
    pub fn extend<R: Rng + ?Sized>(&mut self, sampler: &LifeSampler, extra: usize, rng: &mut R) {
        let mut buf = Vec::new();
        for _ in 0..extra {
            let v = sampler.sample_into(rng, &mut buf);
            self.push(v, &buf);
        }
    }

    pub fn from_measures(lives: &[f64], measures: &[AtomicMeasure]) -> Result<Walk, ForestError> {
        if lives.len() != measures.len() {
            return Err(ForestError::Length {
                lives: lives.len(),
                measures: measures.len(),
            });
        }
        let mut walk = Walk::with_capacity(lives.len());
        for (k, (&v, m)) in lives.iter().zip(measures).enumerate() {
            if let Some(&last) = m.atoms().last() {
                if last > v {
                    return Err(ForestError::Support {
                        node: k,
                        age: last,
                        life: v,
                    });
                }
            }
            walk.push(v, m.atoms());
        }
        Ok(walk)
    }

    fn with_capacity(n: usize) -> Walk {
        let mut s = Vec::with_capacity(n + 1);
        s.push(0);
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        Walk {
            s,
            lives: Vec::with_capacity(n),
            offsets,
            atoms: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, v: f64, atoms: &[f64]) {
        let last = *self.s.last().unwrap();
        self.s.push(last + atoms.len() as i64 - 1);
        self.lives.push(v);
        self.atoms.extend_from_slice(atoms);
        self.offsets.push(self.atoms.len());
    }

    /// Number of individuals.
    pub fn len(&self) -> usize {
        self.lives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lives.is_empty()
    }

    /// `P_k`.
    pub fn offspring(&self, k: usize) -> MeasureView<'_> {
        MeasureView::new(&self.atoms[self.offsets[k]..self.offsets[k + 1]])
    }

    pub fn offspring_count(&self, k: usize) -> usize {
        self.offsets[k + 1] - self.offsets[k]
    }

    pub fn offspring_measures(&self) -> Vec<AtomicMeasure> {
        (0..self.len()).map(|k| self.offspring(k).to_owned()).collect()
    }

    /// Number of trees met by the first `n` individuals.
    pub fn trees_among_first(&self, n: usize) -> usize {
        if n == 0 {
            return 0;
        }
        (1 - self.s[..n].iter().min().copied().unwrap_or(0)) as usize
    }
}

/// Visiting position `pos` among `m` children, as an index into the ascending atoms.
#[inline]
fn visit(order: SiblingOrder, m: usize, pos: usize) -> usize {
    match order {
        SiblingOrder::Increasing => pos,
        SiblingOrder::Decreasing => m - 1 - pos,
    }
}

const UNEXPLORED: usize = usize::MAX;

/// Depth-first replay of a walk: heights, and for each atom the index of the
/// child it produced (or `UNEXPLORED`).
struct Exploration {
    h: Vec<f64>,
    parent: Vec<Option<usize>>,
    child_of_atom: Vec<usize>,
}

fn explore(walk: &Walk, order: SiblingOrder, cap: usize) -> Result<Exploration, ForestError> {
    let n = walk.len();
    let mut h = Vec::with_capacity(n);
    let mut parent = Vec::with_capacity(n);
    let mut child_of_atom = vec![UNEXPLORED; walk.atoms.len()];
    // Pending children: (birth time, parent, atom slot); top of stack is explored next.
    let mut stack: Vec<(f64, usize, usize)> = Vec::new();
    let mut tree_size = 0usize;
    for k in 0..n {
        let hk = match stack.pop() {
            Some((t, u, slot)) => {
                child_of_atom[slot] = k;
                parent.push(Some(u));
                tree_size += 1;
                if tree_size > cap {
                    return Err(ForestError::TreeCap(cap));
                }
                t
            }
            None => {
                parent.push(None);
                tree_size = 1;
                0.0
            }
        };
        h.push(hk);
        let off = walk.offsets[k];
        let m = walk.offspring_count(k);
        // Push in reverse visiting order.
        for pos in (0..m).rev() {
            let i = visit(order, m, pos);
            stack.push((hk + walk.atoms[off + i], k, off + i));
        }
    }
    Ok(Exploration {
        h,
        parent,
        child_of_atom,
    })
}

/// Heights `H(k)` of a walk read as a depth-first forest.
pub fn heights(walk: &Walk, order: SiblingOrder) -> Vec<f64> {
    explore(walk, order, usize::MAX).expect("no cap").h
}

/// A simulated forest with its three paths.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestPaths {
    pub walk: Walk,
    /// `H(0..n)`.
    pub h: Vec<f64>,
    pub contour: Option<PiecewiseLinearPath>,
    /// Contour times at which each completed tree returns to 0.
    pub tree_ends: Vec<f64>,
    pub order: SiblingOrder,
    parent: Vec<Option<usize>>,
}

impl ForestPaths {
    pub fn from_walk(walk: Walk, opts: &ForestOptions) -> Result<ForestPaths, ForestError> {
        let ex = explore(&walk, opts.order, opts.max_tree_size)?;
        let (contour, tree_ends) = if opts.contour {
            let src = ContourSource {
                lives: &walk.lives,
                offsets: &walk.offsets,
                atoms: &walk.atoms,
                child_of_atom: &ex.child_of_atom,
                roots: ex
                    .parent
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| p.is_none())
                    .map(|(k, _)| k)
                    .collect(),
            };
            let (c, ends) = trace_contour(&src, opts.order);
            (Some(c), ends)
        } else {
            (None, Vec::new())
        };
        Ok(ForestPaths {
            walk,
            h: ex.h,
            contour,
            tree_ends,
            order: opts.order,
            parent: ex.parent,
        })
    }

    pub fn s(&self) -> &[i64] {
        &self.walk.s
    }

    pub fn len(&self) -> usize {
        self.walk.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walk.is_empty()
    }

    pub fn offspring(&self, k: usize) -> MeasureView<'_> {
        self.walk.offspring(k)
    }

    /// Explicit parent/birth-age table of the explored individuals.
    pub fn tree_table(&self) -> TreeTable {
        let birth_age = (0..self.len())
            .map(|k| match self.parent[k] {
                Some(u) => self.h[k] - self.h[u],
                None => 0.0,
            })
            .collect();
        TreeTable {
            parent: self.parent.clone(),
            birth_age,
            life: self.walk.lives.clone(),
        }
    }

    /// Writes `index,S,H`; the final row carries `S(n)` only.
    pub fn write_paths_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "index,S,H")?;
        for k in 0..=self.len() {
            match self.h.get(k) {
                Some(h) => writeln!(w, "{k},{},{h}", self.walk.s[k])?,
                None => writeln!(w, "{k},{},", self.walk.s[k])?,
            }
        }
        Ok(())
    }

    pub fn write_contour_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,C")?;
        if let Some(c) = &self.contour {
            for &(t, v) in &c.points {
                writeln!(w, "{t},{v}")?;
            }
        }
        Ok(())
    }
}

/// Simulates a forest of `n` individuals.
pub fn simulate_forest<R: Rng + ?Sized>(
    sampler: &LifeSampler,
    n: usize,
    opts: &ForestOptions,
    rng: &mut R,
) -> Result<ForestPaths, ForestError> {
    let walk = Walk::simulate(sampler, n, rng);
    ForestPaths::from_walk(walk, opts)
}

/// Piecewise-linear path given by its breakpoints `(t, value)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PiecewiseLinearPath {
    pub points: Vec<(f64, f64)>,
}

impl PiecewiseLinearPath {
    pub fn duration(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.0)
    }

    /// Value at `t`, or `None` outside the covered range.
    pub fn eval(&self, t: f64) -> Option<f64> {
        let pts = &self.points;
        if pts.is_empty() || t < pts[0].0 || t > self.duration() {
            return None;
        }
        let i = pts.partition_point(|p| p.0 <= t);
        if i == pts.len() {
            return Some(pts[i - 1].1);
        }
        let (t0, v0) = pts[i - 1];
        let (t1, v1) = pts[i];
        Some(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
    }

    pub fn max_value(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
    }
}

struct ContourSource<'a> {
    lives: &'a [f64],
    offsets: &'a [usize],
    atoms: &'a [f64],
    child_of_atom: &'a [usize],
    roots: Vec<usize>,
}

struct Tracer {
    points: Vec<(f64, f64)>,
    t: f64,
    cur: f64,
}

impl Tracer {
    #[inline]
    fn go(&mut self, value: f64) {
        if value != self.cur {
            self.t += (value - self.cur).abs();
            self.cur = value;
            self.points.push((self.t, value));
        }
    }
}

/// Unit-speed depth-first traversal; stops at the first unexplored child.
fn trace_contour(src: &ContourSource<'_>, order: SiblingOrder) -> (PiecewiseLinearPath, Vec<f64>) {
    let mut tr = Tracer {
        points: vec![(0.0, 0.0)],
        t: 0.0,
        cur: 0.0,
    };
    let mut tree_ends = Vec::new();
    // Frame: (individual, birth height, next visiting position, climbed to death).
    let mut stack: Vec<(usize, f64, usize, bool)> = Vec::new();
    'roots: for &root in &src.roots {
        stack.push((root, 0.0, 0, false));
        while let Some(frame) = stack.last_mut() {
            let (u, base, pos, climbed) = *frame;
            let off = src.offsets[u];
            let m = src.offsets[u + 1] - off;
            if order == SiblingOrder::Decreasing && !climbed {
                frame.3 = true;
                tr.go(base + src.lives[u]);
                continue;
            }
            if pos < m {
                let i = off + visit(order, m, pos);
                frame.2 += 1;
                tr.go(base + src.atoms[i]);
                let child = src.child_of_atom[i];
                if child == UNEXPLORED {
                    break 'roots;
                }
                stack.push((child, base + src.atoms[i], 0, false));
            } else {
                if order == SiblingOrder::Increasing {
                    tr.go(base + src.lives[u]);
                }
                tr.go(base);
                stack.pop();
            }
        }
        tree_ends.push(tr.t);
    }
    (PiecewiseLinearPath { points: tr.points }, tree_ends)
}

/// Explicit tree table: parent and birth age per node, plus life lengths.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TreeTable {
    pub parent: Vec<Option<usize>>,
    /// Age of the parent at the node's birth (ignored for roots).
    pub birth_age: Vec<f64>,
    pub life: Vec<f64>,
}

impl TreeTable {
    fn check_parents(&self) -> Result<(), ForestError> {
        let n = self.parent.len();
        for p in self.parent.iter().flatten() {
            if *p >= n {
                return Err(ForestError::BadParent(*p));
            }
        }
        Ok(())
    }
}

/// Sum of birth ages along each node's ancestral line, by walking up the table.
pub fn brute_force_height(table: &TreeTable) -> Result<Vec<f64>, ForestError> {
    table.check_parents()?;
    let n = table.parent.len();
    (0..n)
        .map(|k| {
            let mut h = 0.0;
            let mut u = k;
            let mut steps = 0;
            while let Some(p) = table.parent[u] {
                h += table.birth_age[u];
                u = p;
                steps += 1;
                if steps > n {
                    return Err(ForestError::Cycle(k));
                }
            }
            Ok(h)
        })
        .collect()
}

/// Contour of an explicit forest; roots are traversed in index order.
pub fn contour_of(table: &TreeTable, order: SiblingOrder) -> Result<PiecewiseLinearPath, ForestError> {
    table.check_parents()?;
    brute_force_height(table)?;
    let n = table.parent.len();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, p) in table.parent.iter().enumerate() {
        if let Some(p) = *p {
            let age = table.birth_age[k];
            if !(age > 0.0 && age <= table.life[p]) {
                return Err(ForestError::Support {
                    node: k,
                    age,
                    life: table.life[p],
                });
            }
            children[p].push(k);
        }
    }
    let mut offsets = vec![0];
    let mut atoms = Vec::new();
    let mut child_of_atom = Vec::new();
    for ch in &mut children {
        // Among equal ages the lower index is visited first, in either order.
        ch.sort_by(|a, b| {
            let tie = match order {
                SiblingOrder::Increasing => a.cmp(b),
                SiblingOrder::Decreasing => b.cmp(a),
            };
            table.birth_age[*a].total_cmp(&table.birth_age[*b]).then(tie)
        });
        for &c in ch.iter() {
            atoms.push(table.birth_age[c]);
            child_of_atom.push(c);
        }
        offsets.push(atoms.len());
    }
    let src = ContourSource {
        lives: &table.life,
        offsets: &offsets,
        atoms: &atoms,
        child_of_atom: &child_of_atom,
        roots: (0..n).filter(|&k| table.parent[k].is_none()).collect(),
    };
    Ok(trace_contour(&src, order).0)
}

/// `x ↦ x(t) − inf_{u ≤ t} x(u)`.
pub fn reflect_above_infimum<T>(path: &[T]) -> Vec<T>
where
    T: Copy + PartialOrd + Sub<Output = T>,
{
    let mut out = Vec::with_capacity(path.len());
    let Some(&first) = path.first() else {
        return out;
    };
    let mut inf = first;
    for &x in path {
        if x < inf {
            inf = x;
        }
        out.push(x - inf);
    }
    out
}

/// `x ↦ sup_{u ≤ t} x(u) − x(t)`.
pub fn reflect_below_supremum<T>(path: &[T]) -> Vec<T>
where
    T: Copy + PartialOrd + Sub<Output = T>,
{
    let mut out = Vec::with_capacity(path.len());
    let Some(&first) = path.first() else {
        return out;
    };
    let mut sup = first;
    for &x in path {
        if x > sup {
            sup = x;
        }
        out.push(sup - x);
    }
    out
}

/// Reflection of a piecewise-linear path above its running infimum; segments
/// are split where the path first dips below its past minimum.
pub fn reflect_path_above_infimum(path: &PiecewiseLinearPath) -> PiecewiseLinearPath {
    let pts = &path.points;
    let Some(&(t0, v0)) = pts.first() else {
        return PiecewiseLinearPath::default();
    };
    let mut inf = v0;
    let mut out = vec![(t0, 0.0)];
    for w in pts.windows(2) {
        let (ta, va) = w[0];
        let (tb, vb) = w[1];
        if vb < inf {
            if va > inf {
                // Crossing the old infimum inside the segment.
                let tc = ta + (tb - ta) * (va - inf) / (va - vb);
                out.push((tc, 0.0));
            }
            inf = vb;
            out.push((tb, 0.0));
        } else {
            out.push((tb, vb - inf));
        }
    }
    PiecewiseLinearPath { points: out }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(atoms: &[f64]) -> AtomicMeasure {
        AtomicMeasure::new(atoms.to_vec()).unwrap()
    }

    fn opts(order: SiblingOrder) -> ForestOptions {
        ForestOptions {
            order,
            ..ForestOptions::default()
        }
    }

    #[test]
    fn three_node_tree() {
        let walk = Walk::from_measures(&[3.0, 1.0, 1.0], &[m(&[0.5, 2.0]), m(&[]), m(&[])]).unwrap();
        let f = ForestPaths::from_walk(walk.clone(), &opts(SiblingOrder::Increasing)).unwrap();
        assert_eq!(f.h, vec![0.0, 0.5, 2.0]);
        assert_eq!(f.s(), &[0, 1, 0, -1]);
        assert_eq!(brute_force_height(&f.tree_table()).unwrap(), f.h);
        let f = ForestPaths::from_walk(walk, &opts(SiblingOrder::Decreasing)).unwrap();
        assert_eq!(f.h, vec![0.0, 2.0, 0.5]);
    }

    #[test]
    fn barren_forest() {
        let walk = Walk::from_measures(&[1.0; 4], &vec![AtomicMeasure::empty(); 4]).unwrap();
        let f = ForestPaths::from_walk(walk, &ForestOptions::default()).unwrap();
        assert_eq!(f.s(), &[0, -1, -2, -3, -4]);
        assert!(f.h.iter().all(|&h| h == 0.0));
        assert_eq!(f.walk.trees_among_first(4), 4);
    }

    #[test]
    fn galton_watson_counts() {
        let walk = Walk::from_measures(&[1.0; 3], &[m(&[1.0, 1.0]), m(&[]), m(&[])]).unwrap();
        let f = ForestPaths::from_walk(walk, &ForestOptions::default()).unwrap();
        assert_eq!(f.s(), &[0, 1, 0, -1]);
        assert_eq!(f.h, vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn brute_force_examples() {
        let single = TreeTable {
            parent: vec![None],
            birth_age: vec![0.0],
            life: vec![1.0],
        };
        assert_eq!(brute_force_height(&single).unwrap(), vec![0.0]);
        let chain = TreeTable {
            parent: vec![None, Some(0), Some(1)],
            birth_age: vec![0.0, 1.5, 0.7],
            life: vec![2.0, 1.0, 1.0],
        };
        let h = brute_force_height(&chain).unwrap();
        assert_eq!(h[..2], [0.0, 1.5]);
        assert!((h[2] - 2.2).abs() < 1e-15);
        let cyclic = TreeTable {
            parent: vec![Some(1), Some(0)],
            birth_age: vec![1.0, 1.0],
            life: vec![2.0, 2.0],
        };
        assert!(matches!(brute_force_height(&cyclic), Err(ForestError::Cycle(_))));
    }

    #[test]
    fn contour_examples() {
        let single = TreeTable {
            parent: vec![None],
            birth_age: vec![0.0],
            life: vec![2.0],
        };
        for order in [SiblingOrder::Increasing, SiblingOrder::Decreasing] {
            let c = contour_of(&single, order).unwrap();
            assert_eq!(c.points, vec![(0.0, 0.0), (2.0, 2.0), (4.0, 0.0)]);
            assert_eq!(c.eval(1.0), Some(1.0));
            assert_eq!(c.eval(3.0), Some(1.0));
        }
        let two = TreeTable {
            parent: vec![None, Some(0)],
            birth_age: vec![0.0, 1.0],
            life: vec![3.0, 1.0],
        };
        let c = contour_of(&two, SiblingOrder::Increasing).unwrap();
        assert_eq!(c.duration(), 8.0);
        let maxima: Vec<f64> = c
            .points
            .windows(3)
            .filter(|w| w[1].1 > w[0].1 && w[1].1 > w[2].1)
            .map(|w| w[1].1)
            .collect();
        assert_eq!(maxima, vec![2.0, 3.0]);
        let forest = TreeTable {
            parent: vec![None, None],
            birth_age: vec![0.0, 0.0],
            life: vec![1.0, 1.0],
        };
        let c = contour_of(&forest, SiblingOrder::Increasing).unwrap();
        assert_eq!(c.points, vec![(0.0, 0.0), (1.0, 1.0), (2.0, 0.0), (3.0, 1.0), (4.0, 0.0)]);
        let bad = TreeTable {
            parent: vec![None, Some(0)],
            birth_age: vec![0.0, 4.0],
            life: vec![3.0, 1.0],
        };
        assert!(matches!(contour_of(&bad, SiblingOrder::Increasing), Err(ForestError::Support { .. })));
    }

    #[test]
    fn reflections() {
        assert_eq!(reflect_above_infimum(&[0, 1, 0, -1]), vec![0, 1, 0, 0]);
        assert_eq!(reflect_above_infimum(&[0, 1, 2, 2]), vec![0, 1, 2, 2]);
        assert_eq!(reflect_above_infimum(&[0, -2, 1]), vec![0, 0, 3]);
        assert_eq!(reflect_below_supremum(&[0, 1, 0, -1]), vec![0, 0, 1, 2]);
        assert_eq!(reflect_below_supremum(&[0, -1, -3]), vec![0, 1, 3]);
        assert_eq!(reflect_below_supremum(&[0, -1, 2, 1]), vec![0, 1, 0, 1]);
    }

    #[test]
    fn reflect_linear_path() {
        let p = PiecewiseLinearPath {
            points: vec![(0.0, 0.0), (1.0, 1.0), (3.0, -1.0), (4.0, 0.0)],
        };
        let r = reflect_path_above_infimum(&p);
        assert_eq!(r.points, vec![(0.0, 0.0), (1.0, 1.0), (2.0, 0.0), (3.0, 0.0), (4.0, 1.0)]);
        let up = PiecewiseLinearPath {
            points: vec![(0.0, 0.0), (2.0, 2.0)],
        };
        assert_eq!(reflect_path_above_infimum(&up), up);
    }

    #[test]
    fn truncated_contour_stops_at_unexplored_child() {
        // Root with two children, only the first explored.
        let walk = Walk::from_measures(&[3.0, 1.0], &[m(&[1.0, 2.0]), m(&[])]).unwrap();
        let f = ForestPaths::from_walk(walk, &opts(SiblingOrder::Increasing)).unwrap();
        let c = f.contour.unwrap();
        assert_eq!(c.points, vec![(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 1.0), (4.0, 2.0)]);
        assert!(f.tree_ends.is_empty());
    }
}
