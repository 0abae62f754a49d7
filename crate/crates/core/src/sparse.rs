//! Symmetric positive-definite direct solver.
//!
//! Rows are renumbered with reverse Cuthill-McKee and stored as a variable
//! band (skyline) lower triangle, then factored with a row-oriented Cholesky.
//! Every step visits entries in a fixed order, so identical assembly
//! sequences give bit-identical factors and solutions.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

/// Undirected graph of structurally nonzero couplings between unknowns.
#[derive(Debug, Clone)]
pub struct Pattern {
    adjacency: Vec<Vec<usize>>,
    remote: Vec<Vec<usize>>,
}

impl Pattern {
    /// Empty pattern over `n` unknowns.
    pub fn new(n: usize) -> Self {
        Pattern {
            adjacency: vec![Vec::new(); n],
            remote: vec![Vec::new(); n],
        }
    }

    /// Marks every pair in `clique` as coupled. Out-of-range entries are ignored.
    pub fn add_clique(&mut self, clique: &[usize]) {
        link(&mut self.adjacency, clique);
    }

    /// Like [`Pattern::add_clique`] but left out of the ordering, so a few
    /// long-range couplings widen only their own rows instead of the band.
    pub fn add_remote_clique(&mut self, clique: &[usize]) {
        link(&mut self.remote, clique);
    }

    fn finish(&mut self) {
        for row in &mut self.adjacency {
            row.sort_unstable();
            row.dedup();
        }
    }

    /// Reverse Cuthill-McKee order: `order[k]` is the unknown placed at `k`.
    pub fn rcm_order(&mut self) -> Vec<usize> {
        self.finish();
        let n = self.adjacency.len();
        let degree: Vec<usize> = self.adjacency.iter().map(Vec::len).collect();
        let mut visited = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::new();
        let mut seeds: Vec<usize> = (0..n).collect();
        seeds.sort_by_key(|&v| (degree[v], v));
        for &seed in &seeds {
            if visited[seed] {
                continue;
            }
            let start = self.peripheral(seed, &degree);
            visited[start] = true;
            queue.push_back(start);
            while let Some(v) = queue.pop_front() {
                order.push(v);
                let mut next: Vec<usize> = self.adjacency[v]
                    .iter()
                    .copied()
                    .filter(|&w| !visited[w])
                    .collect();
                next.sort_by_key(|&w| (degree[w], w));
                for w in next {
                    visited[w] = true;
                    queue.push_back(w);
                }
            }
        }
        order.reverse();
        order
    }

    /// George-Liu pseudo-peripheral node search within the component of `seed`.
    fn peripheral(&self, seed: usize, degree: &[usize]) -> usize {
        let mut root = seed;
        let mut depth = 0;
        for _ in 0..8 {
            let levels = self.level_structure(root);
            let last = levels.last().cloned().unwrap_or_default();
            let candidate = *last
                .iter()
                .min_by_key(|&&v| (degree[v], v))
                .unwrap_or(&root);
            if levels.len() <= depth {
                break;
            }
            depth = levels.len();
            if candidate == root {
                break;
            }
            root = candidate;
        }
        root
    }

    fn level_structure(&self, root: usize) -> Vec<Vec<usize>> {
        let n = self.adjacency.len();
        let mut level = vec![usize::MAX; n];
        level[root] = 0;
        let mut levels = vec![vec![root]];
        loop {
            let mut next = Vec::new();
            let k = levels.len();
            for &v in &levels[k - 1] {
                for &w in &self.adjacency[v] {
                    if level[w] == usize::MAX {
                        level[w] = k;
                        next.push(w);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            levels.push(next);
        }
        levels
    }
}

fn link(adjacency: &mut [Vec<usize>], clique: &[usize]) {
    let n = adjacency.len();
    for &a in clique {
        if a >= n {
            continue;
        }
        for &b in clique {
            if b < n && a != b {
                adjacency[a].push(b);
            }
        }
    }
}

/// Symmetric matrix in permuted skyline storage (lower triangle by rows).
#[derive(Debug, Clone, PartialEq)]
pub struct SkylineMatrix {
    /// `perm[old] = new`.
    perm: Vec<usize>,
    /// `order[new] = old`.
    order: Vec<usize>,
    /// First stored column of each permuted row.
    first: Vec<usize>,
    /// Offset of the first stored entry of each row; length `n + 1`.
    start: Vec<usize>,
    values: Vec<f64>,
}

/// Cholesky factor failure: the original index of the row that broke down.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroPivot(pub usize);

impl SkylineMatrix {
    /// Allocates storage for `pattern` under its RCM ordering.
    pub fn new(mut pattern: Pattern) -> Self {
        let order = pattern.rcm_order();
        let n = order.len();
        let mut perm = vec![0; n];
        for (new, &old) in order.iter().enumerate() {
            perm[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (old, (row, remote)) in pattern.adjacency.iter().zip(&pattern.remote).enumerate() {
            let r = perm[old];
            for &w in row.iter().chain(remote) {
                let c = perm[w];
                if c < first[r] {
                    first[r] = c;
                }
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut offset = 0;
        for r in 0..n {
            start.push(offset);
            offset += r - first[r] + 1;
        }
        start.push(offset);
        SkylineMatrix {
            perm,
            order,
            first,
            start,
            values: vec![0.0; offset],
        }
    }

    /// Number of unknowns.
    pub fn dim(&self) -> usize {
        self.order.len()
    }

    /// Stored entries (profile size).
    pub fn profile_len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    fn slot(&self, r: usize, c: usize) -> Option<usize> {
        if c < self.first[r] || c > r {
            None
        } else {
            Some(self.start[r] + c - self.first[r])
        }
    }

    /// Adds `v` to the symmetric pair `(i, j)` / `(j, i)`, counting it once.
    ///
    /// Call this with every entry of a full symmetric block: the half that
    /// falls in the upper triangle of the permuted matrix is dropped.
    ///
    /// # Panics
    /// If `(i, j)` lies outside the pattern the matrix was built from.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = (self.perm[i], self.perm[j]);
        if c > r {
            return;
        }
        let k = self
            .slot(r, c)
            .expect("entry outside the assembled sparsity pattern");
        self.values[k] += v;
    }

    /// Entry `(i, j)` in original numbering.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = (self.perm[i], self.perm[j]);
        let (r, c) = if c > r { (c, r) } else { (r, c) };
        self.slot(r, c).map_or(0.0, |k| self.values[k])
    }

    /// `y = A x` in original numbering.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let xp: Vec<f64> = self.order.iter().map(|&o| x[o]).collect();
        let mut yp = vec![0.0; n];
        for r in 0..n {
            let f = self.first[r];
            let row = &self.values[self.start[r]..self.start[r + 1]];
            let mut acc = 0.0;
            for (k, &a) in row.iter().enumerate() {
                let c = f + k;
                acc += a * xp[c];
                if c != r {
                    yp[c] += a * xp[r];
                }
            }
            yp[r] += acc;
        }
        let mut y = vec![0.0; n];
        for (new, &old) in self.order.iter().enumerate() {
            y[old] = yp[new];
        }
        y
    }

    /// Cholesky factorization `A = L L^T`.
    pub fn factor(&self) -> Result<Cholesky, ZeroPivot> {
        let n = self.dim();
        let mut l = self.values.clone();
        for r in 0..n {
            let fr = self.first[r];
            let sr = self.start[r];
            for c in fr..=r {
                let fc = self.first[c];
                let sc = self.start[c];
                let k0 = fr.max(fc);
                let mut s = l[sr + c - fr];
                let a = &l[sr + k0 - fr..sr + c - fr];
                let b = &l[sc + k0 - fc..sc + c - fc];
                s -= dot(a, b);
                if c < r {
                    l[sr + c - fr] = s / l[sc + c - fc];
                } else {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(ZeroPivot(self.order[r]));
                    }
                    l[sr + c - fr] = libm::sqrt(s);
                }
            }
        }
        Ok(Cholesky {
            perm: self.perm.clone(),
            order: self.order.clone(),
            first: self.first.clone(),
            start: self.start.clone(),
            values: l,
        })
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Factor produced by [`SkylineMatrix::factor`].
#[derive(Debug, Clone)]
pub struct Cholesky {
    perm: Vec<usize>,
    order: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<f64>,
}

impl Cholesky {
    /// Solves `A x = b` in original numbering.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.order.len();
        let mut y: Vec<f64> = self.order.iter().map(|&o| b[o]).collect();
        // L y = b
        for r in 0..n {
            let f = self.first[r];
            let row = &self.values[self.start[r]..self.start[r + 1]];
            let s = y[r] - dot(&row[..r - f], &y[f..r]);
            y[r] = s / row[r - f];
        }
        // L^T x = y
        for r in (0..n).rev() {
            let f = self.first[r];
            let row = &self.values[self.start[r]..self.start[r + 1]];
            y[r] /= row[r - f];
            let yr = y[r];
            for (k, &a) in row[..r - f].iter().enumerate() {
                y[f + k] -= a * yr;
            }
        }
        let mut x = vec![0.0; n];
        for (old, &new) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> SkylineMatrix {
        let mut p = Pattern::new(n);
        for i in 0..n - 1 {
            p.add_clique(&[i, i + 1]);
        }
        let mut a = SkylineMatrix::new(p);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i + 1 < n {
                a.add(i, i + 1, -1.0);
                a.add(i + 1, i, -1.0);
            }
        }
        a
    }

    #[test]
    fn tridiagonal_solve() {
        let n = 9;
        let a = laplacian_1d(n);
        assert_eq!(a.get(3, 4), -1.0);
        assert_eq!(a.get(4, 3), -1.0);
        assert_eq!(a.get(0, 5), 0.0);
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = a.mul_vec(&x);
        let sol = a.factor().unwrap().solve(&b);
        for (u, v) in sol.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn rcm_shrinks_scrambled_band() {
        // A path graph numbered in a scrambled order has a wide natural band.
        let n = 50;
        let label = |k: usize| (k * 17) % n;
        let mut p = Pattern::new(n);
        for k in 0..n - 1 {
            p.add_clique(&[label(k), label(k + 1)]);
        }
        let a = SkylineMatrix::new(p);
        // Bandwidth one after reordering: n diagonal + n - 1 off-diagonal.
        assert_eq!(a.profile_len(), 2 * n - 1);
    }

    #[test]
    fn remote_clique_widens_only_its_row() {
        let n = 40;
        let mut p = Pattern::new(n);
        for k in 0..n - 1 {
            p.add_clique(&[k, k + 1]);
        }
        p.add_remote_clique(&[0, n - 1]);
        let mut a = SkylineMatrix::new(p);
        assert_eq!(a.profile_len(), 2 * n - 1 + n - 2);
        // Ring Laplacian plus identity, solved against a known answer.
        for k in 0..n {
            let next = (k + 1) % n;
            a.add(k, k, 3.0);
            a.add(k, next, -1.0);
            a.add(next, k, -1.0);
        }
        let x: Vec<f64> = (0..n).map(|k| (k as f64 * 0.3).sin()).collect();
        let b = a.mul_vec(&x);
        let y = a.factor().unwrap().solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_pivot_reports_original_row() {
        let mut p = Pattern::new(3);
        p.add_clique(&[0, 1, 2]);
        let mut a = SkylineMatrix::new(p);
        a.add(0, 0, 1.0);
        a.add(2, 2, 1.0);
        assert_eq!(a.factor().unwrap_err(), ZeroPivot(1));
    }

    #[test]
    fn disconnected_components() {
        let mut p = Pattern::new(4);
        p.add_clique(&[0, 3]);
        p.add_clique(&[1, 2]);
        let mut a = SkylineMatrix::new(p);
        for (i, j, v) in [
            (0, 0, 4.0),
            (3, 3, 3.0),
            (0, 3, 1.0),
            (3, 0, 1.0),
            (1, 1, 2.0),
            (2, 2, 5.0),
            (1, 2, -1.0),
            (2, 1, -1.0),
        ] {
            a.add(i, j, v);
        }
        let b = [1.0, 2.0, 3.0, 4.0];
        let x = a.factor().unwrap().solve(&b);
        let r = a.mul_vec(&x);
        for k in 0..4 {
            assert!((r[k] - b[k]).abs() < 1e-13);
        }
    }
}
