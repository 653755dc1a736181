//! Sparse `L D Lᵀ` factorization of symmetric positive (semi)definite
//! matrices with a minimum-degree elimination order.
//!
//! The symbolic phase simulates elimination on the adjacency graph, which
//! yields both the ordering and the exact fill pattern of `L`. The numeric
//! phase is a right-looking update over that fixed pattern, so one symbolic
//! analysis serves every refactorization with new values.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

/// Location of a matrix entry in the factor storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Diag(usize),
    Off(usize),
}

#[derive(Debug, Clone)]
pub struct Symbolic {
    n: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    /// `inv[old] = new`.
    inv: Vec<usize>,
    col_ptr: Vec<usize>,
    /// Row labels (new ordering) of the strictly lower entries, sorted per column.
    row_idx: Vec<usize>,
    /// Per column: `(p, q, target)` with `p < q` positions inside the column
    /// and `target` the storage index of entry `(row_idx[q], row_idx[p])`.
    upd_ptr: Vec<usize>,
    updates: Vec<(usize, usize, usize)>,
}

impl Symbolic {
    /// Analyzes the pattern given by the off-diagonal entries `(a, b)`
    /// (either orientation, duplicates allowed) of an `n × n` matrix.
    pub fn analyze(n: usize, entries: &[(usize, usize)]) -> Self {
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for &(a, b) in entries {
            if a != b {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
        let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
            (0..n).map(|v| Reverse((adj[v].len(), v))).collect();
        let mut eliminated = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut patterns: Vec<Vec<usize>> = vec![Vec::new(); n];
        while let Some(Reverse((deg, v))) = heap.pop() {
            if eliminated[v] || deg != adj[v].len() {
                continue;
            }
            eliminated[v] = true;
            order.push(v);
            let nbrs: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
            for &a in &nbrs {
                adj[a].remove(&v);
                for &b in &nbrs {
                    if a != b {
                        adj[a].insert(b);
                    }
                }
            }
            for &a in &nbrs {
                heap.push(Reverse((adj[a].len(), a)));
            }
            patterns[v] = nbrs;
        }
        debug_assert_eq!(order.len(), n);

        let mut inv = vec![0; n];
        for (new, &old) in order.iter().enumerate() {
            inv[old] = new;
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for &old in &order {
            let mut rows: Vec<usize> = patterns[old].iter().map(|&o| inv[o]).collect();
            rows.sort_unstable();
            row_idx.extend(rows);
            col_ptr.push(row_idx.len());
        }

        let mut sym = Symbolic {
            n,
            perm: order,
            inv,
            col_ptr,
            row_idx,
            upd_ptr: vec![0],
            updates: Vec::new(),
        };
        let mut updates = Vec::new();
        let mut upd_ptr = vec![0];
        for j in 0..n {
            let (lo, hi) = (sym.col_ptr[j], sym.col_ptr[j + 1]);
            for p in lo..hi {
                for q in (p + 1)..hi {
                    let target = sym
                        .find(sym.row_idx[p], sym.row_idx[q])
                        .expect("fill pattern is closed under elimination");
                    updates.push((p, q, target));
                }
            }
            upd_ptr.push(updates.len());
        }
        sym.updates = updates;
        sym.upd_ptr = upd_ptr;
        sym
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Storage index of lower entry (row, col) in new labels, `col < row`.
    fn find(&self, col: usize, row: usize) -> Option<usize> {
        let (lo, hi) = (self.col_ptr[col], self.col_ptr[col + 1]);
        self.row_idx[lo..hi]
            .binary_search(&row)
            .ok()
            .map(|k| lo + k)
    }

    /// Storage slot of original entry `(a, b)`; `None` if outside the pattern.
    pub fn slot(&self, a: usize, b: usize) -> Option<Slot> {
        let (i, j) = (self.inv[a], self.inv[b]);
        if i == j {
            return Some(Slot::Diag(i));
        }
        let (col, row) = (i.min(j), i.max(j));
        self.find(col, row).map(Slot::Off)
    }

    /// Factorizes the matrix whose diagonal (indexed by new labels) and
    /// strictly lower entries (aligned with the pattern) are given.
    ///
    /// Pivots below `pivot_tol` are replaced by a huge value, which
    /// effectively drops linearly dependent rows.
    pub fn factor(&self, diag: &[f64], lower: &[f64], pivot_tol: f64) -> Numeric {
        let mut d = diag.to_vec();
        let mut l = lower.to_vec();
        let mut dropped = 0;
        for j in 0..self.n {
            let mut dj = d[j];
            if !(dj > pivot_tol) {
                dj = 1e64;
                dropped += 1;
            }
            d[j] = dj;
            let (lo, hi) = (self.col_ptr[j], self.col_ptr[j + 1]);
            for v in &mut l[lo..hi] {
                *v /= dj;
            }
            for p in lo..hi {
                let lp = l[p];
                d[self.row_idx[p]] -= lp * lp * dj;
            }
            for &(p, q, target) in &self.updates[self.upd_ptr[j]..self.upd_ptr[j + 1]] {
                l[target] -= l[p] * l[q] * dj;
            }
        }
        Numeric { d, l, dropped }
    }

    /// Solves `M x = rhs` with `rhs` and the result in original labels.
    pub fn solve(&self, num: &Numeric, rhs: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.perm.iter().map(|&old| rhs[old]).collect();
        for j in 0..self.n {
            let yj = y[j];
            if yj != 0.0 {
                for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                    y[self.row_idx[p]] -= num.l[p] * yj;
                }
            }
        }
        for j in 0..self.n {
            y[j] /= num.d[j];
        }
        for j in (0..self.n).rev() {
            let mut acc = y[j];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                acc -= num.l[p] * y[self.row_idx[p]];
            }
            y[j] = acc;
        }
        let mut out = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = y[new];
        }
        out
    }

    /// `y = M x` for the matrix given in factor-storage layout (before factoring).
    pub fn multiply(&self, diag: &[f64], lower: &[f64], x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let oj = self.perm[j];
            y[oj] += diag[j] * x[oj];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let oi = self.perm[self.row_idx[p]];
                y[oi] += lower[p] * x[oj];
                y[oj] += lower[p] * x[oi];
            }
        }
        y
    }
}

#[derive(Debug, Clone)]
pub struct Numeric {
    d: Vec<f64>,
    l: Vec<f64>,
    /// Number of pivots replaced because they fell below the tolerance.
    pub dropped: usize,
}
