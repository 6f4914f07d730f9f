//! Complete binary sum tree over per-unit rates.
//!
//! Supports O(log n) point updates and O(log n) weighted selection
//! (smallest index whose prefix sum reaches a target). Every internal
//! node is always recomputed as `left + right`, so the stored values are
//! a pure function of the current leaves: a tree maintained through any
//! sequence of point updates is bit-identical to one rebuilt from scratch
//! over the same leaf values. The KMC engine relies on that property to
//! make local and global updating produce identical event sequences.

#[derive(Debug, Clone)]
pub struct SumTree {
    /// Number of addressable leaves (may be less than the padded size).
    n: usize,
    /// Padded leaf count, a power of two.
    size: usize,
    /// Heap layout: root at 1, leaves at `size..size+n`.
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn with_len(n: usize) -> Self {
        assert!(n > 0, "sum tree needs at least one leaf");
        let size = n.next_power_of_two();
        Self {
            n,
            size,
            nodes: vec![0.0; 2 * size],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Replace every leaf and rebuild all internal nodes bottom-up.
    pub fn rebuild(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.n);
        self.nodes[self.size..self.size + self.n].copy_from_slice(values);
        for slot in self.nodes[self.size + self.n..].iter_mut() {
            *slot = 0.0;
        }
        for i in (1..self.size).rev() {
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    pub fn get(&self, i: usize) -> f64 {
        self.nodes[self.size + i]
    }

    pub fn set(&mut self, i: usize, value: f64) {
        debug_assert!(i < self.n);
        let mut idx = self.size + i;
        self.nodes[idx] = value;
        idx /= 2;
        while idx >= 1 {
            self.nodes[idx] = self.nodes[2 * idx] + self.nodes[2 * idx + 1];
            idx /= 2;
        }
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    /// Smallest index `l` with `Σ_{j<=l} leaf(j) >= target`, skipping
    /// zero-rate leaves that a degenerate target (0, or a rounded-up
    /// boundary) could otherwise land on.
    ///
    /// Returns `None` when the tree holds no positive rate.
    pub fn select(&self, target: f64) -> Option<usize> {
        if self.total() <= 0.0 {
            return None;
        }
        if target <= 0.0 {
            return self.first_positive();
        }
        let mut t = target;
        let mut i = 1usize;
        while i < self.size {
            let left = 2 * i;
            if self.nodes[left] >= t {
                i = left;
            } else {
                t -= self.nodes[left];
                i = left + 1;
            }
        }
        let mut leaf = i - self.size;
        // Float-boundary guard: never report a unit whose rate is zero.
        if self.nodes[self.size + leaf] <= 0.0 {
            leaf = self.next_positive(leaf)?;
        }
        Some(leaf.min(self.n - 1))
    }

    fn first_positive(&self) -> Option<usize> {
        let mut i = 1usize;
        while i < self.size {
            i = if self.nodes[2 * i] > 0.0 { 2 * i } else { 2 * i + 1 };
        }
        let leaf = i - self.size;
        (self.nodes[self.size + leaf] > 0.0).then_some(leaf)
    }

    fn next_positive(&self, from: usize) -> Option<usize> {
        (from + 1..self.n)
            .find(|&j| self.nodes[self.size + j] > 0.0)
            .or_else(|| (0..from).rev().find(|&j| self.nodes[self.size + j] > 0.0))
    }
}
