//! Depth-first branch-and-bound over the unmasked cells, heaviest first.
//! Kept as an independent cross-check of the flow solver.

pub fn branch_and_bound(l: usize, k: usize, w: &[Option<f64>], row_cap: usize, col_cap: usize) -> (f64, Vec<bool>) {
    assert_eq!(w.len(), l * k);
    let mut cells: Vec<(usize, f64)> = w.iter().enumerate().filter_map(|(i, w)| w.map(|w| (i, w))).collect();
    cells.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut s = Search {
        k,
        cells,
        row_cap,
        col_cap,
        rows: vec![0; l],
        cols: vec![0; k],
        cur: vec![false; l * k],
        best: 0.0,
        best_a: vec![false; l * k],
    };
    s.dfs(0, 0.0);
    (s.best, s.best_a)
}

struct Search {
    k: usize,
    cells: Vec<(usize, f64)>,
    row_cap: usize,
    col_cap: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    cur: Vec<bool>,
    best: f64,
    best_a: Vec<bool>,
}

impl Search {
    fn open(&self, i: usize) -> bool {
        self.rows[i / self.k] < self.row_cap && self.cols[i % self.k] < self.col_cap
    }

    /// Upper bound on what cells from `from` on can still add: each UE takes
    /// at most its remaining capacity of its heaviest still-open cells.
    fn bound(&self, from: usize) -> f64 {
        let mut left: Vec<usize> = self.cols.iter().map(|&c| self.col_cap - c).collect();
        let mut total = 0.0;
        for &(i, w) in &self.cells[from..] {
            let ue = i % self.k;
            if left[ue] > 0 && self.rows[i / self.k] < self.row_cap {
                left[ue] -= 1;
                total += w;
            }
        }
        total
    }

    fn dfs(&mut self, pos: usize, acc: f64) {
        if acc > self.best {
            self.best = acc;
            self.best_a.copy_from_slice(&self.cur);
        }
        if pos == self.cells.len() || acc + self.bound(pos) <= self.best {
            return;
        }
        let (i, w) = self.cells[pos];
        if self.open(i) {
            self.rows[i / self.k] += 1;
            self.cols[i % self.k] += 1;
            self.cur[i] = true;
            self.dfs(pos + 1, acc + w);
            self.cur[i] = false;
            self.rows[i / self.k] -= 1;
            self.cols[i % self.k] -= 1;
        }
        self.dfs(pos + 1, acc);
    }
}
