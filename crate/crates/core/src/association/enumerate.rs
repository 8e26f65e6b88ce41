//! Exhaustive enumeration of every feasible assignment. Exponential; meant as
//! an oracle for small instances only.

/// Returns the best objective and a matrix attaining it, visiting every
/// binary matrix with row sums ≤ `row_cap`, column sums ≤ `col_cap` and
/// support inside the `Some` cells.
pub fn enumerate_optimum(l: usize, k: usize, w: &[Option<f64>], row_cap: usize, col_cap: usize) -> (f64, Vec<bool>) {
    assert_eq!(w.len(), l * k);
    let cols: Vec<Vec<usize>> = (0..k).map(|ue| (0..l).filter(|&ap| w[ap * k + ue].is_some()).collect()).collect();
    let mut st = State {
        l,
        k,
        w,
        row_cap,
        col_cap,
        cols: &cols,
        rows: vec![0; l],
        cur: vec![false; l * k],
        best: f64::NEG_INFINITY,
        best_a: vec![false; l * k],
    };
    st.column(0, 0.0);
    (st.best, st.best_a)
}

struct State<'a> {
    l: usize,
    k: usize,
    w: &'a [Option<f64>],
    row_cap: usize,
    col_cap: usize,
    cols: &'a [Vec<usize>],
    rows: Vec<usize>,
    cur: Vec<bool>,
    best: f64,
    best_a: Vec<bool>,
}

impl State<'_> {
    fn column(&mut self, ue: usize, acc: f64) {
        if ue == self.k {
            if acc > self.best {
                self.best = acc;
                self.best_a.copy_from_slice(&self.cur);
            }
            return;
        }
        self.subset(ue, 0, 0, acc);
    }

    /// Chooses, for column `ue`, whether to include each eligible AP from
    /// position `pos` on.
    fn subset(&mut self, ue: usize, pos: usize, taken: usize, acc: f64) {
        let cands = self.cols[ue].len();
        if pos == cands {
            self.column(ue + 1, acc);
            return;
        }
        let ap = self.cols[ue][pos];
        self.subset(ue, pos + 1, taken, acc);
        if taken < self.col_cap && self.rows[ap] < self.row_cap {
            let i = ap * self.k + ue;
            self.rows[ap] += 1;
            self.cur[i] = true;
            self.subset(ue, pos + 1, taken + 1, acc + self.w[i].unwrap());
            self.cur[i] = false;
            self.rows[ap] -= 1;
        }
        debug_assert!(ap < self.l);
    }
}

/// Number of feasible matrices, for sizing tests.
pub fn count_feasible(l: usize, k: usize, mask: &[bool], row_cap: usize, col_cap: usize) -> u64 {
    fn rec(ue: usize, pos: usize, taken: usize, k: usize, cols: &[Vec<usize>], rows: &mut [usize], rc: usize, cc: usize) -> u64 {
        if ue == k {
            return 1;
        }
        if pos == cols[ue].len() {
            return rec(ue + 1, 0, 0, k, cols, rows, rc, cc);
        }
        let ap = cols[ue][pos];
        let mut n = rec(ue, pos + 1, taken, k, cols, rows, rc, cc);
        if taken < cc && rows[ap] < rc {
            rows[ap] += 1;
            n += rec(ue, pos + 1, taken + 1, k, cols, rows, rc, cc);
            rows[ap] -= 1;
        }
        n
    }
    let cols: Vec<Vec<usize>> = (0..k).map(|ue| (0..l).filter(|&ap| mask[ap * k + ue]).collect()).collect();
    rec(0, 0, 0, k, &cols, &mut vec![0; l], row_cap, col_cap)
}
