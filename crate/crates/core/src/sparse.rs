//! Minimal CSR sparse matrices, sized for per-question local subgraphs.

/// Square sparse matrix in compressed-sparse-row form.
///
/// Rows index local entities; `row_ptr` has `n + 1` entries delimiting the
/// `(cols, vals)` slice of each row. Columns within a row are strictly
/// ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from entries sorted by `(row, col)` with no duplicates.
    ///
    /// Debug builds assert ordering, bounds and, implicitly through the
    /// caller's contract, the absence of duplicate coordinates.
    pub fn from_sorted_entries(n: usize, entries: &[(u32, u32, f64)]) -> SparseMatrix {
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals = Vec::with_capacity(entries.len());
        row_ptr.push(0);
        let mut row = 0u32;
        let mut prev: Option<(u32, u32)> = None;
        for &(i, j, v) in entries {
            debug_assert!((i as usize) < n && (j as usize) < n);
            debug_assert!(prev < Some((i, j)), "entries must be sorted by (row, col)");
            prev = Some((i, j));
            while row < i {
                row_ptr.push(cols.len());
                row += 1;
            }
            cols.push(j);
            vals.push(v);
        }
        while (row as usize) < n {
            row_ptr.push(cols.len());
            row += 1;
        }
        SparseMatrix { n, row_ptr, cols, vals }
    }

    pub fn zero(n: usize) -> SparseMatrix {
        SparseMatrix { n, row_ptr: vec![0; n + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Column indices and values of one row, aligned pairwise.
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[lo..hi], &self.vals[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&(j as u32)) {
            Ok(pos) => vals[pos],
            Err(_) => 0.0,
        }
    }

    /// Linear combination `sum_i coeffs[i] * matrices[i]`.
    ///
    /// Terms are accumulated in argument order into a dense per-row scratch,
    /// so the result is reproducible bit for bit. Zero coefficients are
    /// skipped; entries that cancel to exactly zero are dropped.
    pub fn weighted_sum(coeffs: &[f64], matrices: &[&SparseMatrix]) -> SparseMatrix {
        assert_eq!(coeffs.len(), matrices.len());
        let n = matrices.first().map_or(0, |m| m.n);
        for m in matrices {
            assert_eq!(m.n, n);
        }
        let mut scratch = vec![0.0f64; n];
        let mut touched: Vec<u32> = Vec::new();
        let mut entries: Vec<(u32, u32, f64)> = Vec::new();
        for i in 0..n {
            for (&c, m) in coeffs.iter().zip(matrices) {
                if c == 0.0 {
                    continue;
                }
                let (cols, vals) = m.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    if scratch[j as usize] == 0.0 {
                        touched.push(j);
                    }
                    scratch[j as usize] += c * v;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                let v = scratch[j as usize];
                scratch[j as usize] = 0.0;
                if v != 0.0 {
                    entries.push((i as u32, j, v));
                }
            }
            touched.clear();
        }
        SparseMatrix::from_sorted_entries(n, &entries)
    }

    /// Dense copy, for small matrices in diagnostics and tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[i][j as usize] = v;
            }
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i as u32, j, v))
        })
    }
}

/// Row-vector times matrix: `out[j] = sum_i row[i] * m[i][j]`.
///
/// `row` is sparse as `(index, value)` pairs; the output is dense with
/// accumulation in row order, then ascending column order per row.
pub fn vec_mat_mul(row: &[(u32, f64)], m: &SparseMatrix) -> Vec<f64> {
    let mut out = vec![0.0f64; m.size()];
    for &(i, x) in row {
        let (cols, vals) = m.row(i as usize);
        for (&j, &v) in cols.iter().zip(vals) {
            out[j as usize] += x * v;
        }
    }
    out
}
