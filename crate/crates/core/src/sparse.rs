//! Compressed sparse row matrices, a triplet builder and Matrix Market I/O.

use std::io::{BufRead, Write};
use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{HdgError, Result};

/// Row-major compressed sparse matrix. Column indices are sorted within each
/// row and contain no duplicates.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

/// Accumulates `(row, col, value)` entries; duplicates are summed on build.
#[derive(Clone, Debug)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder { nrows, ncols, rows: Vec::new(), cols: Vec::new(), vals: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            rows: Vec::with_capacity(cap),
            cols: Vec::with_capacity(cap),
            vals: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, val: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.rows.push(row);
        self.cols.push(col);
        self.vals.push(val);
    }

    /// Adds `block[(i, j)]` at `(rows[i], cols[j])`.
    pub fn add_block(&mut self, rows: &[usize], cols: &[usize], block: &DMatrix<f64>) {
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                self.push(r, c, block[(i, j)]);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn build(self) -> CsrMatrix {
        CsrMatrix::from_triplets(self.nrows, self.ncols, &self.rows, &self.cols, &self.vals)
    }
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), data: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix { nrows: n, ncols: n, indptr: (0..=n).collect(), indices: (0..n).collect(), data: vec![1.0; n] }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        CsrMatrix { nrows: n, ncols: n, indptr: (0..=n).collect(), indices: (0..n).collect(), data: d.to_vec() }
    }

    /// Builds a matrix from coordinate lists, summing repeated entries.
    pub fn from_triplets(nrows: usize, ncols: usize, rows: &[usize], cols: &[usize], vals: &[f64]) -> Self {
        assert!(rows.len() == cols.len() && cols.len() == vals.len());
        let mut count = vec![0usize; nrows + 1];
        for &r in rows {
            count[r + 1] += 1;
        }
        for i in 0..nrows {
            count[i + 1] += count[i];
        }
        let mut next = count.clone();
        let mut tmp_c = vec![0usize; vals.len()];
        let mut tmp_v = vec![0.0; vals.len()];
        for k in 0..vals.len() {
            let p = next[rows[k]];
            tmp_c[p] = cols[k];
            tmp_v[p] = vals[k];
            next[rows[k]] += 1;
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(vals.len());
        let mut data = Vec::with_capacity(vals.len());
        indptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for i in 0..nrows {
            let (s, e) = (count[i], count[i + 1]);
            order.clear();
            order.extend(s..e);
            order.sort_by_key(|&p| tmp_c[p]);
            let mut last = usize::MAX;
            for &p in &order {
                if tmp_c[p] == last {
                    *data.last_mut().unwrap() += tmp_v[p];
                } else {
                    indices.push(tmp_c[p]);
                    data.push(tmp_v[p]);
                    last = tmp_c[p];
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix { nrows, ncols, indptr, indices, data }
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let mut b = TripletBuilder::new(a.nrows(), a.ncols());
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if a[(i, j)] != 0.0 {
                    b.push(i, j, a[(i, j)]);
                }
            }
        }
        b.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.data[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        match c.binary_search(&j) {
            Ok(p) => v[p],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for p in self.indptr[i]..self.indptr[i + 1] {
                s += self.data[p] * x[self.indices[p]];
            }
            *yi = s;
        }
    }

    /// `y += A x`.
    pub fn matvec_add(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        for (i, yi) in y.iter_mut().enumerate().take(self.nrows) {
            let mut s = 0.0;
            for p in self.indptr[i]..self.indptr[i + 1] {
                s += self.data[p] * x[self.indices[p]];
            }
            *yi += s;
        }
    }

    /// `y += Aᵀ x`.
    pub fn matvec_transpose_add(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for p in self.indptr[i]..self.indptr[i + 1] {
                y[self.indices[p]] += self.data[p] * xi;
            }
        }
    }

    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        self.matvec_transpose_add(x, &mut y);
        y
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut rows = Vec::with_capacity(self.nnz());
        let mut cols = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for p in self.indptr[i]..self.indptr[i + 1] {
                rows.push(self.indices[p]);
                cols.push(i);
            }
        }
        CsrMatrix::from_triplets(self.ncols, self.nrows, &rows, &cols, &self.data)
    }

    pub fn scaled(&self, s: f64) -> CsrMatrix {
        let mut m = self.clone();
        m.data.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// Entry-wise `self + s * other`.
    pub fn add_scaled(&self, other: &CsrMatrix, s: f64) -> CsrMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut b = TripletBuilder::with_capacity(self.nrows, self.ncols, self.nnz() + other.nnz());
        for (m, f) in [(self, 1.0), (other, s)] {
            for i in 0..m.nrows {
                for p in m.indptr[i]..m.indptr[i + 1] {
                    b.push(i, m.indices[p], f * m.data[p]);
                }
            }
        }
        b.build()
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.ncols, other.nrows);
        let mut b = TripletBuilder::new(self.nrows, other.ncols);
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut touched = Vec::new();
        for i in 0..self.nrows {
            touched.clear();
            for p in self.indptr[i]..self.indptr[i + 1] {
                let (k, a) = (self.indices[p], self.data[p]);
                for q in other.indptr[k]..other.indptr[k + 1] {
                    let j = other.indices[q];
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += a * other.data[q];
                }
            }
            for &j in &touched {
                b.push(i, j, acc[j]);
            }
        }
        b.build()
    }

    /// Copy of the block `rows x cols`, re-indexed from zero.
    pub fn submatrix(&self, rows: Range<usize>, cols: Range<usize>) -> CsrMatrix {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for i in rows.clone() {
            for p in self.indptr[i]..self.indptr[i + 1] {
                let j = self.indices[p];
                if cols.contains(&j) {
                    indices.push(j - cols.start);
                    data.push(self.data[p]);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix { nrows: rows.len(), ncols: cols.len(), indptr, indices, data }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for p in self.indptr[i]..self.indptr[i + 1] {
                a[(i, self.indices[p])] += self.data[p];
            }
        }
        a
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - Aᵀ|` over all entries.
    pub fn max_asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let mut m: f64 = 0.0;
        for i in 0..self.nrows {
            for p in self.indptr[i]..self.indptr[i + 1] {
                let j = self.indices[p];
                m = m.max((self.data[p] - self.get(j, i)).abs());
            }
        }
        m
    }

    /// Largest number of stored entries in a row.
    pub fn max_row_nnz(&self) -> usize {
        (0..self.nrows).map(|i| self.indptr[i + 1] - self.indptr[i]).max().unwrap_or(0)
    }

    /// Writes the matrix in Matrix Market `coordinate real general` format.
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            for p in self.indptr[i]..self.indptr[i + 1] {
                writeln!(out, "{} {} {:.17e}", i + 1, self.indices[p] + 1, self.data[p])?;
            }
        }
        Ok(())
    }

    /// Reads `coordinate real` Matrix Market data (general or symmetric).
    pub fn read_matrix_market<R: BufRead>(input: R) -> Result<CsrMatrix> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| HdgError::MatrixMarket("empty input".into()))??;
        let h = header.to_ascii_lowercase();
        let tokens: Vec<&str> = h.split_whitespace().collect();
        if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" || tokens[2] != "coordinate" {
            return Err(HdgError::MatrixMarket(format!("unsupported header '{header}'")));
        }
        if tokens[3] != "real" && tokens[3] != "integer" {
            return Err(HdgError::MatrixMarket(format!("unsupported field '{}'", tokens[3])));
        }
        let symmetric = match tokens[4] {
            "general" => false,
            "symmetric" => true,
            other => return Err(HdgError::MatrixMarket(format!("unsupported symmetry '{other}'"))),
        };
        let mut size: Option<(usize, usize, usize)> = None;
        let (mut rows, mut cols, mut vals) = (Vec::new(), Vec::new(), Vec::new());
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            let parts: Vec<&str> = t.split_whitespace().collect();
            let parse_err = |_| HdgError::MatrixMarket(format!("malformed line '{t}'"));
            match size {
                None => {
                    if parts.len() != 3 {
                        return Err(HdgError::MatrixMarket(format!("malformed size line '{t}'")));
                    }
                    let n: Vec<usize> = parts
                        .iter()
                        .map(|s| s.parse::<usize>().map_err(|_| HdgError::MatrixMarket(format!("malformed size line '{t}'"))))
                        .collect::<Result<_>>()?;
                    size = Some((n[0], n[1], n[2]));
                }
                Some((nr, nc, _)) => {
                    if parts.len() != 3 {
                        return Err(HdgError::MatrixMarket(format!("malformed line '{t}'")));
                    }
                    let i: usize = parts[0].parse().map_err(parse_err)?;
                    let j: usize = parts[1].parse().map_err(parse_err)?;
                    let v: f64 = parts[2].parse().map_err(|_| HdgError::MatrixMarket(format!("malformed line '{t}'")))?;
                    if i == 0 || j == 0 || i > nr || j > nc {
                        return Err(HdgError::MatrixMarket(format!("index out of range in '{t}'")));
                    }
                    rows.push(i - 1);
                    cols.push(j - 1);
                    vals.push(v);
                    if symmetric && i != j {
                        rows.push(j - 1);
                        cols.push(i - 1);
                        vals.push(v);
                    }
                }
            }
        }
        let (nr, nc, nnz) = size.ok_or_else(|| HdgError::MatrixMarket("missing size line".into()))?;
        let stored = if symmetric { rows.iter().zip(&cols).filter(|(r, c)| r >= c).count() } else { rows.len() };
        if stored != nnz {
            return Err(HdgError::MatrixMarket(format!("expected {nnz} entries, found {stored}")));
        }
        Ok(CsrMatrix::from_triplets(nr, nc, &rows, &cols, &vals))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += s * x`.
pub fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsrMatrix {
        let mut b = TripletBuilder::new(3, 4);
        b.push(0, 1, 2.0);
        b.push(2, 3, -1.0);
        b.push(0, 1, 0.5);
        b.push(1, 0, 4.0);
        b.push(0, 0, 1.0);
        b.build()
    }

    #[test]
    fn duplicates_are_summed_and_sorted() {
        let a = sample();
        assert_eq!(a.nnz(), 4);
        assert_eq!(a.row(0).0, &[0, 1]);
        assert_eq!(a.get(0, 1), 2.5);
        assert_eq!(a.get(2, 2), 0.0);
    }

    #[test]
    fn products_match_dense() {
        let a = sample();
        let x = [1.0, -2.0, 3.0, 0.5];
        let y = a.matvec(&x);
        let yd = a.to_dense() * nalgebra::DVector::from_column_slice(&x);
        for i in 0..3 {
            assert!((y[i] - yd[i]).abs() < 1e-15);
        }
        let z = [1.0, 2.0, -1.0];
        let t = a.matvec_transpose(&z);
        let td = a.to_dense().transpose() * nalgebra::DVector::from_column_slice(&z);
        for i in 0..4 {
            assert!((t[i] - td[i]).abs() < 1e-15);
        }
        let p = a.matmul(&a.transpose());
        assert!((p.to_dense() - a.to_dense() * a.to_dense().transpose()).abs().max() < 1e-14);
    }

    #[test]
    fn submatrix_extracts_block() {
        let a = sample();
        let s = a.submatrix(0..2, 1..4);
        assert_eq!((s.nrows(), s.ncols()), (2, 3));
        assert_eq!(s.get(0, 0), 2.5);
        assert_eq!(s.nnz(), 1);
    }

    #[test]
    fn matrix_market_round_trip() {
        let a = sample();
        let mut buf = Vec::new();
        a.write_matrix_market(&mut buf).unwrap();
        let b = CsrMatrix::read_matrix_market(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn matrix_market_symmetric_and_errors() {
        let s = "%%MatrixMarket matrix coordinate real symmetric\n% c\n2 2 2\n1 1 3.0\n2 1 1.5\n";
        let a = CsrMatrix::read_matrix_market(std::io::Cursor::new(s)).unwrap();
        assert_eq!(a.get(0, 1), 1.5);
        assert_eq!(a.get(1, 0), 1.5);
        let bad = "%%MatrixMarket matrix array real general\n1 1\n1.0\n";
        assert!(CsrMatrix::read_matrix_market(std::io::Cursor::new(bad)).is_err());
        let short = "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1.0\n";
        assert!(CsrMatrix::read_matrix_market(std::io::Cursor::new(short)).is_err());
    }
}
