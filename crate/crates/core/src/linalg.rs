//! Matrix containers and direct solvers.
//!
//! The coupled systems are "dense-bordered sparse": a sparse FEM block `A`
//! bordered by boundary-sized blocks,
//!
//! ```text
//! [ A  B ] [u]   [f]
//! [ C  D ] [φ] = [g]
//! ```
//!
//! [`BorderedLu`] factors `A` with a banded LU (reverse Cuthill–McKee
//! ordering, partial pivoting inside the band) and the Schur complement
//! `S = D − C A⁻¹ B` with a dense LU.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::{Error, Result};

/// Relative pivot threshold below which a system is reported singular.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-14;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Coordinate-format accumulator; duplicates are summed on [`finalize`](Self::finalize).
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.rows && col < self.cols);
        self.entries.push((row, col, value));
    }

    pub fn finalize(mut self) -> SparseMatrix {
        self.entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; self.rows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix {
            rows: self.rows,
            cols: self.cols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        TripletBuilder::new(rows, cols).finalize()
    }

    pub fn identity(n: usize) -> Self {
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.add(i, i, 1.0);
        }
        b.finalize()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "sparse matvec dimension");
        (0..self.rows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `y += alpha · self · x`.
    pub fn matvec_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        for (r, yr) in y.iter_mut().enumerate() {
            let s: f64 = self.row(r).map(|(c, v)| v * x[c]).sum();
            *yr += alpha * s;
        }
    }

    pub fn scaled(&self, alpha: f64) -> SparseMatrix {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= alpha);
        m
    }

    /// `alpha · self + beta · other`.
    pub fn linear_combination(&self, alpha: f64, other: &SparseMatrix, beta: f64) -> SparseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut b = TripletBuilder::new(self.rows, self.cols);
        for (r, c, v) in self.triplets() {
            b.add(r, c, alpha * v);
        }
        for (r, c, v) in other.triplets() {
            b.add(r, c, beta * v);
        }
        b.finalize()
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut b = TripletBuilder::new(self.cols, self.rows);
        for (r, c, v) in self.triplets() {
            b.add(c, r, v);
        }
        b.finalize()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.triplets() {
            d[(r, c)] += v;
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && self
                .triplets()
                .all(|(r, c, v)| (v - self.get(c, r)).abs() <= tol * (1.0 + v.abs()))
    }

    /// Keeps only entries for which `keep(row, col)` holds.
    pub fn filtered(&self, keep: impl Fn(usize, usize) -> bool) -> SparseMatrix {
        let mut b = TripletBuilder::new(self.rows, self.cols);
        for (r, c, v) in self.triplets() {
            if keep(r, c) {
                b.add(r, c, v);
            }
        }
        b.finalize()
    }

    /// Factors a square matrix with the banded LU.
    pub fn factorize(&self) -> Result<BandedLu> {
        BandedLu::factorize(self)
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "dense matvec dimension");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `xᵀ · self · x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn transpose(&self) -> DenseMatrix {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scaled(&self, alpha: f64) -> DenseMatrix {
        let mut m = self.clone();
        m.data.iter_mut().for_each(|v| *v *= alpha);
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest `|a_ij − a_ji|` relative to the largest entry.
    pub fn symmetry_defect(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut d: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..i {
                d = d.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        d / self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// Cholesky factor `L` (row-major, lower) if the matrix is symmetric
    /// positive definite.
    pub fn cholesky(&self) -> Option<DenseMatrix> {
        if self.rows != self.cols {
            return None;
        }
        let n = self.rows;
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) {
                return None;
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Some(l)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.symmetry_defect() < 1e-12 && self.cholesky().is_some()
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Dense LU with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn factorize(matrix: &DenseMatrix) -> Result<Self> {
        check_len(matrix.rows(), matrix.cols())?;
        let n = matrix.rows();
        let scale = matrix.max_abs();
        let threshold = SINGULAR_PIVOT_RATIO * scale;
        let mut lu = matrix.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pivot > threshold) || scale == 0.0 {
                return Err(Error::Singular { column: k, pivot });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let inv = 1.0 / lu[k * n + k];
            let (head, tail) = lu.split_at_mut((k + 1) * n);
            let pivot_row = &head[k * n..(k + 1) * n];
            for row in tail.chunks_mut(n) {
                let factor = row[k] * inv;
                row[k] = factor;
                if factor != 0.0 {
                    for j in k + 1..n {
                        row[j] -= factor * pivot_row[j];
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, rhs.len())?;
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let s: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - s) / row[i];
        }
        Ok(x)
    }
}

/// Reverse Cuthill–McKee ordering of the symmetrised sparsity pattern.
/// Returns `order` with `order[new] = old`.
pub fn reverse_cuthill_mckee(matrix: &SparseMatrix) -> Vec<usize> {
    let n = matrix.rows();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (r, c, _) in matrix.triplets() {
        if r != c {
            adjacency[r].push(c);
            adjacency[c].push(r);
        }
    }
    for a in &mut adjacency {
        a.sort_unstable();
        a.dedup();
    }
    let degree = |v: usize| adjacency[v].len();

    let bfs_levels = |root: usize, mask: &[bool]| -> (Vec<usize>, usize) {
        // returns visit order and eccentricity
        let mut level = vec![usize::MAX; n];
        let mut order = vec![root];
        level[root] = 0;
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for &w in &adjacency[v] {
                if !mask[w] && level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    order.push(w);
                }
            }
        }
        let ecc = level[*order.last().unwrap()];
        (order, ecc)
    };

    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        // pseudo-peripheral start node of the next component
        let mut root = (0..n)
            .filter(|&v| !placed[v])
            .min_by_key(|&v| degree(v))
            .unwrap();
        let (mut component, mut ecc) = bfs_levels(root, &placed);
        for _ in 0..8 {
            let last = *component.last().unwrap();
            let (candidate, cand_ecc) = bfs_levels(last, &placed);
            if cand_ecc <= ecc {
                break;
            }
            root = last;
            component = candidate;
            ecc = cand_ecc;
        }
        let _ = component;
        let mut queue = VecDeque::from([root]);
        placed[root] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adjacency[v].iter().copied().filter(|&w| !placed[w]).collect();
            next.sort_by_key(|&w| degree(w));
            for w in next {
                placed[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Banded LU with partial pivoting of a symmetrically permuted sparse
/// matrix (LAPACK `gbtrf` layout: the upper band grows by `kl`).
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    width: usize,
    band: Vec<f64>,
    pivots: Vec<usize>,
    /// `order[new] = old`
    order: Vec<usize>,
}

impl BandedLu {
    pub fn factorize(matrix: &SparseMatrix) -> Result<Self> {
        check_len(matrix.rows(), matrix.cols())?;
        let n = matrix.rows();
        let order = reverse_cuthill_mckee(matrix);
        let mut position = vec![0; n];
        for (new, &old) in order.iter().enumerate() {
            position[old] = new;
        }
        let mut kl = 0;
        let mut ku = 0;
        for (r, c, _) in matrix.triplets() {
            let (pr, pc) = (position[r], position[c]);
            if pr > pc {
                kl = kl.max(pr - pc);
            } else {
                ku = ku.max(pc - pr);
            }
        }
        let width = 2 * kl + ku + 1;
        let mut band = vec![0.0; n * width];
        // entry (i, j) lives at band[i * width + (j + kl - i)]
        for (r, c, v) in matrix.triplets() {
            let (i, j) = (position[r], position[c]);
            band[i * width + (j + kl - i)] += v;
        }
        let scale = matrix.max_abs();
        let threshold = SINGULAR_PIVOT_RATIO * scale;
        let upper = kl + ku;
        let mut pivots = vec![0; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = -1.0;
            for i in k..=last_row {
                let v = band[i * width + (k + kl - i)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > threshold) || scale == 0.0 {
                return Err(Error::Singular { column: k, pivot: best });
            }
            pivots[k] = p;
            let last_col = (k + upper).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    band.swap(k * width + (j + kl - k), p * width + (j + kl - p));
                }
            }
            let inv = 1.0 / band[k * width + kl];
            for i in k + 1..=last_row {
                let lik = band[i * width + (k + kl - i)] * inv;
                band[i * width + (k + kl - i)] = lik;
                if lik != 0.0 {
                    for j in k + 1..=last_col {
                        let ukj = band[k * width + (j + kl - k)];
                        band[i * width + (j + kl - i)] -= lik * ukj;
                    }
                }
            }
        }
        Ok(Self {
            n,
            kl,
            width,
            band,
            pivots,
            order,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Lower and upper bandwidth after reordering.
    pub fn bandwidth(&self) -> (usize, usize) {
        (self.kl, self.width - 2 * self.kl - 1)
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, rhs.len())?;
        let (n, kl, width) = (self.n, self.kl, self.width);
        let upper = width - 1 - kl;
        let mut x: Vec<f64> = self.order.iter().map(|&old| rhs[old]).collect();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    x[i] -= self.band[i * width + (k + kl - i)] * xk;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..=(i + upper).min(n - 1) {
                s -= self.band[i * width + (j + kl - i)] * x[j];
            }
            x[i] = s / self.band[i * width + kl];
        }
        let mut out = vec![0.0; n];
        for (new, &old) in self.order.iter().enumerate() {
            out[old] = x[new];
        }
        Ok(out)
    }
}

/// Block matrix `[A B; C D]` with sparse `A` (n×n), `B` (n×m), `C` (m×n) and
/// dense `D` (m×m).
#[derive(Debug, Clone, PartialEq)]
pub struct BorderedMatrix {
    pub a: SparseMatrix,
    pub b: SparseMatrix,
    pub c: SparseMatrix,
    pub d: DenseMatrix,
}

impl BorderedMatrix {
    pub fn new(a: SparseMatrix, b: SparseMatrix, c: SparseMatrix, d: DenseMatrix) -> Result<Self> {
        let n = a.rows();
        let m = d.rows();
        check_len(n, a.cols())?;
        check_len(m, d.cols())?;
        check_len(n, b.rows())?;
        check_len(m, b.cols())?;
        check_len(m, c.rows())?;
        check_len(n, c.cols())?;
        Ok(Self { a, b, c, d })
    }

    /// Size of the leading sparse block.
    pub fn n_primary(&self) -> usize {
        self.a.rows()
    }

    /// Size of the border.
    pub fn n_border(&self) -> usize {
        self.d.rows()
    }

    pub fn dim(&self) -> usize {
        self.n_primary() + self.n_border()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim());
        let n = self.n_primary();
        let (u, phi) = x.split_at(n);
        let mut top = self.a.matvec(u);
        self.b.matvec_add(1.0, phi, &mut top);
        let mut bottom = self.d.matvec(phi);
        self.c.matvec_add(1.0, u, &mut bottom);
        top.extend(bottom);
        top
    }

    pub fn frobenius_norm(&self) -> f64 {
        (self.a.frobenius_norm().powi(2)
            + self.b.frobenius_norm().powi(2)
            + self.c.frobenius_norm().powi(2)
            + self.d.frobenius_norm().powi(2))
        .sqrt()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.n_primary();
        let mut full = DenseMatrix::zeros(self.dim(), self.dim());
        for (r, c, v) in self.a.triplets() {
            full[(r, c)] = v;
        }
        for (r, c, v) in self.b.triplets() {
            full[(r, n + c)] = v;
        }
        for (r, c, v) in self.c.triplets() {
            full[(n + r, c)] = v;
        }
        for r in 0..self.n_border() {
            for c in 0..self.n_border() {
                full[(n + r, n + c)] = self.d[(r, c)];
            }
        }
        full
    }
}

/// Factorization of a [`BorderedMatrix`] via the Schur complement of its
/// sparse block. Immutable; solves may run concurrently.
#[derive(Debug)]
pub struct BorderedLu {
    n: usize,
    m: usize,
    primary: BandedLu,
    /// Columns of `A⁻¹ B`.
    a_inv_b: Vec<Vec<f64>>,
    c: SparseMatrix,
    schur: Option<DenseLu>,
    #[cfg(debug_assertions)]
    matrix: BorderedMatrix,
}

/// Factors the bordered system. The sparse block `A` must be nonsingular.
pub fn factorize(matrix: &BorderedMatrix) -> Result<BorderedLu> {
    BorderedLu::factorize(matrix)
}

impl BorderedLu {
    pub fn factorize(matrix: &BorderedMatrix) -> Result<Self> {
        let n = matrix.n_primary();
        let m = matrix.n_border();
        let primary = matrix.a.factorize()?;
        let columns: Vec<Vec<f64>> = {
            let bt = matrix.b.transpose();
            (0..m)
                .map(|j| {
                    let mut col = vec![0.0; n];
                    for (r, v) in bt.row(j) {
                        col[r] = v;
                    }
                    col
                })
                .collect()
        };
        let a_inv_b: Vec<Vec<f64>> = columns
            .par_iter()
            .map(|col| primary.solve(col))
            .collect::<Result<_>>()?;
        let schur = if m > 0 {
            let mut s = matrix.d.clone();
            let rows: Vec<Vec<f64>> = (0..m)
                .into_par_iter()
                .map(|r| {
                    (0..m)
                        .map(|j| matrix.c.row(r).map(|(k, v)| v * a_inv_b[j][k]).sum::<f64>())
                        .collect()
                })
                .collect();
            for (r, row) in rows.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    s[(r, j)] -= v;
                }
            }
            Some(DenseLu::factorize(&s)?)
        } else {
            None
        };
        Ok(Self {
            n,
            m,
            primary,
            a_inv_b,
            c: matrix.c.clone(),
            schur,
            #[cfg(debug_assertions)]
            matrix: matrix.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n + self.m
    }

    /// Solves for the stacked vector `(u, φ)`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), rhs.len())?;
        let (f, g) = rhs.split_at(self.n);
        let mut u = self.primary.solve(f)?;
        let mut x = Vec::with_capacity(self.dim());
        if let Some(schur) = &self.schur {
            let cy = self.c.matvec(&u);
            let reduced: Vec<f64> = g.iter().zip(&cy).map(|(a, b)| a - b).collect();
            let phi = schur.solve(&reduced)?;
            for (j, pj) in phi.iter().enumerate() {
                if *pj != 0.0 {
                    for (ui, wi) in u.iter_mut().zip(&self.a_inv_b[j]) {
                        *ui -= pj * wi;
                    }
                }
            }
            x.extend(u);
            x.extend(phi);
        } else {
            x.extend(u);
        }
        #[cfg(debug_assertions)]
        {
            let ax = self.matrix.matvec(&x);
            let residual = ax.iter().zip(rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let bnorm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
            let bound = 1e-10 * (self.matrix.frobenius_norm() * xnorm + bnorm);
            debug_assert!(
                residual <= bound,
                "bordered solve residual {residual:e} exceeds {bound:e}"
            );
        }
        Ok(x)
    }
}
