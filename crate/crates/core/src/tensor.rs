//! Dense row-major matrices of f64, sized for small-network training.
//!
//! The multiply kernels parallelize over output rows via [`crate::parallel`];
//! each output element is always accumulated in the same index order, so
//! results do not depend on the thread count.

use crate::parallel;

/// A rows × cols matrix of f64 in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor2 { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Tensor2 { rows, cols, data: vec![value; rows * cols] }
    }

    /// Build from a row-major vector. Panics if the length does not match.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "tensor data length mismatch");
        Tensor2 { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |v| v.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Tensor2 { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.data[r * c..(r + 1) * c]
    }

    /// Copy of a contiguous block of rows.
    pub fn rows_slice(&self, start: usize, count: usize) -> Tensor2 {
        assert!(start + count <= self.rows);
        let c = self.cols;
        Tensor2 {
            rows: count,
            cols: c,
            data: self.data[start * c..(start + count) * c].to_vec(),
        }
    }

    pub fn is_all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor2 {
        Tensor2 {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn map_inplace(&mut self, f: impl Fn(f64) -> f64) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }

    /// Elementwise combine; shapes must agree.
    pub fn zip_map(&self, other: &Tensor2, f: impl Fn(f64, f64) -> f64) -> Tensor2 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        Tensor2 {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Tensor2) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// Broadcast-add a length-`cols` vector to every row.
    pub fn add_row_vec(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.cols, "bias length mismatch");
        let c = self.cols;
        for row in self.data.chunks_mut(c) {
            for (x, b) in row.iter_mut().zip(v) {
                *x += b;
            }
        }
    }

    /// Sum over rows, yielding a length-`cols` vector.
    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for row in self.data.chunks(self.cols) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    /// Horizontal concatenation `[self | other]`; row counts must agree.
    pub fn hcat(&self, other: &Tensor2) -> Tensor2 {
        assert_eq!(self.rows, other.rows, "row count mismatch");
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Tensor2 { rows: self.rows, cols, data }
    }

    /// Columns `[start, start+count)` as a new tensor.
    pub fn columns(&self, start: usize, count: usize) -> Tensor2 {
        assert!(start + count <= self.cols);
        let mut data = Vec::with_capacity(self.rows * count);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[start..start + count]);
        }
        Tensor2 { rows: self.rows, cols: count, data }
    }

    /// C = self · other, with self r×k and other k×c.
    pub fn matmul(&self, other: &Tensor2) -> Tensor2 {
        assert_eq!(self.cols, other.rows, "matmul inner dimension mismatch");
        let (r, k, c) = (self.rows, self.cols, other.cols);
        let mut out = Tensor2::zeros(r, c);
        let work = r * k * c;
        let a = &self.data;
        let b = &other.data;
        parallel::for_each_chunk_mut(&mut out.data, c.max(1), work, |i, orow| {
            let arow = &a[i * k..(i + 1) * k];
            for (kk, &av) in arow.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                let brow = &b[kk * c..(kk + 1) * c];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        });
        out
    }

    /// C = self · otherᵀ, with self r×k and other c×k.
    pub fn matmul_nt(&self, other: &Tensor2) -> Tensor2 {
        assert_eq!(self.cols, other.cols, "matmul_nt inner dimension mismatch");
        let (r, k, c) = (self.rows, self.cols, other.rows);
        let mut out = Tensor2::zeros(r, c);
        let work = r * k * c;
        let a = &self.data;
        let b = &other.data;
        parallel::for_each_chunk_mut(&mut out.data, c.max(1), work, |i, orow| {
            let arow = &a[i * k..(i + 1) * k];
            for (j, o) in orow.iter_mut().enumerate() {
                let brow = &b[j * k..(j + 1) * k];
                let mut acc = 0.0;
                for (&av, &bv) in arow.iter().zip(brow) {
                    acc += av * bv;
                }
                *o = acc;
            }
        });
        out
    }

    /// C = selfᵀ · other, with self k×r and other k×c.
    pub fn matmul_tn(&self, other: &Tensor2) -> Tensor2 {
        assert_eq!(self.rows, other.rows, "matmul_tn inner dimension mismatch");
        let (k, r, c) = (self.rows, self.cols, other.cols);
        let mut out = Tensor2::zeros(r, c);
        let work = r * k * c;
        let a = &self.data;
        let b = &other.data;
        parallel::for_each_chunk_mut(&mut out.data, c.max(1), work, |i, orow| {
            for kk in 0..k {
                let av = a[kk * r + i];
                if av == 0.0 {
                    continue;
                }
                let brow = &b[kk * c..(kk + 1) * c];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_matmul(a: &Tensor2, b: &Tensor2) -> Tensor2 {
        let mut out = Tensor2::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = 0.0;
                for k in 0..a.cols() {
                    acc += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    fn arb(rows: usize, cols: usize, seed: u64) -> Tensor2 {
        // Cheap deterministic fill, no RNG dependency needed here.
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state as f64 / u64::MAX as f64) * 2.0 - 1.0
        };
        let data = (0..rows * cols).map(|_| next()).collect();
        Tensor2::from_vec(rows, cols, data)
    }

    #[test]
    fn matmul_matches_naive() {
        let a = arb(7, 5, 1);
        let b = arb(5, 9, 2);
        let got = a.matmul(&b);
        let want = naive_matmul(&a, &b);
        for (g, w) in got.data().iter().zip(want.data()) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn matmul_nt_matches_naive() {
        let a = arb(6, 4, 3);
        let b = arb(8, 4, 4); // interpreted as 4x8 transposed
        let got = a.matmul_nt(&b);
        // naive: a (6x4) * b^T (4x8)
        let mut bt = Tensor2::zeros(4, 8);
        for i in 0..8 {
            for j in 0..4 {
                bt.set(j, i, b.get(i, j));
            }
        }
        let want = naive_matmul(&a, &bt);
        for (g, w) in got.data().iter().zip(want.data()) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn matmul_tn_matches_naive() {
        let a = arb(5, 6, 5); // a^T is 6x5
        let b = arb(5, 3, 6);
        let got = a.matmul_tn(&b);
        let mut at = Tensor2::zeros(6, 5);
        for i in 0..5 {
            for j in 0..6 {
                at.set(j, i, a.get(i, j));
            }
        }
        let want = naive_matmul(&at, &b);
        for (g, w) in got.data().iter().zip(want.data()) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn hcat_and_columns_roundtrip() {
        let a = arb(3, 4, 7);
        let b = arb(3, 2, 8);
        let cat = a.hcat(&b);
        assert_eq!(cat.cols(), 6);
        assert_eq!(cat.columns(0, 4), a);
        assert_eq!(cat.columns(4, 2), b);
    }

    #[test]
    fn col_sums_and_bias() {
        let mut t = Tensor2::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(t.col_sums(), vec![5.0, 7.0, 9.0]);
        t.add_row_vec(&[1.0, 0.0, -1.0]);
        assert_eq!(t.data(), &[2.0, 2.0, 2.0, 5.0, 5.0, 5.0]);
    }
}
