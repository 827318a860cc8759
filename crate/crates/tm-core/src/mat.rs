//! Dense row-major matrices, just big enough for the nets here.

use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Mat<R> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<R>,
}

impl<R: Real> Mat<R> {
    pub fn zeros(rows: usize, cols: usize) -> Mat<R> {
        Mat { rows, cols, data: vec![R::ZERO; rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Mat<R> {
        let r = rows.len();
        let c = rows.first().map_or(0, |v| v.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend(row.into_iter().map(R::from_f64));
        }
        Mat { rows: r, cols: c, data }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> R {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut R {
        &mut self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[R] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [R] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn fill(&mut self, v: R) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// self += other, shape-checked.
    pub fn add_assign(&mut self, other: &Mat<R>) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.to_f64()).collect()
    }

    pub fn cast<S: Real>(&self) -> Mat<S> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| S::from_f64(v.to_f64())).collect(),
        }
    }
}

/// out = x (n x k) . w (k x m), accumulated row-wise so the inner loop runs
/// over contiguous memory.
pub fn matmul_into<R: Real>(out: &mut Mat<R>, x: &Mat<R>, w: &Mat<R>) {
    assert_eq!(x.cols, w.rows, "matmul inner dimensions");
    assert_eq!((out.rows, out.cols), (x.rows, w.cols));
    out.fill(R::ZERO);
    for i in 0..x.rows {
        let xi = x.row(i);
        let oi = out.row_mut(i);
        for (k, &xv) in xi.iter().enumerate() {
            let wk = w.row(k);
            for (o, &wv) in oi.iter_mut().zip(wk) {
                *o += xv * wv;
            }
        }
    }
}
