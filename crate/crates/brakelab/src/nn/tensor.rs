//! Dense row-major 2-D tensors with the handful of kernels the networks need.

/// A row-major matrix of f64. Vectors are rows ([1, n]) or columns of a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "tensor data length");
        Self { rows, cols, data }
    }

    pub fn scalar(v: f64) -> Self {
        Self::from_vec(1, 1, vec![v])
    }

    pub fn row(values: &[f64]) -> Self {
        Self::from_vec(1, values.len(), values.to_vec())
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

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on non-scalar tensor");
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    /// `y = x * w^T` where `x` is [m, k] and `w` is [n, k]; result [m, n].
    pub fn matmul_nt(x: &Tensor, w: &Tensor) -> Tensor {
        assert_eq!(x.cols, w.cols, "matmul_nt inner dimension");
        let (m, k, n) = (x.rows, x.cols, w.rows);
        let mut out = Tensor::zeros(m, n);
        for i in 0..m {
            let xi = &x.data[i * k..(i + 1) * k];
            let oi = &mut out.data[i * n..(i + 1) * n];
            for j in 0..n {
                let wj = &w.data[j * k..(j + 1) * k];
                let mut acc = 0.0;
                for t in 0..k {
                    acc += xi[t] * wj[t];
                }
                oi[j] = acc;
            }
        }
        out
    }

    /// `dst += dy * w` where `dy` is [m, n] and `w` is [n, k]; dst [m, k].
    pub fn add_matmul_nn(dst: &mut Tensor, dy: &Tensor, w: &Tensor) {
        assert_eq!(dy.cols, w.rows);
        assert_eq!(dst.rows, dy.rows);
        assert_eq!(dst.cols, w.cols);
        let (m, n, k) = (dy.rows, dy.cols, w.cols);
        for i in 0..m {
            let di = &mut dst.data[i * k..(i + 1) * k];
            let gi = &dy.data[i * n..(i + 1) * n];
            for j in 0..n {
                let g = gi[j];
                if g == 0.0 {
                    continue;
                }
                let wj = &w.data[j * k..(j + 1) * k];
                for t in 0..k {
                    di[t] += g * wj[t];
                }
            }
        }
    }

    /// `dst += dy^T * x` where `dy` is [m, n] and `x` is [m, k]; dst [n, k].
    pub fn add_matmul_tn(dst: &mut Tensor, dy: &Tensor, x: &Tensor) {
        assert_eq!(dy.rows, x.rows);
        assert_eq!(dst.rows, dy.cols);
        assert_eq!(dst.cols, x.cols);
        let (m, n, k) = (dy.rows, dy.cols, x.cols);
        for i in 0..m {
            let gi = &dy.data[i * n..(i + 1) * n];
            let xi = &x.data[i * k..(i + 1) * k];
            for j in 0..n {
                let g = gi[j];
                if g == 0.0 {
                    continue;
                }
                let dj = &mut dst.data[j * k..(j + 1) * k];
                for t in 0..k {
                    dj[t] += g * xi[t];
                }
            }
        }
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        assert!(self.same_shape(other), "add_assign shape");
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += *b;
        }
    }

    pub fn scale_assign(&mut self, k: f64) {
        for a in self.data.iter_mut() {
            *a *= k;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_nt_small_case() {
        // x = [[1,2],[3,4]], w = [[5,6],[7,8]] (w stored [out,in])
        // y = x * w^T = [[1*5+2*6, 1*7+2*8], [3*5+4*6, 3*7+4*8]]
        let x = Tensor::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let w = Tensor::from_vec(2, 2, vec![5.0, 6.0, 7.0, 8.0]);
        let y = Tensor::matmul_nt(&x, &w);
        assert_eq!(y.data(), &[17.0, 23.0, 39.0, 53.0]);
    }

    #[test]
    fn backward_kernels_match_na_ive_loops() {
        let m = 3;
        let n = 4;
        let k = 5;
        let x = Tensor::from_vec(m, k, (0..m * k).map(|i| i as f64 * 0.3 - 2.0).collect());
        let w = Tensor::from_vec(n, k, (0..n * k).map(|i| (i as f64 * 0.7).sin()).collect());
        let dy = Tensor::from_vec(m, n, (0..m * n).map(|i| (i as f64 - 5.0) * 0.11).collect());
        let mut dx = Tensor::zeros(m, k);
        Tensor::add_matmul_nn(&mut dx, &dy, &w);
        let mut dw = Tensor::zeros(n, k);
        Tensor::add_matmul_tn(&mut dw, &dy, &x);
        for i in 0..m {
            for t in 0..k {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += dy.at(i, j) * w.at(j, t);
                }
                assert!((dx.at(i, t) - acc).abs() < 1e-12);
            }
        }
        for j in 0..n {
            for t in 0..k {
                let mut acc = 0.0;
                for i in 0..m {
                    acc += dy.at(i, j) * x.at(i, t);
                }
                assert!((dw.at(j, t) - acc).abs() < 1e-12);
            }
        }
    }
}
