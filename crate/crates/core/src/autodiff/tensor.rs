//! Dense f64 tensors (rank 1 or 2 in practice) plus the handful of kernels
//! the tape and the no-grad forward paths share. Both paths call the same
//! kernels so taped and untaped evaluation produce identical bits.

/// Row-major dense tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn from_vec(shape: Vec<usize>, data: Vec<f64>) -> Self {
        let n: usize = shape.iter().product();
        assert_eq!(n, data.len(), "shape {:?} vs {} values", shape, data.len());
        Tensor { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        Self::from_vec(vec![rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Rows when rank 2; a rank-1 tensor is treated as a single row.
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            1 => 1,
            2 => self.shape[0],
            r => panic!("rows() on rank-{r} tensor"),
        }
    }

    /// Columns when rank 2; for rank 1, the length.
    pub fn cols(&self) -> usize {
        match self.shape.len() {
            1 => self.shape[0],
            2 => self.shape[1],
            r => panic!("cols() on rank-{r} tensor"),
        }
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on non-scalar");
        self.data[0]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        assert_eq!(self.shape, other.shape, "shape mismatch in zip_map");
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

/// C = A[m,k] * B[k,n]. ikj loop order keeps B and C rows contiguous.
pub fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k) = (a.rows(), a.cols());
    let (kb, n) = (b.rows(), b.cols());
    assert_eq!(k, kb, "matmul inner dims {k} vs {kb}");
    let mut out = vec![0.0; m * n];
    let ad = a.data();
    let bd = b.data();
    for i in 0..m {
        let arow = &ad[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (kk, &av) in arow.iter().enumerate() {
            let brow = &bd[kk * n..(kk + 1) * n];
            for j in 0..n {
                orow[j] += av * brow[j];
            }
        }
    }
    Tensor::from_vec(vec![m, n], out)
}

/// C = A[m,k] * B[n,k]^T -> [m,n]. Rows of both operands are contiguous dots.
pub fn matmul_nt(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k) = (a.rows(), a.cols());
    let (n, kb) = (b.rows(), b.cols());
    assert_eq!(k, kb, "matmul_nt inner dims {k} vs {kb}");
    let mut out = vec![0.0; m * n];
    let ad = a.data();
    let bd = b.data();
    for i in 0..m {
        let arow = &ad[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &bd[j * k..(j + 1) * k];
            let mut acc = 0.0;
            for kk in 0..k {
                acc += arow[kk] * brow[kk];
            }
            out[i * n + j] = acc;
        }
    }
    Tensor::from_vec(vec![m, n], out)
}

/// C = A[k,m]^T * B[k,n] -> [m,n].
pub fn matmul_tn(a: &Tensor, b: &Tensor) -> Tensor {
    let (k, m) = (a.rows(), a.cols());
    let (kb, n) = (b.rows(), b.cols());
    assert_eq!(k, kb, "matmul_tn inner dims {k} vs {kb}");
    let mut out = vec![0.0; m * n];
    let ad = a.data();
    let bd = b.data();
    for kk in 0..k {
        let arow = &ad[kk * m..(kk + 1) * m];
        let brow = &bd[kk * n..(kk + 1) * n];
        for i in 0..m {
            let av = arow[i];
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += av * brow[j];
            }
        }
    }
    Tensor::from_vec(vec![m, n], out)
}

/// Adds a length-D row vector to every row of [B,D].
pub fn add_row(x: &Tensor, row: &Tensor) -> Tensor {
    let d = x.cols();
    assert_eq!(row.len(), d, "add_row width {} vs {}", row.len(), d);
    let mut out = x.clone();
    let rd = row.data();
    for chunk in out.data.chunks_mut(d) {
        for (o, &r) in chunk.iter_mut().zip(rd) {
            *o += r;
        }
    }
    out
}

/// Multiplies every row of [B,D] by a length-D row vector.
pub fn mul_row(x: &Tensor, row: &Tensor) -> Tensor {
    let d = x.cols();
    assert_eq!(row.len(), d, "mul_row width {} vs {}", row.len(), d);
    let mut out = x.clone();
    let rd = row.data();
    for chunk in out.data.chunks_mut(d) {
        for (o, &r) in chunk.iter_mut().zip(rd) {
            *o *= r;
        }
    }
    out
}

pub const LAYER_NORM_EPS: f64 = 1e-8;

/// Normalizes each row to zero mean, unit variance (no affine part).
pub fn layer_norm_rows(x: &Tensor) -> Tensor {
    let d = x.cols();
    let mut out = x.clone();
    for chunk in out.data.chunks_mut(d) {
        let mean = chunk.iter().sum::<f64>() / d as f64;
        let var = chunk.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        for v in chunk.iter_mut() {
            *v = (*v - mean) * inv;
        }
    }
    out
}

pub fn softplus(x: f64) -> f64 {
    // ln(1+e^x), overflow-safe: for large x the correction vanishes.
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

pub fn mish(x: f64) -> f64 {
    x * softplus(x).tanh()
}

pub fn mish_deriv(x: f64) -> f64 {
    let sp = softplus(x);
    let t = sp.tanh();
    let sig = 1.0 / (1.0 + (-x).exp());
    t + x * (1.0 - t * t) * sig
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        // [1,2;3,4] * [5,6;7,8] = [19,22;43,50]
        let a = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let b = Tensor::matrix(2, 2, vec![5.0, 6.0, 7.0, 8.0]);
        assert_eq!(matmul(&a, &b).data(), &[19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn matmul_transpose_variants_agree() {
        let a = Tensor::matrix(3, 4, (0..12).map(|i| i as f64 * 0.3 - 1.0).collect());
        let b = Tensor::matrix(4, 2, (0..8).map(|i| (i as f64).sin()).collect());
        let c = matmul(&a, &b);
        // a*b == matmul_nt(a, b^T)
        let mut bt = vec![0.0; 8];
        for i in 0..4 {
            for j in 0..2 {
                bt[j * 4 + i] = b.at(i, j);
            }
        }
        let c2 = matmul_nt(&a, &Tensor::matrix(2, 4, bt));
        for (x, y) in c.data().iter().zip(c2.data()) {
            assert!((x - y).abs() < 1e-12);
        }
        // a*b == matmul_tn(a^T, b)
        let mut at = vec![0.0; 12];
        for i in 0..3 {
            for j in 0..4 {
                at[j * 3 + i] = a.at(i, j);
            }
        }
        let c3 = matmul_tn(&Tensor::matrix(4, 3, at), &b);
        for (x, y) in c.data().iter().zip(c3.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn layer_norm_rows_zero_mean_unit_var() {
        let x = Tensor::matrix(2, 4, vec![1.0, 2.0, 3.0, 4.0, -5.0, 0.0, 5.0, 10.0]);
        let y = layer_norm_rows(&x);
        for r in 0..2 {
            let row: Vec<f64> = (0..4).map(|c| y.at(r, c)).collect();
            let mean = row.iter().sum::<f64>() / 4.0;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn mish_matches_reference_points() {
        // mish(0) = 0, mish(1) = tanh(ln(1+e)) = 0.86509838826731...
        assert!(mish(0.0).abs() < 1e-15);
        assert!((mish(1.0) - 0.865_098_388_267_310_3).abs() < 1e-12);
        assert!(softplus(100.0) == 100.0);
    }
}
