//! Dense complex tensors, unfoldings, Khatri-Rao products and (coupled) CPD
//! evaluation.
//!
//! # Layout
//!
//! Every tensor stores its entries in row-major order: for a third-order
//! tensor of shape `(I, J, K)` the entry `(i, j, k)` lives at
//! `(i * J + j) * K + k`; fourth-order tensors extend this with the last
//! index varying fastest. Unfoldings are built from their index rules, not
//! from this layout, so changing the layout never changes an unfolding.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::Complex64;

pub type CMatrix = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Third-order complex tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor3 {
    dims: (usize, usize, usize),
    data: Vec<Complex64>,
}

impl ComplexTensor3 {
    pub fn zeros(dims: (usize, usize, usize)) -> Self {
        Self {
            dims,
            data: vec![ZERO; dims.0 * dims.1 * dims.2],
        }
    }

    pub fn from_fn(
        dims: (usize, usize, usize),
        mut f: impl FnMut(usize, usize, usize) -> Complex64,
    ) -> Self {
        let mut data = Vec::with_capacity(dims.0 * dims.1 * dims.2);
        for i in 0..dims.0 {
            for j in 0..dims.1 {
                for k in 0..dims.2 {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { dims, data }
    }

    pub fn from_vec(dims: (usize, usize, usize), data: Vec<Complex64>) -> Result<Self> {
        if data.len() != dims.0 * dims.1 * dims.2 {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for dims {:?}",
                data.len(),
                dims
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims.1 + j) * self.dims.2 + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> Complex64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: Complex64) {
        let o = self.offset(i, j, k);
        self.data[o] = v;
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sqr().sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// Elementwise `self + other`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(Self {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// Subtensor keeping the mode-1 indices in `rows`, in the given order.
    pub fn select_mode1(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.dims.0) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: self.dims.0,
            });
        }
        let (_, j, k) = self.dims;
        Ok(Self::from_fn((rows.len(), j, k), |a, b, c| {
            self.get(rows[a], b, c)
        }))
    }

    /// Reinterpret mode 1 as an `(ix, iy)` grid with `iy` varying fastest.
    pub fn split_mode1(&self, ix: usize, iy: usize) -> Result<ComplexTensor4> {
        if ix * iy != self.dims.0 {
            return Err(Error::ShapeMismatch(format!(
                "cannot split mode of size {} into {}x{}",
                self.dims.0, ix, iy
            )));
        }
        // row-major layout makes this a pure reinterpretation
        ComplexTensor4::from_vec((ix, iy, self.dims.1, self.dims.2), self.data.clone())
    }
}

/// Fourth-order complex tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor4 {
    dims: (usize, usize, usize, usize),
    data: Vec<Complex64>,
}

impl ComplexTensor4 {
    pub fn from_fn(
        dims: (usize, usize, usize, usize),
        mut f: impl FnMut(usize, usize, usize, usize) -> Complex64,
    ) -> Self {
        let mut data = Vec::with_capacity(dims.0 * dims.1 * dims.2 * dims.3);
        for i in 0..dims.0 {
            for j in 0..dims.1 {
                for k in 0..dims.2 {
                    for l in 0..dims.3 {
                        data.push(f(i, j, k, l));
                    }
                }
            }
        }
        Self { dims, data }
    }

    pub fn from_vec(dims: (usize, usize, usize, usize), data: Vec<Complex64>) -> Result<Self> {
        if data.len() != dims.0 * dims.1 * dims.2 * dims.3 {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for dims {:?}",
                data.len(),
                dims
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        self.dims
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> Complex64 {
        let (_, dj, dk, dl) = self.dims;
        self.data[((i * dj + j) * dk + k) * dl + l]
    }

    /// Tensor with the first two modes exchanged.
    pub fn swap_modes12(&self) -> Self {
        let (i, j, k, l) = self.dims;
        Self::from_fn((j, i, k, l), |a, b, c, d| self.get(b, a, c, d))
    }

    /// Subtensor keeping the mode-1 indices in `rows`.
    pub fn select_mode1(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.dims.0) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: self.dims.0,
            });
        }
        let (_, j, k, l) = self.dims;
        Ok(Self::from_fn((rows.len(), j, k, l), |a, b, c, d| {
            self.get(rows[a], b, c, d)
        }))
    }
}

/// Mode-2 unfolding: entry `(i, j, k)` goes to row `i * K + k`, column `j`.
pub fn unfold_mode2(t: &ComplexTensor3) -> CMatrix {
    let (di, dj, dk) = t.dims();
    CMatrix::from_fn(di * dk, dj, |row, j| t.get(row / dk, j, row % dk))
}

/// Inverse of [`unfold_mode2`] for a tensor of shape `dims`.
pub fn refold_mode2(m: &CMatrix, dims: (usize, usize, usize)) -> Result<ComplexTensor3> {
    let (di, dj, dk) = dims;
    if m.nrows() != di * dk || m.ncols() != dj {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} matrix cannot refold to {:?}",
            m.nrows(),
            m.ncols(),
            dims
        )));
    }
    Ok(ComplexTensor3::from_fn(dims, |i, j, k| m[(i * dk + k, j)]))
}

/// Mode-3 unfolding of a fourth-order tensor: entry `(i, j, k, l)` goes to
/// row `i * J * L + j * L + l`, column `k`.
pub fn unfold_mode3_4d(t: &ComplexTensor4) -> CMatrix {
    let (di, dj, dk, dl) = t.dims();
    CMatrix::from_fn(di * dj * dl, dk, |row, k| {
        let i = row / (dj * dl);
        let rem = row % (dj * dl);
        t.get(i, rem / dl, k, rem % dl)
    })
}

/// Inverse of [`unfold_mode3_4d`].
pub fn refold_mode3_4d(m: &CMatrix, dims: (usize, usize, usize, usize)) -> Result<ComplexTensor4> {
    let (di, dj, dk, dl) = dims;
    if m.nrows() != di * dj * dl || m.ncols() != dk {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} matrix cannot refold to {:?}",
            m.nrows(),
            m.ncols(),
            dims
        )));
    }
    Ok(ComplexTensor4::from_fn(dims, |i, j, k, l| {
        m[(i * dj * dl + j * dl + l, k)]
    }))
}

/// Column-wise Kronecker product: column `r` is `a_r ⊗ b_r`.
pub fn khatri_rao(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "khatri-rao of {} and {} columns",
            a.ncols(),
            b.ncols()
        )));
    }
    let kb = b.nrows();
    Ok(CMatrix::from_fn(a.nrows() * kb, a.ncols(), |row, r| {
        a[(row / kb, r)] * b[(row % kb, r)]
    }))
}

/// Coupled factor matrices `{A^(m)}, B, {C^(m)}` sharing the column count.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    pub a: Vec<CMatrix>,
    pub b: CMatrix,
    pub c: Vec<CMatrix>,
}

impl FactorSet {
    pub fn new(a: Vec<CMatrix>, b: CMatrix, c: Vec<CMatrix>) -> Result<Self> {
        let fs = Self { a, b, c };
        fs.validate()?;
        Ok(fs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.is_empty() || self.a.len() != self.c.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} A factors and {} C factors",
                self.a.len(),
                self.c.len()
            )));
        }
        let r = self.b.ncols();
        if self.a.iter().chain(&self.c).any(|f| f.ncols() != r) {
            return Err(Error::ShapeMismatch(
                "factor column counts differ".to_string(),
            ));
        }
        Ok(())
    }

    pub fn rank(&self) -> usize {
        self.b.ncols()
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// `⟦A^(m), B, C^(m)⟧` for one coupled slot.
    pub fn eval(&self, m: usize) -> Result<ComplexTensor3> {
        cpd_eval(&self.a[m], &self.b, &self.c[m])
    }
}

/// `t(i,j,k) = Σ_r a_ir · b_jr · c_kr`.
pub fn cpd_eval(a: &CMatrix, b: &CMatrix, c: &CMatrix) -> Result<ComplexTensor3> {
    let r = a.ncols();
    if b.ncols() != r || c.ncols() != r {
        return Err(Error::ShapeMismatch(format!(
            "cpd factor columns {}, {}, {}",
            r,
            b.ncols(),
            c.ncols()
        )));
    }
    // (A ⊙ C)·Bᵀ is the mode-2 unfolding
    let unfolded = khatri_rao(a, c)? * b.transpose();
    refold_mode2(&unfolded, (a.nrows(), b.nrows(), c.nrows()))
}

/// `Σ_m ‖T^(m) − ⟦A^(m), B, C^(m)⟧‖_F²`.
pub fn ccpd_residual(tensors: &[ComplexTensor3], f: &FactorSet) -> Result<f64> {
    if tensors.len() != f.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} tensors for {} coupled factors",
            tensors.len(),
            f.len()
        )));
    }
    let mut total = 0.0;
    for (m, t) in tensors.iter().enumerate() {
        let model = f.eval(m)?;
        if model.dims() != t.dims() {
            return Err(Error::ShapeMismatch(format!(
                "tensor {:?} vs model {:?}",
                t.dims(),
                model.dims()
            )));
        }
        total += t
            .data()
            .iter()
            .zip(model.data())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;

    fn seq_tensor(dims: (usize, usize, usize)) -> ComplexTensor3 {
        ComplexTensor3::from_fn(dims, |i, j, k| {
            c64((100 * (i + 1) + 10 * (j + 1) + k + 1) as f64, 0.0)
        })
    }

    fn pseudo_random(rows: usize, cols: usize, seed: u64) -> CMatrix {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        CMatrix::from_fn(rows, cols, |_, _| c64(next(), next()))
    }

    #[test]
    fn mode2_row_rule() {
        let t = seq_tensor((2, 2, 2));
        let m = unfold_mode2(&t);
        assert_eq!(m.shape(), (4, 2));
        // rows (i,k) = (1,1),(1,2),(2,1),(2,2)
        let expect = [[111.0, 121.0], [112.0, 122.0], [211.0, 221.0], [212.0, 222.0]];
        for (row, e) in expect.iter().enumerate() {
            for j in 0..2 {
                assert_eq!(m[(row, j)], c64(e[j], 0.0));
            }
        }
    }

    #[test]
    fn mode2_singleton_modes() {
        let t = seq_tensor((1, 5, 1));
        let m = unfold_mode2(&t);
        assert_eq!(m.shape(), (1, 5));
        for j in 0..5 {
            assert_eq!(m[(0, j)], t.get(0, j, 0));
        }
    }

    #[test]
    fn mode3_4d_row_rule() {
        let t = ComplexTensor4::from_fn((2, 2, 1, 2), |i, j, k, l| {
            c64((1000 * i + 100 * j + 10 * k + l) as f64, 0.0)
        });
        let m = unfold_mode3_4d(&t);
        assert_eq!(m.shape(), (8, 1));
        let expect = [0.0, 1.0, 100.0, 101.0, 1000.0, 1001.0, 1100.0, 1101.0];
        for (row, e) in expect.iter().enumerate() {
            assert_eq!(m[(row, 0)].re, *e);
        }
        let one = ComplexTensor4::from_fn((1, 1, 4, 1), |_, _, k, _| c64(k as f64, 1.0));
        let m = unfold_mode3_4d(&one);
        assert_eq!(m.shape(), (1, 4));
        assert_eq!(m[(0, 3)], c64(3.0, 1.0));
    }

    #[test]
    fn refold_roundtrips() {
        let a = pseudo_random(60, 1, 3);
        let t = ComplexTensor3::from_vec((3, 4, 5), a.iter().copied().collect()).unwrap();
        assert_eq!(refold_mode2(&unfold_mode2(&t), (3, 4, 5)).unwrap(), t);
        let b = pseudo_random(48, 1, 4);
        let t4 = ComplexTensor4::from_vec((2, 3, 4, 2), b.iter().copied().collect()).unwrap();
        assert_eq!(
            refold_mode3_4d(&unfold_mode3_4d(&t4), (2, 3, 4, 2)).unwrap(),
            t4
        );
    }

    #[test]
    fn khatri_rao_small_cases() {
        let a = CMatrix::from_column_slice(2, 1, &[c64(1.0, 0.0), c64(2.0, 0.0)]);
        let b = CMatrix::from_column_slice(2, 1, &[c64(3.0, 0.0), c64(4.0, 0.0)]);
        let kr = khatri_rao(&a, &b).unwrap();
        let got: Vec<f64> = kr.iter().map(|z| z.re).collect();
        assert_eq!(got, vec![3.0, 4.0, 6.0, 8.0]);

        let eye = CMatrix::identity(2, 2);
        let sel = khatri_rao(&eye, &eye).unwrap();
        assert_eq!(sel.shape(), (4, 2));
        assert_eq!(sel[(0, 0)].re, 1.0);
        assert_eq!(sel[(3, 1)].re, 1.0);
        assert_eq!(sel.iter().filter(|z| z.re != 0.0).count(), 2);

        assert!(khatri_rao(&pseudo_random(2, 2, 1), &pseudo_random(2, 3, 1)).is_err());
    }

    #[test]
    fn khatri_rao_elementwise_oracle() {
        let a = pseudo_random(3, 2, 11);
        let b = pseudo_random(4, 2, 12);
        let kr = khatri_rao(&a, &b).unwrap();
        for r in 0..2 {
            let mut row = 0;
            for i in 0..3 {
                for k in 0..4 {
                    assert_eq!(kr[(row, r)], a[(i, r)] * b[(k, r)]);
                    row += 1;
                }
            }
        }
    }

    #[test]
    fn cpd_eval_rank_one_and_zero() {
        let a = CMatrix::from_column_slice(2, 1, &[c64(1.0, 0.0), c64(2.0, 0.0)]);
        let b = CMatrix::from_column_slice(2, 1, &[c64(1.0, 0.0), c64(1.0, 0.0)]);
        let c = CMatrix::from_column_slice(2, 1, &[c64(1.0, 0.0), c64(-1.0, 0.0)]);
        let t = cpd_eval(&a, &b, &c).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let expect = [1.0, 2.0][i] * [1.0, -1.0][k];
                    assert_eq!(t.get(i, j, k), c64(expect, 0.0));
                }
            }
        }
        let z = cpd_eval(
            &CMatrix::zeros(3, 0),
            &CMatrix::zeros(4, 0),
            &CMatrix::zeros(2, 0),
        )
        .unwrap();
        assert_eq!(z.frobenius_norm(), 0.0);
        assert!(cpd_eval(&a, &pseudo_random(2, 2, 0), &c).is_err());
    }

    #[test]
    fn cpd_eval_matches_triple_loop() {
        let (a, b, c) = (pseudo_random(3, 3, 1), pseudo_random(4, 3, 2), pseudo_random(5, 3, 3));
        let t = cpd_eval(&a, &b, &c).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                for k in 0..5 {
                    let mut s = ZERO;
                    for r in 0..3 {
                        s += a[(i, r)] * b[(j, r)] * c[(k, r)];
                    }
                    assert!((t.get(i, j, k) - s).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn residual_cases() {
        let fs = FactorSet::new(
            vec![pseudo_random(3, 2, 5), pseudo_random(4, 2, 6)],
            pseudo_random(5, 2, 7),
            vec![pseudo_random(2, 2, 8), pseudo_random(2, 2, 9)],
        )
        .unwrap();
        let tensors: Vec<_> = (0..2).map(|m| fs.eval(m).unwrap()).collect();
        let total: f64 = tensors.iter().map(|t| t.frobenius_norm_sqr()).sum();
        assert!(ccpd_residual(&tensors, &fs).unwrap() < 1e-24 * total);

        let zero = FactorSet::new(
            vec![CMatrix::zeros(3, 2), CMatrix::zeros(4, 2)],
            CMatrix::zeros(5, 2),
            vec![CMatrix::zeros(2, 2), CMatrix::zeros(2, 2)],
        )
        .unwrap();
        let r = ccpd_residual(&tensors, &zero).unwrap();
        assert!((r - total).abs() < 1e-12 * total);

        let delta = c64(0.3, -0.4);
        let mut perturbed = tensors.clone();
        let v = perturbed[1].get(2, 3, 1);
        perturbed[1].set(2, 3, 1, v + delta);
        let r = ccpd_residual(&perturbed, &fs).unwrap();
        assert!((r - delta.norm_sqr()).abs() < 1e-12);

        assert!(ccpd_residual(&tensors[..1], &fs).is_err());
    }

    #[test]
    fn split_mode1_is_reinterpretation() {
        let t = ComplexTensor3::from_fn((6, 2, 3), |i, j, k| c64(i as f64, (j * 3 + k) as f64));
        let t4 = t.split_mode1(2, 3).unwrap();
        for ix in 0..2 {
            for iy in 0..3 {
                for j in 0..2 {
                    for k in 0..3 {
                        assert_eq!(t4.get(ix, iy, j, k), t.get(ix * 3 + iy, j, k));
                    }
                }
            }
        }
        assert!(t.split_mode1(4, 2).is_err());
    }
}
