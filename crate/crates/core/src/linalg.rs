//! Complex dense kernels: truncated SVD, pseudo-inverse, rank-1
//! approximation, eigendecomposition and pencil eigendecomposition.

use nalgebra::{DVector, Schur};

use crate::error::{Error, Result};
use crate::tensor::CMatrix;
use crate::Complex64;

pub type CVector = DVector<Complex64>;

/// Condition number above which a pencil's second matrix is rotated away
/// before inverting it.
const PENCIL_COND_LIMIT: f64 = 1e8;
/// Condition number above which every rotation failed and the pencil is
/// treated as singular.
const SINGULAR_COND_LIMIT: f64 = 1e13;
/// Relative gap below which two eigenvalues count as coincident. Defective
/// eigenvalues split by roughly sqrt(eps), so the gap sits above that.
const EIGEN_GAP_TOL: f64 = 1e-7;

/// Thin SVD truncated to the leading `r` singular triplets.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

impl TruncatedSvd {
    pub fn reconstruct(&self) -> CMatrix {
        let mut us = self.u.clone();
        for (j, &sj) in self.s.iter().enumerate() {
            us.column_mut(j).scale_mut(sj);
        }
        us * self.v.adjoint()
    }
}

/// Full thin SVD with singular values sorted in nonincreasing order.
pub fn svd_sorted(m: &CMatrix) -> TruncatedSvd {
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return TruncatedSvd {
            u: CMatrix::zeros(m.nrows(), 0),
            s: Vec::new(),
            v: CMatrix::zeros(m.ncols(), 0),
        };
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v = svd.v_t.expect("requested V").adjoint();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    TruncatedSvd {
        u: CMatrix::from_fn(m.nrows(), k, |i, j| u[(i, order[j])]),
        s: order.iter().map(|&j| svd.singular_values[j]).collect(),
        v: CMatrix::from_fn(m.ncols(), k, |i, j| v[(i, order[j])]),
    }
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows().min(m.ncols()) == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Ratio of extreme singular values; infinite for singular or empty input.
pub fn condition_number(m: &CMatrix) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

pub fn truncated_svd(m: &CMatrix, r: usize) -> Result<TruncatedSvd> {
    let k = m.nrows().min(m.ncols());
    if r > k {
        return Err(Error::RankOutOfRange {
            rank: r,
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let full = svd_sorted(m);
    Ok(TruncatedSvd {
        u: full.u.columns(0, r).into_owned(),
        s: full.s[..r].to_vec(),
        v: full.v.columns(0, r).into_owned(),
    })
}

/// Moore-Penrose pseudo-inverse with the threshold
/// `max(rows, cols) · σ_max · 2⁻⁵²`.
pub fn pinv(m: &CMatrix) -> CMatrix {
    let full = svd_sorted(m);
    let smax = full.s.first().copied().unwrap_or(0.0);
    let tol = m.nrows().max(m.ncols()) as f64 * smax * f64::EPSILON;
    let mut out = CMatrix::zeros(m.ncols(), m.nrows());
    for (j, &sj) in full.s.iter().enumerate() {
        if sj > tol {
            out += full.v.column(j) * full.u.column(j).adjoint() * Complex64::from(1.0 / sj);
        }
    }
    out
}

/// Best rank-1 approximation `left · rightᵀ` with a unit-norm `left`.
#[derive(Debug, Clone)]
pub struct Rank1Pair {
    pub left: CVector,
    pub right: CVector,
}

impl Rank1Pair {
    pub fn outer(&self) -> CMatrix {
        &self.left * self.right.transpose()
    }
}

pub fn dominant_rank1(m: &CMatrix) -> Result<Rank1Pair> {
    if m.iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(Error::ZeroInput);
    }
    let full = svd_sorted(m);
    let left = full.u.column(0).into_owned();
    // m ≈ u σ vᴴ = u (σ conj(v))ᵀ
    let right = full.v.column(0).map(|z| z.conj() * full.s[0]);
    Ok(Rank1Pair { left, right })
}

fn bad_eig_input(m: &CMatrix) -> bool {
    m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())
}

/// Eigendecomposition of a general complex square matrix via the complex
/// Schur form. Eigenvectors are unit-norm columns.
pub fn eig(m: &CMatrix) -> Result<(Vec<Complex64>, CMatrix)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "eig of a {}x{} matrix",
            n,
            m.ncols()
        )));
    }
    if bad_eig_input(m) {
        return Err(Error::ConvergenceFailed);
    }
    if n == 0 {
        return Ok((Vec::new(), CMatrix::zeros(0, 0)));
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 100_000).ok_or(Error::ConvergenceFailed)?;
    let (q, t) = schur.unpack();
    let lambdas: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    let scale = t.norm().max(f64::MIN_POSITIVE);
    let mut y = CMatrix::zeros(n, n);
    for k in 0..n {
        let lk = lambdas[k];
        y[(k, k)] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in i + 1..=k {
                acc += t[(i, j)] * y[(j, k)];
            }
            let mut d = t[(i, i)] - lk;
            if d.norm() < f64::EPSILON * scale {
                d = Complex64::new(f64::EPSILON * scale, 0.0);
            }
            y[(i, k)] = -acc / d;
        }
    }
    let mut v = q * y;
    for mut col in v.column_iter_mut() {
        let nrm = col.norm();
        if nrm > 0.0 {
            col.unscale_mut(nrm);
        }
    }
    Ok((lambdas, v))
}

fn check_distinct(values: &[Complex64]) -> Result<()> {
    let scale = values.iter().map(|z| z.norm()).fold(1.0, f64::max);
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            if (values[i] - values[j]).norm() <= EIGEN_GAP_TOL * scale {
                return Err(Error::DefectivePencil(i, j));
            }
        }
    }
    Ok(())
}

/// Generalized eigendecomposition `g1·v = λ·g2·v` of a regular pencil with
/// distinct eigenvalues.
///
/// When `g2` is well conditioned this is the standard eigenproblem of
/// `g2⁻¹·g1`. Otherwise the pencil is rotated to `(c·g1 − s·g2, s·g1 + c·g2)`,
/// which keeps the eigenvectors and maps eigenvalues through a Möbius
/// transform, until the second member is invertible. Infinite eigenvalues
/// come back as `inf`.
pub fn gevd_pair(g1: &CMatrix, g2: &CMatrix) -> Result<(Vec<Complex64>, CMatrix)> {
    let n = g1.nrows();
    if g1.shape() != (n, n) || g2.shape() != (n, n) {
        return Err(Error::ShapeMismatch(format!(
            "pencil of {:?} and {:?}",
            g1.shape(),
            g2.shape()
        )));
    }
    if bad_eig_input(g1) || bad_eig_input(g2) {
        return Err(Error::SingularPencil);
    }
    let mut best = (0.0_f64, 1.0_f64, condition_number(g2));
    if best.2 >= PENCIL_COND_LIMIT {
        // fixed irrational-ish angles spread over the half circle
        for step in 1..=12 {
            let theta = std::f64::consts::PI * (step as f64 * 0.618_033_988_749_895).fract();
            let (s, c) = theta.sin_cos();
            let cond = condition_number(&(g1 * Complex64::from(s) + g2 * Complex64::from(c)));
            if cond < best.2 {
                best = (s, c, cond);
            }
            if cond < PENCIL_COND_LIMIT {
                break;
            }
        }
    }
    let (s, c, cond) = best;
    if !(cond < SINGULAR_COND_LIMIT) {
        return Err(Error::SingularPencil);
    }
    let (a, b) = if s == 0.0 {
        (g1.clone(), g2.clone())
    } else {
        let (sc, cc) = (Complex64::from(s), Complex64::from(c));
        (g1 * cc - g2 * sc, g1 * sc + g2 * cc)
    };
    let e = b.lu().solve(&a).ok_or(Error::SingularPencil)?;
    let (rotated, vecs) = eig(&e)?;
    check_distinct(&rotated)?;
    let vals = rotated
        .iter()
        .map(|&l| {
            if s == 0.0 {
                l
            } else {
                let den = Complex64::from(c) - l * s;
                if den.norm() == 0.0 {
                    Complex64::new(f64::INFINITY, 0.0)
                } else {
                    (Complex64::from(s) + l * c) / den
                }
            }
        })
        .collect();
    Ok((vals, vecs))
}

/// Off-diagonal to diagonal Frobenius mass ratio of `m`.
pub fn offdiag_ratio(m: &CMatrix) -> f64 {
    let (mut off, mut diag) = (0.0, 0.0);
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i == j {
                diag += m[(i, j)].norm_sqr();
            } else {
                off += m[(i, j)].norm_sqr();
            }
        }
    }
    if diag == 0.0 {
        f64::INFINITY
    } else {
        off / diag
    }
}
