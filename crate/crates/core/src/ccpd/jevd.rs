use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ccpd::als::{ccpd_als, AlsOptions, AlsOutcome};
use crate::ccpd::JevdProblem;
use crate::error::{Error, Result};
use crate::linalg::{condition_number, eig, gevd_pair, offdiag_ratio};
use crate::tensor::{CMatrix, ComplexTensor3, FactorSet};
use crate::Complex64;

/// Condition number beyond which a diagonalizer counts as singular.
const SINGULAR_B: f64 = 1e14;

/// Joint diagonalizer `B` (unit-norm columns) and generator table `F` with
/// one row per target slice.
#[derive(Debug, Clone)]
pub struct JevdResult {
    pub b: CMatrix,
    pub f: CMatrix,
    /// `‖offdiag(B⁻¹·G_w·B)‖² / ‖diag(B⁻¹·G_w·B)‖²` per slice.
    pub offdiag: Vec<f64>,
}

impl JevdResult {
    /// Aggregate off-diagonal to diagonal mass over all slices.
    pub fn certificate(&self, p: &JevdProblem) -> Result<f64> {
        let inv = invert(&self.b)?;
        let (mut off, mut diag) = (0.0, 0.0);
        for s in &p.slices {
            let d = &inv * &s.g * &self.b;
            for j in 0..d.ncols() {
                for i in 0..d.nrows() {
                    if i == j {
                        diag += d[(i, j)].norm_sqr();
                    } else {
                        off += d[(i, j)].norm_sqr();
                    }
                }
            }
        }
        Ok(off / diag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineOptions {
    pub max_sweeps: usize,
    pub tol: f64,
    pub slack: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            max_sweeps: 500,
            tol: 1e-10,
            slack: 1e-12,
        }
    }
}

fn invert(b: &CMatrix) -> Result<CMatrix> {
    if !(condition_number(b) < SINGULAR_B) {
        return Err(Error::SingularFactor);
    }
    b.clone().try_inverse().ok_or(Error::SingularFactor)
}

/// `F(w,:) = diag(B⁻¹·G_w·B)` together with per-slice off-diagonality.
pub fn diagonal_table(p: &JevdProblem, b: &CMatrix) -> Result<JevdResult> {
    let inv = invert(b)?;
    let r = b.ncols();
    let mut f = CMatrix::zeros(p.len(), r);
    let mut offdiag = Vec::with_capacity(p.len());
    for (w, s) in p.slices.iter().enumerate() {
        let d = &inv * &s.g * b;
        for c in 0..r {
            f[(w, c)] = d[(c, c)];
        }
        offdiag.push(offdiag_ratio(&d));
    }
    Ok(JevdResult {
        b: b.clone(),
        f,
        offdiag,
    })
}

/// Random unit-norm combination of all slices and the identity slice.
fn mix<R: Rng + ?Sized>(stacked: &[CMatrix], rng: &mut R) -> CMatrix {
    let w: Vec<Complex64> = (0..stacked.len())
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let r = stacked[0].nrows();
    let mut out = CMatrix::zeros(r, r);
    for (g, wi) in stacked.iter().zip(&w) {
        out += g * (wi / norm);
    }
    out
}

/// `count` pencils, each a pair of independent random combinations.
pub fn random_pencils<R: Rng + ?Sized>(
    p: &JevdProblem,
    count: usize,
    rng: &mut R,
) -> Vec<(CMatrix, CMatrix)> {
    let stacked = p.stacked();
    (0..count)
        .map(|_| (mix(&stacked, rng), mix(&stacked, rng)))
        .collect()
}

/// Initializer from the first pencil in `pencils` that is regular and
/// diagonalizable with distinct eigenvalues.
pub fn gevd_init_from_pencils(p: &JevdProblem, pencils: &[(CMatrix, CMatrix)]) -> Result<JevdResult> {
    let mut last = Error::SingularPencil;
    for (g1, g2) in pencils {
        match gevd_pair(g1, g2).and_then(|(_, b)| diagonal_table(p, &b)) {
            Ok(res) => return Ok(res),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Number of random pencils tried before giving up.
pub const PENCIL_ATTEMPTS: usize = 8;

/// Generalized-eigenvalue initializer. A single slice is diagonalized by a
/// plain eigendecomposition.
pub fn jevd_gevd_init<R: Rng + ?Sized>(p: &JevdProblem, rng: &mut R) -> Result<JevdResult> {
    if p.is_empty() {
        return Err(Error::NoTargetMatrix);
    }
    if p.len() == 1 {
        let (_, b) = eig(&p.slices[0].g)?;
        return diagonal_table(p, &b);
    }
    gevd_init_from_pencils(p, &random_pencils(p, PENCIL_ATTEMPTS, rng))
}

/// Refines `init` by ALS on the CPD `⟦B, D, F'⟧` of the stacked slices with
/// the identity slice appended. The generator table is rescaled so that the
/// identity row equals `η`.
pub fn jevd_refine(
    p: &JevdProblem,
    init: &JevdResult,
    opts: &RefineOptions,
) -> Result<(JevdResult, AlsOutcome)> {
    let stacked = p.stacked();
    let (r, w) = (p.rank(), stacked.len());
    let tensor = ComplexTensor3::from_fn((r, r, w), |i, j, k| stacked[k][(i, j)]);
    let d = invert(&init.b)?.transpose();
    let mut f0 = CMatrix::zeros(w, r);
    f0.rows_mut(0, w - 1).copy_from(&init.f);
    f0.row_mut(w - 1).fill(Complex64::from(p.eta));
    let start = FactorSet::new(vec![init.b.clone()], d, vec![f0])?;
    let als = AlsOptions {
        max_sweeps: opts.max_sweeps,
        tol: opts.tol,
        slack: opts.slack,
    };
    let out = ccpd_als(std::slice::from_ref(&tensor), start, &als)?;
    if !out.monotone {
        let n = out.objective.len();
        return Err(Error::Divergence {
            sweep: out.sweeps,
            before: out.objective[n - 2],
            after: out.objective[n - 1],
        });
    }
    let b = out.factors.a[0].clone();
    let fp = &out.factors.c[0];
    let mut f = CMatrix::zeros(w - 1, r);
    for c in 0..r {
        let last = fp[(w - 1, c)];
        if last.norm() == 0.0 {
            return Err(Error::SingularFactor);
        }
        for row in 0..w - 1 {
            f[(row, c)] = fp[(row, c)] * p.eta / last;
        }
    }
    let mut res = diagonal_table(p, &b)?;
    res.f = f;
    Ok((res, out))
}
