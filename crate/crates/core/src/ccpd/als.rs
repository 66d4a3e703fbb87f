use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::pinv;
use crate::tensor::{CMatrix, ComplexTensor3, FactorSet};
use crate::Complex64;

/// Objective level, relative to the data energy, treated as an exact fit.
const EXACT_FIT: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlsOptions {
    pub max_sweeps: usize,
    /// Stop once `|f_prev − f| ≤ tol · f_prev`.
    pub tol: f64,
    /// Increase tolerated per sweep, scaled by `max(1, f_prev)`.
    pub slack: f64,
}

impl Default for AlsOptions {
    fn default() -> Self {
        AlsOptions {
            max_sweeps: 1000,
            tol: 1e-8,
            slack: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlsOutcome {
    pub factors: FactorSet,
    /// Objective before the first sweep and after every completed sweep.
    pub objective: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// False if some sweep raised the objective beyond the slack; the
    /// returned factors are then those before that sweep.
    pub monotone: bool,
}

impl AlsOutcome {
    pub fn final_objective(&self) -> f64 {
        *self.objective.last().expect("objective history is never empty")
    }
}

/// Row-major `rows × r` buffer with `w[row*r + col] = conj(x[a,col]·y[b,col])`
/// for `row = a * y.nrows() + b`.
fn conj_kr(x: &CMatrix, y: &CMatrix) -> Vec<Complex64> {
    let r = x.ncols();
    let (nx, ny) = (x.nrows(), y.nrows());
    let mut w = Vec::with_capacity(nx * ny * r);
    for a in 0..nx {
        for b in 0..ny {
            for col in 0..r {
                w.push((x[(a, col)] * y[(b, col)]).conj());
            }
        }
    }
    w
}

/// Matricized tensor times Khatri-Rao product for one mode, accumulated into
/// `out` (row-major, `dim(mode) × r`).
fn mttkrp(t: &ComplexTensor3, mode: usize, w: &[Complex64], r: usize, out: &mut [Complex64]) {
    let (di, dj, dk) = t.dims();
    let data = t.data();
    for i in 0..di {
        for j in 0..dj {
            for k in 0..dk {
                let x = data[(i * dj + j) * dk + k];
                let (row, wrow) = match mode {
                    0 => (i, j * dk + k),
                    1 => (j, i * dk + k),
                    _ => (k, i * dj + j),
                };
                let dst = &mut out[row * r..(row + 1) * r];
                let src = &w[wrow * r..(wrow + 1) * r];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += x * s;
                }
            }
        }
    }
}

fn gram(x: &CMatrix) -> CMatrix {
    x.adjoint() * x
}

/// Solves `F · conj(G) = rhs` for Hermitian positive semidefinite `G`,
/// i.e. `G · Fᵀ = rhsᵀ`.
fn solve_normal(g: CMatrix, rhs: &[Complex64], rows: usize) -> CMatrix {
    let r = g.nrows();
    let rhs_t = CMatrix::from_fn(r, rows, |col, row| rhs[row * r + col]);
    let sol = match g.clone().cholesky() {
        Some(ch) => ch.solve(&rhs_t),
        None => pinv(&g) * rhs_t,
    };
    sol.transpose()
}

fn normalize_columns(x: &mut CMatrix) {
    for mut col in x.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 && n.is_finite() {
            col.unscale_mut(n);
        }
    }
}

fn objective(tensors: &[ComplexTensor3], f: &FactorSet) -> f64 {
    let r = f.rank();
    let mut total = 0.0;
    for (m, t) in tensors.iter().enumerate() {
        let (a, b, c) = (&f.a[m], &f.b, &f.c[m]);
        let (di, dj, dk) = t.dims();
        let data = t.data();
        let mut ab = vec![Complex64::default(); r];
        for i in 0..di {
            for j in 0..dj {
                for (col, v) in ab.iter_mut().enumerate() {
                    *v = a[(i, col)] * b[(j, col)];
                }
                for k in 0..dk {
                    let mut model = Complex64::default();
                    for (col, v) in ab.iter().enumerate() {
                        model += v * c[(k, col)];
                    }
                    total += (data[(i * dj + j) * dk + k] - model).norm_sqr();
                }
            }
        }
    }
    total
}

fn check_shapes(tensors: &[ComplexTensor3], f: &FactorSet) -> Result<()> {
    f.validate()?;
    if tensors.len() != f.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} tensors for {} coupled factors",
            tensors.len(),
            f.len()
        )));
    }
    for (m, t) in tensors.iter().enumerate() {
        let want = (f.a[m].nrows(), f.b.nrows(), f.c[m].nrows());
        if t.dims() != want {
            return Err(Error::ShapeMismatch(format!(
                "tensor {m} is {:?}, factors imply {:?}",
                t.dims(),
                want
            )));
        }
    }
    Ok(())
}

/// One sweep: every `A^(m)`, then the shared `B` from a single stacked
/// least-squares problem, then every `C^(m)`. `A` and `B` leave with unit
/// columns; `C` absorbs the scale.
fn sweep(tensors: &[ComplexTensor3], f: &mut FactorSet) {
    let r = f.rank();
    for (m, t) in tensors.iter().enumerate() {
        let rows = f.a[m].nrows();
        let mut rhs = vec![Complex64::default(); rows * r];
        mttkrp(t, 0, &conj_kr(&f.b, &f.c[m]), r, &mut rhs);
        let g = gram(&f.b).component_mul(&gram(&f.c[m]));
        f.a[m] = solve_normal(g, &rhs, rows);
        normalize_columns(&mut f.a[m]);
    }
    let rows = f.b.nrows();
    let mut rhs = vec![Complex64::default(); rows * r];
    let mut g = CMatrix::zeros(r, r);
    for (m, t) in tensors.iter().enumerate() {
        mttkrp(t, 1, &conj_kr(&f.a[m], &f.c[m]), r, &mut rhs);
        g += gram(&f.a[m]).component_mul(&gram(&f.c[m]));
    }
    f.b = solve_normal(g, &rhs, rows);
    normalize_columns(&mut f.b);
    for (m, t) in tensors.iter().enumerate() {
        let rows = f.c[m].nrows();
        let mut rhs = vec![Complex64::default(); rows * r];
        mttkrp(t, 2, &conj_kr(&f.a[m], &f.b), r, &mut rhs);
        let g = gram(&f.a[m]).component_mul(&gram(&f.b));
        f.c[m] = solve_normal(g, &rhs, rows);
    }
}

/// Alternating least squares for the coupled CPD with shared second factor.
/// With a single tensor this is plain CPD-ALS.
pub fn ccpd_als(tensors: &[ComplexTensor3], init: FactorSet, opts: &AlsOptions) -> Result<AlsOutcome> {
    check_shapes(tensors, &init)?;
    let energy: f64 = tensors.iter().map(|t| t.frobenius_norm_sqr()).sum();
    let floor = EXACT_FIT * energy;
    let mut best = init;
    let mut f_prev = objective(tensors, &best);
    let mut history = vec![f_prev];
    let mut converged = f_prev <= floor;
    let mut monotone = true;
    let mut sweeps = 0;
    while !converged && sweeps < opts.max_sweeps {
        let mut next = best.clone();
        sweep(tensors, &mut next);
        sweeps += 1;
        let f = objective(tensors, &next);
        if !f.is_finite() || f > f_prev + opts.slack * f_prev.max(1.0) {
            history.push(f);
            monotone = false;
            break;
        }
        history.push(f);
        best = next;
        converged = f <= floor || (f_prev - f).abs() <= opts.tol * f_prev;
        f_prev = f;
    }
    Ok(AlsOutcome {
        factors: best,
        objective: history,
        sweeps,
        converged,
        monotone,
    })
}

fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    })
}

/// Circular Gaussian factors matching the shapes of `tensors`.
pub fn random_factors<R: Rng + ?Sized>(
    tensors: &[ComplexTensor3],
    rank: usize,
    rng: &mut R,
) -> Result<FactorSet> {
    let j = tensors
        .first()
        .ok_or_else(|| Error::ShapeMismatch("no tensors".to_string()))?
        .dims()
        .1;
    let a = tensors.iter().map(|t| gaussian(t.dims().0, rank, rng)).collect();
    let b = gaussian(j, rank, rng);
    let c = tensors.iter().map(|t| gaussian(t.dims().2, rank, rng)).collect();
    FactorSet::new(a, b, c)
}
