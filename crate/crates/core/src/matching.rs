//! Resolution of the column permutation and scaling ambiguity between
//! estimated and reference factors.

use crate::error::{Error, Result};
use crate::tensor::{CMatrix, FactorSet};

/// Largest size solved exactly; bigger problems use greedy matching.
pub const HUNGARIAN_LIMIT: usize = 64;

/// Minimum-cost perfect assignment on a square cost matrix (row-major).
/// Returns `assign[row] = col`.
pub fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n, "cost matrix must be n x n");
    // potentials formulation, 1-based with a virtual column 0
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// `|⟨t_r, e_s⟩| / (‖t_r‖·‖e_s‖)`, row-major over `(r, s)`.
pub fn column_correlation(truth: &CMatrix, est: &CMatrix) -> Result<Vec<f64>> {
    if truth.shape() != est.shape() {
        return Err(Error::ShapeMismatch(format!(
            "reference {:?} vs estimate {:?}",
            truth.shape(),
            est.shape()
        )));
    }
    let n = truth.ncols();
    let mut out = vec![0.0; n * n];
    for r in 0..n {
        let t = truth.column(r);
        let tn = t.norm();
        for s in 0..n {
            let e = est.column(s);
            let den = tn * e.norm();
            out[r * n + s] = if den > 0.0 { t.dotc(&e).norm() / den } else { 0.0 };
        }
    }
    Ok(out)
}

fn greedy(corr: &[f64], n: usize) -> Vec<usize> {
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|r| (0..n).map(move |s| (r, s))).collect();
    pairs.sort_by(|a, b| corr[b.0 * n + b.1].total_cmp(&corr[a.0 * n + a.1]));
    let mut assign = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    for (r, s) in pairs {
        if assign[r] == usize::MAX && !taken[s] {
            assign[r] = s;
            taken[s] = true;
        }
    }
    assign
}

/// `perm[r]` is the estimated column matched to reference column `r`,
/// maximizing total normalized correlation.
pub fn match_columns(truth: &CMatrix, est: &CMatrix) -> Result<Vec<usize>> {
    let corr = column_correlation(truth, est)?;
    let n = truth.ncols();
    if n > HUNGARIAN_LIMIT {
        return Ok(greedy(&corr, n));
    }
    let cost: Vec<f64> = corr.iter().map(|c| 1.0 - c).collect();
    Ok(hungarian(&cost, n))
}

/// Columns of `m` reordered so that column `r` of the result is `m[:, perm[r]]`.
pub fn permute_columns(m: &CMatrix, perm: &[usize]) -> CMatrix {
    CMatrix::from_fn(m.nrows(), perm.len(), |i, r| m[(i, perm[r])])
}

/// `‖T − E·diag(α)‖_F / ‖T‖_F` with the least-squares column scales `α`,
/// columns already aligned.
pub fn scaled_relative_error(truth: &CMatrix, est: &CMatrix) -> Result<f64> {
    if truth.shape() != est.shape() {
        return Err(Error::ShapeMismatch(format!(
            "reference {:?} vs estimate {:?}",
            truth.shape(),
            est.shape()
        )));
    }
    let (mut err, mut total) = (0.0, 0.0);
    for r in 0..truth.ncols() {
        let t = truth.column(r);
        let e = est.column(r);
        let ee = e.norm_squared();
        let fit = if ee > 0.0 { e.dotc(&t) / ee } else { Default::default() };
        err += (t - e * fit).norm_squared();
        total += t.norm_squared();
    }
    Ok(if total > 0.0 { (err / total).sqrt() } else { err.sqrt() })
}

/// Largest scaled relative error over every factor matrix after a single
/// column permutation derived from `B`. Both sets must express `B` in the
/// same space.
pub fn factor_error(truth: &FactorSet, est: &FactorSet) -> Result<(f64, Vec<usize>)> {
    if truth.len() != est.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} reference arrays vs {} estimated",
            truth.len(),
            est.len()
        )));
    }
    let perm = match_columns(&truth.b, &est.b)?;
    let mut worst = scaled_relative_error(&truth.b, &permute_columns(&est.b, &perm))?;
    for (t, e) in truth.a.iter().zip(&est.a).chain(truth.c.iter().zip(&est.c)) {
        worst = worst.max(scaled_relative_error(t, &permute_columns(e, &perm))?);
    }
    Ok((worst, perm))
}
