//! Direction finding from recovered steering columns and 3-D position
//! fusion of per-array directions.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, ArrayKind, Axis, Direction, Sub, SUBARRAYS};
use crate::linalg::CVector;
use crate::tensor::CMatrix;
use crate::Complex64;

/// Largest tolerated gap between matched coprime candidates, in cosine units.
pub const COPRIME_TOL: f64 = 0.1;
/// Slack on the unit-disk constraint for direction cosines.
pub const DISK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorEstimate {
    pub z: Complex64,
    pub step: u32,
    pub axis: Axis,
    pub sub: Sub,
}

/// LS shift ratio `Σ conj(u)·o / Σ |u|²` over matching unshifted/shifted
/// pairs.
fn shift_ratio(pairs: impl Iterator<Item = (Complex64, Complex64)>) -> Result<Complex64> {
    let (mut num, mut den) = (Complex64::default(), 0.0);
    for (u, o) in pairs {
        num += u.conj() * o;
        den += u.norm_sqr();
    }
    if den == 0.0 {
        return Err(Error::ZeroInput);
    }
    Ok(num / den)
}

/// Generators of the four sparse subarrays from a grid indexed `(ix, iy)`
/// over the axis sets.
fn grid_generators(
    g: &ArrayGeometry,
    at: impl Fn(usize, usize) -> Complex64,
) -> Result<Vec<GeneratorEstimate>> {
    let (nx, ny) = g.axis_counts();
    SUBARRAYS
        .iter()
        .map(|&(axis, sub)| {
            let members = g.axis_subarray(axis, sub);
            if members.len() < 2 {
                return Err(Error::InvalidGeometry(format!(
                    "subarray {axis:?}/{sub:?} has fewer than 2 sensors"
                )));
            }
            let other = match axis {
                Axis::X => ny,
                Axis::Y => nx,
            };
            let pairs = members.windows(2).flat_map(|w| {
                let at = &at;
                (0..other).map(move |o| match axis {
                    Axis::X => (at(w[0], o), at(w[1], o)),
                    Axis::Y => (at(o, w[0]), at(o, w[1])),
                })
            });
            Ok(GeneratorEstimate {
                z: shift_ratio(pairs)?,
                step: g.step(axis, sub),
                axis,
                sub,
            })
        })
        .collect()
}

/// Shift-invariance generators of every sparse subarray. L-shaped columns
/// use the positions on each axis; planar columns use every grid row.
pub fn extract_generators(a_col: &CVector, g: &ArrayGeometry) -> Result<Vec<GeneratorEstimate>> {
    if a_col.len() != g.len() {
        return Err(Error::ShapeMismatch(format!(
            "steering column of length {} for {} sensors",
            a_col.len(),
            g.len()
        )));
    }
    match g.kind() {
        ArrayKind::Planar => {
            let ny = g.axis_counts().1;
            grid_generators(g, |ix, iy| a_col[ix * ny + iy])
        }
        ArrayKind::LShaped => SUBARRAYS
            .iter()
            .map(|&(axis, sub)| {
                let q = g.q(axis, sub);
                if q.len() < 2 {
                    return Err(Error::InvalidGeometry(format!(
                        "subarray {axis:?}/{sub:?} has fewer than 2 sensors"
                    )));
                }
                Ok(GeneratorEstimate {
                    z: shift_ratio(q.windows(2).map(|w| (a_col[w[0]], a_col[w[1]])))?,
                    step: g.step(axis, sub),
                    axis,
                    sub,
                })
            })
            .collect(),
    }
}

/// Every `u = (arg z + 2πq)/(π·step)` with `|u| ≤ 1 + tol`. Values
/// beyond `±1` are kept unclipped so that aliases `u ± 2` stay
/// distinguishable from in-range candidates.
fn candidates(z: &GeneratorEstimate, tol: f64) -> Vec<f64> {
    let step = z.step.max(1) as f64;
    let base = z.z.arg();
    let reach = (z.step as i64) / 2 + 2;
    (-reach..=reach)
        .map(|q| (base + 2.0 * PI * q as f64) / (PI * step))
        .filter(|u| u.abs() <= 1.0 + tol)
        .collect()
}

fn excess(u: f64) -> f64 {
    (u.abs() - 1.0).max(0.0)
}

/// Candidate pair minimizing gap plus out-of-range excess: `(gap, u_m, u_n)`
/// with both members clipped to `[−1, 1]`.
fn closest_pair(
    z_m: &GeneratorEstimate,
    z_n: &GeneratorEstimate,
    tol: f64,
) -> Option<(f64, f64, f64)> {
    let (cm, cn) = (candidates(z_m, tol), candidates(z_n, tol));
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for &a in &cm {
        for &b in &cn {
            let gap = (a - b).abs();
            let score = gap + excess(a) + excess(b);
            if best.is_none_or(|(s, ..)| score < s) {
                best = Some((score, gap, a, b));
            }
        }
    }
    best.map(|(_, gap, a, b)| (gap, a.clamp(-1.0, 1.0), b.clamp(-1.0, 1.0)))
}

/// Direction cosine consistent with both coprime generators on one axis,
/// using the default tolerance.
pub fn disambiguate_coprime(z_m: &GeneratorEstimate, z_n: &GeneratorEstimate) -> Result<f64> {
    disambiguate_coprime_tol(z_m, z_n, COPRIME_TOL)
}

/// Midpoint of the closest candidate pair; fails if the pair is farther
/// apart than `tol`.
pub fn disambiguate_coprime_tol(
    z_m: &GeneratorEstimate,
    z_n: &GeneratorEstimate,
    tol: f64,
) -> Result<f64> {
    if z_m.axis != z_n.axis {
        return Err(Error::InvalidGeometry("generators from different axes".into()));
    }
    if gcd(z_m.step, z_n.step) != 1 {
        return Err(Error::NotCoprime(z_m.step, z_n.step));
    }
    match closest_pair(z_m, z_n, tol) {
        Some((gap, a, b)) if gap <= tol => Ok(0.5 * (a + b)),
        Some((gap, _, _)) => Err(Error::Ambiguous { gap, tol }),
        None => Err(Error::Ambiguous {
            gap: f64::INFINITY,
            tol,
        }),
    }
}

/// As [`disambiguate_coprime`], falling back on failure to the candidate of
/// the smaller-step subarray from the closest pair.
pub fn axis_cosine(z_m: &GeneratorEstimate, z_n: &GeneratorEstimate) -> Result<f64> {
    match disambiguate_coprime(z_m, z_n) {
        Err(Error::Ambiguous { gap, tol }) => {
            let (_, a, b) = closest_pair(z_m, z_n, COPRIME_TOL).ok_or(Error::Ambiguous { gap, tol })?;
            Ok(if z_m.step <= z_n.step { a } else { b })
        }
        other => other,
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `ã_x ⊙ ã_y` of an L-shaped steering column, scaled to 1 at the origin.
/// Entry `ix·|S_y| + iy` corresponds to the virtual sensor `(x_ix, y_iy)`.
pub fn virtual_steering(a_col: &CVector, g: &ArrayGeometry) -> Result<CVector> {
    if g.kind() != ArrayKind::LShaped {
        return Err(Error::InvalidGeometry(
            "virtual planar steering needs an L-shaped array".into(),
        ));
    }
    if a_col.len() != g.len() {
        return Err(Error::ShapeMismatch(format!(
            "steering column of length {} for {} sensors",
            a_col.len(),
            g.len()
        )));
    }
    let (qx, qy) = (g.q_axis(Axis::X), g.q_axis(Axis::Y));
    let origin = a_col[g.origin()];
    if origin.norm() == 0.0 {
        return Err(Error::ZeroInput);
    }
    let norm = origin * origin;
    Ok(CVector::from_fn(qx.len() * qy.len(), |row, _| {
        a_col[qx[row / qy.len()]] * a_col[qy[row % qy.len()]] / norm
    }))
}

pub fn doa_from_cosines(ux: f64, uy: f64) -> Result<Direction> {
    let rho = ux * ux + uy * uy;
    if !(rho <= 1.0 + DISK_TOL) {
        return Err(Error::OutsideUnitDisk(ux, uy));
    }
    Direction::try_new([ux, uy, (1.0 - rho).max(0.0).sqrt()])
}

/// Direction of one recovered steering column. Cosine pairs that leave the
/// unit disk are pulled radially back onto it.
pub fn steering_to_doa(a_col: &CVector, g: &ArrayGeometry) -> Result<Direction> {
    let gens = match g.kind() {
        ArrayKind::Planar => extract_generators(a_col, g)?,
        ArrayKind::LShaped => {
            let v = virtual_steering(a_col, g)?;
            let ny = g.axis_counts().1;
            grid_generators(g, |ix, iy| v[ix * ny + iy])?
        }
    };
    let ux = axis_cosine(&gens[0], &gens[1])?;
    let uy = axis_cosine(&gens[2], &gens[3])?;
    let rho = (ux * ux + uy * uy).sqrt();
    if rho > 1.0 {
        doa_from_cosines(ux / rho, uy / rho)
    } else {
        doa_from_cosines(ux, uy)
    }
}

/// `doas[m][r]` from recovered receive factors.
pub fn estimate_doas(a: &[CMatrix], geometries: &[ArrayGeometry]) -> Result<Vec<Vec<Direction>>> {
    if a.len() != geometries.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} factors for {} arrays",
            a.len(),
            geometries.len()
        )));
    }
    a.iter()
        .zip(geometries)
        .map(|(am, g)| {
            (0..am.ncols())
                .map(|r| steering_to_doa(&am.column(r).into_owned(), g))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub position: [f64; 3],
    pub doas: Vec<Direction>,
    /// Sum of squared distances from `position` to every line.
    pub residual: f64,
}

/// `Σ_m ‖ξ − p_m‖² − ((ξ − p_m)ᵀ v_m)²`.
pub fn line_objective(centers: &[[f64; 3]], doas: &[Direction], xi: [f64; 3]) -> f64 {
    centers
        .iter()
        .zip(doas)
        .map(|(p, v)| {
            let d = Vector3::from(xi) - Vector3::from(*p);
            let v = Vector3::from(v.vector());
            (d - v * d.dot(&v)).norm_squared()
        })
        .sum()
}

/// Point closest in the least-squares sense to the lines `p_m + t·v_m`.
pub fn fuse_lines(centers: &[[f64; 3]], doas: &[Direction]) -> Result<LocalizationResult> {
    if centers.len() != doas.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} centers for {} directions",
            centers.len(),
            doas.len()
        )));
    }
    if centers.len() < 2 {
        return Err(Error::ShapeMismatch("at least two lines are needed".into()));
    }
    let mut normal = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for (p, v) in centers.iter().zip(doas) {
        let v = Vector3::from(v.vector());
        let proj = Matrix3::identity() - v * v.transpose();
        rhs += proj * Vector3::from(*p);
        normal += proj;
    }
    let eig = normal.symmetric_eigen();
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if lo <= 1e-12 * hi {
        return Err(Error::ParallelLines);
    }
    let xi = normal.lu().solve(&rhs).ok_or(Error::ParallelLines)?;
    let position = [xi[0], xi[1], xi[2]];
    Ok(LocalizationResult {
        position,
        doas: doas.to_vec(),
        residual: line_objective(centers, doas, position),
    })
}

/// Mean of `arccos |vᵀṽ|` over every array and target, in radians.
pub fn mae(truth: &[Vec<Direction>], est: &[Vec<Direction>]) -> Result<f64> {
    if truth.len() != est.len() || truth.iter().zip(est).any(|(t, e)| t.len() != e.len()) {
        return Err(Error::ShapeMismatch("direction tables differ in shape".into()));
    }
    let n: usize = truth.iter().map(|t| t.len()).sum();
    if n == 0 {
        return Err(Error::ShapeMismatch("no directions".into()));
    }
    let total: f64 = truth
        .iter()
        .zip(est)
        .flat_map(|(t, e)| t.iter().zip(e))
        .map(|(a, b)| a.dot(b).abs().min(1.0).acos())
        .sum();
    Ok(total / n as f64)
}
