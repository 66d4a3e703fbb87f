use serde::{Deserialize, Serialize};

use crate::ccpd::ReducedData;
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, ArrayKind, Axis, Sub, SUBARRAYS};
use crate::linalg::svd_sorted;
use crate::tensor::{unfold_mode2, unfold_mode3_4d, CMatrix};
use crate::Complex64;

/// Relative smallest-singular-value floor for the unshifted block.
pub const FULL_RANK_TOL: f64 = 1e-8;

/// Which receive array and sparse subarray a target slice came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SliceTag {
    pub m: usize,
    pub axis: Axis,
    pub sub: Sub,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSlice {
    pub tag: SliceTag,
    /// `R × R`; equals `B·Z·B⁻¹` on exact data.
    pub g: CMatrix,
}

/// Slices to be jointly diagonalized plus the weight of the identity slice.
#[derive(Debug, Clone, PartialEq)]
pub struct JevdProblem {
    pub slices: Vec<TargetSlice>,
    /// Candidates rejected because the unshifted block lacked full column rank.
    pub skipped: Vec<SliceTag>,
    pub eta: f64,
}

impl JevdProblem {
    pub fn new(slices: Vec<TargetSlice>, skipped: Vec<SliceTag>, eta: f64) -> Result<Self> {
        let r = slices.first().ok_or(Error::NoTargetMatrix)?.g.nrows();
        if slices.iter().any(|s| s.g.shape() != (r, r)) {
            return Err(Error::ShapeMismatch("target slices must be square and equal".into()));
        }
        Ok(JevdProblem {
            slices,
            skipped,
            eta,
        })
    }

    pub fn rank(&self) -> usize {
        self.slices[0].g.nrows()
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    /// All slices followed by `η·I`.
    pub fn stacked(&self) -> Vec<CMatrix> {
        let r = self.rank();
        let mut out: Vec<CMatrix> = self.slices.iter().map(|s| s.g.clone()).collect();
        out.push(CMatrix::identity(r, r).scale(self.eta));
        out
    }
}

/// `[pinv(M1)·M2]ᵀ` for the unshifted rows `0..n·block` and shifted rows
/// `block..(n+1)·block`, or `None` if `M1` is rank deficient.
fn shift_target(unfolded: &CMatrix, block: usize) -> Option<CMatrix> {
    let rows = unfolded.nrows() - block;
    let r = unfolded.ncols();
    if rows < r {
        return None;
    }
    let m1 = unfolded.rows(0, rows).into_owned();
    let m2 = unfolded.rows(block, rows);
    let svd = svd_sorted(&m1);
    let smax = svd.s[0];
    if smax == 0.0 || svd.s[r - 1] <= FULL_RANK_TOL * smax {
        return None;
    }
    // pinv(M1) = V Σ⁻¹ Uᴴ with all R singular values retained
    let mut uh_m2 = svd.u.adjoint() * m2;
    for (i, s) in svd.s.iter().enumerate() {
        let inv = Complex64::from(1.0 / s);
        uh_m2.row_mut(i).iter_mut().for_each(|z| *z *= inv);
    }
    Some((svd.v * uh_m2).transpose())
}

fn collect(
    rd: &ReducedData,
    geometries: &[ArrayGeometry],
    kind: ArrayKind,
    eta: f64,
    mut unfold: impl FnMut(usize, &ArrayGeometry, Axis, Sub) -> Result<(CMatrix, usize)>,
) -> Result<JevdProblem> {
    if rd.tensors.len() != geometries.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} tensors for {} geometries",
            rd.tensors.len(),
            geometries.len()
        )));
    }
    let mut slices = Vec::new();
    let mut skipped = Vec::new();
    for (m, g) in geometries.iter().enumerate() {
        if g.kind() != kind {
            return Err(Error::InvalidGeometry(format!(
                "array {m} is {:?}, expected {:?}",
                g.kind(),
                kind
            )));
        }
        if g.len() != rd.tensors[m].dims().0 {
            return Err(Error::ShapeMismatch(format!(
                "array {m} has {} sensors but tensor has {} rows",
                g.len(),
                rd.tensors[m].dims().0
            )));
        }
        for &(axis, sub) in &SUBARRAYS {
            let tag = SliceTag { m, axis, sub };
            let (unfolded, block) = unfold(m, g, axis, sub)?;
            match shift_target(&unfolded, block) {
                Some(g) => slices.push(TargetSlice { tag, g }),
                None => skipped.push(tag),
            }
        }
    }
    if slices.is_empty() {
        return Err(Error::NoTargetMatrix);
    }
    JevdProblem::new(slices, skipped, eta)
}

/// Target slices of L-shaped arrays from their reduced third-order tensors.
pub fn build_targets_cplsa(
    rd: &ReducedData,
    geometries: &[ArrayGeometry],
    eta: f64,
) -> Result<JevdProblem> {
    collect(rd, geometries, ArrayKind::LShaped, eta, |m, g, axis, sub| {
        let t = rd.tensors[m].select_mode1(&g.q(axis, sub))?;
        Ok((unfold_mode2(&t), t.dims().2))
    })
}

/// Target slices of planar arrays, using the fourth-order reshape
/// `I_x × I_y × R × K` of each reduced tensor.
pub fn build_targets_cppa(
    rd: &ReducedData,
    geometries: &[ArrayGeometry],
    eta: f64,
) -> Result<JevdProblem> {
    collect(rd, geometries, ArrayKind::Planar, eta, |m, g, axis, sub| {
        let (ix, iy) = g.axis_counts();
        let t4 = rd.tensors[m].split_mode1(ix, iy)?;
        let t4 = match axis {
            Axis::X => t4,
            Axis::Y => t4.swap_modes12(),
        };
        let part = t4.select_mode1(g.axis_subarray(axis, sub))?;
        let (_, other, _, k) = part.dims();
        Ok((unfold_mode3_4d(&part), other * k))
    })
}

/// Dispatches on the array family shared by all geometries.
pub fn build_targets(
    rd: &ReducedData,
    geometries: &[ArrayGeometry],
    eta: f64,
) -> Result<JevdProblem> {
    match geometries.first().map(|g| g.kind()) {
        Some(ArrayKind::LShaped) => build_targets_cplsa(rd, geometries, eta),
        Some(ArrayKind::Planar) => build_targets_cppa(rd, geometries, eta),
        None => Err(Error::NoTargetMatrix),
    }
}
