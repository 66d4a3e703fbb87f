use crate::ccpd::ReducedData;
use crate::error::{Error, Result};
use crate::linalg::{condition_number, dominant_rank1};
use crate::tensor::{unfold_mode2, CMatrix, FactorSet};

const SINGULAR_B: f64 = 1e14;

/// Recovers `A^(m)` (unit columns) and `C^(m)` from the reduced data given
/// the reduced shared factor: column `r` of `T_(2)·B̃⁻ᵀ` is `a_r ⊗ c_r`.
/// The returned set keeps `B̃`; use [`ReducedData::expand_b`] for samples.
pub fn recover_factors(rd: &ReducedData, b: &CMatrix) -> Result<FactorSet> {
    let r = rd.rank();
    if b.shape() != (r, r) {
        return Err(Error::ShapeMismatch(format!(
            "reduced B is {:?}, expected {r}x{r}",
            b.shape()
        )));
    }
    if !(condition_number(b) < SINGULAR_B) {
        return Err(Error::SingularFactor);
    }
    let lu = b.clone().lu();
    let mut a_list = Vec::with_capacity(rd.tensors.len());
    let mut c_list = Vec::with_capacity(rd.tensors.len());
    for t in &rd.tensors {
        let (i, _, k) = t.dims();
        // Ω = T_(2)·B̃⁻ᵀ  ⇔  Ωᵀ = B̃⁻¹·T_(2)ᵀ
        let omega_t = lu
            .solve(&unfold_mode2(t).transpose())
            .ok_or(Error::SingularFactor)?;
        let mut a = CMatrix::zeros(i, r);
        let mut c = CMatrix::zeros(k, r);
        for col in 0..r {
            let block = CMatrix::from_fn(i, k, |ii, kk| omega_t[(col, ii * k + kk)]);
            let pair = dominant_rank1(&block)?;
            a.set_column(col, &pair.left);
            c.set_column(col, &pair.right);
        }
        a_list.push(a);
        c_list.push(c);
    }
    FactorSet::new(a_list, b.clone(), c_list)
}
