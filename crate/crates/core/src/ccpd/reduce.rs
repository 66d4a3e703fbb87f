use crate::error::{Error, Result};
use crate::linalg::svd_sorted;
use crate::tensor::{refold_mode2, unfold_mode2, CMatrix, ComplexTensor3};

/// Relative singular-value level below which the stacked data is treated as
/// rank deficient.
const RANK_TOL: f64 = 1e-10;

/// Observations with their second mode compressed to `R` dimensions.
#[derive(Debug, Clone)]
pub struct ReducedData {
    /// One `I^(m) × R × K` tensor per receive array.
    pub tensors: Vec<ComplexTensor3>,
    /// `T × R` orthonormal basis `V` of the dominant row space; the reduced
    /// second factor is `Vᵀ·B`.
    pub projector: CMatrix,
    /// Leading singular values of the stacked unfoldings.
    pub singular_values: Vec<f64>,
}

impl ReducedData {
    pub fn rank(&self) -> usize {
        self.projector.ncols()
    }

    /// Maps a reduced `R × R` second factor back to sample space:
    /// `B = conj(V)·B̃`.
    pub fn expand_b(&self, reduced_b: &CMatrix) -> CMatrix {
        self.projector.map(|z| z.conj()) * reduced_b
    }

    /// Reduces a sample-space second factor: `B̃ = Vᵀ·B`.
    pub fn project_b(&self, b: &CMatrix) -> CMatrix {
        self.projector.transpose() * b
    }
}

fn stack_rows(blocks: &[CMatrix]) -> CMatrix {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks[0].ncols();
    let mut out = CMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, 0), b.shape()).copy_from(b);
        at += b.nrows();
    }
    out
}

/// Projects every tensor's second mode onto the dominant `rank`-dimensional
/// right-singular subspace of the row-stacked mode-2 unfoldings.
pub fn reduce_dimension(tensors: &[ComplexTensor3], rank: usize) -> Result<ReducedData> {
    let first = tensors
        .first()
        .ok_or_else(|| Error::ShapeMismatch("no tensors to reduce".to_string()))?;
    let samples = first.dims().1;
    if tensors.iter().any(|t| t.dims().1 != samples) {
        return Err(Error::ShapeMismatch(
            "tensors disagree on the second mode".to_string(),
        ));
    }
    let unfolded: Vec<CMatrix> = tensors.iter().map(unfold_mode2).collect();
    let stacked = stack_rows(&unfolded);
    if rank == 0 || rank > stacked.nrows().min(samples) {
        return Err(Error::RankOutOfRange {
            rank,
            rows: stacked.nrows(),
            cols: samples,
        });
    }
    // the right singular vectors of a tall matrix are those of its R factor
    let core = if stacked.nrows() > 2 * samples {
        stacked.qr().r()
    } else {
        stacked
    };
    let svd = svd_sorted(&core);
    let smax = svd.s[0];
    let numerical_rank = svd.s.iter().filter(|&&s| s > RANK_TOL * smax).count();
    if numerical_rank < rank {
        return Err(Error::RankDeficient {
            requested: rank,
            found: numerical_rank,
        });
    }
    let projector = svd.v.columns(0, rank).into_owned();
    let reduced = tensors
        .iter()
        .zip(&unfolded)
        .map(|(t, u)| {
            let (i, _, k) = t.dims();
            refold_mode2(&(u * &projector), (i, rank, k))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReducedData {
        tensors: reduced,
        projector,
        singular_values: svd.s[..rank].to_vec(),
    })
}
