use serde::{Deserialize, Serialize};

use crate::geometry::{ArrayGeometry, ArrayKind, Axis, SUBARRAYS};

/// Relation between the rank and the two spatial dimensions `I` (receive
/// sensors) and `J` (transmit sensors).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// `min(I, J) ≥ R`.
    Overdetermined,
    /// `min(I, J) < R ≤ max(I, J)` and `R < 1.5·min(I, J)`.
    SlightlySingleUnderdetermined,
    /// `min(I, J) < R ≤ max(I, J)` and `R ≥ 1.5·min(I, J)`.
    HighlySingleUnderdetermined,
    /// `R > max(I, J)`.
    DoublyUnderdetermined,
}

impl Scenario {
    pub fn classify(i: usize, j: usize, rank: usize) -> Self {
        let (lo, hi) = (i.min(j), i.max(j));
        if rank <= lo {
            Scenario::Overdetermined
        } else if rank > hi {
            Scenario::DoublyUnderdetermined
        } else if 2 * rank >= 3 * lo {
            Scenario::HighlySingleUnderdetermined
        } else {
            Scenario::SlightlySingleUnderdetermined
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Scenario::Overdetermined => "overdetermined",
            Scenario::SlightlySingleUnderdetermined => "slightly single underdetermined",
            Scenario::HighlySingleUnderdetermined => "highly single underdetermined",
            Scenario::DoublyUnderdetermined => "doubly underdetermined",
        }
    }
}

/// One inequality `lhs ≥ rhs` of the working conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub name: String,
    pub lhs: usize,
    pub rhs: usize,
    pub holds: bool,
}

impl Inequality {
    fn new(name: &str, lhs: usize, rhs: usize) -> Self {
        Inequality {
            name: name.to_string(),
            lhs,
            rhs,
            holds: lhs >= rhs,
        }
    }
}

/// Outcome of the sufficient working-condition checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkingConditionReport {
    pub satisfied: bool,
    pub details: Vec<Inequality>,
    pub scenario: Scenario,
}

/// Largest shift-block row multiplicity over all subarrays of `g`: `I' − 1`
/// for L-shaped arrays and `I''` for planar arrays.
pub fn shift_multiplicity(g: &ArrayGeometry) -> usize {
    let (ix, iy) = g.axis_counts();
    SUBARRAYS
        .iter()
        .map(|&(axis, sub)| {
            let n = g.subarray_count(axis, sub).saturating_sub(1);
            match g.kind() {
                ArrayKind::LShaped => n,
                ArrayKind::Planar => match axis {
                    Axis::X => n * iy,
                    Axis::Y => n * ix,
                },
            }
        })
        .max()
        .unwrap_or(0)
}

/// Checks `min(T, J) ≥ R` and the per-array shift condition
/// `multiplicity·K ≥ R`. Never fails; violations are reported.
pub fn check_conditions(
    geometries: &[ArrayGeometry],
    rank: usize,
    k: usize,
    t: usize,
    j: usize,
) -> WorkingConditionReport {
    let mut details = vec![Inequality::new("min(T, J) >= R", t.min(j), rank)];
    for (m, g) in geometries.iter().enumerate() {
        let name = match g.kind() {
            ArrayKind::LShaped => format!("array {m}: (I' - 1) K >= R"),
            ArrayKind::Planar => format!("array {m}: I'' K >= R"),
        };
        details.push(Inequality::new(&name, shift_multiplicity(g) * k, rank));
    }
    let i = geometries.iter().map(|g| g.len()).min().unwrap_or(0);
    WorkingConditionReport {
        satisfied: !geometries.is_empty() && details.iter().all(|d| d.holds),
        details,
        scenario: Scenario::classify(i, j, rank),
    }
}
