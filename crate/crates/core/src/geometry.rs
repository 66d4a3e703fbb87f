//! Coprime L-shaped (CPLsA) and coprime planar (CPPA) sensor sets.
//!
//! Positions are integer multiples of the unit spacing `d = λ/2`, so a
//! sensor at `p` (in units of `d`) sees a plane wave with direction `u` at
//! phase `π · p·u`. Each axis is the union of two sparse ULAs with coprime
//! steps `M` and `N` that share the reference element at the origin.
//!
//! Ordering:
//! - CPLsA: the x-axis set in ascending order (origin first), then the
//!   nonzero y-axis elements in ascending order.
//! - CPPA: x-major over `S_x × S_y`, i.e. index `ix · |S_y| + iy`, so the
//!   steering matrix is literally `A_x ⊙ A_y`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::CMatrix;
use crate::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoprimeAxisSpec {
    pub m_step: u32,
    pub n_step: u32,
    pub m_count: usize,
    pub n_count: usize,
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl CoprimeAxisSpec {
    pub const fn new(m_step: u32, n_step: u32, m_count: usize, n_count: usize) -> Self {
        Self {
            m_step,
            n_step,
            m_count,
            n_count,
        }
    }

    /// Both subarrays with the same element count.
    pub const fn uniform(m_step: u32, n_step: u32, count: usize) -> Self {
        Self::new(m_step, n_step, count, count)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_step == 0 || self.n_step == 0 || gcd(self.m_step, self.n_step) != 1 {
            return Err(Error::NotCoprime(self.m_step, self.n_step));
        }
        if self.m_count < 2 || self.n_count < 2 {
            return Err(Error::InvalidGeometry(format!(
                "subarray counts {} and {} must be at least 2",
                self.m_count, self.n_count
            )));
        }
        Ok(())
    }

    fn subarray(&self, sub: Sub) -> impl Iterator<Item = i64> {
        let (step, count) = match sub {
            Sub::First => (self.m_step, self.m_count),
            Sub::Second => (self.n_step, self.n_count),
        };
        (0..count as i64).map(move |i| i * step as i64)
    }

    /// Sorted union of both subarrays, in units of `d`.
    pub fn axis_positions(&self) -> Vec<i64> {
        let mut all: Vec<i64> = self
            .subarray(Sub::First)
            .chain(self.subarray(Sub::Second))
            .collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    pub fn step(&self, sub: Sub) -> u32 {
        match sub {
            Sub::First => self.m_step,
            Sub::Second => self.n_step,
        }
    }

    pub fn count(&self, sub: Sub) -> usize {
        match sub {
            Sub::First => self.m_count,
            Sub::Second => self.n_count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArrayKind {
    #[serde(rename = "cplsa")]
    LShaped,
    #[serde(rename = "cppa")]
    Planar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

/// Which of the two sparse ULAs on an axis: `First` has step `M`, `Second`
/// has step `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sub {
    First,
    Second,
}

/// The four sparse subarrays in their canonical order x1, x2, y1, y2.
pub const SUBARRAYS: [(Axis, Sub); 4] = [
    (Axis::X, Sub::First),
    (Axis::X, Sub::Second),
    (Axis::Y, Sub::First),
    (Axis::Y, Sub::Second),
];

/// Serializable description of an array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeometrySpec {
    pub kind: ArrayKind,
    pub x: CoprimeAxisSpec,
    pub y: CoprimeAxisSpec,
}

impl GeometrySpec {
    pub fn build(&self) -> Result<ArrayGeometry> {
        match self.kind {
            ArrayKind::LShaped => build_cplsa(self.x, self.y),
            ArrayKind::Planar => build_cppa(self.x, self.y),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    kind: ArrayKind,
    x: CoprimeAxisSpec,
    y: CoprimeAxisSpec,
    axis_x: Vec<i64>,
    axis_y: Vec<i64>,
    positions: Vec<[f64; 3]>,
    // position index of each axis element on the axis line through the origin
    q_x: Vec<usize>,
    q_y: Vec<usize>,
    // subarray members as indices into the axis sets, in progression order
    sub: [Vec<usize>; 4],
    origin: usize,
}

fn subarray_slot(axis: Axis, sub: Sub) -> usize {
    match (axis, sub) {
        (Axis::X, Sub::First) => 0,
        (Axis::X, Sub::Second) => 1,
        (Axis::Y, Sub::First) => 2,
        (Axis::Y, Sub::Second) => 3,
    }
}

fn axis_members(spec: &CoprimeAxisSpec, axis_set: &[i64], sub: Sub) -> Vec<usize> {
    spec.subarray(sub)
        .map(|p| axis_set.binary_search(&p).expect("subarray element in axis set"))
        .collect()
}

fn subarrays_of(
    x: &CoprimeAxisSpec,
    y: &CoprimeAxisSpec,
    axis_x: &[i64],
    axis_y: &[i64],
) -> [Vec<usize>; 4] {
    [
        axis_members(x, axis_x, Sub::First),
        axis_members(x, axis_x, Sub::Second),
        axis_members(y, axis_y, Sub::First),
        axis_members(y, axis_y, Sub::Second),
    ]
}

pub fn build_cplsa(x: CoprimeAxisSpec, y: CoprimeAxisSpec) -> Result<ArrayGeometry> {
    x.validate()?;
    y.validate()?;
    let axis_x = x.axis_positions();
    let axis_y = y.axis_positions();
    let mut positions: Vec<[f64; 3]> = axis_x.iter().map(|&p| [p as f64, 0.0, 0.0]).collect();
    let q_x: Vec<usize> = (0..axis_x.len()).collect();
    let mut q_y = Vec::with_capacity(axis_y.len());
    for &p in &axis_y {
        if p == 0 {
            q_y.push(0);
        } else {
            q_y.push(positions.len());
            positions.push([0.0, p as f64, 0.0]);
        }
    }
    let sub = subarrays_of(&x, &y, &axis_x, &axis_y);
    Ok(ArrayGeometry {
        kind: ArrayKind::LShaped,
        x,
        y,
        axis_x,
        axis_y,
        positions,
        q_x,
        q_y,
        sub,
        origin: 0,
    })
}

pub fn build_cppa(x: CoprimeAxisSpec, y: CoprimeAxisSpec) -> Result<ArrayGeometry> {
    x.validate()?;
    y.validate()?;
    let axis_x = x.axis_positions();
    let axis_y = y.axis_positions();
    let ny = axis_y.len();
    let mut positions = Vec::with_capacity(axis_x.len() * ny);
    for &px in &axis_x {
        for &py in &axis_y {
            positions.push([px as f64, py as f64, 0.0]);
        }
    }
    // origin sits at ix = iy = 0 because both axis sets start at 0
    let q_x = (0..axis_x.len()).map(|ix| ix * ny).collect();
    let q_y = (0..ny).collect();
    let sub = subarrays_of(&x, &y, &axis_x, &axis_y);
    Ok(ArrayGeometry {
        kind: ArrayKind::Planar,
        x,
        y,
        axis_x,
        axis_y,
        positions,
        q_x,
        q_y,
        sub,
        origin: 0,
    })
}

impl ArrayGeometry {
    pub fn kind(&self) -> ArrayKind {
        self.kind
    }

    pub fn spec(&self) -> GeometrySpec {
        GeometrySpec {
            kind: self.kind,
            x: self.x,
            y: self.y,
        }
    }

    pub fn axis_spec(&self, axis: Axis) -> &CoprimeAxisSpec {
        match axis {
            Axis::X => &self.x,
            Axis::Y => &self.y,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    /// Coordinates of the axis set `S_x` or `S_y`, in units of `d`.
    pub fn axis_set(&self, axis: Axis) -> &[i64] {
        match axis {
            Axis::X => &self.axis_x,
            Axis::Y => &self.axis_y,
        }
    }

    /// `(|S_x|, |S_y|)`.
    pub fn axis_counts(&self) -> (usize, usize) {
        (self.axis_x.len(), self.axis_y.len())
    }

    /// Position indices of the axis line through the origin (`Q_x`, `Q_y`).
    pub fn q_axis(&self, axis: Axis) -> &[usize] {
        match axis {
            Axis::X => &self.q_x,
            Axis::Y => &self.q_y,
        }
    }

    /// Members of a sparse ULA as indices into the axis set, in
    /// progression order.
    pub fn axis_subarray(&self, axis: Axis, sub: Sub) -> &[usize] {
        &self.sub[subarray_slot(axis, sub)]
    }

    /// Members of a sparse ULA as position indices (`Q_{x,1}` and friends).
    /// For a planar array these lie on the axis line through the origin.
    pub fn q(&self, axis: Axis, sub: Sub) -> Vec<usize> {
        let line = self.q_axis(axis);
        self.axis_subarray(axis, sub)
            .iter()
            .map(|&i| line[i])
            .collect()
    }

    pub fn step(&self, axis: Axis, sub: Sub) -> u32 {
        self.axis_spec(axis).step(sub)
    }

    pub fn subarray_count(&self, axis: Axis, sub: Sub) -> usize {
        self.axis_subarray(axis, sub).len()
    }

    /// Human-readable sensor table: index, x, y, z in units of `d`.
    pub fn table(&self) -> String {
        let mut out = format!(
            "# kind={:?} sensors={} axis_x={:?} axis_y={:?}\n# index x y z (units of d = lambda/2)\n",
            self.kind,
            self.len(),
            self.axis_x,
            self.axis_y
        );
        for (i, p) in self.positions.iter().enumerate() {
            out.push_str(&format!("{} {} {} {}\n", i, p[0], p[1], p[2]));
        }
        out
    }
}

/// Unit direction vector with nonnegative z component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction([f64; 3]);

impl Direction {
    /// Normalizes `v`; rejects zero vectors and directions pointing below
    /// the array plane.
    pub fn try_new(v: [f64; 3]) -> Result<Self> {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidGeometry(format!("direction {:?}", v)));
        }
        let u = [v[0] / n, v[1] / n, v[2] / n];
        if u[2] < -1e-12 {
            return Err(Error::InvalidGeometry(format!(
                "direction {:?} points below the array plane",
                v
            )));
        }
        Ok(Self([u[0], u[1], u[2].max(0.0)]))
    }

    /// Unit vector from `from` towards `to`.
    pub fn between(from: [f64; 3], to: [f64; 3]) -> Result<Self> {
        Self::try_new([to[0] - from[0], to[1] - from[1], to[2] - from[2]])
    }

    pub fn vector(&self) -> [f64; 3] {
        self.0
    }

    pub fn dot(&self, other: &Direction) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    /// Display-only `(elevation from z, azimuth from x)` in radians.
    pub fn to_angles(&self) -> (f64, f64) {
        let [x, y, z] = self.0;
        (z.clamp(-1.0, 1.0).acos(), y.atan2(x))
    }
}

/// `A(i, r) = exp(iπ · p_i·u_r)` for positions in units of `d = λ/2`.
pub fn steering_matrix(g: &ArrayGeometry, dirs: &[Direction]) -> CMatrix {
    CMatrix::from_fn(g.len(), dirs.len(), |i, r| {
        let p = g.positions[i];
        let u = dirs[r].0;
        let phase = PI * (p[0] * u[0] + p[1] * u[1] + p[2] * u[2]);
        Complex64::from_polar(1.0, phase)
    })
}

/// Rows of `a` listed in `q`, in that order.
pub fn subarray_rows(a: &CMatrix, q: &[usize]) -> Result<CMatrix> {
    if let Some(&bad) = q.iter().find(|&&i| i >= a.nrows()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            len: a.nrows(),
        });
    }
    Ok(CMatrix::from_fn(q.len(), a.ncols(), |i, j| a[(q[i], j)]))
}
