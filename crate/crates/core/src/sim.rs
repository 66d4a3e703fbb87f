//! Scene generation and the multistatic observation model.
//!
//! All distances are in wavelengths. Every receive array sees target `r`
//! along the far-field direction from its reference element, and the
//! transmitted waveform reaches the target along the transmit direction:
//!
//! `X_k^(m) = Σ_r c_{k,r}^(m) · a_r^(m) · (S t_r)ᵀ`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{steering_matrix, ArrayGeometry, Direction, GeometrySpec};
use crate::tensor::{CMatrix, ComplexTensor3};
use crate::Complex64;

/// Axis-aligned box targets are drawn from, in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub z: (f64, f64),
}

impl Default for Region {
    fn default() -> Self {
        Self {
            x: (-7000.0, 7000.0),
            y: (-7000.0, 7000.0),
            z: (4000.0, 8000.0),
        }
    }
}

impl Region {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("x", self.x), ("y", self.y), ("z", self.z)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("region bounds for {name}: [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        let inside = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        inside(p[0], self.x) && inside(p[1], self.y) && inside(p[2], self.z)
    }
}

/// Everything needed to draw a random scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub tx: GeometrySpec,
    pub rx: GeometrySpec,
    pub tx_center: [f64; 3],
    pub rx_centers: Vec<[f64; 3]>,
    #[serde(default)]
    pub region: Region,
    pub targets: usize,
    pub pulses: usize,
    pub samples: usize,
    /// Minimum angle between any two targets seen from any array, degrees.
    #[serde(default = "default_separation")]
    pub min_separation_deg: f64,
}

fn default_separation() -> f64 {
    0.5
}

/// Array placements used throughout the benchmark: one transmitter and
/// three receivers.
pub const TX_CENTER: [f64; 3] = [0.0, -8000.0, 0.0];
pub const RX_CENTERS: [[f64; 3]; 3] = [
    [-8000.0, 8000.0, 0.0],
    [0.0, 8000.0, 0.0],
    [8000.0, 8000.0, 0.0],
];

#[derive(Debug, Clone)]
pub struct Scene {
    pub tx_geometry: ArrayGeometry,
    pub rx_geometries: Vec<ArrayGeometry>,
    pub tx_center: [f64; 3],
    pub rx_centers: Vec<[f64; 3]>,
    pub targets: Vec<[f64; 3]>,
    pub pulses: usize,
    pub samples: usize,
}

impl Scene {
    pub fn num_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn num_receivers(&self) -> usize {
        self.rx_geometries.len()
    }

    /// Direction of target `r` seen from receive array `m`.
    pub fn doa(&self, m: usize, r: usize) -> Result<Direction> {
        Direction::between(self.rx_centers[m], self.targets[r])
    }

    /// Direction from the transmit array to target `r`.
    pub fn dod(&self, r: usize) -> Result<Direction> {
        Direction::between(self.tx_center, self.targets[r])
    }

    /// `doas[m][r]`.
    pub fn doas(&self) -> Result<Vec<Vec<Direction>>> {
        (0..self.num_receivers())
            .map(|m| (0..self.num_targets()).map(|r| self.doa(m, r)).collect())
            .collect()
    }

    pub fn dods(&self) -> Result<Vec<Direction>> {
        (0..self.num_targets()).map(|r| self.dod(r)).collect()
    }
}

fn angle_between(a: &Direction, b: &Direction) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos()
}

/// Draws targets uniformly in the region, redrawing any target that comes
/// closer than the minimum separation to an accepted one at some array.
pub fn random_scene(cfg: &SceneConfig, seed: u64) -> Result<Scene> {
    cfg.region.validate()?;
    if cfg.targets == 0 || cfg.pulses == 0 || cfg.samples == 0 {
        return Err(Error::Config(
            "targets, pulses and samples must be positive".to_string(),
        ));
    }
    if cfg.rx_centers.is_empty() {
        return Err(Error::Config("at least one receive array".to_string()));
    }
    let tx_geometry = cfg.tx.build()?;
    let rx_geometry = cfg.rx.build()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_sep = cfg.min_separation_deg.to_radians();
    let vantage: Vec<[f64; 3]> = std::iter::once(cfg.tx_center)
        .chain(cfg.rx_centers.iter().copied())
        .collect();

    let mut targets: Vec<[f64; 3]> = Vec::with_capacity(cfg.targets);
    let mut seen: Vec<Vec<Direction>> = vec![Vec::new(); vantage.len()];
    const MAX_DRAWS: usize = 100_000;
    for _ in 0..cfg.targets {
        let mut accepted = false;
        for _ in 0..MAX_DRAWS {
            let p = [
                rng.random_range(cfg.region.x.0..=cfg.region.x.1),
                rng.random_range(cfg.region.y.0..=cfg.region.y.1),
                rng.random_range(cfg.region.z.0..=cfg.region.z.1),
            ];
            let dirs: Vec<Direction> = vantage
                .iter()
                .map(|&c| Direction::between(c, p))
                .collect::<Result<_>>()?;
            let clash = dirs.iter().zip(&seen).any(|(d, prev)| {
                prev.iter().any(|q| angle_between(d, q) < min_sep)
            });
            if !clash {
                for (d, prev) in dirs.into_iter().zip(seen.iter_mut()) {
                    prev.push(d);
                }
                targets.push(p);
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(Error::Config(format!(
                "could not place {} separated targets in the region",
                cfg.targets
            )));
        }
    }
    Ok(Scene {
        tx_geometry,
        rx_geometries: vec![rx_geometry; cfg.rx_centers.len()],
        tx_center: cfg.tx_center,
        rx_centers: cfg.rx_centers.clone(),
        targets,
        pulses: cfg.pulses,
        samples: cfg.samples,
    })
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Probing matrix `S` (T × J): real and imaginary parts i.i.d. N(0, 1).
pub fn gen_probing<R: Rng + ?Sized>(samples: usize, tx_elements: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(samples, tx_elements, |_, _| {
        Complex64::new(normal(rng), normal(rng))
    })
}

/// Swerling-II reflection coefficients: one K × R matrix per receive array,
/// circular complex Gaussian entries of unit variance, independent across
/// pulses, targets and arrays.
pub fn gen_rcs<R: Rng + ?Sized>(
    pulses: usize,
    targets: usize,
    receivers: usize,
    rng: &mut R,
) -> Vec<CMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..receivers)
        .map(|_| {
            CMatrix::from_fn(pulses, targets, |_, _| {
                Complex64::new(s * normal(rng), s * normal(rng))
            })
        })
        .collect()
}

/// Stacks the pulse slices `X_k = Σ_r c_{k,r} a_r b_rᵀ` into an
/// `I × T × K` tensor.
pub fn gen_observation(a: &CMatrix, b: &CMatrix, c: &CMatrix) -> Result<ComplexTensor3> {
    let r = a.ncols();
    if b.ncols() != r || c.ncols() != r {
        return Err(Error::ShapeMismatch(format!(
            "observation factors with {}, {}, {} columns",
            r,
            b.ncols(),
            c.ncols()
        )));
    }
    let (ni, nt, nk) = (a.nrows(), b.nrows(), c.nrows());
    let bt = b.transpose();
    let mut out = ComplexTensor3::zeros((ni, nt, nk));
    for k in 0..nk {
        let mut weighted = a.clone();
        for (rr, mut col) in weighted.column_iter_mut().enumerate() {
            col *= c[(k, rr)];
        }
        let slice = weighted * &bt;
        for i in 0..ni {
            for t in 0..nt {
                out.set(i, t, k, slice[(i, t)]);
            }
        }
    }
    Ok(out)
}

/// Simulated data with every ingredient kept for evaluation.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub probing: CMatrix,
    pub tx_steering: CMatrix,
    /// `B = S · [t_1, …, t_R]` (T × R).
    pub b: CMatrix,
    pub a: Vec<CMatrix>,
    pub c: Vec<CMatrix>,
    pub doas: Vec<Vec<Direction>>,
    pub dods: Vec<Direction>,
    pub clean: Vec<ComplexTensor3>,
}

pub fn simulate<R: Rng + ?Sized>(scene: &Scene, rng: &mut R) -> Result<GroundTruth> {
    let dods = scene.dods()?;
    let doas = scene.doas()?;
    let probing = gen_probing(scene.samples, scene.tx_geometry.len(), rng);
    let rcs = gen_rcs(scene.pulses, scene.num_targets(), scene.num_receivers(), rng);
    let tx_steering = steering_matrix(&scene.tx_geometry, &dods);
    let b = &probing * &tx_steering;
    let a: Vec<CMatrix> = scene
        .rx_geometries
        .iter()
        .zip(&doas)
        .map(|(g, d)| steering_matrix(g, d))
        .collect();
    let clean = a
        .iter()
        .zip(&rcs)
        .map(|(am, cm)| gen_observation(am, &b, cm))
        .collect::<Result<Vec<_>>>()?;
    Ok(GroundTruth {
        probing,
        tx_steering,
        b,
        a,
        c: rcs,
        doas,
        dods,
        clean,
    })
}

/// SNR in dB; `+inf` means noiseless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub snr_db: f64,
}

impl NoiseSpec {
    pub fn new(snr_db: f64) -> Result<Self> {
        if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
            return Err(Error::Config(format!("snr {snr_db} dB")));
        }
        Ok(Self { snr_db })
    }

    pub fn noiseless() -> Self {
        Self {
            snr_db: f64::INFINITY,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.snr_db == f64::INFINITY
    }

    pub fn sigma_s(&self) -> f64 {
        1.0
    }

    /// From `SNR = 20 lg(σ_s/σ_n)`.
    pub fn sigma_n(&self) -> f64 {
        if self.is_noiseless() {
            0.0
        } else {
            self.sigma_s() * 10f64.powf(-self.snr_db / 20.0)
        }
    }
}

/// `σ_s · x/‖x‖_F + σ_n · n/‖n‖_F` with `n` circular complex Gaussian.
pub fn add_noise<R: Rng + ?Sized>(
    x: &ComplexTensor3,
    spec: &NoiseSpec,
    rng: &mut R,
) -> Result<ComplexTensor3> {
    let xn = x.frobenius_norm();
    if xn == 0.0 {
        return Err(Error::ZeroInput);
    }
    let signal = x.scale(spec.sigma_s() / xn);
    let sigma_n = spec.sigma_n();
    if sigma_n == 0.0 {
        return Ok(signal);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let noise = ComplexTensor3::from_fn(x.dims(), |_, _, _| {
        Complex64::new(s * normal(rng), s * normal(rng))
    });
    let nn = noise.frobenius_norm();
    signal.add(&noise.scale(sigma_n / nn))
}
