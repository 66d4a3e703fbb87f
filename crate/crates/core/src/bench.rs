//! Monte-Carlo harness: experiment presets, seeded parallel trials, result
//! aggregation and CSV/JSON output.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ccpd::{
    ccpd_als, ccpd_jevd, check_conditions, random_factors, reduce_dimension, AlsOptions,
    JevdOptions, WorkingConditionReport,
};
use crate::error::{Error, Result};
use crate::geometry::{ArrayKind, CoprimeAxisSpec, Direction, GeometrySpec};
use crate::localization::{estimate_doas, mae};
use crate::matching::{match_columns, permute_columns};
use crate::sim::{add_noise, random_scene, simulate, NoiseSpec, Region, SceneConfig, RX_CENTERS, TX_CENTER};
use crate::tensor::{CMatrix, ComplexTensor3, FactorSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "A-1")]
    A1,
    #[serde(rename = "A-2")]
    A2,
    #[serde(rename = "A-3")]
    A3,
    #[serde(rename = "B-1")]
    B1,
    #[serde(rename = "B-2")]
    B2,
    #[serde(rename = "B-3")]
    B3,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::A1,
        Preset::A2,
        Preset::A3,
        Preset::B1,
        Preset::B2,
        Preset::B3,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::A1 => "A-1",
            Preset::A2 => "A-2",
            Preset::A3 => "A-3",
            Preset::B1 => "B-1",
            Preset::B2 => "B-2",
            Preset::B3 => "B-3",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .iter()
            .copied()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown preset {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ccpd-jevd")]
    CcpdJevd,
    #[serde(rename = "ccpd-als-alg")]
    CcpdAlsAlg,
    #[serde(rename = "ccpd-als-rand")]
    CcpdAlsRand,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::CcpdJevd, Method::CcpdAlsAlg, Method::CcpdAlsRand];

    pub fn name(&self) -> &'static str {
        match self {
            Method::CcpdJevd => "ccpd-jevd",
            Method::CcpdAlsAlg => "ccpd-als-alg",
            Method::CcpdAlsRand => "ccpd-als-rand",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

/// Parses `a:b:step` ranges (inclusive), single values, `inf`, and
/// comma-separated mixtures of these.
pub fn parse_snr_grid(s: &str) -> Result<Vec<f64>> {
    let bad = |part: &str| Error::Config(format!("invalid SNR specification {part:?}"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let fields: Vec<&str> = part.split(':').collect();
        match fields.as_slice() {
            [v] => out.push(parse_snr(v).ok_or_else(|| bad(part))?),
            [a, b, step] => {
                let (a, b, step): (f64, f64, f64) = (
                    a.parse().map_err(|_| bad(part))?,
                    b.parse().map_err(|_| bad(part))?,
                    step.parse().map_err(|_| bad(part))?,
                );
                if !(step > 0.0) || !a.is_finite() || !b.is_finite() || b < a {
                    return Err(bad(part));
                }
                let n = ((b - a) / step + 1e-9).floor() as usize;
                out.extend((0..=n).map(|i| a + i as f64 * step));
            }
            _ => return Err(bad(part)),
        }
    }
    if out.is_empty() {
        return Err(Error::Config("empty SNR grid".into()));
    }
    Ok(out)
}

fn parse_snr(s: &str) -> Option<f64> {
    match s.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "noiseless" => Some(f64::INFINITY),
        v => v.parse::<f64>().ok().filter(|x| x.is_finite()),
    }
}

/// Numbers stay numbers; infinity is written as the string `"inf"`.
mod snr_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str("inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => parse_snr(&t).ok_or_else(|| serde::de::Error::custom(format!("bad SNR {t:?}"))),
        }
    }

    pub mod list {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
            use serde::ser::SerializeSeq;
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                if x.is_finite() {
                    seq.serialize_element(x)?;
                } else {
                    seq.serialize_element("inf")?;
                }
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
            Vec::<Repr>::deserialize(d)?
                .into_iter()
                .map(|r| match r {
                    Repr::Num(v) => Ok(v),
                    Repr::Text(t) => parse_snr(&t)
                        .ok_or_else(|| serde::de::Error::custom(format!("bad SNR {t:?}"))),
                })
                .collect()
        }
    }
}

/// Full description of one Monte-Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Preset name or a free-form label for custom runs.
    pub experiment: String,
    pub tx: GeometrySpec,
    pub rx: GeometrySpec,
    /// Pulses per coherent interval.
    pub k: usize,
    /// Targets.
    pub r: usize,
    /// Samples per pulse.
    pub t: usize,
    #[serde(with = "snr_serde::list")]
    pub snr_grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Thread budget; 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
    /// When false every `cpu_seconds` is written as 0, making output
    /// byte-reproducible.
    #[serde(default = "yes")]
    pub timing: bool,
    #[serde(default)]
    pub region: Region,
    #[serde(default = "default_separation")]
    pub min_separation_deg: f64,
    #[serde(default)]
    pub als: AlsOptions,
}

fn yes() -> bool {
    true
}

fn default_separation() -> f64 {
    0.5
}

impl ExperimentConfig {
    pub fn preset(p: Preset) -> Self {
        let l_rx = CoprimeAxisSpec::uniform(4, 7, 4);
        let l_tx = CoprimeAxisSpec::uniform(3, 5, 8);
        let p_rx = CoprimeAxisSpec::uniform(3, 5, 3);
        let p_tx = CoprimeAxisSpec::uniform(4, 7, 4);
        let lshaped = |a| GeometrySpec {
            kind: ArrayKind::LShaped,
            x: a,
            y: a,
        };
        let planar = |a| GeometrySpec {
            kind: ArrayKind::Planar,
            x: a,
            y: a,
        };
        let (tx, rx, k, r, snr) = match p {
            Preset::A1 => (lshaped(l_tx), lshaped(l_rx), 8, 10, (-25.0, 5.0)),
            Preset::A2 => (lshaped(l_tx), lshaped(l_rx), 10, 15, (-20.0, 10.0)),
            Preset::A3 => (lshaped(l_tx), lshaped(l_rx), 25, 25, (-10.0, 20.0)),
            Preset::B1 => (planar(p_tx), planar(p_rx), 5, 20, (-20.0, 10.0)),
            Preset::B2 => (planar(p_tx), planar(p_rx), 15, 30, (-20.0, 10.0)),
            Preset::B3 => (planar(p_tx), planar(p_rx), 45, 45, (-5.0, 25.0)),
        };
        let n = ((snr.1 - snr.0) / 5.0) as usize;
        ExperimentConfig {
            experiment: p.name().to_string(),
            tx,
            rx,
            k,
            r,
            t: 64,
            snr_grid: (0..=n).map(|i| snr.0 + 5.0 * i as f64).collect(),
            trials: 200,
            seed: 0,
            methods: Method::ALL.to_vec(),
            workers: 0,
            timing: true,
            region: Region::default(),
            min_separation_deg: default_separation(),
            als: AlsOptions::default(),
        }
    }

    /// Receive sensors per array.
    pub fn i(&self) -> Result<usize> {
        Ok(self.rx.build()?.len())
    }

    /// Transmit sensors.
    pub fn j(&self) -> Result<usize> {
        Ok(self.tx.build()?.len())
    }

    pub fn scene_config(&self) -> SceneConfig {
        SceneConfig {
            tx: self.tx,
            rx: self.rx,
            tx_center: TX_CENTER,
            rx_centers: RX_CENTERS.to_vec(),
            region: self.region,
            targets: self.r,
            pulses: self.k,
            samples: self.t,
            min_separation_deg: self.min_separation_deg,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.trials == 0 {
            return fail("trials must be at least 1");
        }
        if self.snr_grid.is_empty() {
            return fail("SNR grid is empty");
        }
        if self.snr_grid.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return fail("SNR values must be finite or +inf");
        }
        if self.methods.is_empty() {
            return fail("no methods selected");
        }
        if self.r == 0 || self.k == 0 || self.t == 0 {
            return fail("K, R and T must be positive");
        }
        if !(self.min_separation_deg >= 0.0) {
            return fail("minimum separation must be nonnegative");
        }
        self.tx.build()?;
        self.rx.build()?;
        self.region.validate()?;
        Ok(())
    }

    pub fn conditions(&self) -> Result<WorkingConditionReport> {
        let rx = self.rx.build()?;
        let geoms = vec![rx; RX_CENTERS.len()];
        Ok(check_conditions(&geoms, self.r, self.k, self.t, self.j()?))
    }
}

/// One `(snr, method, trial)` outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub experiment: String,
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
    pub method: Method,
    pub trial: usize,
    pub mae_rad: f64,
    pub cpu_seconds: f64,
    pub converged: bool,
    /// Scenario label and whether the working conditions held.
    pub conditions: String,
    /// Set when the decomposition or localization failed; `mae_rad` is then
    /// the worst case `π/2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<TrialRecord>,
    pub conditions: WorkingConditionReport,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Counter-based stream id: a pure function of the root seed and the labels.
pub fn derive_seed(root: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(root), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

const STREAM_SCENE: u64 = 1;
const STREAM_SIGNAL: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_PENCIL: u64 = 4;
const STREAM_INIT: u64 = 5;

struct Estimate {
    factors: FactorSet,
    /// Second factor in sample space, for column matching.
    b_samples: CMatrix,
    converged: bool,
}

fn decompose(
    method: Method,
    tensors: &[ComplexTensor3],
    cfg: &ExperimentConfig,
    geoms: &[crate::geometry::ArrayGeometry],
    pencil_seed: u64,
    init_seed: u64,
) -> Result<Estimate> {
    let jevd_opts = JevdOptions {
        seed: pencil_seed,
        ..JevdOptions::default()
    };
    match method {
        Method::CcpdJevd => {
            let out = ccpd_jevd(tensors, geoms, cfg.r, &jevd_opts)?;
            Ok(Estimate {
                b_samples: out.reduced.expand_b(&out.factors.b),
                converged: out.refine_trace.as_ref().is_none_or(|t| t.converged),
                factors: out.factors,
            })
        }
        Method::CcpdAlsAlg => {
            let out = ccpd_jevd(tensors, geoms, cfg.r, &jevd_opts)?;
            let als = ccpd_als(&out.reduced.tensors, out.factors, &cfg.als)?;
            Ok(Estimate {
                b_samples: out.reduced.expand_b(&als.factors.b),
                converged: als.converged,
                factors: als.factors,
            })
        }
        Method::CcpdAlsRand => {
            let rd = reduce_dimension(tensors, cfg.r)?;
            let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
            let init = random_factors(&rd.tensors, cfg.r, &mut rng)?;
            let als = ccpd_als(&rd.tensors, init, &cfg.als)?;
            Ok(Estimate {
                b_samples: rd.expand_b(&als.factors.b),
                converged: als.converged,
                factors: als.factors,
            })
        }
    }
}

fn evaluate(
    est: &Estimate,
    truth_b: &CMatrix,
    truth_doas: &[Vec<Direction>],
    geoms: &[crate::geometry::ArrayGeometry],
) -> Result<f64> {
    let perm = match_columns(truth_b, &est.b_samples)?;
    let a: Vec<CMatrix> = est.factors.a.iter().map(|a| permute_columns(a, &perm)).collect();
    let doas = estimate_doas(&a, geoms)?;
    mae(truth_doas, &doas)
}

/// All records for one `(snr, trial)` cell; every method sees the same data.
fn run_cell(
    cfg: &ExperimentConfig,
    conditions: &str,
    snr_index: usize,
    trial: usize,
) -> Result<Vec<TrialRecord>> {
    let snr = cfg.snr_grid[snr_index];
    let (si, tr) = (snr_index as u64, trial as u64);
    // scene and signals depend on the trial only, so SNR points are paired
    let scene = random_scene(&cfg.scene_config(), derive_seed(cfg.seed, &[STREAM_SCENE, tr]))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[STREAM_SIGNAL, tr]));
    let truth = simulate(&scene, &mut rng)?;
    let noise = NoiseSpec::new(snr)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[STREAM_NOISE, si, tr]));
    let tensors = truth
        .clean
        .iter()
        .map(|x| add_noise(x, &noise, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let geoms = &scene.rx_geometries;
    let mut out = Vec::with_capacity(cfg.methods.len());
    for (mi, &method) in cfg.methods.iter().enumerate() {
        let pencil_seed = derive_seed(cfg.seed, &[STREAM_PENCIL, si, tr]);
        let init_seed = derive_seed(cfg.seed, &[STREAM_INIT, si, tr, mi as u64]);
        let start = Instant::now();
        let est = decompose(method, &tensors, cfg, geoms, pencil_seed, init_seed);
        let elapsed = start.elapsed().as_secs_f64();
        let scored = est.and_then(|e| {
            let m = evaluate(&e, &truth.b, &truth.doas, geoms)?;
            Ok((m, e.converged))
        });
        let (mae_rad, converged, failure) = match scored {
            Ok((m, c)) => (m, c, None),
            Err(e) => (std::f64::consts::FRAC_PI_2, false, Some(e.to_string())),
        };
        out.push(TrialRecord {
            experiment: cfg.experiment.clone(),
            snr_db: snr,
            method,
            trial,
            mae_rad,
            cpu_seconds: if cfg.timing { elapsed } else { 0.0 },
            converged,
            conditions: conditions.to_string(),
            failure,
        });
    }
    Ok(out)
}

fn condition_summary(r: &WorkingConditionReport) -> String {
    format!(
        "{}; {}",
        r.scenario.label(),
        if r.satisfied { "conditions hold" } else { "conditions violated" }
    )
}

/// Runs every `(snr, method, trial)` combination on a pool of
/// `cfg.workers` threads. Records are sorted by SNR grid position, method
/// order and trial, so the result does not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let conditions = cfg.conditions()?;
    let summary = condition_summary(&conditions);
    let cells: Vec<(usize, usize)> = (0..cfg.snr_grid.len())
        .flat_map(|s| (0..cfg.trials).map(move |t| (s, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let nested: Vec<Result<Vec<TrialRecord>>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(s, t)| run_cell(cfg, &summary, s, t))
            .collect()
    });
    let mut keyed = Vec::with_capacity(cells.len() * cfg.methods.len());
    for (cell, recs) in cells.iter().zip(nested) {
        for (mi, rec) in recs?.into_iter().enumerate() {
            keyed.push(((cell.0, mi, cell.1), rec));
        }
    }
    keyed.sort_by_key(|(k, _)| *k);
    Ok(RunOutput {
        records: keyed.into_iter().map(|(_, r)| r).collect(),
        conditions,
    })
}

/// Mean outcome of one `(experiment, snr, method)` group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub experiment: String,
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
    pub method: Method,
    pub trials: usize,
    pub mean_mae_rad: f64,
    pub mean_cpu_seconds: f64,
    pub converged_fraction: f64,
}

/// Per-group means, computed in a canonical order so the result does not
/// depend on the order of `records`.
pub fn aggregate(records: &[TrialRecord]) -> Vec<Aggregate> {
    let mut sorted: Vec<&TrialRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        a.experiment
            .cmp(&b.experiment)
            .then(a.snr_db.total_cmp(&b.snr_db))
            .then(a.method.cmp(&b.method))
            .then(a.trial.cmp(&b.trial))
            .then(a.mae_rad.total_cmp(&b.mae_rad))
            .then(a.cpu_seconds.total_cmp(&b.cpu_seconds))
    });
    let mut out: Vec<Aggregate> = Vec::new();
    let mut sums: Vec<(f64, f64, usize)> = Vec::new();
    for r in sorted {
        let same = out.last().is_some_and(|g| {
            g.experiment == r.experiment && g.snr_db.total_cmp(&r.snr_db).is_eq() && g.method == r.method
        });
        if !same {
            out.push(Aggregate {
                experiment: r.experiment.clone(),
                snr_db: r.snr_db,
                method: r.method,
                trials: 0,
                mean_mae_rad: 0.0,
                mean_cpu_seconds: 0.0,
                converged_fraction: 0.0,
            });
            sums.push((0.0, 0.0, 0));
        }
        let g = out.last_mut().expect("group exists");
        let s = sums.last_mut().expect("group exists");
        g.trials += 1;
        s.0 += r.mae_rad;
        s.1 += r.cpu_seconds;
        s.2 += r.converged as usize;
    }
    for (g, s) in out.iter_mut().zip(sums) {
        let n = g.trials as f64;
        g.mean_mae_rad = s.0 / n;
        g.mean_cpu_seconds = s.1 / n;
        g.converged_fraction = s.2 as f64 / n;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// `json` for a `.json` extension, CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Config(format!("unknown format {s:?}"))),
        }
    }
}

pub const CSV_HEADER: [&str; 7] = [
    "experiment",
    "snr_db",
    "method",
    "trial",
    "mae_rad",
    "cpu_seconds",
    "converged",
];

#[derive(Serialize, Deserialize)]
struct CsvRow {
    experiment: String,
    #[serde(with = "snr_serde")]
    snr_db: f64,
    method: Method,
    trial: usize,
    mae_rad: f64,
    cpu_seconds: f64,
    converged: bool,
}

pub fn write_csv<W: Write>(records: &[TrialRecord], w: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(CSV_HEADER)?;
    for r in records {
        wtr.serialize(CsvRow {
            experiment: r.experiment.clone(),
            snr_db: r.snr_db,
            method: r.method,
            trial: r.trial,
            mae_rad: r.mae_rad,
            cpu_seconds: r.cpu_seconds,
            converged: r.converged,
        })?;
    }
    wtr.flush()?;
    Ok(())
}

/// Parses CSV written by [`write_csv`]. Columns absent from the CSV come
/// back empty.
pub fn read_csv<R: Read>(r: R) -> Result<Vec<TrialRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Io(format!("unexpected CSV header {header:?}")));
    }
    rdr.deserialize::<CsvRow>()
        .map(|row| {
            let row = row?;
            Ok(TrialRecord {
                experiment: row.experiment,
                snr_db: row.snr_db,
                method: row.method,
                trial: row.trial,
                mae_rad: row.mae_rad,
                cpu_seconds: row.cpu_seconds,
                converged: row.converged,
                conditions: String::new(),
                failure: None,
            })
        })
        .collect()
}

pub fn write_json<W: Write>(records: &[TrialRecord], mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, records)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<R: Read>(r: R) -> Result<Vec<TrialRecord>> {
    Ok(serde_json::from_reader(r)?)
}

/// Writes `records` to `path` in the requested format.
pub fn emit(records: &[TrialRecord], path: &Path, format: Format) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    match format {
        Format::Csv => write_csv(records, file),
        Format::Json => write_json(records, file),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(snr: f64, method: Method, trial: usize, mae: f64) -> TrialRecord {
        TrialRecord {
            experiment: "A-1".into(),
            snr_db: snr,
            method,
            trial,
            mae_rad: mae,
            cpu_seconds: 0.5,
            converged: true,
            conditions: "overdetermined; conditions hold".into(),
            failure: None,
        }
    }

    #[test]
    fn presets_match_table() {
        let want = [
            (Preset::A1, 13, 27, 8, 10),
            (Preset::A2, 13, 27, 10, 15),
            (Preset::A3, 13, 27, 25, 25),
            (Preset::B1, 25, 49, 5, 20),
            (Preset::B2, 25, 49, 15, 30),
            (Preset::B3, 25, 49, 45, 45),
        ];
        for (p, i, j, k, r) in want {
            let c = ExperimentConfig::preset(p);
            assert_eq!((c.i().unwrap(), c.j().unwrap(), c.k, c.r, c.t), (i, j, k, r, 64));
            assert_eq!(c.trials, 200);
            assert!(c.conditions().unwrap().satisfied);
        }
        assert_eq!(ExperimentConfig::preset(Preset::A1).snr_grid, vec![-25.0, -20.0, -15.0, -10.0, -5.0, 0.0, 5.0]);
        assert_eq!(ExperimentConfig::preset(Preset::B3).snr_grid.first(), Some(&-5.0));
        assert_eq!(ExperimentConfig::preset(Preset::B3).snr_grid.last(), Some(&25.0));
    }

    #[test]
    fn snr_grid_parsing() {
        assert_eq!(parse_snr_grid("-25:5:5").unwrap(), vec![-25.0, -20.0, -15.0, -10.0, -5.0, 0.0, 5.0]);
        assert_eq!(parse_snr_grid("inf").unwrap(), vec![f64::INFINITY]);
        assert_eq!(parse_snr_grid("-5, 5,15,inf").unwrap(), vec![-5.0, 5.0, 15.0, f64::INFINITY]);
        assert_eq!(parse_snr_grid("0:1:0.5").unwrap(), vec![0.0, 0.5, 1.0]);
        for bad in ["", "a", "5:0:1", "0:5:0", "1:2", "nan"] {
            assert!(parse_snr_grid(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("C-1".parse::<Preset>().is_err());
    }

    #[test]
    fn seeds_depend_on_every_label() {
        let a = derive_seed(42, &[1, 2, 3]);
        assert_eq!(a, derive_seed(42, &[1, 2, 3]));
        assert_ne!(a, derive_seed(43, &[1, 2, 3]));
        assert_ne!(a, derive_seed(42, &[1, 3, 2]));
        assert_ne!(a, derive_seed(42, &[1, 2, 4]));
    }

    #[test]
    fn aggregate_means_and_order_independence() {
        let one = vec![record(0.0, Method::CcpdJevd, 0, 0.1)];
        let agg = aggregate(&one);
        assert_eq!(agg.len(), 1);
        assert_eq!((agg[0].mean_mae_rad, agg[0].mean_cpu_seconds, agg[0].trials), (0.1, 0.5, 1));
        let two = vec![record(0.0, Method::CcpdJevd, 0, 0.1), record(0.0, Method::CcpdJevd, 1, 0.3)];
        assert!((aggregate(&two)[0].mean_mae_rad - 0.2).abs() < 1e-15);
        let mut many: Vec<TrialRecord> = (0..30)
            .map(|i| record((i % 3) as f64, Method::ALL[i % 2], i, (i as f64).sin().abs()))
            .collect();
        let forward = aggregate(&many);
        many.reverse();
        many.swap(3, 17);
        assert_eq!(aggregate(&many), forward);
    }

    #[test]
    fn csv_output_format() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "experiment,snr_db,method,trial,mae_rad,cpu_seconds,converged\n");
        let recs = vec![record(-5.0, Method::CcpdAlsAlg, 3, 0.0123), record(f64::INFINITY, Method::CcpdJevd, 0, 1e-9)];
        let mut buf = Vec::new();
        write_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(!text.contains('\r'));
        assert!(text.contains("A-1,-5.0,ccpd-als-alg,3,0.0123,0.5,true\n"), "{text}");
        assert!(text.contains(",inf,ccpd-jevd,"));
        let back = read_csv(&buf[..]).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in back.iter().zip(&recs) {
            assert_eq!((a.snr_db, a.method, a.trial, a.mae_rad, a.converged), (b.snr_db, b.method, b.trial, b.mae_rad, b.converged));
        }
    }

    #[test]
    fn json_round_trip() {
        let recs = vec![record(f64::INFINITY, Method::CcpdAlsRand, 7, 0.25)];
        let mut buf = Vec::new();
        write_json(&recs, &mut buf).unwrap();
        assert_eq!(read_json(&buf[..]).unwrap(), recs);
    }

    #[test]
    fn config_serializes_with_infinite_snr() {
        let mut c = ExperimentConfig::preset(Preset::A1);
        c.snr_grid = vec![0.0, f64::INFINITY];
        let s = serde_json::to_string(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = ExperimentConfig::preset(Preset::A1);
        let mut c = base.clone();
        c.trials = 0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.methods.clear();
        assert!(c.validate().is_err());
        let mut c = base;
        c.rx.x.n_step = 8;
        assert!(c.validate().is_err());
    }
}
