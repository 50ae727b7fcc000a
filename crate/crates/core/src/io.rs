//! On-disk products: CSV logs and traces, JSON beamformer batches and
//! manifests, and the text beampattern grid.
//!
//! Every writer has a matching reader. Floats are printed in shortest
//! round-trip form, so a write followed by a read is lossless.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::env::TraceRecord;
use crate::harness::{AzimuthCut, BaselineRow, BeamGrid};
use crate::hbf::{DecompositionResult, StopReason};
use crate::ppo::TrainReport;
use crate::signal_metrics::{DigitalBeamformers, HybridBeamformers};
use crate::{CMatrix, CVector, Error, Result, ScenarioConfig, C64};

pub const DIGITAL_BATCH_FORMAT: &str = "isac-digital-beams v1";
pub const HYBRID_BATCH_FORMAT: &str = "isac-hybrid-beams v1";
pub const BEAMPATTERN_HEADER: &str = "# isac-beampattern v1";
pub const MANIFEST_FORMAT: &str = "isac-manifest v1";

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_csv<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?)
}

/// Training log row; one per finished episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLogRow {
    pub episode: usize,
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub communication: f64,
    pub sensing: f64,
    pub qos: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
}

pub fn training_log_rows(report: &TrainReport) -> Vec<TrainingLogRow> {
    (0..report.n_episodes())
        .map(|k| TrainingLogRow {
            episode: k,
            episode_return: report.episode_returns[k],
            communication: report.episode_components[k].communication,
            sensing: report.episode_components[k].sensing,
            qos: report.episode_components[k].qos,
            actor_loss: report.actor_losses[k],
            critic_loss: report.critic_losses[k],
        })
        .collect()
}

/// Header: `episode,return,communication,sensing,qos,actor_loss,critic_loss`.
pub fn write_training_log(path: impl AsRef<Path>, report: &TrainReport) -> Result<()> {
    let rows = training_log_rows(report);
    if rows.is_empty() {
        // csv only emits the header together with the first record
        std::fs::write(path, "episode,return,communication,sensing,qos,actor_loss,critic_loss\n")?;
        return Ok(());
    }
    write_csv(path, &rows)
}

pub fn read_training_log(path: impl AsRef<Path>) -> Result<Vec<TrainingLogRow>> {
    read_csv(path)
}

/// Episode trace row; one per UAV per slot. Slot-level quantities repeat
/// across the UAV rows of a slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub slot: usize,
    pub uav: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub secrecy_rate: f64,
    pub reward: f64,
    pub communication: f64,
    pub sensing: f64,
    pub qos: f64,
}

pub fn trace_rows(records: &[TraceRecord]) -> Vec<TraceRow> {
    records
        .iter()
        .flat_map(|r| {
            r.positions.iter().zip(&r.secrecy_rates).enumerate().map(move |(uav, (p, s))| TraceRow {
                slot: r.slot,
                uav,
                x: p[0],
                y: p[1],
                z: p[2],
                secrecy_rate: *s,
                reward: r.reward,
                communication: r.components.communication,
                sensing: r.components.sensing,
                qos: r.components.qos,
            })
        })
        .collect()
}

/// Header: `slot,uav,x,y,z,secrecy_rate,reward,communication,sensing,qos`.
pub fn write_episode_trace(path: impl AsRef<Path>, records: &[TraceRecord]) -> Result<()> {
    write_csv(path, &trace_rows(records))
}

pub fn read_episode_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRow>> {
    read_csv(path)
}

/// Complex matrix stored column-major as separate real and imaginary arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexMatrixRecord {
    pub fn from_matrix(m: &CMatrix) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            re: m.iter().map(|z| z.re).collect(),
            im: m.iter().map(|z| z.im).collect(),
        }
    }

    pub fn from_vector(v: &CVector) -> Self {
        Self { rows: v.len(), cols: 1, re: v.iter().map(|z| z.re).collect(), im: v.iter().map(|z| z.im).collect() }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let n = self.rows * self.cols;
        if self.re.len() != n || self.im.len() != n {
            return Err(Error::Format(format!(
                "{}x{} matrix with {} real and {} imaginary entries",
                self.rows,
                self.cols,
                self.re.len(),
                self.im.len()
            )));
        }
        Ok(CMatrix::from_iterator(self.rows, self.cols, self.re.iter().zip(&self.im).map(|(r, i)| C64::new(*r, *i))))
    }

    pub fn to_vector(&self) -> Result<CVector> {
        if self.cols != 1 {
            return Err(Error::Format(format!("expected a column vector, got {} columns", self.cols)));
        }
        Ok(self.to_matrix()?.column(0).into_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigitalSlot {
    pub slot: usize,
    pub precoders: ComplexMatrixRecord,
    pub an_vector: ComplexMatrixRecord,
}

/// Per-slot fully-digital beamformers, the input of batch decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigitalBatch {
    pub format: String,
    pub slots: Vec<DigitalSlot>,
}

impl DigitalBatch {
    pub fn new(beams: &[(usize, DigitalBeamformers)]) -> Self {
        Self {
            format: DIGITAL_BATCH_FORMAT.into(),
            slots: beams
                .iter()
                .map(|(slot, b)| DigitalSlot {
                    slot: *slot,
                    precoders: ComplexMatrixRecord::from_matrix(&b.precoders),
                    an_vector: ComplexMatrixRecord::from_vector(&b.an_vector),
                })
                .collect(),
        }
    }

    pub fn beams(&self) -> Result<Vec<(usize, DigitalBeamformers)>> {
        if self.format != DIGITAL_BATCH_FORMAT {
            return Err(Error::Format(format!("expected `{DIGITAL_BATCH_FORMAT}`, found `{}`", self.format)));
        }
        self.slots
            .iter()
            .map(|s| Ok((s.slot, DigitalBeamformers::new(s.precoders.to_matrix()?, s.an_vector.to_vector()?)?)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridSlot {
    pub slot: usize,
    pub analog: ComplexMatrixRecord,
    pub digital: ComplexMatrixRecord,
    pub an_digital: ComplexMatrixRecord,
    pub residual_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
}

impl HybridSlot {
    pub fn new(slot: usize, res: &DecompositionResult) -> Self {
        Self {
            slot,
            analog: ComplexMatrixRecord::from_matrix(&res.hybrid.analog),
            digital: ComplexMatrixRecord::from_matrix(&res.hybrid.digital),
            an_digital: ComplexMatrixRecord::from_vector(&res.hybrid.an_digital),
            residual_trace: res.residual_trace.clone(),
            iterations: res.iterations,
            converged: res.converged,
            stop_reason: res.stop_reason,
        }
    }

    pub fn hybrid(&self) -> Result<HybridBeamformers> {
        Ok(HybridBeamformers {
            analog: self.analog.to_matrix()?,
            digital: self.digital.to_matrix()?,
            an_digital: self.an_digital.to_vector()?,
        })
    }
}

/// Decomposition output for a digital batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridBatch {
    pub format: String,
    pub n_rf_chains: usize,
    pub slots: Vec<HybridSlot>,
}

impl HybridBatch {
    pub fn new(n_rf_chains: usize, slots: Vec<HybridSlot>) -> Self {
        Self { format: HYBRID_BATCH_FORMAT.into(), n_rf_chains, slots }
    }
}

/// Grid file layout:
///
/// ```text
/// # isac-beampattern v1
/// # slot=<index>
/// # scheme=<name>
/// elevation_deg\azimuth_deg,<az_0>,<az_1>,...
/// <el_0>,<P(el_0, az_0)>,<P(el_0, az_1)>,...
/// ```
pub fn write_beampattern_grid(path: impl AsRef<Path>, grid: &BeamGrid) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{BEAMPATTERN_HEADER}")?;
    writeln!(w, "# slot={}", grid.slot)?;
    writeln!(w, "# scheme={}", grid.scheme)?;
    write!(w, "elevation_deg\\azimuth_deg")?;
    for az in &grid.azimuths_deg {
        write!(w, ",{az}")?;
    }
    writeln!(w)?;
    for (el, row) in grid.elevations_deg.iter().zip(&grid.values) {
        write!(w, "{el}")?;
        for v in row {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_floats<'a>(fields: impl Iterator<Item = &'a str>, line_no: usize) -> Result<Vec<f64>> {
    fields
        .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Format(format!("line {line_no}: `{f}`: {e}"))))
        .collect()
}

pub fn read_beampattern_grid(path: impl AsRef<Path>) -> Result<BeamGrid> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, l)) => Ok((i + 1, l?)),
            None => Err(Error::Format(format!("missing {what}"))),
        }
    };
    let (_, header) = next("header")?;
    if header.trim() != BEAMPATTERN_HEADER {
        return Err(Error::Format(format!("line 1: expected `{BEAMPATTERN_HEADER}`")));
    }
    let (n, slot_line) = next("slot line")?;
    let slot = slot_line
        .strip_prefix("# slot=")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Format(format!("line {n}: expected `# slot=<index>`")))?;
    let (n, scheme_line) = next("scheme line")?;
    let scheme = scheme_line
        .strip_prefix("# scheme=")
        .ok_or_else(|| Error::Format(format!("line {n}: expected `# scheme=<name>`")))?
        .to_string();
    let (n, axis) = next("azimuth axis")?;
    let mut fields = axis.split(',');
    fields.next();
    let azimuths_deg = parse_floats(fields, n)?;

    let mut elevations_deg = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_floats(line.split(','), i + 1)?;
        if row.len() != azimuths_deg.len() + 1 {
            return Err(Error::Format(format!(
                "line {}: {} values for {} azimuths",
                i + 1,
                row.len() - 1,
                azimuths_deg.len()
            )));
        }
        elevations_deg.push(row[0]);
        values.push(row[1..].to_vec());
    }
    Ok(BeamGrid { slot, scheme, azimuths_deg, elevations_deg, values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutRow {
    pub uav: usize,
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    pub power: f64,
}

/// Header: `uav,elevation_deg,azimuth_deg,power`.
pub fn write_azimuth_cuts(path: impl AsRef<Path>, cuts: &[AzimuthCut]) -> Result<()> {
    let rows: Vec<CutRow> = cuts
        .iter()
        .flat_map(|c| {
            c.azimuths_deg.iter().zip(&c.values).map(move |(az, p)| CutRow {
                uav: c.uav,
                elevation_deg: c.elevation_deg,
                azimuth_deg: *az,
                power: *p,
            })
        })
        .collect();
    write_csv(path, &rows)
}

pub fn read_azimuth_cuts(path: impl AsRef<Path>) -> Result<Vec<AzimuthCut>> {
    let rows: Vec<CutRow> = read_csv(path)?;
    let mut cuts: Vec<AzimuthCut> = Vec::new();
    for r in rows {
        match cuts.last_mut() {
            Some(c) if c.uav == r.uav => {
                c.azimuths_deg.push(r.azimuth_deg);
                c.values.push(r.power);
            }
            _ => cuts.push(AzimuthCut {
                uav: r.uav,
                elevation_deg: r.elevation_deg,
                azimuths_deg: vec![r.azimuth_deg],
                values: vec![r.power],
            }),
        }
    }
    Ok(cuts)
}

/// Header: `scheme,uav_0,...,uav_{L-1},total,sensing_violation_rate,qos_violation_rate`.
pub fn write_baseline_table(path: impl AsRef<Path>, rows: &[BaselineRow]) -> Result<()> {
    let l = rows.first().map_or(0, |r| r.per_uav_secrecy.len());
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["scheme".to_string()];
    header.extend((0..l).map(|u| format!("uav_{u}")));
    header.extend(["total", "sensing_violation_rate", "qos_violation_rate"].map(String::from));
    w.write_record(&header)?;
    for r in rows {
        if r.per_uav_secrecy.len() != l {
            return Err(Error::Dimension(format!("row `{}` has {} UAV columns, expected {l}", r.scheme, r.per_uav_secrecy.len())));
        }
        let mut rec = vec![r.scheme.clone()];
        rec.extend(r.per_uav_secrecy.iter().map(|v| v.to_string()));
        rec.extend([r.total_secrecy, r.sensing_violation_rate, r.qos_violation_rate].map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_baseline_table(path: impl AsRef<Path>) -> Result<Vec<BaselineRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let width = r.headers()?.len();
    if width < 4 {
        return Err(Error::Format(format!("baseline table has {width} columns")));
    }
    let l = width - 4;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let vals = parse_floats(rec.iter().skip(1), i + 2)?;
        rows.push(BaselineRow {
            scheme: rec[0].to_string(),
            per_uav_secrecy: vals[..l].to_vec(),
            total_secrecy: vals[l],
            sensing_violation_rate: vals[l + 1],
            qos_violation_rate: vals[l + 2],
        });
    }
    Ok(rows)
}

/// Which optional products a run exported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ExportToggles {
    /// Azimuth x elevation resolution of exported beampattern grids.
    pub beampattern_grid: Option<[usize; 2]>,
    pub trajectory: bool,
    pub learning_curves: bool,
}

/// Record of one CLI run: what was asked, with which fully resolved
/// configuration, and which files came out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub format: String,
    pub tool_version: String,
    pub command: String,
    pub argv: Vec<String>,
    pub scenario_path: Option<String>,
    pub seeds: Vec<u64>,
    pub output_dir: String,
    pub exports: ExportToggles,
    pub scenario: Option<ScenarioConfig>,
    /// Paths relative to `output_dir`.
    pub products: Vec<String>,
}

impl ExperimentManifest {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Invalid("manifest lists no seeds".into()));
        }
        if self.format != MANIFEST_FORMAT {
            return Err(Error::Format(format!("expected `{MANIFEST_FORMAT}`, found `{}`", self.format)));
        }
        Ok(())
    }
}

pub fn write_manifest(path: impl AsRef<Path>, manifest: &ExperimentManifest) -> Result<()> {
    manifest.validate()?;
    write_json(path, manifest)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<ExperimentManifest> {
    let m: ExperimentManifest = read_json(path)?;
    m.validate()?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_normal;
    use crate::env::RewardComponents;
    use crate::harness::{beampattern_grid, GridSpec};
    use crate::hbf::{decompose, DecomposeOptions};
    use crate::ppo::Algorithm;
    use crate::scenario::tiny_scenario;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_beams(rng: &mut ChaCha8Rng, nt: usize, l: usize) -> DigitalBeamformers {
        DigitalBeamformers {
            precoders: CMatrix::from_fn(nt, l, |_, _| complex_normal(rng)),
            an_vector: CVector::from_fn(nt, |_, _| complex_normal(rng)),
        }
    }

    #[test]
    fn training_log_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let report = TrainReport {
            seed: 3,
            algorithm: Algorithm::Ppo,
            episode_returns: vec![-1.5, 0.1 + 0.2],
            episode_components: vec![
                RewardComponents { communication: 1.0, sensing: -2.0, qos: -0.5 },
                RewardComponents { communication: 0.3, sensing: 0.0, qos: 0.0 },
            ],
            actor_losses: vec![0.25, 1e-300],
            critic_losses: vec![3.0, 4.0],
            best_mean_return: None,
            wall_clock_seconds: 0.0,
            evaluation: None,
        };
        let p = dir.path().join("log.csv");
        write_training_log(&p, &report).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("episode,return,communication,sensing,qos,actor_loss,critic_loss\n"));
        assert_eq!(read_training_log(&p).unwrap(), training_log_rows(&report));

        let empty = TrainReport { episode_returns: vec![], episode_components: vec![], actor_losses: vec![], critic_losses: vec![], ..report };
        write_training_log(&p, &empty).unwrap();
        assert!(read_training_log(&p).unwrap().is_empty());
    }

    #[test]
    fn trace_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![
            TraceRecord {
                slot: 0,
                positions: vec![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]],
                reward: 0.5,
                components: RewardComponents { communication: 1.0, sensing: -0.25, qos: -0.25 },
                secrecy_rates: vec![0.7, 0.3],
            },
            TraceRecord {
                slot: 1,
                positions: vec![[1.5, 2.0, 3.0], [4.0, 5.5, 6.0]],
                reward: 1.0 / 3.0,
                components: RewardComponents::default(),
                secrecy_rates: vec![0.0, 1.0 / 3.0],
            },
        ];
        let p = dir.path().join("trace.csv");
        write_episode_trace(&p, &recs).unwrap();
        let back = read_episode_trace(&p).unwrap();
        assert_eq!(back.len(), 4);
        assert_eq!(back, trace_rows(&recs));
        assert!(std::fs::read_to_string(&p).unwrap().starts_with("slot,uav,x,y,z,secrecy_rate,reward,communication,sensing,qos\n"));
    }

    #[test]
    fn beam_batches_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let beams: Vec<_> = (0..3).map(|k| (k * 10, random_beams(&mut rng, 16, 3))).collect();
        let p = dir.path().join("digital.json");
        write_json(&p, &DigitalBatch::new(&beams)).unwrap();
        let back: DigitalBatch = read_json(&p).unwrap();
        assert_eq!(back.beams().unwrap(), beams);

        let res = decompose(&beams[0].1.precoders, &beams[0].1.an_vector, 4, 2.0, &DecomposeOptions::default(), &mut rng).unwrap();
        let batch = HybridBatch::new(4, vec![HybridSlot::new(0, &res)]);
        let hp = dir.path().join("hybrid.json");
        write_json(&hp, &batch).unwrap();
        let hback: HybridBatch = read_json(&hp).unwrap();
        assert_eq!(hback, batch);
        assert_eq!(hback.slots[0].hybrid().unwrap(), res.hybrid);

        let wrong = DigitalBatch { format: "other".into(), ..back };
        assert!(wrong.beams().is_err());
    }

    #[test]
    fn grid_and_cuts_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_scenario();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rx = crate::signal_metrics::covariance(&random_beams(&mut rng, 4, 1));
        let spec = GridSpec { azimuth_points: 7, elevation_points: 4, ..GridSpec::default() };
        let grid = beampattern_grid(&rx, &cfg, &spec, 40, "digital").unwrap();
        let p = dir.path().join("grid.csv");
        write_beampattern_grid(&p, &grid).unwrap();
        assert_eq!(read_beampattern_grid(&p).unwrap(), grid);

        let ch = crate::channel::realize_channels(&cfg, &cfg.legit_init_positions, &mut rng).unwrap();
        let cuts = crate::harness::azimuth_cuts(&rx, &ch, &cfg, &spec).unwrap();
        let cp = dir.path().join("cuts.csv");
        write_azimuth_cuts(&cp, &cuts).unwrap();
        assert_eq!(read_azimuth_cuts(&cp).unwrap(), cuts);

        std::fs::write(&p, "not a grid\n").unwrap();
        assert!(matches!(read_beampattern_grid(&p), Err(Error::Format(_))));
    }

    #[test]
    fn baseline_table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            BaselineRow { scheme: "ppo".into(), per_uav_secrecy: vec![1.0, 2.5], total_secrecy: 3.5, sensing_violation_rate: 0.1, qos_violation_rate: 0.0 },
            BaselineRow { scheme: "random".into(), per_uav_secrecy: vec![0.0, 0.1], total_secrecy: 0.1, sensing_violation_rate: 1.0, qos_violation_rate: 0.5 },
        ];
        let p = dir.path().join("table.csv");
        write_baseline_table(&p, &rows).unwrap();
        assert!(std::fs::read_to_string(&p).unwrap().starts_with("scheme,uav_0,uav_1,total,"));
        assert_eq!(read_baseline_table(&p).unwrap(), rows);
    }

    #[test]
    fn manifest_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let m = ExperimentManifest {
            format: MANIFEST_FORMAT.into(),
            tool_version: "0.1.0".into(),
            command: "train".into(),
            argv: vec!["train".into(), "--seeds".into(), "0..1".into()],
            scenario_path: Some("scenarios/tiny.toml".into()),
            seeds: vec![0, 1],
            output_dir: dir.path().display().to_string(),
            exports: ExportToggles { beampattern_grid: Some([181, 91]), trajectory: true, learning_curves: true },
            scenario: Some(tiny_scenario()),
            products: vec!["seed-0/train_log.csv".into()],
        };
        let p = dir.path().join("manifest.json");
        write_manifest(&p, &m).unwrap();
        assert_eq!(read_manifest(&p).unwrap(), m);
        assert!(write_manifest(&p, &ExperimentManifest { seeds: vec![], ..m }).is_err());
    }
}
