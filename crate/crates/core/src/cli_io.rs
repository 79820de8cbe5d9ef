//! File formats, run manifests and the commands behind the `geomed` binary.
//!
//! Every command writes one JSON document `{manifest, result}` plus optional
//! CSV side files into an output directory. The manifest echoes the full
//! command, so [`replay`] can rerun it and reproduce the same bytes.
//! Wall-clock timings go to a separate `timing.json`.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::affine::{select_alpha, tr_median, tr_posterior_sample, AlphaSubset};
use crate::bootstrap::{posterior_sample, PosteriorDraws};
use crate::data::{DataMatrix, WeightVector};
use crate::error::{Error, Result};
use crate::lp_core::{Direction, NormSpec};
use crate::regions::{
    ellipse_polyline, ellipsoid, hyperrectangle, principal_axes, CredibleRegion, Ellipsoid, PrincipalAxes,
};
use crate::rng::RngSeed;
use crate::simstudy::{run_table, Method, RegionKind, SimConfig, SimTable};
use crate::solver::{geometric_quantile, weighted_median, SolveReport, SolverOptions};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const POLYLINE_POINTS: usize = 128;

/// Reference principal axes, one per row, of a 95% credible ellipsoid for
/// the Setosa spatial median.
pub const IRIS_REFERENCE_AXES: [[f64; 4]; 4] = [
    [0.0580, -0.1461, -0.2965, 0.9420],
    [-0.3129, 0.2193, 0.8626, 0.3252],
    [-0.6747, -0.6143, 0.4089, -0.0081],
    [-0.6629, -0.7437, -0.0252, -0.0824],
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowFilter {
    pub column: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub path: PathBuf,
    pub delimiter: char,
    pub has_header: bool,
    /// Header names or 0-based indices; all columns when absent.
    pub columns: Option<Vec<String>>,
    pub filter: Option<RowFilter>,
}

impl InputSpec {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            delimiter: ',',
            has_header: true,
            columns: None,
            filter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub data: DataMatrix,
    pub column_names: Vec<String>,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub path: PathBuf,
    pub sha256: String,
    pub rows: usize,
    pub columns: Vec<String>,
}

impl Dataset {
    fn summary(&self, spec: &InputSpec) -> InputSummary {
        InputSummary {
            path: spec.path.clone(),
            sha256: self.sha256.clone(),
            rows: self.data.n(),
            columns: self.column_names.clone(),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn resolve_column(token: &str, header: Option<&csv::StringRecord>, width: usize, path: &Path) -> Result<usize> {
    if let Some(h) = header {
        if let Some(i) = h.iter().position(|name| name.trim() == token) {
            return Ok(i);
        }
    }
    match token.parse::<usize>() {
        Ok(i) if i < width => Ok(i),
        _ => Err(Error::Parse {
            path: path.to_path_buf(),
            row: 0,
            column: token.to_string(),
            message: "unknown column".into(),
        }),
    }
}

/// Reads the selected numeric columns of a delimited file. Rows failing the
/// optional filter are skipped; any other non-numeric cell is an error that
/// names its 1-based line and its column.
pub fn ingest_csv(spec: &InputSpec) -> Result<Dataset> {
    let path = spec.path.as_path();
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if !spec.delimiter.is_ascii() {
        return Err(Error::InvalidInput("delimiter must be a single ASCII character".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(spec.delimiter as u8)
        .has_headers(spec.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let header = if spec.has_header {
        Some(reader.headers().map_err(|e| csv_err(path, e))?.clone())
    } else {
        None
    };
    let mut records = Vec::new();
    for r in reader.records() {
        records.push(r.map_err(|e| csv_err(path, e))?);
    }
    let width = header
        .as_ref()
        .map(|h| h.len())
        .or_else(|| records.first().map(|r| r.len()))
        .unwrap_or(0);
    let selected: Vec<usize> = match &spec.columns {
        Some(cols) => cols
            .iter()
            .map(|c| resolve_column(c, header.as_ref(), width, path))
            .collect::<Result<_>>()?,
        None => (0..width).collect(),
    };
    if selected.is_empty() {
        return Err(Error::InvalidInput("no columns selected".into()));
    }
    let filter = match &spec.filter {
        Some(f) => Some((resolve_column(&f.column, header.as_ref(), width, path)?, f.value.as_str())),
        None => None,
    };
    let column_names = selected
        .iter()
        .map(|&j| match &header {
            Some(h) => h.get(j).unwrap_or_default().to_string(),
            None => j.to_string(),
        })
        .collect();
    let first_line = if spec.has_header { 2 } else { 1 };
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, rec) in records.iter().enumerate() {
        let line = i + first_line;
        if rec.len() != width {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: line,
                column: String::new(),
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        if let Some((col, want)) = filter {
            if rec.get(col) != Some(want) {
                continue;
            }
        }
        for &j in &selected {
            let cell = rec.get(j).unwrap_or_default();
            let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                row: line,
                column: match &header {
                    Some(h) => h.get(j).unwrap_or_default().to_string(),
                    None => j.to_string(),
                },
                message: format!("non-numeric value {cell:?}"),
            })?;
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::InvalidInput(format!("{} has no data rows after selection", path.display())));
    }
    Ok(Dataset {
        data: DataMatrix::new(rows, selected.len(), values)?,
        column_names,
        sha256: sha256_hex(&bytes),
    })
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        path: path.to_path_buf(),
        row,
        column: String::new(),
        message: e.to_string(),
    }
}

/// Comma-separated rows with 17 significant digits, so reading the file back
/// recovers every value exactly.
pub fn csv_string(data: &DataMatrix, header: Option<&[String]>) -> String {
    let mut s = String::new();
    if let Some(h) = header {
        s.push_str(&h.join(","));
        s.push('\n');
    }
    for r in data.rows() {
        let cells: Vec<String> = r.iter().map(|v| format!("{v:.16e}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn write_csv(path: &Path, data: &DataMatrix, header: Option<&[String]>) -> Result<()> {
    write_atomic(path, csv_string(data, header).as_bytes())
}

/// Writes to a temporary file in the target directory and renames it into
/// place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Command {
    Median {
        input: InputSpec,
        p: f64,
    },
    Quantile {
        input: InputSpec,
        p: f64,
        u: Vec<Vec<f64>>,
    },
    Credible {
        input: InputSpec,
        p: f64,
        /// Quantile directions; the median when empty.
        u: Vec<Vec<f64>>,
        draws: usize,
        level: f64,
        region: RegionKind,
        method: Method,
        candidates: usize,
        seed: u64,
    },
    Trmedian {
        input: InputSpec,
        p: f64,
        candidates: usize,
        seed: u64,
    },
    Simulate {
        preset: Option<String>,
        cells: Vec<SimConfig>,
    },
    Iris {
        input: InputSpec,
        species_column: String,
        features: Vec<String>,
        p: f64,
        draws: usize,
        level: f64,
        seed: u64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Median { .. } => "median",
            Command::Quantile { .. } => "quantile",
            Command::Credible { .. } => "credible",
            Command::Trmedian { .. } => "trmedian",
            Command::Simulate { .. } => "simulate",
            Command::Iris { .. } => "iris",
        }
    }

    fn seed(&self) -> Option<u64> {
        match self {
            Command::Credible { seed, .. } | Command::Trmedian { seed, .. } | Command::Iris { seed, .. } => Some(*seed),
            Command::Simulate { cells, .. } => cells.first().map(|c| c.seed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Command,
    pub seed: Option<u64>,
    pub version: String,
    pub input: Option<InputSummary>,
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    manifest: &'a RunManifest,
    result: &'a T,
}

#[derive(Serialize)]
struct Timing<'a> {
    command: &'a str,
    started_unix: f64,
    finished_unix: f64,
    wall_clock_seconds: f64,
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn write_document<T: Serialize>(path: &Path, manifest: &RunManifest, result: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(&Document { manifest, result })?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantileEstimate {
    pub u: Vec<f64>,
    pub report: SolveReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectionRegion {
    pub u: Vec<f64>,
    pub estimate: Vec<f64>,
    pub region: CredibleRegion,
    pub axes: Option<PrincipalAxes>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CredibleResult {
    pub p: f64,
    pub level: f64,
    pub draws: usize,
    pub dropped: usize,
    pub alpha: Option<AlphaSubset>,
    pub regions: Vec<DirectionRegion>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrMedianResult {
    pub alpha: AlphaSubset,
    pub estimate: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairEllipse {
    pub features: [String; 2],
    pub ellipsoid: Ellipsoid,
    pub polyline: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpeciesResult {
    pub species: String,
    pub n: usize,
    pub median: Vec<f64>,
    pub ellipsoid: Ellipsoid,
    pub axes: PrincipalAxes,
    /// `|cos|` between each axis and the matching reference axis.
    pub reference_cosines: Vec<f64>,
    pub pairs: Vec<PairEllipse>,
}

fn directions(u: &[Vec<f64>], k: usize, spec: &NormSpec) -> Result<Vec<Direction>> {
    if u.is_empty() {
        return Ok(vec![Direction::zero(k)]);
    }
    u.iter()
        .map(|v| {
            if v.len() != k {
                return Err(Error::DimensionMismatch { expected: k, got: v.len() });
            }
            Direction::new(v.clone(), spec)
        })
        .collect()
}

fn build_region(draws: &DataMatrix, kind: RegionKind, level: f64) -> Result<(CredibleRegion, Option<PrincipalAxes>)> {
    Ok(match kind {
        RegionKind::Box => (CredibleRegion::Hyperrectangle(hyperrectangle(draws, level)?), None),
        RegionKind::Ellipsoid => {
            let e = ellipsoid(draws, level)?;
            let axes = principal_axes(&e)?;
            (CredibleRegion::Ellipsoid(e), Some(axes))
        }
    })
}

fn draws_header(post: &PosteriorDraws, names: &[String]) -> Vec<String> {
    (0..post.m())
        .flat_map(|l| names.iter().map(move |c| if post.m() == 1 { c.clone() } else { format!("u{l}_{c}") }))
        .collect()
}

/// Runs a command and writes its outputs into `out`. Returns the files
/// written, the deterministic ones first and `timing.json` last.
pub fn execute(cmd: &Command, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let started = unix_now();
    let clock = Instant::now();
    let mut written = Vec::new();
    let opts = SolverOptions::default();
    let manifest = |input: Option<InputSummary>| RunManifest {
        command: cmd.clone(),
        seed: cmd.seed(),
        version: VERSION.to_string(),
        input,
    };
    match cmd {
        Command::Median { input, p } => {
            let ds = ingest_csv(input)?;
            let spec = NormSpec::new(*p)?;
            let r = weighted_median(&ds.data, &WeightVector::uniform(ds.data.n()), &spec, &opts)?;
            let path = out.join("result.json");
            write_document(&path, &manifest(Some(ds.summary(input))), &r)?;
            written.push(path);
        }
        Command::Quantile { input, p, u } => {
            let ds = ingest_csv(input)?;
            let spec = NormSpec::new(*p)?;
            let w = WeightVector::uniform(ds.data.n());
            let est = directions(u, ds.data.k(), &spec)?
                .iter()
                .map(|d| {
                    geometric_quantile(&ds.data, &w, d, &spec, &opts).map(|report| QuantileEstimate {
                        u: d.as_slice().to_vec(),
                        report,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let path = out.join("result.json");
            write_document(&path, &manifest(Some(ds.summary(input))), &est)?;
            written.push(path);
        }
        Command::Credible {
            input,
            p,
            u,
            draws,
            level,
            region,
            method,
            candidates,
            seed,
        } => {
            let ds = ingest_csv(input)?;
            let spec = NormSpec::new(*p)?;
            let seed = RngSeed::new(*seed);
            let (post, alpha) = match method {
                Method::Plain => {
                    let dirs = directions(u, ds.data.k(), &spec)?;
                    (posterior_sample(&ds.data, &dirs, &spec, *draws, seed, &opts)?, None)
                }
                Method::Affine => {
                    if !u.is_empty() {
                        return Err(Error::InvalidInput("the affine method supports the median only".into()));
                    }
                    let alpha = select_alpha(&ds.data, *candidates, seed.derive(1))?;
                    let post = tr_posterior_sample(&ds.data, &alpha, &spec, *draws, seed, &opts)?;
                    (post, Some(alpha))
                }
            };
            let mut regions = Vec::with_capacity(post.m());
            for l in 0..post.m() {
                let (region, axes) = build_region(&post.block(l), *region, *level)?;
                regions.push(DirectionRegion {
                    u: post.directions[l].as_slice().to_vec(),
                    estimate: post.centers[l].clone(),
                    region,
                    axes,
                });
            }
            let result = CredibleResult {
                p: *p,
                level: *level,
                draws: post.len(),
                dropped: post.dropped,
                alpha,
                regions,
            };
            let path = out.join("result.json");
            write_document(&path, &manifest(Some(ds.summary(input))), &result)?;
            written.push(path);
            let path = out.join("draws.csv");
            write_csv(&path, &post.joint(), Some(&draws_header(&post, &ds.column_names)))?;
            written.push(path);
        }
        Command::Trmedian {
            input,
            p,
            candidates,
            seed,
        } => {
            let ds = ingest_csv(input)?;
            let spec = NormSpec::new(*p)?;
            let alpha = select_alpha(&ds.data, *candidates, RngSeed::new(*seed).derive(1))?;
            let estimate = tr_median(&ds.data, &alpha, &spec, &opts)?;
            let path = out.join("result.json");
            write_document(&path, &manifest(Some(ds.summary(input))), &TrMedianResult { alpha, estimate })?;
            written.push(path);
        }
        Command::Simulate { cells, .. } => {
            let table: SimTable = run_table(cells)?;
            let m = manifest(None);
            let path = out.join("table.json");
            write_document(&path, &m, &table)?;
            written.push(path);
            let path = out.join("table.csv");
            write_atomic(&path, table.to_csv().as_bytes())?;
            written.push(path);
            let path = out.join("table.txt");
            write_atomic(&path, table.to_text().as_bytes())?;
            written.push(path);
        }
        Command::Iris {
            input,
            species_column,
            features,
            p,
            draws,
            level,
            seed,
        } => {
            let (species, summary) = iris(input, species_column, features, *p, *draws, *level, RngSeed::new(*seed))?;
            let path = out.join("iris.json");
            write_document(&path, &manifest(Some(summary)), &species)?;
            written.push(path);
            let path = out.join("iris_polylines.csv");
            write_atomic(&path, polylines_csv(&species).as_bytes())?;
            written.push(path);
        }
    }
    let timing = Timing {
        command: cmd.name(),
        started_unix: started,
        finished_unix: unix_now(),
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
    };
    let path = out.join("timing.json");
    write_atomic(&path, &serde_json::to_vec_pretty(&timing)?)?;
    written.push(path);
    Ok(written)
}

fn polylines_csv(species: &[SpeciesResult]) -> String {
    let mut s = String::from("species,feature_x,feature_y,vertex,x,y\n");
    for sp in species {
        for pair in &sp.pairs {
            for (i, [x, y]) in pair.polyline.iter().enumerate() {
                s.push_str(&format!(
                    "{},{},{},{i},{x:.16e},{y:.16e}\n",
                    sp.species, pair.features[0], pair.features[1]
                ));
            }
        }
    }
    s
}

/// Per-species median ellipsoids of the four features, their principal
/// axes, and the six pairwise two-feature ellipses.
fn iris(
    input: &InputSpec,
    species_column: &str,
    features: &[String],
    p: f64,
    draws: usize,
    level: f64,
    seed: RngSeed,
) -> Result<(Vec<SpeciesResult>, InputSummary)> {
    let spec = NormSpec::new(p)?;
    let opts = SolverOptions::default();
    let labels = species_labels(input, species_column)?;
    let mut out = Vec::new();
    let mut summary = None;
    for (s, name) in labels.iter().enumerate() {
        let sub = InputSpec {
            columns: Some(features.to_vec()),
            filter: Some(RowFilter {
                column: species_column.to_string(),
                value: name.clone(),
            }),
            ..input.clone()
        };
        let ds = ingest_csv(&sub)?;
        let sseed = seed.derive(s as u64);
        let k = ds.data.k();
        let post = posterior_sample(&ds.data, &[Direction::zero(k)], &spec, draws, sseed, &opts)?;
        let e = ellipsoid(&post.block(0), level)?;
        let axes = principal_axes(&e)?;
        let reference_cosines = if k == 4 {
            axes.axes
                .iter()
                .zip(IRIS_REFERENCE_AXES.iter())
                .map(|(a, r)| a.iter().zip(r).map(|(x, y)| x * y).sum::<f64>().abs() / norm2(r))
                .collect()
        } else {
            Vec::new()
        };
        let mut pairs = Vec::new();
        let mut pair_index = 0u64;
        for i in 0..k {
            for j in i + 1..k {
                let d2 = ds.data.select_columns(&[i, j])?;
                let p2 = posterior_sample(
                    &d2,
                    &[Direction::zero(2)],
                    &spec,
                    draws,
                    sseed.derive(100 + pair_index),
                    &opts,
                )?;
                let e2 = ellipsoid(&p2.block(0), level)?;
                let polyline = ellipse_polyline(&e2, POLYLINE_POINTS)?;
                pairs.push(PairEllipse {
                    features: [ds.column_names[i].clone(), ds.column_names[j].clone()],
                    ellipsoid: e2,
                    polyline,
                });
                pair_index += 1;
            }
        }
        summary.get_or_insert_with(|| InputSummary {
            path: input.path.clone(),
            sha256: ds.sha256.clone(),
            rows: 0,
            columns: ds.column_names.clone(),
        });
        if let Some(sm) = summary.as_mut() {
            sm.rows += ds.data.n();
        }
        out.push(SpeciesResult {
            species: name.clone(),
            n: ds.data.n(),
            median: post.centers[0].clone(),
            ellipsoid: e,
            axes,
            reference_cosines,
            pairs,
        });
    }
    let summary = summary.ok_or_else(|| Error::InvalidInput("no species found".into()))?;
    Ok((out, summary))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Distinct values of the species column in order of first appearance.
fn species_labels(input: &InputSpec, column: &str) -> Result<Vec<String>> {
    let path = input.path.as_path();
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(input.delimiter as u8)
        .has_headers(input.has_header)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let header = if input.has_header {
        Some(reader.headers().map_err(|e| csv_err(path, e))?.clone())
    } else {
        None
    };
    let mut labels: Vec<String> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let col = resolve_column(column, header.as_ref(), rec.len(), path)?;
        let v = rec.get(col).unwrap_or_default();
        if !v.is_empty() && !labels.iter().any(|l| l == v) {
            labels.push(v.to_string());
        }
    }
    Ok(labels)
}

/// Reads a manifest, either standalone or from a `{manifest, result}`
/// document.
pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let v: serde_json::Value = serde_json::from_slice(&bytes)?;
    let m = v.get("manifest").cloned().unwrap_or(v);
    Ok(serde_json::from_value(m)?)
}

/// Reruns the command recorded in a manifest. The input file must still
/// have the recorded hash.
pub fn replay(manifest_path: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let m = read_manifest(manifest_path)?;
    if let Some(input) = &m.input {
        let bytes = fs::read(&input.path).map_err(|e| io_err(&input.path, e))?;
        if sha256_hex(&bytes) != input.sha256 {
            return Err(Error::InvalidInput(format!(
                "{} has changed since the manifest was written",
                input.path.display()
            )));
        }
    }
    execute(&m.command, out)
}
