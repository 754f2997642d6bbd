//! File formats: signal and plan CSV, PGM/PPM images, distance matrices and
//! labelled datasets.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::distance::{DistanceMatrix, DistanceSpec};
use crate::error::{invalid, Result, TlpError};
use crate::measure::{DiscreteMeasure, ImageRaster, PlanEntry, Points, Signal, TransportPlan};

pub const SCHEMA_VERSION: u32 = 1;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TlpError + '_ {
    move |source| TlpError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, message: impl Into<String>) -> TlpError {
    TlpError::Parse {
        path: path.display().to_string(),
        message: message.into(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> TlpError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => TlpError::Io {
            path: path.display().to_string(),
            source,
        },
        other => parse_err(path, format!("{other:?}")),
    }
}

/// Raw rows of a signal CSV before domain normalization.
struct RawSignal {
    dim: usize,
    channels: usize,
    coords: Vec<f64>,
    weights: Option<Vec<f64>>,
    values: Vec<f64>,
}

fn read_raw_signal(path: &Path) -> Result<RawSignal> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let kind = |h: &str| h.chars().next().map(|c| c.to_ascii_lowercase());
    let dim = header.iter().take_while(|h| kind(h) == Some('x')).count();
    let has_w = header.get(dim).is_some_and(|h| h.eq_ignore_ascii_case("w"));
    let first_f = dim + has_w as usize;
    let channels = header.len() - first_f;
    if dim == 0 || channels == 0 || header[first_f..].iter().any(|h| kind(h) != Some('f')) {
        return Err(parse_err(path, "header must read x1,...,xd[,w],f1,...,fm"));
    }
    let mut raw = RawSignal {
        dim,
        channels,
        coords: Vec::new(),
        weights: has_w.then(Vec::new),
        values: Vec::new(),
    };
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != header.len() {
            return Err(parse_err(
                path,
                format!(
                    "row {} has {} fields, expected {}",
                    line + 1,
                    rec.len(),
                    header.len()
                ),
            ));
        }
        let nums = rec
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|_| {
                    parse_err(path, format!("row {}: '{s}' is not a number", line + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        raw.coords.extend_from_slice(&nums[..dim]);
        if let Some(w) = raw.weights.as_mut() {
            w.push(nums[dim]);
        }
        raw.values.extend_from_slice(&nums[first_f..]);
    }
    if raw.values.is_empty() {
        return Err(parse_err(path, "no data rows"));
    }
    Ok(raw)
}

/// Lattice shape when the points form a full equally spaced grid listed with
/// axis 0 varying fastest, together with the spacing per axis.
fn detect_grid(dim: usize, coords: &[f64]) -> Option<(Vec<usize>, Vec<f64>)> {
    let n = coords.len() / dim;
    let mut shape = Vec::with_capacity(dim);
    let mut axes = Vec::with_capacity(dim);
    for a in 0..dim {
        let mut u: Vec<f64> = (0..n).map(|i| coords[i * dim + a]).collect();
        u.sort_by(f64::total_cmp);
        u.dedup();
        if u.len() > 1 {
            let h = (u[u.len() - 1] - u[0]) / (u.len() - 1) as f64;
            if u.windows(2)
                .any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1e-300))
            {
                return None;
            }
        }
        shape.push(u.len());
        axes.push(u);
    }
    if shape.iter().product::<usize>() != n {
        return None;
    }
    let mut stride = 1;
    for (a, u) in axes.iter().enumerate() {
        for i in 0..n {
            if coords[i * dim + a] != u[(i / stride) % u.len()] {
                return None;
            }
        }
        stride *= u.len();
    }
    let spacing = axes
        .iter()
        .map(|u| if u.len() > 1 { u[1] - u[0] } else { 0.0 })
        .collect();
    Some((shape, spacing))
}

/// Reads several signal CSVs with one shared domain normalization: when any
/// coordinate falls outside `[0,1]`, the joint bounding box is mapped
/// affinely onto `[0,1]^d` axis by axis. When every input is a regular grid
/// the box is padded by half a cell so that points land on cell centres.
pub fn read_signals(paths: &[PathBuf]) -> Result<Vec<Signal>> {
    let raws = paths
        .iter()
        .map(|p| read_raw_signal(p))
        .collect::<Result<Vec<_>>>()?;
    let dim = match raws.first() {
        Some(r) => r.dim,
        None => return invalid("no signal files given"),
    };
    if let Some((p, _)) = paths.iter().zip(&raws).find(|(_, r)| r.dim != dim) {
        return Err(parse_err(p, format!("domain dimension differs from {dim}")));
    }
    let grids: Vec<_> = raws.iter().map(|r| detect_grid(dim, &r.coords)).collect();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    let mut inside = true;
    let all_grids = grids.iter().all(Option::is_some);
    for (r, g) in raws.iter().zip(&grids) {
        for (i, &x) in r.coords.iter().enumerate() {
            let a = i % dim;
            let pad = match g {
                Some((_, h)) if all_grids => 0.5 * h[a],
                _ => 0.0,
            };
            lo[a] = lo[a].min(x - pad);
            hi[a] = hi[a].max(x + pad);
            inside &= (0.0..=1.0).contains(&x);
        }
    }
    let extent: Vec<(f64, f64)> = lo.iter().copied().zip(hi.iter().copied()).collect();
    let map = |a: usize, x: f64| {
        if inside {
            x
        } else if hi[a] > lo[a] {
            (x - lo[a]) / (hi[a] - lo[a])
        } else {
            0.5
        }
    };
    raws.into_iter()
        .zip(grids)
        .zip(paths)
        .map(|((r, g), path)| {
            let coords = r
                .coords
                .iter()
                .enumerate()
                .map(|(i, &x)| map(i % dim, x))
                .collect();
            let points = Points::new(dim, coords)?;
            let measure = match r.weights {
                Some(mut w) => {
                    let total: f64 = w.iter().sum();
                    if w.iter().any(|&v| v < 0.0) || total <= 0.0 {
                        return Err(parse_err(
                            path,
                            "weights must be non-negative with positive sum",
                        ));
                    }
                    w.iter_mut().for_each(|v| *v /= total);
                    DiscreteMeasure::new(points, w)?
                }
                None => DiscreteMeasure::uniform(points)?,
            };
            let mut s = Signal::new(measure, r.channels, r.values)?;
            if let Some((shape, _)) = g {
                s = s.with_grid(shape)?;
            }
            if !inside {
                s = s.with_extent(extent.clone());
            }
            Ok(s)
        })
        .collect()
}

pub fn read_signal(path: &Path) -> Result<Signal> {
    Ok(read_signals(&[path.to_path_buf()])?.remove(0))
}

pub fn write_signal(signal: &Signal, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header: Vec<String> = (1..=signal.dim()).map(|k| format!("x{k}")).collect();
    header.push("w".into());
    header.extend((1..=signal.channels()).map(|k| format!("f{k}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    let pts = signal.measure().points();
    for i in 0..signal.len() {
        let mut row: Vec<String> = pts.point(i).iter().map(|x| x.to_string()).collect();
        row.push(signal.measure().weights()[i].to_string());
        row.extend(signal.value(i).iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_plan(plan: &TransportPlan, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["i", "j", "mass"])
        .map_err(|e| csv_err(path, e))?;
    for e in plan.entries() {
        w.write_record([
            e.source.to_string(),
            e.target.to_string(),
            e.mass.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_plan(path: &Path, source_size: usize, target_size: usize) -> Result<TransportPlan> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut entries = Vec::new();
    for rec in rdr.deserialize::<(usize, usize, f64)>() {
        let (source, target, mass) = rec.map_err(|e| csv_err(path, e))?;
        entries.push(PlanEntry {
            source,
            target,
            mass,
        });
    }
    TransportPlan::new(source_size, target_size, entries)
}

struct Tokens<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self) -> Option<&'a str> {
        loop {
            while self.pos < self.data.len() && self.data[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.data.get(self.pos) == Some(&b'#') {
                while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start)
            .then(|| std::str::from_utf8(&self.data[start..self.pos]).ok())
            .flatten()
    }

    fn number(&mut self, path: &Path, what: &str) -> Result<usize> {
        self.next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(path, format!("missing or bad {what}")))
    }
}

/// Reads a PGM or PPM image (`P2`, `P3`, `P5`, `P6`), scaling samples by
/// `1 / maxval`.
pub fn read_pnm(path: &Path) -> Result<ImageRaster> {
    let data = fs::read(path).map_err(io_err(path))?;
    let mut t = Tokens {
        data: &data,
        pos: 0,
    };
    let magic = t.next().ok_or_else(|| parse_err(path, "empty file"))?;
    let (channels, binary) = match magic {
        "P2" => (1, false),
        "P3" => (3, false),
        "P5" => (1, true),
        "P6" => (3, true),
        other => return Err(parse_err(path, format!("unsupported image type '{other}'"))),
    };
    let width = t.number(path, "width")?;
    let height = t.number(path, "height")?;
    let maxval = t.number(path, "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(parse_err(path, format!("maxval {maxval} out of range")));
    }
    let count = width * height * channels;
    let scale = 1.0 / maxval as f64;
    let raw: Vec<usize> = if binary {
        let start = t.pos + 1;
        let bytes = if maxval > 255 { 2 } else { 1 };
        let body = data
            .get(start..start + count * bytes)
            .ok_or_else(|| parse_err(path, "truncated pixel data"))?;
        if bytes == 2 {
            body.chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as usize)
                .collect()
        } else {
            body.iter().map(|&b| b as usize).collect()
        }
    } else {
        (0..count)
            .map(|_| t.number(path, "sample"))
            .collect::<Result<_>>()?
    };
    if raw.iter().any(|&v| v > maxval) {
        return Err(parse_err(path, "sample exceeds maxval"));
    }
    ImageRaster::new(
        width,
        height,
        channels,
        raw.into_iter().map(|v| v as f64 * scale).collect(),
    )
}

/// Writes a binary PGM or PPM; 16-bit samples when `maxval > 255`.
pub fn write_pnm(image: &ImageRaster, path: &Path, maxval: u16) -> Result<()> {
    if maxval == 0 {
        return invalid("maxval must be positive");
    }
    let magic = if image.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n{maxval}\n", image.width(), image.height()).into_bytes();
    for &v in image.pixels() {
        let q = (v * maxval as f64).round() as u16;
        if maxval > 255 {
            out.extend_from_slice(&q.to_be_bytes());
        } else {
            out.push(q as u8);
        }
    }
    fs::write(path, out).map_err(io_err(path))
}

/// The sidecar path of a matrix CSV: `name.csv` becomes `name.csv.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[derive(Serialize, Deserialize)]
struct MatrixSidecar {
    schema_version: u32,
    labels: Vec<String>,
    spec: Option<DistanceSpec>,
}

/// Matrix CSV with a header row of labels, plus a JSON sidecar with the distance settings.
pub fn write_matrix(matrix: &DistanceMatrix, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(matrix.labels())
        .map_err(|e| csv_err(path, e))?;
    let n = matrix.len();
    for i in 0..n {
        w.write_record((0..n).map(|j| matrix.get(i, j).to_string()))
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))?;
    let side = sidecar_path(path);
    let meta = MatrixSidecar {
        schema_version: SCHEMA_VERSION,
        labels: matrix.labels().to_vec(),
        spec: matrix.spec().copied(),
    };
    let text = serde_json::to_string_pretty(&meta).map_err(|e| parse_err(&side, e.to_string()))?;
    fs::write(&side, text).map_err(io_err(&side))
}

pub fn read_matrix(path: &Path) -> Result<DistanceMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let labels: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut values = Vec::with_capacity(labels.len() * labels.len());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        for s in rec.iter() {
            values.push(
                s.parse::<f64>()
                    .map_err(|_| parse_err(path, format!("'{s}' is not a number")))?,
            );
        }
    }
    let side = sidecar_path(path);
    let spec = match fs::read_to_string(&side) {
        Ok(text) => {
            serde_json::from_str::<MatrixSidecar>(&text)
                .map_err(|e| parse_err(&side, e.to_string()))?
                .spec
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(io_err(&side)(e)),
    };
    DistanceMatrix::new(labels, values, spec).map_err(|e| parse_err(path, e.to_string()))
}

/// A dataset directory: one signal CSV per item plus `labels.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub schema_version: u32,
    pub items: Vec<DatasetItem>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetItem {
    pub file: String,
    pub label: String,
}

pub const LABELS_FILE: &str = "labels.json";

pub fn write_dataset(dir: &Path, signals: &[Signal], labels: &[String]) -> Result<()> {
    if signals.len() != labels.len() {
        return invalid("signals and labels differ in length");
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let width = signals.len().max(1).to_string().len().max(3);
    let mut items = Vec::with_capacity(signals.len());
    for (k, (s, l)) in signals.iter().zip(labels).enumerate() {
        let file = format!("s{k:0width$}.csv");
        write_signal(s, &dir.join(&file))?;
        items.push(DatasetItem {
            file,
            label: l.clone(),
        });
    }
    let index = DatasetIndex {
        schema_version: SCHEMA_VERSION,
        items,
    };
    let path = dir.join(LABELS_FILE);
    let mut f = fs::File::create(&path).map_err(io_err(&path))?;
    let text = serde_json::to_string_pretty(&index).map_err(|e| parse_err(&path, e.to_string()))?;
    f.write_all(text.as_bytes()).map_err(io_err(&path))
}

/// Signals, labels and file names of a dataset directory.
pub fn read_dataset(dir: &Path) -> Result<(Vec<Signal>, Vec<String>, Vec<String>)> {
    let path = dir.join(LABELS_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let index: DatasetIndex =
        serde_json::from_str(&text).map_err(|e| parse_err(&path, e.to_string()))?;
    let paths: Vec<PathBuf> = index.items.iter().map(|i| dir.join(&i.file)).collect();
    let signals = read_signals(&paths)?;
    let labels = index.items.iter().map(|i| i.label.clone()).collect();
    let names = index.items.into_iter().map(|i| i.file).collect();
    Ok((signals, labels, names))
}
