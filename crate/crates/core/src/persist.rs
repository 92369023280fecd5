//! On-disk formats: supernet descriptors, weight blobs, toy models,
//! datasets, latency tables, and subnet pools.
//!
//! Structure is human-readable text; weights are a binary blob with an
//! embedded layout-version byte. Floats in text files use Rust's shortest
//! round-trip formatting, so write-then-read reproduces every in-memory
//! value exactly and identical inputs produce byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::data::Dataset;
use crate::engine::{AffineParams, BottleneckBlockParams, DenseArray, SupernetWeights, ToyClassifier};
use crate::graph::{BlockPosition, BlockVariant, LayerShape, SubnetEncoding, SupernetGraph};
use crate::latsim::LatencyTable;
use crate::runtime::{PoolEntry, SubnetPool};

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("{path}: io error: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}: byte {offset}: {message}")]
    Binary { path: PathBuf, offset: usize, message: String },
    #[error("{path}: descriptor/blob mismatch: {message}")]
    Inconsistent { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PersistError + '_ {
    move |source| PersistError::Io { path: path.to_path_buf(), source }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> PersistError {
    PersistError::Parse { path: path.to_path_buf(), line, message: message.into() }
}

// ── descriptor ───────────────────────────────────────────────────────

const DESCRIPTOR_HEADER: &str = "elastinet-supernet v1";

pub fn descriptor_to_string(graph: &SupernetGraph) -> String {
    let mut s = String::new();
    s.push_str(DESCRIPTOR_HEADER);
    s.push('\n');
    s.push_str(&format!("gamma {}\n", graph.gamma));
    s.push_str(&format!("p0 {}\n", graph.p0));
    s.push_str(&format!("head {} {}\n", graph.head.in_dim, graph.head.out_dim));
    s.push_str(&format!("tail {} {}\n", graph.tail.in_dim, graph.tail.out_dim));
    s.push_str(&format!("positions {}\n", graph.positions.len()));
    for p in &graph.positions {
        s.push_str(&format!(
            "position {} {} {} {} {} {}\n",
            p.index, p.in_dim, p.out_dim, p.param_size, p.fusion_group, p.width
        ));
    }
    s.push_str(&format!("variants {}\n", graph.variants.len()));
    for v in graph.variants.values() {
        s.push_str(&format!(
            "variant {} {} {} {} {}\n",
            v.start, v.degree, v.span, v.param_size, v.width
        ));
    }
    s
}

pub fn parse_descriptor(path: &Path, text: &str) -> Result<SupernetGraph, PersistError> {
    let mut lines = text.lines().enumerate();
    let mut next = |expect: &str| -> Result<(usize, Vec<String>), PersistError> {
        for (i, raw) in lines.by_ref() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<String> = line.split_whitespace().map(str::to_string).collect();
            if !expect.is_empty() && fields[0] != expect {
                return Err(parse_err(path, i + 1, format!("expected `{expect}`, got `{}`", fields[0])));
            }
            return Ok((i + 1, fields));
        }
        Err(parse_err(path, 0, format!("unexpected end of file, expected `{expect}`")))
    };

    let (line_no, header) = next("")?;
    if header.join(" ") != DESCRIPTOR_HEADER {
        return Err(parse_err(path, line_no, "bad header; expected `elastinet-supernet v1`"));
    }
    let parse_field = |line: usize, s: &str, what: &str| -> Result<f64, PersistError> {
        s.parse::<f64>().map_err(|_| parse_err(path, line, format!("bad {what}: {s}")))
    };
    let parse_usize = |line: usize, s: &str, what: &str| -> Result<usize, PersistError> {
        s.parse::<usize>().map_err(|_| parse_err(path, line, format!("bad {what}: {s}")))
    };

    let (l, gamma) = next("gamma")?;
    let gamma = parse_field(l, &gamma[1], "gamma")?;
    let (l, p0) = next("p0")?;
    let p0 = p0[1].parse::<u64>().map_err(|_| parse_err(path, l, "bad p0"))?;
    let (l, head) = next("head")?;
    let head = LayerShape { in_dim: parse_usize(l, &head[1], "head in")?, out_dim: parse_usize(l, &head[2], "head out")? };
    let (l, tail) = next("tail")?;
    let tail = LayerShape { in_dim: parse_usize(l, &tail[1], "tail in")?, out_dim: parse_usize(l, &tail[2], "tail out")? };

    let (l, count) = next("positions")?;
    let n = parse_usize(l, &count[1], "position count")?;
    let mut positions = Vec::with_capacity(n);
    for _ in 0..n {
        let (l, f) = next("position")?;
        if f.len() != 7 {
            return Err(parse_err(path, l, "position needs 6 fields"));
        }
        positions.push(BlockPosition {
            index: parse_usize(l, &f[1], "index")?,
            in_dim: parse_usize(l, &f[2], "in_dim")?,
            out_dim: parse_usize(l, &f[3], "out_dim")?,
            param_size: f[4].parse().map_err(|_| parse_err(path, l, "bad param_size"))?,
            fusion_group: f[5].parse().map_err(|_| parse_err(path, l, "bad fusion_group"))?,
            width: parse_usize(l, &f[6], "width")?,
        });
    }

    let (l, count) = next("variants")?;
    let vn = parse_usize(l, &count[1], "variant count")?;
    let mut variants = BTreeMap::new();
    for _ in 0..vn {
        let (l, f) = next("variant")?;
        if f.len() != 6 {
            return Err(parse_err(path, l, "variant needs 5 fields"));
        }
        let start = parse_usize(l, &f[1], "start")?;
        let degree: i32 = f[2].parse().map_err(|_| parse_err(path, l, "bad degree"))?;
        variants.insert(
            (start, degree),
            BlockVariant {
                start,
                degree,
                span: parse_usize(l, &f[3], "span")?,
                param_size: f[4].parse().map_err(|_| parse_err(path, l, "bad param_size"))?,
                width: parse_usize(l, &f[5], "width")?,
            },
        );
    }

    let graph = SupernetGraph { positions, variants, head, tail, gamma, p0 };
    graph.check_invariants().map_err(|e| parse_err(path, 0, e.to_string()))?;
    Ok(graph)
}

// ── weight blob ──────────────────────────────────────────────────────

const WEIGHTS_MAGIC: &[u8; 4] = b"ENW1";
const MODEL_MAGIC: &[u8; 4] = b"ENM1";
const LAYOUT_VERSION: u8 = 1;

fn push_f64s(out: &mut Vec<u8>, xs: &[f64]) {
    for v in xs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct BinReader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> BinReader<'a> {
    fn new(path: &'a Path, bytes: &'a [u8]) -> Self {
        BinReader { path, bytes, offset: 0 }
    }

    fn err(&self, message: impl Into<String>) -> PersistError {
        PersistError::Binary {
            path: self.path.to_path_buf(),
            offset: self.offset,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], PersistError> {
        if self.offset + n > self.bytes.len() {
            return Err(self.err(format!("truncated: need {n} bytes")));
        }
        let s = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, PersistError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, PersistError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, PersistError> {
        let raw = self.take(n * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn done(&self) -> Result<(), PersistError> {
        if self.offset != self.bytes.len() {
            return Err(self.err(format!("{} trailing bytes", self.bytes.len() - self.offset)));
        }
        Ok(())
    }
}

/// Weight blob layout: magic, layout version, then little-endian f64s:
/// head (W, b), every block in (start, j) ascending order as W1, b1, W2,
/// b2 row-major, then tail (W, b). Shapes come from the descriptor.
pub fn weights_to_bytes(weights: &SupernetWeights, graph: &SupernetGraph) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(WEIGHTS_MAGIC);
    out.push(LAYOUT_VERSION);
    push_f64s(&mut out, weights.head.w.data());
    push_f64s(&mut out, &weights.head.b);
    for &key in graph.variants.keys() {
        let b = weights.block(key).expect("descriptor and weights agree");
        push_f64s(&mut out, b.w1.data());
        push_f64s(&mut out, &b.b1);
        push_f64s(&mut out, b.w2.data());
        push_f64s(&mut out, &b.b2);
    }
    push_f64s(&mut out, weights.tail.w.data());
    push_f64s(&mut out, &weights.tail.b);
    out
}

pub fn weights_from_bytes(
    path: &Path,
    bytes: &[u8],
    graph: &SupernetGraph,
) -> Result<SupernetWeights, PersistError> {
    let mut r = BinReader::new(path, bytes);
    if r.take(4)? != WEIGHTS_MAGIC {
        return Err(r.err("bad magic; not a weight blob"));
    }
    let version = r.u8()?;
    if version != LAYOUT_VERSION {
        return Err(r.err(format!("unsupported layout version {version}")));
    }
    let read_affine = |r: &mut BinReader, in_dim: usize, out_dim: usize| -> Result<AffineParams, PersistError> {
        Ok(AffineParams {
            w: DenseArray::from_vec(vec![in_dim, out_dim], r.f64s(in_dim * out_dim)?),
            b: r.f64s(out_dim)?,
        })
    };
    let head = read_affine(&mut r, graph.head.in_dim, graph.head.out_dim)?;
    let mut originals = BTreeMap::new();
    let mut branches = BTreeMap::new();
    for (&key, v) in &graph.variants {
        let d = graph.positions[v.start].in_dim;
        let h = v.width;
        let block = BottleneckBlockParams {
            w1: DenseArray::from_vec(vec![d, h], r.f64s(d * h)?),
            b1: r.f64s(h)?,
            w2: DenseArray::from_vec(vec![h, d], r.f64s(h * d)?),
            b2: r.f64s(d)?,
        };
        if key.1 == 0 {
            originals.insert(key.0, block);
        } else {
            branches.insert(key, block);
        }
    }
    let tail = read_affine(&mut r, graph.tail.in_dim, graph.tail.out_dim)?;
    r.done()?;
    Ok(SupernetWeights { head, tail, originals, branches })
}

// ── toy model ────────────────────────────────────────────────────────

pub fn model_to_bytes(model: &ToyClassifier) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.push(LAYOUT_VERSION);
    out.extend_from_slice(&(model.input_dim() as u32).to_le_bytes());
    out.extend_from_slice(&(model.feature_dim() as u32).to_le_bytes());
    out.extend_from_slice(&(model.num_classes() as u32).to_le_bytes());
    out.extend_from_slice(&(model.blocks.len() as u32).to_le_bytes());
    for b in &model.blocks {
        out.extend_from_slice(&(b.width() as u32).to_le_bytes());
    }
    push_f64s(&mut out, model.head.w.data());
    push_f64s(&mut out, &model.head.b);
    for b in &model.blocks {
        push_f64s(&mut out, b.w1.data());
        push_f64s(&mut out, &b.b1);
        push_f64s(&mut out, b.w2.data());
        push_f64s(&mut out, &b.b2);
    }
    push_f64s(&mut out, model.tail.w.data());
    push_f64s(&mut out, &model.tail.b);
    out
}

pub fn model_from_bytes(path: &Path, bytes: &[u8]) -> Result<ToyClassifier, PersistError> {
    let mut r = BinReader::new(path, bytes);
    if r.take(4)? != MODEL_MAGIC {
        return Err(r.err("bad magic; not a toy model file"));
    }
    if r.u8()? != LAYOUT_VERSION {
        return Err(r.err("unsupported layout version"));
    }
    let input_dim = r.u32()? as usize;
    let d = r.u32()? as usize;
    let classes = r.u32()? as usize;
    let nblocks = r.u32()? as usize;
    if nblocks > 4096 {
        return Err(r.err(format!("implausible block count {nblocks}")));
    }
    let widths: Vec<usize> = (0..nblocks)
        .map(|_| r.u32().map(|w| w as usize))
        .collect::<Result<_, _>>()?;
    let head = AffineParams {
        w: DenseArray::from_vec(vec![input_dim, d], r.f64s(input_dim * d)?),
        b: r.f64s(d)?,
    };
    let mut blocks = Vec::with_capacity(nblocks);
    for &h in &widths {
        blocks.push(BottleneckBlockParams {
            w1: DenseArray::from_vec(vec![d, h], r.f64s(d * h)?),
            b1: r.f64s(h)?,
            w2: DenseArray::from_vec(vec![h, d], r.f64s(h * d)?),
            b2: r.f64s(d)?,
        });
    }
    let tail = AffineParams {
        w: DenseArray::from_vec(vec![d, classes], r.f64s(d * classes)?),
        b: r.f64s(classes)?,
    };
    r.done()?;
    Ok(ToyClassifier { head, blocks, tail })
}

// ── dataset ──────────────────────────────────────────────────────────

pub fn dataset_to_string(ds: &Dataset) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "# elastinet-dataset v1 classes={} dim={} rows={}\n",
        ds.num_classes,
        ds.dim(),
        ds.len()
    ));
    let mut header = String::from("label");
    for i in 0..ds.dim() {
        header.push_str(&format!(",f{i}"));
    }
    s.push_str(&header);
    s.push('\n');
    for r in 0..ds.len() {
        let mut line = ds.labels[r].to_string();
        for v in ds.features.row(r) {
            line.push(',');
            line.push_str(&format!("{v}"));
        }
        s.push_str(&line);
        s.push('\n');
    }
    s
}

pub fn parse_dataset(path: &Path, text: &str) -> Result<Dataset, PersistError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let header = header.trim();
    if !header.starts_with("# elastinet-dataset v1") {
        return Err(parse_err(path, 1, "bad header; expected `# elastinet-dataset v1 ...`"));
    }
    let mut classes = None;
    let mut dim = None;
    for part in header.split_whitespace() {
        if let Some(v) = part.strip_prefix("classes=") {
            classes = v.parse::<usize>().ok();
        }
        if let Some(v) = part.strip_prefix("dim=") {
            dim = v.parse::<usize>().ok();
        }
    }
    let classes = classes.ok_or_else(|| parse_err(path, 1, "missing classes="))?;
    let dim = dim.ok_or_else(|| parse_err(path, 1, "missing dim="))?;

    let mut labels = Vec::new();
    let mut data = Vec::new();
    for (i, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with("label") {
            continue;
        }
        let mut parts = line.split(',');
        let label: usize = parts
            .next()
            .unwrap()
            .parse()
            .map_err(|_| parse_err(path, i + 1, "bad label"))?;
        if label >= classes {
            return Err(parse_err(path, i + 1, format!("label {label} >= classes {classes}")));
        }
        let row: Vec<f64> = parts
            .map(|p| p.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| parse_err(path, i + 1, "bad float"))?;
        if row.len() != dim {
            return Err(parse_err(path, i + 1, format!("expected {dim} features, got {}", row.len())));
        }
        labels.push(label);
        data.extend(row);
    }
    let n = labels.len();
    Dataset::new(DenseArray::from_vec(vec![n, dim], data), labels, classes)
        .map_err(|e| parse_err(path, 0, e.to_string()))
}

// ── latency table ────────────────────────────────────────────────────

pub fn table_to_string(table: &LatencyTable) -> String {
    let mut s = String::new();
    s.push_str("elastinet-latency-table v1\n");
    s.push_str(&format!("device {}\n", table.device_id));
    s.push_str(&format!("profiled_at {}\n", table.profiled_at_ms));
    for (&(start, j), ms) in &table.entries {
        s.push_str(&format!("{start}:{j} {ms}\n"));
    }
    s
}

pub fn parse_table(path: &Path, text: &str) -> Result<LatencyTable, PersistError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    if header.trim() != "elastinet-latency-table v1" {
        return Err(parse_err(path, 1, "bad header"));
    }
    let mut device_id = String::new();
    let mut profiled_at_ms = 0.0;
    let mut entries = BTreeMap::new();
    for (i, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("device ") {
            device_id = rest.to_string();
            continue;
        }
        if let Some(rest) = line.strip_prefix("profiled_at ") {
            profiled_at_ms = rest
                .parse()
                .map_err(|_| parse_err(path, i + 1, "bad profiled_at"))?;
            continue;
        }
        let (key, ms) = line
            .split_once(' ')
            .ok_or_else(|| parse_err(path, i + 1, "expected `start:j ms`"))?;
        let (s, j) = key
            .split_once(':')
            .ok_or_else(|| parse_err(path, i + 1, "expected start:j"))?;
        let start: usize = s.parse().map_err(|_| parse_err(path, i + 1, "bad start"))?;
        let degree: i32 = j.parse().map_err(|_| parse_err(path, i + 1, "bad degree"))?;
        let ms: f64 = ms.parse().map_err(|_| parse_err(path, i + 1, "bad latency"))?;
        if ms <= 0.0 {
            return Err(parse_err(path, i + 1, "latency must be positive"));
        }
        entries.insert((start, degree), ms);
    }
    Ok(LatencyTable { entries, device_id, profiled_at_ms })
}

// ── subnet pool ──────────────────────────────────────────────────────

pub fn pool_to_string(pool: &SubnetPool) -> String {
    let mut s = String::new();
    s.push_str("elastinet-pool v1\n");
    s.push_str(&format!("window {} {}\n", pool.window.0, pool.window.1));
    s.push_str("arch,latency,accuracy,relative_latency\n");
    for e in &pool.entries {
        s.push_str(&format!(
            "\"{}\",{},{},{}\n",
            e.arch, e.latency, e.accuracy, e.relative_latency
        ));
    }
    s
}

pub fn parse_pool(path: &Path, text: &str) -> Result<SubnetPool, PersistError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    if header.trim() != "elastinet-pool v1" {
        return Err(parse_err(path, 1, "bad header"));
    }
    let (l, window_line) = lines.next().ok_or_else(|| parse_err(path, 2, "missing window"))?;
    let parts: Vec<&str> = window_line.trim().split_whitespace().collect();
    if parts.len() != 3 || parts[0] != "window" {
        return Err(parse_err(path, l + 1, "expected `window lo hi`"));
    }
    let window = (
        parts[1].parse().map_err(|_| parse_err(path, l + 1, "bad window lo"))?,
        parts[2].parse().map_err(|_| parse_err(path, l + 1, "bad window hi"))?,
    );
    let mut entries = Vec::new();
    for (i, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with("arch,") {
            continue;
        }
        // arch is quoted because it contains commas.
        let rest = line
            .strip_prefix('"')
            .ok_or_else(|| parse_err(path, i + 1, "arch must be quoted"))?;
        let (arch, rest) = rest
            .split_once('"')
            .ok_or_else(|| parse_err(path, i + 1, "unterminated arch quote"))?;
        let nums: Vec<&str> = rest.trim_start_matches(',').split(',').collect();
        if nums.len() != 3 {
            return Err(parse_err(path, i + 1, "expected latency,accuracy,relative_latency"));
        }
        SubnetEncoding::parse_arch(arch)
            .map_err(|e| parse_err(path, i + 1, e.to_string()))?;
        entries.push(PoolEntry {
            arch: arch.to_string(),
            latency: nums[0].parse().map_err(|_| parse_err(path, i + 1, "bad latency"))?,
            accuracy: nums[1].parse().map_err(|_| parse_err(path, i + 1, "bad accuracy"))?,
            relative_latency: nums[2].parse().map_err(|_| parse_err(path, i + 1, "bad relative latency"))?,
        });
    }
    Ok(SubnetPool { entries, window })
}

// ── bundle ───────────────────────────────────────────────────────────

/// Bundle metadata, stored as meta.json next to the descriptor and blob.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BundleMeta {
    pub seed: u64,
    /// SHA-256 over descriptor bytes then weight bytes.
    pub provenance: String,
    /// Set by training; absent on untrained bundles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainMeta>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainMeta {
    pub distill_epochs: usize,
    pub tune_epochs: usize,
    pub lr_distill: f64,
    pub lr_tune: f64,
    pub batch_size: usize,
    pub original_hash: String,
}

/// The deployable unit: descriptor.txt + weights.bin + meta.json in one
/// directory.
pub struct SupernetBundle {
    pub graph: SupernetGraph,
    pub weights: SupernetWeights,
    pub meta: BundleMeta,
}

pub fn provenance_hash(descriptor: &str, blob: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(descriptor.as_bytes());
    hasher.update(blob);
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn save_bundle(dir: &Path, bundle: &SupernetBundle) -> Result<(), PersistError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let descriptor = descriptor_to_string(&bundle.graph);
    let blob = weights_to_bytes(&bundle.weights, &bundle.graph);
    let meta = BundleMeta {
        provenance: provenance_hash(&descriptor, &blob),
        ..bundle.meta.clone()
    };
    write_file(&dir.join("descriptor.txt"), descriptor.as_bytes())?;
    write_file(&dir.join("weights.bin"), &blob)?;
    let meta_json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    write_file(&dir.join("meta.json"), meta_json.as_bytes())?;
    Ok(())
}

pub fn load_bundle(dir: &Path) -> Result<SupernetBundle, PersistError> {
    let desc_path = dir.join("descriptor.txt");
    let descriptor = fs::read_to_string(&desc_path).map_err(io_err(&desc_path))?;
    let graph = parse_descriptor(&desc_path, &descriptor)?;
    let blob_path = dir.join("weights.bin");
    let blob = fs::read(&blob_path).map_err(io_err(&blob_path))?;
    let weights = weights_from_bytes(&blob_path, &blob, &graph)?;
    let meta_path = dir.join("meta.json");
    let meta_text = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
    let meta: BundleMeta = serde_json::from_str(&meta_text).map_err(|e| {
        parse_err(&meta_path, e.line(), e.to_string())
    })?;
    let expect = provenance_hash(&descriptor, &blob);
    if meta.provenance != expect {
        return Err(PersistError::Inconsistent {
            path: dir.to_path_buf(),
            message: format!("provenance hash {} does not match contents {expect}", meta.provenance),
        });
    }
    Ok(SupernetBundle { graph, weights, meta })
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PersistError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))?;
    Ok(())
}

pub fn read_to_string(path: &Path) -> Result<String, PersistError> {
    fs::read_to_string(path).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_blobs;
    use crate::fixtures::toy_graph;
    use crate::latsim::{nominal_table, DevicePreset};
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::path::Path;

    #[test]
    fn descriptor_round_trip() {
        let g = toy_graph(4, 2, &[0.5, 0.25]);
        let text = descriptor_to_string(&g);
        let parsed = parse_descriptor(Path::new("test"), &text).unwrap();
        assert_eq!(parsed, g);
    }

    #[test]
    fn descriptor_rejects_garbage_with_line_numbers() {
        let g = toy_graph(2, 1, &[]);
        let mut text = descriptor_to_string(&g);
        text = text.replace("position 1", "position x");
        let err = parse_descriptor(Path::new("desc"), &text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("desc:"), "{msg}");
        assert!(msg.contains("bad index") || msg.contains("bad"), "{msg}");
    }

    #[test]
    fn table_round_trip_is_exact() {
        let g = toy_graph(4, 2, &[0.5, 0.25]);
        let env = crate::latsim::EnvProfile::for_graph(&g, &DevicePreset::default(), vec![], 0.1)
            .unwrap();
        let t = crate::latsim::profile_blocks(&g, &env, 9, 3).unwrap();
        let text = table_to_string(&t);
        let parsed = parse_table(Path::new("t"), &text).unwrap();
        assert_eq!(parsed, t);
    }

    #[test]
    fn dataset_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ds = make_blobs(37, 5, 3, 4.0, &mut rng).unwrap();
        let text = dataset_to_string(&ds);
        let parsed = parse_dataset(Path::new("d"), &text).unwrap();
        assert_eq!(parsed, ds);
    }

    #[test]
    fn pool_round_trip() {
        let pool = SubnetPool {
            entries: vec![
                PoolEntry { arch: "0:1,2:0,3:-1".into(), latency: 1.25, accuracy: 0.875, relative_latency: 1.0 },
                PoolEntry { arch: "0:0,1:0,2:0,3:0".into(), latency: 2.5, accuracy: 0.9375, relative_latency: 2.0 },
            ],
            window: (1.0, 3.0),
        };
        let text = pool_to_string(&pool);
        let parsed = parse_pool(Path::new("p"), &text).unwrap();
        assert_eq!(parsed, pool);
    }

    #[test]
    fn weights_round_trip_bitwise() {
        let g = toy_graph(3, 1, &[0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ds = make_blobs(64, 4, 3, 5.0, &mut rng).unwrap();
        let arch = crate::elastic::ToyArch { feature_dim: 8, widths: vec![8, 8, 8] };
        let model = crate::elastic::pretrain_toy(&ds, &arch, 2, 0.1, 1).unwrap();
        let weights = SupernetWeights::from_pretrained(&model, &g, 0.05, &mut rng).unwrap();
        let blob = weights_to_bytes(&weights, &g);
        let parsed = weights_from_bytes(Path::new("w"), &blob, &g).unwrap();
        assert_eq!(parsed, weights);
        // Bitwise: re-serialization is identical.
        assert_eq!(weights_to_bytes(&parsed, &g), blob);
    }

    #[test]
    fn model_round_trip_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ds = make_blobs(64, 4, 3, 5.0, &mut rng).unwrap();
        let arch = crate::elastic::ToyArch { feature_dim: 6, widths: vec![8, 4] };
        let model = crate::elastic::pretrain_toy(&ds, &arch, 2, 0.1, 1).unwrap();
        let bytes = model_to_bytes(&model);
        let parsed = model_from_bytes(Path::new("m"), &bytes).unwrap();
        assert_eq!(parsed, model);
        assert_eq!(model_to_bytes(&parsed), bytes);
    }

    #[test]
    fn truncated_blob_reports_offset() {
        let g = toy_graph(2, 1, &[]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ds = make_blobs(32, 4, 2, 5.0, &mut rng).unwrap();
        let arch = crate::elastic::ToyArch { feature_dim: 6, widths: vec![6, 6] };
        let model = crate::elastic::pretrain_toy(&ds, &arch, 1, 0.1, 1).unwrap();
        let weights = SupernetWeights::from_pretrained(&model, &g, 0.05, &mut rng).unwrap();
        let mut blob = weights_to_bytes(&weights, &g);
        blob.truncate(blob.len() - 9);
        let err = weights_from_bytes(Path::new("w"), &blob, &g).unwrap_err();
        assert!(err.to_string().contains("byte"), "{err}");
    }

    #[test]
    fn bundle_round_trip_and_provenance() {
        let g = toy_graph(3, 1, &[0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ds = make_blobs(48, 4, 3, 5.0, &mut rng).unwrap();
        let arch = crate::elastic::ToyArch { feature_dim: 8, widths: vec![8, 8, 8] };
        let model = crate::elastic::pretrain_toy(&ds, &arch, 1, 0.1, 1).unwrap();
        let weights = SupernetWeights::from_pretrained(&model, &g, 0.05, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let bundle = SupernetBundle {
            graph: g.clone(),
            weights: weights.clone(),
            meta: BundleMeta { seed: 7, provenance: String::new(), train: None },
        };
        save_bundle(dir.path(), &bundle).unwrap();
        let loaded = load_bundle(dir.path()).unwrap();
        assert_eq!(loaded.graph, g);
        assert_eq!(loaded.weights, weights);
        assert_eq!(loaded.meta.seed, 7);

        // Corrupt the blob: provenance check must fail.
        let blob_path = dir.path().join("weights.bin");
        let mut blob = fs::read(&blob_path).unwrap();
        let last = blob.len() - 1;
        blob[last] ^= 0xff;
        fs::write(&blob_path, &blob).unwrap();
        assert!(load_bundle(dir.path()).is_err());
    }

    #[test]
    fn nominal_table_text_is_deterministic() {
        let g = toy_graph(4, 2, &[0.5]);
        let t = nominal_table(&g, &DevicePreset::default());
        assert_eq!(table_to_string(&t), table_to_string(&t));
    }
}
