//! On-disk dataset container ("MAG1") and plain-text import.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic "MAG1" | version u32 | K u32 | n_nodes u64 | d_m (K x u64)
//! n_sections u32 | table: n_sections x { tag [u8;4], offset u64, len u64 }
//! ...section payloads...
//! ```
//!
//! Sections: `CSRP` row pointers (u64), `CSRI` column indices (u64), `FT0m`
//! per-modality features (f64, row-major), `LABL` labels (u64, optional),
//! `SPTR`/`SPVA`/`SPTE` node splits (u64), `EPTR`/`EPVA`/`EPTE` edge splits
//! (u64 pairs, optional). Round-trips are bit-exact.

use std::fs;
use std::path::Path;

use crate::error::{LionError, Result};
use crate::mag::{Csr, EdgeSplits, MagDataset, Splits};

const MAGIC: &[u8; 4] = b"MAG1";
const VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// Little-endian encode/decode helpers shared by the MAG1/CGP1/AHA1 containers
// ---------------------------------------------------------------------------

pub(crate) fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn push_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn push_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn push_u64_slice(buf: &mut Vec<u8>, vs: &[u64]) {
    for &v in vs {
        push_u64(buf, v);
    }
}

pub(crate) fn push_f64_slice(buf: &mut Vec<u8>, vs: &[f64]) {
    for &v in vs {
        push_f64(buf, v);
    }
}

/// Byte cursor that names the field on every failed read.
pub(crate) struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Cursor { data, pos: 0 }
    }

    pub fn seek(&mut self, pos: usize) {
        self.pos = pos;
    }

    fn take(&mut self, n: usize, field: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(LionError::Format(format!(
                "{field}: truncated (need {n} bytes at offset {}, file has {})",
                self.pos,
                self.data.len()
            )));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn bytes4(&mut self, field: &str) -> Result<[u8; 4]> {
        let s = self.take(4, field)?;
        Ok([s[0], s[1], s[2], s[3]])
    }

    pub fn u32(&mut self, field: &str) -> Result<u32> {
        let s = self.take(4, field)?;
        Ok(u32::from_le_bytes(s.try_into().unwrap()))
    }

    pub fn u64(&mut self, field: &str) -> Result<u64> {
        let s = self.take(8, field)?;
        Ok(u64::from_le_bytes(s.try_into().unwrap()))
    }

    pub fn f64(&mut self, field: &str) -> Result<f64> {
        let s = self.take(8, field)?;
        Ok(f64::from_le_bytes(s.try_into().unwrap()))
    }

    pub fn u64_vec(&mut self, count: usize, field: &str) -> Result<Vec<u64>> {
        let s = self.take(count * 8, field)?;
        Ok(s.chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn f64_vec(&mut self, count: usize, field: &str) -> Result<Vec<f64>> {
        let s = self.take(count * 8, field)?;
        Ok(s.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

// ---------------------------------------------------------------------------
// MAG1 container
// ---------------------------------------------------------------------------

struct Section {
    tag: [u8; 4],
    payload: Vec<u8>,
}

fn usize_vec_to_u64(v: &[usize]) -> Vec<u64> {
    v.iter().map(|&x| x as u64).collect()
}

fn pairs_to_u64(v: &[(usize, usize)]) -> Vec<u64> {
    let mut out = Vec::with_capacity(v.len() * 2);
    for &(a, b) in v {
        out.push(a as u64);
        out.push(b as u64);
    }
    out
}

fn u64_to_usize_vec(v: Vec<u64>) -> Vec<usize> {
    v.into_iter().map(|x| x as usize).collect()
}

fn u64_to_pairs(v: Vec<u64>, field: &str) -> Result<Vec<(usize, usize)>> {
    if v.len() % 2 != 0 {
        return Err(LionError::Format(format!("{field}: odd number of endpoints")));
    }
    Ok(v.chunks_exact(2).map(|c| (c[0] as usize, c[1] as usize)).collect())
}

/// Serializes a dataset to MAG1 bytes.
pub fn encode_mag(ds: &MagDataset) -> Vec<u8> {
    let mut sections: Vec<Section> = Vec::new();
    let mut add = |tag: &[u8; 4], payload: Vec<u8>| {
        sections.push(Section { tag: *tag, payload });
    };

    let mut buf = Vec::new();
    push_u64_slice(&mut buf, &usize_vec_to_u64(ds.csr.row_ptr()));
    add(b"CSRP", std::mem::take(&mut buf));
    push_u64_slice(&mut buf, &usize_vec_to_u64(ds.csr.col_idx()));
    add(b"CSRI", std::mem::take(&mut buf));
    for (m, feat) in ds.features.iter().enumerate() {
        push_f64_slice(&mut buf, feat);
        let tag = [b'F', b'T', b'0', b'0' + m as u8];
        add(&tag, std::mem::take(&mut buf));
    }
    if let Some(labels) = &ds.labels {
        push_u64_slice(&mut buf, &usize_vec_to_u64(labels));
        add(b"LABL", std::mem::take(&mut buf));
    }
    for (tag, set) in [
        (b"SPTR", &ds.splits.train),
        (b"SPVA", &ds.splits.val),
        (b"SPTE", &ds.splits.test),
    ] {
        push_u64_slice(&mut buf, &usize_vec_to_u64(set));
        add(tag, std::mem::take(&mut buf));
    }
    if let Some(es) = &ds.edge_splits {
        for (tag, set) in [(b"EPTR", &es.train), (b"EPVA", &es.val), (b"EPTE", &es.test)] {
            push_u64_slice(&mut buf, &pairs_to_u64(set));
            add(tag, std::mem::take(&mut buf));
        }
    }

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    push_u32(&mut out, VERSION);
    push_u32(&mut out, ds.n_modalities() as u32);
    push_u64(&mut out, ds.n_nodes() as u64);
    for &d in &ds.feature_dims {
        push_u64(&mut out, d as u64);
    }
    push_u32(&mut out, sections.len() as u32);
    let table_start = out.len();
    // Placeholder table, patched after layout.
    for s in &sections {
        out.extend_from_slice(&s.tag);
        push_u64(&mut out, 0);
        push_u64(&mut out, s.payload.len() as u64);
    }
    let mut offset = out.len();
    for (i, s) in sections.iter().enumerate() {
        let entry = table_start + i * 20 + 4;
        out[entry..entry + 8].copy_from_slice(&(offset as u64).to_le_bytes());
        offset += s.payload.len();
    }
    for s in &sections {
        out.extend_from_slice(&s.payload);
    }
    out
}

/// Parses MAG1 bytes back into a dataset, validating all invariants.
pub fn decode_mag(data: &[u8]) -> Result<MagDataset> {
    let mut cur = Cursor::new(data);
    let magic = cur.bytes4("magic")?;
    if &magic != MAGIC {
        return Err(LionError::Format(format!(
            "magic: expected \"MAG1\", got {:?}",
            String::from_utf8_lossy(&magic)
        )));
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(LionError::Format(format!("version: unsupported {version}")));
    }
    let k = cur.u32("K")? as usize;
    if k == 0 || k > 8 {
        return Err(LionError::Format(format!("K: implausible modality count {k}")));
    }
    let n = cur.u64("n_nodes")? as usize;
    let mut feature_dims = Vec::with_capacity(k);
    for m in 0..k {
        feature_dims.push(cur.u64(&format!("d_m[{m}]"))? as usize);
    }
    let n_sections = cur.u32("n_sections")? as usize;
    let mut table = Vec::with_capacity(n_sections);
    for i in 0..n_sections {
        let tag = cur.bytes4(&format!("section[{i}].tag"))?;
        let offset = cur.u64(&format!("section[{i}].offset"))? as usize;
        let len = cur.u64(&format!("section[{i}].len"))? as usize;
        table.push((tag, offset, len));
    }
    let find = |tag: &[u8; 4]| -> Option<(usize, usize)> {
        table.iter().find(|(t, _, _)| t == tag).map(|&(_, o, l)| (o, l))
    };
    let read_u64s = |tag: &[u8; 4], field: &str| -> Result<Option<Vec<u64>>> {
        match table.iter().find(|(t, _, _)| t == tag) {
            None => Ok(None),
            Some(&(_, offset, len)) => {
                if len % 8 != 0 {
                    return Err(LionError::Format(format!("{field}: length {len} not a multiple of 8")));
                }
                let mut c = Cursor::new(data);
                c.seek(offset);
                Ok(Some(c.u64_vec(len / 8, field)?))
            }
        }
    };

    let row_ptr = read_u64s(b"CSRP", "CSRP")?
        .ok_or_else(|| LionError::Format("CSRP: missing section".into()))?;
    let col_idx = read_u64s(b"CSRI", "CSRI")?
        .ok_or_else(|| LionError::Format("CSRI: missing section".into()))?;
    let csr = Csr::from_raw(n, u64_to_usize_vec(row_ptr), u64_to_usize_vec(col_idx))?;

    let mut features = Vec::with_capacity(k);
    for m in 0..k {
        let tag = [b'F', b'T', b'0', b'0' + m as u8];
        let field = format!("FT0{m}");
        let (offset, len) = find(&tag)
            .ok_or_else(|| LionError::Format(format!("{field}: missing section")))?;
        let expect = n * feature_dims[m] * 8;
        if len != expect {
            return Err(LionError::Format(format!(
                "{field}: expected {expect} bytes, got {len}"
            )));
        }
        let mut c = Cursor::new(data);
        c.seek(offset);
        features.push(c.f64_vec(len / 8, &field)?);
    }

    let labels = read_u64s(b"LABL", "LABL")?.map(u64_to_usize_vec);
    let splits = Splits {
        train: read_u64s(b"SPTR", "SPTR")?.map(u64_to_usize_vec).unwrap_or_default(),
        val: read_u64s(b"SPVA", "SPVA")?.map(u64_to_usize_vec).unwrap_or_default(),
        test: read_u64s(b"SPTE", "SPTE")?.map(u64_to_usize_vec).unwrap_or_default(),
    };
    let edge_splits = match (
        read_u64s(b"EPTR", "EPTR")?,
        read_u64s(b"EPVA", "EPVA")?,
        read_u64s(b"EPTE", "EPTE")?,
    ) {
        (None, None, None) => None,
        (tr, va, te) => Some(EdgeSplits {
            train: u64_to_pairs(tr.unwrap_or_default(), "EPTR")?,
            val: u64_to_pairs(va.unwrap_or_default(), "EPVA")?,
            test: u64_to_pairs(te.unwrap_or_default(), "EPTE")?,
        }),
    };

    let ds = MagDataset {
        csr,
        features,
        feature_dims,
        labels,
        splits,
        edge_splits,
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes a dataset to `path` in the MAG1 container.
pub fn save_mag(ds: &MagDataset, path: &Path) -> Result<()> {
    fs::write(path, encode_mag(ds))?;
    Ok(())
}

/// Loads a MAG1 dataset from `path`.
pub fn load_mag(path: &Path) -> Result<MagDataset> {
    let data = fs::read(path)?;
    decode_mag(&data)
}

// ---------------------------------------------------------------------------
// Plain-text import
// ---------------------------------------------------------------------------

fn parse_matrix(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let text = fs::read_to_string(path)?;
    let mut rows = 0usize;
    let mut cols = None;
    let mut values = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| {
                    LionError::Format(format!(
                        "{}: line {}: not a number: {tok:?}",
                        path.display(),
                        ln + 1
                    ))
                })
            })
            .collect::<Result<_>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(LionError::Format(format!(
                    "{}: line {}: expected {c} columns, got {}",
                    path.display(),
                    ln + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    Ok((rows, cols.unwrap_or(0), values))
}

/// Imports externally extracted features: one whitespace-separated matrix per
/// modality (rows are nodes), an edge-list file with `u v` per line, and an
/// optional one-label-per-line file. Node splits default to 60/20/20 over a
/// seeded shuffle.
pub fn import_text(
    feature_paths: &[std::path::PathBuf],
    edges_path: &Path,
    labels_path: Option<&Path>,
    seed: u64,
) -> Result<MagDataset> {
    if feature_paths.is_empty() {
        return Err(LionError::Argument("need at least one modality feature file".into()));
    }
    let mut n_nodes = None;
    let mut features = Vec::new();
    let mut feature_dims = Vec::new();
    for path in feature_paths {
        let (rows, cols, values) = parse_matrix(path)?;
        match n_nodes {
            None => n_nodes = Some(rows),
            Some(n) if n != rows => {
                return Err(LionError::Format(format!(
                    "{}: {rows} rows but earlier modality had {n}",
                    path.display()
                )))
            }
            _ => {}
        }
        features.push(values);
        feature_dims.push(cols);
    }
    let n = n_nodes.unwrap();

    let text = fs::read_to_string(edges_path)?;
    let mut edges = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<usize> {
            tok.and_then(|t| t.parse::<usize>().ok()).ok_or_else(|| {
                LionError::Format(format!(
                    "{}: line {}: expected \"u v\"",
                    edges_path.display(),
                    ln + 1
                ))
            })
        };
        edges.push((parse(it.next())?, parse(it.next())?));
    }
    let csr = Csr::from_edges(n, &edges)?;

    let labels = match labels_path {
        None => None,
        Some(path) => {
            let (rows, cols, values) = parse_matrix(path)?;
            if rows != n || cols != 1 {
                return Err(LionError::Format(format!(
                    "{}: expected {n} rows of one label, got {rows}x{cols}",
                    path.display()
                )));
            }
            Some(values.into_iter().map(|v| v as usize).collect())
        }
    };

    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(seed).fork(4).shuffle(&mut order);
    let n_train = (n as f64 * 0.6).round() as usize;
    let n_val = (n as f64 * 0.2).round() as usize;
    let splits = Splits {
        train: order[..n_train].to_vec(),
        val: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..].to_vec(),
    };

    let ds = MagDataset {
        csr,
        features,
        feature_dims,
        labels,
        splits,
        edge_splits: None,
    };
    ds.validate()?;
    Ok(ds)
}

use crate::rng::Rng;
