//! Feature datasets: in-memory representation, file formats, normalisation
//! and source/target task assembly.
//!
//! Labels are 1-based class ids (`1..=C`). In files, a label of `0` marks an
//! unlabeled sample; a file is either wholly labeled or wholly unlabeled.
//!
//! # MDAF binary layout (little-endian)
//!
//! ```text
//! "MDAF"            4 bytes magic
//! u32 version       currently 1
//! u32 n             sample count
//! u32 d             feature dimension
//! u32 C             class count
//! i32 x n           labels, 0 = unlabeled
//! f32 x n*d         features, row-major
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MDAF_MAGIC: [u8; 4] = *b"MDAF";
pub const MDAF_VERSION: u32 = 1;
const MDAF_HEADER_LEN: u64 = 20;

/// An `n x d` feature matrix with optional 1-based labels.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureDataset {
    x: DMatrix<f64>,
    labels: Option<Vec<usize>>,
    domain_name: String,
    class_count: usize,
}

impl FeatureDataset {
    pub fn new(
        x: DMatrix<f64>,
        labels: Option<Vec<usize>>,
        domain_name: impl Into<String>,
        class_count: usize,
    ) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::invalid(format!(
                "dataset must be non-empty, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        if class_count == 0 {
            return Err(Error::invalid("class count must be positive"));
        }
        for c in 0..x.ncols() {
            for r in 0..x.nrows() {
                if !x[(r, c)].is_finite() {
                    return Err(Error::NonFinite { row: r, col: c });
                }
            }
        }
        if let Some(labels) = &labels {
            if labels.len() != x.nrows() {
                return Err(Error::DimensionMismatch {
                    context: "label count vs rows",
                    left: labels.len(),
                    right: x.nrows(),
                });
            }
            if let Some(&bad) = labels.iter().find(|&&l| l == 0 || l > class_count) {
                return Err(Error::LabelOutOfRange {
                    label: bad as i64,
                    classes: class_count,
                });
            }
        }
        Ok(Self {
            x,
            labels,
            domain_name: domain_name.into(),
            class_count,
        })
    }

    /// Builds a dataset from row vectors. Convenient for fixtures.
    pub fn from_rows(
        rows: &[Vec<f64>],
        labels: Option<Vec<usize>>,
        domain_name: impl Into<String>,
        class_count: usize,
    ) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(Error::RaggedRows {
                line: i + 1,
                expected: d,
                found: r.len(),
            });
        }
        let x = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
        Self::new(x, labels, domain_name, class_count)
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn domain_name(&self) -> &str {
        &self.domain_name
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    /// Replaces the declared class count, revalidating labels.
    pub fn with_class_count(self, class_count: usize) -> Result<Self> {
        Self::new(self.x, self.labels, self.domain_name, class_count)
    }

    pub fn with_domain_name(mut self, name: impl Into<String>) -> Self {
        self.domain_name = name.into();
        self
    }

    /// Same dataset with its labels dropped.
    pub fn unlabeled(&self) -> Self {
        Self {
            x: self.x.clone(),
            labels: None,
            domain_name: self.domain_name.clone(),
            class_count: self.class_count,
        }
    }

    /// Same labels and metadata over a replacement feature matrix.
    pub fn with_features(&self, x: DMatrix<f64>) -> Result<Self> {
        if x.nrows() != self.n() {
            return Err(Error::DimensionMismatch {
                context: "replacement feature rows",
                left: x.nrows(),
                right: self.n(),
            });
        }
        Self::new(
            x,
            self.labels.clone(),
            self.domain_name.clone(),
            self.class_count,
        )
    }

    /// Number of samples per class, indexed by `class - 1`.
    pub fn class_counts(&self) -> Option<Vec<usize>> {
        self.labels.as_ref().map(|labels| {
            let mut counts = vec![0; self.class_count];
            for &l in labels {
                counts[l - 1] += 1;
            }
            counts
        })
    }
}

fn domain_from_path(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Reads a CSV feature file: first column an integer label (`0` = unlabeled),
/// remaining columns decimal features. The class count is the largest label
/// present (1 for unlabeled files); override it with
/// [`FeatureDataset::with_class_count`].
pub fn load_csv(path: impl AsRef<Path>) -> Result<FeatureDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, &domain_from_path(path))
}

pub fn parse_csv(text: &str, domain_name: &str) -> Result<FeatureDataset> {
    let mut width = None;
    let mut raw_labels = Vec::new();
    let mut values = Vec::new();
    let mut any_labeled = None;

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let expected = *width.get_or_insert(cells.len());
        if cells.len() != expected {
            return Err(Error::RaggedRows {
                line: lineno,
                expected,
                found: cells.len(),
            });
        }
        if expected < 2 {
            return Err(Error::Parse {
                line: lineno,
                msg: "need a label column and at least one feature".into(),
            });
        }
        let label: i64 = cells[0].parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("label {:?} is not an integer", cells[0]),
        })?;
        if label < 0 {
            return Err(Error::LabelOutOfRange {
                label,
                classes: 0,
            });
        }
        let labeled = label != 0;
        if *any_labeled.get_or_insert(labeled) != labeled {
            return Err(Error::MixedLabels { line: lineno });
        }
        raw_labels.push(label as usize);
        for cell in &cells[1..] {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("{cell:?} is not a number"),
            })?;
            values.push(v);
        }
    }

    let n = raw_labels.len();
    let d = width.map_or(0, |w| w - 1);
    if n == 0 {
        return Err(Error::invalid("CSV contains no rows"));
    }
    let x = DMatrix::from_row_slice(n, d, &values);
    let labels = any_labeled.unwrap_or(false).then_some(raw_labels);
    let class_count = labels
        .as_ref()
        .and_then(|l| l.iter().copied().max())
        .unwrap_or(1);
    FeatureDataset::new(x, labels, domain_name, class_count)
}

/// Writes the CSV form. Values use the shortest decimal representation that
/// parses back to the identical `f64`, so text round trips are lossless.
pub fn save_csv(ds: &FeatureDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_csv(ds, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_csv(ds: &FeatureDataset, w: &mut impl Write) -> std::io::Result<()> {
    for i in 0..ds.n() {
        let label = ds.labels().map_or(0, |l| l[i]);
        write!(w, "{label}")?;
        for j in 0..ds.d() {
            write!(w, ",{}", ds.x[(i, j)])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Serialises to MDAF bytes. Features are narrowed to `f32`.
pub fn encode_mdaf(ds: &FeatureDataset) -> Result<Vec<u8>> {
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::invalid(format!("{what}={v} exceeds u32")))
    };
    let n = to_u32(ds.n(), "n")?;
    let d = to_u32(ds.d(), "d")?;
    let c = to_u32(ds.class_count(), "C")?;
    let mut out = Vec::with_capacity(20 + ds.n() * 4 + ds.n() * ds.d() * 4);
    out.extend_from_slice(&MDAF_MAGIC);
    for v in [MDAF_VERSION, n, d, c] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for i in 0..ds.n() {
        let label = ds.labels().map_or(0, |l| l[i]) as i32;
        out.extend_from_slice(&label.to_le_bytes());
    }
    for i in 0..ds.n() {
        for j in 0..ds.d() {
            out.extend_from_slice(&(ds.x[(i, j)] as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_mdaf(bytes: &[u8], domain_name: &str) -> Result<FeatureDataset> {
    let found = bytes.len() as u64;
    if found < MDAF_HEADER_LEN {
        if bytes.len() >= 4 && bytes[..4] != MDAF_MAGIC {
            return Err(Error::BadMagic(bytes[..4].try_into().unwrap()));
        }
        return Err(Error::Truncated {
            expected: MDAF_HEADER_LEN,
            found,
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MDAF_MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let version = word(0);
    if version != MDAF_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let (n, d, c) = (word(1) as u64, word(2) as u64, word(3) as u64);
    let payload = n
        .checked_mul(d)
        .and_then(|nd| nd.checked_mul(4))
        .and_then(|f| f.checked_add(n * 4))
        .and_then(|p| p.checked_add(MDAF_HEADER_LEN))
        .filter(|&total| usize::try_from(total).is_ok())
        .ok_or(Error::SizeOverflow { n, d })?;
    if found < payload {
        return Err(Error::Truncated {
            expected: payload,
            found,
        });
    }
    if found > payload {
        return Err(Error::invalid(format!(
            "{} trailing bytes after MDAF payload",
            found - payload
        )));
    }
    let (n, d, c) = (n as usize, d as usize, c as usize);

    let label_base = MDAF_HEADER_LEN as usize;
    let mut labels = Vec::with_capacity(n);
    let mut labeled = None;
    for i in 0..n {
        let off = label_base + 4 * i;
        let l = i32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        if l < 0 {
            return Err(Error::LabelOutOfRange {
                label: l as i64,
                classes: c,
            });
        }
        if *labeled.get_or_insert(l != 0) != (l != 0) {
            return Err(Error::MixedLabels { line: i + 1 });
        }
        labels.push(l as usize);
    }

    let feat_base = label_base + 4 * n;
    let x = DMatrix::from_fn(n, d, |i, j| {
        let off = feat_base + 4 * (i * d + j);
        f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as f64
    });
    let labels = labeled.unwrap_or(false).then_some(labels);
    FeatureDataset::new(x, labels, domain_name, c)
}

pub fn load_binary(path: impl AsRef<Path>) -> Result<FeatureDataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_mdaf(&bytes, &domain_from_path(path))
}

pub fn save_binary(ds: &FeatureDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_mdaf(ds)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeMode {
    #[default]
    None,
    Zscore,
    UnitLength,
}

impl std::str::FromStr for NormalizeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "zscore" => Ok(Self::Zscore),
            "unit_length" => Ok(Self::UnitLength),
            other => Err(Error::invalid(format!("unknown normalization {other:?}"))),
        }
    }
}

/// Columns whose standard deviation falls below this (relative to the
/// column's magnitude) count as zero-variance and pass through unchanged.
const ZERO_VARIANCE_TOL: f64 = 1e-12;

pub fn normalize(ds: &FeatureDataset, mode: NormalizeMode) -> FeatureDataset {
    let mut x = ds.x.clone();
    match mode {
        NormalizeMode::None => {}
        NormalizeMode::Zscore => {
            let n = x.nrows() as f64;
            for mut col in x.column_iter_mut() {
                let mean = col.sum() / n;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                if sd <= ZERO_VARIANCE_TOL * mean.abs().max(1.0) {
                    continue;
                }
                col.apply(|v| *v = (*v - mean) / sd);
            }
        }
        NormalizeMode::UnitLength => {
            for mut row in x.row_iter_mut() {
                let norm = row.norm();
                if norm > 0.0 {
                    row /= norm;
                }
            }
        }
    }
    FeatureDataset {
        x,
        labels: ds.labels.clone(),
        domain_name: ds.domain_name.clone(),
        class_count: ds.class_count,
    }
}

/// A labeled source domain paired with a target domain of the same shape.
#[derive(Clone, Debug)]
pub struct DaTask {
    source: FeatureDataset,
    target: FeatureDataset,
}

impl DaTask {
    pub fn source(&self) -> &FeatureDataset {
        &self.source
    }

    pub fn target(&self) -> &FeatureDataset {
        &self.target
    }

    pub fn n_source(&self) -> usize {
        self.source.n()
    }

    pub fn n_target(&self) -> usize {
        self.target.n()
    }

    pub fn class_count(&self) -> usize {
        self.source.class_count()
    }

    pub fn source_labels(&self) -> &[usize] {
        self.source.labels().expect("DaTask source is labeled")
    }

    /// Source rows followed by target rows.
    pub fn stacked(&self) -> DMatrix<f64> {
        let (ns, nt, d) = (self.n_source(), self.n_target(), self.source.d());
        let mut out = DMatrix::zeros(ns + nt, d);
        out.rows_mut(0, ns).copy_from(self.source.x());
        out.rows_mut(ns, nt).copy_from(self.target.x());
        out
    }
}

pub fn make_task(source: FeatureDataset, target: FeatureDataset) -> Result<DaTask> {
    if !source.is_labeled() {
        return Err(Error::MissingSourceLabels);
    }
    if source.d() != target.d() {
        return Err(Error::DimensionMismatch {
            context: "source vs target feature dimension",
            left: source.d(),
            right: target.d(),
        });
    }
    if source.class_count() != target.class_count() {
        return Err(Error::ClassCountMismatch {
            source_classes: source.class_count(),
            target_classes: target.class_count(),
        });
    }
    Ok(DaTask { source, target })
}
