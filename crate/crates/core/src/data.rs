//! Datasets: labeled-embedding CSV files, MNIST IDX files and synthetic
//! Gaussian mixtures.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Dense n×d matrix of finite values with optional class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset {
    name: String,
    dim: usize,
    values: Vec<f64>,
    labels: Option<Vec<usize>>,
}

impl EmbeddingDataset {
    /// Builds a dataset from row-major values.
    pub fn from_flat(
        name: impl Into<String>,
        dim: usize,
        values: Vec<f64>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dataset dimension must be at least 1"));
        }
        if values.is_empty() {
            return Err(Error::invalid("dataset must contain at least one row"));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "{} values do not form rows of width {dim}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "row {}, column {} is {}",
                i / dim,
                i % dim,
                values[i]
            )));
        }
        let n = values.len() / dim;
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::LengthMismatch {
                    what: "labels",
                    expected: n,
                    actual: l.len(),
                });
            }
        }
        Ok(EmbeddingDataset {
            name: name.into(),
            dim,
            values,
            labels,
        })
    }

    pub fn from_rows(
        name: impl Into<String>,
        rows: &[Vec<f64>],
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(Error::invalid(format!(
                "row {i} has {} values, expected {dim}",
                r.len()
            )));
        }
        Self::from_flat(name, dim, rows.concat(), labels)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Number of distinct label values assuming labels are 0-based.
    pub fn n_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().copied().max().map_or(0, |m| m + 1))
    }

    /// First `n` rows (all rows when `n >= len`).
    pub fn head(&self, n: usize) -> Self {
        let n = n.min(self.len()).max(1);
        EmbeddingDataset {
            name: self.name.clone(),
            dim: self.dim,
            values: self.values[..n * self.dim].to_vec(),
            labels: self.labels.as_ref().map(|l| l[..n].to_vec()),
        }
    }

    /// Per-feature z-scores. Constant features are centered but not scaled.
    pub fn standardized(&self) -> Self {
        let n = self.len() as f64;
        let mut mean = vec![0.0; self.dim];
        for row in self.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; self.dim];
        for row in self.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale: Vec<f64> = var
            .iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    1.0 / sd
                } else {
                    1.0
                }
            })
            .collect();
        let values = self
            .values
            .chunks_exact(self.dim)
            .flat_map(|row| {
                row.iter()
                    .zip(&mean)
                    .zip(&scale)
                    .map(|((v, m), s)| (v - m) * s)
            })
            .collect();
        EmbeddingDataset {
            name: self.name.clone(),
            dim: self.dim,
            values,
            labels: self.labels.clone(),
        }
    }

    /// Serializes as CSV with a `f0,..,f{d-1}[,label]` header. Values use the
    /// shortest decimal representation that parses back to the same `f64`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (0..self.dim).map(|j| format!("f{j}")).collect();
        out.push_str(&header.join(","));
        if self.labels.is_some() {
            out.push_str(",label");
        }
        out.push('\n');
        for (i, row) in self.rows().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v:?}");
            }
            if let Some(l) = &self.labels {
                let _ = write!(out, ",{}", l[i]);
            }
            out.push('\n');
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Reads a comma-separated file. When `has_label_column` is set the last
/// column holds a nonnegative integer label. A first row containing any
/// non-numeric cell is treated as a header and skipped.
pub fn load_csv(path: impl AsRef<Path>, has_label_column: bool) -> Result<EmbeddingDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, has_label_column, path)
        .map(|ds| ds.with_name(path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned())))
}

pub(crate) fn parse_csv(text: &str, has_label_column: bool, path: &Path) -> Result<EmbeddingDataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
        .peekable();

    if let Some((_, first)) = lines.peek() {
        if first.split(',').any(|c| c.trim().parse::<f64>().is_err()) {
            lines.next();
        }
    }

    let mut width = None;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (row, line) in lines {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let expected = *width.get_or_insert(cells.len());
        if cells.len() != expected {
            return Err(Error::RaggedRow {
                path: path.into(),
                row,
                expected,
                actual: cells.len(),
            });
        }
        let n_features = if has_label_column {
            if expected < 2 {
                return Err(Error::format(path, "label column requires at least two columns"));
            }
            expected - 1
        } else {
            expected
        };
        for (col, cell) in cells[..n_features].iter().enumerate() {
            let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                Error::BadCell {
                    path: path.into(),
                    row,
                    column: col + 1,
                    cell: cell.to_string(),
                }
            })?;
            values.push(v);
        }
        if has_label_column {
            let cell = cells[n_features];
            let label = parse_label(cell).ok_or_else(|| Error::BadCell {
                path: path.into(),
                row,
                column: n_features + 1,
                cell: cell.to_string(),
            })?;
            labels.push(label);
        }
    }

    let Some(width) = width else {
        return Err(Error::EmptyFile { path: path.into() });
    };
    let dim = if has_label_column { width - 1 } else { width };
    EmbeddingDataset::from_flat("", dim, values, has_label_column.then_some(labels))
}

fn parse_label(cell: &str) -> Option<usize> {
    if let Ok(v) = cell.parse::<usize>() {
        return Some(v);
    }
    let v: f64 = cell.parse().ok()?;
    (v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64).then_some(v as usize)
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

/// Decodes an IDX image file into `(count, rows, cols, pixels)`.
fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let header = |at| be_u32(bytes, at).ok_or_else(|| Error::format(path, "truncated IDX header"));
    let magic = header(0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::format(
            path,
            format!("bad magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"),
        ));
    }
    let count = header(4)? as usize;
    let rows = header(8)? as usize;
    let cols = header(12)? as usize;
    let need = count * rows * cols;
    let payload = &bytes[16..];
    if payload.len() < need {
        return Err(Error::format(
            path,
            format!("truncated payload: {} bytes, expected {need}", payload.len()),
        ));
    }
    Ok((count, rows, cols, payload[..need].to_vec()))
}

fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let header = |at| be_u32(bytes, at).ok_or_else(|| Error::format(path, "truncated IDX header"));
    let magic = header(0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::format(
            path,
            format!("bad magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"),
        ));
    }
    let count = header(4)? as usize;
    let payload = &bytes[8..];
    if payload.len() < count {
        return Err(Error::format(
            path,
            format!("truncated payload: {} bytes, expected {count}", payload.len()),
        ));
    }
    Ok(payload[..count].to_vec())
}

/// Loads an IDX image/label file pair. Images are flattened row-major;
/// `normalize` maps pixel bytes to [0, 1] by dividing by 255.
pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    normalize: bool,
) -> Result<EmbeddingDataset> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    let image_bytes = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let label_bytes = fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    let (count, rows, cols, pixels) = parse_idx_images(&image_bytes, images_path)?;
    let labels = parse_idx_labels(&label_bytes, labels_path)?;
    if labels.len() != count {
        return Err(Error::format(
            labels_path,
            format!("{} labels for {count} images", labels.len()),
        ));
    }
    if count == 0 || rows * cols == 0 {
        return Err(Error::EmptyFile {
            path: images_path.into(),
        });
    }
    let values = pixels
        .iter()
        .map(|&p| if normalize { p as f64 / 255.0 } else { p as f64 })
        .collect();
    let name = images_path
        .file_stem()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    EmbeddingDataset::from_flat(
        name,
        rows * cols,
        values,
        Some(labels.into_iter().map(usize::from).collect()),
    )
}

/// Writes an IDX image/label pair. `pixels` is row-major, `count*rows*cols` bytes.
pub fn write_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    rows: usize,
    cols: usize,
    pixels: &[u8],
    labels: &[u8],
) -> Result<()> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    if rows * cols == 0 || pixels.len() != labels.len() * rows * cols {
        return Err(Error::invalid("pixel buffer does not match label count"));
    }
    let mut img = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGES_MAGIC, labels.len() as u32, rows as u32, cols as u32] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    img.extend_from_slice(pixels);
    let mut lab = Vec::with_capacity(8 + labels.len());
    for v in [IDX_LABELS_MAGIC, labels.len() as u32] {
        lab.extend_from_slice(&v.to_be_bytes());
    }
    lab.extend_from_slice(labels);
    fs::File::create(images_path)
        .and_then(|mut f| f.write_all(&img))
        .map_err(|e| Error::io(images_path, e))?;
    fs::File::create(labels_path)
        .and_then(|mut f| f.write_all(&lab))
        .map_err(|e| Error::io(labels_path, e))
}

/// Deterministic source of uniform and standard normal deviates on ChaCha8.
///
/// Uniforms take the top 53 bits of a 64-bit draw; normals use the
/// Marsaglia polar method and cache the second deviate of each pair, so a
/// given seed yields the same stream on every platform.
#[derive(Debug, Clone)]
pub struct SeededRng {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n`. `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let factor = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * factor);
                return u * factor;
            }
        }
    }
}

/// Isotropic Gaussian mixture description.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub n_clusters: usize,
    pub dim: usize,
    pub points_per_cluster: usize,
    /// Each center coordinate is drawn uniformly from `[lo, hi)`.
    pub center_box: (f64, f64),
    pub sigma: f64,
    pub rng_seed: u64,
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 || self.dim == 0 || self.points_per_cluster == 0 {
            return Err(Error::invalid(
                "clusters, dim and points per cluster must all be at least 1",
            ));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        let (lo, hi) = self.center_box;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::invalid(format!("invalid center box [{lo}, {hi})")));
        }
        Ok(())
    }
}

/// Samples a mixture. Returns the dataset (labels = cluster of origin,
/// points grouped by cluster) and the sampled centers.
pub fn gen_mixture_with_centers(spec: &MixtureSpec) -> Result<(EmbeddingDataset, Vec<Vec<f64>>)> {
    spec.validate()?;
    let mut src = SeededRng::new(spec.rng_seed);
    let (lo, hi) = spec.center_box;
    let centers: Vec<Vec<f64>> = (0..spec.n_clusters)
        .map(|_| (0..spec.dim).map(|_| lo + (hi - lo) * src.uniform()).collect())
        .collect();
    let n = spec.n_clusters * spec.points_per_cluster;
    let mut values = Vec::with_capacity(n * spec.dim);
    let mut labels = Vec::with_capacity(n);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..spec.points_per_cluster {
            values.extend(center.iter().map(|m| m + spec.sigma * src.standard_normal()));
            labels.push(c);
        }
    }
    let name = format!(
        "mixture-k{}-d{}-n{}-seed{}",
        spec.n_clusters, spec.dim, n, spec.rng_seed
    );
    let ds = EmbeddingDataset::from_flat(name, spec.dim, values, Some(labels))?;
    Ok((ds, centers))
}

pub fn gen_mixture(spec: &MixtureSpec) -> Result<EmbeddingDataset> {
    gen_mixture_with_centers(spec).map(|(ds, _)| ds)
}
