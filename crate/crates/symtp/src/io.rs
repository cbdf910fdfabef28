//! On-disk formats: binary tracklets, representations and distance matrices,
//! CSV frame features, and the TSV dataset manifest.
//!
//! Readers validate declared sizes against the actual file before touching
//! payloads and reject anything malformed; nothing is repaired silently. The
//! byte layouts are documented in `docs/FORMATS.md`.

use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::error::Error;
use crate::metric::DistanceMatrix;
use crate::scalar::Scalar;
use crate::types::{FeatureHistogram, FrameFeatureMatrix, QuantileFunction, SymbolicRepresentation};

pub const TRACKLET_MAGIC: &[u8; 4] = b"SYTP";
pub const REPRESENTATION_MAGIC: &[u8; 4] = b"SYTR";
pub const DISTANCES_MAGIC: &[u8; 4] = b"SYTD";
pub const FORMAT_VERSION: u8 = 1;
pub const MANIFEST_HEADER: &str = "symtp-manifest v1";

/// Errors raised while reading or writing any of the on-disk formats.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}: bad magic, expected {expected:?}")]
    BadMagic { path: String, expected: String },

    #[error("{path}: unsupported format version {version}")]
    VersionUnsupported { path: String, version: u8 },

    #[error("{path}: expected {expected} bytes, found {actual}")]
    TruncatedFile {
        path: String,
        expected: u64,
        actual: u64,
    },

    #[error("{path}:{line}: duplicate path {dup:?}")]
    DuplicatePath {
        path: String,
        line: usize,
        dup: String,
    },

    #[error("{referenced}: feature count {found} does not match the manifest's declared {declared}")]
    DimMismatch {
        referenced: String,
        declared: usize,
        found: usize,
    },

    #[error("{path}:{line}: row has {found} columns, earlier rows have {expected}")]
    RaggedRow {
        path: String,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}:{line}: non-numeric token {token:?}")]
    NonNumericToken {
        path: String,
        line: usize,
        token: String,
    },

    #[error("{path}:{line}: expected {expected} columns, found {found}")]
    ColumnCountMismatch {
        path: String,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}: {source}")]
    Invalid { path: String, source: Error },
}

pub type IoResult<T> = std::result::Result<T, IoError>;

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File {
        path: path_str(path),
        source,
    }
}

fn invalid(path: &Path) -> impl FnOnce(Error) -> IoError + '_ {
    move |source| IoError::Invalid {
        path: path_str(path),
        source,
    }
}

/// Bounds-checked little-endian reader over a fully loaded file.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], path: &'a Path) -> Self {
        Self { bytes, pos: 0, path }
    }

    fn take(&mut self, n: usize) -> IoResult<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(IoError::TruncatedFile {
            path: path_str(self.path),
            expected: u64::MAX,
            actual: self.bytes.len() as u64,
        })?;
        if end > self.bytes.len() {
            return Err(IoError::TruncatedFile {
                path: path_str(self.path),
                expected: end as u64,
                actual: self.bytes.len() as u64,
            });
        }
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> IoResult<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> IoResult<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> IoResult<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> IoResult<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// Reads `count` length-prefixed UTF-8 strings.
    fn id_list(&mut self, count: usize) -> IoResult<Vec<String>> {
        let mut ids = Vec::with_capacity(count.min(self.bytes.len() / 4));
        for _ in 0..count {
            let len = self.u32()? as usize;
            let raw = self.take(len)?;
            let id = std::str::from_utf8(raw).map_err(|_| IoError::Parse {
                path: path_str(self.path),
                line: 0,
                msg: "id is not valid UTF-8".into(),
            })?;
            ids.push(id.to_string());
        }
        Ok(ids)
    }

    /// Checks the magic and version of a binary header.
    fn header(&mut self, magic: &[u8; 4]) -> IoResult<()> {
        if self.take(4)? != magic.as_slice() {
            return Err(IoError::BadMagic {
                path: path_str(self.path),
                expected: String::from_utf8_lossy(magic).into_owned(),
            });
        }
        let version = self.u8()?;
        if version != FORMAT_VERSION {
            return Err(IoError::VersionUnsupported {
                path: path_str(self.path),
                version,
            });
        }
        Ok(())
    }

    /// Rejects trailing bytes once a parse is complete.
    fn finish(self) -> IoResult<()> {
        if self.pos != self.bytes.len() {
            return Err(IoError::TruncatedFile {
                path: path_str(self.path),
                expected: self.pos as u64,
                actual: self.bytes.len() as u64,
            });
        }
        Ok(())
    }
}

fn write_count(out: &mut impl Write, count: usize, path: &Path) -> IoResult<()> {
    let v = u32::try_from(count).map_err(|_| IoError::Parse {
        path: path_str(path),
        line: 0,
        msg: format!("count {count} exceeds the format's 32-bit limit"),
    })?;
    out.write_all(&v.to_le_bytes()).map_err(file_err(path))
}

/// Writes a frame feature matrix as a `SYTP` file (32-bit payload).
pub fn save_tracklet_bin<S: Scalar>(path: &Path, matrix: &FrameFeatureMatrix<S>) -> IoResult<()> {
    let file = fs::File::create(path).map_err(file_err(path))?;
    let mut out = BufWriter::new(file);
    out.write_all(TRACKLET_MAGIC).map_err(file_err(path))?;
    out.write_all(&[FORMAT_VERSION]).map_err(file_err(path))?;
    write_count(&mut out, matrix.rows(), path)?;
    write_count(&mut out, matrix.cols(), path)?;
    for &v in matrix.data() {
        let bits = v.to_f32().expect("scalar narrows to f32").to_le_bytes();
        out.write_all(&bits).map_err(file_err(path))?;
    }
    out.flush().map_err(file_err(path))
}

/// Reads a `SYTP` file back into a validated matrix.
pub fn load_tracklet_bin<S: Scalar>(path: &Path) -> IoResult<FrameFeatureMatrix<S>> {
    let bytes = fs::read(path).map_err(file_err(path))?;
    let mut r = Reader::new(&bytes, path);
    r.header(TRACKLET_MAGIC)?;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let payload = rows.checked_mul(cols).and_then(|c| c.checked_mul(4));
    let expected = payload.map(|p| 13 + p as u64).unwrap_or(u64::MAX);
    if expected != bytes.len() as u64 {
        return Err(IoError::TruncatedFile {
            path: path_str(path),
            expected,
            actual: bytes.len() as u64,
        });
    }
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(S::from_f64_lossy(r.f32()? as f64));
    }
    r.finish()?;
    FrameFeatureMatrix::new(rows, cols, data).map_err(invalid(path))
}

/// Writes a pooled representation as a `SYTR` file (64-bit payload).
pub fn save_representation<S: Scalar>(
    path: &Path,
    rep: &SymbolicRepresentation<S>,
) -> IoResult<()> {
    let file = fs::File::create(path).map_err(file_err(path))?;
    let mut out = BufWriter::new(file);
    out.write_all(REPRESENTATION_MAGIC).map_err(file_err(path))?;
    out.write_all(&[FORMAT_VERSION]).map_err(file_err(path))?;
    write_count(&mut out, rep.feature_count(), path)?;
    write_count(&mut out, rep.t_samples(), path)?;
    for q in rep.features() {
        let h = q.histogram();
        out.write_all(&h.lo().widen().to_le_bytes())
            .map_err(file_err(path))?;
        out.write_all(&h.hi().widen().to_le_bytes())
            .map_err(file_err(path))?;
        write_count(&mut out, h.bin_count(), path)?;
        for &f in h.freqs() {
            out.write_all(&f.widen().to_le_bytes())
                .map_err(file_err(path))?;
        }
    }
    out.flush().map_err(file_err(path))
}

/// Reads a `SYTR` file; histograms are re-validated and prefix sums rebuilt,
/// so a loaded representation behaves exactly like the saved one.
pub fn load_representation<S: Scalar>(path: &Path) -> IoResult<SymbolicRepresentation<S>> {
    let bytes = fs::read(path).map_err(file_err(path))?;
    let mut r = Reader::new(&bytes, path);
    r.header(REPRESENTATION_MAGIC)?;
    let m = r.u32()? as usize;
    let t = r.u32()? as usize;
    let mut features = Vec::with_capacity(m.min(bytes.len() / 17));
    for _ in 0..m {
        let lo = S::from_f64_lossy(r.f64()?);
        let hi = S::from_f64_lossy(r.f64()?);
        let bins = r.u32()? as usize;
        let mass_bytes = bins.saturating_mul(8);
        let raw = r.take(mass_bytes)?;
        let freqs = raw
            .chunks_exact(8)
            .map(|c| S::from_f64_lossy(f64::from_le_bytes(c.try_into().unwrap())))
            .collect();
        let hist = FeatureHistogram::from_parts(lo, hi, freqs).map_err(invalid(path))?;
        features.push(QuantileFunction::new(hist));
    }
    r.finish()?;
    SymbolicRepresentation::new(features, t).map_err(invalid(path))
}

/// Writes a distance matrix with its query and gallery id lists (`SYTD`).
pub fn save_distance_matrix<S: Scalar>(
    path: &Path,
    matrix: &DistanceMatrix<S>,
    query_ids: &[String],
    gallery_ids: &[String],
) -> IoResult<()> {
    if query_ids.len() != matrix.rows() || gallery_ids.len() != matrix.cols() {
        return Err(IoError::Invalid {
            path: path_str(path),
            source: Error::ShapeMismatch(format!(
                "matrix is {}x{} but {} query ids and {} gallery ids were given",
                matrix.rows(),
                matrix.cols(),
                query_ids.len(),
                gallery_ids.len()
            )),
        });
    }
    let file = fs::File::create(path).map_err(file_err(path))?;
    let mut out = BufWriter::new(file);
    out.write_all(DISTANCES_MAGIC).map_err(file_err(path))?;
    out.write_all(&[FORMAT_VERSION]).map_err(file_err(path))?;
    write_count(&mut out, matrix.rows(), path)?;
    write_count(&mut out, matrix.cols(), path)?;
    for id in query_ids.iter().chain(gallery_ids) {
        write_count(&mut out, id.len(), path)?;
        out.write_all(id.as_bytes()).map_err(file_err(path))?;
    }
    for &d in matrix.data() {
        out.write_all(&d.widen().to_le_bytes())
            .map_err(file_err(path))?;
    }
    out.flush().map_err(file_err(path))
}

/// Reads a `SYTD` file back into a matrix plus both id lists.
pub fn load_distance_matrix<S: Scalar>(
    path: &Path,
) -> IoResult<(DistanceMatrix<S>, Vec<String>, Vec<String>)> {
    let bytes = fs::read(path).map_err(file_err(path))?;
    let mut r = Reader::new(&bytes, path);
    r.header(DISTANCES_MAGIC)?;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let query_ids = r.id_list(rows)?;
    let gallery_ids = r.id_list(cols)?;
    let cells = rows.saturating_mul(cols);
    let raw = r.take(cells.saturating_mul(8))?;
    let data = raw
        .chunks_exact(8)
        .map(|c| S::from_f64_lossy(f64::from_le_bytes(c.try_into().unwrap())))
        .collect();
    r.finish()?;
    let matrix = DistanceMatrix::new(rows, cols, data).map_err(invalid(path))?;
    Ok((matrix, query_ids, gallery_ids))
}

/// Reads comma-separated frame features: one row per frame, `expected_cols`
/// features per row. Blank lines and `#` comments are skipped.
pub fn load_tracklet_csv<S: Scalar>(
    path: &Path,
    expected_cols: usize,
) -> IoResult<FrameFeatureMatrix<S>> {
    let text = fs::read_to_string(path).map_err(file_err(path))?;
    let mut data: Vec<S> = Vec::new();
    let mut rows = 0usize;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if rows == 0 && tokens.len() != expected_cols {
            return Err(IoError::ColumnCountMismatch {
                path: path_str(path),
                line: line_no,
                expected: expected_cols,
                found: tokens.len(),
            });
        }
        if tokens.len() != expected_cols {
            return Err(IoError::RaggedRow {
                path: path_str(path),
                line: line_no,
                expected: expected_cols,
                found: tokens.len(),
            });
        }
        for token in tokens {
            let value: f64 = token.parse().map_err(|_| IoError::NonNumericToken {
                path: path_str(path),
                line: line_no,
                token: token.to_string(),
            })?;
            data.push(S::from_f64_lossy(value));
        }
        rows += 1;
    }
    FrameFeatureMatrix::new(rows, expected_cols, data).map_err(invalid(path))
}

/// Which retrieval role a manifest entry plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Query,
    Gallery,
    Train,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Query => "query",
            Split::Gallery => "gallery",
            Split::Train => "train",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "query" => Ok(Split::Query),
            "gallery" => Ok(Split::Gallery),
            "train" => Ok(Split::Train),
            other => Err(format!(
                "unknown split {other:?}, expected query, gallery or train"
            )),
        }
    }
}

/// One tracklet registered in a manifest. `path` is kept verbatim; resolve it
/// against the manifest's directory with [`resolve_path`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub tracklet_id: String,
    pub identity: String,
    pub camera: Option<String>,
    pub split: Split,
    pub path: String,
}

/// A dataset manifest: the shared feature count plus one entry per tracklet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub feature_dim: usize,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Parses manifest text. `origin` is used in error messages only.
    pub fn parse(text: &str, origin: &str) -> IoResult<Self> {
        let parse_err = |line: usize, msg: String| IoError::Parse {
            path: origin.to_string(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty manifest".into()))?;
        if header.trim_end() != MANIFEST_HEADER {
            return Err(IoError::BadMagic {
                path: origin.to_string(),
                expected: MANIFEST_HEADER.to_string(),
            });
        }
        let (_, dim_line) = lines
            .next()
            .ok_or_else(|| parse_err(2, "missing dim line".into()))?;
        let feature_dim = dim_line
            .trim_end()
            .strip_prefix("dim\t")
            .and_then(|d| d.parse::<usize>().ok())
            .filter(|&d| d >= 1)
            .ok_or_else(|| {
                parse_err(2, format!("expected \"dim\\t<count>\", got {dim_line:?}"))
            })?;

        let mut entries = Vec::new();
        let mut seen_paths: HashSet<&str> = HashSet::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 5 {
                return Err(parse_err(
                    line_no,
                    format!("expected 5 tab-separated fields, found {}", fields.len()),
                ));
            }
            let [tracklet_id, identity, camera, split, path] =
                [fields[0], fields[1], fields[2], fields[3], fields[4]];
            if tracklet_id.is_empty() || identity.is_empty() || camera.is_empty() || path.is_empty()
            {
                return Err(parse_err(line_no, "empty field".into()));
            }
            let split: Split = split
                .parse()
                .map_err(|msg: String| parse_err(line_no, msg))?;
            if !seen_paths.insert(path) {
                return Err(IoError::DuplicatePath {
                    path: origin.to_string(),
                    line: line_no,
                    dup: path.to_string(),
                });
            }
            entries.push(ManifestEntry {
                tracklet_id: tracklet_id.to_string(),
                identity: identity.to_string(),
                camera: (camera != "-").then(|| camera.to_string()),
                split,
                path: path.to_string(),
            });
        }
        Ok(Self {
            feature_dim,
            entries,
        })
    }

    /// Renders the canonical manifest text; `parse` of the result is lossless.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(MANIFEST_HEADER);
        out.push('\n');
        out.push_str(&format!("dim\t{}\n", self.feature_dim));
        for e in &self.entries {
            let camera = e.camera.as_deref().unwrap_or("-");
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                e.tracklet_id, e.identity, camera, e.split, e.path
            ));
        }
        out
    }
}

/// Resolves a manifest entry's path relative to the manifest file.
pub fn resolve_path(manifest_path: &Path, entry_path: &str) -> PathBuf {
    let p = Path::new(entry_path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(p)
    }
}

/// Feature count declared by a referenced file, read from its header (binary
/// formats) or its first data row (CSV).
fn referenced_feature_dim(path: &Path) -> IoResult<usize> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    match ext {
        "bin" | "rep" => {
            let mut file = fs::File::open(path).map_err(file_err(path))?;
            let actual = file.metadata().map_err(file_err(path))?.len();
            let mut head = [0u8; 13];
            if actual < head.len() as u64 {
                return Err(IoError::TruncatedFile {
                    path: path_str(path),
                    expected: head.len() as u64,
                    actual,
                });
            }
            file.read_exact(&mut head).map_err(file_err(path))?;
            let mut r = Reader::new(&head, path);
            if ext == "bin" {
                r.header(TRACKLET_MAGIC)?;
                r.u32()?;
                Ok(r.u32()? as usize)
            } else {
                r.header(REPRESENTATION_MAGIC)?;
                Ok(r.u32()? as usize)
            }
        }
        _ => {
            let text = fs::read_to_string(path).map_err(file_err(path))?;
            let first = text
                .lines()
                .map(str::trim)
                .find(|l| !l.is_empty() && !l.starts_with('#'));
            match first {
                Some(line) => Ok(line.split(',').count()),
                None => Err(IoError::Invalid {
                    path: path_str(path),
                    source: Error::EmptyMatrix { rows: 0, cols: 0 },
                }),
            }
        }
    }
}

/// Loads and fully validates a manifest: syntax, unique paths, and agreement
/// between the declared feature count and every referenced file.
pub fn load_manifest(path: &Path) -> IoResult<Manifest> {
    let text = fs::read_to_string(path).map_err(file_err(path))?;
    let manifest = Manifest::parse(&text, &path_str(path))?;
    for entry in &manifest.entries {
        let referenced = resolve_path(path, &entry.path);
        let found = referenced_feature_dim(&referenced)?;
        if found != manifest.feature_dim {
            return Err(IoError::DimMismatch {
                referenced: path_str(&referenced),
                declared: manifest.feature_dim,
                found,
            });
        }
    }
    Ok(manifest)
}

/// Writes the canonical manifest text.
pub fn save_manifest(path: &Path, manifest: &Manifest) -> IoResult<()> {
    fs::write(path, manifest.render()).map_err(file_err(path))
}
