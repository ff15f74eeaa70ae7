//! Binary dataset files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic     8 bytes  "QREGDAT1"
//! version   u32      1
//! n_rows    u64
//! dim       u32      features per row, bias included
//! seed      u64
//! noise     f64
//! records   n_rows × (dim f64 features, 1 f64 label)
//! ```
//!
//! A sidecar `<path>.meta.json` holds the generating spec and true weights.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use qreg_core::{
    generate_dataset, GramAccumulator, GramSystem, RowSource, SyntheticSpec, TrueModel,
};
use serde::{Deserialize, Serialize};

pub const MAGIC: &[u8; 8] = b"QREGDAT1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 8 + 4 + 8 + 4 + 8 + 8;
pub const DEFAULT_CHUNK_ROWS: usize = 4096;

#[derive(Debug, thiserror::Error)]
pub enum DataFileError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path} is not a dataset file (bad magic)")]
    BadMagic { path: PathBuf },
    #[error("{path} has unsupported version {found}, expected {VERSION}")]
    UnsupportedVersion { path: PathBuf, found: u32 },
    #[error("{path} is truncated: header declares {expected} rows, file holds {found}")]
    Truncated {
        path: PathBuf,
        expected: u64,
        found: u64,
    },
    #[error("{path} holds {extra_bytes} bytes beyond the {expected} rows its header declares")]
    TrailingData {
        path: PathBuf,
        expected: u64,
        extra_bytes: u64,
    },
    #[error("row {row} has {found} features, header declares {expected}")]
    RowDimension {
        row: u64,
        expected: usize,
        found: usize,
    },
    #[error("wrote {written} rows, header declares {expected}")]
    RowCount { expected: u64, written: u64 },
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("sidecar {path}: {source}")]
    Meta {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

type Result<T, E = DataFileError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub n_rows: u64,
    pub dim: usize,
    pub seed: u64,
    pub noise_sigma: f64,
}

impl DatasetHeader {
    pub fn for_spec(spec: &SyntheticSpec) -> Self {
        DatasetHeader {
            n_rows: spec.n_rows,
            dim: spec.dim(),
            seed: spec.seed,
            noise_sigma: spec.noise_sigma,
        }
    }

    fn record_len(&self) -> u64 {
        (self.dim as u64 + 1) * 8
    }

    fn encode(&self) -> Result<[u8; HEADER_LEN as usize]> {
        let dim = u32::try_from(self.dim).map_err(|_| {
            DataFileError::InvalidHeader(format!("dimension {} too large", self.dim))
        })?;
        if dim == 0 {
            return Err(DataFileError::InvalidHeader(
                "dimension must be at least 1".into(),
            ));
        }
        let mut buf = [0u8; HEADER_LEN as usize];
        buf[0..8].copy_from_slice(MAGIC);
        buf[8..12].copy_from_slice(&VERSION.to_le_bytes());
        buf[12..20].copy_from_slice(&self.n_rows.to_le_bytes());
        buf[20..24].copy_from_slice(&dim.to_le_bytes());
        buf[24..32].copy_from_slice(&self.seed.to_le_bytes());
        buf[32..40].copy_from_slice(&self.noise_sigma.to_le_bytes());
        Ok(buf)
    }
}

/// Contents of `<path>.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub spec: SyntheticSpec,
    pub true_model: TrueModel,
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DataFileError + '_ {
    move |source| DataFileError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Streams rows into a dataset file and checks the count against the header.
pub struct DatasetWriter {
    path: PathBuf,
    out: BufWriter<File>,
    header: DatasetHeader,
    written: u64,
}

impl DatasetWriter {
    pub fn create(path: &Path, header: DatasetHeader) -> Result<Self> {
        let bytes = header.encode()?;
        let file = File::create(path).map_err(io_err(path))?;
        let mut out = BufWriter::new(file);
        out.write_all(&bytes).map_err(io_err(path))?;
        Ok(DatasetWriter {
            path: path.to_path_buf(),
            out,
            header,
            written: 0,
        })
    }

    pub fn write_row(&mut self, x: &[f64], y: f64) -> Result<()> {
        if x.len() != self.header.dim {
            return Err(DataFileError::RowDimension {
                row: self.written,
                expected: self.header.dim,
                found: x.len(),
            });
        }
        if self.written == self.header.n_rows {
            return Err(DataFileError::RowCount {
                expected: self.header.n_rows,
                written: self.written + 1,
            });
        }
        for v in x.iter().chain(std::iter::once(&y)) {
            self.out
                .write_all(&v.to_le_bytes())
                .map_err(io_err(&self.path))?;
        }
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        if self.written != self.header.n_rows {
            return Err(DataFileError::RowCount {
                expected: self.header.n_rows,
                written: self.written,
            });
        }
        self.out.flush().map_err(io_err(&self.path))
    }
}

/// Writes `rows` under `header`.
pub fn save_dataset<I, R>(path: &Path, header: DatasetHeader, rows: I) -> Result<()>
where
    I: IntoIterator<Item = (R, f64)>,
    R: AsRef<[f64]>,
{
    let mut w = DatasetWriter::create(path, header)?;
    for (x, y) in rows {
        w.write_row(x.as_ref(), y)?;
    }
    w.finish()
}

/// Generates `spec` straight to `path` and writes the sidecar.
pub fn generate_to_file(path: &Path, spec: &SyntheticSpec) -> anyhow::Result<TrueModel> {
    let mut w = DatasetWriter::create(path, DatasetHeader::for_spec(spec))?;
    let mut failure = None;
    let model = generate_dataset(spec, |x, y| {
        if failure.is_none() {
            if let Err(e) = w.write_row(x, y) {
                failure = Some(e);
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    w.finish()?;
    let meta = DatasetMeta {
        spec: *spec,
        true_model: model.clone(),
    };
    let mpath = meta_path(path);
    let json = serde_json::to_vec_pretty(&meta).map_err(|source| DataFileError::Meta {
        path: mpath.clone(),
        source,
    })?;
    std::fs::write(&mpath, json).map_err(io_err(&mpath))?;
    Ok(model)
}

pub fn load_meta(path: &Path) -> Result<DatasetMeta> {
    let mpath = meta_path(path);
    let bytes = std::fs::read(&mpath).map_err(io_err(&mpath))?;
    serde_json::from_slice(&bytes).map_err(|source| DataFileError::Meta {
        path: mpath,
        source,
    })
}

/// Chunked reader over a dataset file. Each pass re-reads from disk, so the
/// full matrix is never held in memory.
pub struct DatasetReader {
    path: PathBuf,
    file: BufReader<File>,
    header: DatasetHeader,
    chunk_rows: usize,
}

impl DatasetReader {
    pub fn open(path: &Path, chunk_rows: usize) -> Result<Self> {
        let file = File::open(path).map_err(io_err(path))?;
        let len = file.metadata().map_err(io_err(path))?.len();
        let mut file = BufReader::new(file);
        let mut buf = [0u8; HEADER_LEN as usize];
        if len < HEADER_LEN {
            return Err(DataFileError::BadMagic {
                path: path.to_path_buf(),
            });
        }
        file.read_exact(&mut buf).map_err(io_err(path))?;
        if &buf[0..8] != MAGIC {
            return Err(DataFileError::BadMagic {
                path: path.to_path_buf(),
            });
        }
        let version = u32::from_le_bytes(buf[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(DataFileError::UnsupportedVersion {
                path: path.to_path_buf(),
                found: version,
            });
        }
        let header = DatasetHeader {
            n_rows: u64::from_le_bytes(buf[12..20].try_into().unwrap()),
            dim: u32::from_le_bytes(buf[20..24].try_into().unwrap()) as usize,
            seed: u64::from_le_bytes(buf[24..32].try_into().unwrap()),
            noise_sigma: f64::from_le_bytes(buf[32..40].try_into().unwrap()),
        };
        if header.dim == 0 {
            return Err(DataFileError::InvalidHeader("dimension is zero".into()));
        }
        let body = len - HEADER_LEN;
        let expected = header.n_rows.checked_mul(header.record_len());
        match expected {
            Some(e) if body < e => {
                return Err(DataFileError::Truncated {
                    path: path.to_path_buf(),
                    expected: header.n_rows,
                    found: body / header.record_len(),
                })
            }
            Some(e) if body > e => {
                return Err(DataFileError::TrailingData {
                    path: path.to_path_buf(),
                    expected: header.n_rows,
                    extra_bytes: body - e,
                })
            }
            Some(_) => {}
            None => return Err(DataFileError::InvalidHeader("row count overflows".into())),
        }
        Ok(DatasetReader {
            path: path.to_path_buf(),
            file,
            header,
            chunk_rows: chunk_rows.max(1),
        })
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    /// One pass over the file, `chunk_rows` records at a time.
    pub fn for_each_chunk(&mut self, mut f: impl FnMut(&[f64])) -> Result<()> {
        self.file
            .seek(SeekFrom::Start(HEADER_LEN))
            .map_err(io_err(&self.path))?;
        let stride = self.header.dim + 1;
        let mut bytes = vec![0u8; self.chunk_rows * stride * 8];
        let mut values = vec![0.0f64; self.chunk_rows * stride];
        let mut remaining = self.header.n_rows;
        while remaining > 0 {
            let rows = remaining.min(self.chunk_rows as u64) as usize;
            let nbytes = rows * stride * 8;
            self.file.read_exact(&mut bytes[..nbytes]).map_err(|e| {
                if e.kind() == io::ErrorKind::UnexpectedEof {
                    DataFileError::Truncated {
                        path: self.path.clone(),
                        expected: self.header.n_rows,
                        found: self.header.n_rows - remaining,
                    }
                } else {
                    DataFileError::Io {
                        path: self.path.clone(),
                        source: e,
                    }
                }
            })?;
            for (v, b) in values.iter_mut().zip(bytes[..nbytes].chunks_exact(8)) {
                *v = f64::from_le_bytes(b.try_into().unwrap());
            }
            f(&values[..rows * stride]);
            remaining -= rows as u64;
        }
        Ok(())
    }

    pub fn for_each_record(&mut self, mut f: impl FnMut(&[f64], f64)) -> Result<()> {
        let stride = self.header.dim + 1;
        self.for_each_chunk(|chunk| {
            for rec in chunk.chunks_exact(stride) {
                f(&rec[..stride - 1], rec[stride - 1]);
            }
        })
    }

    pub fn gram(&mut self) -> anyhow::Result<GramSystem> {
        let mut acc = GramAccumulator::new(self.header.dim);
        self.for_each_record(|x, y| acc.push(x, y).expect("dimension fixed by header"))?;
        Ok(acc.finish()?)
    }
}

impl RowSource for DatasetReader {
    fn dim(&self) -> usize {
        self.header.dim
    }

    fn for_each_row(&mut self, f: &mut dyn FnMut(&[f64], f64)) -> qreg_core::Result<()> {
        self.for_each_record(|x, y| f(x, y))
            .map_err(|e| qreg_core::Error::RowSource(Box::new(e)))
    }
}
