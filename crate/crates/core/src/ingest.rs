//! IDX (MNIST) and binary PGM readers and writers.
//!
//! IDX headers are big-endian: a magic word whose low byte is the tensor rank
//! and whose third byte is the element type (`0x08` = unsigned byte), followed
//! by one 32-bit extent per axis and the raw payload.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::image::{GreyscaleImage, ImageError, LabeledDataset};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
pub const DEFAULT_DIM_CAP: usize = 10_000;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic 0x{found:08x}, expected 0x{expected:08x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("file truncated: header promises {expected} bytes of payload, found {found}")]
    TruncatedFile { expected: usize, found: usize },
    #[error("dimension {value} exceeds cap {cap}")]
    DimOverflow { value: usize, cap: usize },
    #[error("label {label} at index {index} outside 0..=9")]
    LabelOutOfRange { index: usize, label: u8 },
    #[error("requested {requested} items from a dataset of {available}")]
    NOutOfRange { requested: usize, available: usize },
    #[error("malformed PGM: {0}")]
    BadPgm(String),
    #[error("PGM maxval {0} unsupported (only 255)")]
    UnsupportedMaxval(u32),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("image pixels must be integral grey levels to encode losslessly")]
    NonIntegralPixels,
}

/// Reader options for IDX files.
#[derive(Debug, Clone, Copy)]
pub struct IdxOptions {
    /// Largest accepted extent for any image axis.
    pub dim_cap: usize,
}

impl Default for IdxOptions {
    fn default() -> Self {
        Self {
            dim_cap: DEFAULT_DIM_CAP,
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, IngestError> {
    fs::read(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32, IngestError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(IngestError::TruncatedFile {
            expected: at + 4,
            found: bytes.len(),
        })
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<Vec<GreyscaleImage>, IngestError> {
    parse_idx_images(&read_file(path.as_ref())?, IdxOptions::default())
}

pub fn parse_idx_images(
    bytes: &[u8],
    opts: IdxOptions,
) -> Result<Vec<GreyscaleImage>, IngestError> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(IngestError::BadMagic {
            expected: IDX_IMAGES_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    for v in [rows, cols] {
        if v > opts.dim_cap {
            return Err(IngestError::DimOverflow {
                value: v,
                cap: opts.dim_cap,
            });
        }
    }
    let per_image = rows * cols;
    let payload = &bytes[16..];
    let expected = count
        .checked_mul(per_image)
        .ok_or(IngestError::DimOverflow {
            value: count,
            cap: opts.dim_cap,
        })?;
    if payload.len() < expected {
        return Err(IngestError::TruncatedFile {
            expected,
            found: payload.len(),
        });
    }
    if count > 0 && per_image == 0 {
        return Err(ImageError::EmptyDims {
            width: cols,
            height: rows,
        }
        .into());
    }
    payload[..expected]
        .chunks_exact(per_image.max(1))
        .take(count)
        .map(|chunk| GreyscaleImage::from_bytes(cols, rows, chunk).map_err(Into::into))
        .collect()
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>, IngestError> {
    parse_idx_labels(&read_file(path.as_ref())?)
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, IngestError> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(IngestError::BadMagic {
            expected: IDX_LABELS_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    let payload = &bytes[8..];
    if payload.len() < count {
        return Err(IngestError::TruncatedFile {
            expected: count,
            found: payload.len(),
        });
    }
    let labels = payload[..count].to_vec();
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l > 9) {
        return Err(IngestError::LabelOutOfRange { index, label });
    }
    Ok(labels)
}

/// Loads an image file and its label file into one dataset.
pub fn load_idx_dataset(
    images: impl AsRef<Path>,
    labels: impl AsRef<Path>,
) -> Result<LabeledDataset, IngestError> {
    let source = images.as_ref().display().to_string();
    let imgs = load_idx_images(images)?;
    let lbls = load_idx_labels(labels)?;
    Ok(LabeledDataset::new(imgs, lbls, source)?)
}

/// Encodes same-sized integral images as an IDX unsigned-byte 3D tensor.
pub fn encode_idx_images(images: &[GreyscaleImage]) -> Result<Vec<u8>, IngestError> {
    let (rows, cols) = images
        .first()
        .map_or((0, 0), |img| (img.height(), img.width()));
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    out.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.len() as u32).to_be_bytes());
    out.extend_from_slice(&(rows as u32).to_be_bytes());
    out.extend_from_slice(&(cols as u32).to_be_bytes());
    for img in images {
        if img.height() != rows || img.width() != cols {
            return Err(ImageError::LengthMismatch {
                expected: rows * cols,
                got: img.len(),
            }
            .into());
        }
        if !img.is_integral() {
            return Err(IngestError::NonIntegralPixels);
        }
        out.extend(img.pixels().iter().map(|&p| p as u8));
    }
    Ok(out)
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// First `n` items, original order.
pub fn take_first(dataset: LabeledDataset, n: usize) -> Result<LabeledDataset, IngestError> {
    if n > dataset.len() {
        return Err(IngestError::NOutOfRange {
            requested: n,
            available: dataset.len(),
        });
    }
    let (mut images, mut labels, source) = dataset.into_parts();
    images.truncate(n);
    labels.truncate(n);
    Ok(LabeledDataset::new(images, labels, source)?)
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<GreyscaleImage, IngestError> {
    parse_pgm(&read_file(path.as_ref())?)
}

/// Parses a binary (P5) PGM with maxval 255.
pub fn parse_pgm(bytes: &[u8]) -> Result<GreyscaleImage, IngestError> {
    let mut pos = 0usize;
    let mut token = || -> Result<String, IngestError> {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while let Some(&c) = bytes.get(pos) {
                        pos += 1;
                        if c == b'\n' {
                            break;
                        }
                    }
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(IngestError::BadPgm("unexpected end of header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|c| !c.is_ascii_whitespace()) {
            pos += 1;
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    if magic != "P5" {
        return Err(IngestError::BadPgm(format!("magic {magic:?}, expected P5")));
    }
    let mut number = |what: &str| -> Result<u32, IngestError> {
        let t = token()?;
        t.parse()
            .map_err(|_| IngestError::BadPgm(format!("bad {what} {t:?}")))
    };
    let width = number("width")? as usize;
    let height = number("height")? as usize;
    let maxval = number("maxval")?;
    if maxval != 255 {
        return Err(IngestError::UnsupportedMaxval(maxval));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = width * height;
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() < need {
        return Err(IngestError::TruncatedFile {
            expected: need,
            found: raster.len(),
        });
    }
    Ok(GreyscaleImage::from_bytes(width, height, &raster[..need])?)
}

/// Encodes an image as binary PGM, rounding fractional grey values.
pub fn encode_pgm(img: &GreyscaleImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.to_bytes_rounded());
    out
}
