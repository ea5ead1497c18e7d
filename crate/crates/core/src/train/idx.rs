//! IDX reader for MNIST-style image and label files, optionally gzipped.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use flate2::bufread::GzDecoder;

use crate::error::{Error, Result};

pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;

/// Grayscale images with pixel values in `[0, 1]` and their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub rows: usize,
    pub cols: usize,
    pub images: Vec<Vec<f32>>,
    pub labels: Vec<u8>,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let file = File::open(path)?;
    let mut bytes = Vec::new();
    if path.extension().is_some_and(|e| e == "gz") {
        GzDecoder::new(BufReader::new(file)).read_to_end(&mut bytes)?;
    } else {
        BufReader::new(file).read_to_end(&mut bytes)?;
    }
    Ok(bytes)
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn fail(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Format {
            path: PathBuf::from(self.path),
            offset: offset as u64,
            message: message.into(),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.fail(
                self.bytes.len(),
                format!("truncated: needed {n} bytes at offset {}", self.pos),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn magic(&mut self, expected: u32) -> Result<()> {
        let m = self.u32()?;
        if m != expected {
            return Err(self.fail(0, format!("bad magic {m:#010x}, expected {expected:#010x}")));
        }
        Ok(())
    }
}

/// Parses an IDX image file (`0x00000803`).
pub fn parse_idx_images(path: &Path, bytes: &[u8]) -> Result<(usize, usize, Vec<Vec<f32>>)> {
    let mut c = Cursor {
        path,
        bytes,
        pos: 0,
    };
    c.magic(IDX_IMAGES_MAGIC)?;
    let count = c.u32()? as usize;
    let rows = c.u32()? as usize;
    let cols = c.u32()? as usize;
    let size = rows * cols;
    if size == 0 {
        return Err(c.fail(8, "zero-sized images"));
    }
    let mut images = Vec::with_capacity(count);
    for _ in 0..count {
        let px = c.take(size)?;
        images.push(px.iter().map(|&v| v as f32 / 255.0).collect());
    }
    Ok((rows, cols, images))
}

/// Parses an IDX label file (`0x00000801`); labels must be digits.
pub fn parse_idx_labels(path: &Path, bytes: &[u8]) -> Result<Vec<u8>> {
    let mut c = Cursor {
        path,
        bytes,
        pos: 0,
    };
    c.magic(IDX_LABELS_MAGIC)?;
    let count = c.u32()? as usize;
    let start = c.pos;
    let labels = c.take(count)?.to_vec();
    if let Some(i) = labels.iter().position(|&l| l > 9) {
        return Err(c.fail(start + i, format!("label {} is not a digit", labels[i])));
    }
    Ok(labels)
}

/// Loads an image/label file pair; `.gz` files are decompressed.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<RawDataset> {
    let (rows, cols, images) = parse_idx_images(images_path, &read_all(images_path)?)?;
    let labels = parse_idx_labels(labels_path, &read_all(labels_path)?)?;
    if labels.len() != images.len() {
        return Err(Error::Format {
            path: labels_path.to_path_buf(),
            offset: 4,
            message: format!(
                "label count {} does not match image count {}",
                labels.len(),
                images.len()
            ),
        });
    }
    Ok(RawDataset {
        rows,
        cols,
        images,
        labels,
    })
}
