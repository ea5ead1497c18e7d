//! Binary PGM (P5) images for bipolar vectors: `+1` is white, `-1` black.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use bnnsat::Bipolar;

/// Encodes `x` as a `width x height` P5 image with maxval 255.
pub fn render_pgm(x: &[Bipolar], width: usize, height: usize) -> Result<Vec<u8>> {
    ensure!(
        width * height == x.len(),
        "image is {width}x{height} but the vector has {} entries",
        x.len()
    );
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    for &v in x {
        ensure!(v == 1 || v == -1, "entry {v} is not bipolar");
        out.push(if v > 0 { 255 } else { 0 });
    }
    Ok(out)
}

pub fn write_pgm(path: &Path, x: &[Bipolar], width: usize, height: usize) -> Result<()> {
    let bytes = render_pgm(x, width, height)?;
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Decodes a P5 image; pixels at or above half of maxval become `+1`.
/// Returns the vector with the image width and height.
pub fn parse_pgm(bytes: &[u8]) -> Result<(Vec<Bipolar>, usize, usize)> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        ensure!(start < pos, "truncated PGM header");
        fields.push(std::str::from_utf8(&bytes[start..pos])?.to_string());
    }
    if fields[0] != "P5" {
        bail!("not a binary PGM (magic `{}`)", fields[0]);
    }
    let width: usize = fields[1].parse().context("PGM width")?;
    let height: usize = fields[2].parse().context("PGM height")?;
    let maxval: u32 = fields[3].parse().context("PGM maxval")?;
    ensure!((1..=255).contains(&maxval), "unsupported maxval {maxval}");
    // exactly one whitespace byte separates the header from the raster
    let raster = bytes.get(pos + 1..).unwrap_or_default();
    ensure!(
        raster.len() == width * height,
        "expected {} pixels, found {}",
        width * height,
        raster.len()
    );
    let x = raster
        .iter()
        .map(|&p| if 2 * p as u32 >= maxval { 1 } else { -1 })
        .collect();
    Ok((x, width, height))
}

pub fn read_pgm(path: &Path) -> Result<(Vec<Bipolar>, usize, usize)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_pgm(&bytes).with_context(|| format!("parsing {}", path.display()))
}
