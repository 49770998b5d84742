//! Image ingestion (IDX files, raster directories) and PGM export.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::tensor_io::OffsetReader;
use crate::error::{Error, Result};
use crate::pde::{Field, Grid2D};

/// Magic of an unsigned-byte, rank-3 IDX file.
pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;

/// A stack of 8-bit grayscale images, row-major, top row first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageStack {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl ImageStack {
    pub fn image(&self, k: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[k * n..(k + 1) * n]
    }
}

pub fn read_idx<R: Read>(reader: R) -> Result<ImageStack> {
    let mut r = OffsetReader::new(reader);
    let magic = r.read_u32_be("IDX magic")?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::Format {
            offset: 0,
            msg: format!("IDX magic {magic:#010x}, expected {IDX_IMAGE_MAGIC:#010x}"),
        });
    }
    let count = r.read_u32_be("IDX image count")? as usize;
    let rows = r.read_u32_be("IDX row count")? as usize;
    let cols = r.read_u32_be("IDX column count")? as usize;
    let total = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::Format {
            offset: 4,
            msg: "IDX dimensions overflow".into(),
        })?;
    let mut pixels = vec![0u8; total];
    r.read_exact(&mut pixels, "IDX pixel data")?;
    Ok(ImageStack {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn write_idx<W: Write>(w: &mut W, images: &ImageStack) -> Result<()> {
    w.write_all(&IDX_IMAGE_MAGIC.to_be_bytes())?;
    for d in [images.count, images.rows, images.cols] {
        w.write_all(&(d as u32).to_be_bytes())?;
    }
    w.write_all(&images.pixels)?;
    Ok(())
}

/// Maps pixel levels `0..=255` affinely onto `[low, high]` nodal values.
///
/// The top image row lands on the largest `s2`, so a picture keeps its
/// orientation in the `s2`-up frame.
pub fn image_to_field(pixels: &[u8], rows: usize, cols: usize, grid: &Grid2D, low: f64, high: f64) -> Result<Field> {
    if rows != grid.n2 || cols != grid.n1 {
        return Err(Error::shape(
            "image-to-field",
            format!("{rows}x{cols} image on a {}x{} grid", grid.n2, grid.n1),
        ));
    }
    Ok(grid.sample_nodes(|i, j| {
        let p = pixels[(rows - 1 - i) * cols + j] as f64 / 255.0;
        low + (high - low) * p
    }))
}

/// Loads an IDX file or a directory of grayscale raster images (sorted by
/// file name) as fields on `grid`.
pub fn load_image_dataset(path: &Path, grid: &Grid2D, low: f64, high: f64) -> Result<Vec<Field>> {
    let stack = if path.is_dir() {
        read_image_dir(path)?
    } else {
        read_idx(BufReader::new(File::open(path).map_err(Error::at_path(path))?))?
    };
    (0..stack.count)
        .map(|k| image_to_field(stack.image(k), stack.rows, stack.cols, grid, low, high))
        .collect()
}

fn read_image_dir(dir: &Path) -> Result<ImageStack> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(Error::at_path(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    let mut stack = ImageStack {
        count: 0,
        rows: 0,
        cols: 0,
        pixels: Vec::new(),
    };
    for p in paths {
        let img = image::open(&p)
            .map_err(|e| Error::invalid(format!("{}: {e}", p.display())))?
            .into_luma8();
        let (cols, rows) = (img.width() as usize, img.height() as usize);
        if stack.count > 0 && (rows, cols) != (stack.rows, stack.cols) {
            return Err(Error::shape(
                "image-directory",
                format!("{} is {rows}x{cols}, earlier images are {}x{}", p.display(), stack.rows, stack.cols),
            ));
        }
        stack.rows = rows;
        stack.cols = cols;
        stack.count += 1;
        stack.pixels.extend_from_slice(img.as_raw());
    }
    if stack.count == 0 {
        return Err(Error::invalid(format!("no images in {}", dir.display())));
    }
    Ok(stack)
}

/// Writes a binary PGM with `lo -> 0` and `hi -> 255`, largest `s2` on top.
pub fn write_pgm(path: &Path, field: &Field, lo: f64, hi: f64) -> Result<()> {
    let g = &field.grid;
    let mut w = BufWriter::new(File::create(path).map_err(Error::at_path(path))?);
    write!(w, "P5\n{} {}\n255\n", g.n1, g.n2)?;
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut row = vec![0u8; g.n1];
    for i in (0..g.n2).rev() {
        for (j, px) in row.iter_mut().enumerate() {
            *px = (255.0 * (field.at(i, j) - lo) / span).round().clamp(0.0, 255.0) as u8;
        }
        w.write_all(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// [`write_pgm`] scaled to the field's own range.
pub fn write_pgm_auto(path: &Path, field: &Field) -> Result<()> {
    let lo = field.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = field.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    write_pgm(path, field, lo, hi)
}

/// 8-bit PNG, same scaling and orientation as [`write_pgm`].
pub fn write_png(path: &Path, field: &Field, lo: f64, hi: f64) -> Result<()> {
    let g = &field.grid;
    let span = if hi > lo { hi - lo } else { 1.0 };
    let img = image::GrayImage::from_fn(g.n1 as u32, g.n2 as u32, |x, y| {
        let v = field.at(g.n2 - 1 - y as usize, x as usize);
        image::Luma([(255.0 * (v - lo) / span).round().clamp(0.0, 255.0) as u8])
    });
    img.save(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}
